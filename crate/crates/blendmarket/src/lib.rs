//! Market clearing for pipeline transport of natural-gas/hydrogen blends.
//!
//! The library solves a double-sided auction over a gas pipeline network
//! that carries blends of natural gas and green hydrogen: suppliers offer
//! mass at a price, consumers bid for energy, and a carbon-offset incentive
//! rewards displaced emissions. The steady-state pipeline physics (pressure
//! balance, constituent mass balances, mixing continuity, compression)
//! enter as constraints of a nonlinear program whose dual solution carries
//! locational marginal prices of natural gas, hydrogen, blend, and energy,
//! plus the decarbonization premium and pass-through credits paid around
//! the incentive.
//!
//! Typical flow:
//!
//! 1. build or load a [`Network`](domain::Network) and a
//!    [`MarketScenario`](domain::MarketScenario),
//! 2. [`clear_market`] — non-dimensionalize, assemble, solve, re-dimensionalize,
//! 3. read prices and aggregates from the [`MarketReport`](pricing::MarketReport),
//! 4. audit the KKT conditions with [`verify`].
//!
//! All numeric modules are generic over the scalar type (`f32` or `f64`);
//! the aliases at the crate root fix the default double-precision
//! instantiation used by the CLI and the file formats.

pub mod bundled;
pub mod domain;
pub mod io;
pub mod linalg;
pub mod nlp;
pub mod pricing;
pub mod scalar;
pub mod scaling;
pub mod solver;
pub mod verify;

use thiserror::Error;

pub use scalar::Real;

/// Double-precision aliases for the main entry types.
pub type Network = domain::Network<f64>;
pub type NetworkBuilder = domain::NetworkBuilder<f64>;
pub type MarketScenario = domain::MarketScenario<f64>;
pub type GasConstants = domain::GasConstants<f64>;
pub type ScalingBasis = scaling::ScalingBasis<f64>;
pub type SolveOptions = solver::SolveOptions<f64>;
pub type Solution = solver::Solution<f64>;
pub type MarketReport = pricing::MarketReport<f64>;
pub type KktReport = verify::KktReport<f64>;

/// Everything produced by one market-clearing solve.
///
/// `solution` is in SI and dollar units; `scaled_solution` stays in the
/// non-dimensional units the solver worked in, which is what the KKT
/// auditor consumes.
#[derive(Clone, Debug)]
pub struct MarketOutcome<T: Real> {
    pub scaled: scaling::ScaledSystem<T>,
    pub scaled_solution: solver::Solution<T>,
    pub solution: solver::Solution<T>,
    pub report: pricing::MarketReport<T>,
}

/// A market-clearing attempt that did not produce an optimal solution.
#[derive(Debug, Error)]
pub enum ClearError<T: Real> {
    #[error("problem assembly failed: {0}")]
    Assemble(#[from] nlp::AssembleError),
    #[error("scaling basis: {0}")]
    Scaling(#[from] scaling::ScalingError),
    #[error("solver stopped with status {status:?} (KKT residual {residual})")]
    NotOptimal {
        status: solver::SolveStatus,
        residual: T,
        solution: Box<solver::Solution<T>>,
    },
}

/// Clears the market: scales the system, solves the program, maps the
/// solution back to SI units, and derives the market report.
pub fn clear_market<T: Real>(
    net: &domain::Network<T>,
    scenario: &domain::MarketScenario<T>,
    opts: &solver::SolveOptions<T>,
) -> Result<MarketOutcome<T>, ClearError<T>> {
    let basis = scaling::ScalingBasis::from_network(net, &scenario.constants)?;
    let scaled = scaling::nondimensionalize(net, scenario, &basis);
    let scaled_solution = {
        let problem = nlp::assemble(&scaled.network, &scaled.scenario)?;
        solver::solve(&problem, opts)
    };
    if !scaled_solution.is_optimal() {
        return Err(ClearError::NotOptimal {
            status: scaled_solution.status,
            residual: scaled_solution.kkt_residual,
            solution: Box::new(scaled_solution),
        });
    }
    let solution = scaling::redimensionalize_solution(&scaled_solution, &scaled);
    let report = pricing::market_report(net, scenario, &solution);
    Ok(MarketOutcome {
        scaled,
        scaled_solution,
        solution,
        report,
    })
}

/// Audits a market outcome against the first- and second-order optimality
/// conditions and the economic consistency properties.
pub fn verify_outcome<T: Real>(
    outcome: &MarketOutcome<T>,
    tolerance: T,
) -> Result<verify::KktReport<T>, nlp::AssembleError> {
    let problem = nlp::assemble(&outcome.scaled.network, &outcome.scaled.scenario)?;
    Ok(verify::verify_solution(
        &problem,
        &outcome.scaled_solution,
        tolerance,
    ))
}
