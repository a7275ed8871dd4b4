//! Non-dimensionalization of the physical system and re-dimensionalization
//! of primal/dual results.
//!
//! The optimization runs on scaled data: pressures relative to the slack
//! pressure, lengths relative to a 5 km reference, flows relative to a
//! nominal mass flow derived from the geometric-mean wave speed. Prices are
//! left in dollars against a 1 $/kg reference, with bid prices absorbing the
//! calorific-value scale so that the scaled objective equals J / (1 $/kg ·
//! φ0). Every dual is mapped back to SI by the chain rule on the scaled
//! constraint definitions, so the factors below are the single source of
//! truth for both directions.

use thiserror::Error;

use crate::domain::{DomainError, GasConstants, MarketScenario, Network, NetworkBuilder, SideDraw};
use crate::scalar::{lit, Real};
use crate::solver::Solution;

/// Universal gas constant [J/mol/K].
const UNIVERSAL_GAS: f64 = 8.314;

/// Isothermal wave speed √(R·T/M) [m/s] for molar mass `m_molar` [kg/mol]
/// at temperature `temp` [K].
pub fn wave_speed<T: Real>(m_molar: T, temp: T) -> Result<T, DomainError> {
    if m_molar <= T::zero() {
        return Err(DomainError::NonPositive {
            field: "molar mass",
            value: m_molar.to_f64().unwrap_or(f64::NAN),
        });
    }
    if temp <= T::zero() {
        return Err(DomainError::NonPositive {
            field: "temperature",
            value: temp.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok((lit::<T>(UNIVERSAL_GAS) * temp / m_molar).sqrt())
}

/// Square of the wave speed in the blend, V(γ) = γ·a_H₂² + (1-γ)·a_NG².
pub fn blend_wave_speed_sq<T: Real>(constants: &GasConstants<T>, gamma: T) -> Result<T, DomainError> {
    if gamma < T::zero() || gamma > T::one() {
        return Err(DomainError::FractionOutOfRange(
            gamma.to_f64().unwrap_or(f64::NAN),
        ));
    }
    Ok(blend_wave_speed_sq_unchecked(constants, gamma))
}

#[inline]
pub(crate) fn blend_wave_speed_sq_unchecked<T: Real>(constants: &GasConstants<T>, gamma: T) -> T {
    gamma * constants.a_h2 * constants.a_h2 + (T::one() - gamma) * constants.a_ng * constants.a_ng
}

/// Reference quantities for non-dimensionalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingBasis<T> {
    /// Pressure scale [Pa], conventionally the slack pressure.
    pub p0: T,
    /// Length scale [m].
    pub l0: T,
    /// Area scale [m²].
    pub a0_area: T,
    /// Wave-speed scale [m/s], geometric mean of the pure-gas wave speeds.
    pub a0: T,
    /// Density scale ρ0 = P0/a0² [kg/m³].
    pub rho0: T,
    /// Velocity scale u0 = ⌈a0⌉/300 [m/s].
    pub u0: T,
    /// Mass-flow scale φ0 = ρ0·u0·A0 [kg/s].
    pub phi0: T,
}

/// Invalid scaling basis input.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalingError {
    #[error("scaling basis entries must be positive ({field} = {value})")]
    NonPositive { field: &'static str, value: f64 },
    #[error("network needs a slack node to define the pressure scale")]
    NoSlackNode,
}

impl<T: Real> ScalingBasis<T> {
    /// Basis with l0 = 5000 m, A0 = 1 m², and the wave-speed scale taken as
    /// the geometric mean of the pure-gas wave speeds.
    pub fn new(p0: T, constants: &GasConstants<T>) -> Result<Self, ScalingError> {
        if p0 <= T::zero() {
            return Err(ScalingError::NonPositive {
                field: "p0",
                value: p0.to_f64().unwrap_or(f64::NAN),
            });
        }
        let a0 = (constants.a_ng * constants.a_h2).sqrt();
        let u0 = a0.ceil() / lit(300.0);
        let rho0 = p0 / (a0 * a0);
        let a0_area = T::one();
        let phi0 = rho0 * u0 * a0_area;
        Ok(ScalingBasis {
            p0,
            l0: lit(5000.0),
            a0_area,
            a0,
            rho0,
            u0,
            phi0,
        })
    }

    /// Basis anchored at the first slack node's pressure.
    pub fn from_network(net: &Network<T>, constants: &GasConstants<T>) -> Result<Self, ScalingError> {
        let &slack = net.slack_nodes().first().ok_or(ScalingError::NoSlackNode)?;
        let p0 = net.nodes()[slack]
            .slack_pressure
            .expect("slack node has slack pressure");
        Self::new(p0, constants)
    }

    /// Energy-flow scale φ0·R_NG [MJ/s] given the SI calorific value of
    /// natural gas.
    pub fn energy_scale(&self, r_ng: T) -> T {
        self.phi0 * r_ng
    }
}

/// Network and scenario expressed in non-dimensional units, ready for
/// problem assembly.
#[derive(Debug, Clone)]
pub struct ScaledSystem<T> {
    pub network: Network<T>,
    pub scenario: MarketScenario<T>,
    pub basis: ScalingBasis<T>,
    /// SI calorific value of natural gas, kept for re-dimensionalization.
    pub r_ng_si: T,
}

/// Scales network and scenario into non-dimensional units.
///
/// Pressures divide by P0, lengths and diameters by l0, areas by A0, mass
/// flows by φ0, energies by φ0·R_NG. Calorific values divide by R_NG and the
/// bid prices absorb the same factor; the pipe-flow coefficient carries
/// u0²/a0².
pub fn nondimensionalize<T: Real>(
    net: &Network<T>,
    scenario: &MarketScenario<T>,
    basis: &ScalingBasis<T>,
) -> ScaledSystem<T> {
    let r_ng = scenario.constants.r_ng;
    let sys = transform_system(net, scenario, basis, r_ng, Direction::Scale);
    ScaledSystem {
        network: sys.0,
        scenario: sys.1,
        basis: basis.clone(),
        r_ng_si: r_ng,
    }
}

/// Inverse of [`nondimensionalize`]: maps a scaled system back to SI units.
pub fn redimensionalize_system<T: Real>(scaled: &ScaledSystem<T>) -> (Network<T>, MarketScenario<T>) {
    transform_system(
        &scaled.network,
        &scaled.scenario,
        &scaled.basis,
        scaled.r_ng_si,
        Direction::Unscale,
    )
}

#[derive(Clone, Copy, PartialEq)]
enum Direction {
    Scale,
    Unscale,
}

fn apply<T: Real>(v: T, factor: T, dir: Direction) -> T {
    match dir {
        Direction::Scale => v / factor,
        Direction::Unscale => v * factor,
    }
}

fn transform_system<T: Real>(
    net: &Network<T>,
    scenario: &MarketScenario<T>,
    basis: &ScalingBasis<T>,
    r_ng_si: T,
    dir: Direction,
) -> (Network<T>, MarketScenario<T>) {
    use crate::domain::Participant;

    let e0 = basis.phi0 * r_ng_si;
    let velocity_ratio = (basis.u0 / basis.a0) * (basis.u0 / basis.a0);

    let mut parts = NetworkBuilder::<T>::new();
    for node in net.nodes() {
        let mut n = node.clone();
        n.min_pressure = apply(n.min_pressure, basis.p0, dir);
        n.max_pressure = apply(n.max_pressure, basis.p0, dir);
        n.slack_pressure = n.slack_pressure.map(|s| apply(s, basis.p0, dir));
        parts.nodes.push(n);
    }
    for pipe in net.pipes() {
        let mut p = pipe.clone();
        p.length = apply(p.length, basis.l0, dir);
        p.diameter = apply(p.diameter, basis.l0, dir);
        p.area = apply(p.area, basis.a0_area, dir);
        parts.pipes.push(p);
    }
    parts.compressors = net.compressors().to_vec();
    parts.gnodes = net.gnodes().to_vec();
    let network = parts
        .build()
        .expect("unit transform preserves structural validity");

    let c = &scenario.constants;
    let constants = GasConstants {
        r_h2: apply(c.r_h2, r_ng_si, dir),
        r_ng: apply(c.r_ng, r_ng_si, dir),
        zeta: c.zeta,
        a_h2: apply(c.a_h2, basis.a0, dir),
        a_ng: apply(c.a_ng, basis.a0, dir),
        k_comp: c.k_comp,
        m_nom: c.m_nom,
        weymouth_factor: match dir {
            Direction::Scale => c.weymouth_factor * velocity_ratio,
            Direction::Unscale => c.weymouth_factor / velocity_ratio,
        },
    };
    let participants = scenario
        .participants
        .iter()
        .map(|p| match p {
            Participant::NgSupplier {
                offer_price,
                max_supply,
            } => Participant::NgSupplier {
                offer_price: *offer_price,
                max_supply: max_supply.map(|s| apply(s, basis.phi0, dir)),
            },
            Participant::H2Supplier {
                offer_price,
                max_supply,
            } => Participant::H2Supplier {
                offer_price: *offer_price,
                max_supply: max_supply.map(|s| apply(s, basis.phi0, dir)),
            },
            Participant::FlexibleConsumer {
                bid_price,
                max_energy,
            } => Participant::FlexibleConsumer {
                // bid prices multiply energy in R_NG units, so they absorb
                // the inverse factor
                bid_price: match dir {
                    Direction::Scale => *bid_price * r_ng_si,
                    Direction::Unscale => *bid_price / r_ng_si,
                },
                max_energy: apply(*max_energy, e0, dir),
            },
            Participant::FixedConsumer { energy } => Participant::FixedConsumer {
                energy: apply(*energy, e0, dir),
            },
        })
        .collect();
    let side_draws = scenario
        .side_draws
        .iter()
        .map(|d| SideDraw {
            node: d.node,
            ng: apply(d.ng, basis.phi0, dir),
            h2: apply(d.h2, basis.phi0, dir),
            blend: apply(d.blend, basis.phi0, dir),
        })
        .collect();
    let scenario = MarketScenario {
        participants,
        co2_incentive: scenario.co2_incentive.clone(),
        compressor_cost_rate: scenario.compressor_cost_rate,
        constants,
        side_draws,
    };
    (network, scenario)
}

/// Multiplicative factors taking a scaled solution to SI units.
///
/// Dual factors are J0/r0 where J0 = 1 $/kg · φ0 is the objective scale and
/// r0 the residual scale of the dual's constraint row, so that each
/// multiplier keeps its marginal-value meaning after the transform.
#[derive(Debug, Clone)]
pub struct SolutionScales<T> {
    pub pressure: T,
    pub flow: T,
    pub objective: T,
    /// Mass-balance duals λ [$/kg].
    pub per_mass: T,
    /// Pipe and boost equation duals μ, θᵉ [$/(s·Pa²)].
    pub per_pressure_sq: T,
    /// Pressure bound duals β, θᵘ [$/(s·Pa)].
    pub per_pressure: T,
    /// Dimensionless-constraint duals ω, θᶜ [$/s].
    pub per_unit: T,
    /// Energy-bound duals χ [$/MJ].
    pub per_energy: T,
}

impl<T: Real> SolutionScales<T> {
    pub fn new(basis: &ScalingBasis<T>, r_ng_si: T) -> Self {
        let j0 = basis.phi0;
        SolutionScales {
            pressure: basis.p0,
            flow: basis.phi0,
            objective: j0,
            per_mass: j0 / basis.phi0,
            per_pressure_sq: j0 / (basis.p0 * basis.p0),
            per_pressure: j0 / basis.p0,
            per_unit: j0,
            per_energy: j0 / (basis.phi0 * r_ng_si),
        }
    }
}

/// Maps a solution of the scaled problem into SI + dollar units.
pub fn redimensionalize_solution<T: Real>(sol: &Solution<T>, scaled: &ScaledSystem<T>) -> Solution<T> {
    let s = SolutionScales::new(&scaled.basis, scaled.r_ng_si);
    transform_solution(sol, &s, Direction::Unscale)
}

/// Inverse of [`redimensionalize_solution`], used when re-auditing a stored
/// SI solution against the scaled problem.
pub fn nondimensionalize_solution<T: Real>(sol: &Solution<T>, scaled: &ScaledSystem<T>) -> Solution<T> {
    let s = SolutionScales::new(&scaled.basis, scaled.r_ng_si);
    transform_solution(sol, &s, Direction::Scale)
}

fn transform_solution<T: Real>(
    sol: &Solution<T>,
    s: &SolutionScales<T>,
    dir: Direction,
) -> Solution<T> {
    let map = |v: &[T], f: T| -> Vec<T> { v.iter().map(|&x| apply(x, f, dir)).collect() };
    let mut out = sol.clone();
    out.pressure = map(&sol.pressure, s.pressure);
    out.flow = map(&sol.flow, s.flow);
    // gamma and boost are dimensionless
    out.supply_ng = map(&sol.supply_ng, s.flow);
    out.supply_h2 = map(&sol.supply_h2, s.flow);
    out.demand = map(&sol.demand, s.flow);

    let d = &mut out.duals;
    d.lambda_ng = map(&sol.duals.lambda_ng, s.per_mass);
    d.lambda_h2 = map(&sol.duals.lambda_h2, s.per_mass);
    d.mu = map(&sol.duals.mu, s.per_pressure_sq);
    d.omega_cont = map(&sol.duals.omega_cont, s.per_unit);
    d.omega_lower = map(&sol.duals.omega_lower, s.per_unit);
    d.omega_upper = map(&sol.duals.omega_upper, s.per_unit);
    d.beta_lower = map(&sol.duals.beta_lower, s.per_pressure);
    d.beta_slack = map(&sol.duals.beta_slack, s.per_pressure);
    d.theta_boost = map(&sol.duals.theta_boost, s.per_pressure_sq);
    d.theta_discharge = map(&sol.duals.theta_discharge, s.per_pressure);
    d.theta_ratio_lower = map(&sol.duals.theta_ratio_lower, s.per_unit);
    d.theta_ratio_upper = map(&sol.duals.theta_ratio_upper, s.per_unit);
    d.chi_ng_lower = map(&sol.duals.chi_ng_lower, s.per_mass);
    d.chi_ng_upper = map(&sol.duals.chi_ng_upper, s.per_mass);
    d.chi_h2_lower = map(&sol.duals.chi_h2_lower, s.per_mass);
    d.chi_h2_upper = map(&sol.duals.chi_h2_upper, s.per_mass);
    d.chi_demand_lower = map(&sol.duals.chi_demand_lower, s.per_energy);
    d.chi_demand_upper = map(&sol.duals.chi_demand_upper, s.per_energy);
    d.chi_fixed = map(&sol.duals.chi_fixed, s.per_energy);
    d.nu_flow = map(&sol.duals.nu_flow, s.per_mass);

    out.objective.market_revenue = apply(sol.objective.market_revenue, s.objective, dir);
    out.objective.emission_incentives = apply(sol.objective.emission_incentives, s.objective, dir);
    out.objective.compression_cost = apply(sol.objective.compression_cost, s.objective, dir);
    out.objective.economic_value = apply(sol.objective.economic_value, s.objective, dir);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wave_speed_matches_reference_gases() {
        let ng = wave_speed(0.01737_f64, 288.7).unwrap();
        assert!((ng - 371.7).abs() < 0.5, "a_NG = {ng}");
        let h2 = wave_speed(0.002016_f64, 288.7).unwrap();
        assert!((h2 - 1091.0).abs() < 2.0, "a_H2 = {h2}");
        assert!(wave_speed(-1.0_f64, 288.7).is_err());
        assert!(wave_speed(0.01737_f64, 0.0).is_err());
    }

    #[test]
    fn geometric_mean_wave_speed() {
        let c = GasConstants::<f64>::default();
        let basis = ScalingBasis::new(4.0e6, &c).unwrap();
        assert!((basis.a0 - 635.06).abs() < 0.01, "a0 = {}", basis.a0);
        assert!((basis.u0 - 2.12).abs() < 1e-12, "u0 = {}", basis.u0);
        assert!((basis.rho0 - 4.0e6 / (635.0590476 * 635.0590476)).abs() < 1e-6);
        assert!((basis.phi0 - basis.rho0 * basis.u0).abs() < 1e-12);
    }

    #[test]
    fn blend_wave_speed_endpoints() {
        let c = GasConstants::<f64>::default();
        assert_eq!(blend_wave_speed_sq(&c, 0.0).unwrap(), 136_900.0);
        assert_eq!(blend_wave_speed_sq(&c, 1.0).unwrap(), 1_188_100.0);
        let v = blend_wave_speed_sq(&c, 0.05).unwrap();
        assert!((v - 189_460.0).abs() < 1e-6, "V(0.05) = {v}");
        assert!(blend_wave_speed_sq(&c, 1.5).is_err());
    }
}
