//! Economic quantities derived from the dual solution: locational marginal
//! prices, the consumer price decomposition, pass-through credits, and the
//! aggregate market report.
//!
//! The price identities here are algebraic consequences of the optimality
//! conditions: the blend price is the mass-fraction combination of the
//! constituent prices, the energy price divides by the calorific value, and
//! the decarbonization premium is the incentive-driven component of the
//! consumer price. They are computed exactly in that form so downstream
//! consumers can rely on the identities to machine precision.

use serde::{Deserialize, Serialize};

use crate::domain::{GNodeKind, MarketScenario, Network};
use crate::nlp::ObjectiveBreakdown;
use crate::scalar::{lit, Real};
use crate::solver::Solution;

/// Prices and blend state at one physical node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodePrice<T> {
    pub node: String,
    /// Hydrogen mass fraction at the node [-].
    pub gamma: T,
    /// CO₂ per MJ delivered at this node's blend [kgCO₂/MJ].
    pub carbon_intensity: T,
    /// Marginal value of natural gas [$/kg].
    pub lambda_ng: T,
    /// Marginal value of hydrogen [$/kg].
    pub lambda_h2: T,
    /// Marginal value of the blend [$/kg].
    pub lambda_blend: T,
    /// Locational value of energy [$/MJ].
    pub lambda_energy: T,
    /// False when no hydrogen can physically reach the node, in which case
    /// `lambda_h2` is a numerical artifact and tables print a dash.
    pub h2_supported: bool,
}

/// Per-node price table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodalPrices<T> {
    pub per_node: Vec<NodePrice<T>>,
}

/// Price decomposition for one consumer gNode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsumerPriceDecomposition<T> {
    pub gnode: String,
    pub node: String,
    /// Withdrawal [kg/s].
    pub demand: T,
    /// Energy delivered [MJ/s].
    pub energy: T,
    /// Locational value of energy at the consumer's node [$/MJ].
    pub lambda_energy: T,
    /// Revenue component of the price [$/MJ].
    pub revenue_component: T,
    /// Decarbonization premium [$/MJ].
    pub decarb_premium: T,
    /// Pass-through credit [$/s].
    pub credit: T,
}

/// Aggregate market outcome in the layout of the summary tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketReport<T> {
    pub objective: ObjectiveBreakdown<T>,
    /// Natural gas delivered to consumers [kg/s].
    pub total_ng_delivered: T,
    /// Hydrogen delivered to consumers [kg/s].
    pub total_h2_delivered: T,
    /// Energy delivered [MJ/s].
    pub total_energy_delivered: T,
    /// Delivered-energy-weighted carbon intensity [kgCO₂/MJ].
    pub average_carbon_intensity: T,
    /// CO₂ emitted by consuming the delivered gas [kgCO₂/s].
    pub total_co2: T,
    /// Total pass-through credits [$/s].
    pub d_ptc: T,
    /// Whether the credits match the collected incentives to 1e-6 relative.
    pub credits_reconciled: bool,
    pub nodal: NodalPrices<T>,
    pub consumers: Vec<ConsumerPriceDecomposition<T>>,
}

fn clamp_fraction<T: Real>(gamma: T) -> T {
    gamma.max(T::zero()).min(T::one())
}

/// Nodes reachable from any hydrogen supplier along edge orientations.
fn h2_reachable<T: Real>(net: &Network<T>) -> Vec<bool> {
    let mut reach = vec![false; net.n_nodes()];
    let mut queue = Vec::new();
    for &m in net.h2_suppliers() {
        let j = net.gnode_node(m);
        if !reach[j] {
            reach[j] = true;
            queue.push(j);
        }
    }
    while let Some(j) = queue.pop() {
        for &e in net.outgoing(j) {
            let (_, k) = net.edge_ends(e);
            if !reach[k] {
                reach[k] = true;
                queue.push(k);
            }
        }
    }
    reach
}

/// Per-node prices from the balance duals of an optimal solution.
pub fn nodal_prices<T: Real>(
    net: &Network<T>,
    scen: &MarketScenario<T>,
    sol: &Solution<T>,
) -> NodalPrices<T> {
    let reach = h2_reachable(net);
    let cons = &scen.constants;
    let per_node = (0..net.n_nodes())
        .map(|j| {
            let gamma = clamp_fraction(sol.gamma_node[j]);
            let lambda_ng = sol.duals.lambda_ng[j];
            let lambda_h2 = sol.duals.lambda_h2[j];
            let lambda_blend = (T::one() - gamma) * lambda_ng + gamma * lambda_h2;
            let r = cons.calorific_value_unchecked(gamma);
            NodePrice {
                node: net.nodes()[j].id.clone(),
                gamma,
                carbon_intensity: (T::one() - gamma) * cons.zeta / r,
                lambda_ng,
                lambda_h2,
                lambda_blend,
                lambda_energy: lambda_blend / r,
                h2_supported: reach[j],
            }
        })
        .collect();
    NodalPrices { per_node }
}

/// Decarbonization premium for incentive `c_co2` at hydrogen fraction
/// `gamma`: c·γ·(R_H₂/R_NG)·ζ / R(γ) [$/MJ].
pub fn decarb_premium<T: Real>(cons: &crate::domain::GasConstants<T>, c_co2: T, gamma: T) -> T {
    c_co2 * gamma * cons.emission_factor() / cons.calorific_value_unchecked(gamma)
}

/// Price decomposition for consumer gNode `m`.
///
/// The revenue component is defined as the exact complement of the premium,
/// so `lambda_energy = revenue_component + decarb_premium` holds to machine
/// precision.
pub fn decompose_consumer_price<T: Real>(
    net: &Network<T>,
    scen: &MarketScenario<T>,
    sol: &Solution<T>,
    m: usize,
) -> ConsumerPriceDecomposition<T> {
    debug_assert!(matches!(
        net.gnodes()[m].kind,
        GNodeKind::FlexibleConsumer | GNodeKind::FixedConsumer
    ));
    let j = net.gnode_node(m);
    let cons = &scen.constants;
    let gamma = clamp_fraction(sol.gamma_node[j]);
    let r = cons.calorific_value_unchecked(gamma);
    let lambda_blend =
        (T::one() - gamma) * sol.duals.lambda_ng[j] + gamma * sol.duals.lambda_h2[j];
    let lambda_energy = lambda_blend / r;
    let premium = decarb_premium(cons, scen.incentive(m), gamma);
    let demand = demand_of(net, sol, m);
    ConsumerPriceDecomposition {
        gnode: net.gnodes()[m].id.clone(),
        node: net.nodes()[j].id.clone(),
        demand,
        energy: demand * r,
        lambda_energy,
        revenue_component: lambda_energy - premium,
        decarb_premium: premium,
        credit: premium * demand * r,
    }
}

/// Withdrawal of consumer gNode `m` in the solution's demand ordering
/// (flexible consumers first, then fixed).
fn demand_of<T: Real>(net: &Network<T>, sol: &Solution<T>, m: usize) -> T {
    let k = net
        .flexible_consumers()
        .iter()
        .chain(net.fixed_consumers().iter())
        .position(|&g| g == m)
        .expect("gNode is a consumer");
    sol.demand[k]
}

/// Pass-through credits τ per consumer gNode and their total.
pub fn pass_through_credits<T: Real>(
    net: &Network<T>,
    scen: &MarketScenario<T>,
    sol: &Solution<T>,
) -> (Vec<(usize, T)>, T) {
    let mut total = T::zero();
    let mut credits = Vec::new();
    for m in net.consumers() {
        let d = decompose_consumer_price(net, scen, sol, m);
        credits.push((m, d.credit));
        total += d.credit;
    }
    (credits, total)
}

/// Full market report for an optimal solution in SI units.
pub fn market_report<T: Real>(
    net: &Network<T>,
    scen: &MarketScenario<T>,
    sol: &Solution<T>,
) -> MarketReport<T> {
    let cons = &scen.constants;
    let mut total_ng = T::zero();
    let mut total_h2 = T::zero();
    let mut total_energy = T::zero();
    let mut total_co2 = T::zero();
    let mut d_ptc = T::zero();
    let mut consumers = Vec::new();
    for m in net.consumers() {
        let j = net.gnode_node(m);
        let gamma = clamp_fraction(sol.gamma_node[j]);
        let d = demand_of(net, sol, m);
        total_ng += d * (T::one() - gamma);
        total_h2 += d * gamma;
        total_energy += d * cons.calorific_value_unchecked(gamma);
        total_co2 += d * (T::one() - gamma) * cons.zeta;
        let dec = decompose_consumer_price(net, scen, sol, m);
        d_ptc += dec.credit;
        consumers.push(dec);
    }
    let average_carbon_intensity = if total_energy > T::zero() {
        total_co2 / total_energy
    } else {
        T::zero()
    };
    let j_cem = sol.objective.emission_incentives;
    let credits_reconciled = (d_ptc - j_cem).abs() <= lit::<T>(1e-6) * j_cem.abs().max(T::one());
    MarketReport {
        objective: sol.objective,
        total_ng_delivered: total_ng,
        total_h2_delivered: total_h2,
        total_energy_delivered: total_energy,
        average_carbon_intensity,
        total_co2,
        d_ptc,
        credits_reconciled,
        nodal: nodal_prices(net, scen, sol),
        consumers,
    }
}
