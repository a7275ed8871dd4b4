//! Assembly and evaluation of the market-clearing nonlinear program.
//!
//! The problem minimizes the negated economic value subject to the pipe-flow,
//! nodal-balance, mixing, pressure, compression, and market constraints. All
//! evaluators are pure in `(x, duals)` and callable concurrently; the problem
//! itself is immutable after assembly.
//!
//! Constraint residuals are oriented exactly as the multipliers are adjoined
//! in the Lagrangian, so equality duals read directly as nodal marginal
//! values and inequality duals are nonnegative at optimality.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{MarketScenario, Network, Participant, ScenarioError};
use crate::linalg::Triplets;
use crate::scalar::{two, Real};
use crate::scaling::blend_wave_speed_sq_unchecked;

/// Offsets of the variable groups inside the flat vector.
///
/// Order: pressures, edge flows, nodal H₂ fractions, edge H₂ fractions,
/// boost ratios, NG supplies, H₂ supplies, withdrawals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarLayout {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_comps: usize,
    pub n_ng: usize,
    pub n_h2: usize,
    pub n_consumers: usize,
    pub pressure: usize,
    pub flow: usize,
    pub gamma_node: usize,
    pub gamma_edge: usize,
    pub boost: usize,
    pub supply_ng: usize,
    pub supply_h2: usize,
    pub demand: usize,
    pub total: usize,
}

impl VarLayout {
    #[inline]
    pub fn p(&self, j: usize) -> usize {
        self.pressure + j
    }
    #[inline]
    pub fn phi(&self, e: usize) -> usize {
        self.flow + e
    }
    #[inline]
    pub fn gn(&self, j: usize) -> usize {
        self.gamma_node + j
    }
    #[inline]
    pub fn ge(&self, e: usize) -> usize {
        self.gamma_edge + e
    }
    #[inline]
    pub fn alpha(&self, c: usize) -> usize {
        self.boost + c
    }
    #[inline]
    pub fn s_ng(&self, k: usize) -> usize {
        self.supply_ng + k
    }
    #[inline]
    pub fn s_h2(&self, k: usize) -> usize {
        self.supply_h2 + k
    }
    #[inline]
    pub fn d(&self, k: usize) -> usize {
        self.demand + k
    }
}

/// Equality constraint rows, in assembly order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqKind {
    /// Pipe pressure balance, indexed by pipe.
    Weymouth(usize),
    /// Natural-gas mass balance, indexed by node.
    NgBalance(usize),
    /// Hydrogen mass balance, indexed by node.
    H2Balance(usize),
    /// Mixing continuity γ_i - γ_ij, indexed by unified edge.
    Continuity(usize),
    /// Fixed slack pressure, indexed by position in the slack-node list.
    SlackPressure(usize),
    /// Compressor coupling P_j² - α²P_i², indexed by compressor.
    Boost(usize),
    /// Fixed-demand energy, indexed by position among fixed consumers.
    FixedDemand(usize),
}

/// Inequality constraint rows g(x) ≤ 0, in assembly order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IneqKind {
    MinPressure(usize),
    GammaLower(usize),
    GammaUpper(usize),
    /// Discharge-pressure limit α·P_i ≤ P_j^max, indexed by compressor.
    Discharge(usize),
    BoostLower(usize),
    BoostUpper(usize),
    SupplyNgLower(usize),
    /// Present only for quantity-bounded offers.
    SupplyNgUpper(usize),
    SupplyH2Lower(usize),
    SupplyH2Upper(usize),
    /// Flexible-demand energy lower bound, indexed among flexible consumers.
    DemandLower(usize),
    DemandUpper(usize),
    /// Oriented-flow bound φ ≥ 0, indexed by unified edge.
    FlowLower(usize),
}

/// Supplier gNode resolved for assembly.
#[derive(Debug, Clone)]
pub struct SupplierRef<T> {
    pub gnode: usize,
    pub node: usize,
    pub price: T,
    pub max_supply: Option<T>,
}

/// Consumer gNode resolved for assembly; flexible consumers precede fixed
/// ones in the demand-variable ordering.
#[derive(Debug, Clone)]
pub struct ConsumerRef<T> {
    pub gnode: usize,
    pub node: usize,
    pub co2_incentive: T,
    pub role: ConsumerRole<T>,
}

#[derive(Debug, Clone)]
pub enum ConsumerRole<T> {
    Flexible { bid_price: T, max_energy: T },
    Fixed { energy: T },
}

/// Objective value split into its components [$/s].
///
/// `economic_value` is defined as the exact sum
/// `market_revenue + emission_incentives - compression_cost`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveBreakdown<T> {
    pub market_revenue: T,
    pub emission_incentives: T,
    pub compression_cost: T,
    pub economic_value: T,
}

/// Objective evaluation: minimization value (negated economic value), its
/// gradient, and the reporting breakdown.
#[derive(Debug, Clone)]
pub struct ObjectiveEval<T> {
    pub value: T,
    pub grad: Vec<T>,
    pub breakdown: ObjectiveBreakdown<T>,
}

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error("scenario inconsistent with network: {0}")]
    Scenario(#[from] ScenarioError),
}

/// Assembled optimization problem over a network/scenario pair.
///
/// Assembly is unit-agnostic: feeding scaled data yields the scaled problem.
#[derive(Debug, Clone)]
pub struct NlpProblem<'a, T> {
    pub net: &'a Network<T>,
    pub scen: &'a MarketScenario<T>,
    pub layout: VarLayout,
    pub eq_rows: Vec<EqKind>,
    pub ineq_rows: Vec<IneqKind>,
    pub ng_suppliers: Vec<SupplierRef<T>>,
    pub h2_suppliers: Vec<SupplierRef<T>>,
    pub consumers: Vec<ConsumerRef<T>>,
    pub n_flexible: usize,
    /// f·L/(D·A²) times the constants' prefactor, per pipe.
    pub weymouth_coeff: Vec<T>,
    /// Accumulated fixed side draws per node: pure NG, pure H₂, blend.
    pub side_ng: Vec<T>,
    pub side_h2: Vec<T>,
    pub side_blend: Vec<T>,
}

/// Builds the problem; the network is already structurally valid, the
/// scenario is cross-checked here.
pub fn assemble<'a, T: Real>(
    net: &'a Network<T>,
    scen: &'a MarketScenario<T>,
) -> Result<NlpProblem<'a, T>, AssembleError> {
    scen.validate(net)?;

    let n_nodes = net.n_nodes();
    let n_edges = net.n_edges();
    let n_comps = net.n_compressors();

    let supplier_ref = |m: usize| -> SupplierRef<T> {
        let (price, max_supply) = match &scen.participants[m] {
            Participant::NgSupplier {
                offer_price,
                max_supply,
            }
            | Participant::H2Supplier {
                offer_price,
                max_supply,
            } => (*offer_price, *max_supply),
            _ => unreachable!("kind checked by scenario validation"),
        };
        SupplierRef {
            gnode: m,
            node: net.gnode_node(m),
            price,
            max_supply,
        }
    };
    let ng_suppliers: Vec<_> = net.ng_suppliers().iter().map(|&m| supplier_ref(m)).collect();
    let h2_suppliers: Vec<_> = net.h2_suppliers().iter().map(|&m| supplier_ref(m)).collect();

    let mut consumers = Vec::new();
    for &m in net.flexible_consumers() {
        let (bid_price, max_energy) = match &scen.participants[m] {
            Participant::FlexibleConsumer {
                bid_price,
                max_energy,
            } => (*bid_price, *max_energy),
            _ => unreachable!(),
        };
        consumers.push(ConsumerRef {
            gnode: m,
            node: net.gnode_node(m),
            co2_incentive: scen.incentive(m),
            role: ConsumerRole::Flexible {
                bid_price,
                max_energy,
            },
        });
    }
    let n_flexible = consumers.len();
    for &m in net.fixed_consumers() {
        let energy = match &scen.participants[m] {
            Participant::FixedConsumer { energy } => *energy,
            _ => unreachable!(),
        };
        consumers.push(ConsumerRef {
            gnode: m,
            node: net.gnode_node(m),
            co2_incentive: scen.incentive(m),
            role: ConsumerRole::Fixed { energy },
        });
    }

    let n_ng = ng_suppliers.len();
    let n_h2 = h2_suppliers.len();
    let n_consumers = consumers.len();
    let pressure = 0;
    let flow = pressure + n_nodes;
    let gamma_node = flow + n_edges;
    let gamma_edge = gamma_node + n_nodes;
    let boost = gamma_edge + n_edges;
    let supply_ng = boost + n_comps;
    let supply_h2 = supply_ng + n_ng;
    let demand = supply_h2 + n_h2;
    let total = demand + n_consumers;
    let layout = VarLayout {
        n_nodes,
        n_edges,
        n_comps,
        n_ng,
        n_h2,
        n_consumers,
        pressure,
        flow,
        gamma_node,
        gamma_edge,
        boost,
        supply_ng,
        supply_h2,
        demand,
        total,
    };

    let mut eq_rows = Vec::new();
    for e in 0..net.n_pipes() {
        eq_rows.push(EqKind::Weymouth(e));
    }
    for j in 0..n_nodes {
        eq_rows.push(EqKind::NgBalance(j));
    }
    for j in 0..n_nodes {
        eq_rows.push(EqKind::H2Balance(j));
    }
    for e in 0..n_edges {
        eq_rows.push(EqKind::Continuity(e));
    }
    for s in 0..net.slack_nodes().len() {
        eq_rows.push(EqKind::SlackPressure(s));
    }
    for c in 0..n_comps {
        eq_rows.push(EqKind::Boost(c));
    }
    for k in n_flexible..n_consumers {
        eq_rows.push(EqKind::FixedDemand(k));
    }

    let mut ineq_rows = Vec::new();
    for j in 0..n_nodes {
        ineq_rows.push(IneqKind::MinPressure(j));
    }
    for j in 0..n_nodes {
        ineq_rows.push(IneqKind::GammaLower(j));
    }
    for j in 0..n_nodes {
        ineq_rows.push(IneqKind::GammaUpper(j));
    }
    for c in 0..n_comps {
        ineq_rows.push(IneqKind::Discharge(c));
    }
    for c in 0..n_comps {
        ineq_rows.push(IneqKind::BoostLower(c));
    }
    for c in 0..n_comps {
        ineq_rows.push(IneqKind::BoostUpper(c));
    }
    for (k, s) in ng_suppliers.iter().enumerate() {
        ineq_rows.push(IneqKind::SupplyNgLower(k));
        if s.max_supply.is_some() {
            ineq_rows.push(IneqKind::SupplyNgUpper(k));
        }
    }
    for (k, s) in h2_suppliers.iter().enumerate() {
        ineq_rows.push(IneqKind::SupplyH2Lower(k));
        if s.max_supply.is_some() {
            ineq_rows.push(IneqKind::SupplyH2Upper(k));
        }
    }
    for k in 0..n_flexible {
        ineq_rows.push(IneqKind::DemandLower(k));
        ineq_rows.push(IneqKind::DemandUpper(k));
    }
    for e in 0..n_edges {
        ineq_rows.push(IneqKind::FlowLower(e));
    }

    let wf = scen.constants.weymouth_factor;
    let weymouth_coeff = net
        .pipes()
        .iter()
        .map(|p| p.friction * p.length / (p.diameter * p.area * p.area) * wf)
        .collect();

    let mut side_ng = vec![T::zero(); n_nodes];
    let mut side_h2 = vec![T::zero(); n_nodes];
    let mut side_blend = vec![T::zero(); n_nodes];
    for draw in &scen.side_draws {
        side_ng[draw.node] += draw.ng;
        side_h2[draw.node] += draw.h2;
        side_blend[draw.node] += draw.blend;
    }

    Ok(NlpProblem {
        net,
        scen,
        layout,
        eq_rows,
        ineq_rows,
        ng_suppliers,
        h2_suppliers,
        consumers,
        n_flexible,
        weymouth_coeff,
        side_ng,
        side_h2,
        side_blend,
    })
}

impl<'a, T: Real> NlpProblem<'a, T> {
    pub fn n_vars(&self) -> usize {
        self.layout.total
    }
    pub fn n_eq(&self) -> usize {
        self.eq_rows.len()
    }
    pub fn n_ineq(&self) -> usize {
        self.ineq_rows.len()
    }

    /// Objective, gradient of the minimization form, and breakdown.
    pub fn eval_objective(&self, x: &[T]) -> ObjectiveEval<T> {
        let l = &self.layout;
        let cons = &self.scen.constants;
        let k_emission = cons.emission_factor();
        let eta = self.scen.compressor_cost_rate;
        let mut grad = vec![T::zero(); l.total];

        let mut revenue = T::zero();
        let mut incentives = T::zero();
        let mut compression = T::zero();

        for (k, s) in self.ng_suppliers.iter().enumerate() {
            revenue -= s.price * x[l.s_ng(k)];
            grad[l.s_ng(k)] += s.price;
        }
        for (k, s) in self.h2_suppliers.iter().enumerate() {
            revenue -= s.price * x[l.s_h2(k)];
            grad[l.s_h2(k)] += s.price;
        }
        for (k, c) in self.consumers.iter().enumerate() {
            let d = x[l.d(k)];
            let gamma = x[l.gn(c.node)];
            if let ConsumerRole::Flexible { bid_price, .. } = c.role {
                let r = cons.calorific_value_unchecked(gamma);
                revenue += bid_price * d * r;
                grad[l.d(k)] -= bid_price * r;
                grad[l.gn(c.node)] -= bid_price * d * (cons.r_h2 - cons.r_ng);
            }
            incentives += c.co2_incentive * d * gamma * k_emission;
            grad[l.d(k)] -= c.co2_incentive * gamma * k_emission;
            grad[l.gn(c.node)] -= c.co2_incentive * d * k_emission;
        }
        let m = cons.m_nom;
        for c in 0..l.n_comps {
            let e = self.net.n_pipes() + c;
            let alpha = x[l.alpha(c)];
            let phi = x[l.phi(e)];
            let work = cons.k_comp * (alpha.powf(m) - T::one());
            compression += eta * work * phi;
            grad[l.phi(e)] += eta * work;
            grad[l.alpha(c)] += eta * cons.k_comp * m * alpha.powf(m - T::one()) * phi;
        }

        let economic_value = revenue + incentives - compression;
        ObjectiveEval {
            value: -economic_value,
            grad,
            breakdown: ObjectiveBreakdown {
                market_revenue: revenue,
                emission_incentives: incentives,
                compression_cost: compression,
                economic_value,
            },
        }
    }

    /// Equality residuals in row order, oriented as adjoined in the
    /// Lagrangian.
    pub fn eval_equalities(&self, x: &[T]) -> Vec<T> {
        self.eq_rows.iter().map(|r| self.eq_residual(*r, x)).collect()
    }

    pub fn eq_residual(&self, row: EqKind, x: &[T]) -> T {
        let l = &self.layout;
        let cons = &self.scen.constants;
        match row {
            EqKind::Weymouth(e) => {
                let (i, j) = self.net.edge_ends(e);
                let phi = x[l.phi(e)];
                let v = blend_wave_speed_sq_unchecked(cons, x[l.ge(e)]);
                x[l.p(i)] * x[l.p(i)] - x[l.p(j)] * x[l.p(j)]
                    - self.weymouth_coeff[e] * v * phi * phi
            }
            EqKind::NgBalance(j) => {
                let gamma = x[l.gn(j)];
                let mut r = T::zero();
                for &e in self.net.outgoing(j) {
                    r += (T::one() - gamma) * x[l.phi(e)];
                }
                for &e in self.net.incoming(j) {
                    r -= (T::one() - x[l.ge(e)]) * x[l.phi(e)];
                }
                for (k, s) in self.ng_suppliers.iter().enumerate() {
                    if s.node == j {
                        r -= x[l.s_ng(k)];
                    }
                }
                let mut draw = self.side_blend[j];
                for (k, c) in self.consumers.iter().enumerate() {
                    if c.node == j {
                        draw += x[l.d(k)];
                    }
                }
                r + (T::one() - gamma) * draw + self.side_ng[j]
            }
            EqKind::H2Balance(j) => {
                let gamma = x[l.gn(j)];
                let mut r = T::zero();
                for &e in self.net.outgoing(j) {
                    r += gamma * x[l.phi(e)];
                }
                for &e in self.net.incoming(j) {
                    r -= x[l.ge(e)] * x[l.phi(e)];
                }
                for (k, s) in self.h2_suppliers.iter().enumerate() {
                    if s.node == j {
                        r -= x[l.s_h2(k)];
                    }
                }
                let mut draw = self.side_blend[j];
                for (k, c) in self.consumers.iter().enumerate() {
                    if c.node == j {
                        draw += x[l.d(k)];
                    }
                }
                r + gamma * draw + self.side_h2[j]
            }
            EqKind::Continuity(e) => {
                let (i, _) = self.net.edge_ends(e);
                x[l.gn(i)] - x[l.ge(e)]
            }
            EqKind::SlackPressure(s) => {
                let j = self.net.slack_nodes()[s];
                let sigma = self.net.nodes()[j]
                    .slack_pressure
                    .expect("slack node has pressure");
                x[l.p(j)] - sigma
            }
            EqKind::Boost(c) => {
                let e = self.net.n_pipes() + c;
                let (i, j) = self.net.edge_ends(e);
                let alpha = x[l.alpha(c)];
                x[l.p(j)] * x[l.p(j)] - alpha * alpha * x[l.p(i)] * x[l.p(i)]
            }
            EqKind::FixedDemand(k) => {
                let c = &self.consumers[k];
                let energy = match c.role {
                    ConsumerRole::Fixed { energy } => energy,
                    _ => unreachable!("row built for fixed consumers"),
                };
                x[l.d(k)] * cons.calorific_value_unchecked(x[l.gn(c.node)]) - energy
            }
        }
    }

    /// Inequality values g(x) (feasible when ≤ 0) in row order.
    pub fn eval_inequalities(&self, x: &[T]) -> Vec<T> {
        self.ineq_rows
            .iter()
            .map(|r| self.ineq_value(*r, x))
            .collect()
    }

    pub fn ineq_value(&self, row: IneqKind, x: &[T]) -> T {
        let l = &self.layout;
        let cons = &self.scen.constants;
        match row {
            IneqKind::MinPressure(j) => self.net.nodes()[j].min_pressure - x[l.p(j)],
            IneqKind::GammaLower(j) => self.net.nodes()[j].min_h2_fraction - x[l.gn(j)],
            IneqKind::GammaUpper(j) => x[l.gn(j)] - self.net.nodes()[j].max_h2_fraction,
            IneqKind::Discharge(c) => {
                let e = self.net.n_pipes() + c;
                let (i, j) = self.net.edge_ends(e);
                x[l.alpha(c)] * x[l.p(i)] - self.net.nodes()[j].max_pressure
            }
            IneqKind::BoostLower(c) => T::one() - x[l.alpha(c)],
            IneqKind::BoostUpper(c) => x[l.alpha(c)] - self.net.compressors()[c].max_boost,
            IneqKind::SupplyNgLower(k) => -x[l.s_ng(k)],
            IneqKind::SupplyNgUpper(k) => {
                x[l.s_ng(k)] - self.ng_suppliers[k].max_supply.expect("bounded offer")
            }
            IneqKind::SupplyH2Lower(k) => -x[l.s_h2(k)],
            IneqKind::SupplyH2Upper(k) => {
                x[l.s_h2(k)] - self.h2_suppliers[k].max_supply.expect("bounded offer")
            }
            IneqKind::DemandLower(k) => {
                let c = &self.consumers[k];
                -(x[l.d(k)] * cons.calorific_value_unchecked(x[l.gn(c.node)]))
            }
            IneqKind::DemandUpper(k) => {
                let c = &self.consumers[k];
                let max_energy = match c.role {
                    ConsumerRole::Flexible { max_energy, .. } => max_energy,
                    _ => unreachable!("row built for flexible consumers"),
                };
                x[l.d(k)] * cons.calorific_value_unchecked(x[l.gn(c.node)]) - max_energy
            }
            IneqKind::FlowLower(e) => -x[l.phi(e)],
        }
    }

    /// Jacobians of the equality and inequality constraints.
    pub fn eval_jacobians(&self, x: &[T]) -> (Triplets<T>, Triplets<T>) {
        let l = &self.layout;
        let cons = &self.scen.constants;
        let dv = cons.a_h2 * cons.a_h2 - cons.a_ng * cons.a_ng;
        let dr = cons.r_h2 - cons.r_ng;

        let mut je = Triplets::new(self.eq_rows.len(), l.total);
        for (row, kind) in self.eq_rows.iter().enumerate() {
            match *kind {
                EqKind::Weymouth(e) => {
                    let (i, j) = self.net.edge_ends(e);
                    let phi = x[l.phi(e)];
                    let v = blend_wave_speed_sq_unchecked(cons, x[l.ge(e)]);
                    let w = self.weymouth_coeff[e];
                    je.push(row, l.p(i), two::<T>() * x[l.p(i)]);
                    je.push(row, l.p(j), -(two::<T>() * x[l.p(j)]));
                    je.push(row, l.phi(e), -(two::<T>() * w * v * phi));
                    je.push(row, l.ge(e), -(w * dv * phi * phi));
                }
                EqKind::NgBalance(j) => {
                    let gamma = x[l.gn(j)];
                    let mut dgamma = T::zero();
                    for &e in self.net.outgoing(j) {
                        je.push(row, l.phi(e), T::one() - gamma);
                        dgamma -= x[l.phi(e)];
                    }
                    for &e in self.net.incoming(j) {
                        je.push(row, l.phi(e), -(T::one() - x[l.ge(e)]));
                        je.push(row, l.ge(e), x[l.phi(e)]);
                    }
                    for (k, s) in self.ng_suppliers.iter().enumerate() {
                        if s.node == j {
                            je.push(row, l.s_ng(k), -T::one());
                        }
                    }
                    let mut draw = self.side_blend[j];
                    for (k, c) in self.consumers.iter().enumerate() {
                        if c.node == j {
                            je.push(row, l.d(k), T::one() - gamma);
                            draw += x[l.d(k)];
                        }
                    }
                    dgamma -= draw;
                    je.push(row, l.gn(j), dgamma);
                }
                EqKind::H2Balance(j) => {
                    let gamma = x[l.gn(j)];
                    let mut dgamma = T::zero();
                    for &e in self.net.outgoing(j) {
                        je.push(row, l.phi(e), gamma);
                        dgamma += x[l.phi(e)];
                    }
                    for &e in self.net.incoming(j) {
                        je.push(row, l.phi(e), -x[l.ge(e)]);
                        je.push(row, l.ge(e), -x[l.phi(e)]);
                    }
                    for (k, s) in self.h2_suppliers.iter().enumerate() {
                        if s.node == j {
                            je.push(row, l.s_h2(k), -T::one());
                        }
                    }
                    let mut draw = self.side_blend[j];
                    for (k, c) in self.consumers.iter().enumerate() {
                        if c.node == j {
                            je.push(row, l.d(k), gamma);
                            draw += x[l.d(k)];
                        }
                    }
                    dgamma += draw;
                    je.push(row, l.gn(j), dgamma);
                }
                EqKind::Continuity(e) => {
                    let (i, _) = self.net.edge_ends(e);
                    je.push(row, l.gn(i), T::one());
                    je.push(row, l.ge(e), -T::one());
                }
                EqKind::SlackPressure(s) => {
                    let j = self.net.slack_nodes()[s];
                    je.push(row, l.p(j), T::one());
                }
                EqKind::Boost(c) => {
                    let e = self.net.n_pipes() + c;
                    let (i, j) = self.net.edge_ends(e);
                    let alpha = x[l.alpha(c)];
                    je.push(row, l.p(j), two::<T>() * x[l.p(j)]);
                    je.push(row, l.p(i), -(two::<T>() * alpha * alpha * x[l.p(i)]));
                    je.push(row, l.alpha(c), -(two::<T>() * alpha * x[l.p(i)] * x[l.p(i)]));
                }
                EqKind::FixedDemand(k) => {
                    let c = &self.consumers[k];
                    let gamma = x[l.gn(c.node)];
                    je.push(row, l.d(k), cons.calorific_value_unchecked(gamma));
                    je.push(row, l.gn(c.node), x[l.d(k)] * dr);
                }
            }
        }

        let mut ji = Triplets::new(self.ineq_rows.len(), l.total);
        for (row, kind) in self.ineq_rows.iter().enumerate() {
            match *kind {
                IneqKind::MinPressure(j) => ji.push(row, l.p(j), -T::one()),
                IneqKind::GammaLower(j) => ji.push(row, l.gn(j), -T::one()),
                IneqKind::GammaUpper(j) => ji.push(row, l.gn(j), T::one()),
                IneqKind::Discharge(c) => {
                    let e = self.net.n_pipes() + c;
                    let (i, _) = self.net.edge_ends(e);
                    ji.push(row, l.alpha(c), x[l.p(i)]);
                    ji.push(row, l.p(i), x[l.alpha(c)]);
                }
                IneqKind::BoostLower(c) => ji.push(row, l.alpha(c), -T::one()),
                IneqKind::BoostUpper(c) => ji.push(row, l.alpha(c), T::one()),
                IneqKind::SupplyNgLower(k) => ji.push(row, l.s_ng(k), -T::one()),
                IneqKind::SupplyNgUpper(k) => ji.push(row, l.s_ng(k), T::one()),
                IneqKind::SupplyH2Lower(k) => ji.push(row, l.s_h2(k), -T::one()),
                IneqKind::SupplyH2Upper(k) => ji.push(row, l.s_h2(k), T::one()),
                IneqKind::DemandLower(k) => {
                    let c = &self.consumers[k];
                    let gamma = x[l.gn(c.node)];
                    ji.push(row, l.d(k), -cons.calorific_value_unchecked(gamma));
                    ji.push(row, l.gn(c.node), -(x[l.d(k)] * dr));
                }
                IneqKind::DemandUpper(k) => {
                    let c = &self.consumers[k];
                    let gamma = x[l.gn(c.node)];
                    ji.push(row, l.d(k), cons.calorific_value_unchecked(gamma));
                    ji.push(row, l.gn(c.node), x[l.d(k)] * dr);
                }
                IneqKind::FlowLower(e) => ji.push(row, l.phi(e), -T::one()),
            }
        }
        (je, ji)
    }

    /// Hessian of the Lagrangian f + yᵀh + zᵀg, lower triangle as triplets.
    pub fn eval_lagrangian_hessian(&self, x: &[T], y_eq: &[T], z_ineq: &[T]) -> Triplets<T> {
        let l = &self.layout;
        let cons = &self.scen.constants;
        let dv = cons.a_h2 * cons.a_h2 - cons.a_ng * cons.a_ng;
        let dr = cons.r_h2 - cons.r_ng;
        let k_emission = cons.emission_factor();
        let eta = self.scen.compressor_cost_rate;
        let m = cons.m_nom;
        let mut h = Triplets::new(l.total, l.total);
        let push = |h: &mut Triplets<T>, a: usize, b: usize, v: T| {
            if a >= b {
                h.push(a, b, v);
            } else {
                h.push(b, a, v);
            }
        };

        // objective terms
        for (k, c) in self.consumers.iter().enumerate() {
            let mut coupling = -(c.co2_incentive * k_emission);
            if let ConsumerRole::Flexible { bid_price, .. } = c.role {
                coupling -= bid_price * dr;
            }
            push(&mut h, l.d(k), l.gn(c.node), coupling);
        }
        for c in 0..l.n_comps {
            let e = self.net.n_pipes() + c;
            let alpha = x[l.alpha(c)];
            let phi = x[l.phi(e)];
            push(
                &mut h,
                l.alpha(c),
                l.alpha(c),
                eta * cons.k_comp * m * (m - T::one()) * alpha.powf(m - two::<T>()) * phi,
            );
            push(
                &mut h,
                l.alpha(c),
                l.phi(e),
                eta * cons.k_comp * m * alpha.powf(m - T::one()),
            );
        }

        // equality constraint curvature
        for (row, kind) in self.eq_rows.iter().enumerate() {
            let y = y_eq[row];
            if y == T::zero() {
                continue;
            }
            match *kind {
                EqKind::Weymouth(e) => {
                    let (i, j) = self.net.edge_ends(e);
                    let w = self.weymouth_coeff[e];
                    let phi = x[l.phi(e)];
                    let v = blend_wave_speed_sq_unchecked(cons, x[l.ge(e)]);
                    push(&mut h, l.p(i), l.p(i), two::<T>() * y);
                    push(&mut h, l.p(j), l.p(j), -(two::<T>() * y));
                    push(&mut h, l.phi(e), l.phi(e), -(two::<T>() * y * w * v));
                    push(&mut h, l.phi(e), l.ge(e), -(two::<T>() * y * w * dv * phi));
                }
                EqKind::NgBalance(j) => {
                    for &e in self.net.outgoing(j) {
                        push(&mut h, l.gn(j), l.phi(e), -y);
                    }
                    for &e in self.net.incoming(j) {
                        push(&mut h, l.ge(e), l.phi(e), y);
                    }
                    for (k, c) in self.consumers.iter().enumerate() {
                        if c.node == j {
                            push(&mut h, l.gn(j), l.d(k), -y);
                        }
                    }
                }
                EqKind::H2Balance(j) => {
                    for &e in self.net.outgoing(j) {
                        push(&mut h, l.gn(j), l.phi(e), y);
                    }
                    for &e in self.net.incoming(j) {
                        push(&mut h, l.ge(e), l.phi(e), -y);
                    }
                    for (k, c) in self.consumers.iter().enumerate() {
                        if c.node == j {
                            push(&mut h, l.gn(j), l.d(k), y);
                        }
                    }
                }
                EqKind::Boost(c) => {
                    let e = self.net.n_pipes() + c;
                    let (i, j) = self.net.edge_ends(e);
                    let alpha = x[l.alpha(c)];
                    push(&mut h, l.p(j), l.p(j), two::<T>() * y);
                    push(&mut h, l.p(i), l.p(i), -(two::<T>() * y * alpha * alpha));
                    push(&mut h, l.alpha(c), l.p(i), -(two::<T>() * two::<T>() * y * alpha * x[l.p(i)]));
                    push(&mut h, l.alpha(c), l.alpha(c), -(two::<T>() * y * x[l.p(i)] * x[l.p(i)]));
                }
                EqKind::FixedDemand(k) => {
                    let c = &self.consumers[k];
                    push(&mut h, l.d(k), l.gn(c.node), y * dr);
                }
                EqKind::Continuity(_) | EqKind::SlackPressure(_) => {}
            }
        }

        // inequality constraint curvature
        for (row, kind) in self.ineq_rows.iter().enumerate() {
            let z = z_ineq[row];
            if z == T::zero() {
                continue;
            }
            match *kind {
                IneqKind::Discharge(c) => {
                    let e = self.net.n_pipes() + c;
                    let (i, _) = self.net.edge_ends(e);
                    push(&mut h, l.alpha(c), l.p(i), z);
                }
                IneqKind::DemandLower(k) => {
                    let c = &self.consumers[k];
                    push(&mut h, l.d(k), l.gn(c.node), -(z * dr));
                }
                IneqKind::DemandUpper(k) => {
                    let c = &self.consumers[k];
                    push(&mut h, l.d(k), l.gn(c.node), z * dr);
                }
                _ => {}
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::domain::{GNode, GNodeKind, GasConstants, NetworkBuilder, Node, Participant, Pipe};

    fn node(id: &str, slack: Option<f64>) -> Node<f64> {
        Node {
            id: id.into(),
            min_pressure: 3.0e6,
            max_pressure: 6.0e6,
            min_h2_fraction: 0.0,
            max_h2_fraction: 0.1,
            slack_pressure: slack,
        }
    }

    fn test_pipe(from: &str, to: &str) -> Pipe<f64> {
        Pipe {
            from: from.into(),
            to: to.into(),
            friction: 0.01,
            length: 5000.0,
            diameter: 0.5,
            area: 0.19635,
        }
    }

    /// Two-node line: NG supplier at the slack node, one consumer at the far
    /// end (flexible unless `fixed`).
    fn two_node(fixed: bool) -> (crate::domain::Network<f64>, MarketScenario<f64>) {
        let mut b = NetworkBuilder::new();
        b.nodes = vec![node("N1", Some(4.0e6)), node("N2", None)];
        b.pipes = vec![test_pipe("N1", "N2")];
        b.gnodes = vec![
            GNode {
                id: "S".into(),
                node: "N1".into(),
                kind: GNodeKind::NgSupplier,
            },
            GNode {
                id: "D".into(),
                node: "N2".into(),
                kind: if fixed {
                    GNodeKind::FixedConsumer
                } else {
                    GNodeKind::FlexibleConsumer
                },
            },
        ];
        let net = b.build().unwrap();
        let consumer = if fixed {
            Participant::FixedConsumer { energy: 500.0 }
        } else {
            Participant::FlexibleConsumer {
                bid_price: 0.019,
                max_energy: 500.0,
            }
        };
        let scen = MarketScenario {
            participants: vec![
                Participant::NgSupplier {
                    offer_price: 0.2,
                    max_supply: None,
                },
                consumer,
            ],
            co2_incentive: vec![0.0; 2],
            compressor_cost_rate: bundled::DEFAULT_COST_RATE,
            constants: GasConstants::default(),
            side_draws: vec![],
        };
        (net, scen)
    }

    #[test]
    fn eight_node_dimensions_match_reference_counts() {
        let net = bundled::eight_node_network();
        let scen = bundled::eight_node_scenario(&net, 0.0);
        let p = assemble(&net, &scen).unwrap();
        // 8 pressures + 8 flows + 16 fractions + 3 boosts + 1 NG + 1 H2 + 3 demands
        assert_eq!(p.n_vars(), 40);
        // Weymouth 5, balances 16, continuity 8, slack 1, boost 3
        assert_eq!(p.n_eq(), 33);
        // pressures 8, fraction bounds 16, discharge/ratio 9, supply lower 2
        // (offers unbounded), demand 6, flow 8
        assert_eq!(p.n_ineq(), 49);
    }

    #[test]
    fn fixed_demand_builds_one_equality_row_without_revenue() {
        let (net, scen) = two_node(true);
        let p = assemble(&net, &scen).unwrap();
        let fixed_rows = p
            .eq_rows
            .iter()
            .filter(|r| matches!(r, EqKind::FixedDemand(_)))
            .count();
        assert_eq!(fixed_rows, 1);
        let mut x = vec![0.0; p.n_vars()];
        x[p.layout.d(0)] = 500.0 / 44.2;
        let eval = p.eval_objective(&x);
        // no bid means no revenue term; only supply costs enter J_MR
        assert_eq!(eval.breakdown.market_revenue, 0.0);
    }

    #[test]
    fn no_consumer_objective_is_supply_cost_only() {
        let mut b = NetworkBuilder::new();
        b.nodes = vec![node("N1", Some(4.0e6)), node("N2", None)];
        b.pipes = vec![test_pipe("N1", "N2")];
        b.gnodes = vec![GNode {
            id: "S".into(),
            node: "N1".into(),
            kind: GNodeKind::NgSupplier,
        }];
        let net = b.build().unwrap();
        let scen = MarketScenario {
            participants: vec![Participant::NgSupplier {
                offer_price: 0.2,
                max_supply: None,
            }],
            co2_incentive: vec![0.0],
            compressor_cost_rate: bundled::DEFAULT_COST_RATE,
            constants: GasConstants::default(),
            side_draws: vec![],
        };
        let p = assemble(&net, &scen).unwrap();
        let x = vec![0.0; p.n_vars()];
        assert_eq!(p.eval_objective(&x).breakdown.economic_value, 0.0);
        let mut x2 = x;
        x2[p.layout.s_ng(0)] = 10.0;
        assert_eq!(p.eval_objective(&x2).breakdown.economic_value, -2.0);
    }

    #[test]
    fn weymouth_residual_zero_at_no_flow_equilibrium() {
        let (net, scen) = two_node(false);
        let p = assemble(&net, &scen).unwrap();
        let l = &p.layout;
        let mut x = vec![0.0; p.n_vars()];
        x[l.p(0)] = 4.0e6;
        x[l.p(1)] = 4.0e6;
        assert_eq!(p.eq_residual(EqKind::Weymouth(0), &x), 0.0);
    }

    #[test]
    fn weymouth_residual_matches_scalar_oracle() {
        let (net, scen) = two_node(false);
        let p = assemble(&net, &scen).unwrap();
        let l = &p.layout;
        let mut x = vec![0.0; p.n_vars()];
        x[l.p(0)] = 4.0e6;
        x[l.p(1)] = 3.9e6;
        x[l.phi(0)] = 10.0;
        x[l.ge(0)] = 0.0;
        // independent scalar arithmetic for f=0.01, L=5000, D=0.5, A=0.19635
        let coeff = {
            let fl = 0.01 * 5000.0;
            let da2 = 0.5 * (0.19635 * 0.19635);
            fl / da2
        };
        let wave_sq = 370.0 * 370.0;
        let expect = 4.0e6 * 4.0e6 - 3.9e6 * 3.9e6 - coeff * wave_sq * 100.0;
        let got = p.eq_residual(EqKind::Weymouth(0), &x);
        assert!(
            ((got - expect) / expect).abs() < 1e-14,
            "residual {got}, oracle {expect}"
        );
    }

    #[test]
    fn h2_balance_forces_pass_through_mixing() {
        let (net, scen) = two_node(false);
        let p = assemble(&net, &scen).unwrap();
        let l = &p.layout;
        let mut x = vec![0.0; p.n_vars()];
        x[l.phi(0)] = 10.0;
        x[l.ge(0)] = 0.1;
        x[l.d(0)] = 10.0;
        x[l.gn(1)] = 0.1;
        let r = p.eq_residual(EqKind::H2Balance(1), &x);
        assert!(r.abs() < 1e-14, "balanced at the inflow fraction: {r}");
        x[l.gn(1)] = 0.05;
        let r = p.eq_residual(EqKind::H2Balance(1), &x);
        assert!((r + 0.5).abs() < 1e-14, "off-fraction residual: {r}");
    }

    #[test]
    fn jacobian_entries_match_reference_formulas() {
        let net = bundled::eight_node_network();
        let scen = bundled::eight_node_scenario(&net, 0.055);
        let p = assemble(&net, &scen).unwrap();
        let l = p.layout.clone();
        let mut x = vec![0.1; p.n_vars()];
        for j in 0..l.n_nodes {
            x[l.p(j)] = 4.0e6 - 1e5 * j as f64;
        }
        for e in 0..l.n_edges {
            x[l.phi(e)] = 20.0 + e as f64;
            x[l.ge(e)] = 0.02 + 0.005 * e as f64;
        }
        for j in 0..l.n_nodes {
            x[l.gn(j)] = 0.03 + 0.004 * j as f64;
        }
        let (je, _) = p.eval_jacobians(&x);
        let dense = je.to_dense();

        // pipe flow derivative: -(f·L/(D·A²))·V(γ)·2φ
        let pipe = &net.pipes()[0];
        let w = pipe.friction * pipe.length / (pipe.diameter * pipe.area * pipe.area);
        let v = 0.02 * 1090.0 * 1090.0 + 0.98 * 370.0 * 370.0;
        let expect = -2.0 * w * v * 20.0;
        let row = p
            .eq_rows
            .iter()
            .position(|r| matches!(r, EqKind::Weymouth(0)))
            .unwrap();
        assert!(
            ((dense[row][l.phi(0)] - expect) / expect).abs() < 1e-12,
            "d(weymouth)/d(phi) = {}, want {expect}",
            dense[row][l.phi(0)]
        );

        // supplier column of its node's NG balance is -1
        let s_node = p.ng_suppliers[0].node;
        let row = p
            .eq_rows
            .iter()
            .position(|r| matches!(r, EqKind::NgBalance(j) if *j == s_node))
            .unwrap();
        assert_eq!(dense[row][l.s_ng(0)], -1.0);

        // continuity is affine with unit coefficients
        let row = p
            .eq_rows
            .iter()
            .position(|r| matches!(r, EqKind::Continuity(3)))
            .unwrap();
        let (i, _) = net.edge_ends(3);
        assert_eq!(dense[row][l.ge(3)], -1.0);
        assert_eq!(dense[row][l.gn(i)], 1.0);
    }

    #[test]
    fn hessian_demand_fraction_coupling_matches_formula() {
        let (net, scen) = two_node(false);
        let p = assemble(&net, &scen).unwrap();
        let l = p.layout.clone();
        let x = vec![1.0; p.n_vars()];
        let y = vec![0.0; p.n_eq()];
        let z = vec![0.0; p.n_ineq()];
        let h = p.eval_lagrangian_hessian(&x, &y, &z).to_dense();
        // objective-only coupling with zero incentive: -c_d·(R_H2 - R_NG)
        let expect = -0.019 * (141.8 - 44.2);
        let (a, b) = (l.d(0).max(l.gn(1)), l.d(0).min(l.gn(1)));
        assert!(
            ((h[a][b] - expect) / expect).abs() < 1e-12,
            "coupling {} want {expect}",
            h[a][b]
        );
    }

    #[test]
    fn hessian_supply_demand_block_is_zero_for_pure_ng() {
        let net = bundled::eight_node_network();
        let scen = bundled::eight_node_scenario(&net, 0.0);
        let p = assemble(&net, &scen).unwrap();
        let l = p.layout.clone();
        let x = vec![1.0; p.n_vars()];
        let h = p
            .eval_lagrangian_hessian(&x, &vec![0.0; p.n_eq()], &vec![0.0; p.n_ineq()])
            .to_dense();
        for a in l.supply_ng..l.total {
            for b in l.supply_ng..=a {
                assert_eq!(h[a][b], 0.0, "entry ({a},{b}) in the supply/demand block");
            }
        }
    }

    #[test]
    fn weymouth_hessian_diagonal_carries_the_dual() {
        let (net, scen) = two_node(false);
        let p = assemble(&net, &scen).unwrap();
        let l = p.layout.clone();
        let mut x = vec![0.0; p.n_vars()];
        x[l.ge(0)] = 0.04;
        let mut y = vec![0.0; p.n_eq()];
        let row = p
            .eq_rows
            .iter()
            .position(|r| matches!(r, EqKind::Weymouth(0)))
            .unwrap();
        y[row] = -0.3;
        let h = p
            .eval_lagrangian_hessian(&x, &y, &vec![0.0; p.n_ineq()])
            .to_dense();
        let pipe = &net.pipes()[0];
        let w = pipe.friction * pipe.length / (pipe.diameter * pipe.area * pipe.area);
        let v = 0.04 * 1090.0f64.powi(2) + 0.96 * 370.0f64.powi(2);
        let expect = -2.0 * (-0.3) * w * v;
        assert!(
            ((h[l.phi(0)][l.phi(0)] - expect) / expect).abs() < 1e-12,
            "phi-phi entry {} want {expect}",
            h[l.phi(0)][l.phi(0)]
        );
    }

    #[test]
    fn compressor_cost_matches_reference_example() {
        let net = bundled::eight_node_network();
        let scen = bundled::eight_node_scenario(&net, 0.0);
        let p = assemble(&net, &scen).unwrap();
        let l = p.layout.clone();
        let mut x = vec![0.0; p.n_vars()];
        // first compressor boosted to 1.4 moving 135 kg/s, others idle
        x[l.alpha(0)] = 1.4;
        x[l.alpha(1)] = 1.0;
        x[l.alpha(2)] = 1.0;
        x[l.phi(net.n_pipes())] = 135.0;
        let b = p.eval_objective(&x).breakdown;
        let work = 22.18 * (1.4f64.powf(0.325) - 1.0) * 135.0;
        assert!((work - 346.0).abs() < 0.1, "W = {work}");
        assert!(
            (b.compression_cost - 0.0125).abs() < 1e-4,
            "eta*W = {}",
            b.compression_cost
        );
        // idle compressor costs nothing
        let mut x0 = vec![0.0; p.n_vars()];
        x0[l.alpha(0)] = 1.0;
        x0[l.alpha(1)] = 1.0;
        x0[l.alpha(2)] = 1.0;
        x0[l.phi(net.n_pipes())] = 135.0;
        assert_eq!(p.eval_objective(&x0).breakdown.compression_cost, 0.0);
    }

    #[test]
    fn market_revenue_matches_reference_state() {
        let net = bundled::eight_node_network();
        let scen = bundled::eight_node_scenario(&net, 0.0);
        let p = assemble(&net, &scen).unwrap();
        let l = p.layout.clone();
        let mut x = vec![0.0; p.n_vars()];
        for c in 0..l.n_comps {
            x[l.alpha(c)] = 1.0;
        }
        let d = 2000.0 / 44.2;
        for k in 0..3 {
            x[l.d(k)] = d;
        }
        x[l.s_ng(0)] = 3.0 * d;
        let b = p.eval_objective(&x).breakdown;
        assert!(
            (b.market_revenue - 86.85).abs() < 0.01,
            "J_MR = {}",
            b.market_revenue
        );
        assert_eq!(
            b.economic_value,
            b.market_revenue + b.emission_incentives - b.compression_cost
        );
    }

    #[test]
    fn balance_rows_sum_to_total_mass_balance() {
        let net = bundled::eight_node_network();
        let scen = bundled::eight_node_scenario(&net, 0.055);
        let p = assemble(&net, &scen).unwrap();
        let l = p.layout.clone();
        let mut x = vec![0.0; p.n_vars()];
        let mut state = 77u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 33) as f64) / (1u64 << 31) as f64
        };
        for i in 0..p.n_vars() {
            x[i] = next();
        }
        for j in 0..net.n_nodes() {
            let ng = p.eq_residual(EqKind::NgBalance(j), &x);
            let h2 = p.eq_residual(EqKind::H2Balance(j), &x);
            let mut total = 0.0;
            for &e in net.outgoing(j) {
                total += x[l.phi(e)];
            }
            for &e in net.incoming(j) {
                total -= x[l.phi(e)];
            }
            for (k, s) in p.ng_suppliers.iter().enumerate() {
                if s.node == j {
                    total -= x[l.s_ng(k)];
                }
            }
            for (k, s) in p.h2_suppliers.iter().enumerate() {
                if s.node == j {
                    total -= x[l.s_h2(k)];
                }
            }
            for (k, c) in p.consumers.iter().enumerate() {
                if c.node == j {
                    total += x[l.d(k)];
                }
            }
            assert!(
                (ng + h2 - total).abs() < 1e-12 * total.abs().max(1.0),
                "node {j}: {} vs {}",
                ng + h2,
                total
            );
        }
    }

    #[test]
    fn objective_breakdown_identity_is_exact() {
        let net = bundled::eight_node_network();
        let scen = bundled::eight_node_scenario(&net, 0.055);
        let p = assemble(&net, &scen).unwrap();
        let mut x = vec![0.3; p.n_vars()];
        for c in 0..p.layout.n_comps {
            x[p.layout.alpha(c)] = 1.2;
        }
        let b = p.eval_objective(&x).breakdown;
        assert_eq!(
            b.economic_value,
            b.market_revenue + b.emission_incentives - b.compression_cost
        );
    }
}
