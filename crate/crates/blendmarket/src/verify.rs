//! Independent audit of first- and second-order optimality conditions and
//! of the economic consistency properties of a solution.
//!
//! The auditor rebuilds the Lagrangian gradient from the problem evaluators
//! and the *named* dual families of a solution; it never touches the
//! solver's internal multiplier vectors, so a bookkeeping error in the
//! solver's dual extraction shows up here as a stationarity violation.
//! Residuals are meant to be evaluated on the scaled problem, where a
//! single tolerance is meaningful across constraint classes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nlp::{ConsumerRole, EqKind, IneqKind, NlpProblem};
use crate::scalar::{lit, two, Real};
use crate::scaling::blend_wave_speed_sq_unchecked;
use crate::solver::Solution;

/// Audited condition classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    Stationarity,
    PrimalFeasibility,
    Complementarity,
    MultiplierSigns,
    SoscPipeSigns,
    PriceFlowAlignment,
    CreditAdequacy,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Condition::Stationarity => "stationarity",
            Condition::PrimalFeasibility => "primal feasibility",
            Condition::Complementarity => "complementarity",
            Condition::MultiplierSigns => "multiplier signs",
            Condition::SoscPipeSigns => "second-order pipe signs",
            Condition::PriceFlowAlignment => "price-flow alignment",
            Condition::CreditAdequacy => "credit adequacy",
        };
        f.write_str(s)
    }
}

/// Result of one audited condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionResult<T> {
    pub condition: Condition,
    pub max_residual: T,
    pub pass: bool,
    /// Human-readable location of the worst row, when failing helps.
    pub worst: Option<String>,
}

/// Full audit outcome at a given tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KktReport<T> {
    pub tolerance: T,
    pub conditions: Vec<ConditionResult<T>>,
}

impl<T: Real> KktReport<T> {
    pub fn pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }
    pub fn condition(&self, which: Condition) -> Option<&ConditionResult<T>> {
        self.conditions.iter().find(|c| c.condition == which)
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("solution dual family `{0}` has wrong length for the problem")]
    DualShape(&'static str),
}

/// Variable families for stationarity reporting, one per first-order
/// condition family of the formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StationarityFamily {
    SupplyNg,
    SupplyH2,
    Demand,
    FlowPipes,
    FlowCompressors,
    Boost,
    GammaEdge,
    GammaNode,
    Pressure,
}

/// Flat primal vector in the problem's variable layout.
pub fn primal_vector<T: Real>(p: &NlpProblem<'_, T>, sol: &Solution<T>) -> Vec<T> {
    let l = &p.layout;
    let mut x = vec![T::zero(); l.total];
    x[l.pressure..l.pressure + l.n_nodes].copy_from_slice(&sol.pressure);
    x[l.flow..l.flow + l.n_edges].copy_from_slice(&sol.flow);
    x[l.gamma_node..l.gamma_node + l.n_nodes].copy_from_slice(&sol.gamma_node);
    x[l.gamma_edge..l.gamma_edge + l.n_edges].copy_from_slice(&sol.gamma_edge);
    x[l.boost..l.boost + l.n_comps].copy_from_slice(&sol.boost);
    x[l.supply_ng..l.supply_ng + l.n_ng].copy_from_slice(&sol.supply_ng);
    x[l.supply_h2..l.supply_h2 + l.n_h2].copy_from_slice(&sol.supply_h2);
    x[l.demand..l.demand + l.n_consumers].copy_from_slice(&sol.demand);
    x
}

/// Row-ordered multiplier vectors rebuilt from the named dual families.
pub fn dual_vectors<T: Real>(
    p: &NlpProblem<'_, T>,
    sol: &Solution<T>,
) -> Result<(Vec<T>, Vec<T>), VerifyError> {
    let d = &sol.duals;
    let net = p.net;
    let check = |ok: bool, name: &'static str| if ok { Ok(()) } else { Err(VerifyError::DualShape(name)) };
    check(d.lambda_ng.len() == net.n_nodes(), "lambda_ng")?;
    check(d.lambda_h2.len() == net.n_nodes(), "lambda_h2")?;
    check(d.mu.len() == net.n_pipes(), "mu")?;
    check(d.omega_cont.len() == net.n_edges(), "omega_cont")?;
    check(d.beta_slack.len() == net.slack_nodes().len(), "beta_slack")?;
    check(d.theta_boost.len() == net.n_compressors(), "theta_boost")?;
    check(d.chi_fixed.len() == p.consumers.len() - p.n_flexible, "chi_fixed")?;
    check(d.nu_flow.len() == net.n_edges(), "nu_flow")?;

    let mut y = vec![T::zero(); p.eq_rows.len()];
    for (row, kind) in p.eq_rows.iter().enumerate() {
        y[row] = match *kind {
            EqKind::Weymouth(e) => d.mu[e],
            EqKind::NgBalance(j) => d.lambda_ng[j],
            EqKind::H2Balance(j) => d.lambda_h2[j],
            EqKind::Continuity(e) => d.omega_cont[e],
            EqKind::SlackPressure(s) => d.beta_slack[s],
            EqKind::Boost(c) => d.theta_boost[c],
            EqKind::FixedDemand(k) => d.chi_fixed[k - p.n_flexible],
        };
    }
    let mut z = vec![T::zero(); p.ineq_rows.len()];
    for (row, kind) in p.ineq_rows.iter().enumerate() {
        z[row] = match *kind {
            IneqKind::MinPressure(j) => d.beta_lower[j],
            IneqKind::GammaLower(j) => d.omega_lower[j],
            IneqKind::GammaUpper(j) => d.omega_upper[j],
            IneqKind::Discharge(c) => d.theta_discharge[c],
            IneqKind::BoostLower(c) => d.theta_ratio_lower[c],
            IneqKind::BoostUpper(c) => d.theta_ratio_upper[c],
            IneqKind::SupplyNgLower(k) => d.chi_ng_lower[k],
            IneqKind::SupplyNgUpper(k) => d.chi_ng_upper[k],
            IneqKind::SupplyH2Lower(k) => d.chi_h2_lower[k],
            IneqKind::SupplyH2Upper(k) => d.chi_h2_upper[k],
            IneqKind::DemandLower(k) => d.chi_demand_lower[k],
            IneqKind::DemandUpper(k) => d.chi_demand_upper[k],
            IneqKind::FlowLower(e) => d.nu_flow[e],
        };
    }
    Ok((y, z))
}

/// Maximum Lagrangian-gradient residual per variable family.
pub fn check_stationarity<T: Real>(
    p: &NlpProblem<'_, T>,
    sol: &Solution<T>,
) -> Result<Vec<(StationarityFamily, T)>, VerifyError> {
    let x = primal_vector(p, sol);
    let (y, z) = dual_vectors(p, sol)?;
    let obj = p.eval_objective(&x);
    let (je, ji) = p.eval_jacobians(&x);
    let jet = je.tr_mul_vec(&y);
    let jit = ji.tr_mul_vec(&z);
    let r: Vec<T> = (0..p.n_vars())
        .map(|i| obj.grad[i] + jet[i] + jit[i])
        .collect();

    let l = &p.layout;
    let max_over = |range: std::ops::Range<usize>| {
        range.fold(T::zero(), |m, i| m.max(r[i].abs()))
    };
    let n_pipes = p.net.n_pipes();
    Ok(vec![
        (
            StationarityFamily::SupplyNg,
            max_over(l.supply_ng..l.supply_ng + l.n_ng),
        ),
        (
            StationarityFamily::SupplyH2,
            max_over(l.supply_h2..l.supply_h2 + l.n_h2),
        ),
        (
            StationarityFamily::Demand,
            max_over(l.demand..l.demand + l.n_consumers),
        ),
        (
            StationarityFamily::FlowPipes,
            max_over(l.flow..l.flow + n_pipes),
        ),
        (
            StationarityFamily::FlowCompressors,
            max_over(l.flow + n_pipes..l.flow + l.n_edges),
        ),
        (
            StationarityFamily::Boost,
            max_over(l.boost..l.boost + l.n_comps),
        ),
        (
            StationarityFamily::GammaEdge,
            max_over(l.gamma_edge..l.gamma_edge + l.n_edges),
        ),
        (
            StationarityFamily::GammaNode,
            max_over(l.gamma_node..l.gamma_node + l.n_nodes),
        ),
        (
            StationarityFamily::Pressure,
            max_over(l.pressure..l.pressure + l.n_nodes),
        ),
    ])
}

/// Worst complementarity product and most negative multiplier across the
/// inequality rows.
pub fn check_complementarity_and_signs<T: Real>(
    p: &NlpProblem<'_, T>,
    sol: &Solution<T>,
    tol: T,
) -> Result<(ConditionResult<T>, ConditionResult<T>), VerifyError> {
    let x = primal_vector(p, sol);
    let (_, z) = dual_vectors(p, sol)?;
    let g = p.eval_inequalities(&x);
    let mut worst_prod = T::zero();
    let mut worst_prod_row = None;
    let mut worst_sign = T::zero();
    let mut worst_sign_row = None;
    for (row, kind) in p.ineq_rows.iter().enumerate() {
        let prod = (z[row] * g[row]).abs();
        if prod > worst_prod {
            worst_prod = prod;
            worst_prod_row = Some(format!("{kind:?}"));
        }
        if -z[row] > worst_sign {
            worst_sign = -z[row];
            worst_sign_row = Some(format!("{kind:?}"));
        }
    }
    let comp = ConditionResult {
        condition: Condition::Complementarity,
        max_residual: worst_prod,
        pass: worst_prod <= lit::<T>(10.0) * tol,
        worst: worst_prod_row,
    };
    let signs = ConditionResult {
        condition: Condition::MultiplierSigns,
        max_residual: worst_sign,
        pass: worst_sign <= tol,
        worst: worst_sign_row,
    };
    Ok((comp, signs))
}

/// Sign condition on the pipe-equation duals: μ ≤ tol on every pipe that
/// carries flow above `tol`.
pub fn check_sosc_pipe_signs<T: Real>(
    p: &NlpProblem<'_, T>,
    sol: &Solution<T>,
    tol: T,
) -> ConditionResult<T> {
    let mut worst = T::zero();
    let mut worst_row = None;
    for e in 0..p.net.n_pipes() {
        if sol.flow[e] > tol && sol.duals.mu[e] > worst {
            worst = sol.duals.mu[e];
            worst_row = Some(format!("Weymouth({e})"));
        }
    }
    ConditionResult {
        condition: Condition::SoscPipeSigns,
        max_residual: worst,
        pass: worst <= tol,
        worst: worst_row,
    }
}

/// Blend-value difference along each flowing pipe, and nodal price
/// monotonicity where its single-inflow/no-injection hypothesis holds.
pub fn check_price_flow_alignment<T: Real>(
    p: &NlpProblem<'_, T>,
    sol: &Solution<T>,
    tol: T,
) -> ConditionResult<T> {
    let net = p.net;
    let d = &sol.duals;
    let flow_floor = lit::<T>(1e-6);
    let mut worst = T::zero();
    let mut worst_row = None;
    for e in 0..net.n_pipes() {
        if sol.flow[e] <= flow_floor {
            continue;
        }
        let (i, j) = net.edge_ends(e);
        let ge = sol.gamma_edge[e];
        let gi = sol.gamma_node[i];
        let downstream = d.lambda_ng[j] * (T::one() - ge) + d.lambda_h2[j] * ge;
        let upstream = d.lambda_ng[i] * (T::one() - gi) + d.lambda_h2[i] * gi;
        let deficit = upstream - downstream; // positive when price falls downstream
        if deficit > worst {
            worst = deficit;
            worst_row = Some(format!("pipe {e} ({} -> {})", net.nodes()[i].id, net.nodes()[j].id));
        }
    }
    // single-inflow, injection-free nodes: blend price must not decrease
    for j in 0..net.n_nodes() {
        let inflows = net.incoming(j);
        if inflows.len() != 1 || net.is_compressor_edge(inflows[0]) {
            continue;
        }
        let e = inflows[0];
        if sol.flow[e] <= flow_floor {
            continue;
        }
        let has_injection = p
            .ng_suppliers
            .iter()
            .chain(p.h2_suppliers.iter())
            .any(|s| s.node == j)
            || p.side_ng[j] < T::zero()
            || p.side_h2[j] < T::zero();
        if has_injection {
            continue;
        }
        let (i, _) = net.edge_ends(e);
        let li = d.lambda_ng[i] * (T::one() - sol.gamma_node[i]) + d.lambda_h2[i] * sol.gamma_node[i];
        let lj = d.lambda_ng[j] * (T::one() - sol.gamma_node[j]) + d.lambda_h2[j] * sol.gamma_node[j];
        let deficit = li - lj;
        if deficit > worst {
            worst = deficit;
            worst_row = Some(format!(
                "single-inflow node {} fed by {}",
                net.nodes()[j].id, net.nodes()[i].id
            ));
        }
    }
    ConditionResult {
        condition: Condition::PriceFlowAlignment,
        max_residual: worst,
        pass: worst <= lit::<T>(10.0) * tol,
        worst: worst_row,
    }
}

/// Recomputes the pass-through credits from the primal solution and checks
/// them against the collected incentives reported by the objective.
pub fn check_credit_adequacy<T: Real>(
    p: &NlpProblem<'_, T>,
    sol: &Solution<T>,
    tol: T,
) -> ConditionResult<T> {
    let cons = &p.scen.constants;
    let k_emission = cons.emission_factor();
    let mut credits = T::zero();
    for (k, c) in p.consumers.iter().enumerate() {
        let gamma = sol.gamma_node[c.node].max(T::zero()).min(T::one());
        let r = cons.calorific_value_unchecked(gamma);
        let premium = c.co2_incentive * gamma * k_emission / r;
        credits += premium * sol.demand[k] * r;
    }
    let j_cem = sol.objective.emission_incentives;
    let gap = (credits - j_cem).abs();
    let bound = tol * j_cem.abs().max(T::one());
    ConditionResult {
        condition: Condition::CreditAdequacy,
        max_residual: gap,
        pass: gap <= bound,
        worst: None,
    }
}

/// Runs every audit and aggregates the outcome.
pub fn verify_solution<T: Real>(
    p: &NlpProblem<'_, T>,
    sol: &Solution<T>,
    tol: T,
) -> KktReport<T> {
    let mut conditions = Vec::new();

    match check_stationarity(p, sol) {
        Ok(families) => {
            let (mut worst, mut worst_fam) = (T::zero(), None);
            for (fam, r) in families {
                if r > worst {
                    worst = r;
                    worst_fam = Some(format!("{fam:?}"));
                }
            }
            conditions.push(ConditionResult {
                condition: Condition::Stationarity,
                max_residual: worst,
                pass: worst <= tol,
                worst: worst_fam,
            });
        }
        Err(e) => conditions.push(ConditionResult {
            condition: Condition::Stationarity,
            max_residual: T::infinity(),
            pass: false,
            worst: Some(e.to_string()),
        }),
    }

    {
        let x = primal_vector(p, sol);
        let h = p.eval_equalities(&x);
        let g = p.eval_inequalities(&x);
        let mut worst = T::zero();
        let mut worst_row = None;
        for (row, kind) in p.eq_rows.iter().enumerate() {
            if h[row].abs() > worst {
                worst = h[row].abs();
                worst_row = Some(format!("{kind:?}"));
            }
        }
        for (row, kind) in p.ineq_rows.iter().enumerate() {
            if g[row] > worst {
                worst = g[row];
                worst_row = Some(format!("{kind:?}"));
            }
        }
        conditions.push(ConditionResult {
            condition: Condition::PrimalFeasibility,
            max_residual: worst,
            pass: worst <= tol,
            worst: worst_row,
        });
    }

    match check_complementarity_and_signs(p, sol, tol) {
        Ok((comp, signs)) => {
            conditions.push(comp);
            conditions.push(signs);
        }
        Err(e) => conditions.push(ConditionResult {
            condition: Condition::Complementarity,
            max_residual: T::infinity(),
            pass: false,
            worst: Some(e.to_string()),
        }),
    }

    conditions.push(check_sosc_pipe_signs(p, sol, tol));
    conditions.push(check_price_flow_alignment(p, sol, tol));
    conditions.push(check_credit_adequacy(p, sol, tol));

    KktReport {
        tolerance: tol,
        conditions,
    }
}

/// Literal re-derivation of the first-order conditions, written from the
/// closed-form expressions rather than the assembled Jacobians.
///
/// Families whose incidence the summation notation leaves implicit at
/// high-degree nodes (the nodal fraction and pressure conditions) are only
/// evaluated on nodes of total degree ≤ 2; flow and edge-fraction rows are
/// only evaluated on edges carrying flow, where the oriented-flow bound is
/// slack. Returns the maximum deviation from zero.
pub fn spot_check_first_order<T: Real>(p: &NlpProblem<'_, T>, sol: &Solution<T>) -> T {
    let net = p.net;
    let cons = &p.scen.constants;
    let d = &sol.duals;
    let k_emission = cons.emission_factor();
    let dr = cons.r_h2 - cons.r_ng;
    let dv = cons.a_h2 * cons.a_h2 - cons.a_ng * cons.a_ng;
    let eta = p.scen.compressor_cost_rate;
    let flow_floor = lit::<T>(1e-6);
    let mut worst = T::zero();
    let mut track = |v: T| {
        if v.abs() > worst {
            worst = v.abs();
        }
    };

    // suppliers: offer price balances the nodal value and the bound duals
    for (k, s) in p.ng_suppliers.iter().enumerate() {
        track(s.price - d.lambda_ng[s.node] - d.chi_ng_lower[k] + d.chi_ng_upper[k]);
    }
    for (k, s) in p.h2_suppliers.iter().enumerate() {
        track(s.price - d.lambda_h2[s.node] - d.chi_h2_lower[k] + d.chi_h2_upper[k]);
    }

    // consumers: bid value, incentive, nodal values, and demand-bound duals
    for (k, c) in p.consumers.iter().enumerate() {
        let j = c.node;
        let gamma = sol.gamma_node[j];
        let r = cons.calorific_value_unchecked(gamma);
        let mut v = -(c.co2_incentive * gamma * k_emission)
            + d.lambda_ng[j] * (T::one() - gamma)
            + d.lambda_h2[j] * gamma;
        match c.role {
            ConsumerRole::Flexible { bid_price, .. } => {
                v = v - bid_price * r - d.chi_demand_lower[k] * r + d.chi_demand_upper[k] * r;
            }
            ConsumerRole::Fixed { .. } => {
                v = v + d.chi_fixed[k - p.n_flexible] * r;
            }
        }
        track(v);
    }

    // flowing pipes: value difference balances the pressure-equation dual
    for e in 0..net.n_pipes() {
        let phi = sol.flow[e];
        if phi <= flow_floor {
            continue;
        }
        let (i, j) = net.edge_ends(e);
        let gi = sol.gamma_node[i];
        let ge = sol.gamma_edge[e];
        let v_wave = blend_wave_speed_sq_unchecked(cons, ge);
        let value = (d.lambda_ng[i] * (T::one() - gi) - d.lambda_ng[j] * (T::one() - ge))
            + (d.lambda_h2[i] * gi - d.lambda_h2[j] * ge)
            - two::<T>() * d.mu[e] * p.weymouth_coeff[e] * v_wave * phi;
        track(value);
    }

    // flowing compressor edges: value difference balances the drive cost
    for c in 0..net.n_compressors() {
        let e = net.n_pipes() + c;
        let phi = sol.flow[e];
        if phi <= flow_floor {
            continue;
        }
        let (i, j) = net.edge_ends(e);
        let gi = sol.gamma_node[i];
        let ge = sol.gamma_edge[e];
        let alpha = sol.boost[c];
        let value = (d.lambda_ng[i] * (T::one() - gi) - d.lambda_ng[j] * (T::one() - ge))
            + (d.lambda_h2[i] * gi - d.lambda_h2[j] * ge)
            + eta * cons.k_comp * (alpha.powf(cons.m_nom) - T::one());
        track(value);
    }

    // boost ratio: drive cost against the coupling and limit duals
    for c in 0..net.n_compressors() {
        let e = net.n_pipes() + c;
        let (i, _) = net.edge_ends(e);
        let alpha = sol.boost[c];
        let phi = sol.flow[e];
        let pi = sol.pressure[i];
        let value = eta * cons.k_comp * phi * cons.m_nom * alpha.powf(cons.m_nom - T::one())
            - two::<T>() * d.theta_boost[c] * alpha * pi * pi
            + d.theta_discharge[c] * pi
            - d.theta_ratio_lower[c]
            + d.theta_ratio_upper[c];
        track(value);
    }

    // flowing-edge fractions: constituent value swing against continuity
    for e in 0..net.n_edges() {
        let phi = sol.flow[e];
        if phi <= flow_floor {
            continue;
        }
        let (_, j) = net.edge_ends(e);
        let mut value = (d.lambda_ng[j] - d.lambda_h2[j]) * phi - d.omega_cont[e];
        if e < net.n_pipes() {
            value = value - d.mu[e] * p.weymouth_coeff[e] * phi * phi * dv;
        }
        track(value);
    }

    // nodal fraction and pressure conditions on low-degree nodes
    for j in 0..net.n_nodes() {
        if net.incoming(j).len() + net.outgoing(j).len() > 2 {
            continue;
        }
        let mut outflow = T::zero();
        for &e in net.outgoing(j) {
            outflow += sol.flow[e];
        }
        let mut draw = p.side_blend[j];
        let mut value = T::zero();
        for (k, c) in p.consumers.iter().enumerate() {
            if c.node != j {
                continue;
            }
            let dem = sol.demand[k];
            draw += dem;
            value -= c.co2_incentive * dem * k_emission;
            match c.role {
                ConsumerRole::Flexible { bid_price, .. } => {
                    value -= bid_price * dem * dr;
                    value += (d.chi_demand_upper[k] - d.chi_demand_lower[k]) * dem * dr;
                }
                ConsumerRole::Fixed { .. } => {
                    value += d.chi_fixed[k - p.n_flexible] * dem * dr;
                }
            }
        }
        value += (d.lambda_h2[j] - d.lambda_ng[j]) * (outflow + draw);
        value += d.omega_upper[j] - d.omega_lower[j];
        for &e in net.outgoing(j) {
            value += d.omega_cont[e];
        }
        track(value);

        // pressure condition
        let pj = sol.pressure[j];
        let mut pv = -d.beta_lower[j];
        for (s, &node) in net.slack_nodes().iter().enumerate() {
            if node == j {
                pv += d.beta_slack[s];
            }
        }
        for &e in net.outgoing(j) {
            if net.is_compressor_edge(e) {
                let c = e - net.n_pipes();
                let alpha = sol.boost[c];
                pv += -two::<T>() * d.theta_boost[c] * alpha * alpha * pj
                    + d.theta_discharge[c] * alpha;
            } else {
                pv += two::<T>() * d.mu[e] * pj;
            }
        }
        for &e in net.incoming(j) {
            if net.is_compressor_edge(e) {
                let c = e - net.n_pipes();
                pv += two::<T>() * d.theta_boost[c] * pj;
            } else {
                pv -= two::<T>() * d.mu[e] * pj;
            }
        }
        track(pv);
    }

    worst
}
