//! Shared helpers for the integration suites: scaled problem setup, random
//! interior states, and finite-difference oracles.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use blendmarket::domain::{MarketScenario, Network};
use blendmarket::nlp::NlpProblem;
use blendmarket::scaling::{self, ScaledSystem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Non-dimensionalized copy of a network/scenario pair.
pub fn scaled(net: &Network<f64>, scen: &MarketScenario<f64>) -> ScaledSystem<f64> {
    let basis = scaling::ScalingBasis::from_network(net, &scen.constants).unwrap();
    scaling::nondimensionalize(net, scen, &basis)
}

/// Random point inside the variable box of a scaled problem, away from
/// bounds and kinks.
pub fn random_interior(p: &NlpProblem<'_, f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let l = &p.layout;
    let mut x = vec![0.0; p.n_vars()];
    for j in 0..l.n_nodes {
        x[l.p(j)] = rng.gen_range(0.85..1.35);
        let hi = p.net.nodes()[j].max_h2_fraction;
        x[l.gn(j)] = rng.gen_range(0.05 * hi..0.95 * hi);
    }
    for e in 0..l.n_edges {
        x[l.phi(e)] = rng.gen_range(0.05..3.0);
        let (i, _) = p.net.edge_ends(e);
        let hi = p.net.nodes()[i].max_h2_fraction;
        x[l.ge(e)] = rng.gen_range(0.05 * hi..0.95 * hi);
    }
    for c in 0..l.n_comps {
        x[l.alpha(c)] = rng.gen_range(1.01..1.35);
    }
    for k in 0..l.n_ng {
        x[l.s_ng(k)] = rng.gen_range(0.05..2.5);
    }
    for k in 0..l.n_h2 {
        x[l.s_h2(k)] = rng.gen_range(0.05..0.5);
    }
    for k in 0..l.n_consumers {
        x[l.d(k)] = rng.gen_range(0.05..2.0);
    }
    x
}

/// Central finite-difference derivative of `f` in coordinate `i`.
pub fn fd_partial(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], i: usize) -> f64 {
    let h = 1e-6 * x[i].abs().max(1.0);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[i] += h;
    xm[i] -= h;
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Relative deviation against a unit floor, the metric used by the
/// derivative acceptance checks.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}
