//! Timing probe for the bundled systems.

use std::time::Instant;

use blendmarket::{bundled, nlp, scaling, solver};

fn time_solve(tag: &str, net: &blendmarket::Network, scen: &blendmarket::MarketScenario) {
    let basis = scaling::ScalingBasis::from_network(net, &scen.constants).unwrap();
    let sys = scaling::nondimensionalize(net, scen, &basis);
    let p = nlp::assemble(&sys.network, &sys.scenario).unwrap();
    let t0 = Instant::now();
    let sol = solver::solve(&p, &Default::default());
    let dt = t0.elapsed();
    println!(
        "{tag}: {:?} in {:.1} ms ({} iterations, residual {:.2e})",
        sol.status,
        dt.as_secs_f64() * 1e3,
        sol.iterations,
        sol.kkt_residual
    );
}

fn main() {
    let net = bundled::eight_node_network();
    time_solve("8-node s1", &net, &bundled::eight_node_scenario(&net, 0.0));
    time_solve("8-node s2", &net, &bundled::eight_node_scenario(&net, 0.055));
    let net40 = bundled::forty_node_network();
    time_solve(
        "40-node baseline",
        &net40,
        &bundled::forty_node_scenario(&net40, 0.055, false),
    );
    let counter = bundled::forty_node_counter_network();
    time_solve(
        "40-node counter low",
        &counter,
        &bundled::forty_node_scenario(&counter, 0.055, true),
    );
    time_solve(
        "40-node counter high",
        &counter,
        &bundled::forty_node_scenario(&counter, 0.155, true),
    );
}
