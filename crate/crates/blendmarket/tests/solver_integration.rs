//! End-to-end solver behavior on small systems with independent oracles,
//! plus the bundled 8-node market scenarios.

mod common;

use blendmarket::domain::{
    GNode, GNodeKind, GasConstants, MarketScenario, NetworkBuilder, Node, Participant, Pipe,
};
use blendmarket::{bundled, clear_market, nlp, scaling, solver, verify};

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

/// Two-node line with one NG offer and one flexible bid; `length` sets the
/// congestion level.
fn two_node_market(length: f64) -> (blendmarket::Network, blendmarket::MarketScenario) {
    let mut b = NetworkBuilder::new();
    b.nodes = vec![node("N1", Some(4.0e6)), node("N2", None)];
    b.pipes = vec![Pipe {
        from: "N1".into(),
        to: "N2".into(),
        friction: 0.01,
        length,
        diameter: 0.5,
        area: 0.19635,
    }];
    b.gnodes = vec![
        GNode {
            id: "S".into(),
            node: "N1".into(),
            kind: GNodeKind::NgSupplier,
        },
        GNode {
            id: "D".into(),
            node: "N2".into(),
            kind: GNodeKind::FlexibleConsumer,
        },
    ];
    let net = b.build().unwrap();
    let scen = MarketScenario {
        participants: vec![
            Participant::NgSupplier {
                offer_price: 0.2,
                max_supply: None,
            },
            Participant::FlexibleConsumer {
                bid_price: 0.019,
                max_energy: 2000.0,
            },
        ],
        co2_incentive: vec![0.0; 2],
        compressor_cost_rate: bundled::DEFAULT_COST_RATE,
        constants: GasConstants::default(),
        side_draws: vec![],
    };
    (net, scen)
}

#[test]
fn uncongested_two_node_clears_at_the_offer_price() {
    let (net, scen) = two_node_market(5000.0);
    let outcome = clear_market(&net, &scen, &Default::default()).expect("optimal");
    let sol = &outcome.solution;
    // full quantity served
    let energy = sol.demand[0] * 44.2;
    assert!((energy - 2000.0).abs() < 1e-3, "energy {energy}");
    // nodal NG value equals the offer everywhere
    for j in 0..net.n_nodes() {
        assert!(
            (sol.duals.lambda_ng[j] - 0.2).abs() < 1e-4,
            "lambda_ng[{j}] = {}",
            sol.duals.lambda_ng[j]
        );
    }
    let consumer = &outcome.report.consumers[0];
    assert!(
        (consumer.lambda_energy - 0.2 / 44.2).abs() < 2e-5,
        "lambda_e {}",
        consumer.lambda_energy
    );
    // demand cap binds: its dual carries the surplus
    let chi_u = sol.duals.chi_demand_upper[0];
    assert!(
        (chi_u - (0.019 - 0.2 / 44.2)).abs() < 1e-4,
        "chi_upper {chi_u}"
    );
}

#[test]
fn congested_two_node_matches_grid_search_oracle() {
    // pipe sized so the pressure floor binds near 30 kg/s
    let (net, scen) = two_node_market(109_538.0);
    let outcome = clear_market(&net, &scen, &Default::default()).expect("optimal");
    let sol = &outcome.solution;

    // brute-force oracle on the single degree of freedom: d = phi = s
    let pipe = &net.pipes()[0];
    let w = pipe.friction * pipe.length / (pipe.diameter * pipe.area * pipe.area);
    let v = 370.0f64 * 370.0;
    let p1 = 4.0e6f64;
    let steps = 4001;
    let mut best = (0.0f64, f64::MIN);
    for k in 0..steps {
        let d = 2000.0 / 44.2 * k as f64 / (steps - 1) as f64;
        let p2sq = p1 * p1 - w * v * d * d;
        if p2sq < 3.0e6f64 * 3.0e6 {
            continue;
        }
        let j = (0.019 * 44.2 - 0.2) * d;
        if j > best.1 {
            best = (d, j);
        }
    }
    let grid_step = 2000.0 / 44.2 / (steps - 1) as f64;
    assert!(
        (sol.demand[0] - best.0).abs() <= 2.0 * grid_step,
        "solver demand {} vs grid optimum {}",
        sol.demand[0],
        best.0
    );
    assert!(
        (sol.objective.economic_value - best.1).abs() <= 2.0 * grid_step * 0.64,
        "objective {} vs grid {}",
        sol.objective.economic_value,
        best.1
    );
    // interior consumer: cleared energy price equals the bid
    let consumer = &outcome.report.consumers[0];
    assert!(
        (consumer.lambda_energy - 0.019).abs() < 1e-4,
        "marginal consumer prices at its bid: {}",
        consumer.lambda_energy
    );
    // congestion shows up as a binding pressure floor downstream
    assert!(sol.duals.beta_lower[1] > 0.0);
}

#[test]
fn zero_demand_market_clears_to_zero_flow() {
    let (net, mut scen) = two_node_market(5000.0);
    scen.participants[1] = Participant::FlexibleConsumer {
        bid_price: 0.019,
        max_energy: 0.0,
    };
    let outcome = clear_market(&net, &scen, &Default::default()).expect("optimal");
    let sol = &outcome.solution;
    assert!(sol.is_optimal());
    assert!(sol.objective.economic_value.abs() < 1e-6);
    for &phi in &sol.flow {
        assert!(phi.abs() < 1e-4, "flow {phi}");
    }
}

#[test]
fn solver_is_deterministic() {
    let net = bundled::eight_node_network();
    let scen = bundled::eight_node_scenario(&net, 0.055);
    let a = clear_market(&net, &scen, &Default::default()).expect("optimal");
    let b = clear_market(&net, &scen, &Default::default()).expect("optimal");
    assert_eq!(a.solution.iterations, b.solution.iterations);
    assert_eq!(a.solution.pressure, b.solution.pressure);
    assert_eq!(a.solution.flow, b.solution.flow);
    assert_eq!(a.solution.duals.lambda_ng, b.solution.duals.lambda_ng);
}

#[test]
fn eight_node_scenario_one_reproduces_reference_market() {
    let net = bundled::eight_node_network();
    let scen = bundled::eight_node_scenario(&net, 0.0);
    let outcome = clear_market(&net, &scen, &Default::default()).expect("optimal");
    let sol = &outcome.solution;
    let report = &outcome.report;

    // every offtaker receives its full bid quantity
    for c in &report.consumers {
        let bid = bundled::EIGHT_NODE_BIDS
            .iter()
            .find(|(id, _)| *id == c.gnode)
            .unwrap()
            .1;
        assert!((c.energy - bid).abs() < 0.5, "{}: {}", c.gnode, c.energy);
    }
    // no incentive means no hydrogen
    for &g in &sol.gamma_node {
        assert!(g < 1e-5, "gamma {g}");
    }
    assert!(
        (sol.objective.economic_value - 86.85).abs() / 86.85 < 0.02,
        "J_EV = {}",
        sol.objective.economic_value
    );
    // uncongested: cleared energy value equals the NG offer via conversion
    for c in &report.consumers {
        assert!(
            (c.lambda_energy - 0.2 / 44.2).abs() < 2e-5,
            "{}: lambda_e {}",
            c.gnode,
            c.lambda_energy
        );
    }
    // total emitted carbon near the reference level
    assert!(
        (report.total_co2 - 373.0).abs() / 373.0 < 0.02,
        "CO2 {}",
        report.total_co2
    );
}

#[test]
fn eight_node_scenario_two_blends_to_the_cap() {
    let net = bundled::eight_node_network();
    let base = clear_market(
        &net,
        &bundled::eight_node_scenario(&net, 0.0),
        &Default::default(),
    )
    .expect("optimal");
    let outcome = clear_market(
        &net,
        &bundled::eight_node_scenario(&net, 0.055),
        &Default::default(),
    )
    .expect("optimal");
    let sol = &outcome.solution;
    let report = &outcome.report;

    // fraction cap binds between the injection site (J7) and the merge (J4)
    let j7 = net.node_index("J7").unwrap();
    let j8 = net.node_index("J8").unwrap();
    assert!(sol.gamma_node[j7] > 0.0999, "gamma J7 {}", sol.gamma_node[j7]);
    assert!(sol.gamma_node[j8] > 0.0999, "gamma J8 {}", sol.gamma_node[j8]);

    // NG injection drops by 15-25%
    let ng0: f64 = base.solution.supply_ng.iter().sum();
    let ng1: f64 = sol.supply_ng.iter().sum();
    let drop = 1.0 - ng1 / ng0;
    assert!((0.15..=0.25).contains(&drop), "NG reduction {drop}");

    // total CO2 falls by at least 18%
    let co2_drop = 1.0 - report.total_co2 / base.report.total_co2;
    assert!(co2_drop >= 0.18, "CO2 reduction {co2_drop}");

    // economic value rises 2-4%
    let gain = outcome.report.objective.economic_value / base.report.objective.economic_value - 1.0;
    assert!((0.02..=0.04).contains(&gain), "J_EV gain {gain}");

    // collected incentives fund the credits
    let j_cem = report.objective.emission_incentives;
    assert!(
        (report.d_ptc - j_cem).abs() <= 1e-6 * j_cem.max(1.0),
        "D_PTC {} vs J_CEM {}",
        report.d_ptc,
        j_cem
    );
    assert!(report.credits_reconciled);
}

#[test]
fn verifier_accepts_converged_solutions() {
    let net = bundled::eight_node_network();
    for co2 in [0.0, 0.055] {
        let scen = bundled::eight_node_scenario(&net, co2);
        let outcome = clear_market(&net, &scen, &Default::default()).expect("optimal");
        let p = nlp::assemble(&outcome.scaled.network, &outcome.scaled.scenario).unwrap();
        let report = verify::verify_solution(&p, &outcome.scaled_solution, 1e-6);
        assert!(report.pass(), "audit at co2={co2}: {:#?}", report.conditions);
        let gap = verify::spot_check_first_order(&p, &outcome.scaled_solution);
        assert!(gap < 1e-5, "literal first-order spot check gap {gap}");
    }
}

#[test]
fn verifier_detects_each_corruption_class() {
    let net = bundled::eight_node_network();
    let scen = bundled::eight_node_scenario(&net, 0.055);
    let outcome = clear_market(&net, &scen, &Default::default()).expect("optimal");
    let p = nlp::assemble(&outcome.scaled.network, &outcome.scaled.scenario).unwrap();
    let good = &outcome.scaled_solution;
    let tol = 1e-6;
    assert!(verify::verify_solution(&p, good, tol).pass());

    use verify::Condition;
    let fails = |sol: &solver::Solution<f64>, cond: Condition| {
        let report = verify::verify_solution(&p, sol, tol);
        let c = report.condition(cond).unwrap();
        assert!(!c.pass, "{cond} should fail, residual {}", c.max_residual);
    };

    // primal feasibility: pressure bumped off the slack value
    let mut bad = good.clone();
    bad.pressure[0] += 0.01;
    fails(&bad, Condition::PrimalFeasibility);

    // stationarity: nodal NG value corrupted
    let mut bad = good.clone();
    bad.duals.lambda_ng[3] += 0.05;
    fails(&bad, Condition::Stationarity);

    // complementarity: multiplier invented on a slack bound
    let mut bad = good.clone();
    let slack_row = (0..net.n_nodes())
        .find(|&j| good.pressure[j] > good.duals.beta_lower[j].max(0.76))
        .unwrap_or(1);
    bad.duals.beta_lower[slack_row] += 0.1;
    fails(&bad, Condition::Complementarity);

    // sign condition: negative multiplier
    let mut bad = good.clone();
    bad.duals.omega_upper[2] = -1e-3;
    fails(&bad, Condition::MultiplierSigns);

    // second-order pipe sign: mu flipped positive on a flowing pipe
    let mut bad = good.clone();
    let flowing = (0..net.n_pipes()).find(|&e| good.flow[e] > 0.1).unwrap();
    bad.duals.mu[flowing] = 1e-3;
    fails(&bad, Condition::SoscPipeSigns);

    // price-flow alignment: constituent values swapped across a flowing pipe
    let mut bad = good.clone();
    let (i, j) = net.edge_ends(flowing);
    bad.duals.lambda_ng[i] = good.duals.lambda_ng[j] + 0.2;
    bad.duals.lambda_h2[i] = good.duals.lambda_h2[j] + 0.2;
    fails(&bad, Condition::PriceFlowAlignment);

    // credit adequacy: reported incentives tampered
    let mut bad = good.clone();
    bad.objective.emission_incentives *= 1.5;
    fails(&bad, Condition::CreditAdequacy);
}

#[test]
fn stationarity_detector_tracks_dual_perturbations() {
    let net = bundled::eight_node_network();
    let scen = bundled::eight_node_scenario(&net, 0.055);
    let outcome = clear_market(&net, &scen, &Default::default()).expect("optimal");
    let p = nlp::assemble(&outcome.scaled.network, &outcome.scaled.scenario).unwrap();

    let base: f64 = verify::check_stationarity(&p, &outcome.scaled_solution)
        .unwrap()
        .iter()
        .map(|(_, r)| *r)
        .fold(0.0, f64::max);
    let mut bumped = outcome.scaled_solution.clone();
    bumped.duals.lambda_ng[2] += 1e-3;
    let after: f64 = verify::check_stationarity(&p, &bumped)
        .unwrap()
        .iter()
        .map(|(_, r)| *r)
        .fold(0.0, f64::max);
    // the NG balance column has entries of order one, so the residual must
    // move by a comparable fraction of the perturbation
    assert!(after > base + 2e-4, "residual {base} -> {after}");
}

#[test]
fn dual_rescaling_commutes_with_price_identities() {
    let net = bundled::eight_node_network();
    let scen = bundled::eight_node_scenario(&net, 0.055);
    let outcome = clear_market(&net, &scen, &Default::default()).expect("optimal");

    let scaled_sol = &outcome.scaled_solution;
    let sys = &outcome.scaled;
    // energy value computed in scaled units, then redimensionalized
    let scaled_prices = blendmarket::pricing::nodal_prices(&sys.network, &sys.scenario, scaled_sol);
    let factor = 1.0 / sys.r_ng_si; // scaled $/R_NG-energy to $/MJ
    // versus redimensionalized duals fed to the SI price formulas
    let si_prices = &outcome.report.nodal;
    for (a, b) in scaled_prices.per_node.iter().zip(&si_prices.per_node) {
        let via_scaled = a.lambda_energy * factor;
        assert!(
            (via_scaled - b.lambda_energy).abs() <= 1e-10 * b.lambda_energy.abs().max(1.0),
            "node {}: {} vs {}",
            a.node,
            via_scaled,
            b.lambda_energy
        );
    }
}

#[test]
fn round_trip_scaling_identity() {
    let net = bundled::eight_node_network();
    let scen = bundled::eight_node_scenario(&net, 0.055);
    let basis = scaling::ScalingBasis::from_network(&net, &scen.constants).unwrap();
    let sys = scaling::nondimensionalize(&net, &scen, &basis);
    let (net2, scen2) = scaling::redimensionalize_system(&sys);
    for (a, b) in net.nodes().iter().zip(net2.nodes()) {
        assert!((a.min_pressure - b.min_pressure).abs() <= 1e-12 * a.min_pressure);
        assert!((a.max_pressure - b.max_pressure).abs() <= 1e-12 * a.max_pressure);
    }
    for (a, b) in net.pipes().iter().zip(net2.pipes()) {
        assert!((a.length - b.length).abs() <= 1e-12 * a.length);
        assert!((a.diameter - b.diameter).abs() <= 1e-12 * a.diameter);
        assert!((a.area - b.area).abs() <= 1e-12 * a.area);
    }
    for (a, b) in scen.participants.iter().zip(&scen2.participants) {
        match (a, b) {
            (
                Participant::FlexibleConsumer {
                    bid_price: p1,
                    max_energy: e1,
                },
                Participant::FlexibleConsumer {
                    bid_price: p2,
                    max_energy: e2,
                },
            ) => {
                assert!((p1 - p2).abs() <= 1e-12 * p1);
                assert!((e1 - e2).abs() <= 1e-12 * e1);
            }
            _ => assert_eq!(a, b),
        }
    }
    // identity at the basis values
    assert!((sys.network.nodes()[0].slack_pressure.unwrap() - 1.0).abs() < 1e-15);
}
