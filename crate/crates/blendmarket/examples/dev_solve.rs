//! Development harness: solve the bundled systems and print convergence
//! diagnostics. Not part of the test suite.

use blendmarket::domain::{
    GNode, GNodeKind, GasConstants, MarketScenario, NetworkBuilder, Node, Participant, Pipe,
};
use blendmarket::{bundled, nlp, scaling, solver};

fn two_node(length: f64) -> (blendmarket::Network, blendmarket::MarketScenario) {
    let mut b = NetworkBuilder::new();
    b.nodes = vec![
        Node {
            id: "N1".into(),
            min_pressure: 3.0e6,
            max_pressure: 6.0e6,
            min_h2_fraction: 0.0,
            max_h2_fraction: 0.1,
            slack_pressure: Some(4.0e6),
        },
        Node {
            id: "N2".into(),
            min_pressure: 3.0e6,
            max_pressure: 6.0e6,
            min_h2_fraction: 0.0,
            max_h2_fraction: 0.1,
            slack_pressure: None,
        },
    ];
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

fn run(tag: &str, net: &blendmarket::Network, scen: &blendmarket::MarketScenario) {
    let basis = scaling::ScalingBasis::from_network(net, &scen.constants).unwrap();
    let sys = scaling::nondimensionalize(net, scen, &basis);
    let p = nlp::assemble(&sys.network, &sys.scenario).unwrap();
    let sol = solver::solve(&p, &Default::default());
    println!(
        "{tag}: status {:?} after {} iterations, residual {:.3e}",
        sol.status, sol.iterations, sol.kkt_residual
    );
    for (i, r) in sol.residual_history.iter().enumerate() {
        println!("  iter {i:3}: {r:.6e}");
    }
    println!(
        "  J_EV(scaled) = {:.6}, demand = {:?}",
        sol.objective.economic_value, sol.demand
    );
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "two".into());
    match which.as_str() {
        "two" => {
            let (net, scen) = two_node(5000.0);
            run("two-node uncongested", &net, &scen);
        }
        "congested" => {
            let (net, scen) = two_node(109_538.0);
            run("two-node congested", &net, &scen);
        }
        "eight" => {
            let net = bundled::eight_node_network();
            run("8-node s1", &net, &bundled::eight_node_scenario(&net, 0.0));
            run("8-node s2", &net, &bundled::eight_node_scenario(&net, 0.055));
        }
        "forty" => {
            let net = bundled::forty_node_network();
            run(
                "40-node baseline",
                &net,
                &bundled::forty_node_scenario(&net, 0.055, false),
            );
        }
        "dump2" => dump_eight_two(),
        "dump40" => dump_forty(true, 0.055, false),
        "dump40low" => dump_forty(true, 0.055, true),
        "dump40base" => dump_forty(false, 0.055, false),
        "chain" => chain_tuning(),
        other => eprintln!("unknown case {other}"),
    }
}

// detailed state dump for the 8-node scenario-2 solve
pub fn dump_eight_two() {
    let relax: f64 = std::env::var("RELAX").ok().and_then(|v| v.parse().ok()).unwrap_or(1.0);
    let net = bundled::eight_node_network();
    let scen = bundled::eight_node_scenario(&net, 0.055);
    let mut opts = blendmarket::SolveOptions::default();
    opts.bound_relaxation = relax;
    let outcome = blendmarket::clear_market(&net, &scen, &opts).unwrap();
    let sol = &outcome.solution;
    println!("pressures (MPa):");
    for (j, n) in net.nodes().iter().enumerate() {
        println!(
            "  {}: P={:.4} gamma={:.5} lNG={:.5} lH2={:.5} beta_l={:.3e} om_l={:.3e} om_u={:.3e}",
            n.id,
            sol.pressure[j] / 1e6,
            sol.gamma_node[j],
            sol.duals.lambda_ng[j],
            sol.duals.lambda_h2[j],
            sol.duals.beta_lower[j],
            sol.duals.omega_lower[j],
            sol.duals.omega_upper[j]
        );
    }
    println!("edges:");
    for e in 0..net.n_edges() {
        let (i, j) = net.edge_ends(e);
        let kind = if net.is_compressor_edge(e) { "comp" } else { "pipe" };
        let mu = if e < net.n_pipes() {
            sol.duals.mu[e]
        } else {
            let c = e - net.n_pipes();
            sol.duals.theta_boost[c]
        };
        println!(
            "  {kind} {}->{}: phi={:.3} gamma_e={:.5} mu/theta={:.4e} nu={:.3e}",
            net.nodes()[i].id,
            net.nodes()[j].id,
            sol.flow[e],
            sol.gamma_edge[e],
            mu,
            sol.duals.nu_flow[e]
        );
    }
    for c in 0..net.n_compressors() {
        println!(
            "  comp {c}: alpha={:.4} th_lo={:.3e} th_hi={:.3e} th_dis={:.3e}",
            sol.boost[c],
            sol.duals.theta_ratio_lower[c],
            sol.duals.theta_ratio_upper[c],
            sol.duals.theta_discharge[c]
        );
    }
    println!(
        "supplies ng={:?} h2={:?} demands={:?}",
        sol.supply_ng, sol.supply_h2, sol.demand
    );
}

// dump dirty pipes of a 40-node variant
pub fn dump_forty(counter: bool, co2: f64, halve: bool) {
    let net = if counter {
        bundled::forty_node_counter_network()
    } else {
        bundled::forty_node_network()
    };
    let scen = bundled::forty_node_scenario(&net, co2, halve);
    let outcome = blendmarket::clear_market(&net, &scen, &Default::default()).unwrap();
    let sol = &outcome.scaled_solution;
    println!("J_EV = {:.3}", outcome.report.objective.economic_value);
    for e in 0..net.n_pipes() {
        let (i, j) = net.edge_ends(e);
        if sol.flow[e] > 1e-6 && sol.duals.mu[e] > 1e-8 {
            println!(
                "dirty pipe {e} {}->{}: phi={:.4} mu={:.3e} | gi={:.4} gj={:.4} ge={:.4} | lNGi={:.4} lNGj={:.4} lH2i={:.4} lH2j={:.4} | Pi={:.4} Pj={:.4}",
                net.nodes()[i].id,
                net.nodes()[j].id,
                sol.flow[e],
                sol.duals.mu[e],
                sol.gamma_node[i],
                sol.gamma_node[j],
                sol.gamma_edge[e],
                sol.duals.lambda_ng[i],
                sol.duals.lambda_ng[j],
                sol.duals.lambda_h2[i],
                sol.duals.lambda_h2[j],
                sol.pressure[i],
                sol.pressure[j]
            );
        }
    }
    // context: the endpoints' neighborhoods
    for id in ["36", "19", "20", "33", "34", "18", "17"] {
        let j = net.node_index(id).unwrap();
        println!(
            "node {id}: P={:.4} gamma={:.5} lNG={:.4} lH2={:.4} beta_l={:.3e}",
            sol.pressure[j],
            sol.gamma_node[j],
            sol.duals.lambda_ng[j],
            sol.duals.lambda_h2[j],
            sol.duals.beta_lower[j]
        );
    }
}

// sweep the 16->17 pipe length scaling and watch the incentive response
pub fn chain_tuning() {
    use blendmarket::domain::NetworkBuilder;
    for scale in [1.0_f64, 2.0, 3.0, 5.0, 8.0] {
        let base = bundled::forty_node_counter_network();
        let mut parts = NetworkBuilder {
            nodes: base.nodes().to_vec(),
            pipes: base.pipes().to_vec(),
            compressors: base.compressors().to_vec(),
            gnodes: base.gnodes().to_vec(),
        };
        for p in parts.pipes.iter_mut() {
            if p.from == "16" && p.to == "17" {
                p.length *= scale;
            }
        }
        let net = parts.build().unwrap();
        let low = bundled::forty_node_scenario(&net, 0.055, true);
        let high = bundled::forty_node_scenario(&net, 0.155, true);
        let out_low = blendmarket::clear_market(&net, &low, &Default::default());
        let out_high = blendmarket::clear_market(&net, &high, &Default::default());
        match (out_low, out_high) {
            (Ok(a), Ok(b)) => {
                let served = |o: &blendmarket::MarketOutcome<f64>, id: &str| {
                    o.report
                        .consumers
                        .iter()
                        .find(|c| c.gnode == id)
                        .map(|c| c.energy)
                        .unwrap_or(-1.0)
                };
                println!(
                    "scale {scale}: NG {:.2} -> {:.2} | CO2 {:.1} -> {:.1} | D16 {:.0}->{:.0} D17 {:.0}->{:.0} D37 {:.0}->{:.0} D12 {:.0}->{:.0}",
                    a.report.total_ng_delivered,
                    b.report.total_ng_delivered,
                    a.report.total_co2,
                    b.report.total_co2,
                    served(&a, "D16"),
                    served(&b, "D16"),
                    served(&a, "D17"),
                    served(&b, "D17"),
                    served(&a, "D37"),
                    served(&b, "D37"),
                    served(&a, "D12"),
                    served(&b, "D12"),
                );
            }
            (a, b) => println!("scale {scale}: solve failed: low {:?} high {:?}", a.is_ok(), b.is_ok()),
        }
    }
}
