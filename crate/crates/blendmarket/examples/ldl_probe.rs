//! Probe: inspect the first Newton step of the two-node scaled problem.

use blendmarket::domain::{
    GNode, GNodeKind, GasConstants, MarketScenario, NetworkBuilder, Node, Participant, Pipe,
};
use blendmarket::{bundled, nlp, scaling};

fn run_solver_probe(net: &blendmarket::Network, scen: &blendmarket::MarketScenario) {
    let basis = scaling::ScalingBasis::from_network(net, &scen.constants).unwrap();
    let sys = scaling::nondimensionalize(net, scen, &basis);
    let p = nlp::assemble(&sys.network, &sys.scenario).unwrap();
    let mut opts = blendmarket::solver::SolveOptions::default();
    opts.max_iterations = 3;
    let _ = blendmarket::solver::solve(&p, &opts);
}

fn main() {
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
        length: 5000.0,
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
    let basis = scaling::ScalingBasis::from_network(&net, &scen.constants).unwrap();
    let sys = scaling::nondimensionalize(&net, &scen, &basis);
    let p = nlp::assemble(&sys.network, &sys.scenario).unwrap();
    println!("n = {}, me = {}, mi = {}", p.n_vars(), p.n_eq(), p.n_ineq());
    println!("eq rows: {:?}", p.eq_rows);
    println!("weymouth coeff scaled: {:?}", p.weymouth_coeff);
    println!(
        "scaled constants: r_h2 {} a_h2 {} a_ng {} wf {}",
        sys.scenario.constants.r_h2,
        sys.scenario.constants.a_h2,
        sys.scenario.constants.a_ng,
        sys.scenario.constants.weymouth_factor
    );
    let bid = match &sys.scenario.participants[1] {
        Participant::FlexibleConsumer {
            bid_price,
            max_energy,
        } => (*bid_price, *max_energy),
        _ => unreachable!(),
    };
    println!("scaled bid {:?}, basis phi0 {}", bid, basis.phi0);
    run_solver_probe(&net, &scen);
}
