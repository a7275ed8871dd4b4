//! Bundled test networks and scenarios.
//!
//! Two systems ship with the crate:
//!
//! * an 8-node network: one NG supplier at the slack node, one hydrogen
//!   supplier on a branch that rejoins the trunk at a merge node, three
//!   flexible offtakers, three compressor stations;
//! * a 40-node looped transmission system shaped after the public
//!   GasLib-40 instance (3 sources, 29 sinks, 8 inner nodes, 39 pipes,
//!   6 compressor stations), with supply placements for a baseline market
//!   and for a low-bid stress variant.
//!
//! Pipe friction/length/diameter data is not tabulated anywhere public for
//! either case, so both networks carry a *derived* parameterization: every
//! pipe's flow coefficient is computed from a documented design point
//! (target nodal pressures plus a mass-balanced flow split), and the
//! lengths/diameters are realized from those coefficients. The
//! `calibration` example prints the derived tables and the design residual.

use crate::domain::{
    Compressor, GNode, GNodeKind, GasConstants, MarketScenario, Network, NetworkBuilder, Node,
    Participant, Pipe,
};

const MPA: f64 = 1.0e6;
/// Squared wave speed in pure natural gas at the calibration blend.
const V_NG: f64 = 370.0 * 370.0;
const FRICTION: f64 = 0.01;

/// Compressor drive cost, 13 cents per kWh.
pub const DEFAULT_COST_RATE: f64 = 0.13 / 3600.0;
pub const DEFAULT_NG_OFFER: f64 = 0.2;
pub const DEFAULT_H2_OFFER: f64 = 0.8;
pub const DEFAULT_BID: f64 = 0.019;

fn node(id: &str, slack_mpa: Option<f64>) -> Node<f64> {
    Node {
        id: id.to_string(),
        min_pressure: 3.0 * MPA,
        max_pressure: 6.0 * MPA,
        min_h2_fraction: 0.0,
        max_h2_fraction: 0.1,
        slack_pressure: slack_mpa.map(|p| p * MPA),
    }
}

/// Realizes a pipe whose Weymouth coefficient f·L/(D·A²) produces the
/// design pressure drop at the design flow (evaluated at the pure-NG wave
/// speed). The diameter follows the carried flow; the length absorbs the
/// remaining coefficient.
fn design_pipe(from: &str, to: &str, p_from_mpa: f64, p_to_mpa: f64, flow_kg_s: f64) -> Pipe<f64> {
    assert!(
        p_from_mpa > p_to_mpa,
        "design pressure must drop along {from}->{to}"
    );
    let dp2 = (p_from_mpa * p_from_mpa - p_to_mpa * p_to_mpa) * MPA * MPA;
    let coeff = dp2 / (V_NG * flow_kg_s * flow_kg_s);
    let diameter = if flow_kg_s >= 250.0 {
        1.0
    } else if flow_kg_s >= 150.0 {
        0.8
    } else if flow_kg_s >= 80.0 {
        0.65
    } else if flow_kg_s >= 40.0 {
        0.5
    } else {
        0.4
    };
    let area = std::f64::consts::PI * diameter * diameter / 4.0;
    let length = coeff * diameter * area * area / FRICTION;
    Pipe {
        from: from.to_string(),
        to: to.to_string(),
        friction: FRICTION,
        length,
        diameter,
        area,
    }
}

fn compressor(from: &str, to: &str) -> Compressor<f64> {
    Compressor {
        from: from.to_string(),
        to: to.to_string(),
        max_boost: 1.4,
    }
}

/// Energy bids of the three offtakers [MJ/s]: one lean offtaker upstream
/// of the hydrogen injection, two downstream of it.
pub const EIGHT_NODE_BIDS: [(&str, f64); 3] = [("D1", 1500.0), ("D2", 2250.0), ("D3", 2250.0)];

/// Design state of the 8-node system: target pressures [MPa] and the flow
/// split of the all-gas design point (offtakers at their full bids,
/// compressors idle).
pub fn eight_node_design() -> (Vec<(&'static str, f64)>, Vec<(&'static str, &'static str, f64)>) {
    let total = 6000.0 / 44.2;
    let trunk = 4500.0 / 44.2; // past the D1 offtake
    let pressures = vec![
        ("J1", 4.00),
        ("J2", 3.93),
        ("J3", 3.85),
        ("J4", 3.25),
        ("J5", 3.25),
        ("J6", 3.60),
        ("J7", 3.45),
        ("J8", 3.25),
    ];
    let flows = vec![
        ("J1", "J2", total),
        ("J2", "J3", total),
        ("J3", "J6", trunk),
        ("J6", "J7", trunk),
        ("J7", "J8", trunk),
    ];
    (pressures, flows)
}

/// 8-node test network: a single trunk from the slack supply node past the
/// lean offtaker at J3 to the hydrogen injection at J7, then through twin
/// compressor stations that rejoin at the merge node J4 feeding the J5
/// offtakers behind a third compressor.
pub fn eight_node_network() -> Network<f64> {
    let (pressies, flows) = eight_node_design();
    let p: std::collections::HashMap<&str, f64> = pressies.iter().copied().collect();
    let mut b = NetworkBuilder::new();
    b.nodes = vec![
        node("J1", Some(4.0)),
        node("J2", None),
        node("J3", None),
        node("J4", None),
        node("J5", None),
        node("J6", None),
        node("J7", None),
        node("J8", None),
    ];
    b.pipes = flows
        .iter()
        .map(|&(from, to, q)| design_pipe(from, to, p[from], p[to], q))
        .collect();
    b.compressors = vec![
        compressor("J8", "J4"),
        compressor("J8", "J4"),
        compressor("J4", "J5"),
    ];
    b.gnodes = vec![
        GNode {
            id: "S1".into(),
            node: "J1".into(),
            kind: GNodeKind::NgSupplier,
        },
        GNode {
            id: "S2".into(),
            node: "J7".into(),
            kind: GNodeKind::H2Supplier,
        },
        GNode {
            id: "D1".into(),
            node: "J3".into(),
            kind: GNodeKind::FlexibleConsumer,
        },
        GNode {
            id: "D2".into(),
            node: "J5".into(),
            kind: GNodeKind::FlexibleConsumer,
        },
        GNode {
            id: "D3".into(),
            node: "J5".into(),
            kind: GNodeKind::FlexibleConsumer,
        },
    ];
    b.build().expect("bundled 8-node network is valid")
}

/// Scenario for the 8-node network: unlimited offers at 0.2 $/kg (NG) and
/// 0.8 $/kg (H₂), three bids totalling 6000 MJ/s at 0.019 $/MJ, and the
/// given CO₂ incentive for every participant.
pub fn eight_node_scenario(net: &Network<f64>, co2_incentive: f64) -> MarketScenario<f64> {
    let participants = net
        .gnodes()
        .iter()
        .map(|g| match g.kind {
            GNodeKind::NgSupplier => Participant::NgSupplier {
                offer_price: DEFAULT_NG_OFFER,
                max_supply: None,
            },
            GNodeKind::H2Supplier => Participant::H2Supplier {
                offer_price: DEFAULT_H2_OFFER,
                max_supply: None,
            },
            GNodeKind::FlexibleConsumer => Participant::FlexibleConsumer {
                bid_price: DEFAULT_BID,
                max_energy: EIGHT_NODE_BIDS
                    .iter()
                    .find(|(id, _)| *id == g.id)
                    .map(|(_, e)| *e)
                    .expect("bundled offtaker"),
            },
            GNodeKind::FixedConsumer => unreachable!("no fixed consumers bundled"),
        })
        .collect();
    MarketScenario {
        participants,
        co2_incentive: vec![co2_incentive; net.gnodes().len()],
        compressor_cost_rate: DEFAULT_COST_RATE,
        constants: GasConstants::default(),
        side_draws: Vec::new(),
    }
}

/// Design tables of the 40-node system: (node, pressure target [MPa]) and
/// (from, to, design flow [multiples of one 1600 MJ/s withdrawal]).
pub fn forty_node_design() -> (Vec<(&'static str, f64)>, Vec<(&'static str, &'static str, f64)>) {
    let pressures = vec![
        ("1", 5.20),
        ("2", 4.90),
        ("3", 5.50),
        ("4", 5.60),
        ("5", 4.70),
        ("6", 4.80),
        ("7", 4.20),
        ("8", 5.30),
        ("9", 3.40),
        ("10", 5.30),
        ("11", 4.35),
        ("12", 3.05),
        ("13", 3.90),
        ("14", 3.55),
        ("15", 4.60),
        ("16", 5.48),
        ("17", 3.55),
        ("18", 3.80),
        ("19", 4.00),
        ("20", 4.30),
        ("21", 4.20),
        ("22", 3.40),
        ("23", 3.55),
        ("24", 4.20),
        ("25", 3.30),
        ("26", 4.60),
        ("27", 4.05),
        ("28", 4.25),
        ("29", 3.75),
        ("30", 3.60),
        ("31", 5.50),
        ("32", 4.35),
        ("33", 5.20),
        ("34", 4.70),
        ("35", 3.75),
        ("36", 4.30),
        ("37", 3.30),
        ("38", 5.00),
        ("39", 5.00),
        ("40", 5.00),
    ];
    // hydrogen-bearing regions are trees hanging off the injection nodes,
    // loops close only inside the near-source gas-only mesh, and saturated
    // leaf pockets are fed from single junctions; no pipe carries leaner
    // gas into a richer junction and no cycle straddles regions of
    // different congestion rent
    let flows = vec![
        ("31", "8", 2.0),
        ("8", "5", 1.0),
        ("26", "32", 3.0),
        ("4", "10", 6.0),
        ("10", "6", 6.0),
        ("6", "26", 3.0),
        ("6", "7", 2.0),
        ("7", "9", 1.0),
        ("3", "33", 4.5),
        ("33", "34", 2.5),
        ("3", "34", 2.5),
        ("33", "36", 1.0),
        ("34", "21", 2.5),
        ("34", "36", 1.5),
        ("36", "28", 1.5),
        ("32", "35", 2.0),
        ("24", "25", 1.0),
        ("4", "15", 3.0),
        ("3", "15", 1.0),
        ("16", "17", 3.0),
        ("17", "37", 2.0),
        ("37", "12", 1.0),
        ("13", "14", 1.0),
        ("5", "11", 2.0),
        ("4", "11", 1.0),
        ("11", "13", 2.0),
        ("31", "1", 2.0),
        ("1", "2", 1.0),
        ("31", "2", 1.5),
        ("2", "5", 1.5),
        ("4", "5", 2.5),
        ("5", "20", 3.0),
        ("20", "19", 2.0),
        ("19", "18", 1.0),
        ("28", "27", 3.0),
        ("27", "29", 3.0),
        ("29", "23", 1.0),
        ("29", "30", 1.0),
        ("30", "22", 1.0),
    ];
    (pressures, flows)
}

const FORTY_COMPRESSORS: [(&str, &str); 6] = [
    ("38", "31"),
    ("39", "4"),
    ("40", "3"),
    ("15", "16"),
    ("21", "28"),
    ("35", "24"),
];

/// Design throughput of each compressor station, in withdrawal units.
pub const FORTY_COMPRESSOR_FLOWS: [(&str, &str, f64); 6] = [
    ("38", "31", 5.5),
    ("39", "4", 12.5),
    ("40", "3", 8.0),
    ("15", "16", 4.0),
    ("21", "28", 2.5),
    ("35", "24", 2.0),
];

/// Sink nodes of the 40-node system (29, as in the GasLib-40 instance).
pub const FORTY_SINKS: [&str; 29] = [
    "1", "2", "6", "7", "8", "9", "10", "11", "12", "13", "14", "16", "17", "18", "19", "20",
    "22", "23", "24", "25", "27", "28", "29", "30", "32", "33", "34", "36", "37",
];

/// Hydrogen injection nodes of the baseline market.
pub const FORTY_H2_SITES: [&str; 3] = ["10", "27", "30"];
/// Natural-gas source nodes; "38" is the slack node at 5 MPa.
pub const FORTY_SOURCES: [&str; 3] = ["38", "39", "40"];

fn forty_node_net_with(gnodes: Vec<GNode>) -> Network<f64> {
    let (pressures, flows) = forty_node_design();
    let p: std::collections::HashMap<&str, f64> = pressures.iter().copied().collect();
    let draw = 1600.0 / 44.2;
    let mut b = NetworkBuilder::new();
    b.nodes = pressures
        .iter()
        .map(|&(id, _)| node(id, if id == "38" { Some(5.0) } else { None }))
        .collect();
    b.pipes = flows
        .iter()
        .map(|&(from, to, units)| design_pipe(from, to, p[from], p[to], units * draw))
        .collect();
    b.compressors = FORTY_COMPRESSORS
        .iter()
        .map(|&(f, t)| compressor(f, t))
        .collect();
    b.gnodes = gnodes;
    b.build().expect("bundled 40-node network is valid")
}

/// Baseline 40-node market: NG injected at the three sources, hydrogen at
/// nodes 10/27/30, withdrawals at the remaining 26 sinks.
pub fn forty_node_network() -> Network<f64> {
    let mut gnodes = Vec::new();
    for s in FORTY_SOURCES {
        gnodes.push(GNode {
            id: format!("S-NG-{s}"),
            node: s.to_string(),
            kind: GNodeKind::NgSupplier,
        });
    }
    for h in FORTY_H2_SITES {
        gnodes.push(GNode {
            id: format!("S-H2-{h}"),
            node: h.to_string(),
            kind: GNodeKind::H2Supplier,
        });
    }
    for s in FORTY_SINKS {
        if FORTY_H2_SITES.contains(&s) {
            continue;
        }
        gnodes.push(GNode {
            id: format!("D{s}"),
            node: s.to_string(),
            kind: GNodeKind::FlexibleConsumer,
        });
    }
    forty_node_net_with(gnodes)
}

/// Low-bid stress variant: every source hosts an H₂ supplier and a
/// two-tier natural gas offer stack (a capped cheap tier plus an
/// uncapped expensive tier), and all 29 sinks withdraw.
pub fn forty_node_counter_network() -> Network<f64> {
    let mut gnodes = Vec::new();
    for s in FORTY_SOURCES {
        gnodes.push(GNode {
            id: format!("S-NG-{s}"),
            node: s.to_string(),
            kind: GNodeKind::NgSupplier,
        });
        gnodes.push(GNode {
            id: format!("S-NG2-{s}"),
            node: s.to_string(),
            kind: GNodeKind::NgSupplier,
        });
        gnodes.push(GNode {
            id: format!("S-H2-{s}"),
            node: s.to_string(),
            kind: GNodeKind::H2Supplier,
        });
    }
    for s in FORTY_SINKS {
        gnodes.push(GNode {
            id: format!("D{s}"),
            node: s.to_string(),
            kind: GNodeKind::FlexibleConsumer,
        });
    }
    forty_node_net_with(gnodes)
}

/// Quantity cap of each source's cheap NG tier in the stress variant
/// [kg/s].
pub const TIER_ONE_CAP: f64 = 240.0;
/// Offer price of the expensive NG tier [$/kg]; its blended energy cost
/// sits between the halved bid plus the low and high decarbonization
/// premiums, which is what makes the incentive level decide whether the
/// low bidders are served.
pub const TIER_TWO_OFFER: f64 = 0.52;

/// Nodes whose bids drop to [`LOW_BID`] in the low-bid scenarios.
pub const HALVED_BID_NODES: [&str; 4] = ["12", "16", "17", "37"];
/// Reduced bid of the four low-demand offtakers [$/MJ].
pub const LOW_BID: f64 = 0.0085;

/// Scenario for either 40-node variant: unlimited offers, 1600 MJ/s bids
/// at 0.019 $/MJ (optionally halved at [`HALVED_BID_NODES`]), uniform CO₂
/// incentive.
pub fn forty_node_scenario(
    net: &Network<f64>,
    co2_incentive: f64,
    halve_four_bids: bool,
) -> MarketScenario<f64> {
    let tiered = net.gnodes().iter().any(|g| g.id.starts_with("S-NG2"));
    let participants = net
        .gnodes()
        .iter()
        .map(|g| match g.kind {
            GNodeKind::NgSupplier if g.id.starts_with("S-NG2") => Participant::NgSupplier {
                offer_price: TIER_TWO_OFFER,
                max_supply: None,
            },
            GNodeKind::NgSupplier => Participant::NgSupplier {
                offer_price: DEFAULT_NG_OFFER,
                max_supply: if tiered { Some(TIER_ONE_CAP) } else { None },
            },
            GNodeKind::H2Supplier => Participant::H2Supplier {
                offer_price: DEFAULT_H2_OFFER,
                max_supply: None,
            },
            GNodeKind::FlexibleConsumer => {
                let halved = halve_four_bids && HALVED_BID_NODES.contains(&g.node.as_str());
                Participant::FlexibleConsumer {
                    bid_price: if halved { LOW_BID } else { DEFAULT_BID },
                    max_energy: 1600.0,
                }
            }
            GNodeKind::FixedConsumer => unreachable!("no fixed consumers bundled"),
        })
        .collect();
    MarketScenario {
        participants,
        co2_incentive: vec![co2_incentive; net.gnodes().len()],
        compressor_cost_rate: DEFAULT_COST_RATE,
        constants: GasConstants::default(),
        side_draws: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::validate_network;

    #[test]
    fn eight_node_is_valid_and_sized_like_the_reference() {
        let net = eight_node_network();
        assert_eq!(net.n_nodes(), 8);
        assert_eq!(net.n_pipes(), 5);
        assert_eq!(net.n_compressors(), 3);
        assert_eq!(net.gnodes().len(), 5);
        assert_eq!(net.slack_nodes().len(), 1);
    }

    #[test]
    fn forty_node_matches_gaslib_counts() {
        let net = forty_node_network();
        assert_eq!(net.n_nodes(), 40);
        assert_eq!(net.n_pipes(), 39);
        assert_eq!(net.n_compressors(), 6);
        // 3 NG + 3 H2 suppliers + 26 withdrawals
        assert_eq!(net.gnodes().len(), 32);
        let counter = forty_node_counter_network();
        assert_eq!(counter.gnodes().len(), 38);
    }

    #[test]
    fn design_tables_are_mass_balanced() {
        let (_, flows) = forty_node_design();
        let mut balance: std::collections::HashMap<&str, f64> = Default::default();
        for &(from, to, q) in &flows {
            *balance.entry(from).or_default() -= q;
            *balance.entry(to).or_default() += q;
        }
        for &(from, to, q) in &FORTY_COMPRESSOR_FLOWS {
            *balance.entry(from).or_default() -= q;
            *balance.entry(to).or_default() += q;
        }
        for (id, _) in forty_node_design().0 {
            let b = balance.get(id).copied().unwrap_or(0.0);
            let want = if FORTY_SOURCES.contains(&id) {
                continue; // sources cover the global total, checked below
            } else if FORTY_SINKS.contains(&id) && !FORTY_H2_SITES.contains(&id) {
                1.0
            } else {
                0.0
            };
            assert!(
                (b - want).abs() < 1e-9,
                "node {id}: design inflow {b}, want {want}"
            );
        }
        let injected: f64 = FORTY_SOURCES
            .iter()
            .map(|s| -balance.get(*s).copied().unwrap_or(0.0))
            .sum();
        assert!((injected - 26.0).abs() < 1e-9, "total injection {injected}");
    }

    #[test]
    fn bundled_networks_pass_validation() {
        for net in [eight_node_network(), forty_node_network(), forty_node_counter_network()] {
            let parts = NetworkBuilder {
                nodes: net.nodes().to_vec(),
                pipes: net.pipes().to_vec(),
                compressors: net.compressors().to_vec(),
                gnodes: net.gnodes().to_vec(),
            };
            let report = validate_network(&parts);
            assert!(report.is_valid(), "{report}");
        }
    }
}
