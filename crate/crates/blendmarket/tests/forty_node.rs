//! 40-node system behavior: baseline blending market, the low-bid stress
//! scenarios, and the counter-intuitive incentive response.

mod common;

use blendmarket::{bundled, clear_market, nlp, verify};

#[test]
fn baseline_solves_and_audits_cleanly() {
    let net = bundled::forty_node_network();
    let scen = bundled::forty_node_scenario(&net, 0.055, false);
    let outcome = clear_market(&net, &scen, &Default::default()).expect("optimal");
    let p = nlp::assemble(&outcome.scaled.network, &outcome.scaled.scenario).unwrap();
    let report = verify::verify_solution(&p, &outcome.scaled_solution, 1e-6);
    assert!(report.pass(), "{:#?}", report.conditions);

    // hydrogen reaches the cap at the injection sites
    let sol = &outcome.solution;
    for site in bundled::FORTY_H2_SITES {
        let j = net.node_index(site).unwrap();
        // node 30 sits below node 27's injection and is already at the cap
        assert!(
            sol.gamma_node[j] > 0.099,
            "gamma at {site}: {}",
            sol.gamma_node[j]
        );
    }
    assert!(outcome.report.total_h2_delivered > 10.0);
    assert!(outcome.report.credits_reconciled);
}

#[test]
fn counter_case_raising_incentive_raises_emissions() {
    let net = bundled::forty_node_counter_network();
    let low = bundled::forty_node_scenario(&net, 0.055, true);
    let high = bundled::forty_node_scenario(&net, 0.155, true);
    let out_low = clear_market(&net, &low, &Default::default()).expect("optimal low");
    let out_high = clear_market(&net, &high, &Default::default()).expect("optimal high");

    // the entire incentive increase passes through to consumers
    let d_cem = out_high.report.objective.emission_incentives
        - out_low.report.objective.emission_incentives;
    let d_ptc = out_high.report.d_ptc - out_low.report.d_ptc;
    assert!(
        (d_ptc - d_cem).abs() <= 1e-6 * d_cem.abs().max(1.0),
        "pass-through {d_ptc} vs incentives {d_cem}"
    );

    // and total gas burned strictly increases with the incentive
    assert!(
        out_high.report.total_ng_delivered > out_low.report.total_ng_delivered,
        "NG {} -> {}",
        out_low.report.total_ng_delivered,
        out_high.report.total_ng_delivered
    );
    assert!(
        out_high.report.total_co2 > out_low.report.total_co2,
        "CO2 {} -> {}",
        out_low.report.total_co2,
        out_high.report.total_co2
    );

    // both low-bid solves satisfy first-order optimality; the economic
    // sign conditions are allowed to fail here because the congested
    // stress case forces flow along pressure gradients against value
    // gradients, which is what produces the counter-intuitive outcome
    for out in [&out_low, &out_high] {
        let p = nlp::assemble(&out.scaled.network, &out.scaled.scenario).unwrap();
        let report = verify::verify_solution(&p, &out.scaled_solution, 1e-6);
        for cond in [
            verify::Condition::Stationarity,
            verify::Condition::PrimalFeasibility,
            verify::Condition::Complementarity,
            verify::Condition::MultiplierSigns,
            verify::Condition::CreditAdequacy,
        ] {
            let c = report.condition(cond).unwrap();
            assert!(c.pass, "{cond}: residual {}", c.max_residual);
        }
    }
}

#[test]
fn counter_case_full_bids_solves() {
    let net = bundled::forty_node_counter_network();
    let scen = bundled::forty_node_scenario(&net, 0.055, false);
    let outcome = clear_market(&net, &scen, &Default::default()).expect("optimal");
    let p = nlp::assemble(&outcome.scaled.network, &outcome.scaled.scenario).unwrap();
    let report = verify::verify_solution(&p, &outcome.scaled_solution, 1e-6);
    for cond in [
        verify::Condition::Stationarity,
        verify::Condition::PrimalFeasibility,
        verify::Condition::Complementarity,
        verify::Condition::MultiplierSigns,
        verify::Condition::CreditAdequacy,
    ] {
        let c = report.condition(cond).unwrap();
        assert!(c.pass, "{cond}: residual {}", c.max_residual);
    }
    // with hydrogen co-injected at the sources the whole system is blended
    let sol = &outcome.solution;
    let avg: f64 = sol.gamma_node.iter().sum::<f64>() / sol.gamma_node.len() as f64;
    assert!(avg > 0.08, "average blend fraction {avg}");
}
