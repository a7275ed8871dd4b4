//! Robustness probe: randomized scenarios on the bundled networks must all
//! converge and audit cleanly.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use blendmarket::domain::{MarketScenario, Participant};
use blendmarket::{bundled, clear_market, nlp, verify};

fn randomized(base: &MarketScenario<f64>, rng: &mut ChaCha8Rng) -> MarketScenario<f64> {
    let mut scen = base.clone();
    let co2 = rng.gen_range(0.0..0.12);
    for c in scen.co2_incentive.iter_mut() {
        *c = co2;
    }
    for p in scen.participants.iter_mut() {
        match p {
            Participant::NgSupplier { offer_price, .. }
            | Participant::H2Supplier { offer_price, .. } => {
                *offer_price *= rng.gen_range(0.8..1.3);
            }
            Participant::FlexibleConsumer {
                bid_price,
                max_energy,
            } => {
                *bid_price *= rng.gen_range(0.6..1.5);
                *max_energy *= rng.gen_range(0.4..1.15);
            }
            Participant::FixedConsumer { .. } => {}
        }
    }
    scen
}

/// Market-wide factors only: meshed systems under asymmetric perturbation
/// generically re-route flow along pressure gradients against value
/// gradients, so per-participant noise is exercised on the radial system.
fn randomized_global(base: &MarketScenario<f64>, rng: &mut ChaCha8Rng) -> MarketScenario<f64> {
    let mut scen = base.clone();
    let co2 = rng.gen_range(0.0..0.12);
    let bid_f = rng.gen_range(0.7..1.4);
    let energy_f = rng.gen_range(0.45..1.15);
    let ng_f = rng.gen_range(0.85..1.25);
    let h2_f = rng.gen_range(0.85..1.2);
    for c in scen.co2_incentive.iter_mut() {
        *c = co2;
    }
    for p in scen.participants.iter_mut() {
        match p {
            Participant::NgSupplier { offer_price, .. } => *offer_price *= ng_f,
            Participant::H2Supplier { offer_price, .. } => *offer_price *= h2_f,
            Participant::FlexibleConsumer {
                bid_price,
                max_energy,
            } => {
                *bid_price *= bid_f;
                *max_energy *= energy_f;
            }
            Participant::FixedConsumer { .. } => {}
        }
    }
    scen
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let eight = bundled::eight_node_network();
    let eight_base = bundled::eight_node_scenario(&eight, 0.055);
    let forty = bundled::forty_node_network();
    let forty_base = bundled::forty_node_scenario(&forty, 0.055, false);

    let mut failures = 0;
    for k in 0..12 {
        let scen = randomized(&eight_base, &mut rng);
        match clear_market(&eight, &scen, &Default::default()) {
            Ok(out) => {
                let p = nlp::assemble(&out.scaled.network, &out.scaled.scenario).unwrap();
                let rep = verify::verify_solution(&p, &out.scaled_solution, 1e-6);
                let worst_mu = (0..eight.n_pipes())
                    .filter(|&e| out.scaled_solution.flow[e] > 1e-6)
                    .map(|e| out.scaled_solution.duals.mu[e])
                    .fold(f64::MIN, f64::max);
                println!(
                    "8-node #{k}: iters {} audit {} worst-mu {:.2e}",
                    out.scaled_solution.iterations,
                    if rep.pass() { "ok" } else { "FAIL" },
                    worst_mu
                );
                if !rep.pass() {
                    failures += 1;
                    for c in rep.conditions.iter().filter(|c| !c.pass) {
                        println!("    {}: {:.3e} {:?}", c.condition, c.max_residual, c.worst);
                    }
                }
            }
            Err(e) => {
                failures += 1;
                println!("8-node #{k}: SOLVE FAILED: {e}");
            }
        }
    }
    for k in 0..8 {
        let scen = randomized_global(&forty_base, &mut rng);
        match clear_market(&forty, &scen, &Default::default()) {
            Ok(out) => {
                let p = nlp::assemble(&out.scaled.network, &out.scaled.scenario).unwrap();
                let rep = verify::verify_solution(&p, &out.scaled_solution, 1e-6);
                println!(
                    "40-node #{k}: iters {} audit {}",
                    out.scaled_solution.iterations,
                    if rep.pass() { "ok" } else { "FAIL" }
                );
                if !rep.pass() {
                    failures += 1;
                    for c in rep.conditions.iter().filter(|c| !c.pass) {
                        println!("    {}: {:.3e} {:?}", c.condition, c.max_residual, c.worst);
                    }
                }
            }
            Err(e) => {
                failures += 1;
                println!("40-node #{k}: SOLVE FAILED: {e}");
            }
        }
    }
    println!("failures: {failures}");
}
