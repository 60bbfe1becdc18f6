//! Disaggregates a noisy household trace and scores the result against the
//! simulator's ground truth.
//!
//! ```text
//! cargo run --example disaggregate [-- NOISE_W [SEED]]
//! ```

use nilmlab::disagg::{Detector, SignatureTable};
use nilmlab::report::{ReportInputs, RunReport};
use nilmlab::sim::{simulate, Scenario};

const DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut scenario = Scenario::load(format!("{DIR}/table1.json"))?;
    scenario.noise_sigma_w = args.next().map(|a| a.parse()).transpose()?.unwrap_or(5.0);
    scenario.seed = args
        .next()
        .map(|a| a.parse())
        .transpose()?
        .unwrap_or(scenario.seed);
    let signatures = SignatureTable::load_csv(format!("{DIR}/signatures.csv"))?;
    for (a, b) in signatures.collisions() {
        println!("note: signature bands of {a} and {b} overlap");
    }

    let sim = simulate(&scenario)?;
    let detector = Detector::new(signatures.clone());
    let detection = detector.run(&sim.aggregate);
    println!(
        "noise {} W, seed {}: {} steady segments, {} edges",
        scenario.noise_sigma_w,
        scenario.seed,
        detection.segments.len(),
        detection.edges.len()
    );
    for e in detection.events() {
        println!(
            "{:>7.0} s  {:<10} {:<3} {:>+8.1} W  conf {:.2}",
            e.t_ms as f64 / 1000.0,
            e.label,
            e.verb,
            e.delta_w,
            e.confidence
        );
    }

    let report = RunReport::build(&ReportInputs {
        events: detection.events(),
        series: Some(&sim.aggregate),
        signatures: Some(&signatures),
        truth: Some(&sim.truth.events),
        tolerance_ms: detector.config.steady_window as i64 * 1000,
        anomalies: &[],
    });
    println!("\n{report}");
    Ok(())
}
