//! Streams the fault scenario sample by sample through the online detector
//! and watchdog, raising an alert while the compressor is still running.

use nilmlab::disagg::{Detector, Signature, SignatureTable, StreamingDetector};
use nilmlab::sim::{simulate, Scenario};
use nilmlab::watchdog::{Anomaly, AnomalySink, Watchdog, DEFAULT_FACTOR, DEFAULT_MIN_BASELINE};

const SCENARIO: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/fig2.json");

/// Stands in for a pager or home-automation hook.
struct Console;

impl AnomalySink for Console {
    fn deliver(&mut self, a: &Anomaly) {
        println!(
            "ALERT {} {:?}: {:.0} s against a {:.0} s baseline (x{:.2}), since {:.0} s",
            a.label,
            a.kind,
            a.observed_s,
            a.baseline_s,
            a.ratio,
            a.t_start_ms as f64 / 1000.0
        );
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::load(SCENARIO)?;
    let sim = simulate(&scenario)?;
    let signatures = SignatureTable::new(vec![Signature::new("fridge", 120.0).with_spike()])?;
    let mut detector = StreamingDetector::new(Detector::new(signatures));
    let mut watchdog = Watchdog::new("fridge", DEFAULT_MIN_BASELINE, DEFAULT_FACTOR);
    let mut sink = Console;

    for (&t, &w) in sim.aggregate.t_ms.iter().zip(&sim.aggregate.watts) {
        for event in detector.push(t, w) {
            println!(
                "{:>6.0} s  {} {}",
                event.t_ms as f64 / 1000.0,
                event.label,
                event.verb
            );
            watchdog.observe(&event, &mut sink);
        }
        watchdog.tick(t, &mut sink);
    }
    Ok(())
}
