//! The whole lab in one process: virtual meter, logger, disaggregation,
//! duty-cycle watchdog and the final report.
//!
//! ```text
//! cargo run --example end_to_end [-- ACCEL]
//! ```
//!
//! The default 60x acceleration plays the 77-minute fault scenario in
//! about 77 seconds.

use nilmlab::acquisition::{poll_loop, PollConfig, StoreMeta, StoreWriter, StoredSeries};
use nilmlab::disagg::{Detector, Signature, SignatureTable};
use nilmlab::meter::{MeterClock, MeterConfig, MeterServer, MeterSource};
use nilmlab::report::{ReportInputs, RunReport};
use nilmlab::sim::{simulate, Scenario};
use nilmlab::watchdog::{build_cycles, detect_anomalies, DEFAULT_FACTOR, DEFAULT_MIN_BASELINE};
use std::net::SocketAddr;
use std::time::{Duration, Instant};
use tokio_util::sync::CancellationToken;

const SCENARIO: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/fig2.json");

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let accel: f64 = std::env::args()
        .nth(1)
        .map(|a| a.parse())
        .transpose()?
        .unwrap_or(60.0);
    let scenario = Scenario::load(SCENARIO)?;
    let sim = simulate(&scenario)?;
    let source = MeterSource::from_simulation(&scenario, &sim);
    let last_ms = source.readings.last().map_or(0, |r| r.t_ms);

    let mut meter_config = MeterConfig::new(SocketAddr::from(([127, 0, 0, 1], 0)));
    meter_config.exit_at_end = true;
    let server = MeterServer::bind(source, MeterClock::new(accel), meter_config).await?;
    let addr = server.local_addr()?;
    let meter = tokio::spawn(server.run(CancellationToken::new()));
    println!(
        "meter on {addr} at {accel}x, logging {} simulated s",
        last_ms / 1000 + 1
    );

    let dir = tempfile::tempdir()?;
    let store_path = dir.path().join("store.csv");
    let mut writer = StoreWriter::create(&store_path, &StoreMeta::new().with("meter", addr))?;
    let mut poll = PollConfig::new(addr);
    poll.until_ms = Some(last_ms);
    poll.give_up_after = Some(Duration::from_secs(2));
    let started = Instant::now();
    let summary = poll_loop(&poll, &mut writer, CancellationToken::new()).await?;
    drop(writer);
    meter.await??;
    println!(
        "logged {} samples, {} gap(s) in {:.1?}",
        summary.samples,
        summary.gaps.len(),
        started.elapsed()
    );

    let series = StoredSeries::open(&store_path)?.power_series();
    let signatures = SignatureTable::new(vec![Signature::new("fridge", 120.0).with_spike()])?;
    let detection = Detector::new(signatures.clone()).run(&series);
    let watch = detect_anomalies(
        &build_cycles(detection.events(), "fridge"),
        DEFAULT_MIN_BASELINE,
        DEFAULT_FACTOR,
    );

    let report = RunReport::build(&ReportInputs {
        events: detection.events(),
        series: Some(&series),
        signatures: Some(&signatures),
        truth: Some(&sim.truth.events),
        tolerance_ms: 3000,
        anomalies: &watch.anomalies,
    });
    println!("\n{report}");
    Ok(())
}
