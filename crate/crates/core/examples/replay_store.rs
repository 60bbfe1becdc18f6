//! Writes a simulated run into a sample store, queries a time range from it,
//! and re-serves the recording over Modbus for a short poll.

use nilmlab::acquisition::{
    poll_loop, read_series, PollConfig, StoreEntry, StoreMeta, StoreWriter, StoredSeries,
};
use nilmlab::meter::{MeterClock, MeterConfig, MeterServer, MeterSource, Reading};
use nilmlab::sim::{simulate, Scenario};
use nilmlab::PowerSample;
use std::net::SocketAddr;
use tokio_util::sync::CancellationToken;

const SCENARIO: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/table1.json");

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let scenario = Scenario::load(SCENARIO)?;
    let sim = simulate(&scenario)?;

    // Record the run, with a pretend outage between 600 s and 620 s.
    let recorded = dir.path().join("recorded.csv");
    let mut writer = StoreWriter::create(
        &recorded,
        &StoreMeta::new().with("scenario", &scenario.name),
    )?;
    let mut energy_wh = 0.0;
    for (k, (&t, &w)) in sim
        .aggregate
        .t_ms
        .iter()
        .zip(&sim.aggregate.watts)
        .enumerate()
    {
        if (600_000..620_000).contains(&t) {
            if t == 600_000 {
                writer.append_gap(600_000, 620_000)?;
            }
            continue;
        }
        if k > 0 {
            energy_wh += (w + sim.aggregate.watts[k - 1]) / 2.0 / 3600.0;
        }
        let r = Reading::from_active(t, w, scenario.power_factor, scenario.voltage_v);
        writer.append_sample(&PowerSample {
            t_ms: t,
            active_w: r.active_w,
            reactive_var: r.reactive_var,
            voltage_v: r.voltage_v,
            current_a: r.current_a,
            energy_wh,
        })?;
    }
    println!(
        "stored {} samples and {} gap(s)",
        writer.samples_written(),
        writer.gaps_written()
    );
    drop(writer);

    for entry in read_series(&recorded, 595_000, 625_000)? {
        match entry {
            StoreEntry::Sample(s) => println!("  {:>4} s  {:>7.1} W", s.t_ms / 1000, s.active_w),
            StoreEntry::Gap { start_ms, end_ms } => {
                println!("  gap {} s .. {} s", start_ms / 1000, end_ms / 1000)
            }
        }
    }

    // Serve the recording again and log 20 simulated seconds of it.
    let stored = StoredSeries::open(&recorded)?;
    let server = MeterServer::bind(
        MeterSource::from_store("recorded", &stored.entries),
        MeterClock::new(20.0).starting_at(470_000),
        MeterConfig::new(SocketAddr::from(([127, 0, 0, 1], 0))),
    )
    .await?;
    let mut config = PollConfig::new(server.local_addr()?);
    config.until_ms = Some(490_000);
    let shutdown = CancellationToken::new();
    let meter = tokio::spawn(server.run(shutdown.clone()));

    let replayed = dir.path().join("replayed.csv");
    let mut writer = StoreWriter::create(&replayed, &StoreMeta::new().with("source", "replay"))?;
    let summary = poll_loop(&config, &mut writer, CancellationToken::new()).await?;
    drop(writer);
    shutdown.cancel();
    meter.await??;

    println!(
        "\nreplayed {} samples, {} gap(s):",
        summary.samples,
        summary.gaps.len()
    );
    for s in StoredSeries::open(&replayed)?.samples() {
        println!("  {:>4} s  {:>7.1} W", s.t_ms / 1000, s.active_w);
    }
    Ok(())
}
