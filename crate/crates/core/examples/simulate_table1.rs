//! Simulates the six-appliance household and prints its event log, the
//! energy each appliance used, and optionally writes the trace.
//!
//! ```text
//! cargo run --example simulate_table1 [-- OUT.csv]
//! ```

use nilmlab::series::integrate_wh;
use nilmlab::sim::export::write_trace;
use nilmlab::sim::{simulate, Scenario};

const SCENARIO: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/table1.json");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario::load(SCENARIO)?;
    let sim = simulate(&scenario)?;
    let series = &sim.aggregate;

    println!(
        "{}: {} samples over {} s",
        scenario.name,
        series.len(),
        scenario.duration_s
    );
    println!("{:>8}  {:<11} event", "t [s]", "appliance");
    for e in &sim.truth.events {
        println!(
            "{:>8.0}  {:<11} {}",
            e.t_ms as f64 / 1000.0,
            e.appliance,
            e.verb
        );
    }

    let hold = series.period_ms().unwrap_or(1000);
    println!("\nenergy [Wh]");
    for trace in &sim.truth.traces {
        println!(
            "  {:<11} {:>8.2}",
            trace.id,
            integrate_wh(&series.t_ms, &trace.watts, hold)
        );
    }
    println!("  {:<11} {:>8.2}", "aggregate", series.energy_wh());

    if let Some(out) = std::env::args().nth(1) {
        write_trace(
            std::io::BufWriter::new(std::fs::File::create(&out)?),
            &sim,
            true,
        )?;
        println!("\ntrace written to {out}");
    }
    Ok(())
}
