//! Shows how an open fridge door stretches the compressor's ON phase.
//!
//! Runs the fault scenario and a copy with the door actions removed, then
//! lists the duty cycles of both from the simulator's own event log.

use nilmlab::sim::{simulate, ActionVerb, Scenario};
use nilmlab::watchdog::build_cycles;

const SCENARIO: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/fig2.json");

fn print_cycles(title: &str, scenario: &Scenario) -> Result<(), Box<dyn std::error::Error>> {
    let sim = simulate(scenario)?;
    println!("{title}");
    println!("  {:>8} {:>8} {:>8}", "start s", "on s", "off s");
    for c in build_cycles(&sim.truth.events, "fridge") {
        let off = c
            .following_off_s
            .map_or("-".to_string(), |s| format!("{s:.0}"));
        let note = if c.in_progress { " (running)" } else { "" };
        println!(
            "  {:>8.0} {:>8.0} {:>8}{note}",
            c.on_start_ms as f64 / 1000.0,
            c.on_duration_s,
            off
        );
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let faulty = Scenario::load(SCENARIO)?;
    for a in &faulty.actions {
        println!("scripted: {} {} at {} s", a.appliance, a.verb, a.t_offset_s);
    }
    print_cycles("\ndoor left open", &faulty)?;

    let mut closed = faulty.clone();
    closed
        .actions
        .retain(|a| !matches!(a.verb, ActionVerb::DoorOpen | ActionVerb::DoorClose));
    print_cycles("\ndoor closed", &closed)?;
    Ok(())
}
