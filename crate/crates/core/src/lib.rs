//! Desk-scale non-intrusive load monitoring (NILM) lab.
//!
//! The crate wires together a small household simulator, a virtual smart
//! meter that answers Modbus TCP reads, a 1 Hz data logger with an
//! append-only sample store, an event-based disaggregator and a duty-cycle
//! watchdog for assisted-living style anomaly alerts.
//!
//! ```text
//!  sim ──► meter (Modbus TCP slave) ──► acquisition (master + store)
//!                                            │
//!                      report ◄── watchdog ◄─┴─► disagg
//! ```
//!
//! Every stage is usable on its own; the `examples/` directory has one
//! runnable program per capability and the `nilmlab` binary exposes the
//! pipeline as subcommands.

pub mod acquisition;
pub mod cli;
pub mod disagg;
pub mod io;
pub mod meter;
pub mod modbus;
pub mod report;
pub mod series;
pub mod sim;
pub mod watchdog;

pub use series::{Millis, PowerSample, PowerSeries, Switch, SwitchEvent};
