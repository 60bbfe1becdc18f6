//! Virtual smart meter: replays a simulated (or recorded) household on a
//! possibly accelerated clock and answers Modbus TCP reads as the slave.

mod clock;
mod server;
mod state;

pub use clock::MeterClock;
pub use server::{MeterConfig, MeterError, MeterServer, MeterSummary, DEFAULT_PORT};
pub use state::{MeterSource, MeterState, Reading};
