//! Duty-cycle tracking and behavioral anomaly flags for periodic appliances.
//!
//! Cycles are built from ON/OFF events of one label, and each new cycle is
//! compared against the median of the most recent healthy ones. An ON period
//! that is still running is judged against the horizon it has reached, so a
//! fridge stuck cooling is flagged before the compressor ever stops.

mod anomaly;
mod cycles;
mod stream;

pub use anomaly::{
    detect_anomalies, median, Anomaly, AnomalyKind, WatchReport, WatchStatus, DEFAULT_FACTOR,
    DEFAULT_MIN_BASELINE,
};
pub use cycles::{build_cycles, build_cycles_until, CycleRecord};
pub use stream::{AnomalySink, Watchdog};
