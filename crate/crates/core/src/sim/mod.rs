//! Deterministic household simulator.
//!
//! A [`Scenario`] declares appliances, a timed action script, noise and
//! duration. [`simulate`] replays it on an integer-millisecond clock and
//! returns the aggregate signal together with the [`GroundTruth`] that the
//! detectors are scored against.

mod engine;
pub mod export;
mod scenario;
mod thermostat;

pub use engine::{simulate, ApplianceTrace, GroundTruth, Simulation, TruthEvent};
pub use scenario::{
    ActionVerb, ApplianceModel, LoadKind, Scenario, ScenarioAction, ScenarioError, ThermostatParams,
};
pub use thermostat::{step_thermostat, ThermostatState};
