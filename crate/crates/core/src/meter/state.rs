use crate::acquisition::StoreEntry;
use crate::series::{Millis, PowerSample};
use crate::sim::{Scenario, Simulation};
use std::sync::Arc;

/// Instantaneous electrical quantities at one sample instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reading {
    pub t_ms: Millis,
    pub active_w: f64,
    pub reactive_var: f64,
    pub voltage_v: f64,
    pub current_a: f64,
}

impl Reading {
    /// Synthesizes reactive power and current from active power with a fixed
    /// power factor at constant voltage.
    pub fn from_active(t_ms: Millis, active_w: f64, power_factor: f64, voltage_v: f64) -> Self {
        let reactive_var = active_w * power_factor.acos().tan();
        let apparent = (active_w * active_w + reactive_var * reactive_var).sqrt();
        Self {
            t_ms,
            active_w,
            reactive_var,
            voltage_v,
            current_a: apparent / voltage_v,
        }
    }
}

/// What the meter plays back: readings on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterSource {
    pub name: String,
    pub period_ms: Millis,
    pub readings: Vec<Reading>,
}

impl MeterSource {
    pub fn from_simulation(scenario: &Scenario, sim: &Simulation) -> Self {
        let readings = sim
            .aggregate
            .t_ms
            .iter()
            .zip(&sim.aggregate.watts)
            .map(|(&t, &w)| Reading::from_active(t, w, scenario.power_factor, scenario.voltage_v))
            .collect();
        Self {
            name: scenario.name.clone(),
            period_ms: (1000.0 / scenario.sample_rate_hz).round() as Millis,
            readings,
        }
    }

    /// Builds a source from a recorded store; gaps hold the previous reading.
    pub fn from_store(name: impl Into<String>, entries: &[StoreEntry]) -> Self {
        let readings: Vec<Reading> = entries
            .iter()
            .filter_map(|e| match e {
                StoreEntry::Sample(s) => Some(Reading {
                    t_ms: s.t_ms,
                    active_w: s.active_w,
                    reactive_var: s.reactive_var,
                    voltage_v: s.voltage_v,
                    current_a: s.current_a,
                }),
                StoreEntry::Gap { .. } => None,
            })
            .collect();
        let mut diffs: Vec<Millis> = readings.windows(2).map(|w| w[1].t_ms - w[0].t_ms).collect();
        diffs.sort_unstable();
        let period_ms = diffs.get(diffs.len() / 2).copied().unwrap_or(1000);
        Self {
            name: name.into(),
            period_ms,
            readings,
        }
    }

    /// Simulated instant one period after the last reading.
    pub fn end_ms(&self) -> Millis {
        self.readings.last().map_or(0, |r| r.t_ms + self.period_ms)
    }
}

/// Meter register state: the latest reading plus the energy register.
///
/// Energy is the trapezoidal integral of active power over consecutive
/// readings, accumulated in watt-milliseconds so whole-watt loads integrate
/// exactly.
#[derive(Debug, Clone)]
pub struct MeterState {
    source: Arc<MeterSource>,
    cursor: usize,
    energy_wms: f64,
    now_ms: Millis,
}

impl MeterState {
    pub fn new(source: Arc<MeterSource>) -> Self {
        assert!(!source.readings.is_empty(), "meter source has no readings");
        let now_ms = source.readings[0].t_ms;
        Self {
            source,
            cursor: 0,
            energy_wms: 0.0,
            now_ms,
        }
    }

    pub fn source(&self) -> &MeterSource {
        &self.source
    }

    pub fn now_ms(&self) -> Millis {
        self.now_ms
    }

    pub fn at_end(&self) -> bool {
        self.cursor + 1 == self.source.readings.len()
    }

    /// Moves the state forward to simulated instant `to_ms`, applying every
    /// reading in the elapsed window. Going backwards is a no-op.
    pub fn advance(&mut self, to_ms: Millis) {
        if to_ms <= self.now_ms {
            return;
        }
        let readings = &self.source.readings;
        while let Some(next) = readings.get(self.cursor + 1) {
            if next.t_ms > to_ms {
                break;
            }
            let prev = &readings[self.cursor];
            self.energy_wms +=
                (prev.active_w + next.active_w) / 2.0 * (next.t_ms - prev.t_ms) as f64;
            self.cursor += 1;
        }
        self.now_ms = to_ms;
    }

    pub fn energy_wh(&self) -> f64 {
        self.energy_wms / 3.6e6
    }

    /// All fields come from the same reading.
    pub fn snapshot(&self) -> PowerSample {
        let r = &self.source.readings[self.cursor];
        PowerSample {
            t_ms: r.t_ms,
            active_w: r.active_w,
            reactive_var: r.reactive_var,
            voltage_v: r.voltage_v,
            current_a: r.current_a,
            energy_wh: self.energy_wh(),
        }
    }
}
