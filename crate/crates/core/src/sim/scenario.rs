use crate::series::Millis;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("action #{index} at t={t_offset_s}s references unknown appliance `{appliance}`")]
    UnknownAppliance {
        index: usize,
        t_offset_s: f64,
        appliance: String,
    },
    #[error("action #{index} at t={t_offset_s}s is earlier than the action before it")]
    UnsortedActions { index: usize, t_offset_s: f64 },
    #[error("action #{index} at t={t_offset_s}s has a negative or non-finite time offset")]
    BadActionTime { index: usize, t_offset_s: f64 },
    #[error("action #{index} at t={t_offset_s}s: {verb} is only valid for spiky_cycler appliances, `{appliance}` is not one")]
    DoorOnNonCycler {
        index: usize,
        t_offset_s: f64,
        appliance: String,
        verb: ActionVerb,
    },
    #[error("appliance `{id}`: {reason}")]
    InvalidAppliance { id: String, reason: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Thermostat parameters of a cycling appliance such as a fridge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermostatParams {
    pub temp_low_c: f64,
    pub temp_high_c: f64,
    /// Cooling rate while the compressor runs, °C/s.
    pub cool_rate_c_per_s: f64,
    /// Warming rate while the compressor is idle, °C/s.
    pub warm_rate_c_per_s: f64,
    /// Open door multiplies warming and divides cooling by this factor.
    #[serde(default = "one")]
    pub door_open_warm_multiplier: f64,
    /// Cabinet temperature at scenario start; defaults to `temp_low_c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_temp_c: Option<f64>,
    #[serde(default)]
    pub initially_on: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoadKind {
    /// Fixed draw while ON.
    ConstantLoad,
    /// Thermostat-driven compressor with an inrush spike at each start.
    SpikyCycler {
        spike_peak_w: f64,
        spike_duration_s: f64,
        thermostat: ThermostatParams,
    },
    /// Clamped random walk around the steady draw.
    FluctuatingLoad { fluctuation_sigma_w: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplianceModel {
    pub id: String,
    pub steady_power_w: f64,
    #[serde(flatten)]
    pub kind: LoadKind,
}

impl ApplianceModel {
    pub fn constant(id: impl Into<String>, watts: f64) -> Self {
        Self {
            id: id.into(),
            steady_power_w: watts,
            kind: LoadKind::ConstantLoad,
        }
    }

    pub fn is_cycler(&self) -> bool {
        matches!(self.kind, LoadKind::SpikyCycler { .. })
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |reason: &str| {
            Err(ScenarioError::InvalidAppliance {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.id.is_empty() {
            return bad("empty id");
        }
        if !(self.steady_power_w.is_finite() && self.steady_power_w > 0.0) {
            return bad("steady_power_w must be > 0");
        }
        match &self.kind {
            LoadKind::ConstantLoad => {}
            LoadKind::FluctuatingLoad {
                fluctuation_sigma_w,
            } => {
                if !(fluctuation_sigma_w.is_finite() && *fluctuation_sigma_w >= 0.0) {
                    return bad("fluctuation_sigma_w must be >= 0");
                }
            }
            LoadKind::SpikyCycler {
                spike_peak_w,
                spike_duration_s,
                thermostat: th,
            } => {
                if !(spike_peak_w.is_finite() && *spike_peak_w >= self.steady_power_w) {
                    return bad("spike_peak_w must be >= steady_power_w");
                }
                if !(spike_duration_s.is_finite() && *spike_duration_s >= 0.0) {
                    return bad("spike_duration_s must be >= 0");
                }
                if !(th.temp_low_c.is_finite()
                    && th.temp_high_c.is_finite()
                    && th.temp_low_c < th.temp_high_c)
                {
                    return bad("thermostat needs temp_low_c < temp_high_c");
                }
                if !(th.cool_rate_c_per_s.is_finite() && th.cool_rate_c_per_s > 0.0) {
                    return bad("cool_rate_c_per_s must be > 0");
                }
                if !(th.warm_rate_c_per_s.is_finite() && th.warm_rate_c_per_s > 0.0) {
                    return bad("warm_rate_c_per_s must be > 0");
                }
                if !(th.door_open_warm_multiplier.is_finite()
                    && th.door_open_warm_multiplier >= 1.0)
                {
                    return bad("door_open_warm_multiplier must be >= 1");
                }
                if let Some(t) = th.initial_temp_c {
                    if !t.is_finite() {
                        return bad("initial_temp_c must be finite");
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionVerb {
    #[serde(rename = "ON")]
    On,
    #[serde(rename = "OFF")]
    Off,
    #[serde(rename = "DOOR_OPEN")]
    DoorOpen,
    #[serde(rename = "DOOR_CLOSE")]
    DoorClose,
}

impl std::fmt::Display for ActionVerb {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ActionVerb::On => "ON",
            ActionVerb::Off => "OFF",
            ActionVerb::DoorOpen => "DOOR_OPEN",
            ActionVerb::DoorClose => "DOOR_CLOSE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioAction {
    pub t_offset_s: f64,
    pub appliance: String,
    pub verb: ActionVerb,
}

impl ScenarioAction {
    pub fn new(t_offset_s: f64, appliance: impl Into<String>, verb: ActionVerb) -> Self {
        Self {
            t_offset_s,
            appliance: appliance.into(),
            verb,
        }
    }

    pub fn t_offset_ms(&self) -> Millis {
        (self.t_offset_s * 1000.0).round() as Millis
    }
}

fn default_power_factor() -> f64 {
    0.95
}

fn default_voltage() -> f64 {
    230.0
}

/// Declarative household run. Field names match the JSON scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub appliances: Vec<ApplianceModel>,
    #[serde(default)]
    pub actions: Vec<ScenarioAction>,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub baseline_w: f64,
    #[serde(default)]
    pub noise_sigma_w: f64,
    #[serde(default)]
    pub seed: u64,
    /// Fixed power factor used to synthesize reactive power.
    #[serde(default = "default_power_factor")]
    pub power_factor: f64,
    #[serde(default = "default_voltage")]
    pub voltage_v: f64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut scenario = Self::from_json(&text)?;
        if scenario.name.is_empty() {
            if let Some(stem) = path.file_stem() {
                scenario.name = stem.to_string_lossy().into_owned();
            }
        }
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn appliance(&self, id: &str) -> Option<&ApplianceModel> {
        self.appliances.iter().find(|a| a.id == id)
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    /// Timestamp of sample `k`; rounding keeps non-integer periods from drifting.
    pub fn sample_time_ms(&self, k: usize) -> Millis {
        (k as f64 * 1000.0 / self.sample_rate_hz).round() as Millis
    }

    pub fn duration_ms(&self) -> Millis {
        (self.duration_s * 1000.0).round() as Millis
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(ScenarioError::Invalid("duration_s must be > 0".into()));
        }
        if !(self.sample_rate_hz.is_finite()
            && self.sample_rate_hz > 0.0
            && self.sample_rate_hz <= 1000.0)
        {
            return Err(ScenarioError::Invalid(
                "sample_rate_hz must be in (0, 1000]".into(),
            ));
        }
        if self.sample_count() == 0 {
            return Err(ScenarioError::Invalid(
                "duration shorter than one sample period".into(),
            ));
        }
        if !(self.baseline_w.is_finite() && self.baseline_w >= 0.0) {
            return Err(ScenarioError::Invalid("baseline_w must be >= 0".into()));
        }
        if !(self.noise_sigma_w.is_finite() && self.noise_sigma_w >= 0.0) {
            return Err(ScenarioError::Invalid("noise_sigma_w must be >= 0".into()));
        }
        if !(self.power_factor > 0.0 && self.power_factor <= 1.0) {
            return Err(ScenarioError::Invalid(
                "power_factor must be in (0, 1]".into(),
            ));
        }
        if !(self.voltage_v.is_finite() && self.voltage_v > 0.0) {
            return Err(ScenarioError::Invalid("voltage_v must be > 0".into()));
        }
        let mut ids = HashSet::new();
        for a in &self.appliances {
            a.validate()?;
            if !ids.insert(a.id.as_str()) {
                return Err(ScenarioError::InvalidAppliance {
                    id: a.id.clone(),
                    reason: "duplicate id".into(),
                });
            }
        }
        let mut prev = f64::NEG_INFINITY;
        for (index, action) in self.actions.iter().enumerate() {
            let t_offset_s = action.t_offset_s;
            if !(t_offset_s.is_finite() && t_offset_s >= 0.0) {
                return Err(ScenarioError::BadActionTime { index, t_offset_s });
            }
            if t_offset_s < prev {
                return Err(ScenarioError::UnsortedActions { index, t_offset_s });
            }
            prev = t_offset_s;
            let Some(model) = self.appliance(&action.appliance) else {
                return Err(ScenarioError::UnknownAppliance {
                    index,
                    t_offset_s,
                    appliance: action.appliance.clone(),
                });
            };
            if matches!(action.verb, ActionVerb::DoorOpen | ActionVerb::DoorClose)
                && !model.is_cycler()
            {
                return Err(ScenarioError::DoorOnNonCycler {
                    index,
                    t_offset_s,
                    appliance: action.appliance.clone(),
                    verb: action.verb,
                });
            }
        }
        Ok(())
    }
}
