use super::scenario::{ActionVerb, ApplianceModel, LoadKind, Scenario, ScenarioError};
use super::thermostat::{step_thermostat, ThermostatState};
use crate::series::{Millis, PowerSeries, Switch};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// One ground-truth ON/OFF transition. Serializes as a truth-log line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthEvent {
    pub t_ms: Millis,
    pub appliance: String,
    pub verb: Switch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApplianceTrace {
    pub id: String,
    pub watts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub events: Vec<TruthEvent>,
    /// Per-appliance power, in declaration order, aligned with the aggregate.
    pub traces: Vec<ApplianceTrace>,
}

impl GroundTruth {
    pub fn trace(&self, id: &str) -> Option<&[f64]> {
        self.traces
            .iter()
            .find(|t| t.id == id)
            .map(|t| t.watts.as_slice())
    }

    pub fn events_for<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a TruthEvent> + 'a {
        self.events.iter().filter(move |e| e.appliance == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub aggregate: PowerSeries,
    pub truth: GroundTruth,
}

enum Runtime {
    Constant {
        on: bool,
    },
    Fluctuating {
        on: bool,
        level: f64,
        step: Option<Normal<f64>>,
        rng: Box<ChaCha8Rng>,
    },
    Cycler {
        state: ThermostatState,
        door_open: bool,
    },
}

impl Runtime {
    fn new(model: &ApplianceModel, seed: u64) -> Self {
        match &model.kind {
            LoadKind::ConstantLoad => Runtime::Constant { on: false },
            LoadKind::FluctuatingLoad {
                fluctuation_sigma_w,
            } => Runtime::Fluctuating {
                on: false,
                level: model.steady_power_w,
                step: (*fluctuation_sigma_w > 0.0)
                    .then(|| Normal::new(0.0, fluctuation_sigma_w / 2.0).expect("finite sigma")),
                rng: Box::new(ChaCha8Rng::seed_from_u64(seed)),
            },
            LoadKind::SpikyCycler { thermostat, .. } => Runtime::Cycler {
                state: ThermostatState::initial(thermostat),
                door_open: false,
            },
        }
    }

    fn is_on(&self) -> bool {
        match self {
            Runtime::Constant { on } | Runtime::Fluctuating { on, .. } => *on,
            Runtime::Cycler { state, .. } => state.compressor_on,
        }
    }

    /// Evolves autonomous dynamics over `dt_ms`.
    fn advance(&mut self, model: &ApplianceModel, dt_ms: Millis) {
        match (self, &model.kind) {
            (Runtime::Constant { .. }, _) => {}
            (
                Runtime::Fluctuating {
                    on,
                    level,
                    step,
                    rng,
                },
                LoadKind::FluctuatingLoad {
                    fluctuation_sigma_w,
                },
            ) => {
                if *on {
                    if let Some(step) = step {
                        let lo = (model.steady_power_w - fluctuation_sigma_w)
                            .max(model.steady_power_w * 0.1);
                        let hi = model.steady_power_w + fluctuation_sigma_w;
                        *level = (*level + step.sample(rng)).clamp(lo, hi);
                    }
                }
            }
            (Runtime::Cycler { state, door_open }, LoadKind::SpikyCycler { thermostat, .. }) => {
                *state = step_thermostat(thermostat, *state, dt_ms as f64 / 1000.0, *door_open);
            }
            _ => unreachable!("runtime built from the same model"),
        }
    }

    fn apply(&mut self, model: &ApplianceModel, verb: ActionVerb) {
        match (self, verb) {
            (Runtime::Constant { on }, ActionVerb::On) => *on = true,
            (Runtime::Constant { on }, ActionVerb::Off) => *on = false,
            (Runtime::Fluctuating { on, level, .. }, ActionVerb::On) => {
                if !*on {
                    *on = true;
                    *level = model.steady_power_w;
                }
            }
            (Runtime::Fluctuating { on, .. }, ActionVerb::Off) => *on = false,
            (Runtime::Cycler { state, .. }, ActionVerb::On) => state.switch_on(),
            (Runtime::Cycler { state, .. }, ActionVerb::Off) => state.switch_off(),
            (Runtime::Cycler { door_open, .. }, ActionVerb::DoorOpen) => *door_open = true,
            (Runtime::Cycler { door_open, .. }, ActionVerb::DoorClose) => *door_open = false,
            _ => unreachable!("door verbs on non-cyclers are rejected by validation"),
        }
    }

    fn power(&self, model: &ApplianceModel) -> f64 {
        match (self, &model.kind) {
            (Runtime::Constant { on }, _) => {
                if *on {
                    model.steady_power_w
                } else {
                    0.0
                }
            }
            (Runtime::Fluctuating { on, level, .. }, _) => {
                if *on {
                    *level
                } else {
                    0.0
                }
            }
            (
                Runtime::Cycler { state, .. },
                LoadKind::SpikyCycler {
                    spike_peak_w,
                    spike_duration_s,
                    ..
                },
            ) => {
                if !state.compressor_on {
                    0.0
                } else if state.on_elapsed_s < spike_duration_s - 1e-9 {
                    *spike_peak_w
                } else {
                    model.steady_power_w
                }
            }
            _ => unreachable!(),
        }
    }
}

fn appliance_seed(seed: u64, index: usize) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index as u64 + 1)
}

/// Runs a scenario to completion.
///
/// Appliances already running at start get an ON event at t = 0. Scripted
/// actions are quantized up to the next sample instant. At every
/// sample the autonomous dynamics advance first, then due actions apply, then
/// each appliance is sampled. The aggregate is
/// `max(0, baseline + Σ traces + noise)`, summed in declaration order.
pub fn simulate(scenario: &Scenario) -> Result<Simulation, ScenarioError> {
    scenario.validate()?;
    let n = scenario.sample_count();
    let models = &scenario.appliances;
    let mut runtimes: Vec<Runtime> = models
        .iter()
        .enumerate()
        .map(|(i, m)| Runtime::new(m, appliance_seed(scenario.seed, i)))
        .collect();
    let index_of = |id: &str| {
        models
            .iter()
            .position(|m| m.id == id)
            .expect("validated id")
    };

    let mut noise_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = (scenario.noise_sigma_w > 0.0)
        .then(|| Normal::new(0.0, scenario.noise_sigma_w).expect("finite sigma"));

    let mut t_ms = Vec::with_capacity(n);
    let mut aggregate = Vec::with_capacity(n);
    let mut traces: Vec<Vec<f64>> = vec![Vec::with_capacity(n); models.len()];
    let mut events = Vec::new();
    let mut next_action = 0;
    let mut prev_t = 0;

    for k in 0..n {
        let t = scenario.sample_time_ms(k);
        if k == 0 {
            for (_, model) in runtimes.iter().zip(models).filter(|(rt, _)| rt.is_on()) {
                events.push(TruthEvent {
                    t_ms: t,
                    appliance: model.id.clone(),
                    verb: Switch::On,
                });
            }
        } else {
            for (rt, model) in runtimes.iter_mut().zip(models) {
                let was_on = rt.is_on();
                rt.advance(model, t - prev_t);
                if rt.is_on() != was_on {
                    events.push(TruthEvent {
                        t_ms: t,
                        appliance: model.id.clone(),
                        verb: if was_on { Switch::Off } else { Switch::On },
                    });
                }
            }
        }
        while let Some(action) = scenario.actions.get(next_action) {
            if action.t_offset_ms() > t {
                break;
            }
            let i = index_of(&action.appliance);
            let was_on = runtimes[i].is_on();
            runtimes[i].apply(&models[i], action.verb);
            if runtimes[i].is_on() != was_on {
                events.push(TruthEvent {
                    t_ms: t,
                    appliance: models[i].id.clone(),
                    verb: if was_on { Switch::Off } else { Switch::On },
                });
            }
            next_action += 1;
        }

        let mut total = scenario.baseline_w;
        for (i, (rt, model)) in runtimes.iter().zip(models).enumerate() {
            let p = rt.power(model);
            traces[i].push(p);
            total += p;
        }
        if let Some(noise) = &noise {
            total += noise.sample(&mut noise_rng);
        }
        t_ms.push(t);
        aggregate.push(total.max(0.0));
        prev_t = t;
    }

    Ok(Simulation {
        aggregate: PowerSeries::new(t_ms, aggregate),
        truth: GroundTruth {
            events,
            traces: models
                .iter()
                .zip(traces)
                .map(|(m, watts)| ApplianceTrace {
                    id: m.id.clone(),
                    watts,
                })
                .collect(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ScenarioAction;

    fn base(duration_s: f64) -> Scenario {
        Scenario {
            name: "t".into(),
            appliances: vec![],
            actions: vec![],
            duration_s,
            sample_rate_hz: 1.0,
            baseline_w: 100.0,
            noise_sigma_w: 0.0,
            seed: 7,
            power_factor: 0.95,
            voltage_v: 230.0,
        }
    }

    #[test]
    fn empty_household_is_flat_baseline() {
        let sim = simulate(&base(10.0)).unwrap();
        assert_eq!(sim.aggregate.len(), 10);
        assert!(sim.aggregate.watts.iter().all(|&w| w == 100.0));
        assert!(sim.truth.events.is_empty());
    }

    #[test]
    fn kettle_window_is_additive() {
        let mut s = base(10.0);
        s.appliances
            .push(ApplianceModel::constant("kettle", 2000.0));
        s.actions = vec![
            ScenarioAction::new(3.0, "kettle", ActionVerb::On),
            ScenarioAction::new(7.0, "kettle", ActionVerb::Off),
        ];
        let sim = simulate(&s).unwrap();
        for (t, w) in sim.aggregate.t_ms.iter().zip(&sim.aggregate.watts) {
            let expected = if (3000..7000).contains(t) {
                2100.0
            } else {
                100.0
            };
            assert_eq!(*w, expected, "t={t}");
        }
        let truth: Vec<_> = sim
            .truth
            .events
            .iter()
            .map(|e| (e.t_ms, e.appliance.as_str(), e.verb))
            .collect();
        assert_eq!(
            truth,
            vec![(3000, "kettle", Switch::On), (7000, "kettle", Switch::Off)]
        );
    }

    #[test]
    fn unknown_appliance_is_named() {
        let mut s = base(10.0);
        s.actions
            .push(ScenarioAction::new(1.0, "toaster", ActionVerb::On));
        let err = simulate(&s).unwrap_err();
        assert!(
            matches!(err, ScenarioError::UnknownAppliance { index: 0, ref appliance, .. } if appliance == "toaster")
        );
        assert!(err.to_string().contains("toaster"));
    }

    #[test]
    fn unsorted_actions_are_rejected() {
        let mut s = base(10.0);
        s.appliances
            .push(ApplianceModel::constant("kettle", 2000.0));
        s.actions = vec![
            ScenarioAction::new(5.0, "kettle", ActionVerb::On),
            ScenarioAction::new(2.0, "kettle", ActionVerb::Off),
        ];
        assert!(matches!(
            simulate(&s),
            Err(ScenarioError::UnsortedActions { index: 1, .. })
        ));
    }

    #[test]
    fn door_verbs_need_a_cycler() {
        let mut s = base(10.0);
        s.appliances
            .push(ApplianceModel::constant("kettle", 2000.0));
        s.actions
            .push(ScenarioAction::new(1.0, "kettle", ActionVerb::DoorOpen));
        assert!(matches!(
            simulate(&s),
            Err(ScenarioError::DoorOnNonCycler { .. })
        ));
    }

    #[test]
    fn fluctuating_load_stays_in_band() {
        let mut s = base(600.0);
        s.appliances.push(ApplianceModel {
            id: "pc".into(),
            steady_power_w: 80.0,
            kind: LoadKind::FluctuatingLoad {
                fluctuation_sigma_w: 5.0,
            },
        });
        s.actions
            .push(ScenarioAction::new(10.0, "pc", ActionVerb::On));
        let sim = simulate(&s).unwrap();
        let trace = sim.truth.trace("pc").unwrap();
        assert!(trace[..10].iter().all(|&w| w == 0.0));
        assert_eq!(trace[10], 80.0);
        assert!(trace[10..].iter().all(|&w| (75.0..=85.0).contains(&w)));
        assert!(trace[10..].iter().any(|&w| w != 80.0));
    }

    #[test]
    fn redundant_switching_records_nothing() {
        let mut s = base(10.0);
        s.appliances.push(ApplianceModel::constant("lamp", 60.0));
        s.actions = vec![
            ScenarioAction::new(1.0, "lamp", ActionVerb::On),
            ScenarioAction::new(2.0, "lamp", ActionVerb::On),
            ScenarioAction::new(4.0, "lamp", ActionVerb::Off),
            ScenarioAction::new(5.0, "lamp", ActionVerb::Off),
        ];
        assert_eq!(simulate(&s).unwrap().truth.events.len(), 2);
    }

    #[test]
    fn off_grid_actions_round_up_to_next_sample() {
        let mut s = base(10.0);
        s.appliances.push(ApplianceModel::constant("lamp", 60.0));
        s.actions
            .push(ScenarioAction::new(2.4, "lamp", ActionVerb::On));
        let sim = simulate(&s).unwrap();
        assert_eq!(sim.truth.events[0].t_ms, 3000);
        assert_eq!(sim.aggregate.watts[2], 100.0);
        assert_eq!(sim.aggregate.watts[3], 160.0);
    }
}
