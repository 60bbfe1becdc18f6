use super::scenario::ThermostatParams;

// Crossings within this many seconds of the step end count as reached, so
// accumulated rounding never pushes a toggle to the following sample.
const CROSSING_SLACK_S: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermostatState {
    pub temp_c: f64,
    pub compressor_on: bool,
    /// Seconds since the last OFF→ON toggle (meaningless while OFF).
    pub on_elapsed_s: f64,
}

impl ThermostatState {
    pub fn initial(params: &ThermostatParams) -> Self {
        Self {
            temp_c: params.initial_temp_c.unwrap_or(params.temp_low_c),
            compressor_on: params.initially_on,
            on_elapsed_s: 0.0,
        }
    }

    pub fn switch_on(&mut self) {
        if !self.compressor_on {
            self.compressor_on = true;
            self.on_elapsed_s = 0.0;
        }
    }

    pub fn switch_off(&mut self) {
        self.compressor_on = false;
    }
}

/// Advances the thermostat by `dt_s` seconds.
///
/// The compressor starts when the cabinet reaches `temp_high_c` and stops at
/// `temp_low_c`; toggles happen at the exact crossing instant and the rest of
/// the step evolves under the new state. An open door multiplies the warming
/// rate and divides the cooling rate by `door_open_warm_multiplier`.
pub fn step_thermostat(
    params: &ThermostatParams,
    state: ThermostatState,
    dt_s: f64,
    door_open: bool,
) -> ThermostatState {
    debug_assert!(dt_s > 0.0, "thermostat step needs dt > 0");
    let door = if door_open {
        params.door_open_warm_multiplier
    } else {
        1.0
    };
    let cool = params.cool_rate_c_per_s / door;
    let warm = params.warm_rate_c_per_s * door;

    let mut s = state;
    let mut remaining = dt_s.max(0.0);
    // A pathological parameter set could toggle without consuming time.
    for _ in 0..1_000_000 {
        if s.compressor_on {
            let to_cross = ((s.temp_c - params.temp_low_c) / cool).max(0.0);
            if to_cross <= remaining + CROSSING_SLACK_S {
                remaining = (remaining - to_cross).max(0.0);
                s.temp_c = params.temp_low_c;
                s.compressor_on = false;
                continue;
            }
            s.temp_c -= cool * remaining;
            s.on_elapsed_s += remaining;
        } else {
            let to_cross = ((params.temp_high_c - s.temp_c) / warm).max(0.0);
            if to_cross <= remaining + CROSSING_SLACK_S {
                remaining = (remaining - to_cross).max(0.0);
                s.temp_c = params.temp_high_c;
                s.compressor_on = true;
                s.on_elapsed_s = 0.0;
                continue;
            }
            s.temp_c += warm * remaining;
        }
        break;
    }
    s
}
