use crate::series::Millis;
use std::time::Instant;

/// Maps wall time onto simulated time: `offset + (now - origin) * acceleration`.
///
/// Two meters built from clocks sharing an origin observe the same
/// simulated trajectory, which is how a restarted meter resumes a run.
#[derive(Debug, Clone, Copy)]
pub struct MeterClock {
    origin: Instant,
    acceleration: f64,
    offset_ms: Millis,
}

impl MeterClock {
    pub fn new(acceleration: f64) -> Self {
        Self::with_origin(Instant::now(), acceleration)
    }

    pub fn with_origin(origin: Instant, acceleration: f64) -> Self {
        assert!(
            acceleration.is_finite() && acceleration >= 1.0,
            "clock acceleration must be >= 1, got {acceleration}"
        );
        Self {
            origin,
            acceleration,
            offset_ms: 0,
        }
    }

    pub fn starting_at(mut self, offset_ms: Millis) -> Self {
        self.offset_ms = offset_ms;
        self
    }

    pub fn acceleration(&self) -> f64 {
        self.acceleration
    }

    pub fn origin(&self) -> Instant {
        self.origin
    }

    pub fn sim_ms_at(&self, wall: Instant) -> Millis {
        let elapsed = wall.saturating_duration_since(self.origin).as_secs_f64();
        self.offset_ms + (elapsed * 1000.0 * self.acceleration).floor() as Millis
    }

    pub fn now_ms(&self) -> Millis {
        self.sim_ms_at(Instant::now())
    }

    /// Wall duration covering `sim_ms` simulated milliseconds.
    pub fn wall_duration(&self, sim_ms: Millis) -> std::time::Duration {
        std::time::Duration::from_secs_f64(sim_ms.max(0) as f64 / 1000.0 / self.acceleration)
    }
}
