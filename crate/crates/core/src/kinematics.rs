//! Closed-form longitudinal motion under piecewise-constant acceleration.
//!
//! The plant is the double integrator `x' = v, v' = a` restricted to the
//! evolution domain `v >= 0`. Braking never drives the velocity negative:
//! evolution halts at the stop event and the vehicle is held at rest.

/// Longitudinal position (m) and velocity (m/s) of the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub v: f64,
}

impl VehicleState {
    pub const fn new(x: f64, v: f64) -> Self {
        Self { x, v }
    }

    /// True if the state lies in the evolution domain (finite, `v >= 0`).
    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.v.is_finite() && self.v >= 0.0
    }
}

/// Outcome of one continuous plant step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveResult {
    pub state: VehicleState,
    /// Time actually spent evolving, `0 <= elapsed <= dt_max`.
    pub elapsed: f64,
}

/// `x0 + v0 t + a t^2 / 2`.
pub fn position_at(x0: f64, v0: f64, a: f64, t: f64) -> f64 {
    x0 + v0 * t + 0.5 * a * t * t
}

/// `v0 + a t`, without clamping to the evolution domain.
pub fn velocity_at(v0: f64, a: f64, t: f64) -> f64 {
    v0 + a * t
}

/// Time until the velocity reaches zero, or `None` if it never does.
///
/// A vehicle at rest with zero acceleration is considered to stay at rest
/// forever, so it never produces a stop event.
pub fn stopping_time(v: f64, a: f64) -> Option<f64> {
    if a < 0.0 {
        Some(v / -a)
    } else {
        None
    }
}

/// Advances `state` under constant acceleration `a` for at most `dt_max`.
///
/// If the velocity would become negative the evolution halts at the stop
/// event, so `elapsed` may be shorter than requested.
pub fn evolve(state: VehicleState, a: f64, dt_max: f64) -> EvolveResult {
    match stopping_time(state.v, a) {
        Some(stop) if stop <= dt_max => EvolveResult {
            // distance covered while braking to rest is v * stop / 2
            state: VehicleState::new(state.x + 0.5 * state.v * stop, 0.0),
            elapsed: stop,
        },
        _ => EvolveResult {
            state: VehicleState::new(
                position_at(state.x, state.v, a, dt_max),
                velocity_at(state.v, a, dt_max).max(0.0),
            ),
            elapsed: dt_max,
        },
    }
}

/// Earliest time in `[0, min(horizon, stop))` at which the position reaches
/// `x_c`, or `None` if it is not reached within that window.
pub fn crossing_time(state: VehicleState, a: f64, x_c: f64, horizon: f64) -> Option<f64> {
    if state.x >= x_c {
        return Some(0.0);
    }
    let limit = match stopping_time(state.v, a) {
        Some(stop) => stop.min(horizon),
        None => horizon,
    };
    let gap = x_c - state.x;
    let disc = state.v * state.v + 2.0 * a * gap;
    if disc < 0.0 {
        return None;
    }
    // smallest non-negative root of a t^2 / 2 + v t - gap, in the form that
    // avoids cancellation for both signs of a
    let denom = state.v + disc.sqrt();
    if denom <= 0.0 {
        return None;
    }
    let t = 2.0 * gap / denom;
    (t <= limit).then_some(t)
}
