//! Step-integration oracle shared by the integration tests.
//!
//! Advances the double integrator with a fixed small step and the
//! trapezoidal position update, stopping at zero velocity like the plant.

#![allow(dead_code)]

pub const DT: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct Motion {
    pub x: f64,
    pub v: f64,
    pub elapsed: f64,
}

/// Integrates `x' = v, v' = a` for `duration`, halting once `v` hits 0.
pub fn integrate(x: f64, v: f64, a: f64, duration: f64) -> Motion {
    let mut m = Motion { x, v, elapsed: 0.0 };
    let steps = (duration / DT).floor() as u64;
    let rest = duration - steps as f64 * DT;
    for k in 0..=steps {
        let h = if k == steps { rest } else { DT };
        if h <= 0.0 {
            break;
        }
        let next = m.v + a * h;
        if next < 0.0 {
            let h_stop = m.v / -a;
            m.x += 0.5 * m.v * h_stop;
            m.v = 0.0;
            m.elapsed += h_stop;
            return m;
        }
        m.x += 0.5 * (m.v + next) * h;
        m.v = next;
        m.elapsed += h;
    }
    m
}

/// Integrates with deceleration `brake` until `v` drops to `v_target`.
pub fn brake_to(x: f64, v: f64, brake: f64, v_target: f64) -> Motion {
    let mut m = Motion { x, v, elapsed: 0.0 };
    while m.v > v_target {
        let next = m.v - brake * DT;
        if next <= v_target {
            let h = (m.v - v_target) / brake;
            m.x += 0.5 * (m.v + v_target) * h;
            m.v = v_target;
            m.elapsed += h;
            break;
        }
        m.x += 0.5 * (m.v + next) * DT;
        m.v = next;
        m.elapsed += DT;
    }
    m
}

/// Distance covered by accelerating with `a` for `t` and then braking with
/// `brake` down to `v_target`.
pub fn maneuver_distance(v: f64, a: f64, t: f64, brake: f64, v_target: f64) -> f64 {
    let first = integrate(0.0, v, a, t);
    brake_to(first.x, first.v, brake, v_target).x
}

/// Earliest time the position reaches `x_c` under constant `a`, by
/// bisection on the sampled position. `None` if not reached by `horizon`.
pub fn bisect_crossing(x: f64, v: f64, a: f64, x_c: f64, horizon: f64) -> Option<f64> {
    let pos = |t: f64| x + v * t + 0.5 * a * t * t;
    if pos(0.0) >= x_c {
        return Some(0.0);
    }
    // the first sign change on a coarse grid brackets the earliest root
    let n = 10_000;
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=n {
        let t = horizon * k as f64 / n as f64;
        if pos(t) >= x_c {
            hi = Some(t);
            break;
        }
        lo = t;
    }
    let mut hi = hi?;
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if pos(mid) >= x_c {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}
