//! Model identifiers and the per-model state predicates: the env
//! admissibility test, the loop invariant and the guarantee.

use std::fmt;
use std::str::FromStr;

use crate::controller::SafetyConstraint;
use crate::kinematics::VehicleState;
use crate::threat::{a_req_zero, SystemParams};

/// Absolute tolerance on velocity comparisons in guarantee monitoring (m/s).
pub const VELOCITY_TOL: f64 = 1e-9;
/// Absolute tolerance on position comparisons in guarantee monitoring (m).
pub const POSITION_TOL: f64 = 1e-9;
/// Absolute tolerance on invariant margins (m).
pub const INVARIANT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelId {
    /// Conservative distance, stop before x_c.
    M1,
    /// Conservative distance, reach x_c no faster than v_c.
    M2,
    /// Permissive distance, stop before x_c.
    M3,
    /// Permissive distance with critical velocity.
    M4,
    /// Required-acceleration metric.
    M5,
    /// Model 3 with the faulty distance metric. Unsafe, for studies only.
    M3Wrong,
}

impl ModelId {
    pub const ALL: [ModelId; 6] = [Self::M1, Self::M2, Self::M3, Self::M4, Self::M5, Self::M3Wrong];
    pub const CORRECT: [ModelId; 5] = [Self::M1, Self::M2, Self::M3, Self::M4, Self::M5];

    pub fn name(self) -> &'static str {
        match self {
            Self::M1 => "m1",
            Self::M2 => "m2",
            Self::M3 => "m3",
            Self::M4 => "m4",
            Self::M5 => "m5",
            Self::M3Wrong => "m3-wrong",
        }
    }

    /// Models whose constraint carries a free critical velocity.
    pub fn uses_critical_velocity(self) -> bool {
        matches!(self, Self::M2 | Self::M4)
    }

    /// Models that need `a_n_min < a_s_min`.
    pub fn needs_braking_order(self) -> bool {
        matches!(self, Self::M5)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown model `{s}` (expected m1, m2, m3, m4, m5 or m3-wrong)"))
    }
}

/// Smallest gap the env test admits for velocity `v`.
pub fn admissibility_bound(model: ModelId, v: f64, v_c: f64, p: &SystemParams) -> f64 {
    if model.uses_critical_velocity() {
        (v * v - v_c * v_c) / (2.0 * p.a_s_min)
    } else {
        v * v / (2.0 * p.a_s_min)
    }
}

/// The model's env test on the current state and constraint (exact).
pub fn admissible(model: ModelId, s: &VehicleState, c: &SafetyConstraint, p: &SystemParams) -> bool {
    let gap = c.x_c - s.x;
    match model {
        ModelId::M1 | ModelId::M3 | ModelId::M3Wrong => {
            c.v_c == 0.0 && gap >= s.v * s.v / (2.0 * p.a_s_min)
        }
        ModelId::M2 | ModelId::M4 => {
            c.v_c >= 0.0 && gap >= (s.v * s.v - c.v_c * c.v_c) / (2.0 * p.a_s_min)
        }
        ModelId::M5 => c.v_c == 0.0 && matches!(a_req_zero(s.v, gap), Ok(r) if r >= -p.a_s_min),
    }
}

/// Signed slack of the loop invariant in metres; the invariant holds iff
/// the margin is non-negative.
///
/// For the required-acceleration model the invariant `a_req_zero >= -a_s_min`
/// is measured in its equivalent distance form, which stays well conditioned
/// near zero gap.
pub fn invariant_margin(model: ModelId, s: &VehicleState, c: &SafetyConstraint, p: &SystemParams) -> f64 {
    let gap = c.x_c - s.x;
    match model {
        ModelId::M2 | ModelId::M4 => {
            if c.v_c < 0.0 {
                return f64::NEG_INFINITY;
            }
            gap - (s.v * s.v - c.v_c * c.v_c) / (2.0 * p.a_s_min)
        }
        ModelId::M5 if s.v == 0.0 => f64::INFINITY,
        _ => gap - s.v * s.v / (2.0 * p.a_s_min),
    }
}

/// Loop invariant with absolute slack `tol`.
pub fn invariant_holds(model: ModelId, s: &VehicleState, c: &SafetyConstraint, p: &SystemParams, tol: f64) -> bool {
    invariant_margin(model, s, c, p) >= -tol
}

/// `x >= x_c -> v <= v_c`, with the velocity tolerance.
pub fn guarantee_holds(s: &VehicleState, c: &SafetyConstraint) -> bool {
    s.x < c.x_c || s.v <= c.v_c + VELOCITY_TOL
}
