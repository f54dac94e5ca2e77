//! Safety controller decisions.
//!
//! Each controller either passes the nominal request through or intervenes
//! with maximal safety braking `-a_s_min`.

use thiserror::Error;

use crate::kinematics::VehicleState;
use crate::model::ModelId;
use crate::threat::{
    a_req_horizon, a_req_zero, a_threshold_variant, msd_conservative, msd_conservative_vc, msd_permissive,
    msd_permissive_vc, msd_wrong, ParamError, SystemParams, ThresholdVariant,
};

/// Critical position (m) and critical velocity (m/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyConstraint {
    pub x_c: f64,
    pub v_c: f64,
}

impl SafetyConstraint {
    pub const fn new(x_c: f64, v_c: f64) -> Self {
        Self { x_c, v_c }
    }

    /// Stop before `x_c`.
    pub const fn stop_at(x_c: f64) -> Self {
        Self { x_c, v_c: 0.0 }
    }

    pub fn is_valid(&self) -> bool {
        self.x_c.is_finite() && self.v_c.is_finite() && self.v_c >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Commanded acceleration (m/s^2).
    pub a_s: f64,
    pub intervened: bool,
}

impl ControlOutput {
    fn pass(a_n: f64) -> Self {
        Self { a_s: a_n, intervened: false }
    }

    fn brake(p: &SystemParams) -> Self {
        Self { a_s: -p.a_s_min, intervened: true }
    }

    fn select(safe: bool, a_n: f64, p: &SystemParams) -> Self {
        if safe {
            Self::pass(a_n)
        } else {
            Self::brake(p)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("intervention chooser returned {value}, outside [{lower}, {upper}]")]
    ChooserOutOfRange { value: f64, lower: f64, upper: f64 },
}

fn gap(s: &VehicleState, c: &SafetyConstraint) -> f64 {
    c.x_c - s.x
}

pub fn ctrl_m1(s: &VehicleState, a_n: f64, c: &SafetyConstraint, p: &SystemParams) -> ControlOutput {
    ControlOutput::select(gap(s, c) >= msd_conservative(s.v, p.period, p), a_n, p)
}

pub fn ctrl_m2(s: &VehicleState, a_n: f64, c: &SafetyConstraint, p: &SystemParams) -> ControlOutput {
    ControlOutput::select(gap(s, c) >= msd_conservative_vc(s.v, c.v_c, p.period, p), a_n, p)
}

pub fn ctrl_m3(s: &VehicleState, a_n: f64, c: &SafetyConstraint, p: &SystemParams) -> ControlOutput {
    ControlOutput::select(gap(s, c) >= msd_permissive(s.v, a_n, p.period, p), a_n, p)
}

pub fn ctrl_m4(s: &VehicleState, a_n: f64, c: &SafetyConstraint, p: &SystemParams) -> ControlOutput {
    ControlOutput::select(gap(s, c) >= msd_permissive_vc(s.v, a_n, c.v_c, p.period, p), a_n, p)
}

/// **Unsafe.** Model 3 decision with the faulty distance metric, kept only
/// for falsification studies.
pub fn ctrl_m3_wrong(s: &VehicleState, a_n: f64, c: &SafetyConstraint, p: &SystemParams) -> ControlOutput {
    ControlOutput::select(gap(s, c) >= msd_wrong(s.v, a_n, p.period, p), a_n, p)
}

/// Required-acceleration controller with the as-written threshold.
pub fn ctrl_m5(
    s: &VehicleState,
    a_n: f64,
    c: &SafetyConstraint,
    p: &SystemParams,
) -> Result<ControlOutput, ControlError> {
    ctrl_m5_variant(s, a_n, c, p, ThresholdVariant::AsWritten)
}

pub fn ctrl_m5_variant(
    s: &VehicleState,
    a_n: f64,
    c: &SafetyConstraint,
    p: &SystemParams,
    variant: ThresholdVariant,
) -> Result<ControlOutput, ControlError> {
    p.validate_braking_order()?;
    Ok(ControlOutput::select(m5_safe(s, a_n, c, p, variant), a_n, p))
}

fn m5_safe(s: &VehicleState, a_n: f64, c: &SafetyConstraint, p: &SystemParams, variant: ThresholdVariant) -> bool {
    match a_req_horizon(s.v, a_n, gap(s, c), p) {
        Ok(r) => r >= a_threshold_variant(s.v, a_n, p, variant),
        Err(_) => false,
    }
}

/// A model together with the threshold variant used by Model 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Controller {
    pub model: ModelId,
    pub threshold: ThresholdVariant,
}

impl Controller {
    pub fn new(model: ModelId) -> Self {
        Self { model, threshold: ThresholdVariant::AsWritten }
    }

    pub fn with_threshold(model: ModelId, threshold: ThresholdVariant) -> Self {
        Self { model, threshold }
    }

    /// Checks the parameter contract of the model.
    pub fn check_params(&self, p: &SystemParams) -> Result<(), ParamError> {
        if self.model.needs_braking_order() {
            p.validate_braking_order()
        } else {
            p.validate()
        }
    }

    /// The model's safe condition for the request `a_n`.
    pub fn is_safe(&self, s: &VehicleState, a_n: f64, c: &SafetyConstraint, p: &SystemParams) -> bool {
        let g = gap(s, c);
        let t = p.period;
        match self.model {
            ModelId::M1 => g >= msd_conservative(s.v, t, p),
            ModelId::M2 => g >= msd_conservative_vc(s.v, c.v_c, t, p),
            ModelId::M3 => g >= msd_permissive(s.v, a_n, t, p),
            ModelId::M4 => g >= msd_permissive_vc(s.v, a_n, c.v_c, t, p),
            ModelId::M5 => m5_safe(s, a_n, c, p, self.threshold),
            ModelId::M3Wrong => g >= msd_wrong(s.v, a_n, t, p),
        }
    }

    pub fn decide(
        &self,
        s: &VehicleState,
        a_n: f64,
        c: &SafetyConstraint,
        p: &SystemParams,
    ) -> Result<ControlOutput, ControlError> {
        self.check_params(p)?;
        Ok(ControlOutput::select(self.is_safe(s, a_n, c, p), a_n, p))
    }
}

/// Picks an intervention value from a closed interval `[lower, upper]`.
pub trait InterventionChooser {
    fn choose(&mut self, lower: f64, upper: f64) -> f64;
}

impl<F: FnMut(f64, f64) -> f64> InterventionChooser for F {
    fn choose(&mut self, lower: f64, upper: f64) -> f64 {
        self(lower, upper)
    }
}

/// Always brakes as hard as allowed.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxBraking;

impl InterventionChooser for MaxBraking {
    fn choose(&mut self, lower: f64, _upper: f64) -> f64 {
        lower
    }
}

/// Brakes just hard enough to meet the constraint.
#[derive(Debug, Clone, Copy, Default)]
pub struct LeastBraking;

impl InterventionChooser for LeastBraking {
    fn choose(&mut self, _lower: f64, upper: f64) -> f64 {
        upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxedOutput {
    pub output: ControlOutput,
    /// The admissible interval was empty or the required acceleration
    /// infeasible, so maximal braking was forced.
    pub forced_fallback: bool,
}

/// Safe branch of `ctrl`'s model; on intervention any braking value between
/// `-a_s_min` and the zero-horizon required acceleration, picked by `chooser`.
pub fn ctrl_relaxed(
    ctrl: &Controller,
    s: &VehicleState,
    a_n: f64,
    c: &SafetyConstraint,
    p: &SystemParams,
    chooser: &mut dyn InterventionChooser,
) -> Result<RelaxedOutput, ControlError> {
    let base = ctrl.decide(s, a_n, c, p)?;
    if !base.intervened {
        return Ok(RelaxedOutput { output: base, forced_fallback: false });
    }
    let lower = -p.a_s_min;
    let upper = match a_req_zero(s.v, gap(s, c)) {
        Ok(r) if r >= lower => r,
        _ => return Ok(RelaxedOutput { output: base, forced_fallback: true }),
    };
    let value = chooser.choose(lower, upper);
    if !(lower <= value && value <= upper) {
        return Err(ControlError::ChooserOutOfRange { value, lower, upper });
    }
    Ok(RelaxedOutput { output: ControlOutput { a_s: value, intervened: true }, forced_fallback: false })
}
