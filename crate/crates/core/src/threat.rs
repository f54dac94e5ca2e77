//! Threat metrics used by the safety controllers.
//!
//! Distance-domain metrics return the minimal safe distance (m) the ego
//! vehicle needs ahead of the critical position; acceleration-domain metrics
//! return the constant acceleration (m/s^2) required to meet the constraint.
//!
//! The brake threat number (ratio of required to maximal deceleration) is
//! not provided.

use std::fmt;

use thiserror::Error;

/// The four symbolic system parameters of every controller model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Maximal nominal acceleration (m/s^2).
    pub a_n_max: f64,
    /// Maximal nominal braking magnitude (m/s^2).
    pub a_n_min: f64,
    /// Maximal safety braking magnitude (m/s^2).
    pub a_s_min: f64,
    /// Sampling period (s).
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter {name} must be a finite positive number, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("nominal braking a_n_min ({a_n_min}) must be strictly below safety braking a_s_min ({a_s_min})")]
    BrakingOrder { a_n_min: f64, a_s_min: f64 },
}

impl SystemParams {
    pub fn new(a_n_max: f64, a_n_min: f64, a_s_min: f64, period: f64) -> Result<Self, ParamError> {
        let p = Self { a_n_max, a_n_min, a_s_min, period };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, value) in [
            ("a_n_max", self.a_n_max),
            ("a_n_min", self.a_n_min),
            ("a_s_min", self.a_s_min),
            ("T", self.period),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParamError::NotPositive { name, value });
            }
        }
        Ok(())
    }

    /// Extra hypothesis of the required-acceleration controller.
    pub fn validate_braking_order(&self) -> Result<(), ParamError> {
        self.validate()?;
        if self.a_n_min < self.a_s_min {
            Ok(())
        } else {
            Err(ParamError::BrakingOrder { a_n_min: self.a_n_min, a_s_min: self.a_s_min })
        }
    }

    /// True if `a_n` lies in the admissible nominal interval `[-a_n_min, a_n_max]`.
    pub fn admits_nominal(&self, a_n: f64) -> bool {
        -self.a_n_min <= a_n && a_n <= self.a_n_max
    }
}

/// How the threshold of the required-acceleration controller treats the
/// case where the nominal request would stop the vehicle within one period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdVariant {
    /// Threshold `-a_n`. Never admits the request in
    /// that case, so the controller always brakes there.
    #[default]
    AsWritten,
    /// Threshold `a_n`, the rearrangement of the permissive distance test.
    SignCorrected,
}

impl ThresholdVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::AsWritten => "as-written",
            Self::SignCorrected => "sign-corrected",
        }
    }
}

impl fmt::Display for ThresholdVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ThresholdVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "as-written" => Ok(Self::AsWritten),
            "sign-corrected" => Ok(Self::SignCorrected),
            other => Err(format!("unknown threshold variant `{other}` (expected as-written or sign-corrected)")),
        }
    }
}

/// No finite braking meets the constraint: the vehicle is moving and already
/// at or beyond the critical position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("constraint cannot be met by any finite braking")]
pub struct Infeasible;

// distance covered accelerating with `a` for `t`, then braking with
// `brake` from v + a t down to `v_target`
fn accelerate_then_brake(v: f64, a: f64, t: f64, v_target: f64, brake: f64) -> f64 {
    let w = v + a * t;
    v * t + a * t * t / 2.0 + (w * w - v_target * v_target) / (2.0 * brake)
}

/// Worst-case minimal safe distance with the vehicle brought to rest.
pub fn msd_conservative(v: f64, t: f64, p: &SystemParams) -> f64 {
    accelerate_then_brake(v, p.a_n_max, t, 0.0, p.a_s_min)
}

/// Worst-case minimal safe distance down to the critical velocity `v_c`.
pub fn msd_conservative_vc(v: f64, v_c: f64, t: f64, p: &SystemParams) -> f64 {
    accelerate_then_brake(v, p.a_n_max, t, v_c, p.a_s_min)
}

/// Minimal safe distance assuming the vehicle follows the request `a_n`.
///
/// When `a_n` would stop the vehicle within `t` the distance is the stopping
/// distance under `a_n` alone.
pub fn msd_permissive(v: f64, a_n: f64, t: f64, p: &SystemParams) -> f64 {
    msd_permissive_vc(v, a_n, 0.0, t, p)
}

/// [`msd_permissive`] generalised to a critical velocity `v_c`.
pub fn msd_permissive_vc(v: f64, a_n: f64, v_c: f64, t: f64, p: &SystemParams) -> f64 {
    if v + a_n * t >= 0.0 {
        accelerate_then_brake(v, a_n, t, v_c, p.a_s_min)
    } else {
        -(v * v) / (2.0 * a_n)
    }
}

/// **Faulty metric, for falsification studies only.**
///
/// The permissive formula without its case split. When the request stops
/// the vehicle inside the horizon this underestimates the distance needed
/// (it may even be negative) and leads to unsafe decisions.
pub fn msd_wrong(v: f64, a_n: f64, t: f64, p: &SystemParams) -> f64 {
    accelerate_then_brake(v, a_n, t, 0.0, p.a_s_min)
}

/// Constant acceleration that stops the vehicle exactly after `gap` metres.
pub fn a_req_zero(v: f64, gap: f64) -> Result<f64, Infeasible> {
    if v == 0.0 {
        Ok(0.0)
    } else if gap > 0.0 {
        Ok(-(v * v) / (2.0 * gap))
    } else {
        Err(Infeasible)
    }
}

/// Acceleration required to stop at the critical position after following
/// `a_n` for one sampling period.
pub fn a_req_horizon(v: f64, a_n: f64, gap: f64, p: &SystemParams) -> Result<f64, Infeasible> {
    let t = p.period;
    let w = v + a_n * t;
    if w < 0.0 {
        return a_req_zero(v, gap);
    }
    let remaining = gap - v * t - a_n * t * t / 2.0;
    if remaining > 0.0 {
        // `+ 0.0` turns -0.0 into 0.0 when w == 0
        Ok(-(w * w) / (2.0 * remaining) + 0.0)
    } else if w == 0.0 && remaining == 0.0 {
        Ok(0.0)
    } else {
        Err(Infeasible)
    }
}

/// Threshold the required acceleration is compared against (as-written variant).
pub fn a_threshold(v: f64, a_n: f64, p: &SystemParams) -> f64 {
    a_threshold_variant(v, a_n, p, ThresholdVariant::AsWritten)
}

pub fn a_threshold_variant(v: f64, a_n: f64, p: &SystemParams, variant: ThresholdVariant) -> f64 {
    if v + a_n * p.period >= 0.0 {
        -p.a_n_min
    } else {
        match variant {
            ThresholdVariant::AsWritten => -a_n,
            ThresholdVariant::SignCorrected => a_n,
        }
    }
}

/// Gap at which the required-acceleration safe condition flips, i.e. the
/// equivalent minimal safe distance. `f64::INFINITY` when no gap is safe.
pub fn msd_areq(v: f64, a_n: f64, p: &SystemParams, variant: ThresholdVariant) -> f64 {
    let t = p.period;
    if v + a_n * t >= 0.0 {
        accelerate_then_brake(v, a_n, t, 0.0, p.a_n_min)
    } else {
        match variant {
            ThresholdVariant::AsWritten => f64::INFINITY,
            ThresholdVariant::SignCorrected => -(v * v) / (2.0 * a_n),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(a_n_max: f64, a_n_min: f64, a_s_min: f64, period: f64) -> SystemParams {
        SystemParams::new(a_n_max, a_n_min, a_s_min, period).unwrap()
    }

    #[test]
    fn params_must_be_positive() {
        assert!(SystemParams::new(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(SystemParams::new(1.0, -1.0, 1.0, 1.0).is_err());
        assert!(SystemParams::new(f64::NAN, 1.0, 1.0, 1.0).is_err());
        assert!(p(1.0, 5.0, 5.0, 1.0).validate_braking_order().is_err());
        assert!(p(1.0, 3.0, 5.0, 1.0).validate_braking_order().is_ok());
    }

    #[test]
    fn msd_trivial() {
        let q = p(2.0, 3.0, 5.0, 0.5);
        assert_eq!(msd_conservative(0.0, 0.0, &q), 0.0);
        assert_eq!(msd_conservative_vc(7.0, 7.0, 0.0, &q), 0.0);
        assert_eq!(msd_permissive(0.0, 0.0, 0.7, &q), 0.0);
        assert_eq!(msd_permissive_vc(10.0, 0.0, 10.0, 0.0, &q), 0.0);
        assert_eq!(msd_wrong(0.0, 0.0, 0.0, &q), 0.0);
    }

    #[test]
    fn wrong_metric_goes_negative() {
        let q = p(2.0, 3.0, 5.0, 1.0);
        assert!((msd_wrong(1.0, -3.0, 1.0, &q) + 0.1).abs() < 1e-12);
        assert!((msd_permissive(1.0, -3.0, 1.0, &q) - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn a_req_zero_cases() {
        assert_eq!(a_req_zero(10.0, 10.0), Ok(-5.0));
        assert_eq!(a_req_zero(0.0, 5.0), Ok(0.0));
        assert_eq!(a_req_zero(0.0, 0.0), Ok(0.0));
        assert_eq!(a_req_zero(0.0, -1.0), Ok(0.0));
        assert_eq!(a_req_zero(10.0, 0.0), Err(Infeasible));
        assert_eq!(a_req_zero(10.0, -3.0), Err(Infeasible));
    }

    #[test]
    fn a_req_horizon_cases() {
        let q = p(2.0, 3.0, 5.0, 0.5);
        let r = a_req_horizon(10.0, 0.0, 20.0, &q).unwrap();
        assert!((r + 10.0 / 3.0).abs() < 1e-12);
        assert_eq!(a_req_horizon(0.0, 0.0, 5.0, &q), Ok(0.0));
        // post-horizon gap exhausted while still moving
        assert_eq!(a_req_horizon(10.0, 0.0, 5.0, &q), Err(Infeasible));
        // stops exactly at the critical position at the end of the period
        let q1 = p(2.0, 4.0, 5.0, 1.0);
        assert_eq!(a_req_horizon(2.0, -2.0, 1.0, &q1), Ok(0.0));
        // would stop beyond it
        assert_eq!(a_req_horizon(2.0, -2.0, 0.5, &q1), Err(Infeasible));
    }

    #[test]
    fn a_req_horizon_otherwise_branch_matches_zero_horizon() {
        let q = p(2.0, 3.0, 5.0, 1.0);
        for gap in [0.05, 0.1, 1.0, 30.0] {
            assert_eq!(a_req_horizon(1.0, -3.0, gap, &q), a_req_zero(1.0, gap));
            assert!((a_req_horizon(1.0, -3.0, gap, &q).unwrap() + 1.0 / (2.0 * gap)).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_cases() {
        let q = p(2.0, 3.0, 5.0, 0.5);
        assert_eq!(a_threshold(10.0, 1.0, &q), -3.0);
        assert_eq!(a_threshold(0.0, 0.0, &q), -3.0);
        let q1 = p(2.0, 3.0, 5.0, 1.0);
        assert_eq!(a_threshold(1.0, -3.0, &q1), 3.0);
        assert_eq!(a_threshold_variant(1.0, -3.0, &q1, ThresholdVariant::SignCorrected), -3.0);
    }

    #[test]
    fn msd_areq_cases() {
        let q = p(2.0, 3.0, 5.0, 0.5);
        assert!((msd_areq(10.0, 1.0, &q, ThresholdVariant::AsWritten) - 23.5).abs() < 1e-12);
        assert_eq!(msd_areq(0.0, 0.0, &q, ThresholdVariant::AsWritten), 0.0);
        let q1 = p(2.0, 3.0, 5.0, 1.0);
        assert_eq!(msd_areq(1.0, -3.0, &q1, ThresholdVariant::AsWritten), f64::INFINITY);
        let corrected = msd_areq(1.0, -3.0, &q1, ThresholdVariant::SignCorrected);
        assert_eq!(corrected, msd_permissive(1.0, -3.0, 1.0, &q1));
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("as-written".parse::<ThresholdVariant>(), Ok(ThresholdVariant::AsWritten));
        assert_eq!("sign-corrected".parse::<ThresholdVariant>(), Ok(ThresholdVariant::SignCorrected));
        assert!("other".parse::<ThresholdVariant>().is_err());
    }
}
