//! Worked examples checked against the step-integration oracle. The
//! expected constants were produced by the oracle and are frozen here.

mod common;

use common::{bisect_crossing, brake_to, integrate, maneuver_distance};
use num_rational::BigRational;
use safelane_core::controller::{ctrl_m1, ctrl_m5, ctrl_relaxed, Controller, SafetyConstraint};
use safelane_core::environment::{sa_braking_lead, LeadObject, SituationParams};
use safelane_core::kinematics::{crossing_time, evolve, position_at, VehicleState};
use safelane_core::model::ModelId;
use safelane_core::threat::*;

const TOL: f64 = 1e-6;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn params(a_n_max: f64, a_n_min: f64, a_s_min: f64, period: f64) -> SystemParams {
    SystemParams::new(a_n_max, a_n_min, a_s_min, period).unwrap()
}

#[test]
fn position_matches_integration() {
    for (x0, v0, a, t, frozen) in [(0.0, 10.0, 2.0, 0.5, 5.25), (0.0, 1.0, -3.0, 1.0 / 3.0, 1.0 / 6.0)] {
        let oracle = integrate(x0, v0, a, t).x;
        assert!(close(oracle, frozen, TOL), "oracle {oracle} vs {frozen}");
        assert!(close(position_at(x0, v0, a, t), frozen, TOL));
    }
}

#[test]
fn evolve_matches_integration() {
    let oracle = integrate(0.0, 10.0, 2.0, 0.5);
    assert!(close(oracle.x, 5.25, TOL) && close(oracle.v, 11.0, TOL));
    let r = evolve(VehicleState::new(0.0, 10.0), 2.0, 0.5);
    assert!(close(r.state.x, 5.25, TOL) && close(r.state.v, 11.0, TOL));
}

#[test]
fn witness_crossing_matches_root_oracles() {
    // x(t) = t - 1.5 t^2 reaches 0.1 at t = (1 - sqrt(0.4)) / 3
    let frozen_t = 0.122_514_822_655_4;
    let frozen_v = 0.632_455_532_033_7;
    let bisected = bisect_crossing(0.0, 1.0, -3.0, 0.1, 1.0).unwrap();
    let root = (1.0 - (1.0f64 - 0.6).sqrt()) / 3.0;
    assert!(close(bisected, frozen_t, 1e-9) && close(root, frozen_t, 1e-9));
    assert!(close(1.0 - 3.0 * root, frozen_v, 1e-9));
    let t = crossing_time(VehicleState::new(0.0, 1.0), -3.0, 0.1, 1.0).unwrap();
    assert!(close(t, frozen_t, TOL), "{t}");
    assert!(close(evolve(VehicleState::new(0.0, 1.0), -3.0, t).state.v, frozen_v, TOL));
}

#[test]
fn conservative_distances() {
    let p = params(2.0, 3.0, 5.0, 0.5);
    for (v, v_c, t, frozen) in [(10.0, 0.0, 0.5, 17.35), (10.0, 0.0, 0.0, 10.0), (10.0, 5.0, 0.5, 14.85)] {
        let oracle = maneuver_distance(v, 2.0, t, 5.0, v_c);
        assert!(close(oracle, frozen, TOL), "oracle {oracle} vs {frozen}");
        assert!(close(msd_conservative_vc(v, v_c, t, &p), frozen, TOL));
    }
    assert!(close(msd_conservative(10.0, 0.5, &p), 17.35, TOL));
    assert!(close(msd_conservative(10.0, 0.0, &p), 10.0, TOL));
}

#[test]
fn permissive_distances() {
    let p = params(2.0, 3.0, 5.0, 0.5);
    let oracle = maneuver_distance(10.0, 1.0, 0.5, 5.0, 0.0);
    assert!(close(oracle, 16.15, TOL));
    assert!(close(msd_permissive(10.0, 1.0, 0.5, &p), 16.15, TOL));
    assert!(close(msd_permissive_vc(10.0, 1.0, 0.0, 0.5, &p), 16.15, TOL));
    assert!(close(msd_wrong(10.0, 1.0, 0.5, &p), 16.15, TOL));

    let oracle = maneuver_distance(10.0, 1.0, 0.5, 5.0, 5.0);
    assert!(close(oracle, 13.65, TOL));
    assert!(close(msd_permissive_vc(10.0, 1.0, 5.0, 0.5, &p), 13.65, TOL));

    // the request alone stops the vehicle after 1/3 s
    let p1 = params(2.0, 3.0, 5.0, 1.0);
    let oracle = integrate(0.0, 1.0, -3.0, 1.0).x;
    assert!(close(oracle, 1.0 / 6.0, TOL));
    assert!(close(msd_permissive(1.0, -3.0, 1.0, &p1), 1.0 / 6.0, TOL));
}

#[test]
fn wrong_distance_symbolic_expansion() {
    let p = params(2.0, 3.0, 5.0, 1.0);
    let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
    let (v, a, t, a_s) = (r(1, 1), r(-3, 1), r(1, 1), r(5, 1));
    let w = &v + &a * &t;
    let exact = &v * &t + &a * &t * &t / r(2, 1) + &w * &w / (r(2, 1) * &a_s);
    assert_eq!(exact, r(-1, 10));
    assert!(close(msd_wrong(1.0, -3.0, 1.0, &p), -0.1, 1e-12));
}

#[test]
fn required_accelerations() {
    let r = a_req_zero(10.0, 10.0).unwrap();
    assert!(close(r, -5.0, TOL));
    assert!(close(brake_to(0.0, 10.0, -r, 0.0).x, 10.0, TOL));

    let p = params(2.0, 3.0, 5.0, 0.5);
    let r = a_req_horizon(10.0, 0.0, 20.0, &p).unwrap();
    assert!(close(r, -10.0 / 3.0, TOL));
    let coast = integrate(0.0, 10.0, 0.0, 0.5);
    assert!(close(brake_to(coast.x, coast.v, -r, 0.0).x, 20.0, TOL));

    let p1 = params(2.0, 3.0, 5.0, 1.0);
    for gap in [0.1, 0.5, 2.0] {
        let r = a_req_horizon(1.0, -3.0, gap, &p1).unwrap();
        assert!(close(r, -1.0 / (2.0 * gap), 1e-12));
        assert!(close(brake_to(0.0, 1.0, -r, 0.0).x, gap, TOL));
    }
}

fn m5_safe_gap(v: f64, a_n: f64, gap: f64, p: &SystemParams) -> bool {
    matches!(a_req_horizon(v, a_n, gap, p), Ok(r) if r >= a_threshold(v, a_n, p))
}

#[test]
fn areq_distance_by_bisection() {
    let p = params(2.0, 3.0, 5.0, 0.5);
    let (mut lo, mut hi) = (0.0, 1000.0);
    assert!(!m5_safe_gap(10.0, 1.0, lo, &p) && m5_safe_gap(10.0, 1.0, hi, &p));
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if m5_safe_gap(10.0, 1.0, mid, &p) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    assert!(close(hi, 23.5, TOL), "{hi}");
    assert!(close(msd_areq(10.0, 1.0, &p, ThresholdVariant::AsWritten), 23.5, TOL));
}

#[test]
fn areq_distance_infinite_in_stopping_branch() {
    let p = params(2.0, 3.0, 5.0, 1.0);
    let mut gap = 1e-3;
    while gap <= 1e6 {
        assert!(!m5_safe_gap(1.0, -3.0, gap, &p), "safe at gap {gap}");
        gap *= 1.1;
    }
    assert_eq!(msd_areq(1.0, -3.0, &p, ThresholdVariant::AsWritten), f64::INFINITY);
}

#[test]
fn controller_examples() {
    let p = params(2.0, 3.0, 5.0, 0.5);
    let s = VehicleState::new(0.0, 10.0);
    let msd = maneuver_distance(10.0, 2.0, 0.5, 5.0, 0.0);
    assert!(100.0 >= msd && 17.0 < msd);
    assert!(!ctrl_m1(&s, 2.0, &SafetyConstraint::stop_at(100.0), &p).intervened);
    let out = ctrl_m1(&s, 2.0, &SafetyConstraint::stop_at(17.0), &p);
    assert!(out.intervened && out.a_s == -5.0);

    assert_eq!(ctrl_m5(&s, 1.0, &SafetyConstraint::stop_at(30.0), &p).unwrap().a_s, 1.0);
    assert_eq!(ctrl_m5(&s, 1.0, &SafetyConstraint::stop_at(20.0), &p).unwrap().a_s, -5.0);
}

#[test]
fn relaxed_interval_from_braking_oracle() {
    let p = params(2.0, 3.0, 6.0, 0.5);
    let s = VehicleState::new(0.0, 10.0);
    let c = SafetyConstraint::stop_at(10.0);
    let mut bounds = None;
    let mut chooser = |lo: f64, hi: f64| {
        bounds = Some((lo, hi));
        hi
    };
    let out = ctrl_relaxed(&Controller::new(ModelId::M1), &s, 2.0, &c, &p, &mut chooser).unwrap();
    let (lo, hi) = bounds.unwrap();
    assert_eq!(lo, -6.0);
    assert!(close(hi, -5.0, TOL));
    // braking at the upper end of the interval stops exactly at x_c
    assert!(close(brake_to(0.0, 10.0, -out.output.a_s, 0.0).x, 10.0, TOL));
}

#[test]
fn braking_lead_assessment() {
    for (x_l, v_l, b, d, frozen) in [(20.0, 8.0, 4.0, 2.0, 30.0), (0.0, 10.0, 5.0, 0.0, 10.0)] {
        let oracle = brake_to(x_l, v_l, b, 0.0).x + d;
        assert!(close(oracle, frozen, TOL));
        assert!(close(sa_braking_lead(&LeadObject { x_l, v_l }, &SituationParams { d, b }), frozen, TOL));
    }
}
