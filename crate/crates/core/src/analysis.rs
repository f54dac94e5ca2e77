//! Comparative and falsification studies over sampled parameters.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::controller::{Controller, SafetyConstraint};
use crate::environment::EnvSampler;
use crate::kinematics::VehicleState;
use crate::model::ModelId;
use crate::simulator::{
    check_invariant_obligations, run_batch, run_episode, ConstraintPolicy, DurationPolicy, EpisodeConfig,
    MonitorMode, NominalPolicy, ObligationReport, Outcome, SimError,
};
use crate::threat::{msd_areq, msd_conservative, msd_permissive, SystemParams, ThresholdVariant};

/// Dominance margins above this value count as float noise.
pub const MARGIN_TOL: f64 = 1e-9;
/// Margins closer to zero than this are rechecked exactly.
pub const RECHECK_BAND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid parameter ranges: {0}")]
pub struct RangeError(pub String);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRanges {
    pub a_s_min: Interval,
    pub a_n_min: Interval,
    pub a_n_max: Interval,
    pub period: Interval,
    pub v: Interval,
    /// Further clipped to `[-a_n_min, a_n_max]` for each tuple.
    pub a_n: Interval,
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            a_s_min: Interval::new(4.0, 10.0),
            a_n_min: Interval::new(0.5, 3.5),
            a_n_max: Interval::new(0.5, 4.0),
            period: Interval::new(0.01, 2.0),
            v: Interval::new(0.0, 50.0),
            a_n: Interval::new(-3.5, 4.0),
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<(), RangeError> {
        let named = [
            ("a_s_min", self.a_s_min),
            ("a_n_min", self.a_n_min),
            ("a_n_max", self.a_n_max),
            ("T", self.period),
            ("v", self.v),
            ("a_n", self.a_n),
        ];
        for (name, r) in named {
            if !r.is_valid() {
                return Err(RangeError(format!("{name}: need finite lo <= hi, got [{}, {}]", r.lo, r.hi)));
            }
        }
        for (name, r) in &named[..4] {
            if r.lo <= 0.0 {
                return Err(RangeError(format!("{name} must be strictly positive, got lower bound {}", r.lo)));
            }
        }
        if self.v.lo < 0.0 {
            return Err(RangeError(format!("v must be non-negative, got lower bound {}", self.v.lo)));
        }
        if self.a_n_min.hi >= self.a_s_min.lo {
            return Err(RangeError(format!(
                "a_n_min < a_s_min must hold for every tuple, but a_n_min reaches {} and a_s_min starts at {}",
                self.a_n_min.hi, self.a_s_min.lo
            )));
        }
        if self.a_n.lo > self.a_n_max.lo || self.a_n.hi < -self.a_n_min.lo {
            return Err(RangeError("a_n range does not meet [-a_n_min, a_n_max] for every tuple".into()));
        }
        Ok(())
    }

    fn pick(env: &mut EnvSampler, r: Interval) -> f64 {
        match env.rng().random_range(0..20u32) {
            0 => r.lo,
            1 => r.hi,
            _ => env.uniform(r.lo, r.hi),
        }
    }

    /// Parameter tuple, endpoint-biased per coordinate.
    pub fn sample_params(&self, env: &mut EnvSampler) -> SystemParams {
        SystemParams {
            a_n_max: Self::pick(env, self.a_n_max),
            a_n_min: Self::pick(env, self.a_n_min),
            a_s_min: Self::pick(env, self.a_s_min),
            period: Self::pick(env, self.period),
        }
    }

    fn nominal_bounds(&self, p: &SystemParams) -> Interval {
        Interval::new(self.a_n.lo.max(-p.a_n_min), self.a_n.hi.min(p.a_n_max))
    }

    pub fn sample_tuple(&self, env: &mut EnvSampler) -> Tuple {
        let p = self.sample_params(env);
        let v = Self::pick(env, self.v);
        let r = self.nominal_bounds(&p);
        let stop = -v / p.period;
        let a_n = if env.chance(0.1) && r.lo <= stop && stop <= r.hi { stop } else { Self::pick(env, r) };
        Tuple { p, v, a_n }
    }

    /// Every combination of range endpoints, with the nominal request at
    /// its bounds, at zero and at the value that stops within one period.
    pub fn corner_grid(&self) -> Vec<Tuple> {
        let ends = |r: Interval| [r.lo, r.hi];
        let mut out = Vec::new();
        for a_s_min in ends(self.a_s_min) {
            for a_n_min in ends(self.a_n_min) {
                for a_n_max in ends(self.a_n_max) {
                    for period in ends(self.period) {
                        for v in ends(self.v) {
                            let p = SystemParams { a_n_max, a_n_min, a_s_min, period };
                            let r = self.nominal_bounds(&p);
                            let mut a_ns = vec![r.lo, r.hi];
                            for extra in [0.0, -v / period] {
                                if r.lo <= extra && extra <= r.hi && !a_ns.contains(&extra) {
                                    a_ns.push(extra);
                                }
                            }
                            out.extend(a_ns.into_iter().map(|a_n| Tuple { p, v, a_n }));
                        }
                    }
                }
            }
        }
        out
    }
}

/// One sampled point of the metric comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuple {
    pub p: SystemParams,
    pub v: f64,
    pub a_n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginRow {
    pub index: u64,
    pub tuple: Tuple,
    pub msd1: f64,
    pub msd3: f64,
    pub msd5: f64,
    pub margin13: f64,
    pub margin53: f64,
}

impl MarginRow {
    pub const CSV_HEADER: &'static str = "index,a_s_min,a_n_min,a_n_max,T,v,a_n,msd1,msd3,msd5,margin13,margin53";

    pub fn csv_line(&self) -> String {
        let t = &self.tuple;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.index,
            t.p.a_s_min,
            t.p.a_n_min,
            t.p.a_n_max,
            t.p.period,
            t.v,
            t.a_n,
            self.msd1,
            self.msd3,
            self.msd5,
            self.margin13,
            self.margin53
        )
    }
}

/// Flat summary of a study.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudyReport {
    pub study: String,
    pub seed: u64,
    pub samples: u64,
    pub failures: u64,
    pub worst_margin: Option<f64>,
    pub first_counterexample: Option<Vec<(String, String)>>,
    pub config: Vec<(String, String)>,
    pub metrics: Vec<(String, String)>,
}

impl StudyReport {
    fn new(study: &str, seed: u64) -> Self {
        Self { study: study.to_string(), seed, ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn metric(&self, key: &str) -> Option<&str> {
        self.metrics.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn set_metric(&mut self, key: &str, value: impl ToString) {
        self.metrics.push((key.to_string(), value.to_string()));
    }

    fn set_config(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    /// `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "study={}", self.study);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "samples={}", self.samples);
        let _ = writeln!(s, "failures={}", self.failures);
        if let Some(m) = self.worst_margin {
            let _ = writeln!(s, "worst_margin={m}");
        }
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k}={v}");
        }
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "{k}={v}");
        }
        if let Some(cx) = &self.first_counterexample {
            for (k, v) in cx {
                let _ = writeln!(s, "counterexample.{k}={v}");
            }
        }
        s
    }
}

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

fn two() -> BigRational {
    BigRational::from_integer(BigInt::from(2))
}

// exact forms of the three metrics on the f64 inputs
fn exact_msd_brake(v: &BigRational, a: &BigRational, t: &BigRational, brake: &BigRational) -> BigRational {
    let w = v + a * t;
    v * t + a * t * t / two() + &w * &w / (two() * brake)
}

fn exact_margins(tu: &Tuple, variant: ThresholdVariant) -> (BigRational, Option<BigRational>) {
    let (v, a_n, t) = (rat(tu.v), rat(tu.a_n), rat(tu.p.period));
    let a_s = rat(tu.p.a_s_min);
    let msd1 = exact_msd_brake(&v, &rat(tu.p.a_n_max), &t, &a_s);
    let stays_moving = !(&v + &a_n * &t).is_negative();
    let msd3 = if stays_moving {
        exact_msd_brake(&v, &a_n, &t, &a_s)
    } else {
        -(&v * &v) / (two() * &a_n)
    };
    let msd5 = if stays_moving {
        Some(exact_msd_brake(&v, &a_n, &t, &rat(tu.p.a_n_min)))
    } else {
        match variant {
            ThresholdVariant::AsWritten => None,
            ThresholdVariant::SignCorrected => Some(-(&v * &v) / (two() * &a_n)),
        }
    };
    (&msd1 - &msd3, msd5.map(|m| m - &msd3))
}

#[derive(Debug, Clone, Default)]
struct CompareChunk {
    samples: u64,
    failures: u64,
    rechecked: u64,
    infinite: u64,
    worst13: f64,
    worst53: f64,
    first: Option<(u64, Tuple, f64, f64)>,
    rows: Vec<MarginRow>,
}

impl CompareChunk {
    fn new() -> Self {
        Self { worst13: f64::INFINITY, worst53: f64::INFINITY, ..Default::default() }
    }

    fn check(&mut self, index: u64, tu: Tuple, variant: ThresholdVariant, keep_rows: bool) {
        let (p, v, a_n) = (&tu.p, tu.v, tu.a_n);
        let msd1 = msd_conservative(v, p.period, p);
        let msd3 = msd_permissive(v, a_n, p.period, p);
        let msd5 = msd_areq(v, a_n, p, variant);
        let m13 = msd1 - msd3;
        let m53 = if msd5.is_finite() { msd5 - msd3 } else { f64::INFINITY };
        self.samples += 1;
        if !msd5.is_finite() {
            self.infinite += 1;
        }
        self.worst13 = self.worst13.min(m13);
        self.worst53 = self.worst53.min(m53);
        let near = |m: f64| m.abs() <= RECHECK_BAND;
        let mut bad = m13 < -MARGIN_TOL || m53 < -MARGIN_TOL;
        if near(m13) || near(m53) {
            self.rechecked += 1;
            let (e13, e53) = exact_margins(&tu, variant);
            let exact_bad = e13.is_negative() || e53.as_ref().is_some_and(|m| m.is_negative());
            // outside the band the float margin decides on its own
            let far_bad = (!near(m13) && m13 < -MARGIN_TOL) || (!near(m53) && m53 < -MARGIN_TOL);
            bad = exact_bad || far_bad;
        }
        if bad {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some((index, tu, m13, m53));
            }
        }
        if keep_rows {
            self.rows.push(MarginRow { index, tuple: tu, msd1, msd3, msd5, margin13: m13, margin53: m53 });
        }
    }

    fn merge(mut self, other: CompareChunk) -> CompareChunk {
        self.samples += other.samples;
        self.failures += other.failures;
        self.rechecked += other.rechecked;
        self.infinite += other.infinite;
        self.worst13 = self.worst13.min(other.worst13);
        self.worst53 = self.worst53.min(other.worst53);
        if self.first.is_none() {
            self.first = other.first;
        }
        self.rows.extend(other.rows);
        self
    }
}

const CHUNK: u64 = 4096;

/// Checks `msd1 >= msd3` and `msd5 >= msd3` on `n` sampled tuples plus the
/// corner grid. Returns the report and, if `keep_rows`, every margin.
pub fn compare_metrics_rows(
    r: &ParamRanges,
    n: u64,
    seed: u64,
    variant: ThresholdVariant,
    keep_rows: bool,
) -> Result<(StudyReport, Vec<MarginRow>), RangeError> {
    r.validate()?;
    let grid = r.corner_grid();
    let mut head = CompareChunk::new();
    for (i, tu) in grid.iter().enumerate() {
        head.check(i as u64, *tu, variant, keep_rows);
    }
    let offset = grid.len() as u64;
    let chunks = n.div_ceil(CHUNK);
    let tail = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut env = EnvSampler::with_stream(seed, k);
            let mut chunk = CompareChunk::new();
            for i in k * CHUNK..((k + 1) * CHUNK).min(n) {
                chunk.check(offset + i, r.sample_tuple(&mut env), variant, keep_rows);
            }
            chunk
        })
        .collect::<Vec<_>>();
    let all = tail.into_iter().fold(head, CompareChunk::merge);

    let mut rep = StudyReport::new("compare", seed);
    rep.samples = all.samples;
    rep.failures = all.failures;
    rep.worst_margin = Some(all.worst13.min(all.worst53));
    rep.set_config("variant", variant);
    rep.set_config("random_samples", n);
    rep.set_config("corner_samples", offset);
    rep.set_metric("worst_margin_msd1_msd3", all.worst13);
    rep.set_metric("worst_margin_msd5_msd3", all.worst53);
    rep.set_metric("exact_rechecks", all.rechecked);
    rep.set_metric("msd5_infinite", all.infinite);
    if let Some((i, tu, m13, m53)) = all.first {
        rep.first_counterexample = Some(tuple_fields(i, &tu, &[("margin13", m13), ("margin53", m53)]));
    }
    Ok((rep, all.rows))
}

pub fn compare_metrics(r: &ParamRanges, n: u64, seed: u64, variant: ThresholdVariant) -> Result<StudyReport, RangeError> {
    compare_metrics_rows(r, n, seed, variant, false).map(|(rep, _)| rep)
}

fn tuple_fields(index: u64, tu: &Tuple, extra: &[(&str, f64)]) -> Vec<(String, String)> {
    let mut v = vec![
        ("index".to_string(), index.to_string()),
        ("a_s_min".to_string(), tu.p.a_s_min.to_string()),
        ("a_n_min".to_string(), tu.p.a_n_min.to_string()),
        ("a_n_max".to_string(), tu.p.a_n_max.to_string()),
        ("T".to_string(), tu.p.period.to_string()),
        ("v".to_string(), tu.v.to_string()),
        ("a_n".to_string(), tu.a_n.to_string()),
    ];
    v.extend(extra.iter().map(|(k, x)| (k.to_string(), x.to_string())));
    v
}

/// The single-step scenario of the faulty metric: v = 1, a_n = -3,
/// a_n_min = 3, a_s_min = 5, T = 1, stop 0.1 m ahead.
pub fn canonical_witness(model: ModelId) -> EpisodeConfig {
    let p = SystemParams { a_n_max: 2.0, a_n_min: 3.0, a_s_min: 5.0, period: 1.0 };
    EpisodeConfig {
        initial: VehicleState::new(0.0, 1.0),
        iterations: 1,
        duration: DurationPolicy::AlwaysT,
        constraint: ConstraintPolicy::Fixed(SafetyConstraint::stop_at(0.1)),
        nominal: NominalPolicy::Constant(-3.0),
        ..EpisodeConfig::new(model, p)
    }
}

const FAMILY_SALT: u64 = 0x5eed_fa11_0f_3a7e;

/// Member `i` of the witness family: the nominal request stops the vehicle
/// within one period with less than safety braking, and the gap sits just
/// above the admissibility bound. Member 0 is the canonical witness.
pub fn witness_family(model: ModelId, i: u64, seed: u64) -> EpisodeConfig {
    if i == 0 {
        return canonical_witness(model);
    }
    let mut env = EnvSampler::with_stream(seed ^ FAMILY_SALT, i);
    for _ in 0..100 {
        let a_s_min = env.uniform(3.0, 10.0);
        let a_n_min = env.uniform(0.5, 0.9 * a_s_min);
        let a_n = -env.uniform(0.5, 1.0) * a_n_min;
        let v = env.uniform(0.2, 5.0);
        let period = 2.0 * v / -a_n * env.uniform(1.0, 3.0);
        let p = SystemParams { a_n_max: env.uniform(0.5, 4.0), a_n_min, a_s_min, period };
        let bound = v * v / (2.0 * a_s_min);
        let slack = if env.chance(0.3) { 0.0 } else { env.uniform(0.0, 0.05) };
        let mut x_c = bound * (1.0 + slack);
        let s = VehicleState::new(0.0, v);
        while !crate::model::admissible(model, &s, &SafetyConstraint::stop_at(x_c), &p) {
            x_c = x_c.next_up();
        }
        let c = SafetyConstraint::stop_at(x_c);
        // keep only members the faulty controller lets through
        if Controller::new(ModelId::M3Wrong).is_safe(&s, a_n, &c, &p) {
            return EpisodeConfig {
                initial: s,
                iterations: 1,
                duration: DurationPolicy::AlwaysT,
                constraint: ConstraintPolicy::Fixed(c),
                nominal: NominalPolicy::Constant(a_n),
                seed,
                stream: i,
                ..EpisodeConfig::new(model, p)
            };
        }
    }
    canonical_witness(model)
}

fn random_episode(model: ModelId, i: u64, seed: u64, ranges: &ParamRanges, iterations: usize, dense: usize) -> EpisodeConfig {
    let mut env = EnvSampler::with_stream(seed ^ FAMILY_SALT.rotate_left(17), i);
    let params = ranges.sample_params(&mut env);
    let v0 = if env.chance(0.1) { 0.0 } else { env.uniform(0.0, 40.0) };
    EpisodeConfig {
        initial: VehicleState::new(0.0, v0),
        iterations,
        dense_samples: dense,
        seed,
        stream: i,
        ..EpisodeConfig::new(model, params)
    }
}

fn violation_fields(i: u64, cfg: &EpisodeConfig, outcome: &Outcome) -> Vec<(String, String)> {
    let mut v = vec![
        ("episode".to_string(), i.to_string()),
        ("model".to_string(), cfg.controller.model.to_string()),
        ("a_n_max".to_string(), cfg.params.a_n_max.to_string()),
        ("a_n_min".to_string(), cfg.params.a_n_min.to_string()),
        ("a_s_min".to_string(), cfg.params.a_s_min.to_string()),
        ("T".to_string(), cfg.params.period.to_string()),
        ("x0".to_string(), cfg.initial.x.to_string()),
        ("v0".to_string(), cfg.initial.v.to_string()),
        ("stream".to_string(), cfg.stream.to_string()),
    ];
    if let Outcome::Violation { time, state } = outcome {
        v.push(("time".to_string(), time.to_string()));
        v.push(("x".to_string(), state.x.to_string()));
        v.push(("v".to_string(), state.v.to_string()));
    }
    v
}

fn run_set<F>(study: &str, n: u64, seed: u64, make: F) -> Result<StudyReport, SimError>
where
    F: Fn(u64) -> EpisodeConfig + Sync,
{
    let batch = run_batch(n, &make)?;
    let mut rep = StudyReport::new(study, seed);
    rep.samples = batch.episodes;
    rep.failures = batch.violations;
    rep.set_metric("aborted", batch.aborted);
    if let Some((i, verdict)) = batch.first_violation {
        rep.first_counterexample = Some(violation_fields(i, &make(i), &verdict.outcome));
    }
    Ok(rep)
}

/// Searches for guarantee violations of `model` with dense monitoring.
/// Odd episodes come from the witness family (episode 0 is the canonical
/// witness), even ones are random closed-loop runs.
pub fn falsify_msd(model: ModelId, n: u64, seed: u64) -> Result<StudyReport, SimError> {
    let ranges = ParamRanges::default();
    let mut rep = run_set("falsify", n, seed, |i| {
        if i == 0 || i % 2 == 1 {
            witness_family(model, i, seed)
        } else {
            random_episode(model, i, seed, &ranges, 20, 20)
        }
    })?;
    rep.set_config("model", model);
    Ok(rep)
}

pub fn falsify_wrong_msd(n: u64, seed: u64) -> Result<StudyReport, SimError> {
    falsify_msd(ModelId::M3Wrong, n, seed)
}

/// Runs the witness family twice, with dense and with end-of-step
/// monitoring, always requesting full periods.
pub fn endstep_study(model: ModelId, n: u64, seed: u64) -> Result<StudyReport, SimError> {
    let with_mode = |mode| {
        move |i| EpisodeConfig { monitor: mode, duration: DurationPolicy::AlwaysT, ..witness_family(model, i, seed) }
    };
    let dense = run_set("endstep", n, seed, with_mode(MonitorMode::Dense))?;
    let end = run_set("endstep", n, seed, with_mode(MonitorMode::EndStep))?;
    let mut rep = StudyReport::new("endstep", seed);
    rep.samples = n;
    rep.failures = dense.failures + end.failures;
    rep.first_counterexample = dense.first_counterexample.or(end.first_counterexample);
    rep.set_config("model", model);
    rep.set_metric("dense_violations", dense.failures);
    rep.set_metric("endstep_violations", end.failures);
    Ok(rep)
}

/// Episode `i` of [`guarantee_study`].
pub fn guarantee_episode(
    ctrl: Controller,
    relaxed: bool,
    ranges: &ParamRanges,
    i: u64,
    iterations: usize,
    dense: usize,
    seed: u64,
) -> EpisodeConfig {
    EpisodeConfig { controller: ctrl, relaxed, ..random_episode(ctrl.model, i, seed, ranges, iterations, dense) }
}

/// Batch of random closed-loop episodes with re-sampled constraints.
pub fn guarantee_study(
    ctrl: Controller,
    relaxed: bool,
    ranges: &ParamRanges,
    episodes: u64,
    iterations: usize,
    dense: usize,
    seed: u64,
) -> Result<StudyReport, SimError> {
    let mut rep = run_set("guarantee", episodes, seed, |i| {
        guarantee_episode(ctrl, relaxed, ranges, i, iterations, dense, seed)
    })?;
    rep.set_config("model", ctrl.model);
    rep.set_config("threshold", ctrl.threshold);
    rep.set_config("relaxed", relaxed);
    rep.set_config("iterations", iterations);
    rep.set_config("dense_samples", dense);
    Ok(rep)
}

/// Loop-invariant obligations over `tuples` sampled parameter tuples with
/// `per_tuple` state samples each.
pub fn obligation_study(
    ctrl: Controller,
    relaxed: bool,
    ranges: &ParamRanges,
    tuples: u64,
    per_tuple: u64,
    seed: u64,
) -> Result<StudyReport, SimError> {
    let parts = (0..tuples)
        .into_par_iter()
        .map(|i| {
            let mut env = EnvSampler::with_stream(seed ^ FAMILY_SALT.rotate_left(31), i);
            let p = ranges.sample_params(&mut env);
            check_invariant_obligations(&ctrl, relaxed, &p, per_tuple, seed, i).map(|r| (i, p, r))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = ObligationReport::default();
    let mut first = None;
    for (i, p, r) in parts {
        if first.is_none() {
            if let Some(cx) = r.first_counterexample {
                first = Some((i, p, cx));
            }
        }
        total.merge(r);
    }
    let mut rep = StudyReport::new("obligations", seed);
    rep.samples = total.samples;
    rep.failures = total.failures();
    rep.set_config("model", ctrl.model);
    rep.set_config("threshold", ctrl.threshold);
    rep.set_config("relaxed", relaxed);
    rep.set_config("tuples", tuples);
    rep.set_metric("init_failures", total.init_failures);
    rep.set_metric("step_failures", total.step_failures);
    rep.set_metric("guarantee_failures", total.guarantee_failures);
    if let Some((i, p, cx)) = first {
        let f = |x: f64| x.to_string();
        rep.first_counterexample = Some(vec![
            ("tuple".into(), i.to_string()),
            ("sample".into(), cx.sample.to_string()),
            ("obligation".into(), format!("{:?}", cx.obligation).to_lowercase()),
            ("a_n_max".into(), f(p.a_n_max)),
            ("a_n_min".into(), f(p.a_n_min)),
            ("a_s_min".into(), f(p.a_s_min)),
            ("T".into(), f(p.period)),
            ("x".into(), f(cx.pre.x)),
            ("v".into(), f(cx.pre.v)),
            ("x_c".into(), f(cx.constraint.x_c)),
            ("v_c".into(), f(cx.constraint.v_c)),
            ("a_n".into(), f(cx.a_n)),
            ("a_s".into(), f(cx.a_s)),
            ("duration".into(), f(cx.duration)),
            ("post_x".into(), f(cx.post.x)),
            ("post_v".into(), f(cx.post.v)),
        ]);
    }
    Ok(rep)
}

/// Model 1 approaching a fixed stop point at x_c = 28 m from rest, with the
/// nominal controller always requesting full acceleration.
pub fn approach_scenario() -> EpisodeConfig {
    let p = SystemParams { a_n_max: 2.0, a_n_min: 3.0, a_s_min: 5.0, period: 0.1 };
    EpisodeConfig {
        initial: VehicleState::new(0.0, 0.0),
        iterations: 600,
        duration: DurationPolicy::AlwaysT,
        constraint: ConstraintPolicy::Fixed(SafetyConstraint::stop_at(28.0)),
        nominal: NominalPolicy::Constant(p.a_n_max),
        ..EpisodeConfig::new(ModelId::M1, p)
    }
}

/// Re-runs the episode recorded in a study counterexample.
pub fn replay_episode(cfg: &EpisodeConfig) -> Result<Outcome, SimError> {
    Ok(run_episode(cfg)?.verdict.outcome)
}

/// Signs of the exact dominance margins; `None` when msd5 is infinite.
pub fn exact_margin_signs(tu: &Tuple, variant: ThresholdVariant) -> (i8, Option<i8>) {
    let sign = |m: &BigRational| {
        if m.is_zero() {
            0
        } else if m.is_negative() {
            -1
        } else {
            1
        }
    };
    let (a, b) = exact_margins(tu, variant);
    (sign(&a), b.as_ref().map(sign))
}
