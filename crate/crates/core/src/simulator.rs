//! Closed-loop execution of `(env; ctrl; plant)*` with dense-time guarantee
//! monitoring, plus loop-invariant obligation checking.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::controller::{ctrl_relaxed, ControlError, ControlOutput, Controller, SafetyConstraint};
use crate::environment::EnvSampler;
use crate::kinematics::{crossing_time, evolve, position_at, velocity_at, VehicleState};
use crate::model::{admissible, guarantee_holds, invariant_holds, ModelId, INVARIANT_TOL, POSITION_TOL, VELOCITY_TOL};
use crate::threat::{ParamError, SystemParams, ThresholdVariant};

/// One row of a trace: the state at time `t` together with the decision
/// that led to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub state: VehicleState,
    pub a_n: f64,
    pub a_s: f64,
    pub constraint: SafetyConstraint,
    pub intervened: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Safe,
    /// Earliest detected point with `x >= x_c` and `v > v_c`.
    Violation { time: f64, state: VehicleState },
    BudgetExhausted,
}

impl Outcome {
    pub fn is_violation(&self) -> bool {
        matches!(self, Self::Violation { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub episodes: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DurationPolicy {
    /// Any duration in `[0, T]`, with the endpoints drawn often.
    #[default]
    Sampled,
    /// Always request exactly `T`. The stop event may still end a step early.
    AlwaysT,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MonitorMode {
    /// Analytic crossing events plus evenly spaced samples in every step.
    #[default]
    Dense,
    /// Only the state at the end of each step.
    EndStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ConstraintPolicy {
    /// Fresh admissible constraint every iteration.
    #[default]
    Resample,
    /// Constant constraint. The episode ends once the env test rejects it.
    Fixed(SafetyConstraint),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum NominalPolicy {
    #[default]
    Random,
    Constant(f64),
    /// Piecewise-constant `(start_time, a_n)` pairs, sorted by start time.
    /// The first entry applies before its start time as well.
    Schedule(Vec<(f64, f64)>),
}

impl NominalPolicy {
    fn at(&self, t: f64, env: &mut EnvSampler, p: &SystemParams) -> f64 {
        match self {
            Self::Random => env.sample_nominal(p),
            Self::Constant(a) => *a,
            Self::Schedule(steps) => {
                let idx = steps.partition_point(|&(start, _)| start <= t);
                steps[idx.saturating_sub(1)].1
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub controller: Controller,
    /// Use the relaxed intervention with a random chooser.
    pub relaxed: bool,
    pub params: SystemParams,
    pub initial: VehicleState,
    /// Loop iterations.
    pub iterations: usize,
    /// Monitor samples per step, endpoints included.
    pub dense_samples: usize,
    pub duration: DurationPolicy,
    pub constraint: ConstraintPolicy,
    pub nominal: NominalPolicy,
    pub monitor: MonitorMode,
    pub seed: u64,
    /// Stream of the seeded generator; batches give each episode its own.
    pub stream: u64,
}

impl EpisodeConfig {
    pub fn new(model: ModelId, params: SystemParams) -> Self {
        Self {
            controller: Controller::new(model),
            relaxed: false,
            params,
            initial: VehicleState::new(0.0, 0.0),
            iterations: 50,
            dense_samples: 20,
            duration: DurationPolicy::Sampled,
            constraint: ConstraintPolicy::Resample,
            nominal: NominalPolicy::Random,
            monitor: MonitorMode::Dense,
            seed: 0,
            stream: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.controller.check_params(&self.params)?;
        let p = &self.params;
        if self.dense_samples < 2 {
            return Err(SimError::Config(format!("dense samples must be at least 2, got {}", self.dense_samples)));
        }
        if !self.initial.is_valid() {
            return Err(SimError::Config(format!("initial state {:?} outside the domain v >= 0", self.initial)));
        }
        if let ConstraintPolicy::Fixed(c) = self.constraint {
            if !c.is_valid() {
                return Err(SimError::Config(format!("invalid constraint {c:?}")));
            }
            if !self.controller.model.uses_critical_velocity() && c.v_c != 0.0 {
                return Err(SimError::Config(format!("model {} requires v_c = 0", self.controller.model)));
            }
        }
        let check = |a: f64| {
            if p.admits_nominal(a) {
                Ok(())
            } else {
                Err(SimError::Config(format!("nominal acceleration {a} outside [{}, {}]", -p.a_n_min, p.a_n_max)))
            }
        };
        match &self.nominal {
            NominalPolicy::Random => {}
            NominalPolicy::Constant(a) => check(*a)?,
            NominalPolicy::Schedule(steps) => {
                if steps.is_empty() {
                    return Err(SimError::Config("empty nominal schedule".into()));
                }
                if steps.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(SimError::Config("nominal schedule times must be strictly increasing".into()));
                }
                for &(_, a) in steps {
                    check(a)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("initial state x = {x}, v = {v} is not admissible for constraint x_c = {x_c}, v_c = {v_c}")]
    InitViolation { x: f64, v: f64, x_c: f64, v_c: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub trace: Vec<TraceRecord>,
    pub verdict: Verdict,
    /// The fixed constraint became inadmissible and the episode ended early.
    pub aborted: bool,
}

fn violates(s: &VehicleState, c: &SafetyConstraint) -> bool {
    s.x >= c.x_c + POSITION_TOL && s.v > c.v_c + VELOCITY_TOL
}

/// Earliest violation on one constant-acceleration segment of length
/// `elapsed` (no stop event inside the segment).
pub fn monitor_segment(
    start: &VehicleState,
    a: f64,
    elapsed: f64,
    c: &SafetyConstraint,
    mode: MonitorMode,
    samples: usize,
) -> Option<(f64, VehicleState)> {
    let at = |t: f64| {
        if t >= elapsed {
            evolve(*start, a, elapsed).state
        } else {
            VehicleState::new(position_at(start.x, start.v, a, t), velocity_at(start.v, a, t).max(0.0))
        }
    };
    if mode == MonitorMode::EndStep {
        let end = at(elapsed);
        return violates(&end, c).then_some((elapsed, end));
    }
    let mut best: Option<(f64, VehicleState)> = None;
    if let Some(tc) = crossing_time(*start, a, c.x_c + POSITION_TOL, elapsed) {
        let threshold = c.v_c + VELOCITY_TOL;
        // v is monotone on the segment, so the earliest violating time is the
        // crossing itself or the moment v rises above the threshold
        let t_hit = if a > 0.0 && velocity_at(start.v, a, tc) <= threshold {
            let t_v = (threshold - start.v) / a;
            (t_v <= elapsed).then_some(t_v.max(tc))
        } else {
            Some(tc)
        };
        if let Some(t) = t_hit {
            let s = at(t);
            if s.v > threshold {
                best = Some((t, s));
            } else if a > 0.0 {
                let end = at(elapsed);
                if violates(&end, c) {
                    best = Some((elapsed, end));
                }
            }
        }
    }
    let n = samples.max(2);
    for k in 0..n {
        let t = elapsed * k as f64 / (n - 1) as f64;
        if best.is_some_and(|(tb, _)| tb <= t) {
            break;
        }
        let s = at(t);
        if violates(&s, c) {
            best = Some((t, s));
            break;
        }
    }
    best
}

/// Checks every record and every segment between consecutive records
/// against `c`, using the analytic crossing events.
pub fn check_guarantee(trace: &[TraceRecord], c: &SafetyConstraint) -> Verdict {
    let outcome = scan_trace(trace, c);
    Verdict { outcome, episodes: 1, seed: 0 }
}

fn scan_trace(trace: &[TraceRecord], c: &SafetyConstraint) -> Outcome {
    let Some(first) = trace.first() else {
        return Outcome::Safe;
    };
    if violates(&first.state, c) {
        return Outcome::Violation { time: first.t, state: first.state };
    }
    for w in trace.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        let dt = next.t - prev.t;
        if let Some((t, state)) = monitor_segment(&prev.state, next.a_s, dt, c, MonitorMode::Dense, 2) {
            return Outcome::Violation { time: prev.t + t, state };
        }
        if violates(&next.state, c) {
            return Outcome::Violation { time: next.t, state: next.state };
        }
    }
    Outcome::Safe
}

fn sample_duration(policy: DurationPolicy, env: &mut EnvSampler, period: f64) -> f64 {
    match policy {
        DurationPolicy::AlwaysT => period,
        DurationPolicy::Sampled => {
            let u: f64 = env.rng().random();
            if u < 0.1 {
                0.0
            } else if u < 0.3 {
                period
            } else {
                env.uniform(0.0, period)
            }
        }
    }
}

fn decide(cfg: &EpisodeConfig, env: &mut EnvSampler, s: &VehicleState, a_n: f64, c: &SafetyConstraint) -> Result<ControlOutput, SimError> {
    let p = &cfg.params;
    if !cfg.relaxed {
        return Ok(cfg.controller.decide(s, a_n, c, p)?);
    }
    let mut pick = |lo: f64, hi: f64| env.uniform(lo, hi);
    Ok(ctrl_relaxed(&cfg.controller, s, a_n, c, p, &mut pick)?.output)
}

/// Runs one episode.
pub fn run_episode(cfg: &EpisodeConfig) -> Result<Episode, SimError> {
    cfg.validate()?;
    let p = cfg.params;
    let model = cfg.controller.model;
    let mut env = EnvSampler::with_stream(cfg.seed, cfg.stream);
    let mut state = cfg.initial;
    let mut t = 0.0;
    let first_c = match cfg.constraint {
        ConstraintPolicy::Fixed(c) => {
            if !admissible(model, &state, &c, &p) {
                return Err(SimError::InitViolation { x: state.x, v: state.v, x_c: c.x_c, v_c: c.v_c });
            }
            c
        }
        ConstraintPolicy::Resample => env.sample_constraint(&state, &p, model),
    };
    let mut trace = vec![TraceRecord { t, state, a_n: 0.0, a_s: 0.0, constraint: first_c, intervened: false }];
    let verdict = |outcome| Verdict { outcome, episodes: 1, seed: cfg.seed };

    let mut c = first_c;
    for k in 0..cfg.iterations {
        match cfg.constraint {
            ConstraintPolicy::Fixed(_) => {
                if !admissible(model, &state, &c, &p) {
                    return Ok(Episode { trace, verdict: verdict(Outcome::Safe), aborted: true });
                }
            }
            ConstraintPolicy::Resample => {
                if k > 0 {
                    c = env.sample_constraint(&state, &p, model);
                }
            }
        }
        let a_n = cfg.nominal.at(t, &mut env, &p);
        let out = decide(cfg, &mut env, &state, a_n, &c)?;
        let dt = sample_duration(cfg.duration, &mut env, p.period);
        let step = evolve(state, out.a_s, dt);
        let record = |t, state| TraceRecord { t, state, a_n, a_s: out.a_s, constraint: c, intervened: out.intervened };
        if let Some((tv, sv)) = monitor_segment(&state, out.a_s, step.elapsed, &c, cfg.monitor, cfg.dense_samples) {
            trace.push(record(t + tv, sv));
            return Ok(Episode { trace, verdict: verdict(Outcome::Violation { time: t + tv, state: sv }), aborted: false });
        }
        t += step.elapsed;
        state = step.state;
        trace.push(record(t, state));
    }
    Ok(Episode { trace, verdict: verdict(Outcome::Safe), aborted: false })
}

/// Result of a batch of independent episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub episodes: u64,
    pub violations: u64,
    pub aborted: u64,
    /// Smallest violating episode index and its verdict.
    pub first_violation: Option<(u64, Verdict)>,
}

/// Runs `n` episodes built by `make(index)` in parallel. Aggregation does
/// not depend on scheduling.
pub fn run_batch<F>(n: u64, make: F) -> Result<BatchResult, SimError>
where
    F: Fn(u64) -> EpisodeConfig + Sync,
{
    let results: Vec<Result<(u64, bool, Verdict), SimError>> = (0..n)
        .into_par_iter()
        .map(|i| run_episode(&make(i)).map(|e| (i, e.aborted, e.verdict)))
        .collect();
    let mut batch = BatchResult { episodes: n, violations: 0, aborted: 0, first_violation: None };
    for r in results {
        let (i, aborted, verdict) = r?;
        if aborted {
            batch.aborted += 1;
        }
        if verdict.outcome.is_violation() {
            batch.violations += 1;
            if batch.first_violation.is_none() {
                batch.first_violation = Some((i, verdict));
            }
        }
    }
    Ok(batch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Obligation {
    /// init implies the invariant.
    Init,
    /// The invariant survives one env; ctrl; plant step.
    Step,
    /// The invariant implies the guarantee.
    Guarantee,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObligationCounterexample {
    pub obligation: Obligation,
    pub sample: u64,
    pub pre: VehicleState,
    pub constraint: SafetyConstraint,
    pub a_n: f64,
    pub a_s: f64,
    pub duration: f64,
    pub post: VehicleState,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObligationReport {
    pub samples: u64,
    pub init_failures: u64,
    pub step_failures: u64,
    pub guarantee_failures: u64,
    pub first_counterexample: Option<ObligationCounterexample>,
}

impl ObligationReport {
    pub fn failures(&self) -> u64 {
        self.init_failures + self.step_failures + self.guarantee_failures
    }

    fn record(&mut self, cx: ObligationCounterexample) {
        match cx.obligation {
            Obligation::Init => self.init_failures += 1,
            Obligation::Step => self.step_failures += 1,
            Obligation::Guarantee => self.guarantee_failures += 1,
        }
        if self.first_counterexample.is_none() {
            self.first_counterexample = Some(cx);
        }
    }

    pub fn merge(&mut self, other: ObligationReport) {
        self.samples += other.samples;
        self.init_failures += other.init_failures;
        self.step_failures += other.step_failures;
        self.guarantee_failures += other.guarantee_failures;
        if self.first_counterexample.is_none() {
            self.first_counterexample = other.first_counterexample;
        }
    }
}

/// Durations checked in the step obligation: `k T / 20` for `k = 0..=20`.
pub const STEP_DURATIONS: usize = 21;

// velocity biased towards the regime where a nominal braking request stops
// the vehicle within one period
fn sample_speed(env: &mut EnvSampler, p: &SystemParams) -> f64 {
    match env.rng().random_range(0..10u32) {
        0 => 0.0,
        1..=4 => env.uniform(0.0, p.a_n_min * p.period),
        _ => env.uniform(0.0, 40.0),
    }
}

/// Spot-checks the three loop-invariant obligations on `n_samples` sampled
/// states and constraints.
pub fn check_invariant_obligations(
    ctrl: &Controller,
    relaxed: bool,
    p: &SystemParams,
    n_samples: u64,
    seed: u64,
    stream: u64,
) -> Result<ObligationReport, SimError> {
    ctrl.check_params(p)?;
    let model = ctrl.model;
    let mut env = EnvSampler::with_stream(seed, stream);
    let mut report = ObligationReport { samples: n_samples, ..Default::default() };
    let tol = INVARIANT_TOL;
    for i in 0..n_samples {
        let blank = |obligation, pre, constraint| ObligationCounterexample {
            obligation,
            sample: i,
            pre,
            constraint,
            a_n: 0.0,
            a_s: 0.0,
            duration: 0.0,
            post: pre,
        };

        // (i) init: an initial state with an admissible constraint
        let s0 = VehicleState::new(env.uniform(-50.0, 50.0), sample_speed(&mut env, p));
        let c0 = env.sample_constraint(&s0, p, model);
        if !invariant_holds(model, &s0, &c0, p, tol) {
            report.record(blank(Obligation::Init, s0, c0));
        }

        // (ii) step: env keeps or re-samples the constraint, then ctrl and plant
        let pre = VehicleState::new(env.uniform(-50.0, 50.0), sample_speed(&mut env, p));
        let mut c = env.sample_constraint(&pre, p, model);
        if env.chance(0.5) {
            c = env.sample_constraint(&pre, p, model);
        }
        if admissible(model, &pre, &c, p) && invariant_holds(model, &pre, &c, p, 0.0) {
            let a_n = env.sample_nominal(p);
            let out = if relaxed {
                let mut pick = |lo: f64, hi: f64| env.uniform(lo, hi);
                ctrl_relaxed(ctrl, &pre, a_n, &c, p, &mut pick)?.output
            } else {
                ctrl.decide(&pre, a_n, &c, p)?
            };
            for k in 0..STEP_DURATIONS {
                let d = p.period * k as f64 / (STEP_DURATIONS - 1) as f64;
                let post = evolve(pre, out.a_s, d).state;
                if !invariant_holds(model, &post, &c, p, tol) {
                    report.record(ObligationCounterexample {
                        obligation: Obligation::Step,
                        sample: i,
                        pre,
                        constraint: c,
                        a_n,
                        a_s: out.a_s,
                        duration: d,
                        post,
                    });
                    break;
                }
            }
        }

        // (iii) guarantee: invariant states, half of them at or past x_c
        let (s, c) = sample_invariant_state(&mut env, p, model);
        if invariant_holds(model, &s, &c, p, 0.0) && !guarantee_holds(&s, &c) {
            report.record(blank(Obligation::Guarantee, s, c));
        }
    }
    Ok(report)
}

fn sample_invariant_state(env: &mut EnvSampler, p: &SystemParams, model: ModelId) -> (VehicleState, SafetyConstraint) {
    let v_c = if model.uses_critical_velocity() { env.uniform(0.0, 30.0) } else { 0.0 };
    let reach = v_c * v_c / (2.0 * p.a_s_min);
    let gap = if env.chance(0.5) {
        env.uniform(-(reach + 5.0), 0.0)
    } else {
        env.uniform(0.0, 50.0)
    };
    let v_sq = if model.uses_critical_velocity() {
        2.0 * p.a_s_min * gap + v_c * v_c
    } else if gap > 0.0 {
        2.0 * p.a_s_min * gap
    } else {
        0.0
    };
    let v_max = v_sq.max(0.0).sqrt();
    let v = if env.chance(0.3) { v_max } else { env.uniform(0.0, v_max) };
    let x = env.uniform(-50.0, 50.0);
    (VehicleState::new(x, v), SafetyConstraint::new(x + gap, v_c))
}

/// Same as [`check_invariant_obligations`] with the default threshold.
pub fn check_model_obligations(model: ModelId, p: &SystemParams, n_samples: u64, seed: u64) -> Result<ObligationReport, SimError> {
    check_invariant_obligations(&Controller::with_threshold(model, ThresholdVariant::AsWritten), false, p, n_samples, seed, 0)
}
