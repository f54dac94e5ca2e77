//! Runs the controller block of a DSL model against the native controller.

use safelane_core::analysis::ParamRanges;
use safelane_core::environment::EnvSampler;
use safelane_core::{Controller, ModelId, SafetyConstraint, SystemParams, VehicleState};
use safelane_hp::{run, ExplorationBudget, Problem, Program, RunOutcome, Valuation};

/// The first nondeterministic choice in the loop body: the `ctrl` block.
pub fn controller_block(p: &Problem) -> Option<&Program> {
    fn find(p: &Program) -> Option<&Program> {
        match p {
            Program::Choice(..) => Some(p),
            Program::Seq(a, b) => find(a).or_else(|| find(b)),
            Program::Loop(body) => find(body),
            _ => None,
        }
    }
    find(&p.program)
}

pub fn valuation(s: &VehicleState, a_n: f64, c: &SafetyConstraint, p: &SystemParams) -> Valuation {
    [
        ("x", s.x),
        ("v", s.v),
        ("an", a_n),
        ("xc", c.x_c),
        ("vc", c.v_c),
        ("asmin", p.a_s_min),
        ("amin", p.a_n_min),
        ("amax", p.a_n_max),
        ("T", p.period),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// `as` chosen by the DSL block; `None` unless exactly one branch completes.
pub fn dsl_decision(block: &Program, s0: &Valuation) -> Result<Option<f64>, safelane_hp::ExecError> {
    let runs = run(block, s0, &ExplorationBudget::default())?;
    let done: Vec<&Valuation> = runs
        .runs
        .iter()
        .filter_map(|r| match &r.outcome {
            RunOutcome::Completed(s) => Some(s),
            RunOutcome::Aborted => None,
        })
        .collect();
    Ok(match done.as_slice() {
        [s] => s.get("as").copied(),
        _ => None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub index: u64,
    pub valuation: Valuation,
    pub native: f64,
    pub dsl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrossReport {
    pub samples: u64,
    pub interventions: u64,
    pub max_abs_diff: f64,
    pub mismatches: Vec<Mismatch>,
}

/// Compares `n` sampled decisions of `model` with the DSL block.
pub fn cross_validate(problem: &Problem, model: ModelId, n: u64, seed: u64, tol: f64) -> Result<CrossReport, String> {
    let block = controller_block(problem).ok_or("no controller choice in the program")?;
    let ctrl = Controller::new(model);
    let ranges = ParamRanges::default();
    let mut env = EnvSampler::new(seed);
    let mut rep = CrossReport::default();
    for i in 0..n {
        let p = ranges.sample_params(&mut env);
        let v = if env.chance(0.1) { 0.0 } else { env.uniform(0.0, 40.0) };
        let s = VehicleState::new(env.uniform(-50.0, 50.0), v);
        let a_n = env.sample_nominal(&p);
        let c = env.sample_constraint(&s, &p, model);
        let native = ctrl.decide(&s, a_n, &c, &p).map_err(|e| e.to_string())?;
        let val = valuation(&s, a_n, &c, &p);
        let dsl = dsl_decision(block, &val).map_err(|e| e.to_string())?;
        rep.samples += 1;
        rep.interventions += u64::from(native.intervened);
        match dsl {
            Some(a) if (a - native.a_s).abs() <= tol => rep.max_abs_diff = rep.max_abs_diff.max((a - native.a_s).abs()),
            _ => rep.mismatches.push(Mismatch { index: i, valuation: val, native: native.a_s, dsl }),
        }
    }
    Ok(rep)
}
