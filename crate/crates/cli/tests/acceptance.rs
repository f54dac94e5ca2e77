//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and fails if any criterion fails.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use safelane_cli::crossval::cross_validate;
use safelane_cli::scenario::ScenarioFile;
use safelane_core::analysis::{
    canonical_witness, compare_metrics, endstep_study, falsify_wrong_msd, guarantee_study, obligation_study,
    ParamRanges,
};
use safelane_core::kinematics::evolve;
use safelane_core::simulator::{
    run_episode, ConstraintPolicy, DurationPolicy, EpisodeConfig, MonitorMode, NominalPolicy, Outcome,
};
use safelane_core::{Controller, ModelId, SafetyConstraint, SystemParams, ThresholdVariant, VehicleState};
use safelane_hp::{
    check_problem, eval_formula, gen, parse_problem, parse_program, replay, Event, ExplorationBudget, Problem,
    RunOutcome, Valuation,
};

const SEED: u64 = 20240601;

struct Line {
    id: u32,
    pass: bool,
    detail: String,
}

fn report(id: u32, pass: bool, detail: String) -> Line {
    // bypasses the test harness capture so the lines always show
    let _ = writeln!(
        std::io::stdout(),
        "acceptance criterion {id}: {} | {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    Line { id, pass, detail }
}

fn corpus(name: &str) -> Problem {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../hp/corpus").join(name);
    parse_problem(&fs::read_to_string(path).unwrap()).unwrap()
}

fn guarantee_invariance() -> Line {
    let start = Instant::now();
    let ranges = ParamRanges::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for model in ModelId::CORRECT {
        match guarantee_study(Controller::new(model), false, &ranges, 100_000, 50, 20, SEED) {
            Ok(rep) => {
                pass &= rep.failures == 0;
                parts.push(format!("{model} {}/{}", rep.failures, rep.samples));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{model} error {e}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(1, pass && secs < 300.0, format!("violations {} in {secs:.1} s", parts.join(", ")))
}

fn witness_crossing() -> Line {
    let mut notes = Vec::new();
    let falsifier = falsify_wrong_msd(10_000, SEED).map(|r| r.failures).unwrap_or(0);
    let mut pass = falsifier >= 1;
    notes.push(format!("falsifier {falsifier}/10000 violating episodes"));

    // x(t) = t - 1.5 t^2 = 0.1, smaller root; v = 1 - 3t
    let t_star = (1.0 - 0.4f64.sqrt()) / 3.0;
    let v_star = 1.0 - 3.0 * t_star;
    match run_episode(&canonical_witness(ModelId::M3Wrong)).map(|e| e.verdict.outcome) {
        Ok(Outcome::Violation { time, state }) => {
            pass &= (time - t_star).abs() <= 1e-6 && (state.v - v_star).abs() <= 1e-6;
            notes.push(format!("crossing t={time:.9} (oracle {t_star:.9}), v={:.9} (oracle {v_star:.9})", state.v));
        }
        other => {
            pass = false;
            notes.push(format!("faulty controller on witness: {other:?}"));
        }
    }
    match run_episode(&canonical_witness(ModelId::M3)) {
        Ok(ep) => {
            let last = ep.trace.last().unwrap().state;
            let ok = !ep.verdict.outcome.is_violation() && (last.x - 0.1).abs() <= 1e-9 && last.v == 0.0;
            pass &= ok;
            notes.push(format!("correct controller stops at x={} v={}", last.x, last.v));
        }
        Err(e) => {
            pass = false;
            notes.push(format!("correct controller error {e}"));
        }
    }
    report(2, pass, notes.join("; "))
}

fn endstep_hides_violations() -> Line {
    match endstep_study(ModelId::M3Wrong, 2000, SEED) {
        Ok(rep) => {
            let dense: u64 = rep.metric("dense_violations").unwrap().parse().unwrap();
            let end: u64 = rep.metric("endstep_violations").unwrap().parse().unwrap();
            report(3, end == 0 && dense >= 1, format!("witness family of 2000: dense {dense}, end-of-step {end}"))
        }
        Err(e) => report(3, false, e.to_string()),
    }
}

fn metric_dominance() -> Line {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for variant in [ThresholdVariant::AsWritten, ThresholdVariant::SignCorrected] {
        match compare_metrics(&ParamRanges::default(), 1_000_000, SEED, variant) {
            Ok(rep) => {
                let worst = rep.worst_margin.unwrap_or(f64::NEG_INFINITY);
                pass &= rep.failures == 0 && worst >= -1e-9;
                parts.push(format!(
                    "{variant}: {} tuples, failures {}, worst margin {worst:e}, exact rechecks {}",
                    rep.samples,
                    rep.failures,
                    rep.metric("exact_rechecks").unwrap_or("?")
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{variant}: {e}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(4, pass && secs < 120.0, format!("{} in {secs:.1} s", parts.join("; ")))
}

fn obligations() -> Line {
    let ranges = ParamRanges::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for model in ModelId::CORRECT {
        match obligation_study(Controller::new(model), false, &ranges, 1000, 10, SEED) {
            Ok(rep) => {
                pass &= rep.failures == 0 && rep.samples == 10_000;
                parts.push(format!("{model} {}/{}", rep.failures, rep.samples));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{model} error {e}"));
            }
        }
    }
    match obligation_study(Controller::new(ModelId::M3Wrong), false, &ranges, 1000, 10, SEED) {
        Ok(rep) => {
            let step: u64 = rep.metric("step_failures").unwrap().parse().unwrap();
            pass &= step >= 1;
            parts.push(format!("m3-wrong step failures {step}"));
        }
        Err(e) => {
            pass = false;
            parts.push(format!("m3-wrong error {e}"));
        }
    }
    report(5, pass, format!("failures {}", parts.join(", ")))
}

fn approach() -> Line {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/approach.toml");
    let cfg = ScenarioFile::parse(&fs::read_to_string(path).unwrap()).and_then(|s| s.to_config());
    let ep = match cfg.map(|c| run_episode(&c)) {
        Ok(Ok(ep)) => ep,
        Ok(Err(e)) => return report(6, false, e.to_string()),
        Err(e) => return report(6, false, e),
    };
    let last = ep.trace.last().unwrap();
    let first_intervention = ep.trace.iter().find(|r| r.intervened).map(|r| r.t);
    let pass = !ep.verdict.outcome.is_violation()
        && last.state.v == 0.0
        && last.state.x <= 28.0
        && 28.0 - last.state.x <= 0.5;
    report(
        6,
        pass,
        format!("final x={} v={}, first intervention at t={first_intervention:?}", last.state.x, last.state.v),
    )
}

fn kinematics_oracle() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let dt = 1e-5;
    let steps = 100_000;
    let (mut worst_x, mut worst_v) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let x0 = rng.random_range(-100.0..100.0);
        let v0 = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..40.0) };
        let a = rng.random_range(-10.0..4.0);
        let (mut x, mut v) = (x0, v0);
        for _ in 0..steps {
            let next = v + a * dt;
            if next < 0.0 {
                // rest reached inside this step
                x += v * (v / -a) / 2.0;
                v = 0.0;
                break;
            }
            x += (v + next) / 2.0 * dt;
            v = next;
        }
        let end = evolve(VehicleState::new(x0, v0), a, 1.0).state;
        worst_x = worst_x.max((end.x - x).abs());
        worst_v = worst_v.max((end.v - v).abs());
    }
    report(
        7,
        worst_x <= 1e-6 && worst_v <= 1e-6,
        format!("10000 segments, max |dx| = {worst_x:e} m, max |dv| = {worst_v:e} m/s"),
    )
}

/// State at the start of the last loop iteration of a counterexample.
fn last_iteration_start(p: &Problem, log: &[Event], horizon: f64) -> Option<Valuation> {
    let cut = log.iter().rposition(|e| *e == Event::LoopIter)?;
    let mut prefix = log[..cut].to_vec();
    prefix.push(Event::LoopExit);
    match replay(&p.program, &prefix, horizon).ok()? {
        RunOutcome::Completed(s) => Some(s),
        RunOutcome::Aborted => None,
    }
}

fn last_sample(log: &[Event], var: &str) -> Option<f64> {
    log.iter().rev().find_map(|e| match e {
        Event::Sample { var: v, value } if v == var => Some(*value),
        _ => None,
    })
}

fn interpreter_cross_validation() -> Line {
    let mut pass = true;
    let mut notes = Vec::new();
    for (file, model) in [("model1.hp", ModelId::M1), ("model3.hp", ModelId::M3)] {
        match cross_validate(&corpus(file), model, 1000, SEED, 1e-9) {
            Ok(rep) => {
                pass &= rep.mismatches.is_empty() && rep.samples == 1000;
                notes.push(format!(
                    "{model}: {} mismatches in {} ({} interventions, max |diff| {:e})",
                    rep.mismatches.len(),
                    rep.samples,
                    rep.interventions,
                    rep.max_abs_diff
                ));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("{model}: {e}"));
            }
        }
    }

    let wrong = corpus("model3-wrong.hp");
    let b = ExplorationBudget {
        loop_depth: 2,
        samples_per_nondet: 3,
        durations_per_ode: 3,
        dense_points: 8,
        seed: SEED,
        init_samples: 8,
        ..ExplorationBudget::default()
    };
    let cx = match check_problem(&wrong, &b) {
        Ok(v) => v.counterexample().cloned(),
        Err(e) => return report(8, false, format!("{}; m3-wrong: {e}", notes.join("; "))),
    };
    let Some(cx) = cx else {
        return report(8, false, format!("{}; m3-wrong: no counterexample", notes.join("; ")));
    };
    let replayed = matches!(
        replay(&wrong.program, &cx.log, b.ode_horizon),
        Ok(RunOutcome::Completed(ref s)) if s.iter().zip(&cx.state).all(|(a, b)| a.0 == b.0 && a.1.to_bits() == b.1.to_bits())
    );
    let violated = eval_formula(&wrong.post, &cx.state) == Ok(false);
    pass &= replayed && violated;
    notes.push(format!("m3-wrong counterexample replays exactly: {replayed}, violates post: {violated}"));

    // the same last step, run natively
    let native = last_iteration_start(&wrong, &cx.log, b.ode_horizon).and_then(|s| {
        let an = last_sample(&cx.log, "an")?;
        let xc = last_sample(&cx.log, "xc")?;
        let p = SystemParams { a_n_max: s["amax"], a_n_min: s["amin"], a_s_min: s["asmin"], period: s["T"] };
        let stops_early = s["v"] + an * p.period < 0.0;
        let cfg = EpisodeConfig {
            initial: VehicleState::new(s["x"], s["v"]),
            iterations: 1,
            duration: DurationPolicy::AlwaysT,
            constraint: ConstraintPolicy::Fixed(SafetyConstraint::stop_at(xc)),
            nominal: NominalPolicy::Constant(an),
            monitor: MonitorMode::Dense,
            ..EpisodeConfig::new(ModelId::M3Wrong, p)
        };
        Some((stops_early, run_episode(&cfg).map(|e| e.verdict.outcome.is_violation()).unwrap_or(false)))
    });
    let (stops_early, native_violation) = native.unwrap_or((false, false));
    pass &= stops_early && native_violation;
    notes.push(format!("request stops within the period: {stops_early}, native simulator violates: {native_violation}"));
    report(8, pass, notes.join("; "))
}

fn parser_round_trip() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut failures = 0;
    for _ in 0..10_000 {
        let depth = rng.random_range(1..=8);
        let p = gen::program(&mut rng, depth);
        if parse_program(&p.to_string()).as_ref() != Ok(&p) {
            failures += 1;
        }
    }
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../hp/corpus");
    let mut files = 0;
    let mut bad = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        files += 1;
        let text = fs::read_to_string(&path).unwrap();
        match parse_problem(&text) {
            Ok(p) if parse_problem(&p.to_string()).as_ref() == Ok(&p) => {}
            _ => bad.push(path.file_name().unwrap().to_string_lossy().into_owned()),
        }
    }
    report(
        9,
        failures == 0 && bad.is_empty() && files >= 6,
        format!("{failures} round-trip failures in 10000 programs; {files} corpus files, failing: {bad:?}"),
    )
}

#[test]
fn acceptance() {
    let lines = [
        guarantee_invariance(),
        witness_crossing(),
        endstep_hides_violations(),
        metric_dominance(),
        obligations(),
        approach(),
        kinematics_oracle(),
        interpreter_cross_validation(),
        parser_round_trip(),
    ];
    let failed: Vec<String> = lines.iter().filter(|l| !l.pass).map(|l| format!("{}: {}", l.id, l.detail)).collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
