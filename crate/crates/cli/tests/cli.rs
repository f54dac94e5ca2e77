use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use safelane_cli::crossval::{controller_block, cross_validate, dsl_decision, valuation};
use safelane_core::controller::ctrl_m3;
use safelane_core::{ModelId, SafetyConstraint, SystemParams, VehicleState};
use safelane_hp::{parse_problem, Problem};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_safelane"))
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn scenario(name: &str) -> PathBuf {
    root().join("scenarios").join(name)
}

fn corpus(name: &str) -> PathBuf {
    root().join("../hp/corpus").join(name)
}

fn problem(name: &str) -> Problem {
    parse_problem(&fs::read_to_string(corpus(name)).unwrap()).unwrap()
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn last_row(csv: &Path) -> Vec<f64> {
    let text = fs::read_to_string(csv).unwrap();
    let line = text.lines().last().unwrap();
    line.split(',').map(|f| f.parse().unwrap()).collect()
}

#[test]
fn simulate_approach_ends_at_rest_before_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let o = run(bin().arg("simulate").arg(scenario("approach.toml")).arg("--out").arg(&out));
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,x,v,a_n,a_s,x_c,v_c,intervened");
    let row = last_row(&out);
    assert_eq!(row[2], 0.0);
    assert!(row[1] <= 28.0 && row[1] >= 27.5, "{row:?}");
    assert!(stdout(&o).contains("seed=0"));
}

#[test]
fn simulate_witness_reports_the_violation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let o = run(bin().arg("simulate").arg(scenario("witness.toml")).arg("--out").arg(&out));
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    let row = last_row(&out);
    // crossing of x = 0.1 under a = -3 from v = 1
    let t = (1.0 - 0.4f64.sqrt()) / 3.0;
    assert!((row[0] - t).abs() < 1e-6, "{row:?}");
    assert!((row[2] - 0.4f64.sqrt()).abs() < 1e-6, "{row:?}");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    assert_eq!(code(&run(bin().arg("simulate").arg(dir.path().join("missing.toml")).arg("--out").arg(&out))), 2);

    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(scenario("approach.toml")).unwrap();
    fs::write(&bad, text.replace("seed = 0", "seed = 0\nspeed = 3")).unwrap();
    assert_eq!(code(&run(bin().arg("simulate").arg(&bad).arg("--out").arg(&out))), 2);

    // starts beyond the admissible region
    fs::write(&bad, text.replace("x_c = 28.0", "x_c = -1.0")).unwrap();
    assert_eq!(code(&run(bin().arg("simulate").arg(&bad).arg("--out").arg(&out))), 2);
    assert!(!out.exists());

    assert_eq!(code(&run(bin().args(["check", "--model", "m1", "--bogus"]))), 2);
    assert_eq!(code(&run(bin().args(["check", "--model", "m9"]))), 2);
    assert_eq!(code(&run(&mut bin())), 2);

    let ranges = dir.path().join("ranges.toml");
    fs::write(&ranges, "a_n_min = [0.5, 6.0]\na_s_min = [4.0, 10.0]\n").unwrap();
    let o = run(bin().args(["compare", "--samples", "10"]).arg("--ranges").arg(&ranges));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("a_n_min < a_s_min"));

    let hp = dir.path().join("bad.hp");
    fs::write(&hp, "x := (").unwrap();
    assert_eq!(code(&run(bin().args(["hp", "check"]).arg(&hp))), 2);
    fs::write(&hp, "x := x + 1").unwrap();
    assert_eq!(code(&run(bin().args(["hp", "check"]).arg(&hp))), 2, "bare program needs --init/--post");
}

#[test]
fn check_passes_for_model_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin()
        .args(["check", "--model", "m1", "--episodes", "20000", "--tuples", "500", "--seed", "7"])
        .arg("--out-dir")
        .arg(dir.path()));
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("seed=7"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn check_fails_for_the_faulty_model_with_a_replayable_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin()
        .args(["check", "--model", "m3-wrong", "--episodes", "2000", "--tuples", "200"])
        .arg("--out-dir")
        .arg(dir.path()));
    assert_eq!(code(&o), 1);
    let text = stdout(&o);
    let replay = text.lines().find_map(|l| l.strip_prefix("replay=")).expect("replay path printed");
    let out = dir.path().join("replay.csv");
    let again = run(bin().arg("simulate").arg(replay).arg("--out").arg(&out));
    assert_eq!(code(&again), 1, "{}", stdout(&again));
    // same violation time as the study reported
    let time = text.lines().find_map(|l| l.strip_prefix("counterexample.time=")).unwrap();
    assert!(stdout(&again).contains(&format!("violation_t={time}")));
}

#[test]
fn compare_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.txt");
    let csv = dir.path().join("margins.csv");
    let o = run(bin()
        .args(["compare", "--samples", "5000", "--seed", "3"])
        .arg("--report")
        .arg(&report)
        .arg("--csv")
        .arg(&csv));
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let rep = fs::read_to_string(&report).unwrap();
    assert!(rep.contains("seed=3"));
    assert!(rep.contains("config.variant=as-written") && rep.contains("config.variant=sign-corrected"));
    let rows = fs::read_to_string(&csv).unwrap();
    assert!(rows.starts_with("variant,index,"));
    assert!(rows.lines().count() > 2 * 5000);
}

#[test]
fn identical_invocations_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let outputs: Vec<(Vec<u8>, Vec<u8>)> = (0..2)
        .map(|k| {
            let out = dir.path().join(format!("t{k}.csv"));
            let csv = dir.path().join(format!("m{k}.csv"));
            let a = run(bin().arg("simulate").arg(scenario("approach.toml")).arg("--out").arg(&out));
            let b = run(bin().args(["compare", "--samples", "2000"]).arg("--csv").arg(&csv));
            let mut files = fs::read(&out).unwrap();
            files.extend(fs::read(&csv).unwrap());
            let mut text = a.stdout;
            text.extend(b.stdout);
            (text, files)
        })
        .collect();
    // stdout mentions the output paths, which differ
    let strip = |v: &[u8]| {
        String::from_utf8_lossy(v).lines().filter(|l| !l.starts_with("trace=")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(strip(&outputs[0].0), strip(&outputs[1].0));
    assert_eq!(outputs[0].1, outputs[1].1);
}

#[test]
fn hp_check_on_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin().args(["hp", "check", "--init-samples", "8"]).arg(corpus("model1.hp")));
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("verdict=no-counterexample-found"));

    let replay = dir.path().join("cx.replay");
    let o = run(bin().args(["hp", "check", "--init-samples", "8"]).arg(corpus("model3-wrong.hp")).arg("--replay-out").arg(&replay));
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    let state = stdout(&o).lines().find_map(|l| l.strip_prefix("state ").map(str::to_string)).unwrap();
    let again = run(bin().args(["hp", "replay"]).arg(corpus("model3-wrong.hp")).arg(&replay));
    assert_eq!(code(&again), 1);
    assert!(stdout(&again).contains(&format!("final {state}")));
}

#[test]
fn hp_check_accepts_formulas_for_bare_programs() {
    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("count.hp");
    fs::write(&prog, "{a := *; ?(0 <= a & a <= 1); x := x + a}*").unwrap();
    let check = |post: &str| {
        code(&run(bin()
            .args(["hp", "check", "--init", "x = 0", "--post", post, "--depth", "3"])
            .arg(&prog)
            .arg("--replay-out")
            .arg(dir.path().join("r.replay"))))
    };
    assert_eq!(check("x <= 3"), 0);
    assert_eq!(check("x < 2.5"), 1);
}

#[test]
fn hp_run_prints_final_states() {
    let o = run(bin()
        .args(["hp", "run"])
        .arg(corpus("model1.hp"))
        .args(["--set", "x=0", "--set", "v=1", "--set", "xc=5", "--set", "asmin=5", "--set", "amin=3"])
        .args(["--set", "amax=2", "--set", "T=0.5", "--depth", "1", "--samples", "2", "--dense-points", "0"]));
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).lines().any(|l| l.starts_with("final ")));
}

#[test]
fn dsl_controllers_match_native_decisions() {
    for (file, model) in [("model1.hp", ModelId::M1), ("model3.hp", ModelId::M3)] {
        let rep = cross_validate(&problem(file), model, 1000, 11, 1e-9).unwrap();
        assert_eq!(rep.samples, 1000);
        assert!(rep.mismatches.is_empty(), "{file}: {:?}", rep.mismatches.first());
        // both branches exercised
        assert!(rep.interventions > 50 && rep.interventions < 950, "{file}: {}", rep.interventions);
    }
}

#[test]
fn dsl_controller_on_the_canonical_witness() {
    let p = SystemParams { a_n_max: 2.0, a_n_min: 3.0, a_s_min: 5.0, period: 1.0 };
    let s = VehicleState::new(0.0, 1.0);
    let c = SafetyConstraint::stop_at(0.1);
    let val = valuation(&s, -3.0, &c, &p);
    let right = problem("model3.hp");
    let wrong = problem("model3-wrong.hp");
    // the stopping branch needs 1/6 m, so Model 3 brakes; the faulty one lets -3 through
    assert_eq!(dsl_decision(controller_block(&right).unwrap(), &val).unwrap(), Some(-5.0));
    assert_eq!(ctrl_m3(&s, -3.0, &c, &p).a_s, -5.0);
    assert_eq!(dsl_decision(controller_block(&wrong).unwrap(), &val).unwrap(), Some(-3.0));
}
