//! Subcommands. Each returns an [`Status`] or a usage/config error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use safelane_core::analysis::{
    compare_metrics_rows, guarantee_episode, guarantee_study, obligation_study, Interval, MarginRow, ParamRanges,
    StudyReport,
};
use safelane_core::simulator::{run_episode, Outcome};
use safelane_core::{Controller, ModelId, ThresholdVariant};
use safelane_hp::{
    check_box, eval_formula, parse_formula, parse_problem, parse_program, parse_replay, replay, run, write_replay,
    ExplorationBudget, Formula, Program, ReplayLog, RunOutcome, Valuation, Verdict,
};

use crate::output::{num, trace_csv, write_atomic};
use crate::scenario::ScenarioFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Self::Pass => 0,
            Self::Fail => 1,
        }
    }

    fn from_pass(pass: bool) -> Self {
        if pass {
            Self::Pass
        } else {
            Self::Fail
        }
    }
}

/// Usage or configuration error (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

impl UsageError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Self(format!("{}: {e}", path.display()))
    }
}

type CmdResult = Result<Status, UsageError>;

#[derive(Debug, Parser)]
#[command(name = "safelane", version, about = "Longitudinal safety controllers: simulation, falsification and hybrid-program checking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one closed-loop episode from a scenario file and write its trace.
    Simulate(SimulateArgs),
    /// Batch guarantee and loop-invariant checking for one model.
    Check(CheckArgs),
    /// Compare the threat metrics of Models 1, 3 and 5 on random tuples.
    Compare(CompareArgs),
    /// Hybrid-program interpreter.
    #[command(subcommand)]
    Hp(HpCommand),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub scenario: PathBuf,
    /// Trace CSV output path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: ModelId,
    #[arg(long, default_value_t = 10_000)]
    pub episodes: u64,
    #[arg(long, default_value_t = 50)]
    pub iterations: usize,
    /// Monitor samples per step.
    #[arg(long, default_value_t = 20)]
    pub dense: usize,
    /// Parameter tuples for the obligation check.
    #[arg(long, default_value_t = 1000)]
    pub tuples: u64,
    /// State samples per tuple.
    #[arg(long, default_value_t = 10)]
    pub per_tuple: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_threshold, default_value = "as-written")]
    pub threshold: ThresholdVariant,
    /// Use the relaxed intervention.
    #[arg(long)]
    pub relaxed: bool,
    /// Directory for counterexample files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    AsWritten,
    SignCorrected,
    Both,
}

impl VariantArg {
    fn variants(self) -> Vec<ThresholdVariant> {
        match self {
            Self::AsWritten => vec![ThresholdVariant::AsWritten],
            Self::SignCorrected => vec![ThresholdVariant::SignCorrected],
            Self::Both => vec![ThresholdVariant::AsWritten, ThresholdVariant::SignCorrected],
        }
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// TOML file with `name = [lo, hi]` entries overriding the default ranges.
    #[arg(long)]
    pub ranges: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = VariantArg::Both)]
    pub variant: VariantArg,
    /// Write the key=value report here as well as to stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write every margin row as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum HpCommand {
    /// Execute a program from given values and print every final state.
    Run(HpRunArgs),
    /// Search for a counterexample to `init -> [program] post`.
    Check(HpCheckArgs),
    /// Re-execute a replay file.
    Replay(HpReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BudgetArgs {
    /// Loop iterations explored per loop.
    #[arg(long, default_value_t = 2)]
    pub depth: u32,
    /// Values tried per nondeterministic assignment.
    #[arg(long, default_value_t = 3)]
    pub samples: u32,
    /// Durations tried per ODE.
    #[arg(long, default_value_t = 3)]
    pub durations: u32,
    /// Extra dense durations per ODE, checked but not continued.
    #[arg(long, default_value_t = 8)]
    pub dense_points: u32,
    /// Initial states sampled from `init`.
    #[arg(long, default_value_t = 16)]
    pub init_samples: u32,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_nodes: u64,
    /// Range used for one-sided nondeterministic bounds.
    #[arg(long, default_value_t = 100.0)]
    pub span: f64,
    /// Longest ODE duration considered.
    #[arg(long, default_value_t = 100.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl BudgetArgs {
    pub fn budget(&self) -> ExplorationBudget {
        ExplorationBudget {
            loop_depth: self.depth,
            samples_per_nondet: self.samples,
            durations_per_ode: self.durations,
            dense_points: self.dense_points,
            seed: self.seed,
            max_nodes: self.max_nodes,
            nondet_span: self.span,
            ode_horizon: self.horizon,
            init_samples: self.init_samples,
        }
    }
}

#[derive(Debug, Args)]
pub struct HpRunArgs {
    /// Program file, or a full `init -> [program] post` file.
    pub file: PathBuf,
    /// Initial value, `name=value`; repeatable.
    #[arg(long = "set", value_parser = parse_binding)]
    pub set: Vec<(String, f64)>,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Debug, Args)]
pub struct HpCheckArgs {
    pub file: PathBuf,
    /// Initial condition; overrides the file's.
    #[arg(long)]
    pub init: Option<String>,
    /// Postcondition; overrides the file's.
    #[arg(long)]
    pub post: Option<String>,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Where to write the replay file of a counterexample.
    #[arg(long, default_value = "counterexample.replay")]
    pub replay_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HpReplayArgs {
    pub file: PathBuf,
    pub replay: PathBuf,
}

fn parse_model(s: &str) -> Result<ModelId, String> {
    s.parse()
}

fn parse_threshold(s: &str) -> Result<ThresholdVariant, String> {
    s.parse()
}

fn parse_binding(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let x: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    if !x.is_finite() {
        return Err(format!("`{v}` is not finite"));
    }
    Ok((k.trim().to_string(), x))
}

fn read(path: &Path) -> Result<String, UsageError> {
    fs::read_to_string(path).map_err(|e| UsageError::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<(), UsageError> {
    write_atomic(path, contents).map_err(|e| UsageError::io(path, e))
}

pub fn execute(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Check(a) => check(&a),
        Command::Compare(a) => compare(&a),
        Command::Hp(HpCommand::Run(a)) => hp_run(&a),
        Command::Hp(HpCommand::Check(a)) => hp_check(&a),
        Command::Hp(HpCommand::Replay(a)) => hp_replay(&a),
    }
}

pub fn simulate(a: &SimulateArgs) -> CmdResult {
    let text = read(&a.scenario)?;
    let scenario = ScenarioFile::parse(&text).map_err(|e| UsageError(format!("{}: {e}", a.scenario.display())))?;
    let cfg = scenario.to_config().map_err(|e| UsageError(format!("{}: {e}", a.scenario.display())))?;
    let ep = run_episode(&cfg).map_err(|e| UsageError(format!("{}: {e}", a.scenario.display())))?;
    write(&a.out, &trace_csv(&ep.trace))?;
    let last = ep.trace.last().expect("trace has the initial row");
    println!("seed={}", cfg.seed);
    println!("model={}", cfg.controller.model);
    println!("steps={}", ep.trace.len() - 1);
    println!("aborted={}", ep.aborted);
    println!("final_t={}", num(last.t));
    println!("final_x={}", num(last.state.x));
    println!("final_v={}", num(last.state.v));
    println!("trace={}", a.out.display());
    match ep.verdict.outcome {
        Outcome::Violation { time, state } => {
            println!("outcome=violation");
            println!("violation_t={}", num(time));
            println!("violation_x={}", num(state.x));
            println!("violation_v={}", num(state.v));
            Ok(Status::Fail)
        }
        Outcome::Safe | Outcome::BudgetExhausted => {
            println!("outcome=safe");
            Ok(Status::Pass)
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), UsageError> {
    fs::create_dir_all(dir).map_err(|e| UsageError::io(dir, e))
}

pub fn check(a: &CheckArgs) -> CmdResult {
    let ctrl = Controller::with_threshold(a.model, a.threshold);
    let ranges = ParamRanges::default();
    let sim_err = |e: safelane_core::simulator::SimError| UsageError(e.to_string());
    let g = guarantee_study(ctrl, a.relaxed, &ranges, a.episodes, a.iterations, a.dense, a.seed).map_err(sim_err)?;
    let o = obligation_study(ctrl, a.relaxed, &ranges, a.tuples, a.per_tuple, a.seed).map_err(sim_err)?;
    print!("{}", g.to_kv());
    print!("{}", o.to_kv());

    if let Some(cx) = &g.first_counterexample {
        let episode: u64 = field(cx, "episode").parse().expect("episode index");
        let cfg = guarantee_episode(ctrl, a.relaxed, &ranges, episode, a.iterations, a.dense, a.seed);
        create_dir(&a.out_dir)?;
        let path = a.out_dir.join(format!("{}-guarantee-{}.toml", a.model, a.seed));
        let header = format!("# guarantee violation, episode {episode} of seed {}\n", a.seed);
        write(&path, &(header + &ScenarioFile::from_config(&cfg).to_toml()))?;
        println!("replay={}", path.display());
    }
    if let Some(cx) = &o.first_counterexample {
        create_dir(&a.out_dir)?;
        let path = a.out_dir.join(format!("{}-obligation-{}.txt", a.model, a.seed));
        let mut s = String::new();
        for (k, v) in cx {
            let _ = writeln!(s, "{k}={v}");
        }
        write(&path, &s)?;
        println!("obligation_counterexample={}", path.display());
    }
    Ok(Status::from_pass(g.passed() && o.passed()))
}

fn field<'a>(cx: &'a [(String, String)], key: &str) -> &'a str {
    cx.iter().find(|(k, _)| k == key).map_or("", |(_, v)| v.as_str())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RangesFile {
    a_s_min: Option<[f64; 2]>,
    a_n_min: Option<[f64; 2]>,
    a_n_max: Option<[f64; 2]>,
    #[serde(rename = "T")]
    period: Option<[f64; 2]>,
    v: Option<[f64; 2]>,
    a_n: Option<[f64; 2]>,
}

pub fn load_ranges(text: &str) -> Result<ParamRanges, String> {
    let f: RangesFile = toml::from_str(text).map_err(|e| e.to_string())?;
    let mut r = ParamRanges::default();
    let set = |slot: &mut Interval, v: Option<[f64; 2]>| {
        if let Some([lo, hi]) = v {
            *slot = Interval::new(lo, hi);
        }
    };
    set(&mut r.a_s_min, f.a_s_min);
    set(&mut r.a_n_min, f.a_n_min);
    set(&mut r.a_n_max, f.a_n_max);
    set(&mut r.period, f.period);
    set(&mut r.v, f.v);
    set(&mut r.a_n, f.a_n);
    r.validate().map_err(|e| e.to_string())?;
    Ok(r)
}

pub fn compare(a: &CompareArgs) -> CmdResult {
    let ranges = match &a.ranges {
        Some(path) => load_ranges(&read(path)?).map_err(|e| UsageError(format!("{}: {e}", path.display())))?,
        None => ParamRanges::default(),
    };
    let mut reports: Vec<StudyReport> = Vec::new();
    let mut csv = a.csv.as_ref().map(|_| format!("variant,{}\n", MarginRow::CSV_HEADER));
    for variant in a.variant.variants() {
        let (rep, rows) = compare_metrics_rows(&ranges, a.samples, a.seed, variant, csv.is_some())
            .map_err(|e| UsageError(e.to_string()))?;
        if let Some(out) = csv.as_mut() {
            for row in &rows {
                let _ = writeln!(out, "{variant},{}", row.csv_line());
            }
        }
        reports.push(rep);
    }
    let text: String = reports.iter().map(StudyReport::to_kv).collect::<Vec<_>>().join("\n");
    print!("{text}");
    if let Some(path) = &a.report {
        write(path, &text)?;
    }
    if let (Some(path), Some(out)) = (&a.csv, &csv) {
        write(path, out)?;
    }
    Ok(Status::from_pass(reports.iter().all(StudyReport::passed)))
}

/// A full problem, or a bare program.
enum HpFile {
    Problem(safelane_hp::Problem),
    Program(Program),
}

impl HpFile {
    fn load(path: &Path) -> Result<Self, UsageError> {
        let text = read(path)?;
        if let Ok(p) = parse_problem(&text) {
            return Ok(Self::Problem(p));
        }
        // report the program error when neither form parses
        parse_program(&text).map(Self::Program).map_err(|e| UsageError(format!("{}: {e}", path.display())))
    }

    fn program(&self) -> &Program {
        match self {
            Self::Problem(p) => &p.program,
            Self::Program(p) => p,
        }
    }

    fn post(&self) -> Option<&Formula> {
        match self {
            Self::Problem(p) => Some(&p.post),
            Self::Program(_) => None,
        }
    }
}

fn print_state(prefix: &str, s: &Valuation) {
    let vals: Vec<String> = s.iter().map(|(k, v)| format!("{k}={}", num(*v))).collect();
    println!("{prefix}{}", vals.join(" "));
}

fn exec_err(e: safelane_hp::ExecError) -> UsageError {
    UsageError(e.to_string())
}

pub fn hp_run(a: &HpRunArgs) -> CmdResult {
    let file = HpFile::load(&a.file)?;
    let b = a.budget.budget();
    let s0: Valuation = a.set.iter().cloned().collect();
    let runs = run(file.program(), &s0, &b).map_err(exec_err)?;
    println!("seed={}", b.seed);
    let mut violated = 0u64;
    let mut completed = 0u64;
    for r in &runs.runs {
        let RunOutcome::Completed(s) = &r.outcome else { continue };
        completed += 1;
        print_state("final ", s);
        if let Some(post) = file.post() {
            if !eval_formula(post, s).map_err(exec_err)? {
                violated += 1;
                println!("  postcondition violated");
            }
        }
    }
    println!("completed={completed}");
    println!("aborted={}", runs.runs.len() as u64 - completed);
    if runs.exhausted {
        println!("node budget exhausted; run set truncated");
    }
    Ok(Status::from_pass(violated == 0))
}

pub fn hp_check(a: &HpCheckArgs) -> CmdResult {
    let file = HpFile::load(&a.file)?;
    let formula = |src: &Option<String>, from_file: Option<&Formula>, what: &str| match (src, from_file) {
        (Some(s), _) => parse_formula(s).map_err(|e| UsageError(format!("--{what}: {e}"))),
        (None, Some(f)) => Ok(f.clone()),
        (None, None) => Err(UsageError(format!("--{what} is required for a bare program"))),
    };
    let (file_init, file_post) = match &file {
        HpFile::Problem(p) => (Some(&p.init), Some(&p.post)),
        HpFile::Program(_) => (None, None),
    };
    let init = formula(&a.init, file_init, "init")?;
    let post = formula(&a.post, file_post, "post")?;
    let b = a.budget.budget();
    let verdict = check_box(&init, file.program(), &post, &b).map_err(exec_err)?;
    println!("seed={}", b.seed);
    match verdict {
        Verdict::NoCounterexampleFound(st) => {
            println!("verdict=no-counterexample-found");
            println!("completed={}", st.completed);
            println!("aborted={}", st.aborted);
            println!("init_rejected={}", st.init_rejected);
            println!("exhausted={}", st.exhausted);
            Ok(Status::Pass)
        }
        Verdict::Counterexample(c) => {
            println!("verdict=counterexample");
            print_state("state ", &c.state);
            let log = ReplayLog { ode_horizon: b.ode_horizon, events: c.log.clone() };
            let comments = vec![format!("counterexample for {} with seed {}", a.file.display(), b.seed)];
            write(&a.replay_out, &write_replay(&log, &comments))?;
            println!("replay={}", a.replay_out.display());
            Ok(Status::Fail)
        }
    }
}

pub fn hp_replay(a: &HpReplayArgs) -> CmdResult {
    let file = HpFile::load(&a.file)?;
    let log = parse_replay(&read(&a.replay)?).map_err(|e| UsageError(format!("{}: {e}", a.replay.display())))?;
    match replay(file.program(), &log.events, log.ode_horizon).map_err(exec_err)? {
        RunOutcome::Aborted => {
            println!("outcome=aborted");
            Ok(Status::Pass)
        }
        RunOutcome::Completed(s) => {
            print_state("final ", &s);
            let violated = match file.post() {
                Some(post) => !eval_formula(post, &s).map_err(exec_err)?,
                None => false,
            };
            println!("outcome={}", if violated { "violation" } else { "completed" });
            Ok(Status::from_pass(!violated))
        }
    }
}
