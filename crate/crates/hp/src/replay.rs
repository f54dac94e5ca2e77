//! Line-oriented text format for counterexample logs.
//!
//! ```text
//! # comment
//! horizon 1.0000000000000000e2
//! init v 1.0000000000000000e0
//! choice 1
//! loop iter
//! sample an -3.0000000000000000e0
//! duration 1.2500000000000000e-1 dense
//! loop exit
//! ```
//!
//! Reals are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fmt::Write;

use crate::error::ExecError;
use crate::exec::Event;

/// Parsed replay file.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayLog {
    pub ode_horizon: f64,
    pub events: Vec<Event>,
}

pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_replay(log: &ReplayLog, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    let _ = writeln!(out, "horizon {}", format_real(log.ode_horizon));
    for ev in &log.events {
        let _ = match ev {
            Event::Init { var, value } => writeln!(out, "init {var} {}", format_real(*value)),
            Event::Choice(i) => writeln!(out, "choice {i}"),
            Event::LoopIter => writeln!(out, "loop iter"),
            Event::LoopExit => writeln!(out, "loop exit"),
            Event::Sample { var, value } => writeln!(out, "sample {var} {}", format_real(*value)),
            Event::Duration { t, dense } => {
                writeln!(out, "duration {}{}", format_real(*t), if *dense { " dense" } else { "" })
            }
        };
    }
    out
}

pub fn parse_replay(text: &str) -> Result<ReplayLog, ExecError> {
    let mut horizon = None;
    let mut events = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || ExecError::Replay(format!("line {}: cannot read `{line}`", n + 1));
        let real = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let words: Vec<&str> = line.split_whitespace().collect();
        let ev = match words.as_slice() {
            ["horizon", x] => {
                horizon = Some(real(x)?);
                continue;
            }
            ["init", var, x] => Event::Init { var: var.to_string(), value: real(x)? },
            ["choice", "0"] => Event::Choice(0),
            ["choice", "1"] => Event::Choice(1),
            ["loop", "iter"] => Event::LoopIter,
            ["loop", "exit"] => Event::LoopExit,
            ["sample", var, x] => Event::Sample { var: var.to_string(), value: real(x)? },
            ["duration", x] => Event::Duration { t: real(x)?, dense: false },
            ["duration", x, "dense"] => Event::Duration { t: real(x)?, dense: true },
            _ => return Err(bad()),
        };
        events.push(ev);
    }
    let ode_horizon = horizon.ok_or_else(|| ExecError::Replay("missing `horizon` line".into()))?;
    Ok(ReplayLog { ode_horizon, events })
}
