//! Hybrid programs: concrete syntax, pretty-printing and a bounded
//! interpreter that searches for counterexamples to `init -> [prog] post`.
//!
//! A search that finds nothing returns [`Verdict::NoCounterexampleFound`],
//! which is evidence, not a proof.

pub mod ast;
pub mod error;
pub mod eval;
pub mod exec;
pub mod gen;
pub mod lexer;
pub mod parser;
pub mod print;
pub mod replay;

pub use ast::{desugar_if, CmpOp, Formula, Problem, Program, Term};
pub use error::{ExecError, ParseError};
pub use eval::{eval_formula, eval_term, Valuation};
pub use exec::{
    check_box, check_box_with, check_problem, replay, run, sample_init, Counterexample, Event, ExplorationBudget,
    Run, RunOutcome, RunSet, SearchStats, Verdict,
};
pub use parser::{parse_formula, parse_problem, parse_program, parse_term};
pub use replay::{parse_replay, write_replay, ReplayLog};
