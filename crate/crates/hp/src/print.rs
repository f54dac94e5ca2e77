//! Pretty-printer with minimal parentheses.
//!
//! Precedence levels mirror the parser's binding powers so that printing
//! and reparsing yields the same tree.

use std::fmt::{self, Display, Formatter, Write};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::ast::{Formula, Problem, Program, Term};
use crate::parser::is_decimal;

/// Exact decimal text for a terminating rational, e.g. `3/8` -> `0.375`.
/// Non-terminating values fall back to 17 significant digits.
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    if !is_decimal(r) {
        return format!("{:.17e}", r.to_f64().unwrap_or(f64::NAN));
    }
    let mut scale = 0u32;
    let mut scaled = r.clone();
    let ten = BigRational::from_integer(BigInt::from(10));
    while !scaled.is_integer() {
        scaled *= &ten;
        scale += 1;
    }
    let digits = scaled.numer().abs().to_string();
    let scale = scale as usize;
    let padded = if digits.len() <= scale { format!("{}{}", "0".repeat(scale + 1 - digits.len()), digits) } else { digits };
    let (int, frac) = padded.split_at(padded.len() - scale);
    let sign = if r.is_negative() { "-" } else { "" };
    format!("{sign}{int}.{frac}")
}

fn term_prec(t: &Term) -> u8 {
    match t {
        Term::Add(..) => 70,
        Term::Mul(..) => 80,
        Term::Neg(_) => 90,
        Term::Pow(..) => 100,
        Term::Var(_) | Term::Num(_) => 110,
    }
}

fn write_term(f: &mut Formatter<'_>, t: &Term, ctx: u8) -> fmt::Result {
    let wrap = term_prec(t) < ctx;
    if wrap {
        f.write_char('(')?;
    }
    match t {
        Term::Var(x) => f.write_str(x)?,
        Term::Num(r) => {
            debug_assert!(!r.is_negative() || r.is_zero());
            f.write_str(&format_rational(r))?
        }
        Term::Add(a, b) => {
            write_term(f, a, 70)?;
            match &**b {
                Term::Neg(c) => {
                    f.write_str(" - ")?;
                    write_term(f, c, 71)?;
                }
                _ => {
                    f.write_str(" + ")?;
                    write_term(f, b, 71)?;
                }
            }
        }
        Term::Mul(a, b) => {
            write_term(f, a, 80)?;
            f.write_char('*')?;
            write_term(f, b, 81)?;
        }
        Term::Neg(a) => {
            f.write_char('-')?;
            write_term(f, a, 90)?;
        }
        Term::Pow(a, n) => {
            write_term(f, a, 101)?;
            write!(f, "^{n}")?;
        }
    }
    if wrap {
        f.write_char(')')?;
    }
    Ok(())
}

fn formula_prec(p: &Formula) -> u8 {
    match p {
        Formula::Equiv(..) => 10,
        Formula::Implies(..) => 20,
        Formula::Or(..) => 30,
        Formula::And(..) => 40,
        Formula::Not(_) | Formula::Forall(..) | Formula::Exists(..) => 50,
        Formula::Cmp(..) => 60,
        Formula::True | Formula::False => 110,
    }
}

fn write_formula(f: &mut Formatter<'_>, p: &Formula, ctx: u8) -> fmt::Result {
    let wrap = formula_prec(p) < ctx;
    if wrap {
        f.write_char('(')?;
    }
    let binary = |f: &mut Formatter<'_>, a: &Formula, op: &str, b: &Formula, l: u8, r: u8| {
        write_formula(f, a, l)?;
        write!(f, " {op} ")?;
        write_formula(f, b, r)
    };
    match p {
        Formula::True => f.write_str("true")?,
        Formula::False => f.write_str("false")?,
        Formula::Cmp(op, a, b) => {
            write_term(f, a, 61)?;
            write!(f, " {} ", op.symbol())?;
            write_term(f, b, 61)?;
        }
        Formula::Not(a) => {
            f.write_char('!')?;
            write_formula(f, a, 50)?;
        }
        Formula::And(a, b) => binary(f, a, "&", b, 40, 41)?,
        Formula::Or(a, b) => binary(f, a, "|", b, 30, 31)?,
        Formula::Implies(a, b) => binary(f, a, "->", b, 21, 20)?,
        Formula::Equiv(a, b) => binary(f, a, "<->", b, 10, 11)?,
        Formula::Forall(x, body) | Formula::Exists(x, body) => {
            let kw = if matches!(p, Formula::Forall(..)) { "\\forall" } else { "\\exists" };
            write!(f, "{kw} {x} ")?;
            write_formula(f, body, 50)?;
        }
    }
    if wrap {
        f.write_char(')')?;
    }
    Ok(())
}

fn program_prec(p: &Program) -> u8 {
    match p {
        Program::Choice(..) => 1,
        Program::Seq(..) => 2,
        _ => 3,
    }
}

fn write_program(f: &mut Formatter<'_>, p: &Program, ctx: u8) -> fmt::Result {
    let wrap = program_prec(p) < ctx;
    if wrap {
        f.write_char('{')?;
    }
    match p {
        Program::Assign(x, e) => {
            write!(f, "{x} := ")?;
            write_term(f, e, 0)?;
        }
        Program::NondetAssign(x) => write!(f, "{x} := *")?,
        Program::Test(q) => {
            f.write_char('?')?;
            write_formula(f, q, 0)?;
        }
        Program::Ode(flows, domain) => {
            f.write_char('{')?;
            for (i, (x, e)) in flows.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{x}' = ")?;
                write_term(f, e, 0)?;
            }
            if *domain != Formula::True {
                f.write_str(" & ")?;
                write_formula(f, domain, 0)?;
            }
            f.write_char('}')?;
        }
        Program::Choice(a, b) => {
            write_program(f, a, 2)?;
            f.write_str(" ++ ")?;
            write_program(f, b, 1)?;
        }
        Program::Seq(a, b) => {
            write_program(f, a, 3)?;
            f.write_str("; ")?;
            write_program(f, b, 2)?;
        }
        Program::Loop(body) => {
            f.write_char('{')?;
            write_program(f, body, 0)?;
            f.write_str("}*")?;
        }
    }
    if wrap {
        f.write_char('}')?;
    }
    Ok(())
}

impl Display for Term {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_term(f, self, 0)
    }
}

impl Display for Formula {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_formula(f, self, 0)
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_program(f, self, 0)
    }
}

impl Display for Problem {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_formula(f, &self.init, 21)?;
        f.write_str(" -> [")?;
        write_program(f, &self.program, 0)?;
        f.write_str("] ")?;
        write_formula(f, &self.post, 0)
    }
}
