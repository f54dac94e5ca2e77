//! Floating-point evaluation of terms and formulas, and univariate
//! polynomial views of terms used by the interpreter.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;

use crate::ast::{CmpOp, Formula, Term};
use crate::error::ExecError;

/// Variable assignment. Reading a variable that was never assigned is an error.
pub type Valuation = BTreeMap<String, f64>;

pub fn eval_term(t: &Term, s: &Valuation) -> Result<f64, ExecError> {
    Ok(match t {
        Term::Var(x) => *s.get(x).ok_or_else(|| ExecError::Unbound(x.clone()))?,
        Term::Num(r) => r.to_f64().unwrap_or(f64::NAN),
        Term::Add(a, b) => eval_term(a, s)? + eval_term(b, s)?,
        Term::Mul(a, b) => eval_term(a, s)? * eval_term(b, s)?,
        Term::Neg(a) => -eval_term(a, s)?,
        Term::Pow(a, n) => eval_term(a, s)?.powi(*n as i32),
    })
}

pub fn compare(op: CmpOp, a: f64, b: f64) -> bool {
    match op {
        CmpOp::Ge => a >= b,
        CmpOp::Gt => a > b,
        CmpOp::Le => a <= b,
        CmpOp::Lt => a < b,
        CmpOp::Eq => a == b,
    }
}

pub fn eval_formula(f: &Formula, s: &Valuation) -> Result<bool, ExecError> {
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Cmp(op, a, b) => compare(*op, eval_term(a, s)?, eval_term(b, s)?),
        Formula::Not(a) => !eval_formula(a, s)?,
        Formula::And(a, b) => eval_formula(a, s)? && eval_formula(b, s)?,
        Formula::Or(a, b) => eval_formula(a, s)? || eval_formula(b, s)?,
        Formula::Implies(a, b) => !eval_formula(a, s)? || eval_formula(b, s)?,
        Formula::Equiv(a, b) => eval_formula(a, s)? == eval_formula(b, s)?,
        Formula::Forall(..) | Formula::Exists(..) => {
            return Err(ExecError::Unsupported("quantifiers".into()));
        }
    })
}

/// Dense univariate polynomial, lowest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Self(vec![c])
    }

    /// The indeterminate itself.
    pub fn ident() -> Self {
        Self(vec![0.0, 1.0])
    }

    pub fn degree(&self) -> usize {
        self.0.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.0.get(i).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly((0..n).map(|i| self.coeff(i) + o.coeff(i)).collect())
    }

    pub fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|c| -c).collect())
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn pow(&self, n: u32) -> Poly {
        (1..n).fold(self.clone(), |acc, _| acc.mul(self))
    }
}

/// Expands `t` into a polynomial, looking variables up through `lookup`.
pub fn term_poly(t: &Term, lookup: &dyn Fn(&str) -> Option<Poly>) -> Result<Poly, ExecError> {
    Ok(match t {
        Term::Var(x) => lookup(x).ok_or_else(|| ExecError::Unbound(x.clone()))?,
        Term::Num(r) => Poly::constant(r.to_f64().unwrap_or(f64::NAN)),
        Term::Add(a, b) => term_poly(a, lookup)?.add(&term_poly(b, lookup)?),
        Term::Mul(a, b) => term_poly(a, lookup)?.mul(&term_poly(b, lookup)?),
        Term::Neg(a) => term_poly(a, lookup)?.neg(),
        Term::Pow(a, n) => term_poly(a, lookup)?.pow(*n),
    })
}

/// `t` as a polynomial in `var`, every other variable read from `s`.
pub fn poly_in(t: &Term, var: &str, s: &Valuation) -> Result<Poly, ExecError> {
    term_poly(t, &|x| if x == var { Some(Poly::ident()) } else { s.get(x).map(|&c| Poly::constant(c)) })
}
