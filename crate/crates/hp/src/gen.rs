//! Random syntax trees, used to exercise the printer and parser.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

use crate::ast::{CmpOp, Formula, Problem, Program, Term};

const VARS: [&str; 8] = ["x", "v", "an", "xc", "t", "T", "y1", "z_2"];
const OPS: [CmpOp; 5] = [CmpOp::Ge, CmpOp::Gt, CmpOp::Le, CmpOp::Lt, CmpOp::Eq];

fn var(rng: &mut impl Rng) -> String {
    VARS[rng.random_range(0..VARS.len())].to_string()
}

fn number(rng: &mut impl Rng) -> Term {
    let digits: u64 = rng.random_range(0..100_000);
    let scale = BigInt::from(10).pow(rng.random_range(0..5));
    Term::Num(BigRational::new(digits.into(), scale))
}

/// Term of depth at most `depth` (a leaf has depth 1).
pub fn term(rng: &mut impl Rng, depth: u32) -> Term {
    if depth <= 1 || rng.random_bool(0.3) {
        return if rng.random_bool(0.5) { Term::Var(var(rng)) } else { number(rng) };
    }
    let d = depth - 1;
    match rng.random_range(0..5) {
        0 => Term::add(term(rng, d), term(rng, d)),
        1 => Term::sub(term(rng, d), term(rng, d.saturating_sub(1).max(1))),
        2 => Term::mul(term(rng, d), term(rng, d)),
        3 => Term::neg(term(rng, d)),
        _ => Term::pow(term(rng, d), rng.random_range(1..5)),
    }
}

pub fn formula(rng: &mut impl Rng, depth: u32) -> Formula {
    if depth <= 2 || rng.random_bool(0.25) {
        return match rng.random_range(0..8) {
            0 => Formula::True,
            1 => Formula::False,
            _ => {
                let d = depth.saturating_sub(1).max(1);
                Formula::cmp(OPS[rng.random_range(0..OPS.len())], term(rng, d), term(rng, d))
            }
        };
    }
    let d = depth - 1;
    match rng.random_range(0..7) {
        0 => Formula::not(formula(rng, d)),
        1 => Formula::and(formula(rng, d), formula(rng, d)),
        2 => Formula::or(formula(rng, d), formula(rng, d)),
        3 => Formula::implies(formula(rng, d), formula(rng, d)),
        4 => Formula::Equiv(Box::new(formula(rng, d)), Box::new(formula(rng, d))),
        5 => Formula::Forall(var(rng), Box::new(formula(rng, d))),
        _ => Formula::Exists(var(rng), Box::new(formula(rng, d))),
    }
}

pub fn program(rng: &mut impl Rng, depth: u32) -> Program {
    if depth <= 2 || rng.random_bool(0.25) {
        let d = depth.saturating_sub(1).max(1);
        return match rng.random_range(0..4) {
            0 => Program::Assign(var(rng), term(rng, d)),
            1 => Program::NondetAssign(var(rng)),
            2 => Program::Test(formula(rng, d)),
            _ => {
                let mut names: Vec<&str> = VARS.to_vec();
                let n = rng.random_range(1..4);
                let mut flows = Vec::new();
                for _ in 0..n {
                    let x = names.remove(rng.random_range(0..names.len()));
                    flows.push((x.to_string(), term(rng, d)));
                }
                let domain = if rng.random_bool(0.3) { Formula::True } else { formula(rng, d) };
                Program::Ode(flows, domain)
            }
        };
    }
    let d = depth - 1;
    match rng.random_range(0..3) {
        0 => Program::choice(program(rng, d), program(rng, d)),
        1 => Program::seq(program(rng, d), program(rng, d)),
        _ => Program::repeat(program(rng, d)),
    }
}

pub fn problem(rng: &mut impl Rng, depth: u32) -> Problem {
    Problem { init: formula(rng, depth), program: program(rng, depth), post: formula(rng, depth) }
}
