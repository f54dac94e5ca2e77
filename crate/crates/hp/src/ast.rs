//! Abstract syntax of terms, formulas and hybrid programs.

use std::collections::BTreeSet;

use num_rational::BigRational;

/// Polynomial term with rational constants. Subtraction is `Add(a, Neg(b))`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    /// Non-negative constant; negative values are `Neg(Num(..))`.
    Num(BigRational),
    Add(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Neg(Box<Term>),
    /// Power with a positive integer exponent.
    Pow(Box<Term>, u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Ge,
    Gt,
    Le,
    Lt,
    Eq,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            Self::Ge => ">=",
            Self::Gt => ">",
            Self::Le => "<=",
            Self::Lt => "<",
            Self::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Cmp(CmpOp, Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Equiv(Box<Formula>, Box<Formula>),
    /// Parsed but not executable.
    Forall(String, Box<Formula>),
    /// Parsed but not executable.
    Exists(String, Box<Formula>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Program {
    Assign(String, Term),
    NondetAssign(String),
    Test(Formula),
    /// `{x' = e, ... & domain}`.
    Ode(Vec<(String, Term)>, Formula),
    Choice(Box<Program>, Box<Program>),
    Seq(Box<Program>, Box<Program>),
    Loop(Box<Program>),
}

/// `init -> [program] post`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Problem {
    pub init: Formula,
    pub program: Program,
    pub post: Formula,
}

impl Term {
    pub fn var(name: &str) -> Self {
        Self::Var(name.to_string())
    }

    pub fn int(n: i64) -> Self {
        let t = Self::Num(BigRational::from_integer(n.unsigned_abs().into()));
        if n < 0 {
            Self::Neg(Box::new(t))
        } else {
            t
        }
    }

    pub fn add(a: Term, b: Term) -> Self {
        Self::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Term, b: Term) -> Self {
        Self::Add(Box::new(a), Box::new(Self::Neg(Box::new(b))))
    }

    pub fn mul(a: Term, b: Term) -> Self {
        Self::Mul(Box::new(a), Box::new(b))
    }

    pub fn neg(a: Term) -> Self {
        Self::Neg(Box::new(a))
    }

    pub fn pow(a: Term, n: u32) -> Self {
        Self::Pow(Box::new(a), n)
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Self::Var(v) => {
                out.insert(v.clone());
            }
            Self::Num(_) => {}
            Self::Add(a, b) | Self::Mul(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Self::Neg(a) | Self::Pow(a, _) => a.collect_vars(out),
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        match self {
            Self::Var(v) => v == name,
            Self::Num(_) => false,
            Self::Add(a, b) | Self::Mul(a, b) => a.mentions(name) || b.mentions(name),
            Self::Neg(a) | Self::Pow(a, _) => a.mentions(name),
        }
    }
}

impl Formula {
    pub fn cmp(op: CmpOp, a: Term, b: Term) -> Self {
        Self::Cmp(op, a, b)
    }

    pub fn not(f: Formula) -> Self {
        Self::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Self::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Self::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Self::Implies(Box::new(a), Box::new(b))
    }

    /// Top-level conjuncts, left to right.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        fn walk<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            match f {
                Formula::And(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Free variables, in sorted order.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Self::True | Self::False => {}
            Self::Cmp(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Self::Not(a) => a.collect_vars(out),
            Self::And(a, b) | Self::Or(a, b) | Self::Implies(a, b) | Self::Equiv(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Self::Forall(x, body) | Self::Exists(x, body) => {
                let mut inner = BTreeSet::new();
                body.collect_vars(&mut inner);
                inner.remove(x);
                out.extend(inner);
            }
        }
    }
}

impl Program {
    pub fn assign(x: &str, e: Term) -> Self {
        Self::Assign(x.to_string(), e)
    }

    pub fn nondet(x: &str) -> Self {
        Self::NondetAssign(x.to_string())
    }

    pub fn test(f: Formula) -> Self {
        Self::Test(f)
    }

    pub fn seq(a: Program, b: Program) -> Self {
        Self::Seq(Box::new(a), Box::new(b))
    }

    pub fn choice(a: Program, b: Program) -> Self {
        Self::Choice(Box::new(a), Box::new(b))
    }

    pub fn repeat(a: Program) -> Self {
        Self::Loop(Box::new(a))
    }
}

/// `if (cond) then else otherwise` as `(?cond; then) ++ (?!cond; otherwise)`.
pub fn desugar_if(cond: Formula, then: Program, otherwise: Program) -> Program {
    Program::choice(
        Program::seq(Program::Test(cond.clone()), then),
        Program::seq(Program::Test(Formula::not(cond)), otherwise),
    )
}
