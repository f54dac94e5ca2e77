//! Bounded-nondeterminism interpreter and box-modality falsifier.
//!
//! Exploration is depth-first over an explicit work stack. Every branch
//! point yields children in a fixed order (boundary values and interval
//! endpoints first, then seeded random draws), so enlarging a budget only
//! appends children and never changes the ones already explored.

use std::collections::BTreeSet;
use std::ops::ControlFlow;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ast::{CmpOp, Formula, Problem, Program, Term};
use crate::error::ExecError;
use crate::eval::{eval_formula, eval_term, poly_in, term_poly, Poly, Valuation};

/// How much of the nondeterminism to explore.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationBudget {
    /// Maximal number of loop iterations per loop.
    pub loop_depth: u32,
    /// Values tried per `x := *`.
    pub samples_per_nondet: u32,
    /// Durations tried per ODE, including `t_max` and 0.
    pub durations_per_ode: u32,
    /// Extra durations per ODE after which the run leaves all loops, so the
    /// postcondition is checked inside the flow. 0 disables.
    pub dense_points: u32,
    pub seed: u64,
    /// Cap on explored branches; hitting it marks the result exhausted.
    pub max_nodes: u64,
    /// Width of the sampling window for one-sided bounds.
    pub nondet_span: f64,
    /// Duration cap for ODEs whose domain never closes.
    pub ode_horizon: f64,
    /// Initial valuations tried by [`check_box`].
    pub init_samples: u32,
}

impl Default for ExplorationBudget {
    fn default() -> Self {
        Self {
            loop_depth: 2,
            samples_per_nondet: 3,
            durations_per_ode: 3,
            dense_points: 8,
            seed: 0,
            max_nodes: 1_000_000,
            nondet_span: 100.0,
            ode_horizon: 100.0,
            init_samples: 16,
        }
    }
}

impl ExplorationBudget {
    pub fn validate(&self) -> Result<(), ExecError> {
        let counts = [
            ("loop_depth", self.loop_depth),
            ("samples_per_nondet", self.samples_per_nondet),
            ("durations_per_ode", self.durations_per_ode),
            ("init_samples", self.init_samples),
        ];
        for (name, n) in counts {
            if n == 0 {
                return Err(ExecError::Budget(format!("{name} must be at least 1")));
            }
        }
        if self.max_nodes == 0 {
            return Err(ExecError::Budget("max_nodes must be at least 1".into()));
        }
        for (name, x) in [("nondet_span", self.nondet_span), ("ode_horizon", self.ode_horizon)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(ExecError::Budget(format!("{name} must be positive and finite")));
            }
        }
        Ok(())
    }
}

/// One decision taken along a run; the log of a run replays it exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Init { var: String, value: f64 },
    /// 0 for the left branch of `++`, 1 for the right.
    Choice(u8),
    LoopIter,
    LoopExit,
    Sample { var: String, value: f64 },
    Duration { t: f64, dense: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed(Valuation),
    /// A test failed or an ODE domain was violated at time 0.
    Aborted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub outcome: RunOutcome,
    pub log: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSet {
    pub runs: Vec<Run>,
    /// Some branches were dropped by `max_nodes`.
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    /// Full decision log, starting with the initial valuation.
    pub log: Vec<Event>,
    /// Final state violating the postcondition.
    pub state: Valuation,
}

/// Result of a bounded search. `NoCounterexampleFound` is not a proof.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Counterexample(Counterexample),
    NoCounterexampleFound(SearchStats),
}

impl Verdict {
    pub fn counterexample(&self) -> Option<&Counterexample> {
        match self {
            Verdict::Counterexample(c) => Some(c),
            Verdict::NoCounterexampleFound(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub completed: u64,
    pub aborted: u64,
    /// Initial samples rejected because they did not satisfy `init`.
    pub init_rejected: u64,
    pub exhausted: bool,
}

// ---------------------------------------------------------------------------
// keyed randomness

fn child_key(parent: u64, i: u64) -> u64 {
    let mut r = ChaCha8Rng::seed_from_u64(parent);
    r.set_stream(i);
    r.next_u64()
}

fn keyed_rng(seed: u64, key: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(key);
    r
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi).min(hi)
    } else {
        lo
    }
}

/// Radical inverse of `i` in base 2: 0.5, 0.25, 0.75, 0.125, ...
fn van_der_corput(mut i: u32) -> f64 {
    let (mut x, mut f) = (0.0, 0.5);
    while i > 0 {
        if i & 1 == 1 {
            x += f;
        }
        i >>= 1;
        f *= 0.5;
    }
    x
}

// ---------------------------------------------------------------------------
// linear bounds for nondeterministic assignments

fn atom(f: &Formula) -> Option<(CmpOp, &Term, &Term, bool)> {
    match f {
        Formula::Cmp(op, a, b) => Some((*op, a, b, false)),
        Formula::Not(inner) => match &**inner {
            Formula::Cmp(op, a, b) => Some((*op, a, b, true)),
            _ => None,
        },
        _ => None,
    }
}

// `!(a op b)` as a single comparison; `None` for `!=`
fn positive_op(op: CmpOp, negated: bool) -> Option<CmpOp> {
    if !negated {
        return Some(op);
    }
    match op {
        CmpOp::Ge => Some(CmpOp::Lt),
        CmpOp::Gt => Some(CmpOp::Le),
        CmpOp::Le => Some(CmpOp::Gt),
        CmpOp::Lt => Some(CmpOp::Ge),
        CmpOp::Eq => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Bounds {
    lo: f64,
    hi: f64,
    /// Conjuncts that produced a bound; re-checked when nudging.
    atoms: Vec<Formula>,
}

impl Bounds {
    fn empty(&self) -> bool {
        self.lo > self.hi || self.lo.is_nan() || self.hi.is_nan()
    }

    fn holds(&self, var: &str, value: f64, s: &Valuation) -> bool {
        let mut s = s.clone();
        s.insert(var.to_string(), value);
        self.atoms.iter().all(|f| eval_formula(f, &s).unwrap_or(false))
    }

    /// Moves a boundary value inward until the producing conjuncts hold.
    fn nudge(&self, var: &str, value: f64, s: &Valuation) -> f64 {
        let mut v = value;
        for _ in 0..64 {
            if self.holds(var, v, s) {
                return v;
            }
            v = if value == self.lo { v.next_up() } else { v.next_down() };
        }
        value
    }
}

/// Linear bounds on `var` from `conjuncts`, with every other variable read
/// from `s`. Conjuncts that are not linear in `var` or cannot be evaluated
/// are ignored.
fn linear_bounds<'f>(var: &str, conjuncts: impl IntoIterator<Item = &'f Formula>, s: &Valuation) -> Bounds {
    let mut b = Bounds { lo: f64::NEG_INFINITY, hi: f64::INFINITY, atoms: Vec::new() };
    for f in conjuncts {
        let Some((op, lhs, rhs, negated)) = atom(f) else { continue };
        let Some(op) = positive_op(op, negated) else { continue };
        let Ok(p) = poly_in(lhs, var, s).and_then(|l| Ok(l.sub(&poly_in(rhs, var, s)?))) else { continue };
        if p.degree() != 1 || p.0.len() > 2 && p.0[2..].iter().any(|&c| c != 0.0) {
            continue;
        }
        let (c0, c1) = (p.coeff(0), p.coeff(1));
        let r = -c0 / c1;
        let (lower, upper) = match (op, c1 > 0.0) {
            (CmpOp::Eq, _) => (true, true),
            (CmpOp::Ge | CmpOp::Gt, true) | (CmpOp::Le | CmpOp::Lt, false) => (true, false),
            _ => (false, true),
        };
        if lower {
            b.lo = b.lo.max(r);
        }
        if upper {
            b.hi = b.hi.min(r);
        }
        b.atoms.push(f.clone());
    }
    b
}

// ---------------------------------------------------------------------------
// ODE solutions

/// Closed-form flow of a nilpotent system of order at most 2 together with
/// the maximal duration its domain allows.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    start: Valuation,
    /// `x(t) = c0 + c1 t + c2 t^2`.
    flows: Vec<(String, [f64; 3])>,
    domain: Vec<Formula>,
    /// Domain atoms whose boundary is reached at `t_max`.
    binding: Vec<bool>,
    pub t_max: f64,
    end: Valuation,
}

impl OdeSolution {
    /// `None` if the domain is false in the initial state.
    pub fn solve(flows: &[(String, Term)], domain: &Formula, s: &Valuation, horizon: f64) -> Result<Option<Self>, ExecError> {
        let ode_vars: BTreeSet<&str> = flows.iter().map(|(x, _)| x.as_str()).collect();
        let mentions_ode = |e: &Term| ode_vars.iter().any(|x| e.mentions(x));
        let rate = |x: &str| flows.iter().find(|(y, _)| y == x).map(|(_, e)| e);

        let mut polys = Vec::with_capacity(flows.len());
        for (x, e) in flows {
            let x0 = *s.get(x).ok_or_else(|| ExecError::Unbound(x.clone()))?;
            let coeffs = if !mentions_ode(e) {
                [x0, eval_term(e, s)?, 0.0]
            } else {
                let chained = match e {
                    Term::Var(y) => rate(y).filter(|ey| !mentions_ode(ey)).map(|ey| (y, ey)),
                    _ => None,
                };
                let Some((y, ey)) = chained else {
                    return Err(ExecError::Unsupported(format!("ODE for `{x}` is not nilpotent of order <= 2")));
                };
                let y0 = *s.get(y).ok_or_else(|| ExecError::Unbound(y.clone()))?;
                [x0, y0, eval_term(ey, s)? / 2.0]
            };
            polys.push((x.clone(), coeffs));
        }

        let domain_atoms: Vec<Formula> = domain.conjuncts().into_iter().filter(|f| **f != Formula::True).cloned().collect();
        if !eval_formula(domain, s)? {
            return Ok(None);
        }

        let lookup = |name: &str| -> Option<Poly> {
            match polys.iter().find(|(x, _)| x == name) {
                Some((_, c)) => Some(Poly(c.to_vec())),
                None => s.get(name).map(|&c| Poly::constant(c)),
            }
        };
        let mut t_max = f64::INFINITY;
        let mut exits = Vec::with_capacity(domain_atoms.len());
        for f in &domain_atoms {
            let Some((op, lhs, rhs, negated)) = atom(f) else {
                return Err(ExecError::Unsupported("ODE domain must be a conjunction of comparisons".into()));
            };
            let p = term_poly(lhs, &lookup)?.sub(&term_poly(rhs, &lookup)?);
            if p.degree() > 2 {
                return Err(ExecError::Unsupported("ODE domain atom of degree > 2 along the flow".into()));
            }
            let q = [p.coeff(0), p.coeff(1), p.coeff(2)];
            let exit = match positive_op(op, negated) {
                Some(CmpOp::Ge | CmpOp::Gt) => exit_time(q),
                Some(CmpOp::Le | CmpOp::Lt) => exit_time([-q[0], -q[1], -q[2]]),
                Some(CmpOp::Eq) => {
                    if q.iter().all(|&c| c == 0.0) {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                }
                // p != 0 and p(0) != 0: leaves at the first positive root
                None => {
                    let sgn = if q[0] > 0.0 { 1.0 } else { -1.0 };
                    exit_time([sgn * q[0], sgn * q[1], sgn * q[2]])
                }
            };
            exits.push(exit);
            t_max = t_max.min(exit);
        }
        let binding = exits.iter().map(|&e| e == t_max && e.is_finite()).collect();
        if !t_max.is_finite() {
            t_max = horizon;
        }

        let mut sol = Self { start: s.clone(), flows: polys, domain: domain_atoms, binding, t_max, end: Valuation::new() };
        sol.settle_end();
        Ok(Some(sol))
    }

    fn raw_at(&self, t: f64) -> Valuation {
        let mut out = self.start.clone();
        for (x, [c0, c1, c2]) in &self.flows {
            out.insert(x.clone(), c0 + t * (c1 + t * c2));
        }
        out
    }

    fn domain_holds(&self, s: &Valuation) -> bool {
        self.domain.iter().all(|f| eval_formula(f, s).unwrap_or(false))
    }

    // state at t with evolving variables moved onto a domain bound when
    // rounding put them just outside, or just inside a bound reached at t_max
    fn snapped_at(&self, t: f64) -> Valuation {
        let mut s = self.raw_at(t);
        for (f, &binding) in self.domain.iter().zip(&self.binding) {
            let Some((op, lhs, rhs, false)) = atom(f) else { continue };
            let (var, other) = match (lhs, rhs) {
                (Term::Var(x), e) | (e, Term::Var(x)) if self.flows.iter().any(|(y, _)| y == x) => (x, e),
                _ => continue,
            };
            if self.flows.iter().any(|(y, _)| other.mentions(y)) || op == CmpOp::Gt || op == CmpOp::Lt {
                continue;
            }
            let (Ok(bound), Some(&value)) = (eval_term(other, &s), s.get(var)) else { continue };
            let reached = binding && t == self.t_max;
            let holds = eval_formula(f, &s).unwrap_or(true);
            if (reached || !holds) && (value - bound).abs() <= 1e-9 * bound.abs().max(1.0) {
                s.insert(var.clone(), bound);
            }
        }
        s
    }

    fn settle_end(&mut self) {
        let mut t = self.t_max;
        for _ in 0..64 {
            let s = self.snapped_at(t);
            if self.domain_holds(&s) {
                self.t_max = t;
                self.end = s;
                return;
            }
            if t == 0.0 {
                break;
            }
            t = t.next_down().max(0.0);
        }
        // bisect for the last time the domain holds
        let (mut lo, mut hi) = (0.0, t);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.domain_holds(&self.snapped_at(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.t_max = lo;
        self.end = self.snapped_at(lo);
    }

    /// State after following the flow for `t`, `0 <= t <= t_max`.
    pub fn at(&self, t: f64) -> Valuation {
        if t == self.t_max {
            self.end.clone()
        } else if t == 0.0 {
            self.start.clone()
        } else {
            self.raw_at(t)
        }
    }
}

/// First time after which `c0 + c1 t + c2 t^2` (with `c0 >= 0`) turns negative.
fn exit_time([c0, c1, c2]: [f64; 3]) -> f64 {
    if c2 == 0.0 {
        return if c1 < 0.0 { -c0 / c1 } else { f64::INFINITY };
    }
    if c0 == 0.0 {
        // roots 0 and -c1/c2
        let other = -c1 / c2;
        return if c2 > 0.0 {
            if c1 < 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else if other > 0.0 {
            other
        } else {
            0.0
        };
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    let s = -0.5 * (c1 + c1.signum() * sq);
    let (a, b) = if s == 0.0 { (0.0, 0.0) } else { (s / c2, c0 / s) };
    let (r1, r2) = (a.min(b), a.max(b));
    if c2 > 0.0 {
        // negative strictly between the roots
        if disc == 0.0 || r1 < 0.0 {
            f64::INFINITY
        } else {
            r1
        }
    } else {
        r2.max(0.0)
    }
}

// ---------------------------------------------------------------------------
// exploration

#[derive(Debug, Clone, Copy)]
enum Frame<'a> {
    Exec(&'a Program),
    Loop { body: &'a Program, iter: u32 },
}

#[derive(Debug, Clone)]
struct Branch<'a> {
    val: Valuation,
    stack: Vec<Frame<'a>>,
    log: Vec<Event>,
    key: u64,
    /// Set after a dense duration: loops may only exit.
    exit_only: bool,
}

enum Point<'a> {
    Done,
    Abort,
    Choice(&'a Program, &'a Program),
    Loop { body: &'a Program, iter: u32 },
    Nondet { var: String, bounds: Bounds },
    Ode(Box<OdeSolution>),
}

fn leaves<'a>(p: &'a Program, out: &mut Vec<&'a Program>, limit: usize) {
    if out.len() >= limit {
        return;
    }
    match p {
        Program::Seq(a, b) => {
            leaves(a, out, limit);
            leaves(b, out, limit);
        }
        other => out.push(other),
    }
}

// statements that run next inside the current loop body, in order
fn upcoming<'a>(stack: &[Frame<'a>], limit: usize) -> Vec<&'a Program> {
    let mut out = Vec::new();
    for frame in stack.iter().rev() {
        match frame {
            Frame::Exec(p) => leaves(p, &mut out, limit),
            Frame::Loop { .. } => break,
        }
        if out.len() >= limit {
            break;
        }
    }
    out
}

fn nondet_bounds(var: &str, stack: &[Frame<'_>], s: &Valuation) -> Result<Bounds, ExecError> {
    let next = upcoming(stack, 64);
    let mut later = Vec::new();
    let mut test = None;
    for p in next {
        match p {
            Program::NondetAssign(y) => later.push(y.as_str()),
            Program::Test(f) => {
                test = Some(f);
                break;
            }
            _ => break,
        }
    }
    let Some(test) = test else { return Err(ExecError::UnboundedNondet(var.to_string())) };
    let relevant = test.conjuncts().into_iter().filter(|f| {
        let vars = f.free_vars();
        vars.contains(var) && !later.iter().any(|y| vars.contains(*y))
    });
    let b = linear_bounds(var, relevant, s);
    if b.atoms.is_empty() {
        return Err(ExecError::UnboundedNondet(var.to_string()));
    }
    Ok(b)
}

fn advance<'a>(br: &mut Branch<'a>, b: &ExplorationBudget) -> Result<Point<'a>, ExecError> {
    while let Some(frame) = br.stack.pop() {
        let p = match frame {
            Frame::Loop { body, iter } => return Ok(Point::Loop { body, iter }),
            Frame::Exec(p) => p,
        };
        match p {
            Program::Seq(a, c) => {
                br.stack.push(Frame::Exec(c));
                br.stack.push(Frame::Exec(a));
            }
            Program::Assign(x, e) => {
                let v = eval_term(e, &br.val)?;
                br.val.insert(x.clone(), v);
            }
            Program::Test(f) => {
                if !eval_formula(f, &br.val)? {
                    return Ok(Point::Abort);
                }
            }
            Program::Choice(l, r) => return Ok(Point::Choice(l, r)),
            Program::Loop(body) => return Ok(Point::Loop { body, iter: 0 }),
            Program::NondetAssign(x) => {
                let bounds = nondet_bounds(x, &br.stack, &br.val)?;
                return Ok(Point::Nondet { var: x.clone(), bounds });
            }
            Program::Ode(flows, domain) => {
                return Ok(match OdeSolution::solve(flows, domain, &br.val, b.ode_horizon)? {
                    Some(sol) => Point::Ode(Box::new(sol)),
                    None => Point::Abort,
                });
            }
        }
    }
    Ok(Point::Done)
}

fn nondet_values(bounds: &Bounds, var: &str, s: &Valuation, b: &ExplorationBudget, key: u64) -> Result<Vec<f64>, ExecError> {
    let k = b.samples_per_nondet as usize;
    let mut out = Vec::with_capacity(k);
    if bounds.lo.is_finite() {
        out.push(bounds.nudge(var, bounds.lo, s));
    }
    if bounds.hi.is_finite() && bounds.hi != bounds.lo && out.len() < k {
        out.push(bounds.nudge(var, bounds.hi, s));
    }
    if bounds.lo == bounds.hi {
        out.truncate(1);
        return Ok(out);
    }
    let (lo, hi) = match (bounds.lo.is_finite(), bounds.hi.is_finite()) {
        (true, true) => (bounds.lo, bounds.hi),
        (true, false) => (bounds.lo, bounds.lo + b.nondet_span),
        (false, true) => (bounds.hi - b.nondet_span, bounds.hi),
        (false, false) => return Err(ExecError::UnboundedNondet(var.to_string())),
    };
    let mut i = out.len() as u64;
    while out.len() < k {
        out.push(uniform(&mut keyed_rng(b.seed, child_key(key, i)), lo, hi));
        i += 1;
    }
    out.truncate(k);
    Ok(out)
}

fn ode_durations(t_max: f64, b: &ExplorationBudget, key: u64) -> Vec<(f64, bool)> {
    let mut out = vec![(t_max, false)];
    if t_max > 0.0 {
        out.push((0.0, false));
        let mut i = 2;
        while out.len() < b.durations_per_ode as usize {
            out.push((uniform(&mut keyed_rng(b.seed, child_key(key, i)), 0.0, t_max), false));
            i += 1;
        }
        out.truncate(b.durations_per_ode as usize);
        out.extend((1..=b.dense_points).map(|j| (van_der_corput(j) * t_max, true)));
    }
    out
}

struct Explorer<'b> {
    budget: &'b ExplorationBudget,
    nodes: u64,
    exhausted: bool,
}

impl<'b> Explorer<'b> {
    fn children<'a>(&self, br: Branch<'a>, point: Point<'a>) -> Result<Vec<Branch<'a>>, ExecError> {
        let b = self.budget;
        let fork = |br: &Branch<'a>, i: u64, ev: Event| {
            let mut c = br.clone();
            c.log.push(ev);
            c.key = child_key(br.key, i);
            c
        };
        Ok(match point {
            Point::Done | Point::Abort => unreachable!("leaf"),
            Point::Choice(l, r) => {
                let mut a = fork(&br, 0, Event::Choice(0));
                a.stack.push(Frame::Exec(l));
                let mut c = fork(&br, 1, Event::Choice(1));
                c.stack.push(Frame::Exec(r));
                vec![a, c]
            }
            Point::Loop { body, iter } => {
                let mut out = vec![fork(&br, 0, Event::LoopExit)];
                if iter < b.loop_depth && !br.exit_only {
                    let mut c = fork(&br, 1, Event::LoopIter);
                    c.stack.push(Frame::Loop { body, iter: iter + 1 });
                    c.stack.push(Frame::Exec(body));
                    out.push(c);
                }
                out
            }
            Point::Nondet { var, bounds } => {
                if bounds.empty() {
                    return Ok(Vec::new());
                }
                let values = nondet_values(&bounds, &var, &br.val, b, br.key)?;
                values
                    .into_iter()
                    .enumerate()
                    .map(|(i, value)| {
                        let mut c = fork(&br, i as u64, Event::Sample { var: var.clone(), value });
                        c.val.insert(var.clone(), value);
                        c
                    })
                    .collect()
            }
            Point::Ode(sol) => ode_durations(sol.t_max, b, br.key)
                .into_iter()
                .enumerate()
                .map(|(i, (t, dense))| {
                    let mut c = fork(&br, i as u64, Event::Duration { t, dense });
                    c.val = sol.at(t);
                    c.exit_only |= dense;
                    c
                })
                .collect(),
        })
    }

    fn explore(
        &mut self,
        prog: &Program,
        s0: Valuation,
        log: Vec<Event>,
        key: u64,
        sink: &mut dyn FnMut(Run) -> Result<ControlFlow<()>, ExecError>,
    ) -> Result<(), ExecError> {
        let mut work = vec![Branch { val: s0, stack: vec![Frame::Exec(prog)], log, key, exit_only: false }];
        while let Some(mut br) = work.pop() {
            let point = advance(&mut br, self.budget)?;
            let leaf = match point {
                Point::Done => Some(RunOutcome::Completed(std::mem::take(&mut br.val))),
                Point::Abort => Some(RunOutcome::Aborted),
                _ => None,
            };
            if let Some(outcome) = leaf {
                if sink(Run { outcome, log: br.log })?.is_break() {
                    return Ok(());
                }
                continue;
            }
            let mut kids = self.children(br, point)?;
            let room = self.budget.max_nodes.saturating_sub(self.nodes) as usize;
            if kids.len() > room {
                kids.truncate(room);
                self.exhausted = true;
            }
            self.nodes += kids.len() as u64;
            work.extend(kids.into_iter().rev());
        }
        Ok(())
    }
}

/// All runs of `prog` from `s0` within the budget, aborted ones included.
pub fn run(prog: &Program, s0: &Valuation, b: &ExplorationBudget) -> Result<RunSet, ExecError> {
    b.validate()?;
    let mut ex = Explorer { budget: b, nodes: 0, exhausted: false };
    let mut runs = Vec::new();
    ex.explore(prog, s0.clone(), Vec::new(), b.seed, &mut |r| {
        runs.push(r);
        Ok(ControlFlow::Continue(()))
    })?;
    Ok(RunSet { runs, exhausted: ex.exhausted })
}

// ---------------------------------------------------------------------------
// initial states and box checking

const INIT_ATTEMPTS: usize = 64;
const INIT_KEY: u64 = 0x1417;

/// Draws a valuation of the free variables of `init` that satisfies it.
///
/// Variables are drawn one at a time from the linear bounds that `init`
/// imposes given the variables drawn so far, with a quarter of the mass on
/// each finite endpoint. Variables without bounds come from
/// `[-nondet_span, nondet_span]`. Returns `None` after repeated rejection.
pub fn sample_init(init: &Formula, b: &ExplorationBudget, index: u32) -> Result<Option<Valuation>, ExecError> {
    let mut rng = keyed_rng(b.seed, child_key(INIT_KEY, u64::from(index)));
    let vars = init.free_vars();
    let conjuncts = init.conjuncts();
    for _ in 0..INIT_ATTEMPTS {
        let mut s = Valuation::new();
        let mut todo: Vec<&String> = vars.iter().collect();
        while !todo.is_empty() {
            // prefer the variable whose bounds are fully known
            let ready = |x: &str, s: &Valuation| {
                conjuncts
                    .iter()
                    .filter(|f| {
                        let fv = f.free_vars();
                        fv.contains(x) && fv.iter().all(|y| y == x || s.contains_key(y))
                    })
                    .copied()
                    .collect::<Vec<_>>()
            };
            let pos = (0..todo.len())
                .max_by_key(|&i| {
                    let r = ready(todo[i], &s).len();
                    let blocked = conjuncts.iter().filter(|f| f.free_vars().contains(todo[i].as_str())).count() - r;
                    (r > 0 && blocked == 0, r, std::cmp::Reverse(i))
                })
                .expect("non-empty");
            let x = todo.remove(pos);
            let bounds = linear_bounds(x, ready(x, &s), &s);
            let value = if bounds.empty() {
                f64::NAN
            } else {
                let (lo, hi) = match (bounds.lo.is_finite(), bounds.hi.is_finite()) {
                    (true, true) => (bounds.lo, bounds.hi),
                    (true, false) => (bounds.lo, bounds.lo + b.nondet_span),
                    (false, true) => (bounds.hi - b.nondet_span, bounds.hi),
                    (false, false) => (-b.nondet_span, b.nondet_span),
                };
                let u: f64 = rng.random();
                if u < 0.25 && bounds.lo.is_finite() {
                    bounds.nudge(x, bounds.lo, &s)
                } else if u < 0.5 && bounds.hi.is_finite() {
                    bounds.nudge(x, bounds.hi, &s)
                } else {
                    uniform(&mut rng, lo, hi)
                }
            };
            s.insert(x.clone(), value);
        }
        if eval_formula(init, &s)? {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

/// Searches for a run of `prog` from a state satisfying `init` that ends in
/// a state violating `post`. Initial states come from `sampler(i)` for
/// `i < init_samples`; `None` counts as a rejected sample.
pub fn check_box_with(
    init: &Formula,
    prog: &Program,
    post: &Formula,
    b: &ExplorationBudget,
    sampler: &mut dyn FnMut(u32) -> Result<Option<Valuation>, ExecError>,
) -> Result<Verdict, ExecError> {
    b.validate()?;
    let mut stats = SearchStats::default();
    let mut ex = Explorer { budget: b, nodes: 0, exhausted: false };
    for i in 0..b.init_samples {
        let Some(s0) = sampler(i)? else {
            stats.init_rejected += 1;
            continue;
        };
        if !eval_formula(init, &s0)? {
            stats.init_rejected += 1;
            continue;
        }
        let log: Vec<Event> = s0.iter().map(|(var, &value)| Event::Init { var: var.clone(), value }).collect();
        let mut found = None;
        ex.explore(prog, s0, log, child_key(b.seed, u64::from(i)), &mut |r| {
            match r.outcome {
                RunOutcome::Aborted => stats.aborted += 1,
                RunOutcome::Completed(s) => {
                    stats.completed += 1;
                    if !eval_formula(post, &s)? {
                        found = Some(Counterexample { log: r.log, state: s });
                        return Ok(ControlFlow::Break(()));
                    }
                }
            }
            Ok(ControlFlow::Continue(()))
        })?;
        if let Some(c) = found {
            return Ok(Verdict::Counterexample(c));
        }
    }
    stats.exhausted = ex.exhausted;
    Ok(Verdict::NoCounterexampleFound(stats))
}

/// [`check_box_with`] using [`sample_init`].
pub fn check_box(init: &Formula, prog: &Program, post: &Formula, b: &ExplorationBudget) -> Result<Verdict, ExecError> {
    check_box_with(init, prog, post, b, &mut |i| sample_init(init, b, i))
}

pub fn check_problem(p: &Problem, b: &ExplorationBudget) -> Result<Verdict, ExecError> {
    check_box(&p.init, &p.program, &p.post, b)
}

// ---------------------------------------------------------------------------
// replay

/// Re-executes the run described by `log`. The initial valuation is taken
/// from the leading `Init` events; `ode_horizon` must match the search.
pub fn replay(prog: &Program, log: &[Event], ode_horizon: f64) -> Result<RunOutcome, ExecError> {
    let mut events = log.iter().peekable();
    let mut s0 = Valuation::new();
    while let Some(Event::Init { var, value }) = events.peek() {
        s0.insert(var.clone(), *value);
        events.next();
    }
    let budget = ExplorationBudget { ode_horizon, ..ExplorationBudget::default() };
    let mut br = Branch { val: s0, stack: vec![Frame::Exec(prog)], log: Vec::new(), key: 0, exit_only: false };
    let diverged = |msg: String| ExecError::Replay(msg);
    loop {
        let point = advance(&mut br, &budget)?;
        let ev = match point {
            Point::Done | Point::Abort => {
                if let Some(ev) = events.next() {
                    return Err(diverged(format!("run ended with unused event {ev:?}")));
                }
                return Ok(match point {
                    Point::Done => RunOutcome::Completed(br.val),
                    _ => RunOutcome::Aborted,
                });
            }
            _ => events.next().ok_or_else(|| diverged("log ended before the run".into()))?,
        };
        match (point, ev) {
            (Point::Choice(l, _), Event::Choice(0)) => br.stack.push(Frame::Exec(l)),
            (Point::Choice(_, r), Event::Choice(1)) => br.stack.push(Frame::Exec(r)),
            (Point::Loop { .. }, Event::LoopExit) => {}
            (Point::Loop { body, iter }, Event::LoopIter) => {
                br.stack.push(Frame::Loop { body, iter: iter + 1 });
                br.stack.push(Frame::Exec(body));
            }
            (Point::Nondet { var, .. }, Event::Sample { var: w, value }) if var == *w => {
                br.val.insert(var, *value);
            }
            (Point::Ode(sol), Event::Duration { t, .. }) => {
                if !(*t >= 0.0 && *t <= sol.t_max) {
                    return Err(diverged(format!("duration {t} outside [0, {}]", sol.t_max)));
                }
                br.val = sol.at(*t);
            }
            (_, ev) => return Err(diverged(format!("unexpected event {ev:?}"))),
        }
    }
}
