//! Pratt parser for terms and formulas, recursive descent for programs.
//!
//! Terms and formulas share one expression grammar; operand kinds are
//! checked as nodes are built, so `x & 3` is rejected where the `&` is.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::ast::{CmpOp, Formula, Problem, Program, Term};
use crate::error::ParseError;
use crate::lexer::{tokenize, Tok, Token};

// binding powers; right-associative operators use lbp == rbp
const BP_EQUIV: (u8, u8) = (10, 11);
const BP_IMPLIES: (u8, u8) = (20, 20);
const BP_OR: (u8, u8) = (30, 31);
const BP_AND: (u8, u8) = (40, 41);
const BP_NOT: u8 = 50;
const BP_CMP: (u8, u8) = (60, 61);
const BP_ADD: (u8, u8) = (70, 71);
const BP_MUL: (u8, u8) = (80, 81);
const BP_NEG: u8 = 90;
const BP_POW: u8 = 100;

/// Minimum binding power that stops before comparisons and connectives.
const TERM_BP: u8 = 62;
/// Minimum binding power that stops before `->` and `<->`.
const INIT_BP: u8 = 21;

enum Node {
    Term(Term),
    Formula(Formula),
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

fn parse_decimal(lit: &str) -> BigRational {
    let (int, frac) = lit.split_once('.').unwrap_or((lit, ""));
    let digits: BigInt = format!("{int}{frac}").parse().expect("lexer yields digits");
    let scale = BigInt::from(10).pow(frac.len() as u32);
    BigRational::new(digits, scale)
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Self { toks: tokenize(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, tok: &Token, message: String, expected: &[&str]) -> ParseError {
        ParseError {
            line: tok.line,
            col: tok.col,
            message,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let t = &self.toks[self.pos];
        self.error_at(t, format!("unexpected {}", t.tok), expected)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&[what]))
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected(&["end of input"]))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn term(&mut self, min_bp: u8) -> Result<Term, ParseError> {
        let at = self.toks[self.pos].clone();
        match self.expr(min_bp)? {
            Node::Term(t) => Ok(t),
            Node::Formula(_) => Err(self.error_at(&at, "expected a term, found a formula".into(), &[])),
        }
    }

    fn formula(&mut self, min_bp: u8) -> Result<Formula, ParseError> {
        let at = self.toks[self.pos].clone();
        match self.expr(min_bp)? {
            Node::Formula(f) => Ok(f),
            Node::Term(_) => Err(self.error_at(&at, "expected a formula, found a term".into(), &[])),
        }
    }

    fn prefix(&mut self) -> Result<Node, ParseError> {
        let tok = self.bump();
        Ok(match tok.tok {
            Tok::Number(lit) => Node::Term(Term::Num(parse_decimal(&lit))),
            Tok::Ident(name) => Node::Term(Term::Var(name)),
            Tok::True => Node::Formula(Formula::True),
            Tok::False => Node::Formula(Formula::False),
            Tok::Minus => Node::Term(Term::neg(self.term(BP_NEG)?)),
            Tok::Bang => Node::Formula(Formula::not(self.formula(BP_NOT)?)),
            Tok::Forall | Tok::Exists => {
                let x = self.ident()?;
                let body = Box::new(self.formula(BP_NOT)?);
                Node::Formula(if tok.tok == Tok::Forall { Formula::Forall(x, body) } else { Formula::Exists(x, body) })
            }
            Tok::LParen => {
                let inner = self.expr(0)?;
                self.expect(Tok::RParen, "`)`")?;
                inner
            }
            _ => {
                return Err(self.error_at(
                    &tok,
                    format!("unexpected {}", tok.tok),
                    &["number", "identifier", "`(`", "`-`", "`!`", "`true`", "`false`"],
                ));
            }
        })
    }

    fn infix_bp(tok: &Tok) -> Option<(u8, u8)> {
        Some(match tok {
            Tok::Equiv => BP_EQUIV,
            Tok::Arrow => BP_IMPLIES,
            Tok::Bar => BP_OR,
            Tok::Amp => BP_AND,
            Tok::Ge | Tok::Gt | Tok::Le | Tok::Lt | Tok::Eq | Tok::Ne => BP_CMP,
            Tok::Plus | Tok::Minus => BP_ADD,
            Tok::Star => BP_MUL,
            Tok::Caret => (BP_POW, BP_POW),
            _ => return None,
        })
    }

    fn expr(&mut self, min_bp: u8) -> Result<Node, ParseError> {
        let mut lhs = self.prefix()?;
        loop {
            let Some((lbp, rbp)) = Self::infix_bp(self.peek()) else { break };
            if lbp < min_bp {
                break;
            }
            let op = self.bump();
            if op.tok == Tok::Caret {
                let base = self.as_term(lhs, &op)?;
                let exp_tok = self.bump();
                let exp = match &exp_tok.tok {
                    Tok::Number(lit) if !lit.contains('.') => lit.parse::<u32>().ok().filter(|&n| n > 0),
                    _ => None,
                };
                let Some(n) = exp else {
                    return Err(self.error_at(&exp_tok, format!("unexpected {}", exp_tok.tok), &["positive integer exponent"]));
                };
                lhs = Node::Term(Term::pow(base, n));
                continue;
            }
            let rhs = self.expr(rbp)?;
            lhs = self.combine(&op, lhs, rhs)?;
            if lbp == BP_CMP.0 && Self::infix_bp(self.peek()) == Some(BP_CMP) {
                return Err(self.unexpected(&["`&`", "`|`", "`->`"]).with_message("comparisons do not chain"));
            }
        }
        Ok(lhs)
    }

    fn as_term(&self, n: Node, op: &Token) -> Result<Term, ParseError> {
        match n {
            Node::Term(t) => Ok(t),
            Node::Formula(_) => Err(self.error_at(op, format!("operand of {} must be a term", op.tok), &[])),
        }
    }

    fn as_formula(&self, n: Node, op: &Token) -> Result<Formula, ParseError> {
        match n {
            Node::Formula(f) => Ok(f),
            Node::Term(_) => Err(self.error_at(op, format!("operand of {} must be a formula", op.tok), &[])),
        }
    }

    fn combine(&self, op: &Token, lhs: Node, rhs: Node) -> Result<Node, ParseError> {
        let cmp = |o, lhs, rhs| -> Result<Formula, ParseError> {
            Ok(Formula::cmp(o, self.as_term(lhs, op)?, self.as_term(rhs, op)?))
        };
        Ok(match op.tok {
            Tok::Plus => Node::Term(Term::add(self.as_term(lhs, op)?, self.as_term(rhs, op)?)),
            Tok::Minus => Node::Term(Term::sub(self.as_term(lhs, op)?, self.as_term(rhs, op)?)),
            Tok::Star => Node::Term(Term::mul(self.as_term(lhs, op)?, self.as_term(rhs, op)?)),
            Tok::Ge => Node::Formula(cmp(CmpOp::Ge, lhs, rhs)?),
            Tok::Gt => Node::Formula(cmp(CmpOp::Gt, lhs, rhs)?),
            Tok::Le => Node::Formula(cmp(CmpOp::Le, lhs, rhs)?),
            Tok::Lt => Node::Formula(cmp(CmpOp::Lt, lhs, rhs)?),
            Tok::Eq => Node::Formula(cmp(CmpOp::Eq, lhs, rhs)?),
            Tok::Ne => Node::Formula(Formula::not(cmp(CmpOp::Eq, lhs, rhs)?)),
            Tok::Amp => Node::Formula(Formula::and(self.as_formula(lhs, op)?, self.as_formula(rhs, op)?)),
            Tok::Bar => Node::Formula(Formula::or(self.as_formula(lhs, op)?, self.as_formula(rhs, op)?)),
            Tok::Arrow => Node::Formula(Formula::implies(self.as_formula(lhs, op)?, self.as_formula(rhs, op)?)),
            Tok::Equiv => Node::Formula(Formula::Equiv(
                Box::new(self.as_formula(lhs, op)?),
                Box::new(self.as_formula(rhs, op)?),
            )),
            _ => unreachable!("not an infix operator"),
        })
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let first = self.sequence()?;
        if *self.peek() == Tok::ChoiceOp {
            self.bump();
            let rest = self.program()?;
            return Ok(Program::choice(first, rest));
        }
        Ok(first)
    }

    fn sequence(&mut self) -> Result<Program, ParseError> {
        let first = self.statement()?;
        if *self.peek() == Tok::Semi {
            self.bump();
            if matches!(self.peek(), Tok::RBrace | Tok::RBracket | Tok::Eof | Tok::ChoiceOp) {
                return Ok(first);
            }
            let rest = self.sequence()?;
            return Ok(Program::seq(first, rest));
        }
        Ok(first)
    }

    fn statement(&mut self) -> Result<Program, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                self.expect(Tok::Assign, "`:=`")?;
                if *self.peek() == Tok::Star {
                    self.bump();
                    Ok(Program::NondetAssign(name))
                } else {
                    Ok(Program::Assign(name, self.term(TERM_BP)?))
                }
            }
            Tok::Question => {
                self.bump();
                Ok(Program::Test(self.formula(0)?))
            }
            Tok::LBrace => {
                self.bump();
                if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Prime {
                    return self.ode();
                }
                let body = self.program()?;
                self.expect(Tok::RBrace, "`}`")?;
                if *self.peek() == Tok::Star {
                    self.bump();
                    return Ok(Program::repeat(body));
                }
                Ok(body)
            }
            _ => Err(self.unexpected(&["identifier", "`?`", "`{`"])),
        }
    }

    fn ode(&mut self) -> Result<Program, ParseError> {
        let mut flows = Vec::new();
        loop {
            let at = self.toks[self.pos].clone();
            let x = self.ident()?;
            if flows.iter().any(|(y, _)| *y == x) {
                return Err(self.error_at(&at, format!("duplicate derivative for `{x}`"), &[]));
            }
            self.expect(Tok::Prime, "`'`")?;
            self.expect(Tok::Eq, "`=`")?;
            flows.push((x, self.term(TERM_BP)?));
            if *self.peek() == Tok::Comma {
                self.bump();
                continue;
            }
            break;
        }
        let domain = if *self.peek() == Tok::Amp {
            self.bump();
            self.formula(0)?
        } else {
            Formula::True
        };
        self.expect(Tok::RBrace, "`}`")?;
        Ok(Program::Ode(flows, domain))
    }
}

impl ParseError {
    fn with_message(mut self, m: &str) -> Self {
        self.message = m.to_string();
        self.expected.clear();
        self
    }
}

pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.term(0)?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_formula(src: &str) -> Result<Formula, ParseError> {
    let mut p = Parser::new(src)?;
    let f = p.formula(0)?;
    p.expect_eof()?;
    Ok(f)
}

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(src)?;
    let prog = p.program()?;
    p.expect_eof()?;
    Ok(prog)
}

/// Parses `init -> [program] post`.
pub fn parse_problem(src: &str) -> Result<Problem, ParseError> {
    let mut p = Parser::new(src)?;
    let init = p.formula(INIT_BP)?;
    p.expect(Tok::Arrow, "`->`")?;
    p.expect(Tok::LBracket, "`[`")?;
    let program = p.program()?;
    p.expect(Tok::RBracket, "`]`")?;
    let post = p.formula(0)?;
    p.expect_eof()?;
    Ok(Problem { init, program, post })
}

/// Exact value of a decimal literal such as `0.125`.
pub fn decimal(lit: &str) -> Option<BigRational> {
    let ok = !lit.is_empty()
        && lit.split('.').count() <= 2
        && lit.split('.').all(|part| !part.is_empty() && part.bytes().all(|b| b.is_ascii_digit()));
    ok.then(|| parse_decimal(lit))
}

/// True if `r` has a finite decimal expansion.
pub fn is_decimal(r: &BigRational) -> bool {
    let mut d = r.denom().clone();
    for f in [2, 5] {
        let f = BigInt::from(f);
        while (&d % &f).is_zero() {
            d /= &f;
        }
    }
    d.is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &str) -> Term {
        Term::var(x)
    }

    #[test]
    fn program_examples() {
        assert_eq!(
            parse_program("a := *; ?(a <= 2)").unwrap(),
            Program::seq(Program::nondet("a"), Program::test(Formula::cmp(CmpOp::Le, v("a"), Term::int(2))))
        );
        assert_eq!(
            parse_program("x := 1 ++ x := 2").unwrap(),
            Program::choice(Program::assign("x", Term::int(1)), Program::assign("x", Term::int(2)))
        );
        let plant = parse_program("{t := 0; {x'=v, v'=as, t'=1 & v >= 0 & t <= T}}*").unwrap();
        let Program::Loop(body) = plant else { panic!() };
        let Program::Seq(a, b) = *body else { panic!() };
        assert_eq!(*a, Program::assign("t", Term::int(0)));
        let Program::Ode(flows, dom) = *b else { panic!() };
        assert_eq!(flows.len(), 3);
        assert_eq!(dom.conjuncts().len(), 2);
    }

    #[test]
    fn choice_is_looser_than_sequence() {
        let p = parse_program("a := 1; b := 2 ++ c := 3").unwrap();
        assert_eq!(
            p,
            Program::choice(
                Program::seq(Program::assign("a", Term::int(1)), Program::assign("b", Term::int(2))),
                Program::assign("c", Term::int(3))
            )
        );
    }

    #[test]
    fn trailing_semicolons() {
        assert_eq!(parse_program("x := 1;").unwrap(), Program::assign("x", Term::int(1)));
        assert!(parse_program("{x := 1;}*").is_ok());
        assert!(parse_program("x := 1;;").is_err());
    }

    #[test]
    fn formula_examples() {
        assert_eq!(
            parse_formula("x >= xc -> v <= vc").unwrap(),
            Formula::implies(Formula::cmp(CmpOp::Ge, v("x"), v("xc")), Formula::cmp(CmpOp::Le, v("v"), v("vc")))
        );
        assert!(matches!(parse_formula("v >= 0 & t <= T").unwrap(), Formula::And(..)));
        let e = parse_formula("x >=").unwrap_err();
        assert_eq!((e.line, e.col), (1, 5));
    }

    #[test]
    fn precedence_of_terms() {
        assert_eq!(
            parse_term("a - b - c").unwrap(),
            Term::sub(Term::sub(v("a"), v("b")), v("c"))
        );
        assert_eq!(parse_term("-x^2").unwrap(), Term::neg(Term::pow(v("x"), 2)));
        assert_eq!(parse_term("2*x + 1").unwrap(), Term::add(Term::mul(Term::int(2), v("x")), Term::int(1)));
        assert_eq!(parse_term("0.125").unwrap(), Term::Num(BigRational::new(1.into(), 8.into())));
    }

    #[test]
    fn kind_errors() {
        assert!(parse_formula("x & 3").is_err());
        assert!(parse_formula("x + (y > 1)").is_err());
        assert!(parse_formula("a < b < c").is_err());
        assert!(parse_term("x ^ 0").is_err());
        assert!(parse_term("x ^ 1.5").is_err());
        assert!(parse_program("x := y > 0").is_err());
    }

    #[test]
    fn problem_shape() {
        let p = parse_problem("x = 0 -> [x := 1 ++ x := 2] x <= 2").unwrap();
        assert_eq!(p.init, Formula::cmp(CmpOp::Eq, v("x"), Term::int(0)));
        assert!(matches!(p.program, Program::Choice(..)));
    }

    #[test]
    fn not_equal_sugar() {
        assert_eq!(
            parse_formula("x != 1").unwrap(),
            Formula::not(Formula::cmp(CmpOp::Eq, v("x"), Term::int(1)))
        );
    }

    #[test]
    fn decimals() {
        assert!(decimal("1.").is_none());
        assert_eq!(decimal("2.50"), Some(BigRational::new(5.into(), 2.into())));
        assert!(is_decimal(&BigRational::new(3.into(), 40.into())));
        assert!(!is_decimal(&BigRational::new(1.into(), 3.into())));
    }
}
