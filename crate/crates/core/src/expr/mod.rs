//! Closed-form scalar expressions over chart coordinates.
//!
//! An [`Expr`] is an immutable, reference-counted tree (in practice a DAG,
//! since derivatives reuse the subtrees of their source). Constants are exact
//! rationals until evaluation. The vocabulary is closed: arithmetic, integer
//! powers, `exp`, `log`, `sin` and `cos`, which keeps differentiation total.

mod diff;
mod eval;
mod parse;
mod simplify;

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub use diff::Differentiator;
pub use eval::{Batch, BatchBuilder, BatchValues, EvalError, Point, Slot, Tape};
pub use parse::{parse, parse_with_coords, ParseError, ParseErrorKind};
pub use simplify::simplify;

/// The elementary functions understood by the parser and differentiator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            _ => None,
        }
    }
}

#[derive(Debug, PartialEq)]
pub enum Node {
    Const(BigRational),
    Coord(Arc<str>),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, i32),
    Apply(Func, Expr),
}

/// Shared handle to an expression node.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    /// Wraps a node without any rewriting. The parser uses this so that the
    /// tree mirrors the source text.
    pub fn raw(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn rational(value: BigRational) -> Expr {
        Expr::raw(Node::Const(value))
    }

    pub fn int(value: i64) -> Expr {
        Expr::rational(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn ratio(num: i64, den: i64) -> Expr {
        Expr::rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn coord(name: &str) -> Expr {
        Expr::raw(Node::Coord(Arc::from(name)))
    }

    pub fn as_const(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(|c| c.is_one())
    }

    /// Sum with light folding: constants combine, zeros vanish.
    pub fn add(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::rational(x + y),
            (Some(x), _) if x.is_zero() => b.clone(),
            (_, Some(y)) if y.is_zero() => a.clone(),
            _ => match b.node() {
                Node::Neg(inner) => Expr::raw(Node::Sub(a.clone(), inner.clone())),
                _ => Expr::raw(Node::Add(a.clone(), b.clone())),
            },
        }
    }

    pub fn sub(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::rational(x - y),
            (Some(x), _) if x.is_zero() => Expr::neg(b),
            (_, Some(y)) if y.is_zero() => a.clone(),
            _ => match b.node() {
                Node::Neg(inner) => Expr::raw(Node::Add(a.clone(), inner.clone())),
                _ => Expr::raw(Node::Sub(a.clone(), b.clone())),
            },
        }
    }

    /// Product with light folding. Constant factors are moved to the left
    /// and merged with a constant left factor of the other operand.
    pub fn mul(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::rational(x * y),
            (Some(x), _) => Expr::scale(x, b),
            (_, Some(y)) => Expr::scale(y, a),
            _ => match (a.node(), b.node()) {
                (Node::Neg(p), Node::Neg(q)) => Expr::mul(p, q),
                (Node::Neg(p), _) => Expr::neg(&Expr::mul(p, b)),
                (_, Node::Neg(q)) => Expr::neg(&Expr::mul(a, q)),
                // (c / d) · d = c
                (Node::Div(c, d), _) if cheap_eq(d, b) => c.clone(),
                (_, Node::Div(c, d)) if cheap_eq(a, d) => c.clone(),
                _ => Expr::raw(Node::Mul(a.clone(), b.clone())),
            },
        }
    }

    fn scale(c: &BigRational, e: &Expr) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        if c.is_one() {
            return e.clone();
        }
        if (-c).is_one() {
            return Expr::neg(e);
        }
        match e.node() {
            Node::Mul(l, r) => {
                if let Some(k) = l.as_const() {
                    return Expr::scale(&(c * k), r);
                }
                Expr::raw(Node::Mul(Expr::rational(c.clone()), e.clone()))
            }
            Node::Neg(inner) => Expr::scale(&-c, inner),
            _ => Expr::raw(Node::Mul(Expr::rational(c.clone()), e.clone())),
        }
    }

    pub fn div(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if !y.is_zero() => Expr::rational(x / y),
            (Some(x), _) if x.is_zero() => Expr::zero(),
            (_, Some(y)) if y.is_one() => a.clone(),
            (_, Some(y)) if !y.is_zero() => Expr::scale(&y.recip(), a),
            _ if cheap_eq(a, b) => Expr::one(),
            _ => match b.node() {
                Node::Neg(q) => Expr::neg(&Expr::div(a, q)),
                _ => Expr::raw(Node::Div(a.clone(), b.clone())),
            },
        }
    }

    pub fn neg(a: &Expr) -> Expr {
        match a.node() {
            Node::Const(c) => Expr::rational(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::raw(Node::Neg(a.clone())),
        }
    }

    pub fn powi(a: &Expr, k: i32) -> Expr {
        match k {
            0 => return Expr::one(),
            1 => return a.clone(),
            _ => {}
        }
        if let Some(c) = a.as_const() {
            if !c.is_zero() || k > 0 {
                return Expr::rational(pow_rational(c, k));
            }
        }
        match a.node() {
            Node::Pow(base, j) => match j.checked_mul(k) {
                Some(jk) => Expr::powi(base, jk),
                None => Expr::raw(Node::Pow(a.clone(), k)),
            },
            _ => Expr::raw(Node::Pow(a.clone(), k)),
        }
    }

    pub fn apply(f: Func, a: &Expr) -> Expr {
        if a.is_zero() {
            match f {
                Func::Exp | Func::Cos => return Expr::one(),
                Func::Sin => return Expr::zero(),
                Func::Log => {}
            }
        }
        if f == Func::Log && a.is_one() {
            return Expr::zero();
        }
        Expr::raw(Node::Apply(f, a.clone()))
    }

    pub fn exp(a: &Expr) -> Expr {
        Expr::apply(Func::Exp, a)
    }

    pub fn log(a: &Expr) -> Expr {
        Expr::apply(Func::Log, a)
    }

    pub fn sin(a: &Expr) -> Expr {
        Expr::apply(Func::Sin, a)
    }

    pub fn cos(a: &Expr) -> Expr {
        Expr::apply(Func::Cos, a)
    }

    /// Sum of many terms, skipping zeros.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms
            .into_iter()
            .fold(Expr::zero(), |acc, t| Expr::add(&acc, &t))
    }

    /// Partial derivative with respect to coordinate `coord`.
    pub fn diff(&self, coord: &str) -> Expr {
        Differentiator::new(coord).diff(self)
    }

    /// Evaluates at a point that assigns every coordinate used here.
    pub fn eval(&self, point: &Point) -> Result<f64, EvalError> {
        let tape = Tape::compile(std::slice::from_ref(self), point.names())?;
        Ok(tape.eval(point.values())?[0])
    }

    /// Replaces coordinates by expressions, leaving unmapped names alone.
    pub fn substitute(&self, map: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        let mut memo = std::collections::HashMap::new();
        substitute_memo(self, map, &mut memo)
    }

    /// Distinct coordinate names referenced by this expression.
    pub fn coordinates(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        let mut names = std::collections::BTreeSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.id()) {
                continue;
            }
            match e.node() {
                Node::Const(_) => {}
                Node::Coord(n) => {
                    names.insert(n.to_string());
                }
                Node::Neg(a) | Node::Pow(a, _) | Node::Apply(_, a) => stack.push(a.clone()),
                Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                    stack.push(a.clone());
                    stack.push(b.clone());
                }
            }
        }
        names.into_iter().collect()
    }
}

/// Coordinate substitution with a cache shared across calls, so pulling
/// back many components keeps their common subexpressions shared.
pub struct Substitution<'a> {
    map: &'a dyn Fn(&str) -> Option<Expr>,
    memo: std::collections::HashMap<usize, Expr>,
    // keeps cached keys alive so their ids are not reused
    keys: Vec<Expr>,
}

impl<'a> Substitution<'a> {
    pub fn new(map: &'a dyn Fn(&str) -> Option<Expr>) -> Self {
        Substitution { map, memo: std::collections::HashMap::new(), keys: Vec::new() }
    }

    pub fn apply(&mut self, e: &Expr) -> Expr {
        let before = self.memo.len();
        let out = substitute_memo(e, self.map, &mut self.memo);
        if self.memo.len() > before {
            self.keys.push(e.clone());
        }
        out
    }
}

/// Structural equality that gives up (returning `false`) after visiting a
/// small number of nodes, so folding rules stay cheap on large DAGs.
fn cheap_eq(a: &Expr, b: &Expr) -> bool {
    fn go(a: &Expr, b: &Expr, budget: &mut usize) -> bool {
        if a.ptr_eq(b) {
            return true;
        }
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        match (a.node(), b.node()) {
            (Node::Const(x), Node::Const(y)) => x == y,
            (Node::Coord(x), Node::Coord(y)) => x == y,
            (Node::Neg(x), Node::Neg(y)) => go(x, y, budget),
            (Node::Add(x1, x2), Node::Add(y1, y2))
            | (Node::Sub(x1, x2), Node::Sub(y1, y2))
            | (Node::Mul(x1, x2), Node::Mul(y1, y2))
            | (Node::Div(x1, x2), Node::Div(y1, y2)) => go(x1, y1, budget) && go(x2, y2, budget),
            (Node::Pow(x, j), Node::Pow(y, k)) => j == k && go(x, y, budget),
            (Node::Apply(f, x), Node::Apply(g, y)) => f == g && go(x, y, budget),
            _ => false,
        }
    }
    go(a, b, &mut 32)
}

fn substitute_memo(
    e: &Expr,
    map: &dyn Fn(&str) -> Option<Expr>,
    memo: &mut std::collections::HashMap<usize, Expr>,
) -> Expr {
    if let Some(hit) = memo.get(&e.id()) {
        return hit.clone();
    }
    let out = match e.node() {
        Node::Const(_) => e.clone(),
        Node::Coord(name) => map(name).unwrap_or_else(|| e.clone()),
        Node::Neg(a) => Expr::neg(&substitute_memo(a, map, memo)),
        Node::Add(a, b) => Expr::add(&substitute_memo(a, map, memo), &substitute_memo(b, map, memo)),
        Node::Sub(a, b) => Expr::sub(&substitute_memo(a, map, memo), &substitute_memo(b, map, memo)),
        Node::Mul(a, b) => Expr::mul(&substitute_memo(a, map, memo), &substitute_memo(b, map, memo)),
        Node::Div(a, b) => Expr::div(&substitute_memo(a, map, memo), &substitute_memo(b, map, memo)),
        Node::Pow(a, k) => Expr::powi(&substitute_memo(a, map, memo), *k),
        Node::Apply(f, a) => Expr::apply(*f, &substitute_memo(a, map, memo)),
    };
    memo.insert(e.id(), out.clone());
    out
}

fn pow_rational(c: &BigRational, k: i32) -> BigRational {
    let base = if k < 0 { c.recip() } else { c.clone() };
    let mut acc = BigRational::one();
    for _ in 0..k.unsigned_abs() {
        acc *= &base;
    }
    acc
}

pub(crate) fn rational_to_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or_else(|| {
        if c.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

// Precedence levels used by the printer; higher binds tighter.
const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POWER: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Const(c) if c.is_negative() => PREC_UNARY,
        Node::Const(c) if !c.is_integer() => PREC_PRODUCT,
        Node::Const(_) | Node::Coord(_) | Node::Apply(..) => PREC_ATOM,
        Node::Add(..) | Node::Sub(..) => PREC_SUM,
        Node::Mul(..) | Node::Div(..) => PREC_PRODUCT,
        Node::Neg(_) => PREC_UNARY,
        Node::Pow(..) => PREC_POWER,
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if precedence(e) < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => {
                if c.is_integer() {
                    write!(f, "{}", c.numer())
                } else {
                    write!(f, "{}/{}", c.numer(), c.denom())
                }
            }
            Node::Coord(name) => f.write_str(name),
            Node::Neg(a) => {
                f.write_str("-")?;
                write_operand(f, a, PREC_POWER)
            }
            Node::Add(a, b) => {
                write_operand(f, a, PREC_SUM)?;
                f.write_str(" + ")?;
                write_operand(f, b, PREC_SUM)
            }
            Node::Sub(a, b) => {
                write_operand(f, a, PREC_SUM)?;
                f.write_str(" - ")?;
                write_operand(f, b, PREC_PRODUCT)
            }
            Node::Mul(a, b) => {
                write_operand(f, a, PREC_PRODUCT)?;
                f.write_str("*")?;
                write_operand(f, b, PREC_UNARY)
            }
            Node::Div(a, b) => {
                write_operand(f, a, PREC_PRODUCT)?;
                f.write_str("/")?;
                write_operand(f, b, PREC_UNARY.max(PREC_PRODUCT + 1))
            }
            Node::Pow(a, k) => {
                write_operand(f, a, PREC_ATOM)?;
                write!(f, "^{k}")
            }
            Node::Apply(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl std::ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl std::ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl std::ops::Div for &Expr {
    type Output = Expr;
    fn div(self, rhs: &Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(&self, &rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(&self, &rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(&self, &rhs)
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(&self, &rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Expr {
        Expr::int(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding_constructors() {
        let x = Expr::coord("x");
        assert_eq!(Expr::add(&Expr::zero(), &x), x);
        assert!(Expr::mul(&Expr::zero(), &x).is_zero());
        assert_eq!(Expr::mul(&Expr::one(), &x), x);
        assert_eq!(Expr::neg(&Expr::neg(&x)), x);
        assert!(Expr::powi(&x, 0).is_one());
        assert_eq!(Expr::powi(&x, 1), x);
        assert_eq!(Expr::add(&Expr::int(2), &Expr::ratio(1, 2)), Expr::ratio(5, 2));
    }

    #[test]
    fn constant_factors_merge() {
        let z = Expr::coord("z");
        let e = Expr::mul(&Expr::int(3), &Expr::mul(&Expr::int(-2), &z));
        assert_eq!(e.to_string(), "-6*z");
    }

    #[test]
    fn printing_respects_precedence() {
        let x = Expr::coord("x");
        let y = Expr::coord("y");
        let e = Expr::raw(Node::Sub(x.clone(), Expr::raw(Node::Sub(y.clone(), x.clone()))));
        assert_eq!(e.to_string(), "x - (y - x)");
        let p = Expr::raw(Node::Neg(Expr::raw(Node::Pow(x.clone(), 2))));
        assert_eq!(p.to_string(), "-x^2");
        let q = Expr::raw(Node::Pow(Expr::int(-2), 3));
        assert_eq!(q.to_string(), "(-2)^3");
        let r = Expr::raw(Node::Div(x, Expr::ratio(1, 3)));
        assert_eq!(r.to_string(), "x/(1/3)");
    }

    #[test]
    fn coordinates_are_collected() {
        let e = parse("x*exp(y) + sin(x)").unwrap();
        assert_eq!(e.coordinates(), vec!["x".to_string(), "y".to_string()]);
    }
}
