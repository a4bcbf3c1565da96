use std::collections::HashMap;

use super::{Expr, Func, Node};

/// Symbolic partial differentiation with respect to one coordinate.
///
/// Results are memoized by node identity, so differentiating many
/// expressions that share subtrees (as tensor components usually do) costs
/// one pass over the shared DAG. The cache keeps its keys alive.
pub struct Differentiator {
    coord: String,
    memo: HashMap<usize, (Expr, Expr)>,
}

impl Differentiator {
    pub fn new(coord: &str) -> Self {
        Differentiator { coord: coord.to_string(), memo: HashMap::new() }
    }

    pub fn coord(&self) -> &str {
        &self.coord
    }

    pub fn diff(&mut self, e: &Expr) -> Expr {
        if let Some((_, d)) = self.memo.get(&e.id()) {
            return d.clone();
        }
        let d = match e.node() {
            Node::Const(_) => Expr::zero(),
            Node::Coord(name) => {
                if **name == *self.coord {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Neg(a) => Expr::neg(&self.diff(a)),
            Node::Add(a, b) => Expr::add(&self.diff(a), &self.diff(b)),
            Node::Sub(a, b) => Expr::sub(&self.diff(a), &self.diff(b)),
            Node::Mul(a, b) => {
                let da = self.diff(a);
                let db = self.diff(b);
                Expr::add(&Expr::mul(&da, b), &Expr::mul(a, &db))
            }
            Node::Div(a, b) => {
                let da = self.diff(a);
                let db = self.diff(b);
                if db.is_zero() {
                    Expr::div(&da, b)
                } else {
                    let num = Expr::sub(&Expr::mul(&da, b), &Expr::mul(a, &db));
                    Expr::div(&num, &Expr::powi(b, 2))
                }
            }
            Node::Pow(a, k) => {
                let da = self.diff(a);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    let outer = Expr::mul(&Expr::int(i64::from(*k)), &Expr::powi(a, k - 1));
                    Expr::mul(&outer, &da)
                }
            }
            Node::Apply(f, a) => {
                let da = self.diff(a);
                if da.is_zero() {
                    Expr::zero()
                } else {
                    match f {
                        Func::Exp => Expr::mul(&da, e),
                        Func::Log => Expr::div(&da, a),
                        Func::Sin => Expr::mul(&da, &Expr::cos(a)),
                        Func::Cos => Expr::neg(&Expr::mul(&da, &Expr::sin(a))),
                    }
                }
            }
        };
        self.memo.insert(e.id(), (e.clone(), d.clone()));
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Point};

    fn at(e: &Expr, pairs: &[(&str, f64)]) -> f64 {
        e.eval(&Point::from_pairs(pairs)).unwrap()
    }

    #[test]
    fn chain_rule_through_exp() {
        let e = parse("exp(-2*z)").unwrap();
        let d = e.diff("z");
        assert_eq!(d.to_string(), "-2*exp(-2*z)");
    }

    #[test]
    fn independent_coordinate_gives_zero() {
        let d = parse("x*y").unwrap().diff("z");
        assert!(d.is_zero());
    }

    #[test]
    fn alpha_derivative_matches_central_difference() {
        let alpha = parse("exp(-2*z)").unwrap();
        let d = alpha.diff("z");
        let h = 1e-6;
        let fd = (at(&alpha, &[("z", 0.3 + h)]) - at(&alpha, &[("z", 0.3 - h)])) / (2.0 * h);
        let exact = at(&d, &[("z", 0.3)]);
        assert!(((exact - fd) / exact).abs() < 1e-6);
        assert!((exact - (-2.0 * (-0.6f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn quotient_log_and_trig_rules() {
        let e = parse("log(x)/sin(x) + cos(x)^3").unwrap();
        let d = e.diff("x");
        let x: f64 = 0.7;
        let want = (1.0 / x) / x.sin() - x.ln() * x.cos() / x.sin().powi(2)
            - 3.0 * x.cos().powi(2) * x.sin();
        assert!((at(&d, &[("x", x)]) - want).abs() < 1e-13);
    }

    #[test]
    fn shared_subtrees_are_differentiated_once() {
        let base = parse("exp(x*y)").unwrap();
        let e = Expr::mul(&base, &base);
        let mut dx = Differentiator::new("x");
        let d1 = dx.diff(&base);
        let d2 = dx.diff(&base);
        assert!(d1.ptr_eq(&d2));
        let de = dx.diff(&e);
        let v = at(&de, &[("x", 0.2), ("y", 0.5)]);
        let want = 2.0 * 0.5 * (2.0 * 0.2 * 0.5f64).exp();
        assert!((v - want).abs() < 1e-14);
    }
}
