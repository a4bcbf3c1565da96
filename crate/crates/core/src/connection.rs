//! Affine connections in coordinate components and their curvature.
//!
//! Conventions: `∇_{∂_i} ∂_j = Γ^k_{ij} ∂_k`, stored as `coeffs[[k, i, j]]`;
//! `R(∂_i, ∂_j) ∂_k = R^l_{kij} ∂_l`, stored as `riemann[[l, k, i, j]]`;
//! `S(Y, Z) = tr(X ↦ R(X, Y) Z)`; `g(QX, Y) = S(X, Y)`; `r = g^{ij} S_{ij}`.

use std::sync::Arc;

use ndarray::{ArrayD, Dimension, IxDyn};
use thiserror::Error;

use crate::expr::{BatchBuilder, EvalError, Expr};
use crate::lcs::LcsStructure;
use crate::manifold::{Chart, ManifoldError, Metric, TensorField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConnectionError {
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("coefficient array has shape {0:?}")]
    BadShape(Vec<usize>),
    #[error("Levi-Civita coefficients need a symbolic inverse metric (dimension {0})")]
    NoSymbolicInverse(usize),
}

#[derive(Debug, Clone)]
pub struct Connection {
    chart: Arc<Chart>,
    coeffs: ArrayD<Expr>,
    torsion_free: bool,
}

impl Connection {
    pub fn new(
        chart: &Arc<Chart>,
        coeffs: ArrayD<Expr>,
        torsion_free: bool,
    ) -> Result<Connection, ConnectionError> {
        let n = chart.dim();
        if coeffs.shape() != [n, n, n] {
            return Err(ConnectionError::BadShape(coeffs.shape().to_vec()));
        }
        Ok(Connection { chart: chart.clone(), coeffs, torsion_free })
    }

    /// `Γ^k_{ij} = ½ g^{kl} (∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})`.
    pub fn levi_civita(g: &Metric) -> Result<Connection, ConnectionError> {
        let n = g.dim();
        let inv = g.inverse_field().ok_or(ConnectionError::NoSymbolicInverse(n))?;
        let dg = g.field().partials();
        let half = Expr::ratio(1, 2);
        // first kind: Γ_{lij}
        let first = ArrayD::from_shape_fn(IxDyn(&[n, n, n]), |ix| {
            let (l, i, j) = (ix[0], ix[1], ix[2]);
            let s = Expr::sub(&Expr::add(&dg[[j, l, i]], &dg[[i, l, j]]), &dg[[i, j, l]]);
            Expr::mul(&half, &s)
        });
        let coeffs = ArrayD::from_shape_fn(IxDyn(&[n, n, n]), |ix| {
            let (k, i, j) = (ix[0], ix[1], ix[2]);
            Expr::sum((0..n).map(|l| Expr::mul(inv.get(&[k, l]), &first[[l, i, j]])))
        });
        Ok(Connection { chart: g.chart().clone(), coeffs, torsion_free: true })
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn coeffs(&self) -> &ArrayD<Expr> {
        &self.coeffs
    }

    pub fn gamma(&self, k: usize, i: usize, j: usize) -> &Expr {
        &self.coeffs[[k, i, j]]
    }

    pub fn is_torsion_free(&self) -> bool {
        self.torsion_free
    }

    /// A copy with `delta` added to one coefficient; the result is no
    /// longer assumed torsion-free.
    pub fn perturbed(&self, k: usize, i: usize, j: usize, delta: &Expr) -> Connection {
        let mut coeffs = self.coeffs.clone();
        coeffs[[k, i, j]] = Expr::add(&coeffs[[k, i, j]], delta);
        Connection { chart: self.chart.clone(), coeffs, torsion_free: false }
    }

    fn same_chart(&self, t: &TensorField) -> Result<(), ConnectionError> {
        if *self.chart == **t.chart() {
            Ok(())
        } else {
            Err(ManifoldError::ChartMismatch.into())
        }
    }
}

/// `∇̄_X Y = ∇_X Y + η(Y) φX − g(φX, Y) ξ`.
pub fn quarter_symmetric(ambient: &Connection, l: &LcsStructure) -> Result<Connection, ConnectionError> {
    quarter_symmetric_from(ambient, l.metric(), l.eta(), l.phi(), l.xi())
}

/// The quarter-symmetric connection built from explicit `(g, η, φ, ξ)`.
pub fn quarter_symmetric_from(
    ambient: &Connection,
    g: &Metric,
    eta: &TensorField,
    phi: &TensorField,
    xi: &TensorField,
) -> Result<Connection, ConnectionError> {
    for t in [g.field(), eta, phi, xi] {
        ambient.same_chart(t)?;
    }
    let n = ambient.dim();
    // g(φ∂_i, ∂_j) = g_{lj} φ^l_i
    let phi_low = ArrayD::from_shape_fn(IxDyn(&[n, n]), |ix| {
        let (i, j) = (ix[0], ix[1]);
        Expr::sum((0..n).map(|l| Expr::mul(g.field().get(&[l, j]), phi.get(&[l, i]))))
    });
    let coeffs = ArrayD::from_shape_fn(IxDyn(&[n, n, n]), |ix| {
        let (k, i, j) = (ix[0], ix[1], ix[2]);
        let a = Expr::mul(eta.get(&[j]), phi.get(&[k, i]));
        let b = Expr::mul(&phi_low[[i, j]], xi.get(&[k]));
        Expr::add(ambient.gamma(k, i, j), &Expr::sub(&a, &b))
    });
    Ok(Connection { chart: ambient.chart.clone(), coeffs, torsion_free: false })
}

/// `(∇T)` with the derivative slot appended as the last covariant index.
pub fn covariant_derivative(c: &Connection, t: &TensorField) -> Result<TensorField, ConnectionError> {
    c.same_chart(t)?;
    let n = c.dim();
    let (r, s) = t.valence();
    let d = t.partials();
    let rank = r + s;
    let comps = ArrayD::from_shape_fn(IxDyn(&vec![n; rank + 1]), |ix| {
        let ix = ix.slice();
        let i = ix[rank];
        let mut terms = vec![d[IxDyn(ix)].clone()];
        let mut base: Vec<usize> = ix[..rank].to_vec();
        for p in 0..rank {
            let orig = base[p];
            for m in 0..n {
                base[p] = m;
                let tm = t.get(&base);
                if tm.is_zero() {
                    continue;
                }
                if p < r {
                    terms.push(Expr::mul(c.gamma(orig, i, m), tm));
                } else {
                    terms.push(Expr::neg(&Expr::mul(c.gamma(m, i, orig), tm)));
                }
            }
            base[p] = orig;
        }
        Expr::sum(terms)
    });
    Ok(TensorField::from_array(t.chart(), r, s + 1, comps)?)
}

/// `∇_X Y` for vector fields.
pub fn directional(c: &Connection, x: &TensorField, y: &TensorField) -> Result<TensorField, ConnectionError> {
    let dy = covariant_derivative(c, y)?;
    let n = c.dim();
    Ok(TensorField::from_fn(c.chart(), 1, 0, |k| {
        Expr::sum((0..n).map(|i| Expr::mul(x.get(&[i]), dy.get(&[k[0], i]))))
    }))
}

/// `T^k_{ij} = Γ^k_{ij} − Γ^k_{ji}`.
pub fn torsion(c: &Connection) -> TensorField {
    TensorField::from_fn(c.chart(), 1, 2, |ix| {
        Expr::sub(c.gamma(ix[0], ix[1], ix[2]), c.gamma(ix[0], ix[2], ix[1]))
    })
}

/// Largest `|(∇g)_{ij;k}|` over the points.
pub fn metric_compatibility(c: &Connection, g: &Metric, points: &[Vec<f64>]) -> Result<f64, ConnectionError> {
    let dg = covariant_derivative(c, g.field())?;
    max_abs(&dg, points)
}

pub(crate) fn max_abs(t: &TensorField, points: &[Vec<f64>]) -> Result<f64, ConnectionError> {
    let mut b = BatchBuilder::new();
    let slot = b.add(t.comps());
    let batch = b.build(t.chart().coords())?;
    let mut worst: f64 = 0.0;
    for p in points {
        let v = batch.eval(p)?;
        worst = v.view(slot).iter().fold(worst, |m, x| m.max(x.abs()));
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    /// `R^l_{kij}` as a (1,3) field indexed `[l, k, i, j]`.
    pub riemann: TensorField,
    /// `S_{jk} = S(∂_j, ∂_k)`.
    pub ricci: TensorField,
    pub scalar: Expr,
    /// `Q^k_j` indexed `[k, j]`.
    pub ricci_operator: TensorField,
}

pub fn riemann(c: &Connection) -> TensorField {
    let n = c.dim();
    let dgamma = TensorField::from_array(c.chart(), 1, 2, c.coeffs.clone())
        .expect("coefficient shape")
        .partials();
    TensorField::from_fn(c.chart(), 1, 3, |ix| {
        let (l, k, i, j) = (ix[0], ix[1], ix[2], ix[3]);
        let mut terms = vec![dgamma[[l, j, k, i]].clone(), Expr::neg(&dgamma[[l, i, k, j]])];
        for m in 0..n {
            terms.push(Expr::mul(c.gamma(l, i, m), c.gamma(m, j, k)));
            terms.push(Expr::neg(&Expr::mul(c.gamma(l, j, m), c.gamma(m, i, k))));
        }
        Expr::sum(terms)
    })
}

/// Riemann tensor and its contractions; `g` supplies the traces.
pub fn curvature(c: &Connection, g: &Metric) -> Result<CurvatureBundle, ConnectionError> {
    c.same_chart(g.field())?;
    let n = c.dim();
    let inv = g.inverse_field().ok_or(ConnectionError::NoSymbolicInverse(n))?;
    let riemann = riemann(c);
    let ricci = TensorField::from_fn(c.chart(), 0, 2, |ix| {
        let (j, k) = (ix[0], ix[1]);
        Expr::sum((0..n).map(|l| riemann.get(&[l, k, l, j]).clone()))
    });
    let scalar = Expr::sum(
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| Expr::mul(inv.get(&[i, j]), ricci.get(&[i, j]))),
    );
    let ricci_operator = TensorField::from_fn(c.chart(), 1, 1, |ix| {
        let (k, j) = (ix[0], ix[1]);
        Expr::sum((0..n).map(|l| Expr::mul(inv.get(&[k, l]), ricci.get(&[j, l]))))
    });
    Ok(CurvatureBundle { riemann, ricci, scalar, ricci_operator })
}

/// Compares `R(∂_i, ∂_j) Z` from the coefficient formula with
/// `∇_i ∇_j Z − ∇_j ∇_i Z` built from nested covariant derivatives.
/// Returns `(max residual, max magnitude)`.
pub fn curvature_operator_residual(
    c: &Connection,
    riemann: &TensorField,
    z: &TensorField,
    points: &[Vec<f64>],
) -> Result<(f64, f64), ConnectionError> {
    let n = c.dim();
    let dz = covariant_derivative(c, z)?;
    let ddz = covariant_derivative(c, &dz)?;
    // ∇_i∇_j Z = (∇∇Z)_{j;i} + Γ^m_{ij} (∇Z)_{;m}
    let lhs = TensorField::from_fn(c.chart(), 1, 2, |ix| {
        let (k, i, j) = (ix[0], ix[1], ix[2]);
        let mut terms = vec![ddz.get(&[k, j, i]).clone(), Expr::neg(ddz.get(&[k, i, j]))];
        for m in 0..n {
            let tor = Expr::sub(c.gamma(m, i, j), c.gamma(m, j, i));
            terms.push(Expr::mul(&tor, dz.get(&[k, m])));
        }
        Expr::sum(terms)
    });
    let rhs = TensorField::from_fn(c.chart(), 1, 2, |ix| {
        let (k, i, j) = (ix[0], ix[1], ix[2]);
        Expr::sum((0..n).map(|m| Expr::mul(riemann.get(&[k, m, i, j]), z.get(&[m]))))
    });
    let mut b = BatchBuilder::new();
    let ls = b.add(lhs.comps());
    let rs = b.add(rhs.comps());
    let batch = b.build(c.chart().coords())?;
    let (mut res, mut scale) = (0.0f64, 0.0f64);
    for p in points {
        let v = batch.eval(p)?;
        for (a, b) in v.view(ls).iter().zip(v.view(rs).iter()) {
            res = res.max((a - b).abs());
            scale = scale.max(a.abs()).max(b.abs());
        }
    }
    Ok((res, scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Signature;
    use approx::assert_relative_eq;

    fn diag_metric(chart: &Arc<Chart>, diag: &[&str], sig: Signature) -> Metric {
        let g = TensorField::from_fn(chart, 0, 2, |ix| {
            if ix[0] == ix[1] { chart.parse(diag[ix[0]]).unwrap() } else { Expr::zero() }
        });
        Metric::new(g, sig).unwrap()
    }

    fn example() -> Metric {
        let chart = Chart::with_default_box(&["x", "y", "z", "u", "v"]).unwrap();
        diag_metric(&chart, &["exp(2*z)", "exp(2*z)", "-exp(4*z)", "exp(2*z)", "exp(2*z)"], Signature::lorentzian(5))
    }

    fn sphere() -> Metric {
        let chart = Chart::new(vec!["th".into(), "ph".into()], vec![(0.3, 2.8), (-3.0, 3.0)]).unwrap();
        diag_metric(&chart, &["1", "sin(th)^2"], Signature::riemannian(2))
    }

    /// Γ from central differences of the numerically evaluated metric.
    fn koszul_fd(g: &Metric, p: &[f64]) -> ArrayD<f64> {
        let n = g.dim();
        let h = 1e-5;
        let mut dg = ArrayD::zeros(IxDyn(&[n, n, n]));
        for l in 0..n {
            let mut plus = p.to_vec();
            let mut minus = p.to_vec();
            plus[l] += h;
            minus[l] -= h;
            let gp = g.field().eval_at(&plus).unwrap();
            let gm = g.field().eval_at(&minus).unwrap();
            for i in 0..n {
                for j in 0..n {
                    dg[[i, j, l]] = (gp[[i, j]] - gm[[i, j]]) / (2.0 * h);
                }
            }
        }
        let (_, inv) = g.evaluator().unwrap().at(p).unwrap();
        ArrayD::from_shape_fn(IxDyn(&[n, n, n]), |ix| {
            let (k, i, j) = (ix[0], ix[1], ix[2]);
            (0..n)
                .map(|l| 0.5 * inv[(k, l)] * (dg[[j, l, i]] + dg[[i, l, j]] - dg[[i, j, l]]))
                .sum()
        })
    }

    #[test]
    fn flat_metric_has_no_christoffels_or_curvature() {
        let chart = Chart::with_default_box(&["x", "y", "z"]).unwrap();
        let g = diag_metric(&chart, &["1", "1", "1"], Signature::riemannian(3));
        let c = Connection::levi_civita(&g).unwrap();
        assert!(c.coeffs().iter().all(Expr::is_zero));
        let curv = curvature(&c, &g).unwrap();
        assert!(curv.riemann.comps().iter().all(Expr::is_zero));
        assert!(curv.scalar.is_zero());
    }

    #[test]
    fn sphere_christoffels_match_finite_difference_koszul() {
        let g = sphere();
        let c = Connection::levi_civita(&g).unwrap();
        let coeffs = TensorField::from_array(g.chart(), 1, 2, c.coeffs().clone()).unwrap();
        for p in g.chart().sample_points(40, 42) {
            let sym = coeffs.eval_at(&p).unwrap();
            let fd = koszul_fd(&g, &p);
            for (a, b) in sym.iter().zip(fd.iter()) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
            let th = p[0];
            assert_relative_eq!(sym[[0, 1, 1]], -th.sin() * th.cos(), epsilon = 1e-12);
            assert_relative_eq!(sym[[1, 0, 1]], th.cos() / th.sin(), epsilon = 1e-12);
        }
    }

    #[test]
    fn sphere_curvature_closed_form() {
        let g = sphere();
        let c = Connection::levi_civita(&g).unwrap();
        let curv = curvature(&c, &g).unwrap();
        for p in g.chart().sample_points(50, 1) {
            let s2 = p[0].sin().powi(2);
            let r = curv.riemann.eval_at(&p).unwrap();
            // R^θ_{φθφ} = sin²θ
            assert_relative_eq!(r[[0, 1, 0, 1]], s2, epsilon = 1e-12);
            let ric = curv.ricci.eval_at(&p).unwrap();
            assert_relative_eq!(ric[[0, 0]], 1.0, epsilon = 1e-12);
            assert_relative_eq!(ric[[1, 1]], s2, epsilon = 1e-12);
            assert!(ric[[0, 1]].abs() < 1e-12);
            let scalar = curv.scalar.eval(&g.chart().point(&p)).unwrap();
            assert_relative_eq!(scalar, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn example_christoffels() {
        let g = example();
        let c = Connection::levi_civita(&g).unwrap();
        let pts = g.chart().sample_points(20, 3);
        for p in &pts {
            let z = p[2];
            let at = |k, i, j| c.gamma(k, i, j).eval(&g.chart().point(p)).unwrap();
            assert_relative_eq!(at(2, 0, 0), (-2.0 * z).exp(), max_relative = 1e-12);
            assert_relative_eq!(at(0, 0, 2), 1.0, epsilon = 1e-14);
            assert_relative_eq!(at(2, 2, 2), 2.0, epsilon = 1e-14);
        }
        assert!(metric_compatibility(&c, &g, &pts).unwrap() < 1e-10);
        assert!(max_abs(&torsion(&c), &pts).unwrap() == 0.0);
    }

    #[test]
    fn nabla_e1_e1_is_scaled_e3() {
        let g = example();
        let chart = g.chart().clone();
        let c = Connection::levi_civita(&g).unwrap();
        let e1 = TensorField::from_fn(&chart, 1, 0, |k| if k[0] == 0 { chart.parse("exp(-z)").unwrap() } else { Expr::zero() });
        let v = directional(&c, &e1, &e1).unwrap();
        for p in chart.sample_points(20, 5) {
            let z = p[2];
            let val = v.eval_at(&p).unwrap();
            // e^{-2z} e_3 = e^{-2z} e^{-2z} ∂_z
            assert_relative_eq!(val[[2]], (-4.0 * z).exp(), max_relative = 1e-12);
            for k in [0, 1, 3, 4] {
                assert_eq!(val[[k]], 0.0);
            }
        }
    }

    #[test]
    fn bianchi_and_antisymmetry_for_levi_civita() {
        let g = example();
        let c = Connection::levi_civita(&g).unwrap();
        let r = riemann(&c);
        let n = 5;
        for p in g.chart().sample_points(30, 11) {
            let rv = r.eval_at(&p).unwrap();
            for l in 0..n {
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            assert!((rv[[l, k, i, j]] + rv[[l, k, j, i]]).abs() < 1e-12);
                            let cyc = rv[[l, k, i, j]] + rv[[l, i, j, k]] + rv[[l, j, k, i]];
                            assert!(cyc.abs() < 1e-8);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn coefficient_formula_matches_nested_derivatives() {
        let g = example();
        let chart = g.chart().clone();
        let c = Connection::levi_civita(&g).unwrap();
        let r = riemann(&c);
        let z = TensorField::vector(
            &chart,
            ["x*z", "exp(y)", "u - v", "sin(z)", "x^2"].iter().map(|t| chart.parse(t).unwrap()).collect(),
        )
        .unwrap();
        let (res, scale) = curvature_operator_residual(&c, &r, &z, &chart.sample_points(30, 2)).unwrap();
        assert!(scale > 1.0);
        assert!(res < 1e-9 * scale, "{res}");
        // a connection with torsion still satisfies the operator identity
        let bent = c.perturbed(0, 1, 2, &chart.parse("x*y").unwrap());
        let rb = riemann(&bent);
        let (res, scale) = curvature_operator_residual(&bent, &rb, &z, &chart.sample_points(30, 2)).unwrap();
        assert!(res < 1e-9 * scale, "{res}");
    }

    #[test]
    fn ricci_is_contraction_of_riemann() {
        let g = example();
        let c = Connection::levi_civita(&g).unwrap();
        let curv = curvature(&c, &g).unwrap();
        let contracted = crate::manifold::contract(&curv.riemann, 0, 1).unwrap();
        for p in g.chart().sample_points(20, 6) {
            let a = contracted.eval_at(&p).unwrap();
            let s = curv.ricci.eval_at(&p).unwrap();
            for j in 0..5 {
                for k in 0..5 {
                    assert!((a[[k, j]] - s[[j, k]]).abs() < 1e-9);
                }
            }
            // g(QX, Y) = S(X, Y)
            let q = curv.ricci_operator.eval_at(&p).unwrap();
            let gm = g.field().eval_at(&p).unwrap();
            for x in 0..5 {
                for y in 0..5 {
                    let lhs: f64 = (0..5).map(|k| gm[[k, y]] * q[[k, x]]).sum();
                    assert!((lhs - s[[x, y]]).abs() < 1e-9 * (1.0 + s[[x, y]].abs()));
                }
            }
        }
    }

    #[test]
    fn perturbed_coefficient_breaks_compatibility() {
        let g = example();
        let c = Connection::levi_civita(&g).unwrap();
        let bad = c.perturbed(0, 0, 0, &Expr::ratio(1, 10));
        let pts = g.chart().sample_points(20, 42);
        assert!(metric_compatibility(&bad, &g, &pts).unwrap() > 0.01);
        assert!(!bad.is_torsion_free());
    }
}
