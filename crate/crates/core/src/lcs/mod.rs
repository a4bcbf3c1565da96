//! Lorentzian concircular structures: derivation from `(g, ξ)`, the
//! structure identities, and the quarter-symmetric curvature identities.

mod example;
mod identities;

use thiserror::Error;

use crate::connection::{covariant_derivative, Connection, ConnectionError};
use crate::expr::{simplify, BatchBuilder, EvalError, Expr};
use crate::manifold::{raise_lower, IndexMove, ManifoldError, Metric, TensorField};
use crate::report::Tolerance;

pub use example::{paper_example, paper_example_frame, EXAMPLE_COORDS};
pub use identities::{qsmc_identity_suite, validate_structure};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LcsError {
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("metric must be Lorentzian of dimension at least 2")]
    NotLorentzian,
    #[error("g(ξ, ξ) = {value} at {point:?}; ξ must be unit timelike")]
    NotUnitTimelike { point: Vec<f64>, value: f64 },
    #[error("α vanishes at {point:?}")]
    AlphaVanishes { point: Vec<f64> },
    #[error("∇ξ is not α(I + η⊗ξ): residual {residual:.3e} at {point:?}")]
    NotConcircular { residual: f64, point: Vec<f64> },
    #[error("{skipped} of {total} sample points could not be evaluated")]
    TooManySkipped { skipped: usize, total: usize },
}

/// `(g, ξ, η, φ, α, ρ, β)` with `a = tr φ`, all derived from `(g, ξ)`.
#[derive(Debug, Clone)]
pub struct LcsStructure {
    metric: Metric,
    levi_civita: Connection,
    xi: TensorField,
    eta: TensorField,
    phi: TensorField,
    nabla_xi: TensorField,
    alpha: Expr,
    rho: Expr,
    beta: Expr,
    trace_phi: Expr,
}

impl LcsStructure {
    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn levi_civita(&self) -> &Connection {
        &self.levi_civita
    }

    pub fn xi(&self) -> &TensorField {
        &self.xi
    }

    pub fn eta(&self) -> &TensorField {
        &self.eta
    }

    /// `φ^k_i` indexed `[k, i]`, so `(φ∂_i)^k`.
    pub fn phi(&self) -> &TensorField {
        &self.phi
    }

    /// `(∇_{∂_i} ξ)^k` indexed `[k, i]`.
    pub fn nabla_xi(&self) -> &TensorField {
        &self.nabla_xi
    }

    pub fn alpha(&self) -> &Expr {
        &self.alpha
    }

    pub fn rho(&self) -> &Expr {
        &self.rho
    }

    pub fn beta(&self) -> &Expr {
        &self.beta
    }

    pub fn trace_phi(&self) -> &Expr {
        &self.trace_phi
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// A copy with `φ` replaced; used for negative controls.
    pub fn with_phi(&self, phi: TensorField) -> LcsStructure {
        let n = self.dim();
        let trace_phi = Expr::sum((0..n).map(|i| phi.get(&[i, i]).clone()));
        LcsStructure { phi, trace_phi, ..self.clone() }
    }
}

/// `ξ(f) = ξ^i ∂_i f`.
fn derivative_along(xi: &TensorField, f: &Expr) -> Expr {
    let coords = xi.chart().coords();
    Expr::sum(coords.iter().enumerate().map(|(i, c)| Expr::mul(xi.get(&[i]), &f.diff(c))))
}

/// Derives the structure from a Lorentzian metric and a candidate `ξ`.
///
/// `α` is recovered from `tr ∇ξ = α (n + η(ξ)) = α (n − 1)` and the
/// concircularity `∇ξ = α (I + η⊗ξ)` is then verified at `points`.
/// Points where the fields cannot be evaluated are skipped; more than 10%
/// skipped is an error.
pub fn build_structure(
    g: &Metric,
    xi: &TensorField,
    points: &[Vec<f64>],
    tol: &Tolerance,
) -> Result<LcsStructure, LcsError> {
    let n = g.dim();
    if n < 2 || g.signature().negative != 1 {
        return Err(LcsError::NotLorentzian);
    }
    if xi.valence() != (1, 0) {
        return Err(ManifoldError::ValenceMismatch { left: xi.valence(), right: (1, 0) }.into());
    }
    xi.same_chart(g.field())?;
    let lc = Connection::levi_civita(g)?;
    let eta = raise_lower(xi, 0, IndexMove::Lower, g)?;
    let nabla_xi = covariant_derivative(&lc, xi)?;
    let trace = Expr::sum((0..n).map(|i| nabla_xi.get(&[i, i]).clone()));
    let alpha = simplify(&Expr::div(&trace, &Expr::int(n as i64 - 1)));
    let inv_alpha = Expr::div(&Expr::one(), &alpha);
    let phi = nabla_xi.map(|e| simplify(&Expr::mul(&inv_alpha, e)));
    let rho = simplify(&Expr::neg(&derivative_along(xi, &alpha)));
    let beta = simplify(&Expr::neg(&derivative_along(xi, &rho)));
    let trace_phi = Expr::sum((0..n).map(|i| phi.get(&[i, i]).clone()));

    let mut b = BatchBuilder::new();
    let s_g = b.add(g.field().comps());
    let s_xi = b.add(xi.comps());
    let s_eta = b.add(eta.comps());
    let s_dxi = b.add(nabla_xi.comps());
    let s_alpha = b.add_scalar(&alpha);
    let batch = b.build(g.chart().coords())?;
    let mut skipped = 0;
    for p in points {
        let v = match batch.eval(p) {
            Ok(v) => v,
            Err(e) if e.is_domain() => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let (gv, x, et, dx) = (v.view(s_g), v.view(s_xi), v.view(s_eta), v.view(s_dxi));
        let norm: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| gv[[i, j]] * x[[i]] * x[[j]]).sum();
        if !tol.allows((norm + 1.0).abs(), 1.0) {
            return Err(LcsError::NotUnitTimelike { point: p.clone(), value: norm });
        }
        let a = v.scalar(s_alpha);
        if !(a.abs() > 1e-12) {
            return Err(LcsError::AlphaVanishes { point: p.clone() });
        }
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for k in 0..n {
            for i in 0..n {
                let delta = if k == i { 1.0 } else { 0.0 };
                let want = a * (delta + et[[i]] * x[[k]]);
                worst = worst.max((dx[[k, i]] - want).abs());
                scale = scale.max(want.abs()).max(dx[[k, i]].abs());
            }
        }
        if !tol.allows(worst, scale) {
            return Err(LcsError::NotConcircular { residual: worst, point: p.clone() });
        }
    }
    if skipped * 10 > points.len() {
        return Err(LcsError::TooManySkipped { skipped, total: points.len() });
    }
    Ok(LcsStructure {
        metric: g.clone(),
        levi_civita: lc,
        xi: xi.clone(),
        eta,
        phi,
        nabla_xi,
        alpha,
        rho,
        beta,
        trace_phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Chart, Signature};
    use approx::assert_relative_eq;

    #[test]
    fn example_recovers_alpha_rho_beta() {
        let (g, l) = paper_example();
        let chart = g.chart().clone();
        for p in chart.sample_points(100, 42) {
            let pt = chart.point(&p);
            let z = p[2];
            assert_relative_eq!(l.alpha().eval(&pt).unwrap(), (-2.0 * z).exp(), max_relative = 1e-12);
            assert_relative_eq!(l.rho().eval(&pt).unwrap(), 2.0 * (-4.0 * z).exp(), max_relative = 1e-12);
            // β = −ξ(ρ) = −e^{-2z} ∂_z(2e^{-4z}) = 8 e^{-6z}
            assert_relative_eq!(l.beta().eval(&pt).unwrap(), 8.0 * (-6.0 * z).exp(), max_relative = 1e-12);
            assert_relative_eq!(l.trace_phi().eval(&pt).unwrap(), 4.0, epsilon = 1e-12);
        }
        let origin = chart.point(&[0.0; 5]);
        assert_eq!(l.alpha().eval(&origin).unwrap(), 1.0);
    }

    #[test]
    fn lowered_xi_has_eta_of_xi_minus_one() {
        let (g, l) = paper_example();
        for p in g.chart().sample_points(20, 1) {
            let eta = l.eta().eval_at(&p).unwrap();
            let xi = l.xi().eval_at(&p).unwrap();
            let s: f64 = (0..5).map(|i| eta[[i]] * xi[[i]]).sum();
            assert_relative_eq!(s, -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rebuilding_reproduces_the_structure() {
        let (g, l) = paper_example();
        let pts = g.chart().sample_points(30, 42);
        let again = build_structure(&g, l.xi(), &pts, &Tolerance::default()).unwrap();
        for p in &pts {
            let pt = g.chart().point(p);
            for (a, b) in [(l.alpha(), again.alpha()), (l.rho(), again.rho())] {
                assert!((a.eval(&pt).unwrap() - b.eval(&pt).unwrap()).abs() < 1e-10);
            }
            let (pa, pb) = (l.phi().eval_at(p).unwrap(), again.phi().eval_at(p).unwrap());
            assert!(pa.iter().zip(pb.iter()).all(|(a, b)| (a - b).abs() < 1e-10));
        }
    }

    #[test]
    fn minkowski_time_direction_is_not_concircular() {
        let chart = Chart::with_default_box(&["t", "x", "y", "z"]).unwrap();
        let g = TensorField::from_fn(&chart, 0, 2, |ix| match (ix[0], ix[1]) {
            (0, 0) => Expr::int(-1),
            (i, j) if i == j => Expr::one(),
            _ => Expr::zero(),
        });
        let g = Metric::new(g, Signature::lorentzian(4)).unwrap();
        let xi = TensorField::coordinate_vector(&chart, 0);
        let err = build_structure(&g, &xi, &chart.sample_points(10, 42), &Tolerance::default()).unwrap_err();
        // ∇ξ = 0 forces α = 0
        assert!(matches!(err, LcsError::AlphaVanishes { .. }), "{err:?}");
    }

    #[test]
    fn spacelike_xi_is_rejected() {
        let (g, _) = paper_example();
        let xi = TensorField::coordinate_vector(g.chart(), 0);
        let err = build_structure(&g, &xi, &g.chart().sample_points(10, 42), &Tolerance::default()).unwrap_err();
        assert!(matches!(err, LcsError::NotUnitTimelike { .. }));
    }

    #[test]
    fn perturbed_metric_is_not_concircular() {
        let (g, l) = paper_example();
        let chart = g.chart().clone();
        let bent = TensorField::from_fn(&chart, 0, 2, |ix| {
            if ix == [0, 0] { chart.parse("exp(2.1*z)").unwrap() } else { g.field().get(ix).clone() }
        });
        let bent = Metric::new(bent, Signature::lorentzian(5)).unwrap();
        let err = build_structure(&bent, l.xi(), &chart.sample_points(50, 42), &Tolerance::default()).unwrap_err();
        assert!(matches!(err, LcsError::NotConcircular { .. }), "{err:?}");
    }
}
