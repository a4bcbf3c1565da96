//! Recurrence classification by pointwise least squares.
//!
//! With `T` sampled as a flat component vector and `X, Y` running over the
//! coordinate basis:
//!
//! - recurrent: `∇_X T = π(X) T`;
//! - 2-recurrent: `∇_X∇_Y T = ψ(X, Y) T`;
//! - generalized 2-recurrent: `∇_X∇_Y T = π(X) ∇_Y T + ψ(X, Y) T`.
//!
//! `π` and `ψ` are fitted per point and the residual of the fit decides.

use nalgebra::{DMatrix, DVector};
use ndarray::Dimension;
use serde::{Deserialize, Serialize};

use crate::connection::{covariant_derivative, Connection, ConnectionError};
use crate::expr::{BatchBuilder, Expr};
use crate::manifold::{Metric, TensorField};

/// Residual threshold for the recurrence fits, relative to the sampled
/// magnitudes.
pub const RECURRENCE_TOL: f64 = 1e-8;

/// Below this norm `T` counts as zero at a point.
const ZERO_NORM: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrenceClass {
    Parallel,
    Recurrent,
    TwoRecurrent,
    GeneralizedTwoRecurrent,
    None,
}

impl std::fmt::Display for RecurrenceClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RecurrenceClass::Parallel => "parallel",
            RecurrenceClass::Recurrent => "recurrent",
            RecurrenceClass::TwoRecurrent => "two_recurrent",
            RecurrenceClass::GeneralizedTwoRecurrent => "generalized_two_recurrent",
            RecurrenceClass::None => "none",
        })
    }
}

/// `T`, `∇T` and `∇²T` at one point, flattened over the components of `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceSample {
    pub t: Vec<f64>,
    /// `dt[x] = ∇_X T`
    pub dt: Vec<Vec<f64>>,
    /// `ddt[x][y] = (∇²T)(X, Y) = ∇_X ∇_Y T − ∇_{∇_X Y} T`
    pub ddt: Vec<Vec<Vec<f64>>>,
    /// `(g(T, T), X(g(T, T)))` for the closed form `π = ½ d log |g(T, T)|`.
    pub norm: Option<(f64, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceVerdict {
    pub class: RecurrenceClass,
    /// `T` vanishes at every sample point, so every class holds trivially.
    pub vacuous: bool,
    /// Fitted `π` per point (`None` where `T` vanishes).
    pub pi: Vec<Option<Vec<f64>>>,
    /// Fitted 2-recurrence `ψ` per point.
    pub psi: Vec<Option<Vec<Vec<f64>>>>,
    pub parallel_residual: f64,
    pub recurrent_residual: f64,
    pub two_recurrent_residual: f64,
    pub generalized_residual: f64,
    /// Largest `|π − ½ d log |g(T, T)||` where the closed form applies.
    pub log_norm_residual: Option<f64>,
    pub points: usize,
    pub fitted: usize,
}

impl RecurrenceVerdict {
    /// The residual of the named class.
    pub fn residual(&self, class: RecurrenceClass) -> f64 {
        match class {
            RecurrenceClass::Parallel => self.parallel_residual,
            RecurrenceClass::Recurrent => self.recurrent_residual,
            RecurrenceClass::TwoRecurrent => self.two_recurrent_residual,
            RecurrenceClass::GeneralizedTwoRecurrent => self.generalized_residual,
            RecurrenceClass::None => 0.0,
        }
    }

    /// Whether the named condition holds (not just the strongest one).
    pub fn holds(&self, class: RecurrenceClass) -> bool {
        self.residual(class) <= RECURRENCE_TOL
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Best `c` in `v ≈ c t` and the relative residual.
fn fit_multiple(v: &[f64], t: &[f64], tt: f64, scale: f64) -> (f64, f64) {
    let c = dot(v, t) / tt;
    let r = v.iter().zip(t).map(|(a, b)| (a - c * b).powi(2)).sum::<f64>().sqrt();
    (c, r / scale)
}

/// Classifies `T` from its samples. Residuals are measured relative to
/// `max(1, |T|, |∇T|, |∇²T|)` at each point.
pub fn recurrence_classify(samples: &[RecurrenceSample]) -> RecurrenceVerdict {
    let mut v = RecurrenceVerdict {
        class: RecurrenceClass::None,
        vacuous: true,
        pi: Vec::new(),
        psi: Vec::new(),
        parallel_residual: 0.0,
        recurrent_residual: 0.0,
        two_recurrent_residual: 0.0,
        generalized_residual: 0.0,
        log_norm_residual: None,
        points: samples.len(),
        fitted: 0,
    };
    for s in samples {
        let tn = norm(&s.t);
        let dn = s.dt.iter().map(|d| norm(d)).fold(0.0, f64::max);
        let ddn = s.ddt.iter().flatten().map(|d| norm(d)).fold(0.0, f64::max);
        let scale = 1f64.max(tn).max(dn).max(ddn);
        v.parallel_residual = v.parallel_residual.max(dn / scale);
        if tn <= ZERO_NORM {
            // π and ψ are undetermined; only ∇T = 0 and ∇²T = 0 are consistent
            v.recurrent_residual = v.recurrent_residual.max(dn / scale);
            v.two_recurrent_residual = v.two_recurrent_residual.max(ddn / scale);
            v.generalized_residual = v.generalized_residual.max(ddn / scale);
            v.pi.push(None);
            v.psi.push(None);
            continue;
        }
        v.vacuous = false;
        v.fitted += 1;
        let tt = tn * tn;

        let mut pi = Vec::with_capacity(s.dt.len());
        for d in &s.dt {
            let (c, r) = fit_multiple(d, &s.t, tt, scale);
            pi.push(c);
            v.recurrent_residual = v.recurrent_residual.max(r);
        }
        if let Some((g, dg)) = &s.norm {
            if g.abs() > 1e-12 {
                let worst = pi
                    .iter()
                    .zip(dg)
                    .map(|(p, d)| (p - 0.5 * d / g).abs())
                    .fold(0.0, f64::max);
                v.log_norm_residual = Some(v.log_norm_residual.unwrap_or(0.0).max(worst));
            }
        }
        v.pi.push(Some(pi));

        let mut psi = Vec::with_capacity(s.ddt.len());
        for row in &s.ddt {
            let mut out = Vec::with_capacity(row.len());
            for dd in row {
                let (c, r) = fit_multiple(dd, &s.t, tt, scale);
                out.push(c);
                v.two_recurrent_residual = v.two_recurrent_residual.max(r);
            }
            psi.push(out);
        }
        v.psi.push(Some(psi));

        // generalized: for each X, unknowns (π(X), ψ(X, ·))
        let m = s.dt.len();
        let c = s.t.len();
        for row in &s.ddt {
            let mut a = DMatrix::zeros(m * c, 1 + m);
            let mut rhs = DVector::zeros(m * c);
            for (y, dd) in row.iter().enumerate() {
                for k in 0..c {
                    a[(y * c + k, 0)] = s.dt[y][k];
                    a[(y * c + k, 1 + y)] = s.t[k];
                    rhs[y * c + k] = dd[k];
                }
            }
            let svd = a.clone().svd(true, true);
            let sol = svd.solve(&rhs, 1e-12 * scale).unwrap_or_else(|_| DVector::zeros(1 + m));
            let r = (a * sol - rhs).norm() / scale;
            v.generalized_residual = v.generalized_residual.max(r);
        }
    }
    v.class = [
        RecurrenceClass::Parallel,
        RecurrenceClass::Recurrent,
        RecurrenceClass::TwoRecurrent,
        RecurrenceClass::GeneralizedTwoRecurrent,
    ]
    .into_iter()
    .find(|c| v.holds(*c))
    .unwrap_or(RecurrenceClass::None);
    v
}

/// Samples an ambient tensor field and classifies it under `c`; `g`
/// supplies `g(T, T)` for the closed form of `π`.
pub fn field_recurrence(
    t: &TensorField,
    c: &Connection,
    g: &Metric,
    points: &[Vec<f64>],
) -> Result<RecurrenceVerdict, ConnectionError> {
    let n = t.dim();
    let dt = covariant_derivative(c, t)?;
    let ddt = covariant_derivative(c, &dt)?;
    let norm2 = full_inner(t, g)?;
    let dnorm: Vec<Expr> = t.chart().coords().iter().map(|x| norm2.diff(x)).collect();
    let mut b = BatchBuilder::new();
    let st = b.add(t.comps());
    let sd = b.add(dt.comps());
    let sdd = b.add(ddt.comps());
    let sn = b.add_scalar(&norm2);
    let sdn: Vec<_> = dnorm.iter().map(|e| b.add_scalar(e)).collect();
    let batch = b.build(t.chart().coords())?;
    let mut samples = Vec::new();
    for p in points {
        let v = match batch.eval(p) {
            Ok(v) => v,
            Err(e) if e.is_domain() => continue,
            Err(e) => return Err(e.into()),
        };
        let tv: Vec<f64> = v.view(st).iter().copied().collect();
        let d = v.view(sd);
        let dd = v.view(sdd);
        let r = t.rank();
        // last axis of ∇T is X; the last two of ∇∇T are (Y, X)
        let dtv = (0..n)
            .map(|x| d.index_axis(ndarray::Axis(r), x).iter().copied().collect())
            .collect();
        let ddtv = (0..n)
            .map(|x| {
                let by_x = dd.index_axis(ndarray::Axis(r + 1), x);
                (0..n).map(|y| by_x.index_axis(ndarray::Axis(r), y).iter().copied().collect()).collect()
            })
            .collect();
        let dn = sdn.iter().map(|s| v.scalar(*s)).collect();
        samples.push(RecurrenceSample { t: tv, dt: dtv, ddt: ddtv, norm: Some((v.scalar(sn), dn)) });
    }
    Ok(recurrence_classify(&samples))
}

/// `g(T, T)` with every slot contracted through `g` or its inverse.
fn full_inner(t: &TensorField, g: &Metric) -> Result<Expr, ConnectionError> {
    let inv = g.inverse_field().ok_or(ConnectionError::NoSymbolicInverse(g.dim()))?;
    let (up, _) = t.valence();
    let n = t.dim();
    let mut dual = t.comps().clone();
    for axis in 0..t.rank() {
        let mat = if axis < up { g.field() } else { inv };
        let src = dual.clone();
        dual = ndarray::ArrayD::from_shape_fn(src.raw_dim(), |ix| {
            let mut k = ix.slice().to_vec();
            let r = ix[axis];
            Expr::sum((0..n).map(|s| {
                k[axis] = s;
                Expr::mul(mat.get(&[r, s]), &src[ndarray::IxDyn(&k)])
            }))
        });
    }
    Ok(Expr::sum(t.comps().iter().zip(dual.iter()).map(|(a, b)| Expr::mul(a, b))))
}
