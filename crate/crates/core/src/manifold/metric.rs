use std::collections::HashMap;
use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{ArrayD, IxDyn};

use super::{Chart, ManifoldError, TensorField};
use crate::expr::{Batch, BatchBuilder, Expr, Slot};

/// Largest dimension for which the inverse is built symbolically.
pub const SYMBOLIC_INVERSE_MAX_DIM: usize = 6;

const DET_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
}

impl Signature {
    /// One negative direction, the rest positive.
    pub fn lorentzian(n: usize) -> Signature {
        Signature { positive: n.saturating_sub(1), negative: 1 }
    }

    pub fn riemannian(n: usize) -> Signature {
        Signature { positive: n, negative: 0 }
    }

    pub fn dim(&self) -> usize {
        self.positive + self.negative
    }
}

/// The inverse metric, symbolic where affordable.
#[derive(Debug, Clone)]
pub enum InverseMetric {
    Symbolic(TensorField),
    /// Inverted numerically wherever a value is needed.
    Numeric,
}

#[derive(Debug, Clone)]
pub struct Metric {
    g: TensorField,
    signature: Signature,
    inverse: InverseMetric,
}

/// Outcome of checking a metric at sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricAudit {
    pub points: usize,
    pub skipped: Vec<Vec<f64>>,
    pub max_asymmetry: f64,
    /// Largest entry of `g^{ik} g_{kj} - δ^i_j` over the usable points.
    pub max_inverse_residual: f64,
}

impl Metric {
    pub fn new(g: TensorField, signature: Signature) -> Result<Metric, ManifoldError> {
        if g.valence() != (0, 2) {
            return Err(ManifoldError::ValenceMismatch { left: g.valence(), right: (0, 2) });
        }
        if signature.dim() != g.dim() {
            return Err(ManifoldError::BadSignature(signature));
        }
        let inverse = if g.dim() <= SYMBOLIC_INVERSE_MAX_DIM {
            InverseMetric::Symbolic(symbolic_inverse(&g))
        } else {
            InverseMetric::Numeric
        };
        Ok(Metric { g, signature, inverse })
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.g.chart()
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn field(&self) -> &TensorField {
        &self.g
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn inverse(&self) -> &InverseMetric {
        &self.inverse
    }

    pub fn inverse_field(&self) -> Option<&TensorField> {
        match &self.inverse {
            InverseMetric::Symbolic(t) => Some(t),
            InverseMetric::Numeric => None,
        }
    }

    /// `g(X, Y)` for two vector fields.
    pub fn inner(&self, x: &TensorField, y: &TensorField) -> Result<Expr, ManifoldError> {
        self.g.same_chart(x)?;
        self.g.same_chart(y)?;
        let n = self.dim();
        Ok(Expr::sum((0..n).flat_map(|i| {
            (0..n).map(move |j| {
                Expr::mul(&Expr::mul(self.g.get(&[i, j]), x.get(&[i])), y.get(&[j]))
            })
        })))
    }

    /// Compiles `g` (and its symbolic inverse, when present) for repeated
    /// evaluation.
    pub fn evaluator(&self) -> Result<MetricEval, ManifoldError> {
        let mut b = BatchBuilder::new();
        let g = b.add(self.g.comps());
        let inv = self.inverse_field().map(|t| b.add(t.comps()));
        Ok(MetricEval { batch: b.build(self.chart().coords())?, g, inv, n: self.dim() })
    }

    /// Checks symmetry, nondegeneracy, signature and the inverse at each
    /// point. Degenerate or unevaluable points are skipped with a warning;
    /// more than 10% skipped is an error.
    pub fn audit(&self, points: &[Vec<f64>]) -> Result<MetricAudit, ManifoldError> {
        let ev = self.evaluator()?;
        let n = self.dim();
        let mut audit = MetricAudit {
            points: points.len(),
            skipped: Vec::new(),
            max_asymmetry: 0.0,
            max_inverse_residual: 0.0,
        };
        for p in points {
            let (g, inv) = match ev.at(p) {
                Ok(v) => v,
                Err(ManifoldError::DegenerateMetric { .. }) => {
                    warn!("metric degenerate at {p:?}; point skipped");
                    audit.skipped.push(p.clone());
                    continue;
                }
                Err(ManifoldError::Eval(e)) if e.is_domain() => {
                    warn!("metric not evaluable at {p:?}: {e}; point skipped");
                    audit.skipped.push(p.clone());
                    continue;
                }
                Err(e) => return Err(e),
            };
            for i in 0..n {
                for j in 0..i {
                    let d = (g[(i, j)] - g[(j, i)]).abs();
                    audit.max_asymmetry = audit.max_asymmetry.max(d);
                    if d != 0.0 {
                        return Err(ManifoldError::AsymmetricMetric { i, j, point: p.clone() });
                    }
                }
            }
            let found = signature_of(&g);
            if found != self.signature {
                return Err(ManifoldError::SignatureMismatch {
                    point: p.clone(),
                    expected: self.signature,
                    found,
                });
            }
            let resid = (&inv * &g - DMatrix::identity(n, n)).amax();
            audit.max_inverse_residual = audit.max_inverse_residual.max(resid);
        }
        if audit.skipped.len() * 10 > points.len() {
            return Err(ManifoldError::TooManySkipped {
                skipped: audit.skipped.len(),
                total: points.len(),
            });
        }
        Ok(audit)
    }
}

/// Compiled metric, returning `(g, g⁻¹)` as matrices at a point.
pub struct MetricEval {
    batch: Batch,
    g: Slot,
    inv: Option<Slot>,
    n: usize,
}

impl MetricEval {
    pub fn at(&self, x: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>), ManifoldError> {
        let vals = self.batch.eval(x)?;
        let n = self.n;
        let gv = vals.view(self.g);
        let g = DMatrix::from_fn(n, n, |i, j| gv[[i, j]]);
        if g.determinant().abs() <= DET_FLOOR {
            return Err(ManifoldError::DegenerateMetric { point: x.to_vec() });
        }
        let inv = match self.inv {
            Some(slot) => {
                let iv = vals.view(slot);
                DMatrix::from_fn(n, n, |i, j| iv[[i, j]])
            }
            None => g
                .clone()
                .try_inverse()
                .ok_or_else(|| ManifoldError::DegenerateMetric { point: x.to_vec() })?,
        };
        Ok((g, inv))
    }
}

/// Returns the inverse metric after confirming `g^{ik} g_{kj} = δ^i_j`
/// within 1e-9 at every point.
pub fn inverse_metric(g: &Metric, points: &[Vec<f64>]) -> Result<InverseMetric, ManifoldError> {
    let ev = g.evaluator()?;
    let n = g.dim();
    for p in points {
        let (gm, inv) = ev.at(p)?;
        let resid = (&inv * &gm - DMatrix::identity(n, n)).amax();
        if !(resid <= 1e-9) {
            return Err(ManifoldError::DegenerateMetric { point: p.clone() });
        }
    }
    Ok(g.inverse.clone())
}

fn signature_of(g: &DMatrix<f64>) -> Signature {
    let eig = SymmetricEigen::new(g.clone());
    let negative = eig.eigenvalues.iter().filter(|&&v| v < 0.0).count();
    Signature { positive: g.nrows() - negative, negative }
}

/// Inverse of a symmetric (0,2) field by cofactors; diagonal metrics take
/// the shortcut `1/g_ii`.
pub(crate) fn symbolic_inverse(g: &TensorField) -> TensorField {
    let n = g.dim();
    let rows: Vec<Vec<Expr>> =
        (0..n).map(|i| (0..n).map(|j| g.get(&[i, j]).clone()).collect()).collect();
    let inv = invert_matrix(&rows);
    let arr = ArrayD::from_shape_fn(IxDyn(&[n, n]), |ix| inv[ix[0]][ix[1]].clone());
    TensorField::from_array(g.chart(), 2, 0, arr).expect("square inverse")
}

/// Symbolic inverse of a square matrix of expressions.
pub(crate) fn invert_matrix(m: &[Vec<Expr>]) -> Vec<Vec<Expr>> {
    let n = m.len();
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || m[i][j].is_zero()));
    if diagonal {
        return (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { Expr::div(&Expr::one(), &m[i][i]) } else { Expr::zero() })
                    .collect()
            })
            .collect();
    }
    let mut minors = Minors { m, memo: HashMap::new() };
    let full = (1u32 << n) - 1;
    let det = minors.det(full, full);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    // inverse[i][j] = C_ji / det
                    let c = minors.det(full & !(1 << j), full & !(1 << i));
                    let c = if (i + j) % 2 == 0 { c } else { Expr::neg(&c) };
                    Expr::div(&c, &det)
                })
                .collect()
        })
        .collect()
}

/// Symbolic determinant of a square matrix of expressions.
#[cfg(test)]
fn determinant(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    if n == 0 {
        return Expr::one();
    }
    let full = (1u32 << n) - 1;
    Minors { m, memo: HashMap::new() }.det(full, full)
}

struct Minors<'a> {
    m: &'a [Vec<Expr>],
    memo: HashMap<(u32, u32), Expr>,
}

impl Minors<'_> {
    /// Determinant of the submatrix with the given row and column masks,
    /// expanded along its first row.
    fn det(&mut self, rows: u32, cols: u32) -> Expr {
        if rows == 0 {
            return Expr::one();
        }
        if let Some(e) = self.memo.get(&(rows, cols)) {
            return e.clone();
        }
        let r = rows.trailing_zeros() as usize;
        let rest = rows & !(1 << r);
        let mut terms = Vec::new();
        let mut sign_even = true;
        for c in 0..self.m.len() {
            if cols & (1 << c) == 0 {
                continue;
            }
            let entry = &self.m[r][c];
            if !entry.is_zero() {
                let minor = self.det(rest, cols & !(1 << c));
                let t = Expr::mul(entry, &minor);
                terms.push(if sign_even { t } else { Expr::neg(&t) });
            }
            sign_even = !sign_even;
        }
        let out = Expr::sum(terms);
        self.memo.insert((rows, cols), out.clone());
        out
    }
}
