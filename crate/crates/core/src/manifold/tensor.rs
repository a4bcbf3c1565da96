use std::sync::Arc;

use ndarray::{ArrayD, Dimension, IxDyn};

use super::{Chart, ManifoldError, Metric};
use crate::expr::{BatchBuilder, Differentiator, EvalError, Expr};

/// A tensor field of valence (upper, lower) stored by coordinate components.
///
/// Index order is all contravariant slots first, then all covariant slots;
/// every index ranges over `0..dim`.
#[derive(Debug, Clone)]
pub struct TensorField {
    chart: Arc<Chart>,
    upper: usize,
    lower: usize,
    comps: ArrayD<Expr>,
}

/// Which way [`raise_lower`] moves an index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexMove {
    /// Turn contravariant slot `pos` into the first covariant slot.
    Lower,
    /// Turn covariant slot `pos` into the last contravariant slot.
    Raise,
}

impl TensorField {
    pub fn from_fn(
        chart: &Arc<Chart>,
        upper: usize,
        lower: usize,
        mut f: impl FnMut(&[usize]) -> Expr,
    ) -> TensorField {
        let n = chart.dim();
        let shape = vec![n; upper + lower];
        let comps = ArrayD::from_shape_fn(IxDyn(&shape), |idx| f(idx.slice()));
        TensorField { chart: chart.clone(), upper, lower, comps }
    }

    pub fn from_array(
        chart: &Arc<Chart>,
        upper: usize,
        lower: usize,
        comps: ArrayD<Expr>,
    ) -> Result<TensorField, ManifoldError> {
        let n = chart.dim();
        if comps.ndim() != upper + lower || comps.shape().iter().any(|&d| d != n) {
            return Err(ManifoldError::ShapeMismatch {
                expected: vec![n; upper + lower],
                found: comps.shape().to_vec(),
            });
        }
        Ok(TensorField { chart: chart.clone(), upper, lower, comps })
    }

    pub fn scalar(chart: &Arc<Chart>, e: Expr) -> TensorField {
        TensorField::from_fn(chart, 0, 0, |_| e.clone())
    }

    pub fn vector(chart: &Arc<Chart>, comps: Vec<Expr>) -> Result<TensorField, ManifoldError> {
        let arr = ArrayD::from_shape_vec(IxDyn(&[comps.len()]), comps).expect("1-d shape");
        TensorField::from_array(chart, 1, 0, arr)
    }

    pub fn covector(chart: &Arc<Chart>, comps: Vec<Expr>) -> Result<TensorField, ManifoldError> {
        let arr = ArrayD::from_shape_vec(IxDyn(&[comps.len()]), comps).expect("1-d shape");
        TensorField::from_array(chart, 0, 1, arr)
    }

    /// Builds a (0,2) or (1,1) field from rows of component expressions.
    pub fn from_rows(
        chart: &Arc<Chart>,
        upper: usize,
        lower: usize,
        rows: Vec<Vec<Expr>>,
    ) -> Result<TensorField, ManifoldError> {
        let n = chart.dim();
        if upper + lower != 2 || rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(ManifoldError::ShapeMismatch {
                expected: vec![n, n],
                found: vec![rows.len(), rows.first().map_or(0, |r| r.len())],
            });
        }
        Ok(TensorField::from_fn(chart, upper, lower, |i| rows[i[0]][i[1]].clone()))
    }

    /// The coordinate vector field `∂_i`.
    pub fn coordinate_vector(chart: &Arc<Chart>, i: usize) -> TensorField {
        TensorField::from_fn(chart, 1, 0, |k| if k[0] == i { Expr::one() } else { Expr::zero() })
    }

    /// The identity endomorphism `δ^i_j`.
    pub fn identity(chart: &Arc<Chart>) -> TensorField {
        TensorField::from_fn(chart, 1, 1, |k| if k[0] == k[1] { Expr::one() } else { Expr::zero() })
    }

    pub fn zeros(chart: &Arc<Chart>, upper: usize, lower: usize) -> TensorField {
        TensorField::from_fn(chart, upper, lower, |_| Expr::zero())
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn valence(&self) -> (usize, usize) {
        (self.upper, self.lower)
    }

    pub fn rank(&self) -> usize {
        self.upper + self.lower
    }

    pub fn comps(&self) -> &ArrayD<Expr> {
        &self.comps
    }

    pub fn get(&self, idx: &[usize]) -> &Expr {
        &self.comps[IxDyn(idx)]
    }

    /// The single component of a scalar field.
    pub fn as_scalar(&self) -> &Expr {
        assert_eq!(self.rank(), 0, "not a scalar field");
        &self.comps[IxDyn(&[])]
    }

    pub fn same_chart(&self, other: &TensorField) -> Result<(), ManifoldError> {
        if Arc::ptr_eq(&self.chart, &other.chart) || *self.chart == *other.chart {
            Ok(())
        } else {
            Err(ManifoldError::ChartMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> TensorField {
        TensorField {
            chart: self.chart.clone(),
            upper: self.upper,
            lower: self.lower,
            comps: self.comps.map(f),
        }
    }

    pub fn scale(&self, factor: &Expr) -> TensorField {
        self.map(|e| Expr::mul(factor, e))
    }

    fn zip_with(
        &self,
        other: &TensorField,
        f: impl Fn(&Expr, &Expr) -> Expr,
    ) -> Result<TensorField, ManifoldError> {
        self.same_chart(other)?;
        if self.valence() != other.valence() {
            return Err(ManifoldError::ValenceMismatch {
                left: self.valence(),
                right: other.valence(),
            });
        }
        let mut comps = self.comps.clone();
        ndarray::Zip::from(&mut comps).and(&other.comps).for_each(|a, b| *a = f(a, b));
        Ok(TensorField { chart: self.chart.clone(), upper: self.upper, lower: self.lower, comps })
    }

    pub fn add(&self, other: &TensorField) -> Result<TensorField, ManifoldError> {
        self.zip_with(other, Expr::add)
    }

    pub fn sub(&self, other: &TensorField) -> Result<TensorField, ManifoldError> {
        self.zip_with(other, Expr::sub)
    }

    /// Tensor product; the upper slots of `self` come first, then those of
    /// `other`, followed by the lower slots in the same order.
    pub fn tensor(&self, other: &TensorField) -> Result<TensorField, ManifoldError> {
        self.same_chart(other)?;
        let (r1, s1) = self.valence();
        let (r2, _) = other.valence();
        Ok(TensorField::from_fn(&self.chart, r1 + r2, s1 + other.lower, |idx| {
            let mut a = Vec::with_capacity(self.rank());
            let mut b = Vec::with_capacity(other.rank());
            a.extend_from_slice(&idx[..r1]);
            b.extend_from_slice(&idx[r1..r1 + r2]);
            a.extend_from_slice(&idx[r1 + r2..r1 + r2 + s1]);
            b.extend_from_slice(&idx[r1 + r2 + s1..]);
            Expr::mul(self.get(&a), other.get(&b))
        }))
    }

    /// Partial derivatives of every component, new index appended last.
    pub fn partials(&self) -> ArrayD<Expr> {
        let n = self.dim();
        let mut shape = self.comps.shape().to_vec();
        shape.push(n);
        let mut diffs: Vec<Differentiator> =
            self.chart.coords().iter().map(|c| Differentiator::new(c)).collect();
        let mut out = ArrayD::from_elem(IxDyn(&shape), Expr::zero());
        for (idx, e) in self.comps.indexed_iter() {
            let mut full = idx.slice().to_vec();
            full.push(0);
            for (d, differ) in diffs.iter_mut().enumerate() {
                *full.last_mut().expect("nonempty") = d;
                out[IxDyn(&full)] = differ.diff(e);
            }
        }
        out
    }

    pub fn eval_at(&self, x: &[f64]) -> Result<ArrayD<f64>, EvalError> {
        let mut b = BatchBuilder::new();
        let slot = b.add(&self.comps);
        let batch = b.build(self.chart.coords())?;
        Ok(batch.eval(x)?.array(slot))
    }
}

/// Sums contravariant slot `upper` against covariant slot `lower` (positions
/// counted within each group).
pub fn contract(t: &TensorField, upper: usize, lower: usize) -> Result<TensorField, ManifoldError> {
    let (r, s) = t.valence();
    if upper >= r || lower >= s {
        return Err(ManifoldError::IndexOutOfRange { valence: (r, s), upper, lower });
    }
    let n = t.dim();
    let lower_abs = r + lower;
    Ok(TensorField::from_fn(t.chart(), r - 1, s - 1, |idx| {
        let mut full = Vec::with_capacity(r + s);
        let mut rest = idx.iter();
        for slot in 0..r + s {
            if slot == upper || slot == lower_abs {
                full.push(0);
            } else {
                full.push(*rest.next().expect("index count"));
            }
        }
        Expr::sum((0..n).map(|k| {
            full[upper] = k;
            full[lower_abs] = k;
            t.get(&full).clone()
        }))
    }))
}

/// Lowers or raises one index with the metric. See [`IndexMove`] for where
/// the moved slot ends up.
pub fn raise_lower(
    t: &TensorField,
    pos: usize,
    dir: IndexMove,
    g: &Metric,
) -> Result<TensorField, ManifoldError> {
    t.same_chart(g.field())?;
    let (r, s) = t.valence();
    let n = t.dim();
    match dir {
        IndexMove::Lower => {
            if pos >= r {
                return Err(ManifoldError::IndexOutOfRange { valence: (r, s), upper: pos, lower: 0 });
            }
            Ok(TensorField::from_fn(t.chart(), r - 1, s + 1, |idx| {
                // idx: remaining upper (r-1), new lower slot, old lower (s)
                let new_slot = idx[r - 1];
                let mut full = Vec::with_capacity(r + s);
                full.extend_from_slice(&idx[..pos]);
                full.push(0);
                full.extend_from_slice(&idx[pos..r - 1]);
                full.extend_from_slice(&idx[r..]);
                Expr::sum((0..n).map(|k| {
                    full[pos] = k;
                    Expr::mul(g.field().get(&[new_slot, k]), t.get(&full))
                }))
            }))
        }
        IndexMove::Raise => {
            if pos >= s {
                return Err(ManifoldError::IndexOutOfRange { valence: (r, s), upper: 0, lower: pos });
            }
            let inv = g.inverse_field().ok_or(ManifoldError::NoSymbolicInverse(n))?;
            Ok(TensorField::from_fn(t.chart(), r + 1, s - 1, |idx| {
                // idx: old upper (r), new upper slot, remaining lower (s-1)
                let new_slot = idx[r];
                let mut full = Vec::with_capacity(r + s);
                full.extend_from_slice(&idx[..r]);
                full.extend_from_slice(&idx[r + 1..r + 1 + pos]);
                full.push(0);
                full.extend_from_slice(&idx[r + 1 + pos..]);
                let at = r + pos;
                Expr::sum((0..n).map(|k| {
                    full[at] = k;
                    Expr::mul(inv.get(&[new_slot, k]), t.get(&full))
                }))
            }))
        }
    }
}

/// `[X, Y]^k = X^i ∂_i Y^k - Y^i ∂_i X^k`.
pub fn lie_bracket(x: &TensorField, y: &TensorField) -> Result<TensorField, ManifoldError> {
    x.same_chart(y)?;
    for v in [x, y] {
        if v.valence() != (1, 0) {
            return Err(ManifoldError::ValenceMismatch { left: v.valence(), right: (1, 0) });
        }
    }
    let dx = x.partials();
    let dy = y.partials();
    let n = x.dim();
    Ok(TensorField::from_fn(x.chart(), 1, 0, |k| {
        let k = k[0];
        Expr::sum((0..n).map(|i| {
            Expr::sub(
                &Expr::mul(x.get(&[i]), &dy[[k, i]]),
                &Expr::mul(y.get(&[i]), &dx[[k, i]]),
            )
        }))
    }))
}
