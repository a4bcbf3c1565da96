use std::sync::Arc;

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayD, IxDyn};

use super::{Chart, ManifoldError, Metric, TensorField};
use crate::expr::{Batch, BatchBuilder, Slot};

/// Vector fields `e_1..e_m` with causal signs `ε_i = g(e_i, e_i)` for
/// orthonormal frames.
#[derive(Debug, Clone)]
pub struct FrameField {
    chart: Arc<Chart>,
    vectors: Vec<TensorField>,
    signs: Vec<i8>,
}

impl FrameField {
    pub fn new(vectors: Vec<TensorField>, signs: Vec<i8>) -> Result<FrameField, ManifoldError> {
        let first = vectors.first().ok_or(ManifoldError::FrameSize { needed: 1, have: 0 })?;
        let chart = first.chart().clone();
        if vectors.len() > chart.dim() {
            return Err(ManifoldError::FrameSize { needed: chart.dim(), have: vectors.len() });
        }
        if signs.len() != vectors.len() {
            return Err(ManifoldError::FrameSize { needed: vectors.len(), have: signs.len() });
        }
        for v in &vectors {
            first.same_chart(v)?;
            if v.valence() != (1, 0) {
                return Err(ManifoldError::ValenceMismatch { left: v.valence(), right: (1, 0) });
            }
        }
        Ok(FrameField { chart, vectors, signs })
    }

    /// `∂_1..∂_n` with all signs positive.
    pub fn coordinate(chart: &Arc<Chart>) -> FrameField {
        let vectors = (0..chart.dim()).map(|i| TensorField::coordinate_vector(chart, i)).collect();
        FrameField { chart: chart.clone(), vectors, signs: vec![1; chart.dim()] }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.vectors.len() == self.chart.dim()
    }

    pub fn vectors(&self) -> &[TensorField] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &TensorField {
        &self.vectors[i]
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    fn compile(&self) -> Result<(Batch, Vec<Slot>), ManifoldError> {
        let mut b = BatchBuilder::new();
        let slots = self.vectors.iter().map(|v| b.add(v.comps())).collect();
        Ok((b.build(self.chart.coords())?, slots))
    }

    /// The `n × m` matrix whose columns are the frame vectors at `x`.
    pub fn matrix_at(&self, x: &[f64]) -> Result<DMatrix<f64>, ManifoldError> {
        let (batch, slots) = self.compile()?;
        columns(&batch, &slots, self.chart.dim(), x)
    }

    /// Fails at the first point where the frame loses rank.
    pub fn check_independent(&self, points: &[Vec<f64>]) -> Result<(), ManifoldError> {
        let (batch, slots) = self.compile()?;
        for p in points {
            let e = columns(&batch, &slots, self.chart.dim(), p)?;
            let sv = e.singular_values();
            let max = sv.max();
            if !(sv.min() > 1e-10 * max.max(1.0)) {
                return Err(ManifoldError::FrameDependent { point: p.clone() });
            }
        }
        Ok(())
    }

    /// Largest `|g(e_i, e_j) - ε_i δ_ij|` over the points.
    pub fn orthonormality_residual(
        &self,
        g: &Metric,
        points: &[Vec<f64>],
    ) -> Result<f64, ManifoldError> {
        self.chart_matches(g)?;
        let (batch, slots) = self.compile()?;
        let gev = g.evaluator()?;
        let m = self.len();
        let mut worst: f64 = 0.0;
        for p in points {
            let e = columns(&batch, &slots, self.chart.dim(), p)?;
            let (gm, _) = gev.at(p)?;
            let gram = e.transpose() * gm * &e;
            for i in 0..m {
                for j in 0..m {
                    let want = if i == j { f64::from(self.signs[i]) } else { 0.0 };
                    worst = worst.max((gram[(i, j)] - want).abs());
                }
            }
        }
        Ok(worst)
    }

    pub fn check_orthonormal(
        &self,
        g: &Metric,
        points: &[Vec<f64>],
        tol: f64,
    ) -> Result<(), ManifoldError> {
        let residual = self.orthonormality_residual(g, points)?;
        if residual <= tol {
            Ok(())
        } else {
            Err(ManifoldError::NotOrthonormal { residual })
        }
    }

    fn chart_matches(&self, g: &Metric) -> Result<(), ManifoldError> {
        if *self.chart == **g.chart() {
            Ok(())
        } else {
            Err(ManifoldError::ChartMismatch)
        }
    }
}

fn columns(batch: &Batch, slots: &[Slot], n: usize, x: &[f64]) -> Result<DMatrix<f64>, ManifoldError> {
    let vals = batch.eval(x)?;
    Ok(DMatrix::from_fn(n, slots.len(), |a, i| vals.view(slots[i])[[a]]))
}

/// Components of `t` against the frame at each point.
///
/// Contravariant slots are paired with the coframe and covariant slots with
/// the frame vectors. A complete frame uses the dual basis `E⁻¹`; a partial
/// frame needs the metric and pairs through `θ^a = ε_a g(e_a, ·)`, which is
/// only meaningful for orthonormal frames.
pub fn frame_components(
    t: &TensorField,
    f: &FrameField,
    g: Option<&Metric>,
    points: &[Vec<f64>],
) -> Result<Vec<ArrayD<f64>>, ManifoldError> {
    t.same_chart(f.vector(0))?;
    let n = t.dim();
    let m = f.len();
    let (r, s) = t.valence();
    let mut b = BatchBuilder::new();
    let tslot = b.add(t.comps());
    let fslots: Vec<Slot> = f.vectors.iter().map(|v| b.add(v.comps())).collect();
    let batch = b.build(t.chart().coords())?;
    let gev = match (f.is_complete(), g) {
        (true, _) => None,
        (false, Some(g)) => Some(g.evaluator()?),
        (false, None) => return Err(ManifoldError::FrameSize { needed: n, have: m }),
    };
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let vals = batch.eval(p)?;
        let e = DMatrix::from_fn(n, m, |a, i| vals.view(fslots[i])[[a]]);
        let coframe = match &gev {
            None => e
                .clone()
                .try_inverse()
                .ok_or_else(|| ManifoldError::FrameDependent { point: p.clone() })?,
            Some(gev) => {
                let (gm, _) = gev.at(p)?;
                let mut th = e.transpose() * gm;
                for (a, &sign) in f.signs.iter().enumerate() {
                    th.row_mut(a).scale_mut(f64::from(sign));
                }
                th
            }
        };
        let coframe = Array2::from_shape_fn((m, n), |(a, i)| coframe[(a, i)]);
        let frame_t = Array2::from_shape_fn((m, n), |(a, i)| e[(i, a)]);
        let mut arr = vals.array(tslot);
        for axis in 0..r {
            arr = transform_axis(&arr, axis, &coframe);
        }
        for axis in r..r + s {
            arr = transform_axis(&arr, axis, &frame_t);
        }
        out.push(arr);
    }
    Ok(out)
}

/// `out[.., a, ..] = Σ_i mat[a, i] arr[.., i, ..]` along `axis`.
pub fn transform_axis(arr: &ArrayD<f64>, axis: usize, mat: &Array2<f64>) -> ArrayD<f64> {
    let last = arr.ndim() - 1;
    let mut moved = arr.view();
    moved.swap_axes(axis, last);
    let mut shape = moved.shape().to_vec();
    let inner = shape[last];
    let rows = moved.len() / inner.max(1);
    let flat = moved
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((rows, inner))
        .expect("contiguous reshape");
    let prod = flat.dot(&mat.t());
    shape[last] = mat.nrows();
    let mut res = prod.into_shape_with_order(IxDyn(&shape)).expect("contiguous reshape");
    res.swap_axes(axis, last);
    res.as_standard_layout().into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::manifold::{lie_bracket, Signature};

    fn example() -> (Arc<Chart>, Metric, FrameField) {
        let chart = Chart::with_default_box(&["x", "y", "z", "u", "v"]).unwrap();
        let diag = ["exp(2*z)", "exp(2*z)", "-exp(4*z)", "exp(2*z)", "exp(2*z)"];
        let g = TensorField::from_fn(&chart, 0, 2, |ix| {
            if ix[0] == ix[1] { chart.parse(diag[ix[0]]).unwrap() } else { Expr::zero() }
        });
        let g = Metric::new(g, Signature::lorentzian(5)).unwrap();
        let scale = ["exp(-z)", "exp(-z)", "exp(-2*z)", "exp(-z)", "exp(-z)"];
        let vectors = (0..5)
            .map(|i| {
                TensorField::from_fn(&chart, 1, 0, |k| {
                    if k[0] == i { chart.parse(scale[i]).unwrap() } else { Expr::zero() }
                })
            })
            .collect();
        let f = FrameField::new(vectors, vec![1, 1, -1, 1, 1]).unwrap();
        (chart, g, f)
    }

    #[test]
    fn example_frame_is_orthonormal() {
        let (chart, g, f) = example();
        let pts = chart.sample_points(50, 42);
        f.check_independent(&pts).unwrap();
        assert!(f.orthonormality_residual(&g, &pts).unwrap() < 1e-12);
        let comps = frame_components(g.field(), &f, None, &pts).unwrap();
        for c in comps {
            for i in 0..5 {
                for j in 0..5 {
                    let want = if i != j { 0.0 } else if i == 2 { -1.0 } else { 1.0 };
                    assert!((c[[i, j]] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bracket_of_e1_e3() {
        let (chart, _, f) = example();
        let br = lie_bracket(f.vector(0), f.vector(2)).unwrap();
        let pts = chart.sample_points(30, 9);
        let comps = frame_components(&br, &f, None, &pts).unwrap();
        for (p, c) in pts.iter().zip(comps) {
            let z = p[2];
            let want = (-2.0 * z).exp();
            assert!((c[[0]] - want).abs() < 1e-12 * want);
            for k in 1..5 {
                assert!(c[[k]].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_identity_for_frame_fields() {
        let (chart, _, f) = example();
        let e = f.vectors();
        let pts = chart.sample_points(100, 42);
        for (a, b, c) in [(0, 2, 3), (1, 2, 4), (0, 1, 2)] {
            let t1 = lie_bracket(&lie_bracket(&e[a], &e[b]).unwrap(), &e[c]).unwrap();
            let t2 = lie_bracket(&lie_bracket(&e[b], &e[c]).unwrap(), &e[a]).unwrap();
            let t3 = lie_bracket(&lie_bracket(&e[c], &e[a]).unwrap(), &e[b]).unwrap();
            let sum = t1.add(&t2).unwrap().add(&t3).unwrap();
            for p in &pts {
                assert!(sum.eval_at(p).unwrap().iter().all(|v| v.abs() < 1e-9));
            }
        }
    }

    #[test]
    fn coordinate_frame_returns_coordinate_components() {
        let (chart, g, _) = example();
        let f = FrameField::coordinate(&chart);
        let pts = chart.sample_points(5, 2);
        let comps = frame_components(g.field(), &f, None, &pts).unwrap();
        for (p, c) in pts.iter().zip(comps) {
            let direct = g.field().eval_at(p).unwrap();
            assert!(c.iter().zip(direct.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn partial_frame_uses_metric_dual() {
        let (chart, g, f) = example();
        let sub = FrameField::new(vec![f.vector(0).clone(), f.vector(2).clone()], vec![1, -1]).unwrap();
        let pts = chart.sample_points(5, 2);
        assert!(frame_components(g.field(), &sub, None, &pts).is_err());
        let v = f.vector(2).scale(&Expr::int(3));
        let comps = frame_components(&v, &sub, Some(&g), &pts).unwrap();
        for c in comps {
            assert!(c[[0]].abs() < 1e-12 && (c[[1]] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dependent_frame_is_rejected() {
        let chart = Chart::with_default_box(&["x", "y"]).unwrap();
        let a = TensorField::coordinate_vector(&chart, 0);
        let b = a.scale(&chart.parse("y").unwrap());
        let f = FrameField::new(vec![a, b], vec![1, 1]).unwrap();
        assert!(matches!(f.check_independent(&chart.sample_points(10, 1)), Err(ManifoldError::FrameDependent { .. })));
    }
}
