use std::sync::Arc;

use super::{build_structure, LcsStructure};
use crate::expr::Expr;
use crate::manifold::{Chart, FrameField, Metric, Signature, TensorField};
use crate::report::Tolerance;

pub const EXAMPLE_COORDS: [&str; 5] = ["x", "y", "z", "u", "v"];

const METRIC_DIAG: [&str; 5] = ["exp(2*z)", "exp(2*z)", "-exp(4*z)", "exp(2*z)", "exp(2*z)"];
const FRAME_SCALE: [&str; 5] = ["exp(-z)", "exp(-z)", "exp(-2*z)", "exp(-z)", "exp(-z)"];

fn chart() -> Arc<Chart> {
    Chart::with_default_box(&EXAMPLE_COORDS).expect("valid chart")
}

fn metric_field(chart: &Arc<Chart>) -> TensorField {
    TensorField::from_fn(chart, 0, 2, |ix| {
        if ix[0] == ix[1] { chart.parse(METRIC_DIAG[ix[0]]).expect("literal parses") } else { Expr::zero() }
    })
}

fn frame_vector(chart: &Arc<Chart>, i: usize) -> TensorField {
    TensorField::from_fn(chart, 1, 0, |k| {
        if k[0] == i { chart.parse(FRAME_SCALE[i]).expect("literal parses") } else { Expr::zero() }
    })
}

/// The five-dimensional example: `g = diag(e^{2z}, e^{2z}, −e^{4z}, e^{2z}, e^{2z})`
/// on `(x, y, z, u, v)` with `ξ = e_3 = e^{-2z} ∂_z`.
pub fn paper_example() -> (Metric, LcsStructure) {
    let chart = chart();
    let g = metric_field(&chart);
    let g = Metric::new(g, Signature::lorentzian(5)).expect("example metric");
    let xi = frame_vector(&chart, 2);
    let points = chart.sample_points(20, 42);
    let l = build_structure(&g, &xi, &points, &Tolerance::default()).expect("example is an LCS structure");
    (g, l)
}

/// The orthonormal frame `e_1 = e^{-z}∂_x, …, e_3 = e^{-2z}∂_z, …` with
/// `e_3` timelike.
pub fn paper_example_frame(chart: &Arc<Chart>) -> FrameField {
    let vectors = (0..5).map(|i| frame_vector(chart, i)).collect();
    FrameField::new(vectors, vec![1, 1, -1, 1, 1]).expect("five vectors on a 5-chart")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{frame_components, lie_bracket};

    #[test]
    fn metric_in_frame_is_diag_with_one_minus() {
        let (g, _) = paper_example();
        let f = paper_example_frame(g.chart());
        let pts = g.chart().sample_points(100, 42);
        for c in frame_components(g.field(), &f, None, &pts).unwrap() {
            for i in 0..5 {
                for j in 0..5 {
                    let want = match (i == j, i) {
                        (false, _) => 0.0,
                        (true, 2) => -1.0,
                        _ => 1.0,
                    };
                    assert!((c[[i, j]] - want).abs() < 1e-12);
                }
            }
        }
        assert!(g.audit(&pts).unwrap().skipped.is_empty());
    }

    #[test]
    fn brackets_with_e3() {
        let (g, _) = paper_example();
        let f = paper_example_frame(g.chart());
        let pts = g.chart().sample_points(20, 7);
        for i in [0, 1, 3, 4] {
            let br = lie_bracket(f.vector(i), f.vector(2)).unwrap();
            for (p, c) in pts.iter().zip(frame_components(&br, &f, None, &pts).unwrap()) {
                let want = (-2.0 * p[2]).exp();
                for k in 0..5 {
                    let w = if k == i { want } else { 0.0 };
                    assert!((c[[k]] - w).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn trace_of_phi_from_frame_eigenvalues() {
        // φ e_i = e_i for i ≠ 3 and φ e_3 = 0, so the frame eigenvalues sum to 4.
        let (g, l) = paper_example();
        let f = paper_example_frame(g.chart());
        let pts = g.chart().sample_points(20, 3);
        for c in frame_components(l.phi(), &f, None, &pts).unwrap() {
            let eig = [1.0, 1.0, 0.0, 1.0, 1.0];
            for i in 0..5 {
                for j in 0..5 {
                    let w = if i == j { eig[i] } else { 0.0 };
                    assert!((c[[i, j]] - w).abs() < 1e-12);
                }
            }
        }
    }
}
