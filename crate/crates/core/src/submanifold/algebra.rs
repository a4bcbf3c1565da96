//! Small helpers for component arrays of expressions.

use ndarray::{Dimension, ArrayD, IxDyn};

use crate::expr::{Differentiator, Expr};

/// `out[.., r, ..] = Σ_s mat[r, s] arr[.., s, ..]` along `axis`.
pub(crate) fn apply_axis(arr: &ArrayD<Expr>, axis: usize, mat: &ArrayD<Expr>) -> ArrayD<Expr> {
    let q = mat.shape()[1];
    debug_assert_eq!(arr.shape()[axis], q);
    let mut shape = arr.shape().to_vec();
    shape[axis] = mat.shape()[0];
    ArrayD::from_shape_fn(IxDyn(&shape), |ix| {
        let mut src = ix.slice().to_vec();
        let r = ix[axis];
        Expr::sum((0..q).map(|s| {
            src[axis] = s;
            Expr::mul(&mat[[r, s]], &arr[IxDyn(&src)])
        }))
    })
}

/// Partial derivatives with the derivative index appended last.
pub(crate) fn partials(arr: &ArrayD<Expr>, coords: &[String]) -> ArrayD<Expr> {
    let mut diffs: Vec<Differentiator> = coords.iter().map(|c| Differentiator::new(c)).collect();
    let mut shape = arr.shape().to_vec();
    shape.push(coords.len());
    ArrayD::from_shape_fn(IxDyn(&shape), |ix| {
        let (head, last) = ix.slice().split_at(ix.ndim() - 1);
        diffs[last[0]].diff(&arr[IxDyn(head)])
    })
}

/// `(D_i V)^a = ∂_i V^a + Γ^a_{bc} J^b_i V^c` for arrays whose first index
/// is ambient; the derivative index is appended last.
pub(crate) fn along(
    gamma: &ArrayD<Expr>,
    jac: &ArrayD<Expr>,
    v: &ArrayD<Expr>,
    coords: &[String],
) -> ArrayD<Expr> {
    let n = jac.shape()[0];
    let d = partials(v, coords);
    // Γ^a_{·c} contracted with J_i: K[a, c, i] = Γ^a_{bc} J^b_i
    let m = jac.shape()[1];
    let k = ArrayD::from_shape_fn(IxDyn(&[n, n, m]), |ix| {
        let (a, c, i) = (ix[0], ix[1], ix[2]);
        Expr::sum((0..n).map(|b| Expr::mul(&gamma[[a, b, c]], &jac[[b, i]])))
    });
    ArrayD::from_shape_fn(d.raw_dim(), |ix| {
        let s = ix.slice();
        let (a, i) = (s[0], s[s.len() - 1]);
        let mut src = s[..s.len() - 1].to_vec();
        let mut terms = vec![d[IxDyn(s)].clone()];
        for c in 0..n {
            src[0] = c;
            terms.push(Expr::mul(&k[[a, c, i]], &v[IxDyn(&src)]));
        }
        Expr::sum(terms)
    })
}

pub(crate) fn square(rows: &ArrayD<Expr>) -> Vec<Vec<Expr>> {
    let n = rows.shape()[0];
    (0..n).map(|i| (0..n).map(|j| rows[[i, j]].clone()).collect()).collect()
}

pub(crate) fn from_rows(rows: &[Vec<Expr>]) -> ArrayD<Expr> {
    let n = rows.len();
    ArrayD::from_shape_fn(IxDyn(&[n, n]), |ix| rows[ix[0]][ix[1]].clone())
}
