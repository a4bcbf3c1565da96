//! Second and third fundamental forms, shape operators, and the Tachibana
//! operator.

use ndarray::{ArrayD, Dimension, IxDyn};

use super::algebra::{along, apply_axis};
use super::{SubmanifoldContext, SubmanifoldError, Which};
use crate::expr::{BatchBuilder, Expr};
use crate::manifold::{ManifoldError, TensorField};

impl SubmanifoldContext {
    /// `∇⊥_{∂_i} V = nor(∇̃_{∂_i} V)` for a normal-valued array `V[a, ..]`;
    /// the derivative index is appended last.
    pub fn normal_derivative(&self, which: Which, v: &ArrayD<Expr>) -> Result<ArrayD<Expr>, SubmanifoldError> {
        let ind = self.induced(which)?;
        let d = along(ind.ambient_gamma(), self.jacobian(), v, self.source().coords());
        Ok(apply_axis(&d, 0, self.normal_projector()))
    }

    /// `∇̃_{∂_i} V` without projection, derivative index last.
    pub fn ambient_derivative(&self, which: Which, v: &ArrayD<Expr>) -> Result<ArrayD<Expr>, SubmanifoldError> {
        let ind = self.induced(which)?;
        Ok(along(ind.ambient_gamma(), self.jacobian(), v, self.source().coords()))
    }

    /// Covariant derivative along `M` of a normal-valued covariant tensor
    /// `T[a, j_1..j_r]`: the normal connection on `a` and the induced
    /// connection on each `j`. The derivative index is appended last.
    pub fn van_der_waerden(&self, which: Which, t: &ArrayD<Expr>) -> Result<ArrayD<Expr>, SubmanifoldError> {
        let m = self.dim();
        let gm = self.induced(which)?.gamma_m().clone();
        let d = self.normal_derivative(which, t)?;
        let r = t.ndim() - 1;
        Ok(ArrayD::from_shape_fn(d.raw_dim(), |ix| {
            let s = ix.slice();
            let x = s[r + 1];
            let mut terms = vec![d[IxDyn(s)].clone()];
            let mut src = s[..=r].to_vec();
            for slot in 1..=r {
                let orig = src[slot];
                for l in 0..m {
                    src[slot] = l;
                    terms.push(Expr::neg(&Expr::mul(&gm[[l, x, orig]], &t[IxDyn(&src)])));
                }
                src[slot] = orig;
            }
            Expr::sum(terms)
        }))
    }
}

/// `(∇_Xσ)(Y, Z) = ∇⊥_X σ(Y, Z) − σ(∇_X Y, Z) − σ(Y, ∇_X Z)`, indexed
/// `[a, y, z, x]`, for either connection.
pub fn third_fundamental_form(ctx: &SubmanifoldContext, which: Which) -> Result<ArrayD<Expr>, SubmanifoldError> {
    ctx.van_der_waerden(which, ctx.sigma(which)?)
}

/// `(∇_X∇_Yσ)(Z, W)` in tensorial form, indexed `[a, z, w, x, y]`.
pub fn second_cov_derivative_sigma(
    ctx: &SubmanifoldContext,
    which: Which,
) -> Result<ArrayD<Expr>, SubmanifoldError> {
    let t = third_fundamental_form(ctx, which)?;
    // ∇ of [a, z, w, y] appends x: [a, z, w, y, x]
    let dt = ctx.van_der_waerden(which, &t)?;
    let mut shape = dt.shape().to_vec();
    shape.swap(3, 4);
    Ok(ArrayD::from_shape_fn(IxDyn(&shape), |ix| dt[[ix[0], ix[1], ix[2], ix[4], ix[3]]].clone()))
}

/// The shape operator `A_V` as a (1,1) field on the source chart, defined
/// by `h(A_V X, Y) = g(σ(X, Y), V)`. `V[a]` must be normal at `points`.
pub fn shape_operator(
    ctx: &SubmanifoldContext,
    v: &ArrayD<Expr>,
    points: &[Vec<f64>],
) -> Result<TensorField, SubmanifoldError> {
    let n = ctx.ambient_dim();
    if v.shape() != [n] {
        return Err(ManifoldError::ShapeMismatch { expected: vec![n], found: v.shape().to_vec() }.into());
    }
    let pv = apply_axis(v, 0, ctx.tangent_projector());
    let mut b = BatchBuilder::new();
    let sp = b.add(&pv);
    let sv = b.add(v);
    let batch = b.build(ctx.source().coords())?;
    for p in points {
        let vals = match batch.eval(p) {
            Ok(vals) => vals,
            Err(e) if e.is_domain() => continue,
            Err(e) => return Err(e.into()),
        };
        let residual = vals.view(sp).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let scale = vals.view(sv).iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if residual > 1e-9 * (1.0 + scale) {
            return Err(SubmanifoldError::NotNormal { residual, point: p.clone() });
        }
    }
    Ok(TensorField::from_array(ctx.source(), 1, 1, shape_components(ctx, v))?)
}

/// `(A_V)^l_i = h^{lk} g_ab σ^a_{ki} V^b` without the normality check.
pub(crate) fn shape_components(ctx: &SubmanifoldContext, v: &ArrayD<Expr>) -> ArrayD<Expr> {
    let (n, m) = (ctx.ambient_dim(), ctx.dim());
    let g = ctx.g();
    let sigma = ctx.sigma(Which::LeviCivita).expect("Levi-Civita quantities always exist");
    let gv = apply_axis(v, 0, g);
    // g(σ(∂_k, ∂_i), V)
    let dual = ArrayD::from_shape_fn(IxDyn(&[m, m]), |ix| {
        Expr::sum((0..n).map(|a| Expr::mul(&sigma[[a, ix[0], ix[1]]], &gv[[a]])))
    });
    apply_axis(&dual, 0, ctx.induced_inverse())
}

/// `Q(B, T)(X_1..X_l; X, Y) = −Σ_k T(X_1, .., (X ∧_B Y) X_k, .., X_l)` with
/// `(X ∧_B Y) Z = B(Y, Z) X − B(X, Z) Y`. The two new slots come last.
pub fn tachibana_q(b: &TensorField, t: &TensorField) -> Result<TensorField, ManifoldError> {
    if b.valence() != (0, 2) {
        return Err(ManifoldError::ValenceMismatch { left: b.valence(), right: (0, 2) });
    }
    if t.valence().0 != 0 {
        return Err(ManifoldError::ValenceMismatch { left: t.valence(), right: (0, t.rank()) });
    }
    b.same_chart(t)?;
    let l = t.rank();
    Ok(TensorField::from_fn(t.chart(), 0, l + 2, |ix| {
        let (x, y) = (ix[l], ix[l + 1]);
        let mut terms = Vec::new();
        let mut src = ix[..l].to_vec();
        for k in 0..l {
            let z = ix[k];
            src[k] = x;
            terms.push(Expr::neg(&Expr::mul(b.get(&[y, z]), t.get(&src))));
            src[k] = y;
            terms.push(Expr::mul(b.get(&[x, z]), t.get(&src)));
            src[k] = z;
        }
        Expr::sum(terms)
    }))
}

/// Numeric Tachibana operator on an array whose first `lead` indices are
/// passive (e.g. the normal index of `σ`).
pub(crate) fn tachibana_values(b: &ArrayD<f64>, t: &ArrayD<f64>, lead: usize) -> ArrayD<f64> {
    let m = b.shape()[0];
    let l = t.ndim() - lead;
    let mut shape = t.shape().to_vec();
    shape.extend([m, m]);
    ArrayD::from_shape_fn(IxDyn(&shape), |ix| {
        let s = ix.slice();
        let (x, y) = (s[lead + l], s[lead + l + 1]);
        let mut src = s[..lead + l].to_vec();
        let mut acc = 0.0;
        for k in lead..lead + l {
            let z = src[k];
            src[k] = x;
            acc -= b[[y, z]] * t[IxDyn(&src)];
            src[k] = y;
            acc += b[[x, z]] * t[IxDyn(&src)];
            src[k] = z;
        }
        acc
    })
}
