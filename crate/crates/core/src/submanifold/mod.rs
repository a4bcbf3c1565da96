//! Immersed submanifolds: induced geometry under the Levi-Civita and
//! quarter-symmetric connections, invariance, recurrence, and the
//! associated identity suites.
//!
//! Everything is expressed on the source chart. Ambient fields are pulled
//! back by substituting the immersion into their components, and ambient
//! vectors along `M` keep their ambient index. With `J^a_i = ∂_i f^a`:
//!
//! - `h = Jᵀ g J`, `P = J h⁻¹ Jᵀ g` (tangent projector), `N = I − P`;
//! - `∇̃_{∂_i} f_*∂_j = ∂_i J_j + Γ̃(J_i, J_j)`, whose normal part is `σ_ij`
//!   and whose tangential part is `Γ_M^l_{ij} J_l` (Gauss formula).
//!
//! Normal-valued tensors are indexed `[a, slots..]` with `a` ambient; a
//! derivative slot is appended last, as elsewhere in the crate.

mod algebra;
mod forms;
mod recurrence;
mod suites;

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayD, IxDyn};
use thiserror::Error;

use crate::connection::{quarter_symmetric, Connection, ConnectionError};
use crate::expr::{Batch, BatchBuilder, EvalError, Expr, Slot, Substitution};
use crate::lcs::LcsStructure;
use crate::manifold::{invert_matrix, Chart, ManifoldError, Metric, TensorField};

pub use forms::{second_cov_derivative_sigma, shape_operator, tachibana_q, third_fundamental_form};
pub use recurrence::{
    field_recurrence, recurrence_classify, RecurrenceClass, RecurrenceSample, RecurrenceVerdict,
    RECURRENCE_TOL,
};
pub use suites::{invariance_check, invariant_identity_suite, parallelism_residuals, theorem5_suite};

use algebra::{apply_axis, from_rows, partials, square};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SubmanifoldError {
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("immersion has {found} components for a {expected}-dimensional target")]
    MapArity { expected: usize, found: usize },
    #[error("source dimension {source_dim} must be below target dimension {target}")]
    NotProper { source_dim: usize, target: usize },
    #[error("immersion component {index} uses `{name}`, which is not a source coordinate")]
    UnknownCoordinate { index: usize, name: String },
    #[error("Jacobian has rank {rank} < {expected} at {point:?}")]
    RankDeficient { rank: usize, expected: usize, point: Vec<f64> },
    #[error("induced metric needs a symbolic inverse (dimension {0})")]
    NoSymbolicInverse(usize),
    #[error("normal direction with g(ν, ν) = {norm:.3e} at {point:?}; only spacelike normal bundles are supported")]
    NonSpacelikeNormal { norm: f64, point: Vec<f64> },
    #[error("the field is not normal: tangential residual {residual:.3e} at {point:?}")]
    NotNormal { residual: f64, point: Vec<f64> },
    #[error("this operation needs an ambient LCS structure")]
    NoStructure,
    #[error("the submanifold is not invariant (residual {0:.3e})")]
    NotInvariant(f64),
    #[error("α = 1 at every sample point; the theorem requires α ≠ 1")]
    AlphaIsOne,
    #[error("{skipped} of {total} sample points could not be evaluated")]
    TooManySkipped { skipped: usize, total: usize },
}

/// A map `f: source → target` given by component expressions in the source
/// coordinates.
#[derive(Debug, Clone)]
pub struct Immersion {
    source: Arc<Chart>,
    target: Arc<Chart>,
    map: Vec<Expr>,
    jacobian: ArrayD<Expr>,
}

impl Immersion {
    pub fn new(source: &Arc<Chart>, target: &Arc<Chart>, map: Vec<Expr>) -> Result<Immersion, SubmanifoldError> {
        let (m, n) = (source.dim(), target.dim());
        if map.len() != n {
            return Err(SubmanifoldError::MapArity { expected: n, found: map.len() });
        }
        if m >= n {
            return Err(SubmanifoldError::NotProper { source_dim: m, target: n });
        }
        for (index, e) in map.iter().enumerate() {
            if let Some(name) = e.coordinates().into_iter().find(|c| source.index_of(c).is_none()) {
                return Err(SubmanifoldError::UnknownCoordinate { index, name });
            }
        }
        let col = ArrayD::from_shape_fn(IxDyn(&[n]), |ix| map[ix[0]].clone());
        let jacobian = partials(&col, source.coords());
        Ok(Immersion { source: source.clone(), target: target.clone(), map, jacobian })
    }

    pub fn source(&self) -> &Arc<Chart> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Chart> {
        &self.target
    }

    pub fn map(&self) -> &[Expr] {
        &self.map
    }

    /// `J^a_i = ∂f^a/∂x^i`, indexed `[a, i]`.
    pub fn jacobian(&self) -> &ArrayD<Expr> {
        &self.jacobian
    }

    /// Pulls back every component of `arr` along the map.
    pub fn pull_back(&self, arr: &ArrayD<Expr>) -> ArrayD<Expr> {
        let lookup = |name: &str| self.target.index_of(name).map(|i| self.map[i].clone());
        let mut sub = Substitution::new(&lookup);
        arr.map(|e| sub.apply(e))
    }

    pub fn pull_back_expr(&self, e: &Expr) -> Expr {
        let lookup = |name: &str| self.target.index_of(name).map(|i| self.map[i].clone());
        e.substitute(&lookup)
    }

    /// Checks that the Jacobian has full rank `m` at every point.
    pub fn check_rank(&self, points: &[Vec<f64>]) -> Result<(), SubmanifoldError> {
        let (n, m) = (self.target.dim(), self.source.dim());
        let mut b = BatchBuilder::new();
        let s = b.add(&self.jacobian);
        let batch = b.build(self.source.coords())?;
        for p in points {
            let v = match batch.eval(p) {
                Ok(v) => v,
                Err(e) if e.is_domain() => continue,
                Err(e) => return Err(e.into()),
            };
            let j = v.view(s);
            let mat = DMatrix::from_fn(n, m, |a, i| j[[a, i]]);
            let sv = mat.singular_values();
            let top = sv.max().max(1.0);
            let rank = sv.iter().filter(|&&x| x > 1e-10 * top).count();
            if rank < m {
                return Err(SubmanifoldError::RankDeficient { rank, expected: m, point: p.clone() });
            }
        }
        Ok(())
    }
}

/// Which connection induces the submanifold quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    LeviCivita,
    QuarterSymmetric,
}

/// Quantities induced on `M` by one ambient connection.
#[derive(Debug, Clone)]
pub struct Induced {
    /// ambient coefficients pulled back, `[a, b, c]`
    gamma: ArrayD<Expr>,
    /// `∇̃_{∂_i} f_*∂_j`, `[a, i, j]`
    accel: ArrayD<Expr>,
    /// `σ_ij`, `[a, i, j]`
    sigma: ArrayD<Expr>,
    /// `Γ_M^l_{ij}`, `[l, i, j]`
    gamma_m: ArrayD<Expr>,
}

impl Induced {
    pub fn sigma(&self) -> &ArrayD<Expr> {
        &self.sigma
    }

    pub fn gamma_m(&self) -> &ArrayD<Expr> {
        &self.gamma_m
    }

    pub fn ambient_gamma(&self) -> &ArrayD<Expr> {
        &self.gamma
    }

    pub fn accel(&self) -> &ArrayD<Expr> {
        &self.accel
    }
}

/// The LCS structure pulled back to `M`.
#[derive(Debug, Clone)]
pub struct InducedStructure {
    /// ambient components along `M`
    pub xi: ArrayD<Expr>,
    pub eta: ArrayD<Expr>,
    pub phi: ArrayD<Expr>,
    pub alpha: Expr,
    pub rho: Expr,
    /// source components of the tangential part of `ξ`
    pub xi_m: ArrayD<Expr>,
    /// `η(f_*∂_i)`
    pub eta_m: ArrayD<Expr>,
    /// source components of the tangential part of `φ f_*∂_i`, `[l, i]`
    pub phi_m: ArrayD<Expr>,
    /// `φ f_*∂_i` in ambient components, `[a, i]`
    pub phi_j: ArrayD<Expr>,
}

#[derive(Debug)]
pub struct SubmanifoldContext {
    immersion: Immersion,
    metric: Metric,
    structure: Option<LcsStructure>,
    g: ArrayD<Expr>,
    h: TensorField,
    h_inv: ArrayD<Expr>,
    tangent: ArrayD<Expr>,
    normal: ArrayD<Expr>,
    lc: Induced,
    qs: Option<Induced>,
    induced: Option<InducedStructure>,
    frame_batch: OnceLock<Result<(Batch, Slot, Slot, Slot), EvalError>>,
}

/// Builds the context for an immersion into an LCS manifold, including the
/// quarter-symmetric quantities. The rank condition is checked at `points`
/// (source coordinates).
pub fn immerse(
    f: Immersion,
    l: &LcsStructure,
    points: &[Vec<f64>],
) -> Result<SubmanifoldContext, SubmanifoldError> {
    SubmanifoldContext::build(f, l.metric().clone(), Some(l.clone()), points)
}

impl SubmanifoldContext {
    /// A context without an ambient structure; only the Levi-Civita
    /// quantities are available.
    pub fn new(f: Immersion, metric: &Metric, points: &[Vec<f64>]) -> Result<SubmanifoldContext, SubmanifoldError> {
        SubmanifoldContext::build(f, metric.clone(), None, points)
    }

    fn build(
        f: Immersion,
        metric: Metric,
        structure: Option<LcsStructure>,
        points: &[Vec<f64>],
    ) -> Result<SubmanifoldContext, SubmanifoldError> {
        if **metric.chart() != **f.target() {
            return Err(ManifoldError::ChartMismatch.into());
        }
        f.check_rank(points)?;
        let (n, m) = (f.target().dim(), f.source().dim());
        if m > 6 {
            return Err(SubmanifoldError::NoSymbolicInverse(m));
        }
        let jac = f.jacobian().clone();
        let g = f.pull_back(metric.field().comps());
        // gj[a, i] = g_ab J^b_i
        let gj = apply_axis(&jac, 0, &g);
        let h_arr = ArrayD::from_shape_fn(IxDyn(&[m, m]), |ix| {
            Expr::sum((0..n).map(|a| Expr::mul(&jac[[a, ix[0]]], &gj[[a, ix[1]]])))
        });
        let h = TensorField::from_array(f.source(), 0, 2, h_arr.clone())?;
        let h_inv = from_rows(&invert_matrix(&square(&h_arr)));
        // coordinate-lowering map: lift[l, a] = h^{lk} g_ab J^b_k
        let lift = ArrayD::from_shape_fn(IxDyn(&[m, n]), |ix| {
            Expr::sum((0..m).map(|k| Expr::mul(&h_inv[[ix[0], k]], &gj[[ix[1], k]])))
        });
        let tangent = ArrayD::from_shape_fn(IxDyn(&[n, n]), |ix| {
            Expr::sum((0..m).map(|l| Expr::mul(&jac[[ix[0], l]], &lift[[l, ix[1]]])))
        });
        let normal = ArrayD::from_shape_fn(IxDyn(&[n, n]), |ix| {
            let delta = if ix[0] == ix[1] { Expr::one() } else { Expr::zero() };
            Expr::sub(&delta, &tangent[[ix[0], ix[1]]])
        });

        let induce = |c: &Connection| -> Induced {
            let gamma = f.pull_back(c.coeffs());
            let dj = partials(&jac, f.source().coords());
            let accel = ArrayD::from_shape_fn(IxDyn(&[n, m, m]), |ix| {
                let (a, i, j) = (ix[0], ix[1], ix[2]);
                let mut terms = vec![dj[[a, j, i]].clone()];
                for b in 0..n {
                    for c in 0..n {
                        terms.push(Expr::mul(&gamma[[a, b, c]], &Expr::mul(&jac[[b, i]], &jac[[c, j]])));
                    }
                }
                Expr::sum(terms)
            });
            let sigma = apply_axis(&accel, 0, &normal);
            let gamma_m = apply_axis(&accel, 0, &lift);
            Induced { gamma, accel, sigma, gamma_m }
        };

        let (lc, qs, induced) = match &structure {
            Some(l) => {
                let lc = induce(l.levi_civita());
                let qs = induce(&quarter_symmetric(l.levi_civita(), l)?);
                let xi = f.pull_back(l.xi().comps());
                let eta = f.pull_back(l.eta().comps());
                let phi = f.pull_back(l.phi().comps());
                let phi_j = apply_axis(&jac, 0, &phi);
                let eta_m = ArrayD::from_shape_fn(IxDyn(&[m]), |ix| {
                    Expr::sum((0..n).map(|a| Expr::mul(&eta[[a]], &jac[[a, ix[0]]])))
                });
                let induced = InducedStructure {
                    xi_m: apply_axis(&xi, 0, &lift),
                    phi_m: apply_axis(&phi_j, 0, &lift),
                    alpha: f.pull_back_expr(l.alpha()),
                    rho: f.pull_back_expr(l.rho()),
                    xi,
                    eta,
                    phi,
                    eta_m,
                    phi_j,
                };
                (lc, Some(qs), Some(induced))
            }
            None => {
                let c = Connection::levi_civita(&metric)?;
                (induce(&c), None, None)
            }
        };

        Ok(SubmanifoldContext {
            immersion: f,
            metric,
            structure,
            g,
            h,
            h_inv,
            tangent,
            normal,
            lc,
            qs,
            induced,
            frame_batch: OnceLock::new(),
        })
    }

    pub fn immersion(&self) -> &Immersion {
        &self.immersion
    }

    pub fn source(&self) -> &Arc<Chart> {
        self.immersion.source()
    }

    pub fn ambient_metric(&self) -> &Metric {
        &self.metric
    }

    pub fn structure(&self) -> Option<&LcsStructure> {
        self.structure.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.immersion.source().dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.immersion.target().dim()
    }

    /// Ambient metric along `M`.
    pub fn g(&self) -> &ArrayD<Expr> {
        &self.g
    }

    pub fn jacobian(&self) -> &ArrayD<Expr> {
        self.immersion.jacobian()
    }

    /// The induced metric `h = f^*g`.
    pub fn induced_metric(&self) -> &TensorField {
        &self.h
    }

    pub fn induced_inverse(&self) -> &ArrayD<Expr> {
        &self.h_inv
    }

    /// Tangent projector `P^a_b`.
    pub fn tangent_projector(&self) -> &ArrayD<Expr> {
        &self.tangent
    }

    /// Normal projector `N^a_b = δ^a_b − P^a_b`.
    pub fn normal_projector(&self) -> &ArrayD<Expr> {
        &self.normal
    }

    pub fn induced(&self, which: Which) -> Result<&Induced, SubmanifoldError> {
        match which {
            Which::LeviCivita => Ok(&self.lc),
            Which::QuarterSymmetric => self.qs.as_ref().ok_or(SubmanifoldError::NoStructure),
        }
    }

    /// Second fundamental form `σ` (or `σ̄`).
    pub fn sigma(&self, which: Which) -> Result<&ArrayD<Expr>, SubmanifoldError> {
        Ok(&self.induced(which)?.sigma)
    }

    pub fn induced_structure(&self) -> Result<&InducedStructure, SubmanifoldError> {
        self.induced.as_ref().ok_or(SubmanifoldError::NoStructure)
    }

    /// `H = (1/m) h^{ij} σ_ij`, the trace over any orthonormal tangent frame
    /// with its signs.
    pub fn mean_curvature(&self, which: Which) -> Result<ArrayD<Expr>, SubmanifoldError> {
        let sigma = self.sigma(which)?;
        let (n, m) = (self.ambient_dim(), self.dim());
        let inv_m = Expr::ratio(1, m as i64);
        Ok(ArrayD::from_shape_fn(IxDyn(&[n]), |ix| {
            let tr = Expr::sum(
                (0..m).flat_map(|i| (0..m).map(move |j| (i, j)))
                    .map(|(i, j)| Expr::mul(&self.h_inv[[i, j]], &sigma[[ix[0], i, j]])),
            );
            Expr::mul(&inv_m, &tr)
        }))
    }

    /// An orthonormal normal frame at `x` (source coordinates), as the
    /// columns of an `n × (n − m)` matrix.
    ///
    /// The ambient coordinate basis is projected onto the normal space and
    /// Gram–Schmidt orthonormalized in order, dropping dependent vectors;
    /// each vector's first nonzero component is made positive. Null or
    /// timelike normal directions are rejected.
    pub fn normal_frame_at(&self, x: &[f64]) -> Result<DMatrix<f64>, SubmanifoldError> {
        let built = self.frame_batch.get_or_init(|| {
            let mut b = BatchBuilder::new();
            let sg = b.add(&self.g);
            let sn = b.add(&self.normal);
            let sj = b.add(self.jacobian());
            b.build(self.source().coords()).map(|batch| (batch, sg, sn, sj))
        });
        let (batch, sg, sn, _) = built.as_ref().map_err(|e| SubmanifoldError::Eval(e.clone()))?;
        let v = batch.eval(x)?;
        let (n, m) = (self.ambient_dim(), self.dim());
        let g = v.view(*sg);
        let proj = v.view(*sn);
        let g = DMatrix::from_fn(n, n, |a, b| g[[a, b]]);
        let inner = |u: &DVector<f64>, w: &DVector<f64>| (u.transpose() * &g * w)[(0, 0)];
        let scale = g.amax().max(1.0);
        let mut frame: Vec<DVector<f64>> = Vec::new();
        for c in 0..n {
            let mut u = DVector::from_fn(n, |a, _| proj[[a, c]]);
            for e in &frame {
                let k = inner(e, &u);
                u -= e * k;
            }
            let norm2 = inner(&u, &u);
            if u.amax() <= 1e-9 {
                continue;
            }
            if norm2 <= 1e-10 * scale {
                return Err(SubmanifoldError::NonSpacelikeNormal { norm: norm2, point: x.to_vec() });
            }
            u /= norm2.sqrt();
            if let Some(first) = u.iter().find(|c| c.abs() > 1e-12) {
                if *first < 0.0 {
                    u = -u;
                }
            }
            frame.push(u);
            if frame.len() == n - m {
                break;
            }
        }
        if frame.len() != n - m {
            return Err(ManifoldError::FrameSize { needed: n - m, have: frame.len() }.into());
        }
        Ok(DMatrix::from_columns(&frame))
    }
}
