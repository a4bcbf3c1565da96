//! Charts, tensor fields in coordinate components, metrics and frames.

mod chart;
mod frame;
mod metric;
mod tensor;

use thiserror::Error;

use crate::expr::EvalError;

pub use chart::{sample_box, Chart, DEFAULT_BOUNDS};
pub use frame::{frame_components, transform_axis, FrameField};
pub use metric::{inverse_metric, InverseMetric, Metric, MetricAudit, MetricEval, Signature};
pub(crate) use metric::invert_matrix;
pub use tensor::{contract, lie_bracket, raise_lower, IndexMove, TensorField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifoldError {
    #[error("chart has no coordinates")]
    EmptyChart,
    #[error("{coords} coordinates but {bounds} sampling intervals")]
    BoundsArity { coords: usize, bounds: usize },
    #[error("coordinate `{0}` declared twice")]
    DuplicateCoordinate(String),
    #[error("sampling interval [{lo}, {hi}] for `{coord}` is empty")]
    EmptyInterval { coord: String, lo: f64, hi: f64 },
    #[error("operands live on different charts")]
    ChartMismatch,
    #[error("component array has shape {found:?}, expected {expected:?}")]
    ShapeMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("valence {left:?} does not match {right:?}")]
    ValenceMismatch { left: (usize, usize), right: (usize, usize) },
    #[error("index (upper {upper}, lower {lower}) out of range for valence {valence:?}")]
    IndexOutOfRange { valence: (usize, usize), upper: usize, lower: usize },
    #[error("no symbolic inverse metric in dimension {0}")]
    NoSymbolicInverse(usize),
    #[error("metric is degenerate at {point:?}")]
    DegenerateMetric { point: Vec<f64> },
    #[error("metric is not symmetric in ({i}, {j}) at {point:?}")]
    AsymmetricMetric { i: usize, j: usize, point: Vec<f64> },
    #[error("signature {found:?} at {point:?}, expected {expected:?}")]
    SignatureMismatch { point: Vec<f64>, expected: Signature, found: Signature },
    #[error("declared signature {0:?} does not fit the dimension")]
    BadSignature(Signature),
    #[error("{skipped} of {total} sample points skipped")]
    TooManySkipped { skipped: usize, total: usize },
    #[error("frame vectors are dependent at {point:?}")]
    FrameDependent { point: Vec<f64> },
    #[error("frame is not orthonormal (residual {residual:.3e})")]
    NotOrthonormal { residual: f64 },
    #[error("frame needs {needed} vectors, has {have}")]
    FrameSize { needed: usize, have: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}
