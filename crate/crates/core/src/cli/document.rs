//! The JSON definition document and its validation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::expr::{BatchBuilder, Expr};
use crate::manifold::{Chart, Metric, Signature, TensorField, DEFAULT_BOUNDS};
use crate::report::Tolerance;
use crate::submanifold::Immersion;

pub const DEFAULT_POINTS: usize = 100;
pub const DEFAULT_SEED: u64 = 42;

/// Points used to decide whether two differently written metric entries
/// agree.
const SYMMETRY_PROBES: usize = 16;

/// The document as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefinitionDocument {
    pub coordinates: Vec<String>,
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    pub metric: Vec<Vec<String>>,
    pub xi: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub immersion: Option<ImmersionBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmersionBlock {
    pub coordinates: Vec<String>,
    pub map: Vec<String>,
    /// Defaults to the ambient interval for coordinates sharing an ambient
    /// name and to `[-1, 1]` otherwise.
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
}

/// Every field is optional; unset fields fall back to the defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
}

impl SamplingBlock {
    /// `self` where set, `other` elsewhere.
    pub fn or(self, other: SamplingBlock) -> SamplingBlock {
        SamplingBlock {
            points: self.points.or(other.points),
            seed: self.seed.or(other.seed),
            atol: self.atol.or(other.atol),
            rtol: self.rtol.or(other.rtol),
        }
    }

    pub fn resolve(self) -> Result<Sampling, CliError> {
        let tol = Tolerance::default();
        let s = Sampling {
            points: self.points.unwrap_or(DEFAULT_POINTS),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            tol: Tolerance { atol: self.atol.unwrap_or(tol.atol), rtol: self.rtol.unwrap_or(tol.rtol) },
        };
        if s.points == 0 {
            return Err(CliError::Sampling("points must be positive".into()));
        }
        for (name, v) in [("atol", s.tol.atol), ("rtol", s.tol.rtol)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Sampling(format!("{name} must be a finite non-negative number")));
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub points: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub tol: Tolerance,
}

/// A validated document: parsed fields on their charts.
#[derive(Debug, Clone)]
pub struct Definition {
    pub document: DefinitionDocument,
    pub chart: Arc<Chart>,
    pub metric: Metric,
    pub xi: TensorField,
    pub immersion: Option<Immersion>,
    /// SHA-256 of the document text, hex encoded.
    pub digest: String,
}

impl Definition {
    /// Document sampling settings under `overrides`.
    pub fn sampling(&self, overrides: SamplingBlock) -> Result<Sampling, CliError> {
        overrides.or(self.document.sampling.unwrap_or_default()).resolve()
    }
}

fn parse_at(chart: &Chart, path: String, text: &str) -> Result<Expr, CliError> {
    chart.parse(text).map_err(|source| CliError::Parse { path, source })
}

fn expect_len(field: String, expected: usize, found: usize) -> Result<(), CliError> {
    if expected == found {
        Ok(())
    } else {
        Err(CliError::Dimension { field, expected, found })
    }
}

fn bounds(field: &str, b: &[[f64; 2]]) -> Result<Vec<(f64, f64)>, CliError> {
    b.iter()
        .enumerate()
        .map(|(i, &[lo, hi])| {
            if lo.is_finite() && hi.is_finite() && lo <= hi {
                Ok((lo, hi))
            } else {
                Err(CliError::Box { path: format!("{field}[{i}]"), lo, hi })
            }
        })
        .collect()
}

/// Parses and validates a definition document.
pub fn load(text: &str) -> Result<Definition, CliError> {
    let document: DefinitionDocument = serde_json::from_str(text).map_err(|e| CliError::Json(e.to_string()))?;
    let n = document.coordinates.len();
    expect_len("box".into(), n, document.bounds.len())?;
    let chart = Chart::new(document.coordinates.clone(), bounds("box", &document.bounds)?)?;

    expect_len("metric".into(), n, document.metric.len())?;
    let mut g = Vec::with_capacity(n * n);
    for (i, row) in document.metric.iter().enumerate() {
        expect_len(format!("metric[{i}]"), n, row.len())?;
        for (j, text) in row.iter().enumerate() {
            g.push(parse_at(&chart, format!("metric[{i}][{j}]"), text)?);
        }
    }
    check_symmetric(&document, &chart, &g)?;
    let g = TensorField::from_fn(&chart, 0, 2, |ix| g[ix[0] * n + ix[1]].clone());
    let metric = Metric::new(g, Signature::lorentzian(n))?;

    expect_len("xi".into(), n, document.xi.len())?;
    let xi = document
        .xi
        .iter()
        .enumerate()
        .map(|(i, t)| parse_at(&chart, format!("xi[{i}]"), t))
        .collect::<Result<Vec<_>, _>>()?;
    let xi = TensorField::vector(&chart, xi)?;

    let immersion = document.immersion.as_ref().map(|b| load_immersion(b, &chart)).transpose()?;
    if let Some(s) = document.sampling {
        s.resolve()?;
    }
    let digest = hex::encode(Sha256::digest(text.as_bytes()));
    Ok(Definition { document, chart, metric, xi, immersion, digest })
}

fn load_immersion(b: &ImmersionBlock, target: &Arc<Chart>) -> Result<Immersion, CliError> {
    let m = b.coordinates.len();
    let source_bounds = match &b.bounds {
        Some(v) => {
            expect_len("immersion.box".into(), m, v.len())?;
            bounds("immersion.box", v)?
        }
        None => b
            .coordinates
            .iter()
            .map(|c| target.index_of(c).map_or(DEFAULT_BOUNDS, |i| target.bounds()[i]))
            .collect(),
    };
    let source = Chart::new(b.coordinates.clone(), source_bounds)?;
    expect_len("immersion.map".into(), target.dim(), b.map.len())?;
    let map = b
        .map
        .iter()
        .enumerate()
        .map(|(i, t)| parse_at(&source, format!("immersion.map[{i}]"), t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Immersion::new(&source, target, map)?)
}

/// Entries written differently must still evaluate equally; the probes
/// are drawn from the sampling box.
fn check_symmetric(doc: &DefinitionDocument, chart: &Chart, g: &[Expr]) -> Result<(), CliError> {
    let n = doc.coordinates.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| doc.metric[i][j].trim() != doc.metric[j][i].trim())
        .collect();
    if pairs.is_empty() {
        return Ok(());
    }
    let mut b = BatchBuilder::new();
    let slots: Vec<_> = pairs
        .iter()
        .map(|&(i, j)| (b.add_scalar(&g[i * n + j]), b.add_scalar(&g[j * n + i])))
        .collect();
    let batch = b.build(chart.coords())?;
    let tol = Tolerance::default();
    for p in chart.sample_points(SYMMETRY_PROBES, DEFAULT_SEED) {
        let v = match batch.eval(&p) {
            Ok(v) => v,
            Err(e) if e.is_domain() => continue,
            Err(e) => return Err(e.into()),
        };
        for (&(i, j), &(a, c)) in pairs.iter().zip(&slots) {
            let (x, y) = (v.scalar(a), v.scalar(c));
            if !tol.allows((x - y).abs(), x.abs().max(y.abs())) {
                return Err(CliError::Asymmetric { i, j });
            }
        }
    }
    Ok(())
}
