//! Suite orchestration and report rendering.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use super::{CliError, Definition, Sampling, SamplingBlock};
use crate::connection::{metric_compatibility, quarter_symmetric, Connection};
use crate::expr::parse;
use crate::lcs::{build_structure, qsmc_identity_suite, validate_structure, LcsError, LcsStructure};
use crate::report::{Check, CheckReport, CheckResult, Verdict};
use crate::submanifold::{
    immerse, invariance_check, invariant_identity_suite, parallelism_residuals, theorem5_suite, SubmanifoldError,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Groups of suites in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SuiteGroup {
    /// The structure identities.
    Structure,
    /// Metric compatibility of the connections, then the quarter-symmetric
    /// curvature identities.
    Identities,
    /// Invariance, invariant identities, parallelism and theorem-5 suites.
    Submanifold,
}

impl SuiteGroup {
    pub const ALL: [SuiteGroup; 3] = [SuiteGroup::Structure, SuiteGroup::Identities, SuiteGroup::Submanifold];
}

/// `delta` added to `Γ^k_{ij}` of the Levi-Civita connection before the
/// compatibility checks, written `K,I,J:EXPR`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaPerturbation {
    pub k: usize,
    pub i: usize,
    pub j: usize,
    pub delta: String,
}

impl FromStr for GammaPerturbation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (idx, delta) = s.split_once(':').ok_or("expected K,I,J:EXPR")?;
        let idx: Vec<usize> = idx
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|e| format!("index `{t}`: {e}")))
            .collect::<Result<_, _>>()?;
        let [k, i, j] = idx[..] else {
            return Err("expected three indices K,I,J".into());
        };
        parse(delta).map_err(|e| format!("delta: {e}"))?;
        Ok(GammaPerturbation { k, i, j, delta: delta.to_string() })
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub groups: Vec<SuiteGroup>,
    pub sampling: SamplingBlock,
    pub perturb_gamma: Option<GammaPerturbation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub input_digest: String,
    pub sampling: Sampling,
    pub suites: Vec<CheckReport>,
    pub verdict: Verdict,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// 0 when every check passed, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        if self.passed() { 0 } else { 1 }
    }

    pub fn suite(&self, name: &str) -> Option<&CheckReport> {
        self.suites.iter().find(|s| s.suite == name)
    }

    pub fn check(&self, suite: &str, name: &str) -> Option<&CheckResult> {
        self.suite(suite)?.get(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "text" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            other => Err(CliError::UnknownFormat(other.to_string())),
        }
    }
}

/// Text: one line per check, then the overall verdict. JSON: the report
/// with fields in declaration order.
pub fn render(r: &RunReport, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Text => {
            let mut s = String::new();
            for suite in &r.suites {
                for c in &suite.checks {
                    let _ = write!(s, "{}  {}  {:.1e}  {}  {}", c.tag, c.name, c.max_residual, c.points, c.verdict);
                    if let Some(note) = &c.note {
                        let _ = write!(s, "  # {note}");
                    }
                    s.push('\n');
                }
            }
            let _ = writeln!(s, "overall  {}", r.verdict);
            s
        }
    }
}

/// A failed structure build becomes a failing check rather than an input
/// error: the document was readable, it just is not an LCS structure.
fn structure_failure(e: LcsError, points: usize) -> Result<CheckReport, CliError> {
    let (tag, name, residual) = match &e {
        LcsError::NotUnitTimelike { value, .. } => ("EQ(3.1)", "unit_timelike", (value + 1.0).abs()),
        LcsError::NotConcircular { residual, .. } => ("EQ(3.4)", "concircular", *residual),
        LcsError::AlphaVanishes { .. } => ("EQ(3.4)", "alpha_nonvanishing", 0.0),
        _ => return Err(e.into()),
    };
    let mut report = CheckReport::new("structure");
    report.push(CheckResult {
        name: name.into(),
        tag: tag.into(),
        max_residual: residual,
        scale: 0.0,
        points,
        skipped: 0,
        verdict: Verdict::Fail,
        note: Some(e.to_string()),
    });
    Ok(report)
}

/// Metric compatibility of the Levi-Civita connection (optionally
/// perturbed) and of the quarter-symmetric connection built from it.
fn connection_suite(
    def: &Definition,
    l: &LcsStructure,
    perturb: Option<&GammaPerturbation>,
    points: &[Vec<f64>],
    s: &Sampling,
) -> Result<CheckReport, CliError> {
    let n = def.chart.dim();
    let mut lc: Connection = l.levi_civita().clone();
    let mut note = None;
    if let Some(p) = perturb {
        if p.k >= n || p.i >= n || p.j >= n {
            return Err(CliError::Perturbation(format!("index ({}, {}, {}) out of range for dimension {n}", p.k, p.i, p.j)));
        }
        let delta = def
            .chart
            .parse(&p.delta)
            .map_err(|e| CliError::Perturbation(format!("delta: {e}")))?;
        lc = lc.perturbed(p.k, p.i, p.j, &delta);
        note = Some(format!("Γ^{}_{}{} perturbed by {}", p.k, p.i, p.j, p.delta));
    }
    let qs = quarter_symmetric(&lc, l)?;
    let mut report = CheckReport::new("connection");
    for (tag, name, c) in
        [("DEF(levi-civita)", "connection_levi_civita_compatible", &lc), ("EQ(4.6)", "connection_qsmc_compatible", &qs)]
    {
        let mut check = Check::new(tag, name);
        check.residual(metric_compatibility(c, &def.metric, points)?, 1.0);
        for _ in points {
            check.point_done();
        }
        if let Some(n) = &note {
            check.note(n.clone());
        }
        report.push(check.finish(&s.tol));
    }
    Ok(report)
}

fn timed<T>(suite: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    info!("{suite}: {:.2?}", start.elapsed());
    out
}

/// Runs the selected suite groups in order. Input problems are errors;
/// identity failures are verdicts in the report.
pub fn run(def: &Definition, opts: &RunOptions) -> Result<RunReport, CliError> {
    let s = def.sampling(opts.sampling)?;
    let points = def.chart.sample_points(s.points, s.seed);
    let audit = def.metric.audit(&points)?;
    info!("metric audit: {} points, {} skipped", audit.points, audit.skipped.len());
    let mut groups = opts.groups.clone();
    groups.sort();
    groups.dedup();
    let mut suites = Vec::new();

    let l = match timed("build", || build_structure(&def.metric, &def.xi, &points, &s.tol)) {
        Ok(l) => l,
        Err(e) => {
            suites.push(structure_failure(e, points.len())?);
            return Ok(finish(def, s, suites));
        }
    };
    for g in groups {
        match g {
            SuiteGroup::Structure => {
                suites.push(timed("structure", || validate_structure(&l, &points, &s.tol))?);
            }
            SuiteGroup::Identities => {
                suites.push(timed("connection", || {
                    connection_suite(def, &l, opts.perturb_gamma.as_ref(), &points, &s)
                })?);
                suites.push(timed("qsmc", || qsmc_identity_suite(&l, &points, &s.tol))?);
            }
            SuiteGroup::Submanifold => submanifold_suites(def, &l, &s, &mut suites)?,
        }
    }
    Ok(finish(def, s, suites))
}

fn submanifold_suites(
    def: &Definition,
    l: &LcsStructure,
    s: &Sampling,
    suites: &mut Vec<CheckReport>,
) -> Result<(), CliError> {
    let f = def.immersion.clone().ok_or(CliError::NoImmersion)?;
    let points = f.source().sample_points(s.points, s.seed);
    let ctx = timed("immerse", || immerse(f, l, &points))?;
    let (invariant, report) = timed("invariance", || invariance_check(&ctx, &points, &s.tol))?;
    suites.push(report);
    if invariant {
        suites.push(timed("invariant", || invariant_identity_suite(&ctx, &points, &s.tol))?);
    }
    suites.push(timed("parallelism", || parallelism_residuals(&ctx, &points, &s.tol))?);
    if invariant {
        match timed("theorem5", || theorem5_suite(&ctx, &points, &s.tol)) {
            Ok(r) => suites.push(r),
            Err(SubmanifoldError::AlphaIsOne) => {
                let mut c = Check::new("THM(5.1)", "thm5_hypothesis");
                c.point_done();
                c.set_vacuous(true);
                c.note("α = 1 at every sample point; the theorems assume α ≠ 1");
                let mut r = CheckReport::new("theorem5");
                r.push(c.finish(&s.tol));
                suites.push(r);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn finish(def: &Definition, sampling: Sampling, suites: Vec<CheckReport>) -> RunReport {
    let verdict = if suites.iter().all(CheckReport::passed) { Verdict::Pass } else { Verdict::Fail };
    RunReport {
        tool_version: TOOL_VERSION.to_string(),
        input_digest: def.digest.clone(),
        sampling,
        suites,
        verdict,
    }
}
