//! Named residual checks and their verdicts.

use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::expr::{Batch, BatchValues, EvalError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { atol: 1e-9, rtol: 1e-9 }
    }
}

impl Tolerance {
    pub fn allows(&self, residual: f64, scale: f64) -> bool {
        residual <= self.atol + self.rtol * scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Holds only because both sides vanish identically.
    Vacuous,
    /// A reported quantity with no asserted value.
    Measured,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Vacuous => "VACUOUS",
            Verdict::Measured => "MEASURED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub tag: String,
    /// Serialized as `null` when not finite.
    #[serde(with = "finite_or_null")]
    pub max_residual: f64,
    pub scale: f64,
    pub points: usize,
    pub skipped: usize,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub suite: String,
    pub checks: Vec<CheckResult>,
}

impl CheckReport {
    pub fn new(suite: &str) -> CheckReport {
        CheckReport { suite: suite.to_string(), checks: Vec::new() }
    }

    pub fn push(&mut self, c: CheckResult) {
        self.checks.push(c);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Accumulates residuals of one identity over points and slot fillings.
#[derive(Debug, Clone)]
pub struct Check {
    name: String,
    tag: String,
    max_residual: f64,
    scale: f64,
    points: usize,
    skipped: usize,
    vacuous: bool,
    measured: bool,
    forced_fail: bool,
    note: Option<String>,
}

impl Check {
    pub fn new(tag: &str, name: &str) -> Check {
        Check {
            name: name.to_string(),
            tag: tag.to_string(),
            max_residual: 0.0,
            scale: 0.0,
            points: 0,
            skipped: 0,
            vacuous: false,
            measured: false,
            forced_fail: false,
            note: None,
        }
    }

    /// Records `|lhs − rhs|` and both magnitudes.
    pub fn compare(&mut self, lhs: f64, rhs: f64) {
        self.residual(lhs - rhs, lhs.abs().max(rhs.abs()));
    }

    pub fn compare_all<'a>(
        &mut self,
        lhs: impl IntoIterator<Item = &'a f64>,
        rhs: impl IntoIterator<Item = &'a f64>,
    ) {
        for (a, b) in lhs.into_iter().zip(rhs) {
            self.compare(*a, *b);
        }
    }

    /// Records a residual that should vanish, with the magnitude of the
    /// terms it was formed from.
    pub fn residual(&mut self, r: f64, scale: f64) {
        let r = r.abs();
        self.max_residual = if r.is_nan() { f64::INFINITY } else { self.max_residual.max(r) };
        self.scale = self.scale.max(scale);
    }

    pub fn point_done(&mut self) {
        self.points += 1;
    }

    pub fn skip(&mut self) {
        self.skipped += 1;
    }

    pub fn set_vacuous(&mut self, v: bool) {
        self.vacuous = v;
    }

    /// Marks the check as a measurement: it never fails on its residual.
    pub fn set_measured(&mut self) {
        self.measured = true;
    }

    pub fn fail(&mut self, note: impl Into<String>) {
        self.forced_fail = true;
        self.note = Some(note.into());
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.note = Some(note.into());
    }

    pub fn finish(self, tol: &Tolerance) -> CheckResult {
        let total = self.points + self.skipped;
        let enough = self.points > 0 && self.skipped * 10 <= total;
        let verdict = if self.measured && !self.forced_fail && enough {
            Verdict::Measured
        } else if self.forced_fail || !enough || !tol.allows(self.max_residual, self.scale) {
            Verdict::Fail
        } else if self.vacuous {
            Verdict::Vacuous
        } else {
            Verdict::Pass
        };
        CheckResult {
            name: self.name,
            tag: self.tag,
            max_residual: self.max_residual,
            scale: self.scale,
            points: self.points,
            skipped: self.skipped,
            verdict,
            note: self.note,
        }
    }
}

/// An ordered collection of checks sharing the same sample points.
#[derive(Debug, Clone, Default)]
pub struct CheckSet {
    checks: Vec<Check>,
    points: usize,
    skipped: usize,
}

impl CheckSet {
    pub fn new() -> CheckSet {
        CheckSet::default()
    }

    /// The check with this name, created on first use.
    pub fn check(&mut self, tag: &str, name: &str) -> &mut Check {
        if let Some(i) = self.checks.iter().position(|c| c.name == name) {
            return &mut self.checks[i];
        }
        self.checks.push(Check::new(tag, name));
        self.checks.last_mut().expect("just pushed")
    }

    /// Point counts are kept for the whole set, so checks created after
    /// a skipped point are still charged for it.
    pub fn point_done(&mut self) {
        self.points += 1;
    }

    pub fn skip(&mut self) {
        self.skipped += 1;
    }

    /// Evaluates `batch` at each point and hands the values to `f`.
    /// Points outside the domain of some field are skipped.
    pub fn sweep(
        &mut self,
        batch: &Batch,
        points: &[Vec<f64>],
        mut f: impl FnMut(&mut CheckSet, &BatchValues<'_>, &[f64]),
    ) -> Result<(), EvalError> {
        for p in points {
            match batch.eval(p) {
                Ok(v) => {
                    f(self, &v, p);
                    self.point_done();
                }
                Err(e) if e.is_domain() => {
                    warn!("skipping {p:?}: {e}");
                    self.skip();
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    pub fn finish(self, suite: &str, tol: &Tolerance) -> CheckReport {
        let (points, skipped) = (self.points, self.skipped);
        let checks = self
            .checks
            .into_iter()
            .map(|mut c| {
                c.points = points;
                c.skipped = skipped;
                c.finish(tol)
            })
            .collect();
        CheckReport { suite: suite.to_string(), checks }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_respects_relative_scale() {
        let tol = Tolerance::default();
        let mut c = Check::new("T", "big");
        c.compare(1e6, 1e6 + 1e-4);
        c.point_done();
        assert_eq!(c.finish(&tol).verdict, Verdict::Pass);
        let mut c = Check::new("T", "small");
        c.compare(1.0, 1.0 + 1e-6);
        c.point_done();
        assert_eq!(c.finish(&tol).verdict, Verdict::Fail);
    }

    #[test]
    fn too_many_skips_fail() {
        let tol = Tolerance::default();
        let mut c = Check::new("T", "skips");
        for _ in 0..9 {
            c.point_done();
        }
        c.skip();
        assert_eq!(c.clone().finish(&tol).verdict, Verdict::Pass);
        c.skip();
        assert_eq!(c.finish(&tol).verdict, Verdict::Fail);
    }

    #[test]
    fn nan_never_passes() {
        let mut c = Check::new("T", "nan");
        c.compare(f64::NAN, 0.0);
        c.point_done();
        assert_eq!(c.finish(&Tolerance::default()).verdict, Verdict::Fail);
    }

    #[test]
    fn empty_check_fails() {
        assert_eq!(Check::new("T", "none").finish(&Tolerance::default()).verdict, Verdict::Fail);
    }
}
