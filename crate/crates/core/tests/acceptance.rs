//! Acceptance criteria 1–9, one PASS/FAIL line each. Runs without the test
//! harness; exits nonzero when any criterion fails.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use lcs_verify::cli::{render, Format, RunReport, PAPER_EXAMPLE_JSON};
use lcs_verify::connection::{curvature, metric_compatibility, quarter_symmetric, torsion, Connection};
use lcs_verify::expr::{BatchBuilder, Expr};
use lcs_verify::lcs::{paper_example, qsmc_identity_suite, validate_structure, LcsStructure};
use lcs_verify::manifold::{Chart, Metric, Signature, TensorField};
use lcs_verify::report::{CheckReport, Tolerance, Verdict};
use lcs_verify::submanifold::{
    field_recurrence, immerse, invariance_check, invariant_identity_suite, theorem5_suite, Immersion, RecurrenceClass,
    SubmanifoldContext, Which,
};

const POINTS: usize = 100;
const SEED: u64 = 42;
/// Per-suite budget at 100 points.
const SUITE_BUDGET: Duration = Duration::from_secs(60);

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg.into()) }
}

fn timed<T>(f: impl FnOnce() -> T) -> Result<(T, Duration), String> {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    ensure(took <= SUITE_BUDGET, format!("took {took:.1?}, over the {SUITE_BUDGET:?} budget"))?;
    Ok((out, took))
}

fn all_within(r: &CheckReport, bound: f64) -> Result<(), String> {
    for c in &r.checks {
        ensure(c.passed(), format!("{} {} failed (residual {:.2e})", c.tag, c.name, c.max_residual))?;
        ensure(c.max_residual < bound, format!("{} {} residual {:.2e} ≥ {bound:.0e}", c.tag, c.name, c.max_residual))?;
    }
    Ok(())
}

/// Largest entry of `|a − b|` over the points, with `b` optional (zero).
fn max_diff(chart: &Arc<Chart>, a: &ndarray::ArrayD<Expr>, b: Option<&ndarray::ArrayD<Expr>>, points: &[Vec<f64>]) -> f64 {
    let mut bb = BatchBuilder::new();
    let sa = bb.add(a);
    let sb = b.map(|b| bb.add(b));
    let batch = bb.build(chart.coords()).expect("coordinates declared");
    let mut worst: f64 = 0.0;
    for p in points {
        let v = batch.eval(p).expect("evaluable");
        let va = v.view(sa);
        match sb {
            Some(sb) => {
                for (x, y) in va.iter().zip(v.view(sb).iter()) {
                    worst = worst.max((x - y).abs());
                }
            }
            None => worst = va.iter().fold(worst, |m, x| m.max(x.abs())),
        }
    }
    worst
}

struct Example {
    metric: Metric,
    l: LcsStructure,
    points: Vec<Vec<f64>>,
    tol: Tolerance,
}

fn example() -> Example {
    let (metric, l) = paper_example();
    let points = metric.chart().sample_points(POINTS, SEED);
    Example { metric, l, points, tol: Tolerance::default() }
}

fn example_submanifold(ex: &Example) -> (SubmanifoldContext, Vec<Vec<f64>>) {
    let src = Chart::new(["x", "y", "z"].map(String::from).to_vec(), vec![(-1.0, 1.0); 3]).unwrap();
    let map = ["x", "y", "z", "0", "0"].iter().map(|s| src.parse(s).unwrap()).collect();
    let f = Immersion::new(&src, ex.metric.chart(), map).unwrap();
    let pts = src.sample_points(POINTS, SEED);
    (immerse(f, &ex.l, &pts).unwrap(), pts)
}

fn structure_reproduction(ex: &Example) -> Outcome {
    let c = ex.metric.chart();
    let mut worst: f64 = 0.0;
    for p in &ex.points {
        let pt = c.point(p);
        let z = p[2];
        for (got, want) in [(ex.l.alpha(), (-2.0 * z).exp()), (ex.l.rho(), 2.0 * (-4.0 * z).exp())] {
            let v = got.eval(&pt).map_err(|e| e.to_string())?;
            worst = worst.max(((v - want) / want).abs());
        }
    }
    ensure(worst < 1e-9, format!("relative error {worst:.2e}"))?;
    Ok(format!("α = e^(-2z), ρ = 2e^(-4z): max relative error {worst:.1e} at {POINTS} points"))
}

fn lcs_identities(ex: &Example) -> Outcome {
    let (r, took) = timed(|| validate_structure(&ex.l, &ex.points, &ex.tol))?;
    let r = r.map_err(|e| e.to_string())?;
    all_within(&r, 1e-8)?;
    for tag in ["EQ(3.1)", "EQ(3.4)", "EQ(3.9)", "EQ(3.14)", "EQ(3.16)"] {
        ensure(r.checks.iter().any(|c| c.tag == tag), format!("{tag} missing"))?;
    }
    Ok(format!("{} checks, all residuals < 1e-8 ({took:.1?})", r.checks.len()))
}

fn qsmc_identities(ex: &Example) -> Outcome {
    let (r, took) = timed(|| qsmc_identity_suite(&ex.l, &ex.points, &ex.tol))?;
    let r = r.map_err(|e| e.to_string())?;
    all_within(&r, 1e-8)?;
    for name in ["qsmc_curvature_xi", "qsmc_scalar", "qsmc_bianchi", "qsmc_antisymmetric_xy", "qsmc_antisymmetric_zu", "qsmc_pair_symmetric"] {
        ensure(r.get(name).is_some_and(|c| c.verdict == Verdict::Pass), format!("{name} missing or not PASS"))?;
    }
    let c = ex.metric.chart();
    for p in &ex.points {
        let a = ex.l.trace_phi().eval(&c.point(p)).map_err(|e| e.to_string())?;
        ensure((a - 4.0).abs() < 1e-10, format!("trace φ = {a}"))?;
    }
    Ok(format!("{} checks, all residuals < 1e-8, a = tr φ = 4 ({took:.1?})", r.checks.len()))
}

fn metric_connection(ex: &Example) -> Outcome {
    let qs = quarter_symmetric(ex.l.levi_civita(), &ex.l).map_err(|e| e.to_string())?;
    let compat = metric_compatibility(&qs, &ex.metric, &ex.points).map_err(|e| e.to_string())?;
    ensure(compat < 1e-9, format!("∇̄g residual {compat:.2e}"))?;
    // T(∂_i, ∂_j)^k = η_j φ^k_i − η_i φ^k_j
    let (eta, phi) = (ex.l.eta(), ex.l.phi());
    let want = TensorField::from_fn(ex.metric.chart(), 1, 2, |ix| {
        let (k, i, j) = (ix[0], ix[1], ix[2]);
        Expr::sub(&Expr::mul(eta.get(&[j]), phi.get(&[k, i])), &Expr::mul(eta.get(&[i]), phi.get(&[k, j])))
    });
    let t = torsion(&qs);
    let err = max_diff(ex.metric.chart(), t.comps(), Some(want.comps()), &ex.points);
    let size = max_diff(ex.metric.chart(), t.comps(), None, &ex.points);
    ensure(err < 1e-12, format!("torsion differs by {err:.2e}"))?;
    ensure(size > 0.1, "torsion unexpectedly vanishes")?;
    Ok(format!("∇̄g residual {compat:.1e}; torsion matches η(Y)φX − η(X)φY to {err:.1e}"))
}

fn submanifold_reproduction(ex: &Example) -> Outcome {
    let ((ctx, pts), took) = timed(|| example_submanifold(ex))?;
    let c = ctx.source().clone();
    let (inv, _) = invariance_check(&ctx, &pts, &ex.tol).map_err(|e| e.to_string())?;
    ensure(inv, "invariance_check is false")?;
    let sigma = ctx.sigma(Which::LeviCivita).map_err(|e| e.to_string())?;
    let sigma_bar = ctx.sigma(Which::QuarterSymmetric).map_err(|e| e.to_string())?;
    let s = max_diff(&c, sigma, None, &pts);
    ensure(s < 1e-10, format!("|σ| = {s:.2e}"))?;
    let sb = max_diff(&c, sigma, Some(sigma_bar), &pts);
    ensure(sb < 1e-10, format!("|σ̄ − σ| = {sb:.2e}"))?;
    for which in [Which::LeviCivita, Which::QuarterSymmetric] {
        let h = ctx.mean_curvature(which).map_err(|e| e.to_string())?;
        let hv = max_diff(&c, &h, None, &pts);
        ensure(hv < 1e-10, format!("|H| = {hv:.2e} under {which:?}"))?;
    }
    let (r, took2) = timed(|| invariant_identity_suite(&ctx, &pts, &ex.tol))?;
    let r = r.map_err(|e| e.to_string())?;
    ensure(r.passed(), format!("invariant suite fails: {:?}", r.failures().map(|c| &c.name).collect::<Vec<_>>()))?;
    for name in ["sub_sigma_bar", "sub_mean_curvature_bar", "sub_minimal_agrees", "sub_umbilical_agrees"] {
        ensure(r.get(name).is_some_and(|c| c.passed()), format!("{name} missing or failing"))?;
    }
    Ok(format!("invariant, σ ≡ 0, H = 0 under both connections, σ̄ = σ, corollary predicates agree ({:.1?})", took + took2))
}

fn theorem5_core(ex: &Example) -> Outcome {
    let (ctx, pts) = example_submanifold(ex);
    let (r, took) = timed(|| theorem5_suite(&ctx, &pts, &ex.tol))?;
    let r = r.map_err(|e| e.to_string())?;
    for name in ["thm5_nabla_bar_xi", "thm5_reduction"] {
        let c = r.get(name).ok_or(format!("{name} missing"))?;
        ensure(c.passed() && c.max_residual < 1e-8, format!("{name}: {:?} {:.2e}", c.verdict, c.max_residual))?;
    }
    let eq = r.get("thm5_equivalence").ok_or("thm5_equivalence missing")?;
    ensure(eq.verdict == Verdict::Pass, format!("equivalence {:?}", eq.verdict))?;
    let note = eq.note.clone().unwrap_or_default();
    for s in ["recurrent", "two_recurrent", "generalized", "parallel_third_form", "totally_geodesic"] {
        ensure(note.contains(&format!("{s}=true")), format!("{s} not true: {note}"))?;
    }
    ensure(r.passed(), "theorem-5 suite has failures")?;
    Ok(format!("∇̄ξ = (α−1)φX and the reduction hold; all five statements true ({took:.1?})"))
}

fn chart(names: &[&str], bounds: Vec<(f64, f64)>) -> Arc<Chart> {
    Chart::new(names.iter().map(|s| s.to_string()).collect(), bounds).unwrap()
}

fn diagonal(c: &Arc<Chart>, diag: &[&str], sig: Signature) -> Metric {
    let g = TensorField::from_fn(c, 0, 2, |ix| if ix[0] == ix[1] { c.parse(diag[ix[0]]).unwrap() } else { Expr::zero() });
    Metric::new(g, sig).unwrap()
}

fn oracles() -> Outcome {
    // unit sphere: R(X, Y)Z = g(Y, Z)X − g(X, Z)Y, S = g, r = 2
    let c = chart(&["th", "ph"], vec![(0.3, 2.8), (-3.0, 3.0)]);
    let g = diagonal(&c, &["1", "sin(th)^2"], Signature::riemannian(2));
    let curv = curvature(&Connection::levi_civita(&g).unwrap(), &g).unwrap();
    let want = TensorField::from_fn(&c, 1, 3, |ix| {
        let (l, k, i, j) = (ix[0], ix[1], ix[2], ix[3]);
        let d = |a: usize, b: usize| if a == b { Expr::one() } else { Expr::zero() };
        Expr::sub(&Expr::mul(g.field().get(&[j, k]), &d(l, i)), &Expr::mul(g.field().get(&[i, k]), &d(l, j)))
    });
    let pts = c.sample_points(POINTS, SEED);
    let e1 = max_diff(&c, curv.riemann.comps(), Some(want.comps()), &pts);
    let e2 = max_diff(&c, curv.ricci.comps(), Some(g.field().comps()), &pts);
    let scalar = ndarray::arr0(curv.scalar.clone()).into_dyn();
    let two = ndarray::arr0(Expr::int(2)).into_dyn();
    let e3 = max_diff(&c, &scalar, Some(&two), &pts);
    ensure(e1.max(e2).max(e3) < 1e-9, format!("sphere: R {e1:.1e}, S {e2:.1e}, r {e3:.1e}"))?;

    // flat space in spherical coordinates
    let c = chart(&["r", "th", "ph"], vec![(0.5, 2.0), (0.3, 2.8), (-3.0, 3.0)]);
    let g = diagonal(&c, &["1", "r^2", "r^2*sin(th)^2"], Signature::riemannian(3));
    let curv = curvature(&Connection::levi_civita(&g).unwrap(), &g).unwrap();
    let pts = c.sample_points(POINTS, SEED);
    let flat = max_diff(&c, curv.riemann.comps(), None, &pts);
    ensure(flat < 1e-9, format!("flat: |R| = {flat:.1e}"))?;

    // T = e^x T₀ on a flat chart
    let c = chart(&["x", "y"], vec![(-1.0, 1.0); 2]);
    let g = diagonal(&c, &["1", "1"], Signature::riemannian(2));
    let lc = Connection::levi_civita(&g).unwrap();
    let ex = c.parse("exp(x)").unwrap();
    let t = TensorField::covector(&c, vec![Expr::mul(&ex, &Expr::int(3)), Expr::mul(&ex, &Expr::int(-2))]).unwrap();
    let pts = c.sample_points(POINTS, SEED);
    let v = field_recurrence(&t, &lc, &g, &pts).map_err(|e| e.to_string())?;
    ensure(v.class == RecurrenceClass::Recurrent, format!("classified {}", v.class))?;
    let mut worst: f64 = 0.0;
    for pi in v.pi.iter().flatten() {
        worst = worst.max((pi[0] - 1.0).abs()).max(pi[1].abs());
    }
    ensure(worst < 1e-8, format!("π differs from dx by {worst:.1e}"))?;
    Ok(format!("sphere {:.1e}, flat {flat:.1e}, π = dx to {worst:.1e}", e1.max(e2).max(e3)))
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lcs-verify"))
}

fn tmp(name: &str, doc: &serde_json::Value) -> PathBuf {
    let p = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&p, doc.to_string()).expect("writable temp dir");
    p
}

fn exit_code(cmd: &mut Command) -> Result<i32, String> {
    cmd.output().map_err(|e| e.to_string())?.status.code().ok_or_else(|| "killed by signal".into())
}

fn negative_controls(ex: &Example) -> Outcome {
    let base: serde_json::Value = serde_json::from_str(PAPER_EXAMPLE_JSON).unwrap();

    let mut doc = base.clone();
    doc["metric"][0][0] = "exp(2.1*z)".into();
    let perturbed = exit_code(binary().arg("validate").arg(tmp("perturbed_metric.json", &doc)))?;
    ensure(perturbed == 1, format!("perturbed metric exited {perturbed}"))?;

    let mut doc = base.clone();
    doc["immersion"] = serde_json::json!({"coordinates": ["x", "y"], "map": ["x", "y", "0", "0", "0"]});
    let plane = exit_code(binary().arg("submanifold").arg(tmp("plane.json", &doc)))?;
    ensure(plane == 1, format!("non-invariant plane exited {plane}"))?;

    let gamma = exit_code(binary().args(["identities", "--perturb-gamma", "0,0,1:0.01"]).arg(tmp("example.json", &base)))?;
    ensure(gamma == 1, format!("corrupted Γ exited {gamma}"))?;
    let broken = ex.l.levi_civita().perturbed(0, 0, 1, &Expr::ratio(1, 100));
    let compat = metric_compatibility(&broken, &ex.metric, &ex.points).map_err(|e| e.to_string())?;
    ensure(compat > 1e-3, format!("corrupted Γ compatibility residual only {compat:.1e}"))?;

    let clean = exit_code(binary().arg("check").arg(tmp("example.json", &base)).args(["--points", "10"]))?;
    ensure(clean == 0, format!("unmodified document exited {clean}"))?;
    Ok(format!("perturbed metric → {perturbed}, non-invariant plane → {plane}, corrupted Γ → {gamma}"))
}

fn determinism() -> Outcome {
    let run = || -> Result<(Vec<u8>, Duration), String> {
        let start = Instant::now();
        let out = binary().args(["paper-example", "--format", "json"]).output().map_err(|e| e.to_string())?;
        ensure(out.status.code() == Some(0), format!("paper-example exited {:?}", out.status.code()))?;
        Ok((out.stdout, start.elapsed()))
    };
    let (a, took) = run()?;
    let (b, _) = run()?;
    ensure(a == b, "reports differ between runs")?;
    let text = String::from_utf8(a).map_err(|e| e.to_string())?;
    let report: RunReport = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure(render(&report, Format::Json) == text, "json does not round-trip")?;
    ensure(report.passed(), "shipped example does not pass")?;
    Ok(format!("two full runs byte-identical ({} bytes, {took:.1?} each)", text.len()))
}

fn main() {
    let ex = example();
    let criteria: [(&str, &dyn Fn() -> Outcome); 9] = [
        ("structure reproduction", &|| structure_reproduction(&ex)),
        ("LCS identity suite", &|| lcs_identities(&ex)),
        ("quarter-symmetric suite", &|| qsmc_identities(&ex)),
        ("metric-connection property", &|| metric_connection(&ex)),
        ("submanifold reproduction", &|| submanifold_reproduction(&ex)),
        ("theorem-5 computational core", &|| theorem5_core(&ex)),
        ("oracle equivalence", &oracles),
        ("negative controls", &|| negative_controls(&ex)),
        ("determinism", &determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS  {}  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
