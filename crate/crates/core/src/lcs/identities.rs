use ndarray::ArrayViewD;

use super::{LcsError, LcsStructure};
use crate::connection::{
    covariant_derivative, curvature, curvature_operator_residual, quarter_symmetric, torsion,
};
use crate::expr::{BatchBuilder, Expr};
use crate::manifold::TensorField;
use crate::report::{CheckReport, CheckSet, Tolerance};

fn delta(i: usize, j: usize) -> f64 {
    if i == j { 1.0 } else { 0.0 }
}

fn max_abs(a: &ArrayViewD<'_, f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// One named check per structure identity, every free slot filled with
/// coordinate basis fields.
pub fn validate_structure(
    l: &LcsStructure,
    points: &[Vec<f64>],
    tol: &Tolerance,
) -> Result<CheckReport, LcsError> {
    let n = l.dim();
    let nf = n as f64;
    let g = l.metric();
    let lc = l.levi_civita();
    let curv = curvature(lc, g)?;
    let nabla_eta = covariant_derivative(lc, l.eta())?;
    let nabla_phi = covariant_derivative(lc, l.phi())?;
    let coords = g.chart().coords();
    let d_alpha = TensorField::covector(g.chart(), coords.iter().map(|c| l.alpha().diff(c)).collect())?;
    let d_rho = TensorField::covector(g.chart(), coords.iter().map(|c| l.rho().diff(c)).collect())?;

    let mut b = BatchBuilder::new();
    let s_g = b.add(g.field().comps());
    let s_xi = b.add(l.xi().comps());
    let s_eta = b.add(l.eta().comps());
    let s_phi = b.add(l.phi().comps());
    let s_dxi = b.add(l.nabla_xi().comps());
    let s_deta = b.add(nabla_eta.comps());
    let s_dphi = b.add(nabla_phi.comps());
    let s_dalpha = b.add(d_alpha.comps());
    let s_drho = b.add(d_rho.comps());
    let s_r = b.add(curv.riemann.comps());
    let s_s = b.add(curv.ricci.comps());
    let s_alpha = b.add_scalar(l.alpha());
    let s_rho = b.add_scalar(l.rho());
    let s_beta = b.add_scalar(l.beta());
    let s_a = b.add_scalar(l.trace_phi());
    let batch = b.build(coords)?;

    let mut set = CheckSet::new();
    set.sweep(&batch, points, |set, v, _| {
        let (gv, xi, eta, phi) = (v.view(s_g), v.view(s_xi), v.view(s_eta), v.view(s_phi));
        let (dxi, deta, dphi) = (v.view(s_dxi), v.view(s_deta), v.view(s_dphi));
        let (da, drho, r, s) = (v.view(s_dalpha), v.view(s_drho), v.view(s_r), v.view(s_s));
        let (alpha, rho, beta, a) = (v.scalar(s_alpha), v.scalar(s_rho), v.scalar(s_beta), v.scalar(s_a));
        let c = alpha * alpha - rho;
        let gphi = |x: usize, y: usize| (0..n).map(|l| gv[[l, y]] * phi[[l, x]]).sum::<f64>();
        let r_xi = |k: usize, i: usize, j: usize| (0..n).map(|m| r[[k, m, i, j]] * xi[[m]]).sum::<f64>();

        let norm: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| gv[[i, j]] * xi[[i]] * xi[[j]]).sum();
        set.check("EQ(3.1)", "unit_timelike").compare(norm, -1.0);
        for x in 0..n {
            let gx: f64 = (0..n).map(|j| gv[[x, j]] * xi[[j]]).sum();
            set.check("EQ(3.2)", "eta_dual").compare(gx, eta[[x]]);
        }
        for x in 0..n {
            for y in 0..n {
                let want = alpha * (gv[[x, y]] + eta[[x]] * eta[[y]]);
                set.check("EQ(3.3)", "nabla_eta").compare(deta[[y, x]], want);
            }
        }
        for k in 0..n {
            for x in 0..n {
                let want = alpha * (delta(k, x) + eta[[x]] * xi[[k]]);
                set.check("EQ(3.4)", "concircular").compare(dxi[[k, x]], want);
            }
        }
        for x in 0..n {
            set.check("EQ(3.5)", "d_alpha").compare(da[[x]], rho * eta[[x]]);
        }
        for k in 0..n {
            for x in 0..n {
                set.check("EQ(3.6)", "phi_definition").compare(alpha * phi[[k, x]], dxi[[k, x]]);
                let want = delta(k, x) + eta[[x]] * xi[[k]];
                set.check("EQ(3.7)", "phi_formula").compare(phi[[k, x]], want);
            }
        }
        set.check("EQ(3.7)", "trace_phi").compare(a, nf - 1.0);
        for x in 0..n {
            for y in 0..n {
                set.check("EQ(3.8)", "phi_symmetric").compare(gphi(x, y), gphi(y, x));
            }
        }
        let eta_xi: f64 = (0..n).map(|i| eta[[i]] * xi[[i]]).sum();
        set.check("EQ(3.9)", "eta_xi").compare(eta_xi, -1.0);
        for k in 0..n {
            let phi_xi: f64 = (0..n).map(|i| phi[[k, i]] * xi[[i]]).sum();
            let sc = (0..n).map(|i| (phi[[k, i]] * xi[[i]]).abs()).fold(0.0, f64::max);
            set.check("EQ(3.9)", "phi_xi").residual(phi_xi, sc);
        }
        for x in 0..n {
            let eta_phi: f64 = (0..n).map(|k| eta[[k]] * phi[[k, x]]).sum();
            let sc = (0..n).map(|k| (eta[[k]] * phi[[k, x]]).abs()).fold(0.0, f64::max);
            set.check("EQ(3.9)", "eta_phi").residual(eta_phi, sc);
        }
        for x in 0..n {
            for y in 0..n {
                let lhs: f64 = (0..n).map(|l| gphi(x, l) * phi[[l, y]]).sum();
                let rhs = gv[[x, y]] + eta[[x]] * eta[[y]];
                set.check("EQ(3.9)", "phi_isometry").compare(lhs, rhs);
            }
        }
        for k in 0..n {
            for x in 0..n {
                let sq: f64 = (0..n).map(|m| phi[[k, m]] * phi[[m, x]]).sum();
                let want = delta(k, x) + eta[[x]] * xi[[k]];
                set.check("EQ(3.10)", "phi_squared").compare(sq, want);
            }
        }
        for x in 0..n {
            let lhs: f64 = (0..n).map(|k| s[[x, k]] * xi[[k]]).sum();
            set.check("EQ(3.11)", "ricci_xi").compare(lhs, (nf - 1.0) * c * eta[[x]]);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let want = c * (eta[[j]] * delta(k, i) - eta[[i]] * delta(k, j));
                    set.check("EQ(3.12)", "curvature_xi").compare(r_xi(k, i, j), want);
                }
            }
        }
        // R(ξ, Y) Z with Y = ∂_j, Z = ∂_z
        for k in 0..n {
            for j in 0..n {
                for z in 0..n {
                    let lhs: f64 = (0..n).map(|m| r[[k, z, m, j]] * xi[[m]]).sum();
                    let want = c * (gv[[j, z]] * xi[[k]] - eta[[z]] * delta(k, j));
                    set.check("EQ(3.13)", "curvature_xi_first").compare(lhs, want);
                }
            }
        }
        // (∇_X φ) Y = (∇φ)[k, y, x]
        for k in 0..n {
            for y in 0..n {
                for x in 0..n {
                    let want = alpha
                        * (gv[[x, y]] * xi[[k]] + 2.0 * eta[[x]] * eta[[y]] * xi[[k]] + eta[[y]] * delta(k, x));
                    set.check("EQ(3.14)", "nabla_phi").compare(dphi[[k, y, x]], want);
                }
            }
        }
        for x in 0..n {
            set.check("EQ(3.15)", "d_rho").compare(drho[[x]], beta * eta[[x]]);
        }
        // φR(X,Y)Z = R(X,Y)Z + (α²−ρ){g(Y,Z)η(X) − g(X,Z)η(Y)}ξ
        for k in 0..n {
            for z in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let phir: f64 = (0..n).map(|m| phi[[k, m]] * r[[m, z, i, j]]).sum();
                        let want = r[[k, z, i, j]] + c * (gv[[j, z]] * eta[[i]] - gv[[i, z]] * eta[[j]]) * xi[[k]];
                        set.check("EQ(3.16)", "curvature_phi").compare(phir, want);
                    }
                }
            }
        }
    })?;
    Ok(set.finish("structure", tol))
}

/// Curvature identities of the quarter-symmetric connection.
pub fn qsmc_identity_suite(
    l: &LcsStructure,
    points: &[Vec<f64>],
    tol: &Tolerance,
) -> Result<CheckReport, LcsError> {
    let n = l.dim();
    let nf = n as f64;
    let g = l.metric();
    let chart = g.chart();
    let lc = l.levi_civita();
    let qs = quarter_symmetric(lc, l)?;
    let curv = curvature(lc, g)?;
    let bar = curvature(&qs, g)?;
    let tor = torsion(&qs);
    let nabla_g = covariant_derivative(&qs, g.field())?;
    let qs_coeffs = TensorField::from_array(chart, 1, 2, qs.coeffs().clone())?;
    let contracted = crate::manifold::contract(&bar.riemann, 0, 1)?;

    let mut b = BatchBuilder::new();
    let s_g = b.add(g.field().comps());
    let s_xi = b.add(l.xi().comps());
    let s_eta = b.add(l.eta().comps());
    let s_phi = b.add(l.phi().comps());
    let s_r = b.add(curv.riemann.comps());
    let s_s = b.add(curv.ricci.comps());
    let s_q = b.add(curv.ricci_operator.comps());
    let s_rb = b.add(bar.riemann.comps());
    let s_sb = b.add(bar.ricci.comps());
    let s_qb = b.add(bar.ricci_operator.comps());
    let s_sc = b.add(contracted.comps());
    let s_tor = b.add(tor.comps());
    let s_ng = b.add(nabla_g.comps());
    let s_gam = b.add(qs_coeffs.comps());
    let s_alpha = b.add_scalar(l.alpha());
    let s_rho = b.add_scalar(l.rho());
    let s_a = b.add_scalar(l.trace_phi());
    let s_r0 = b.add_scalar(&curv.scalar);
    let s_rb0 = b.add_scalar(&bar.scalar);
    let batch = b.build(chart.coords())?;

    let mut set = CheckSet::new();
    set.sweep(&batch, points, |set, v, _| {
        let (gv, xi, eta, phi) = (v.view(s_g), v.view(s_xi), v.view(s_eta), v.view(s_phi));
        let (r, s, q) = (v.view(s_r), v.view(s_s), v.view(s_q));
        let (rb, sb, qb, sc) = (v.view(s_rb), v.view(s_sb), v.view(s_qb), v.view(s_sc));
        let (tv, ng, gam) = (v.view(s_tor), v.view(s_ng), v.view(s_gam));
        let (alpha, rho, a) = (v.scalar(s_alpha), v.scalar(s_rho), v.scalar(s_a));
        let (r0, rb0) = (v.scalar(s_r0), v.scalar(s_rb0));
        let cb = alpha * alpha - alpha - rho;
        let gphi = |x: usize, y: usize| (0..n).map(|l| gv[[l, y]] * phi[[l, x]]).sum::<f64>();
        let r4 = |i: usize, j: usize, k: usize, u: usize| (0..n).map(|l| gv[[l, u]] * rb[[l, k, i, j]]).sum::<f64>();

        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let want = eta[[j]] * phi[[k, i]] - eta[[i]] * phi[[k, j]];
                    set.check("EQ(1.2)", "qsmc_torsion").compare(tv[[k, i, j]], want);
                }
            }
        }
        let term_scale = max_abs(&gv) * (1.0 + max_abs(&gam));
        for x in ng.iter() {
            set.check("EQ(4.6)", "qsmc_metric_compatible").residual(*x, term_scale);
        }
        for k in 0..n {
            for z in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let want = r[[k, z, i, j]]
                            + (2.0 * alpha - 1.0) * (gphi(i, z) * phi[[k, j]] - gphi(j, z) * phi[[k, i]])
                            + alpha * (eta[[j]] * delta(k, i) - eta[[i]] * delta(k, j)) * eta[[z]]
                            + alpha * (gv[[j, z]] * eta[[i]] - gv[[i, z]] * eta[[j]]) * xi[[k]];
                        set.check("EQ(4.7)", "qsmc_curvature").compare(rb[[k, z, i, j]], want);
                    }
                }
            }
        }
        for y in 0..n {
            for z in 0..n {
                let want = s[[y, z]] + (alpha - 1.0) * gv[[y, z]] + (nf * alpha - 1.0) * eta[[y]] * eta[[z]]
                    - (2.0 * alpha - 1.0) * a * gphi(y, z);
                set.check("EQ(4.8)", "qsmc_ricci").compare(sb[[y, z]], want);
                set.check("EQ(4.8)", "qsmc_ricci_contraction").compare(sc[[z, y]], sb[[y, z]]);
            }
        }
        let want = r0 - (2.0 * alpha - 1.0) * a * a - (nf - 1.0);
        set.check("EQ(4.9)", "qsmc_scalar").compare(rb0, want);
        for k in 0..n {
            for y in 0..n {
                let want = q[[k, y]] + (alpha - 1.0) * delta(k, y) + (nf * alpha - 1.0) * eta[[y]] * xi[[k]]
                    - (2.0 * alpha - 1.0) * a * phi[[k, y]];
                set.check("EQ(4.10)", "qsmc_ricci_operator").compare(qb[[k, y]], want);
            }
        }
        for x in 0..n {
            for y in 0..n {
                let lhs: f64 = (0..n).map(|k| gv[[k, y]] * qb[[k, x]]).sum();
                set.check("EQ(4.10)", "qsmc_ricci_operator_dual").compare(lhs, sb[[x, y]]);
            }
        }
        let rb_xi = |k: usize, i: usize, j: usize| (0..n).map(|m| rb[[k, m, i, j]] * xi[[m]]).sum::<f64>();
        let r_xi = |k: usize, i: usize, j: usize| (0..n).map(|m| r[[k, m, i, j]] * xi[[m]]).sum::<f64>();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let wedge = eta[[j]] * delta(k, i) - eta[[i]] * delta(k, j);
                    set.check("EQ(4.11)", "qsmc_curvature_xi").compare(rb_xi(k, i, j), cb * wedge);
                    set.check("EQ(4.11)", "qsmc_curvature_xi_shift")
                        .compare(rb_xi(k, i, j), r_xi(k, i, j) - alpha * wedge);
                }
            }
        }
        // R̄(X, ξ) Y with X = ∂_i, Y = ∂_y
        for k in 0..n {
            for i in 0..n {
                for y in 0..n {
                    let x_xi: f64 = (0..n).map(|m| rb[[k, y, i, m]] * xi[[m]]).sum();
                    let xi_x: f64 = (0..n).map(|m| rb[[k, y, m, i]] * xi[[m]]).sum();
                    let want = cb * (eta[[y]] * delta(k, i) - gv[[i, y]] * xi[[k]]);
                    set.check("EQ(4.12)", "qsmc_curvature_xi_middle").compare(x_xi, want);
                    set.check("EQ(4.12)", "qsmc_curvature_xi_swap").compare(x_xi, -xi_x);
                }
            }
        }
        for y in 0..n {
            let lhs: f64 = (0..n).map(|k| sb[[y, k]] * xi[[k]]).sum();
            set.check("EQ(4.13)", "qsmc_ricci_xi").compare(lhs, (nf - 1.0) * cb * eta[[y]]);
        }
        for k in 0..n {
            let lhs: f64 = (0..n).map(|j| qb[[k, j]] * xi[[j]]).sum();
            set.check("EQ(4.14)", "qsmc_ricci_operator_xi").compare(lhs, (nf - 1.0) * cb * xi[[k]]);
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let cyc = rb[[l, k, i, j]] + rb[[l, i, j, k]] + rb[[l, j, k, i]];
                        let mag = rb[[l, k, i, j]].abs().max(rb[[l, i, j, k]].abs()).max(rb[[l, j, k, i]].abs());
                        set.check("THM(3.1)", "qsmc_bianchi").residual(cyc, mag);
                        let u = l;
                        let base = r4(i, j, k, u);
                        set.check("THM(3.1)", "qsmc_antisymmetric_xy").compare(base, -r4(j, i, k, u));
                        set.check("THM(3.1)", "qsmc_antisymmetric_zu").compare(base, -r4(i, j, u, k));
                        set.check("THM(3.1)", "qsmc_pair_symmetric").compare(base, r4(k, u, i, j));
                    }
                }
            }
        }
    })?;

    // the coefficient formula against nested covariant derivatives
    let z = TensorField::from_fn(chart, 1, 0, |k| Expr::add(&chart.coord(k[0]), l.xi().get(k)));
    let (res, scale) = curvature_operator_residual(&qs, &bar.riemann, &z, points)?;
    let mut report = set.finish("qsmc", tol);
    let mut check = crate::report::Check::new("EQ(5.11)", "qsmc_curvature_operator");
    check.residual(res, scale);
    for _ in points {
        check.point_done();
    }
    report.push(check.finish(tol));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lcs::paper_example;
    use crate::report::Verdict;

    #[test]
    fn example_passes_every_structure_check() {
        let (g, l) = paper_example();
        let report = validate_structure(&l, &g.chart().sample_points(40, 42), &Tolerance::default()).unwrap();
        for c in &report.checks {
            assert_eq!(c.verdict, Verdict::Pass, "{c:?}");
            assert!(c.max_residual < 1e-8, "{c:?}");
        }
        assert_eq!(report.checks.len(), 20);
    }

    #[test]
    fn zeroed_phi_fails_the_phi_identities() {
        let (g, l) = paper_example();
        let broken = l.with_phi(TensorField::zeros(g.chart(), 1, 1));
        let report = validate_structure(&broken, &g.chart().sample_points(20, 42), &Tolerance::default()).unwrap();
        for name in ["phi_formula", "phi_isometry", "phi_definition"] {
            assert_eq!(report.get(name).unwrap().verdict, Verdict::Fail, "{name}");
        }
    }

    #[test]
    fn printed_sign_of_phi_curvature_identity_fails() {
        // R = φR + (α²−ρ){g(Y,Z)η(X) − g(X,Z)η(Y)}ξ as printed does not hold;
        // check one component directly: X = ∂_x, Y = ∂_z, Z = ∂_x.
        let (g, l) = paper_example();
        let curv = curvature(l.levi_civita(), &g).unwrap();
        let p = [0.1, 0.2, 0.3, 0.4, 0.5];
        let r = curv.riemann.eval_at(&p).unwrap();
        let phi = l.phi().eval_at(&p).unwrap();
        let gv = g.field().eval_at(&p).unwrap();
        let eta = l.eta().eval_at(&p).unwrap();
        let xi = l.xi().eval_at(&p).unwrap();
        let pt = g.chart().point(&p);
        let c = l.alpha().eval(&pt).unwrap().powi(2) - l.rho().eval(&pt).unwrap();
        let (i, j, z) = (0, 2, 0);
        let mut worst: f64 = 0.0;
        for k in 0..5 {
            let phir: f64 = (0..5).map(|m| phi[[k, m]] * r[[m, z, i, j]]).sum();
            let corr = c * (gv[[j, z]] * eta[[i]] - gv[[i, z]] * eta[[j]]) * xi[[k]];
            worst = worst.max((r[[k, z, i, j]] - phir - corr).abs());
        }
        assert!(worst > 1e-3, "{worst}");
    }

    #[test]
    fn example_passes_quarter_symmetric_suite() {
        let (g, l) = paper_example();
        let report = qsmc_identity_suite(&l, &g.chart().sample_points(30, 42), &Tolerance::default()).unwrap();
        for c in &report.checks {
            assert_eq!(c.verdict, Verdict::Pass, "{c:?}");
            assert!(c.max_residual < 1e-8, "{c:?}");
        }
    }

    #[test]
    fn lp_sasakian_coefficient() {
        // with α = 1 the (2α − 1) factor of the curvature relation is 1
        let alpha = Expr::one();
        let coeff = crate::expr::simplify(&(Expr::int(2) * alpha - Expr::one()));
        assert!(coeff.is_one());
    }
}
