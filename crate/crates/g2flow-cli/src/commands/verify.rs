//! The `verify` subcommand: self-contained checks of the numerical kernels,
//! printed as a pass/fail table. The process exits 0 only when every check
//! of every requested suite passes, and 3 otherwise.
//!
//! Each suite exercises an independent cross-check: closed forms against
//! finite differences, series against the cleared equation, trajectories
//! against comparison envelopes, and conserved quantities against their
//! constants. A kernel error inside a suite counts as a failed check, not a
//! process error.

use g2flow::analysis::{lyapunov, lyapunov_derivative, q_profile, q_profile_with};
use g2flow::geometry::{
    grad_norm_sq_radial_field, laplacian_radial_field_coeffs, laplacian_scalar, BackgroundCase,
};
use g2flow::integrator::{comparison_envelope, integrate, solve_soliton, LogState};
use g2flow::oracle::{
    fd_laplacian_flat7, fd_path_derivative, fd_vector_laplacian_flat7, radial_component,
};
use g2flow::series::{case_params, frobenius_coeffs, pick_r_switch, sine_series, SolitonOdeParams};

use crate::cli::{SuiteKind, VerifyArgs};
use crate::commands::Failure;

/// Outcome of one verification check.
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

const ALL_SUITES: [SuiteKind; 6] = [
    SuiteKind::Geometry,
    SuiteKind::FdOracle,
    SuiteKind::Series,
    SuiteKind::Envelope,
    SuiteKind::QConstancy,
    SuiteKind::LyapunovFd,
];

pub fn run(args: &VerifyArgs) -> Result<i32, Failure> {
    let suites = args.suite.clone().unwrap_or_else(|| ALL_SUITES.to_vec());
    let mut total = 0usize;
    let mut passed = 0usize;
    for kind in suites {
        for check in run_suite(kind) {
            total += 1;
            if check.pass {
                passed += 1;
            }
            println!(
                "{:<52} {}  {}",
                check.name,
                if check.pass { "pass" } else { "FAIL" },
                check.detail
            );
        }
    }
    println!("verify: {passed}/{total} checks passed");
    Ok(if passed == total { 0 } else { 3 })
}

/// Run one suite and collect its checks.
pub fn run_suite(kind: SuiteKind) -> Vec<Check> {
    match kind {
        SuiteKind::Geometry => suite_geometry(),
        SuiteKind::FdOracle => suite_fd_oracle(),
        SuiteKind::Series => suite_series(),
        SuiteKind::Envelope => suite_envelope(),
        SuiteKind::QConstancy => suite_q_constancy(),
        SuiteKind::LyapunovFd => suite_lyapunov_fd(),
    }
}

fn check_from(name: &str, result: Result<(bool, String), g2flow::Error>) -> Check {
    match result {
        Ok((pass, detail)) => Check {
            name: name.into(),
            pass,
            detail,
        },
        Err(e) => Check {
            name: name.into(),
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

fn all_backgrounds() -> [BackgroundCase; 5] {
    [
        BackgroundCase::FlatR7 { c: 0.0 },
        BackgroundCase::CylinderCY { b: 1.0 },
        BackgroundCase::ConeNK { c: -1.0 },
        BackgroundCase::BryantSalamonA { lambda: 1.0 },
        BackgroundCase::BryantSalamonB { lambda: 1.0 },
    ]
}

type ScalarTriple = fn(f64) -> (f64, f64, f64);

fn test_functions() -> [ScalarTriple; 3] {
    [
        |r| (r.sin(), r.cos(), -r.sin()),
        |r| {
            let e = (-r).exp();
            (
                r * r * e,
                (2.0 * r - r * r) * e,
                (2.0 - 4.0 * r + r * r) * e,
            )
        },
        |r| {
            let w = 1.0 + r * r;
            (
                1.0 / w,
                -2.0 * r / (w * w),
                (6.0 * r * r - 2.0) / (w * w * w),
            )
        },
    ]
}

/// Product-rule identity for radial vector fields: the direct gradient norm
/// against the combination of the scalar Laplacian of the squared norm and
/// the field Laplacian.
fn suite_geometry() -> Vec<Check> {
    all_backgrounds()
        .iter()
        .map(|case| {
            let name = format!("geometry/identity-{}", case.label());
            check_from(
                &name,
                (|| {
                    let p = case.profile();
                    let mut worst: f64 = 0.0;
                    let mut checks = 0usize;
                    for f in test_functions() {
                        for r in [0.5, 1.0, 1.5, 2.5, 4.0, 8.0] {
                            let (s, ds, d2s) = f(r);
                            let (k, dk, d2k) = (p.k(r), p.dk(r), p.d2k(r));
                            let w1 = 2.0 * s * ds * k * k + 2.0 * s * s * k * dk;
                            let w2 = 2.0 * (ds * ds + s * d2s) * k * k
                                + 8.0 * s * ds * k * dk
                                + 2.0 * s * s * (dk * dk + k * d2k);
                            let lap_norm = laplacian_scalar(&p, w1, w2, r)?;
                            let (c2, c1, c0) = laplacian_radial_field_coeffs(&p, r)?;
                            let lap_field = c2 * d2s + c1 * ds + c0 * s;
                            let closed = 0.5 * lap_norm - s * k * k * lap_field;
                            let direct = grad_norm_sq_radial_field(&p, s, ds, r)?;
                            let rel = (direct - closed).abs()
                                / direct.abs().max(closed.abs()).max(1e-300);
                            worst = worst.max(rel);
                            checks += 1;
                        }
                    }
                    Ok((
                        worst < 1e-8,
                        format!("{checks} checks, worst rel {worst:.3e}"),
                    ))
                })(),
            )
        })
        .collect()
}

/// Convergence of the flat-space finite-difference Laplacians to the closed
/// forms at second order under step halving.
fn suite_fd_oracle() -> Vec<Check> {
    let dir = {
        let raw = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        raw.map(|v| v / n)
    };
    let steps = [1e-2, 5e-3, 2.5e-3];
    let p = BackgroundCase::FlatR7 { c: 0.0 }.profile();

    let scalar = check_from(
        "fd-oracle/scalar-laplacian",
        (|| {
            let mut worst = f64::INFINITY;
            for r in [1.0, 2.0, 5.0] {
                let point = dir.map(|v| v * r);
                let exact = laplacian_scalar(&p, r.cos(), -r.sin(), r)?;
                let errs: Vec<f64> = steps
                    .iter()
                    .map(|&h| Ok((fd_laplacian_flat7(|x| x.sin(), &point, h)? - exact).abs()))
                    .collect::<Result<_, g2flow::Error>>()?;
                for w in errs.windows(2) {
                    worst = worst.min((w[0] / w[1]).log2());
                }
            }
            Ok((worst >= 1.9, format!("worst halving order {worst:.3}")))
        })(),
    );

    let vector = check_from(
        "fd-oracle/vector-laplacian",
        (|| {
            let mut worst = f64::INFINITY;
            for r in [1.0, 2.0, 5.0] {
                let point = dir.map(|v| v * r);
                let (c2, c1, c0) = laplacian_radial_field_coeffs(&p, r)?;
                let exact = c2 * (-r.sin()) + c1 * r.cos() + c0 * r.sin();
                let errs: Vec<f64> = steps
                    .iter()
                    .map(|&h| {
                        let v = fd_vector_laplacian_flat7(|x| x.sin(), &point, h)?;
                        Ok((radial_component(&point, &v) - exact).abs())
                    })
                    .collect::<Result<_, g2flow::Error>>()?;
                for w in errs.windows(2) {
                    worst = worst.min((w[0] / w[1]).log2());
                }
            }
            Ok((worst >= 1.9, format!("worst halving order {worst:.3}")))
        })(),
    );

    vec![scalar, vector]
}

fn poly_mul(a: &[f64], b: &[f64], cap: usize) -> Vec<f64> {
    let mut out = vec![0.0; cap + 1];
    for (i, &ai) in a.iter().enumerate().take(cap + 1) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(cap + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Largest coefficient, relative to scale, of the series pushed through the
/// equation cleared of denominators.
fn cleared_residual(params: &SolitonOdeParams, u: &[f64], cap: usize) -> f64 {
    let (b, c, d, e, f) = (params.b, params.c, params.d, params.e, params.f);
    let ru: Vec<f64> = u.iter().enumerate().map(|(k, &a)| k as f64 * a).collect();
    let r2u: Vec<f64> = u
        .iter()
        .enumerate()
        .map(|(k, &a)| (k * k.saturating_sub(1)) as f64 * a)
        .collect();
    let a2 = [1.0, 0.0, 2.0 * b, 0.0, b * b];
    let ap = [d, 0.0, b * d - c, 0.0, -b * c];
    let q = [d, 0.0, e, 0.0, f];
    let t1 = poly_mul(&a2, &r2u, cap);
    let t2 = poly_mul(&ap, &ru, cap);
    let t3 = poly_mul(&q, &sine_series(u, cap), cap);
    let mut scale: f64 = 1.0;
    let mut worst: f64 = 0.0;
    for k in 0..=cap {
        scale = scale.max(t1[k].abs()).max(t2[k].abs()).max(t3[k].abs());
        worst = worst.max((t1[k] + t2[k] - t3[k]).abs());
    }
    worst / scale
}

/// Origin-series checks: odd parity, the cleared equation, and the flat
/// third coefficient against its closed form.
fn suite_series() -> Vec<Check> {
    let cases = [
        BackgroundCase::FlatR7 { c: -1.0 },
        BackgroundCase::FlatR7 { c: 0.0 },
        BackgroundCase::FlatR7 { c: 1.0 },
        BackgroundCase::BryantSalamonA { lambda: 1.0 },
        BackgroundCase::BryantSalamonB { lambda: 1.0 },
    ];

    let evens = check_from(
        "series/even-coefficients-zero",
        (|| {
            let mut nonzero = 0usize;
            for case in &cases {
                let params = case_params(case)?;
                for a1 in [0.1, 1.0] {
                    let odd = frobenius_coeffs(&params, a1, 21)?;
                    nonzero += (0..=21).step_by(2).filter(|&k| odd.coeff(k) != 0.0).count();
                }
            }
            Ok((nonzero == 0, format!("{nonzero} nonzero even coefficients")))
        })(),
    );

    let residual = check_from(
        "series/cleared-equation-residual",
        (|| {
            let mut worst: f64 = 0.0;
            for case in &cases {
                let params = case_params(case)?;
                for a1 in [0.1, 1.0] {
                    let odd = frobenius_coeffs(&params, a1, 21)?;
                    worst = worst.max(cleared_residual(&params, &odd.full_coeffs(), 21));
                }
            }
            Ok((
                worst <= 1e-12,
                format!("worst residual {worst:.3e} of scale"),
            ))
        })(),
    );

    let a3 = check_from(
        "series/flat-third-coefficient",
        (|| {
            let mut worst: f64 = 0.0;
            for c in [-1.0, 0.0, 1.0] {
                let params = case_params(&BackgroundCase::FlatR7 { c })?;
                for a1 in [0.1, 1.0] {
                    let odd = frobenius_coeffs(&params, a1, 21)?;
                    let expected = (c * a1 - a1 * a1 * a1) / 18.0;
                    worst = worst.max((odd.coeff(3) - expected).abs());
                }
            }
            Ok((worst <= 1e-14, format!("worst gap {worst:.3e}")))
        })(),
    );

    vec![evens, residual, a3]
}

/// Fixed coefficient draws for the envelope check, spanning warped and
/// unwarped equations and both slope signs.
const ENVELOPE_DRAWS: [(f64, f64, f64, f64, f64, f64); 8] = [
    (0.0, -1.0, 6.0, 0.0, 0.0, 1.0),
    (1.0, -2.0, 6.0, 2.0, 1.5, 0.7),
    (0.5, -3.0, 2.0, 2.0, 3.0, -1.2),
    (2.0, 0.3, 8.0, 1.0, 0.2, 0.4),
    (1.0, -2.5, 3.0, 2.7, 2.0, -0.3),
    (1.5, 0.0, 0.5, 0.0, 1.0, 1.4),
    (0.25, -0.5, 4.0, 3.0, 0.0, -0.8),
    (0.0, 0.25, 7.0, 2.5, 2.5, 0.15),
];

/// Containment of integrated trajectories inside the linear comparison
/// envelopes, within integrator accuracy.
fn suite_envelope() -> Vec<Check> {
    vec![check_from(
        "envelope/trajectory-containment",
        (|| {
            let tol = 1e-10;
            let margin = 10.0 * tol;
            let mut worst = f64::NEG_INFINITY;
            let mut samples = 0usize;
            for (b, c, d, e, f, a1) in ENVELOPE_DRAWS {
                let params = SolitonOdeParams::new(b, c, d, e, f)?;
                let odd = frobenius_coeffs(&params, a1, 21)?;
                let rs = pick_r_switch(&odd)?;
                let e0 = odd.eval(rs)?;
                let start = LogState {
                    x: rs.ln(),
                    u: e0.u,
                    z: rs * e0.du,
                };
                let traj = integrate(&params, start, 10.0_f64.ln(), tol)?;
                let (x0, x1) = (traj.x_start(), traj.x_end());
                let xs: Vec<f64> = (0..50).map(|i| x0 + (x1 - x0) * i as f64 / 49.0).collect();
                let env = comparison_envelope(&params, x0, start.z, &xs)?;
                for (&x, &(lo, hi)) in xs.iter().zip(env.iter()) {
                    let z = traj.sample(x)?.z;
                    worst = worst.max((lo - z).max(z - hi));
                    samples += 1;
                }
            }
            Ok((
                worst <= margin,
                format!("{samples} samples, worst signed overshoot {worst:.3e}"),
            ))
        })(),
    )]
}

/// Constancy of the first integral along steady flat solitons, plus a
/// perturbed negative control that must break it.
fn suite_q_constancy() -> Vec<Check> {
    let constancy = check_from(
        "q-constancy/flat-steady-solitons",
        (|| {
            let mut worst: f64 = 0.0;
            for c in [-1.0, 0.0, 1.0] {
                let case = BackgroundCase::FlatR7 { c };
                let r_max = if c > 0.0 { 100.0 } else { 25.0 };
                let traj = solve_soliton(&case, 1.0, r_max, 1e-10)?;
                let prof = q_profile(&case, &traj, 0.5, 20.0)?;
                let dev = prof.max_abs_dev(c).ok_or_else(|| {
                    g2flow::Error::SingularEvaluation("no kept nodes in the profile".into())
                })?;
                worst = worst.max(dev);
            }
            Ok((worst <= 1e-6, format!("worst |Q - c| {worst:.3e}")))
        })(),
    );

    let control = check_from(
        "q-constancy/perturbed-negative-control",
        (|| {
            let case = BackgroundCase::FlatR7 { c: 0.0 };
            let traj = solve_soliton(&case, 1.0, 25.0, 1e-10)?;
            let sampler = |x: f64| match traj.sample(x) {
                Ok(s) => (1.01 * s.u, s.z),
                Err(_) => (f64::NAN, f64::NAN),
            };
            let x_lo = 0.5_f64.ln().max(traj.x_start());
            let x_hi = 20.0_f64.ln().min(traj.x_end());
            let prof = q_profile_with(&case, &sampler, x_lo, x_hi)?;
            let spread = prof.spread().ok_or_else(|| {
                g2flow::Error::SingularEvaluation("no kept nodes in the control profile".into())
            })?;
            Ok((spread > 1e-2, format!("control spread {spread:.3e}")))
        })(),
    );

    vec![constancy, control]
}

/// Analytic Lyapunov derivative against differencing of the sampled
/// Lyapunov values along a Bryant-Salamon trajectory.
fn suite_lyapunov_fd() -> Vec<Check> {
    vec![check_from(
        "lyapunov-fd/path-differencing",
        (|| {
            let case = BackgroundCase::BryantSalamonA { lambda: 1.0 };
            let params = case_params(&case)?;
            let traj = solve_soliton(&case, 1.0, 100.0, 1e-10)?;
            let n = 4001;
            let (x0, x1) = (traj.x_start(), traj.x_end());
            let mut xs = Vec::with_capacity(n);
            let mut ls = Vec::with_capacity(n);
            let mut analytic = Vec::with_capacity(n);
            for i in 0..n {
                let x = x0 + (x1 - x0) * i as f64 / (n - 1) as f64;
                let s = traj.sample(x)?;
                xs.push(x);
                ls.push(lyapunov(&params, &s));
                analytic.push(lyapunov_derivative(&params, &s));
            }
            let fd = fd_path_derivative(&xs, &ls)?;
            let scale = analytic.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let worst = fd
                .iter()
                .zip(analytic.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            Ok((
                worst <= 2e-4 * (1.0 + scale),
                format!("worst gap {worst:.3e} against scale {scale:.3e}"),
            ))
        })(),
    )]
}
