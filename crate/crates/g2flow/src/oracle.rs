//! Independent brute-force verifiers: 7-dimensional Cartesian finite
//! difference operators for the flat background, and derivative estimates
//! along sampled paths.
//!
//! These deliberately know nothing about the closed forms they check. The
//! scalar and vector Laplacians are assembled from second differences in the
//! seven coordinate directions with the radial profile evaluated through
//! r = |x|, so agreement with the warped-metric formulas is evidence, not
//! tautology. Double precision limits useful steps: second differences lose
//! digits below step sizes of about 1e-4, so convergence studies should halve
//! from 1e-2 rather than push smaller.

use crate::error::{Error, Result};

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-3;

fn norm7(p: &[f64; 7]) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_point(point: &[f64; 7], step: f64) -> Result<()> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "step must be positive, got {step}"
        )));
    }
    let r = norm7(point);
    if !(r > 10.0 * step) {
        return Err(Error::Precondition(format!(
            "need |point| > 10 step to keep the stencil away from the origin, got |point| = \
             {r}, step = {step}"
        )));
    }
    Ok(())
}

/// Seven-direction central-difference Laplacian of the radial scalar
/// s(|x|) at the point.
pub fn fd_laplacian_flat7<F>(s: F, point: &[f64; 7], step: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    check_point(point, step)?;
    let center = s(norm7(point));
    let mut total = 0.0;
    for i in 0..7 {
        let mut plus = *point;
        plus[i] += step;
        let mut minus = *point;
        minus[i] -= step;
        total += (s(norm7(&plus)) - 2.0 * center + s(norm7(&minus))) / (step * step);
    }
    Ok(total)
}

/// Componentwise central-difference Laplacian of the radial vector field
/// X_i(x) = a(|x|) x_i / |x| at the point.
pub fn fd_vector_laplacian_flat7<F>(a: F, point: &[f64; 7], step: f64) -> Result<[f64; 7]>
where
    F: Fn(f64) -> f64,
{
    check_point(point, step)?;
    let field = |p: &[f64; 7], i: usize| -> f64 {
        let r = norm7(p);
        a(r) * p[i] / r
    };
    let mut out = [0.0; 7];
    for i in 0..7 {
        let center = field(point, i);
        let mut total = 0.0;
        for j in 0..7 {
            let mut plus = *point;
            plus[j] += step;
            let mut minus = *point;
            minus[j] -= step;
            total += (field(&plus, i) - 2.0 * center + field(&minus, i)) / (step * step);
        }
        out[i] = total;
    }
    Ok(out)
}

/// Component of v along the unit radial direction at the point.
pub fn radial_component(point: &[f64; 7], v: &[f64; 7]) -> f64 {
    let r = norm7(point);
    point.iter().zip(v.iter()).map(|(p, w)| p * w).sum::<f64>() / r
}

/// Norm of the part of v orthogonal to the radial direction at the point.
pub fn tangential_norm(point: &[f64; 7], v: &[f64; 7]) -> f64 {
    let r = norm7(point);
    let rad = radial_component(point, v);
    let mut sq = 0.0;
    for (p, w) in point.iter().zip(v.iter()) {
        let t = w - rad * p / r;
        sq += t * t;
    }
    sq.sqrt()
}

/// Derivative estimates along a sampled path by three-point differences:
/// quadratic-exact centered stencils in the interior and one-sided stencils
/// at the ends, valid on nonuniform strictly monotone samples.
pub fn fd_path_derivative(xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "mismatched sample lengths {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::Precondition(format!(
            "need at least 3 samples, got {n}"
        )));
    }
    let increasing = xs[1] > xs[0];
    for w in xs.windows(2) {
        if (increasing && w[1] <= w[0]) || (!increasing && w[1] >= w[0]) {
            return Err(Error::Precondition(
                "sample parameter must be strictly monotone".into(),
            ));
        }
    }
    let mut out = Vec::with_capacity(n);
    {
        let (h1, h2) = (xs[1] - xs[0], xs[2] - xs[1]);
        out.push(
            -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * ys[0] + (h1 + h2) / (h1 * h2) * ys[1]
                - h1 / (h2 * (h1 + h2)) * ys[2],
        );
    }
    for i in 1..n - 1 {
        let (h1, h2) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
        out.push(
            -h2 / (h1 * (h1 + h2)) * ys[i - 1]
                + (h2 - h1) / (h1 * h2) * ys[i]
                + h1 / (h2 * (h1 + h2)) * ys[i + 1],
        );
    }
    {
        let (h1, h2) = (xs[n - 2] - xs[n - 3], xs[n - 1] - xs[n - 2]);
        out.push(
            h2 / (h1 * (h1 + h2)) * ys[n - 3] - (h1 + h2) / (h1 * h2) * ys[n - 2]
                + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * ys[n - 1],
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{laplacian_scalar, BackgroundCase};

    fn sample_point(r: f64) -> [f64; 7] {
        let dir = [1.0, 2.0, 0.5, -1.0, 0.3, -0.7, 1.1];
        let n = norm7(&dir);
        let mut p = dir;
        for v in &mut p {
            *v *= r / n;
        }
        p
    }

    #[test]
    fn laplacian_of_r_squared_is_fourteen() {
        let p = sample_point(2.0);
        let got = fd_laplacian_flat7(|r| r * r, &p, 1e-3).unwrap();
        assert!((got - 14.0).abs() < 1e-7, "got {got}");
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let p = sample_point(1.5);
        let got = fd_laplacian_flat7(|_| 3.7, &p, 1e-3).unwrap();
        assert!(got.abs() < 1e-9, "got {got}");
    }

    #[test]
    fn laplacian_matches_closed_form_at_second_order() {
        let case = BackgroundCase::FlatR7 { c: 0.0 };
        let profile = case.profile();
        let r = 2.0_f64;
        let exact = laplacian_scalar(&profile, r.cos(), -r.sin(), r).unwrap();
        let p = sample_point(r);
        let mut errs = Vec::new();
        for h in [1e-2, 5e-3] {
            let fd = fd_laplacian_flat7(|r| r.sin(), &p, h).unwrap();
            errs.push((fd - exact).abs());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.9, "order {order}, errors {errs:?}");
    }

    #[test]
    fn linear_radial_field_is_harmonic() {
        let p = sample_point(1.2);
        let got = fd_vector_laplacian_flat7(|r| r, &p, 1e-3).unwrap();
        for v in got {
            assert!(v.abs() < 1e-8, "component {v}");
        }
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let p = sample_point(1.0);
        let got = fd_vector_laplacian_flat7(|_| 0.0, &p, 1e-3).unwrap();
        assert_eq!(got, [0.0; 7]);
    }

    #[test]
    fn cubic_radial_field_matches_closed_form_and_is_radial() {
        for r in [1.0, 2.0] {
            let p = sample_point(r);
            let got = fd_vector_laplacian_flat7(|r| r * r * r, &p, 1e-3).unwrap();
            let radial = radial_component(&p, &got);
            let expected = 6.0 * r + 18.0 * r - 6.0 * r;
            assert!(
                (radial - expected).abs() / expected < 1e-4,
                "r={r}: radial {radial} vs {expected}"
            );
            let tang = tangential_norm(&p, &got);
            assert!(tang < 1e-5 * (1.0 + radial.abs()), "tangential {tang}");
        }
    }

    #[test]
    fn path_derivative_exact_for_linear_and_quadratic() {
        let xs = [0.0, 0.3, 0.7, 1.2, 1.4, 2.0];
        let linear: Vec<f64> = xs.iter().map(|&x| 2.5 * x - 1.0).collect();
        for d in fd_path_derivative(&xs, &linear).unwrap() {
            assert!((d - 2.5).abs() < 1e-13, "got {d}");
        }
        let quad: Vec<f64> = xs.iter().map(|&x| x * x).collect();
        let ds = fd_path_derivative(&xs, &quad).unwrap();
        for (&x, d) in xs.iter().zip(ds) {
            assert!((d - 2.0 * x).abs() < 1e-12, "at {x}: got {d}");
        }
    }

    #[test]
    fn path_derivative_handles_decreasing_parameter() {
        let xs = [2.0, 1.5, 0.9, 0.4];
        let quad: Vec<f64> = xs.iter().map(|&x| x * x).collect();
        let ds = fd_path_derivative(&xs, &quad).unwrap();
        for (&x, d) in xs.iter().zip(ds) {
            assert!((d - 2.0 * x).abs() < 1e-12, "at {x}: got {d}");
        }
    }

    #[test]
    fn path_derivative_rejects_bad_samples() {
        assert!(fd_path_derivative(&[0.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(fd_path_derivative(&[0.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
        assert!(fd_path_derivative(&[0.0, 1.0, 0.5], &[0.0, 1.0, 2.0]).is_err());
        assert!(fd_path_derivative(&[0.0, 1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn stencils_too_close_to_the_origin_are_rejected() {
        let p = sample_point(0.005);
        assert!(fd_laplacian_flat7(|r| r, &p, 1e-3).is_err());
        assert!(fd_vector_laplacian_flat7(|r| r, &p, 1e-3).is_err());
    }
}
