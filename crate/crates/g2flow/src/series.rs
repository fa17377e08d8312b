//! Odd power-series solutions of the radial soliton equation at its regular
//! singular point r = 0.
//!
//! The four non-cylinder backgrounds share one equation,
//!
//! ```text
//! r^2 u'' + (d - c r^2)/(1 + b r^2) r u' - (d + e r^2 + f r^4)/(1 + b r^2)^2 sin u = 0
//! ```
//!
//! with constants (b, c, d, e, f), d > 0 and b, e, f >= 0. Smooth solutions
//! through r = 0 are odd in r with one free parameter a1 = u'(0); this module
//! builds their truncated series by the coefficient recurrence and evaluates
//! them with tail estimates, handing clean initial data to the integrator.

use crate::error::{Error, Result};
use crate::geometry::BackgroundCase;
use serde::{Deserialize, Serialize};

/// The five constants (b, c, d, e, f) of the radial soliton equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonOdeParams {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl SolitonOdeParams {
    /// Validates the standing assumptions d > 0 and b, e, f >= 0
    /// (c is unrestricted).
    pub fn new(b: f64, c: f64, d: f64, e: f64, f: f64) -> Result<Self> {
        for (name, v) in [("b", b), ("c", c), ("d", d), ("e", e), ("f", f)] {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        if d <= 0.0 {
            return Err(Error::InvalidInput(format!("d must be positive, got {d}")));
        }
        if b < 0.0 || e < 0.0 || f < 0.0 {
            return Err(Error::InvalidInput(format!(
                "b, e, f must be nonnegative, got b = {b}, e = {e}, f = {f}"
            )));
        }
        Ok(Self { b, c, d, e, f })
    }

    /// First-order friction coefficient P(r) = (d - c r^2)/(1 + b r^2).
    pub fn p_coeff(&self, r: f64) -> f64 {
        let r2 = r * r;
        (self.d - self.c * r2) / (1.0 + self.b * r2)
    }

    /// Restoring coefficient Q(r) = (d + e r^2 + f r^4)/(1 + b r^2)^2,
    /// strictly positive for all r since d > 0.
    pub fn q_coeff(&self, r: f64) -> f64 {
        let r2 = r * r;
        let denom = 1.0 + self.b * r2;
        (self.d + self.e * r2 + self.f * r2 * r2) / (denom * denom)
    }
}

/// Constants of the radial soliton equation for each background in the
/// unified family:
///
/// - flat R^7 and the nearly Kaehler cone with soliton constant c:
///   (0, c, 6, 0, 0)
/// - Bryant-Salamon A with scale lambda:
///   (1/lambda, -7/(2 lambda), 2, 2/lambda, 3/(2 lambda^2))
/// - Bryant-Salamon B with scale lambda:
///   (1/lambda, -13/(3 lambda), 3, 4/lambda, 8/(3 lambda^2))
///
/// The Calabi-Yau cylinder is not in the family (its travelling-wave
/// equation has no sine term) and is rejected.
pub fn case_params(case: &BackgroundCase) -> Result<SolitonOdeParams> {
    case.validate()?;
    match *case {
        BackgroundCase::FlatR7 { c } | BackgroundCase::ConeNK { c } => {
            SolitonOdeParams::new(0.0, c, 6.0, 0.0, 0.0)
        }
        BackgroundCase::BryantSalamonA { lambda } => SolitonOdeParams::new(
            1.0 / lambda,
            -7.0 / (2.0 * lambda),
            2.0,
            2.0 / lambda,
            3.0 / (2.0 * lambda * lambda),
        ),
        BackgroundCase::BryantSalamonB { lambda } => SolitonOdeParams::new(
            1.0 / lambda,
            -13.0 / (3.0 * lambda),
            3.0,
            4.0 / lambda,
            8.0 / (3.0 * lambda * lambda),
        ),
        BackgroundCase::CylinderCY { .. } => Err(Error::UnsupportedCase(
            "the Calabi-Yau cylinder equation has no sine term and admits no odd series family"
                .into(),
        )),
    }
}

/// Truncated product of two dense polynomials (degree-indexed coefficient
/// slices), keeping degrees 0..=cap.
fn poly_mul_trunc(a: &[f64], b: &[f64], cap: usize) -> Vec<f64> {
    let mut out = vec![0.0; cap + 1];
    for (i, &ai) in a.iter().enumerate().take(cap + 1) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(cap + 1 - i) {
            if bj != 0.0 {
                out[i + j] += ai * bj;
            }
        }
    }
    out
}

/// Maclaurin composition sin(u) of a truncated polynomial u with zero
/// constant term, keeping degrees 0..=cap.
///
/// Computed by repeated truncated products,
/// sin u = u - u^3/3! + u^5/5! - ..., which terminates because u has no
/// constant term. For odd u the result is exactly odd: even coefficient
/// slots are sums of products that each carry a zero factor, so they stay
/// identically 0.0 in floating point.
pub fn sine_series(u: &[f64], cap: usize) -> Vec<f64> {
    debug_assert!(u.first().copied().unwrap_or(0.0) == 0.0);
    let mut out = vec![0.0; cap + 1];
    let mut power = vec![0.0; cap + 1];
    for (i, &ui) in u.iter().enumerate().take(cap + 1) {
        power[i] = ui;
    }
    let mut sign = 1.0;
    let mut factorial = 1.0;
    let mut order = 1usize;
    loop {
        for i in 0..=cap {
            out[i] += sign * power[i] / factorial;
        }
        if order + 2 > cap {
            break;
        }
        let u2 = poly_mul_trunc(u, u, cap);
        power = poly_mul_trunc(&power, &u2, cap);
        sign = -sign;
        factorial *= ((order + 1) * (order + 2)) as f64;
        order += 2;
        if power.iter().all(|&v| v == 0.0) {
            break;
        }
    }
    out
}

/// Truncated odd series solution u(r) = a1 r + a3 r^3 + ... + aN r^N of the
/// radial soliton equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddSeries {
    /// Free parameter a1 = u'(0).
    pub a1: f64,
    /// Coefficients a3, a5, ..., aN in order.
    pub odd_coeffs: Vec<f64>,
    /// Truncation degree N (odd).
    pub truncation_order: usize,
    /// Constants of the equation the series solves.
    pub params: SolitonOdeParams,
}

/// Default truncation degree.
pub const DEFAULT_TRUNCATION: usize = 21;

/// Relative size the last retained term may have against the first before
/// evaluation is refused.
pub const GUARD_THRESHOLD: f64 = 1e-6;

/// Candidate radii for the series-to-integrator handoff, tried largest
/// first.
pub const R_SWITCH_CANDIDATES: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

/// Values of the truncated series and its first two derivatives, plus the
/// magnitude of its last retained term as a crude tail proxy.
#[derive(Debug, Clone, Copy)]
pub struct SeriesEval {
    pub u: f64,
    pub du: f64,
    pub d2u: f64,
    pub tail: f64,
}

/// Builds the odd series by the coefficient recurrence.
///
/// Matching powers of r in the equation (after clearing the (1 + b r^2)^2
/// denominator) gives, for every k >= 2,
///
/// ```text
/// (k-1)(k+d) a_k + [2b(k-2)(k-3) + (bd - c)(k-2) - e] a_{k-2}
///   + [b^2 (k-4)(k-5) - b c (k-4) - f] a_{k-4}
///   = d T_k + e T_{k-2} + f T_{k-4}
/// ```
///
/// where sin u = sum_k (a_k + T_k) r^k and T_k depends only on lower
/// coefficients; indices below 1 contribute zero. The divisor (k-1)(k+d)
/// never vanishes for k >= 2 since d > 0. Even coefficients come out
/// identically zero (their right-hand sides vanish term by term); this is
/// asserted during construction, and the stored series keeps odd entries
/// only.
pub fn frobenius_coeffs(params: &SolitonOdeParams, a1: f64, n: usize) -> Result<OddSeries> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::InvalidInput(format!(
            "truncation order must be odd and at least 3, got {n}"
        )));
    }
    if !a1.is_finite() {
        return Err(Error::InvalidInput(format!("a1 must be finite, got {a1}")));
    }
    let (b, c, d, e, f) = (params.b, params.c, params.d, params.e, params.f);
    let mut coeffs = vec![0.0; n + 1];
    coeffs[1] = a1;
    let at = |coeffs: &[f64], idx: i64| -> f64 {
        if idx >= 1 {
            coeffs[idx as usize]
        } else {
            0.0
        }
    };
    for k in 2..=n {
        let sine = sine_series(&coeffs, k);
        let t = |idx: i64| -> f64 {
            if idx >= 1 {
                sine[idx as usize] - at(&coeffs, idx)
            } else {
                0.0
            }
        };
        let ki = k as i64;
        let kf = k as f64;
        let rhs = d * t(ki) + e * t(ki - 2) + f * t(ki - 4);
        let c2 = 2.0 * b * (kf - 2.0) * (kf - 3.0) + (b * d - c) * (kf - 2.0) - e;
        let c4 = b * b * (kf - 4.0) * (kf - 5.0) - b * c * (kf - 4.0) - f;
        let ak =
            (rhs - c2 * at(&coeffs, ki - 2) - c4 * at(&coeffs, ki - 4)) / ((kf - 1.0) * (kf + d));
        if k % 2 == 0 && ak != 0.0 {
            return Err(Error::InvalidInput(format!(
                "even coefficient a{k} = {ak:e} did not vanish; the recurrence inputs are \
                 inconsistent"
            )));
        }
        coeffs[k] = ak;
    }
    let odd_coeffs = (3..=n).step_by(2).map(|k| coeffs[k]).collect();
    Ok(OddSeries {
        a1,
        odd_coeffs,
        truncation_order: n,
        params: *params,
    })
}

impl OddSeries {
    /// Dense degree-indexed coefficient vector (even slots are zero).
    pub fn full_coeffs(&self) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.truncation_order + 1];
        coeffs[1] = self.a1;
        for (i, &a) in self.odd_coeffs.iter().enumerate() {
            coeffs[3 + 2 * i] = a;
        }
        coeffs
    }

    /// Coefficient of r^k (zero for even or out-of-range k).
    pub fn coeff(&self, k: usize) -> f64 {
        if k == 1 {
            self.a1
        } else if k % 2 == 1 && k >= 3 && k <= self.truncation_order {
            self.odd_coeffs[(k - 3) / 2]
        } else {
            0.0
        }
    }

    /// Horner evaluation of u, u', u'' at r, with the magnitude of the last
    /// retained term as an error proxy.
    ///
    /// Refuses radii where the last-term/first-term contribution ratio
    /// exceeds the convergence guard (1e-6); the caller must shrink r or
    /// raise the truncation order. The trivial series a1 = 0 evaluates to
    /// zero everywhere.
    pub fn eval(&self, r: f64) -> Result<SeriesEval> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::Domain(format!(
                "series evaluation needs finite r >= 0, got {r}"
            )));
        }
        let n = self.truncation_order;
        let last = self.coeff(n) * r.powi(n as i32);
        let first = self.a1 * r;
        if self.a1 == 0.0 && self.odd_coeffs.iter().all(|&a| a == 0.0) {
            return Ok(SeriesEval {
                u: 0.0,
                du: 0.0,
                d2u: 0.0,
                tail: 0.0,
            });
        }
        if r > 0.0 {
            let ratio = last.abs() / first.abs().max(f64::MIN_POSITIVE);
            if ratio > GUARD_THRESHOLD {
                return Err(Error::SeriesGuard {
                    r,
                    ratio,
                    threshold: GUARD_THRESHOLD,
                });
            }
        }
        // Horner in t = r^2 over the odd series: u = r * sum_j a_{2j+1} t^j.
        let r2 = r * r;
        let mut s0 = 0.0; // sum a_{2j+1} t^j
        let mut s1 = 0.0; // sum (2j+1) a_{2j+1} t^j
        let mut s2 = 0.0; // sum (2j+1) 2j a_{2j+1} t^j
        for k in (1..=n).rev().step_by(2) {
            let a = self.coeff(k);
            let kf = k as f64;
            s0 = s0 * r2 + a;
            s1 = s1 * r2 + kf * a;
            s2 = s2 * r2 + kf * (kf - 1.0) * a;
        }
        Ok(SeriesEval {
            u: r * s0,
            du: s1,
            d2u: if r > 0.0 { s2 / r } else { 0.0 },
            tail: last.abs(),
        })
    }
}

/// Largest handoff radius among the candidates at which the series passes
/// its convergence guard.
pub fn pick_r_switch(series: &OddSeries) -> Result<f64> {
    let mut last_err = None;
    for &r in &R_SWITCH_CANDIDATES {
        match series.eval(r) {
            Ok(_) => return Ok(r),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::SeriesGuard {
        r: R_SWITCH_CANDIDATES[R_SWITCH_CANDIDATES.len() - 1],
        ratio: f64::INFINITY,
        threshold: GUARD_THRESHOLD,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(c: f64) -> SolitonOdeParams {
        SolitonOdeParams::new(0.0, c, 6.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(SolitonOdeParams::new(0.0, -1.0, 6.0, 0.0, 0.0).is_ok());
        assert!(SolitonOdeParams::new(0.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(SolitonOdeParams::new(-0.1, 0.0, 6.0, 0.0, 0.0).is_err());
        assert!(SolitonOdeParams::new(0.0, 0.0, 6.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn case_params_known_tuples() {
        let p = case_params(&BackgroundCase::FlatR7 { c: -1.0 }).unwrap();
        assert_eq!((p.b, p.c, p.d, p.e, p.f), (0.0, -1.0, 6.0, 0.0, 0.0));
        let p = case_params(&BackgroundCase::BryantSalamonA { lambda: 2.0 }).unwrap();
        assert_eq!(p.b, 0.5);
        assert_eq!(p.c / p.b, -3.5);
        assert_eq!(p.d, 2.0);
        assert_eq!(p.e, 1.0);
        assert_eq!(p.f, 3.0 / 8.0);
        let p = case_params(&BackgroundCase::BryantSalamonB { lambda: 1.0 }).unwrap();
        assert!((p.c / p.b - (-13.0 / 3.0)).abs() < 1e-15);
        assert!(case_params(&BackgroundCase::CylinderCY { b: 1.0 }).is_err());
    }

    #[test]
    fn nearly_kaehler_cone_equals_flat() {
        let a = case_params(&BackgroundCase::FlatR7 { c: 0.3 }).unwrap();
        let b = case_params(&BackgroundCase::ConeNK { c: 0.3 }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sine_series_of_linear_term_is_maclaurin() {
        let a1 = 0.7;
        let mut u = vec![0.0; 8];
        u[1] = a1;
        let s = sine_series(&u, 7);
        assert!((s[1] - a1).abs() < 1e-16);
        assert!((s[3] + a1.powi(3) / 6.0).abs() < 1e-16);
        assert!((s[5] - a1.powi(5) / 120.0).abs() < 1e-16);
        assert!((s[7] + a1.powi(7) / 5040.0).abs() < 1e-16);
        assert_eq!(s[0], 0.0);
        assert_eq!(s[2], 0.0);
        assert_eq!(s[4], 0.0);
        assert_eq!(s[6], 0.0);
    }

    #[test]
    fn sine_series_leading_terms_pass_through() {
        let u = vec![0.0, 0.4, 0.0, -0.2];
        let s = sine_series(&u, 3);
        assert_eq!(s[1], 0.4);
        // s3 = a3 + T3 with T3 = -a1^3/6.
        assert!((s[3] - (-0.2 - 0.4_f64.powi(3) / 6.0)).abs() < 1e-16);
    }

    #[test]
    fn sine_series_of_odd_input_is_exactly_odd() {
        let u = vec![0.0, 1.3, 0.0, -0.7, 0.0, 0.11];
        let s = sine_series(&u, 15);
        for k in (0..=15).step_by(2) {
            assert_eq!(s[k], 0.0, "even slot {k}");
        }
    }

    #[test]
    fn frobenius_trivial_series_is_zero() {
        let s = frobenius_coeffs(&flat(1.0), 0.0, 21).unwrap();
        assert!(s.odd_coeffs.iter().all(|&a| a == 0.0));
        let e = s.eval(0.3).unwrap();
        assert_eq!((e.u, e.du, e.d2u), (0.0, 0.0, 0.0));
    }

    #[test]
    fn frobenius_flat_a3_closed_form() {
        for (c, a1) in [(-1.0, 1.0), (0.0, 0.5), (1.0, 0.1), (2.0, -1.2)] {
            let s = frobenius_coeffs(&flat(c), a1, 9).unwrap();
            let expected = (c * a1 - a1 * a1 * a1) / 18.0;
            assert!(
                (s.coeff(3) - expected).abs() <= 1e-14 * expected.abs().max(1.0),
                "c = {c}, a1 = {a1}: {} vs {expected}",
                s.coeff(3)
            );
        }
    }

    #[test]
    fn frobenius_even_coefficients_are_exactly_zero() {
        for params in [
            flat(-1.0),
            flat(1.0),
            SolitonOdeParams::new(1.0, -3.5, 2.0, 2.0, 1.5).unwrap(),
            SolitonOdeParams::new(1.0, -13.0 / 3.0, 3.0, 4.0, 8.0 / 3.0).unwrap(),
        ] {
            for a1 in [0.1, 1.0, -0.7] {
                let s = frobenius_coeffs(&params, a1, 21).unwrap();
                let full = s.full_coeffs();
                for k in (0..=21).step_by(2) {
                    assert_eq!(full[k], 0.0, "even a{k} for {params:?}, a1 = {a1}");
                }
            }
        }
    }

    #[test]
    fn frobenius_rejects_even_or_tiny_order() {
        assert!(frobenius_coeffs(&flat(0.0), 1.0, 4).is_err());
        assert!(frobenius_coeffs(&flat(0.0), 1.0, 1).is_err());
    }

    #[test]
    fn eval_at_zero_returns_slope_a1() {
        let s = frobenius_coeffs(&flat(-1.0), 0.8, 21).unwrap();
        let e = s.eval(0.0).unwrap();
        assert_eq!((e.u, e.du, e.d2u), (0.0, 0.8, 0.0));
    }

    #[test]
    fn eval_small_r_matches_low_order_truncation() {
        let s = frobenius_coeffs(&flat(0.0), 1.0, 21).unwrap();
        let e = s.eval(0.01).unwrap();
        let expected = 0.01 - 0.01_f64.powi(3) / 18.0;
        assert!((e.u - expected).abs() < 1e-10 * 3.0);
    }

    #[test]
    fn eval_guard_refuses_large_radius() {
        let s = frobenius_coeffs(&flat(0.0), 1.0, 21).unwrap();
        let err = s.eval(3.0).unwrap_err();
        assert!(matches!(err, Error::SeriesGuard { .. }));
    }

    #[test]
    fn r_switch_picks_largest_passing_candidate() {
        let s = frobenius_coeffs(&flat(0.0), 0.5, 21).unwrap();
        assert_eq!(pick_r_switch(&s).unwrap(), 0.4);
    }

    #[test]
    fn parameter_linearization_for_small_slopes() {
        let params = flat(-1.0);
        let a1 = 1e-4;
        let s_full = frobenius_coeffs(&params, a1, 21).unwrap();
        let s_half = frobenius_coeffs(&params, a1 / 2.0, 21).unwrap();
        for r in [0.05, 0.2, 0.4] {
            let u_full = s_full.eval(r).unwrap().u / a1;
            let u_half = s_half.eval(r).unwrap().u / (a1 / 2.0);
            assert!(
                (u_full - u_half).abs() < 10.0 * a1 * a1,
                "r = {r}: {u_full} vs {u_half}"
            );
        }
    }
}
