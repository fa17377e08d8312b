//! Closed-form Riemannian quantities for warped vector-bundle metrics
//! g = h(r)^2 g_base + k(r)^2 g_fibre over an n-dimensional base with
//! rank-m fibres.
//!
//! Everything here is a pure function of values at a single radius r > 0.
//! The point r = 0 is a regular singular point of all the radial operators
//! (they carry 1/r and 1/r^2 poles) and is owned entirely by the series
//! module; operations in this module reject r <= 0.

use crate::error::{Error, Result};
use crate::series;
use serde::{Deserialize, Serialize};

/// Boxed scalar function of the radius.
pub type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// The data (n, m, h, k) of a warped bundle metric
/// g = h(r)^2 g_base + k(r)^2 g_fibre, with analytic first and second
/// derivatives of both warp factors.
///
/// Derivatives are supplied analytically rather than differenced: the
/// backgrounds of interest have exact rational-power warps and finite
/// differences would pollute the oracle comparisons that consume this type.
pub struct WarpProfile {
    /// Base dimension n.
    pub n: u32,
    /// Fibre rank m.
    pub m: u32,
    /// Base warp h(r) > 0.
    pub h: ScalarFn,
    /// h'(r).
    pub dh: ScalarFn,
    /// h''(r).
    pub d2h: ScalarFn,
    /// Fibre warp k(r) > 0.
    pub k: ScalarFn,
    /// k'(r).
    pub dk: ScalarFn,
    /// k''(r).
    pub d2k: ScalarFn,
}

impl WarpProfile {
    /// Bundles the six warp evaluators with the dimensions.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: u32,
        m: u32,
        h: ScalarFn,
        dh: ScalarFn,
        d2h: ScalarFn,
        k: ScalarFn,
        dk: ScalarFn,
        d2k: ScalarFn,
    ) -> Self {
        Self {
            n,
            m,
            h,
            dh,
            d2h,
            k,
            dk,
            d2k,
        }
    }

    pub fn h(&self, r: f64) -> f64 {
        (self.h)(r)
    }
    pub fn dh(&self, r: f64) -> f64 {
        (self.dh)(r)
    }
    pub fn d2h(&self, r: f64) -> f64 {
        (self.d2h)(r)
    }
    pub fn k(&self, r: f64) -> f64 {
        (self.k)(r)
    }
    pub fn dk(&self, r: f64) -> f64 {
        (self.dk)(r)
    }
    pub fn d2k(&self, r: f64) -> f64 {
        (self.d2k)(r)
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "radius must be positive and finite, got r = {r}"
        )))
    }
}

/// The five background geometries the laboratory works on.
///
/// Each case fixes a warp profile and the constants of its radial soliton
/// equation:
///
/// - `FlatR7`: flat R^7 viewed radially, soliton constant c (shrinking,
///   steady, expanding for c > 0, = 0, < 0).
/// - `CylinderCY`: a Calabi-Yau cylinder, where the radial flow is the heat
///   equation and solitons translate with speed b.
/// - `ConeNK`: the cone over a nearly Kaehler 6-manifold; its radial soliton
///   problem coincides with the flat one.
/// - `BryantSalamonA`: the anti-self-dual bundle over a self-dual Einstein
///   4-manifold with scale lambda > 0.
/// - `BryantSalamonB`: the spinor bundle over the round 3-sphere with scale
///   lambda > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "kebab-case")]
pub enum BackgroundCase {
    FlatR7 {
        c: f64,
    },
    #[serde(rename = "cylinder-cy")]
    CylinderCY {
        b: f64,
    },
    #[serde(rename = "cone-nk")]
    ConeNK {
        c: f64,
    },
    BryantSalamonA {
        lambda: f64,
    },
    BryantSalamonB {
        lambda: f64,
    },
}

impl BackgroundCase {
    /// Checks the case parameters against their standing assumptions
    /// (lambda > 0 for the Bryant-Salamon families, finite constants
    /// everywhere).
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!(
                    "{name} must be finite, got {v}"
                )))
            }
        };
        match *self {
            BackgroundCase::FlatR7 { c } | BackgroundCase::ConeNK { c } => finite(c, "c"),
            BackgroundCase::CylinderCY { b } => finite(b, "b"),
            BackgroundCase::BryantSalamonA { lambda }
            | BackgroundCase::BryantSalamonB { lambda } => {
                finite(lambda, "lambda")?;
                if lambda > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!(
                        "lambda must be positive, got {lambda}"
                    )))
                }
            }
        }
    }

    /// Short lower-case label used in file names and CSV cells.
    pub fn label(&self) -> &'static str {
        match self {
            BackgroundCase::FlatR7 { .. } => "flat-r7",
            BackgroundCase::CylinderCY { .. } => "cylinder-cy",
            BackgroundCase::ConeNK { .. } => "cone-nk",
            BackgroundCase::BryantSalamonA { .. } => "bryant-salamon-a",
            BackgroundCase::BryantSalamonB { .. } => "bryant-salamon-b",
        }
    }

    /// The warp profile of the case:
    ///
    /// - flat R^7 and the nearly Kaehler cone: n = 6, m = 1, h = r, k = 1
    /// - Calabi-Yau cylinder: n = 6, m = 1, h = 1, k = 1
    /// - Bryant-Salamon A: n = 4, m = 3, h = sqrt(2)(lambda + r^2)^{1/4},
    ///   k = (lambda + r^2)^{-1/4}
    /// - Bryant-Salamon B: n = 3, m = 4, h = sqrt(3)(lambda + r^2)^{1/3},
    ///   k = 2(lambda + r^2)^{-1/6}
    pub fn profile(&self) -> WarpProfile {
        match *self {
            BackgroundCase::FlatR7 { .. } | BackgroundCase::ConeNK { .. } => WarpProfile::new(
                6,
                1,
                Box::new(|r| r),
                Box::new(|_| 1.0),
                Box::new(|_| 0.0),
                Box::new(|_| 1.0),
                Box::new(|_| 0.0),
                Box::new(|_| 0.0),
            ),
            BackgroundCase::CylinderCY { .. } => WarpProfile::new(
                6,
                1,
                Box::new(|_| 1.0),
                Box::new(|_| 0.0),
                Box::new(|_| 0.0),
                Box::new(|_| 1.0),
                Box::new(|_| 0.0),
                Box::new(|_| 0.0),
            ),
            BackgroundCase::BryantSalamonA { lambda } => {
                let s2 = std::f64::consts::SQRT_2;
                WarpProfile::new(
                    4,
                    3,
                    Box::new(move |r| s2 * (lambda + r * r).powf(0.25)),
                    Box::new(move |r| s2 * 0.5 * r * (lambda + r * r).powf(-0.75)),
                    Box::new(move |r| {
                        s2 * 0.5 * (lambda + r * r).powf(-1.75) * (lambda - 0.5 * r * r)
                    }),
                    Box::new(move |r| (lambda + r * r).powf(-0.25)),
                    Box::new(move |r| -0.5 * r * (lambda + r * r).powf(-1.25)),
                    Box::new(move |r| -0.5 * (lambda + r * r).powf(-2.25) * (lambda - 1.5 * r * r)),
                )
            }
            BackgroundCase::BryantSalamonB { lambda } => {
                let s3 = 3.0_f64.sqrt();
                let third = 1.0 / 3.0;
                WarpProfile::new(
                    3,
                    4,
                    Box::new(move |r| s3 * (lambda + r * r).powf(third)),
                    Box::new(move |r| s3 * 2.0 * third * r * (lambda + r * r).powf(third - 1.0)),
                    Box::new(move |r| {
                        s3 * 2.0
                            * third
                            * (lambda + r * r).powf(third - 2.0)
                            * (lambda - third * r * r)
                    }),
                    Box::new(move |r| 2.0 * (lambda + r * r).powf(-1.0 / 6.0)),
                    Box::new(move |r| -(2.0 * third) * r * (lambda + r * r).powf(-7.0 / 6.0)),
                    Box::new(move |r| {
                        -(2.0 * third)
                            * (lambda + r * r).powf(-13.0 / 6.0)
                            * (lambda - 4.0 * third * r * r)
                    }),
                )
            }
        }
    }
}

/// Laplacian of a radial scalar s on the bundle metric:
///
/// ```text
/// lap s = s''/k^2 + ( (m-1)/(k^2 r) + n h'/(h k^2) + (m-2) k'/k^3 ) s'
/// ```
///
/// `ds` and `d2s` are the values s'(r) and s''(r).
pub fn laplacian_scalar(profile: &WarpProfile, ds: f64, d2s: f64, r: f64) -> Result<f64> {
    check_radius(r)?;
    let (n, m) = (profile.n as f64, profile.m as f64);
    let (h, dh) = (profile.h(r), profile.dh(r));
    let (k, dk) = (profile.k(r), profile.dk(r));
    let k2 = k * k;
    let coeff = (m - 1.0) / (k2 * r) + n * dh / (h * k2) + (m - 2.0) * dk / (k2 * k);
    Ok(d2s / k2 + coeff * ds)
}

/// Coefficients (c2, c1, c0) of the rough Laplacian acting on the radial
/// vector field X = s(r) d/dr on a Ricci-flat bundle metric:
///
/// ```text
/// lap X = (c2 s'' + c1 s' + c0 s) d/dr
/// c2 = 1/k^2
/// c1 = (m-1)/(k^2 r) + n h'/(h k^2) + m k'/k^3
/// c0 = -(m-1)/(k^2 r^2) + n h''/(h k^2) - n h'^2/(h^2 k^2)
///      + m k''/k^3 - m k'^2/k^4
/// ```
pub fn laplacian_radial_field_coeffs(profile: &WarpProfile, r: f64) -> Result<(f64, f64, f64)> {
    check_radius(r)?;
    let (n, m) = (profile.n as f64, profile.m as f64);
    let (h, dh, d2h) = (profile.h(r), profile.dh(r), profile.d2h(r));
    let (k, dk, d2k) = (profile.k(r), profile.dk(r), profile.d2k(r));
    let k2 = k * k;
    let c2 = 1.0 / k2;
    let c1 = (m - 1.0) / (k2 * r) + n * dh / (h * k2) + m * dk / (k2 * k);
    let c0 = -(m - 1.0) / (k2 * r * r) + n * d2h / (h * k2) - n * dh * dh / (h * h * k2)
        + m * d2k / (k2 * k)
        - m * dk * dk / (k2 * k2);
    Ok((c2, c1, c0))
}

/// Squared covariant-derivative norm of the radial field X = s(r) d/dr:
///
/// ```text
/// |grad X|^2 = -(m-1) s^2 k''/k + s'^2 + 2 s s' k'/k + (2m-1) s^2 k'^2/k^2
///              + (m-1) s^2 k'/(k r) + n s^2 h' k'/(h k) + (m-1) s^2/r^2
///              - n s^2 h''/h + n s^2 h'^2/h^2
/// ```
pub fn grad_norm_sq_radial_field(profile: &WarpProfile, s: f64, ds: f64, r: f64) -> Result<f64> {
    check_radius(r)?;
    let (n, m) = (profile.n as f64, profile.m as f64);
    let (h, dh, d2h) = (profile.h(r), profile.dh(r), profile.d2h(r));
    let (k, dk, d2k) = (profile.k(r), profile.dk(r), profile.d2k(r));
    let s2 = s * s;
    Ok(-(m - 1.0) * s2 * d2k / k
        + ds * ds
        + 2.0 * s * ds * dk / k
        + (2.0 * m - 1.0) * s2 * dk * dk / (k * k)
        + (m - 1.0) * s2 * dk / (k * r)
        + n * s2 * dh * dk / (h * k)
        + (m - 1.0) * s2 / (r * r)
        - n * s2 * d2h / h
        + n * s2 * dh * dh / (h * h))
}

/// Christoffel traces of the bundle metric against a fibre coordinate
/// direction:
///
/// - `horiz_trace_coeff`: coefficient of x_gamma in g^{ij} Gamma^gamma_{ij},
///   equal to -n h'/(h k^2 r)
/// - `vert_trace_coeff`: coefficient of x_gamma in g^{ab} Gamma^gamma_{ab},
///   equal to (2-m) k'/(k^3 r)
/// - `gamma_vvv_coeff`: the scalar k'/(k r) multiplying the symmetrized
///   fibre-fibre-fibre expression
pub fn christoffel_traces(profile: &WarpProfile, r: f64) -> Result<(f64, f64, f64)> {
    check_radius(r)?;
    let (n, m) = (profile.n as f64, profile.m as f64);
    let (h, dh) = (profile.h(r), profile.dh(r));
    let (k, dk) = (profile.k(r), profile.dk(r));
    let horiz = -n * dh / (h * k * k * r);
    let vert = (2.0 - m) * dk / (k * k * k * r);
    let vvv = dk / (k * r);
    Ok((horiz, vert, vvv))
}

/// Residuals of the conformal-scaling constraint for the radial field
/// Y = b(r) d/dr:
///
/// ```text
/// res1 = c h - b h'
/// res2 = c k - b k' - k b'
/// ```
///
/// Both vanish exactly when the Lie derivative of the metric along Y is 2c g.
pub fn lie_constraint_residual(
    profile: &WarpProfile,
    b: f64,
    db: f64,
    c: f64,
    r: f64,
) -> Result<(f64, f64)> {
    check_radius(r)?;
    let (h, dh) = (profile.h(r), profile.dh(r));
    let (k, dk) = (profile.k(r), profile.dk(r));
    Ok((c * h - b * dh, c * k - b * dk - k * db))
}

/// Tolerance for the pointwise constraint f^2 + k^2 a^2 = 1.
pub const UNIT_CONSTRAINT_TOL: f64 = 1e-10;

/// Squared torsion norm of the radial structure determined by the pair
/// (f, X = a(r) d/dr) subject to f^2 + |X|^2 = 1:
///
/// ```text
/// |T|^2 = 4 ( |grad X|^2 + f'^2 / k^2 )
/// ```
///
/// The constraint f^2 + k^2 a^2 = 1 is checked to 1e-10 and violations are
/// an error rather than a silent renormalization, so integration drift
/// cannot hide here.
pub fn torsion_norm_sq(
    profile: &WarpProfile,
    f: f64,
    df: f64,
    a: f64,
    da: f64,
    r: f64,
) -> Result<f64> {
    check_radius(r)?;
    let k = profile.k(r);
    let constraint = f * f + k * k * a * a - 1.0;
    if constraint.abs() > UNIT_CONSTRAINT_TOL {
        return Err(Error::Precondition(format!(
            "f^2 + k^2 a^2 = 1 violated by {constraint:.3e} at r = {r}"
        )));
    }
    let grad_x = grad_norm_sq_radial_field(profile, a, da, r)?;
    let grad_f = df * df / (k * k);
    Ok(4.0 * (grad_x + grad_f))
}

/// Left-hand side of the case's radial soliton equation evaluated at
/// (u, u', u''); zero along exact solitons.
///
/// For the four cases in the unified family the equation is
///
/// ```text
/// u'' + P(r) u'/r - Q(r) sin(u)/r^2 = 0,
/// P(r) = (d - c r^2)/(1 + b r^2),  Q(r) = (d + e r^2 + f r^4)/(1 + b r^2)^2
/// ```
///
/// with (b, c, d, e, f) the case constants; for the Calabi-Yau cylinder the
/// travelling-wave equation is u'' - b u' = 0.
pub fn soliton_residual(case: &BackgroundCase, u: f64, du: f64, d2u: f64, r: f64) -> Result<f64> {
    check_radius(r)?;
    match *case {
        BackgroundCase::CylinderCY { b } => Ok(d2u - b * du),
        _ => {
            let p = series::case_params(case)?;
            Ok(d2u + p.p_coeff(r) * du / r - p.q_coeff(r) * u.sin() / (r * r))
        }
    }
}
