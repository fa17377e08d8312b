//! Implementations of the four subcommands and the plumbing they share.

pub mod flow;
pub mod solve;
pub mod sweep;
pub mod verify;

use std::fs;
use std::path::Path;

use g2flow::BackgroundCase;

use crate::cli::CaseKind;

/// Failure classes of a command, mapped to process exit codes by the
/// dispatcher: `Usage` exits 1, `Numerical` exits 2.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<g2flow::Error> for Failure {
    fn from(err: g2flow::Error) -> Self {
        Failure::Numerical(err.to_string())
    }
}

impl Failure {
    pub fn io(context: &str, err: std::io::Error) -> Self {
        Failure::Numerical(format!("{context}: {err}"))
    }
}

/// Rows of every trajectory table written by `solve`.
pub const TRAJECTORY_ROWS: usize = 500;

/// Default outer radius per case: far enough past the torsion decay
/// threshold for the decaying solitons of each background, and short for
/// the cylinder, whose interesting solitons grow exponentially.
pub fn default_r_max(case: &BackgroundCase) -> f64 {
    match case {
        BackgroundCase::FlatR7 { .. } | BackgroundCase::ConeNK { .. } => 200.0,
        BackgroundCase::BryantSalamonA { .. } | BackgroundCase::BryantSalamonB { .. } => 2e4,
        BackgroundCase::CylinderCY { .. } => 10.0,
    }
}

/// Build the background from the per-case parameter flags, rejecting both
/// missing and extraneous parameters.
pub fn build_case(
    kind: CaseKind,
    c: Option<f64>,
    b: Option<f64>,
    lambda: Option<f64>,
) -> Result<BackgroundCase, Failure> {
    let reject = |flag: &str, kind_name: &str| {
        Failure::Usage(format!("--{flag} does not apply to case {kind_name}"))
    };
    let case = match kind {
        CaseKind::Flat => {
            if b.is_some() {
                return Err(reject("b", "flat"));
            }
            if lambda.is_some() {
                return Err(reject("lambda", "flat"));
            }
            let c = c.ok_or_else(|| Failure::Usage("case flat requires --c".into()))?;
            BackgroundCase::FlatR7 { c }
        }
        CaseKind::Nk => {
            if b.is_some() {
                return Err(reject("b", "nk"));
            }
            if lambda.is_some() {
                return Err(reject("lambda", "nk"));
            }
            let c = c.ok_or_else(|| Failure::Usage("case nk requires --c".into()))?;
            BackgroundCase::ConeNK { c }
        }
        CaseKind::Cy => {
            if c.is_some() {
                return Err(reject("c", "cy"));
            }
            if lambda.is_some() {
                return Err(reject("lambda", "cy"));
            }
            let b = b.ok_or_else(|| Failure::Usage("case cy requires --b".into()))?;
            BackgroundCase::CylinderCY { b }
        }
        CaseKind::BsA | CaseKind::BsB => {
            let kind_name = if kind == CaseKind::BsA {
                "bs-a"
            } else {
                "bs-b"
            };
            if c.is_some() {
                return Err(reject("c", kind_name));
            }
            if b.is_some() {
                return Err(reject("b", kind_name));
            }
            let lambda = lambda
                .ok_or_else(|| Failure::Usage(format!("case {kind_name} requires --lambda")))?;
            if kind == CaseKind::BsA {
                BackgroundCase::BryantSalamonA { lambda }
            } else {
                BackgroundCase::BryantSalamonB { lambda }
            }
        }
    };
    case.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(case)
}

/// Create the output directory if needed.
pub fn ensure_out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(&format!("cannot create {}", dir.display()), e))
}

/// Fixed step in x for the residual re-integration behind `solve` and
/// `sweep` summaries: the usual resolution step, shrunk when the linear
/// coefficient 1 - P of the log system is large enough at either end of the
/// trajectory to put the explicit re-integration outside its stability
/// region. The flat and nearly-Kaehler cases have 1 - P ~ -c r^2, so long
/// shrinker runs need steps well below the default.
pub fn residual_step(params: &g2flow::SolitonOdeParams, x_start: f64, x_end: f64) -> f64 {
    let coeff = |x: f64| (1.0 - params.p_coeff(x.exp())).abs();
    let stiffest = coeff(x_start).max(coeff(x_end));
    (1.0 / (1.0 + stiffest)).min(2e-3)
}

/// Logarithmically spaced radii from `r_lo` to `r_hi` inclusive.
pub fn log_spaced(r_lo: f64, r_hi: f64, n: usize) -> Vec<f64> {
    let x_lo = r_lo.ln();
    let x_hi = r_hi.ln();
    (0..n)
        .map(|i| {
            let f = i as f64 / (n - 1) as f64;
            (x_lo + f * (x_hi - x_lo)).exp()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_construction_enforces_parameter_ownership() {
        assert!(matches!(
            build_case(CaseKind::Flat, Some(-1.0), None, None),
            Ok(BackgroundCase::FlatR7 { c }) if c == -1.0
        ));
        assert!(build_case(CaseKind::Flat, None, None, None).is_err());
        assert!(build_case(CaseKind::Flat, Some(1.0), None, Some(1.0)).is_err());
        assert!(build_case(CaseKind::Cy, Some(1.0), Some(1.0), None).is_err());
        assert!(matches!(
            build_case(CaseKind::BsA, None, None, Some(2.0)),
            Ok(BackgroundCase::BryantSalamonA { lambda }) if lambda == 2.0
        ));
        assert!(build_case(CaseKind::BsB, None, None, Some(-1.0)).is_err());
    }

    #[test]
    fn default_radii_follow_the_case() {
        assert_eq!(default_r_max(&BackgroundCase::FlatR7 { c: 0.0 }), 200.0);
        assert_eq!(default_r_max(&BackgroundCase::ConeNK { c: 0.0 }), 200.0);
        assert_eq!(
            default_r_max(&BackgroundCase::BryantSalamonA { lambda: 1.0 }),
            2e4
        );
        assert_eq!(default_r_max(&BackgroundCase::CylinderCY { b: 1.0 }), 10.0);
    }

    #[test]
    fn log_spacing_hits_both_ends() {
        let rs = log_spaced(0.1, 100.0, 7);
        assert_eq!(rs.len(), 7);
        assert!((rs[0] - 0.1).abs() < 1e-12);
        assert!((rs[6] - 100.0).abs() < 1e-9);
        assert!(rs.windows(2).all(|w| w[1] > w[0]));
    }
}
