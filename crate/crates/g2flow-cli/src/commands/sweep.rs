//! The `sweep` subcommand: solve a grid of (parameter, initial slope)
//! points concurrently and write one CSV row per point.
//!
//! Rows appear in grid order, parameter-major, regardless of worker count,
//! so identical inputs yield byte-identical output. A failure at one point
//! lands in that row's `error` column and never aborts the sweep.

use std::fs;

use g2flow::analysis::{classify_asymptotics, torsion_norm_sq_case};
use g2flow::geometry::BackgroundCase;
use g2flow::integrator::{residual_monitor, solve_soliton};
use rayon::prelude::*;

use crate::cli::{CaseKind, SweepArgs};
use crate::commands::{default_r_max, ensure_out_dir, residual_step, Failure};
use crate::fmt;

/// Column names of sweep.csv, in order.
pub const SWEEP_COLUMNS: [&str; 8] = [
    "index",
    "case",
    "parameter",
    "a1",
    "classification",
    "final_torsion_norm_sq",
    "max_abs_residual",
    "error",
];

struct PointResult {
    classification: String,
    final_torsion: Option<f64>,
    max_residual: Option<f64>,
    error: String,
}

pub fn run(args: &SweepArgs) -> Result<i32, Failure> {
    let params = parameter_grid(args)?;
    let a1s = args.a1_values.clone().unwrap_or_default();
    if !(args.tol.is_finite() && args.tol > 0.0 && args.tol < 1e-1) {
        return Err(Failure::Usage(format!(
            "--tol must lie in (0, 0.1), got {}",
            args.tol
        )));
    }
    if let Some(rm) = args.rmax {
        if !(rm.is_finite() && rm > 0.0) {
            return Err(Failure::Usage(format!("--rmax must be positive, got {rm}")));
        }
    }
    if args.jobs == Some(0) {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }

    let grid: Vec<(f64, f64)> = params
        .iter()
        .flat_map(|&p| a1s.iter().map(move |&a1| (p, a1)))
        .collect();

    let work = || -> Vec<PointResult> {
        grid.par_iter()
            .map(|&(p, a1)| sweep_point(args.case, p, a1, args.rmax, args.tol))
            .collect()
    };
    let results = match args.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Numerical(format!("cannot build worker pool: {e}")))?
            .install(work),
        None => work(),
    };

    ensure_out_dir(&args.out_dir)?;
    let path = args.out_dir.join("sweep.csv");
    let mut writer = csv::Writer::from_writer(Vec::new());
    let enc = |e: csv::Error| Failure::Numerical(format!("cannot encode sweep: {e}"));
    writer.write_record(SWEEP_COLUMNS).map_err(enc)?;
    let case_name = case_label(args.case);
    for (i, ((p, a1), res)) in grid.iter().zip(results.iter()).enumerate() {
        let opt = |v: Option<f64>| v.map(fmt::float).unwrap_or_default();
        writer
            .write_record([
                i.to_string(),
                case_name.to_string(),
                fmt::float(*p),
                fmt::float(*a1),
                res.classification.clone(),
                opt(res.final_torsion),
                opt(res.max_residual),
                res.error.clone(),
            ])
            .map_err(enc)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Failure::Numerical(format!("cannot encode sweep: {e}")))?;
    fs::write(&path, bytes)
        .map_err(|e| Failure::io(&format!("cannot write {}", path.display()), e))?;

    let failed = results.iter().filter(|r| !r.error.is_empty()).count();
    println!(
        "sweep {}: {} points ({} failed) -> {}",
        case_name,
        grid.len(),
        failed,
        path.display()
    );
    Ok(0)
}

fn case_label(kind: CaseKind) -> &'static str {
    match kind {
        CaseKind::Flat => "flat-r7",
        CaseKind::Nk => "cone-nk",
        CaseKind::Cy => "cylinder-cy",
        CaseKind::BsA => "bryant-salamon-a",
        CaseKind::BsB => "bryant-salamon-b",
    }
}

/// The one-dimensional parameter grid for the case, from the matching flag.
fn parameter_grid(args: &SweepArgs) -> Result<Vec<f64>, Failure> {
    match args.case {
        CaseKind::Cy => Err(Failure::Usage(
            "sweep covers the cases driven by --c-values or --lambda-values; \
             the cylinder solitons are closed forms, use `solve --case cy`"
                .into(),
        )),
        CaseKind::Flat | CaseKind::Nk => {
            if args.lambda_values.is_some() {
                return Err(Failure::Usage(
                    "--lambda-values does not apply to cases flat and nk, use --c-values".into(),
                ));
            }
            Ok(args.c_values.clone().unwrap_or_default())
        }
        CaseKind::BsA | CaseKind::BsB => {
            if args.c_values.is_some() {
                return Err(Failure::Usage(
                    "--c-values does not apply to cases bs-a and bs-b, use --lambda-values".into(),
                ));
            }
            Ok(args.lambda_values.clone().unwrap_or_default())
        }
    }
}

fn point_case(kind: CaseKind, p: f64) -> BackgroundCase {
    match kind {
        CaseKind::Flat => BackgroundCase::FlatR7 { c: p },
        CaseKind::Nk => BackgroundCase::ConeNK { c: p },
        CaseKind::BsA => BackgroundCase::BryantSalamonA { lambda: p },
        CaseKind::BsB => BackgroundCase::BryantSalamonB { lambda: p },
        CaseKind::Cy => unreachable!("rejected by parameter_grid"),
    }
}

fn sweep_point(kind: CaseKind, p: f64, a1: f64, rmax: Option<f64>, tol: f64) -> PointResult {
    let mut out = PointResult {
        classification: String::new(),
        final_torsion: None,
        max_residual: None,
        error: String::new(),
    };
    let case = point_case(kind, p);
    if let Err(e) = case.validate() {
        out.error = e.to_string();
        return out;
    }
    let r_max = rmax.unwrap_or_else(|| default_r_max(&case));
    let traj = match solve_soliton(&case, a1, r_max, tol) {
        Ok(t) => t,
        Err(e) => {
            out.error = e.to_string();
            return out;
        }
    };
    match traj.sample(traj.x_end()) {
        Ok(end) => {
            let r_end = traj.r_end();
            match torsion_norm_sq_case(&case, end.u, end.z / r_end, r_end) {
                Ok(t) => out.final_torsion = Some(t),
                Err(e) => out.error = e.to_string(),
            }
        }
        Err(e) => out.error = e.to_string(),
    }
    match classify_asymptotics(&traj, &case) {
        Ok(class) => out.classification = class.to_string(),
        Err(e) => {
            if out.error.is_empty() {
                out.error = e.to_string();
            }
        }
    }
    let h_res = residual_step(&traj.params, traj.x_start(), traj.x_end());
    match residual_monitor(&case, &traj, h_res) {
        Ok(report) => out.max_residual = Some(report.max_abs_residual),
        Err(e) => {
            if out.error.is_empty() {
                out.error = e.to_string();
            }
        }
    }
    out
}
