//! The `solve` subcommand: integrate one soliton profile and write the
//! trajectory table, a JSON summary, and optionally an SVG plot.
//!
//! Radial cases run the series-plus-adaptive-integrator pipeline. The
//! cylinder has closed-form solitons; `solve` evaluates the member picked
//! out by the normalization u(0) = 0 and the requested initial slope.

use std::fs;
use std::path::Path;

use g2flow::analysis::{
    self, classify_asymptotics, classify_torsion_samples, lyapunov, q_point, Classification,
    BLOWUP_GROWTH_THRESHOLD, Q_GRID_STEP_X,
};
use g2flow::geometry::{soliton_residual, BackgroundCase};
use g2flow::integrator::{residual_monitor, solve_soliton};
use serde::Serialize;

use crate::cli::{OutputFormat, SolveArgs};
use crate::commands::{
    build_case, default_r_max, ensure_out_dir, log_spaced, residual_step, Failure, TRAJECTORY_ROWS,
};
use crate::{fmt, svg};

/// Column names of the trajectory table, in order.
pub const TRAJECTORY_COLUMNS: [&str; 8] = [
    "r",
    "x",
    "u",
    "z",
    "u_prime",
    "torsion_norm_sq",
    "L",
    "Q_or_nan",
];

/// Innermost tabulated radius for the cylinder, which has no handoff point.
const CY_R_MIN: f64 = 0.01;

/// One row of the trajectory table. `l` and `q` are NaN where the quantity
/// is undefined (cylinder rows) or masked (untrusted Q stencils).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrajectoryRow {
    pub r: f64,
    pub x: f64,
    pub u: f64,
    pub z: f64,
    pub u_prime: f64,
    pub torsion_norm_sq: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "Q_or_nan")]
    pub q: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct EndpointSummary {
    r: f64,
    u: f64,
    u_prime: f64,
    torsion_norm_sq: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct ResidualSummary {
    max_abs: f64,
    endpoint_gap: f64,
    nodes: usize,
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    case: BackgroundCase,
    a1: f64,
    tol: f64,
    r_max_requested: f64,
    r_end: f64,
    r_switch: Option<f64>,
    truncated: bool,
    classification: Option<Classification>,
    endpoint: EndpointSummary,
    residual: ResidualSummary,
    q_max_abs_dev: Option<f64>,
    rows: usize,
}

struct Outcome {
    rows: Vec<TrajectoryRow>,
    summary: SolveSummary,
}

pub fn run(args: &SolveArgs) -> Result<i32, Failure> {
    let case = build_case(args.case, args.c, args.b, args.lambda)?;
    validate_common(args.a1, args.rmax, args.tol)?;
    let r_max = args.rmax.unwrap_or_else(|| default_r_max(&case));
    let outcome = match case {
        BackgroundCase::CylinderCY { b } => solve_cylinder(&case, b, args.a1, r_max, args.tol)?,
        _ => solve_radial(&case, args.a1, r_max, args.tol)?,
    };
    ensure_out_dir(&args.out_dir)?;

    let table_name = match args.format {
        OutputFormat::Csv => "trajectory.csv",
        OutputFormat::Json => "trajectory.json",
    };
    let table_path = args.out_dir.join(table_name);
    let table = match args.format {
        OutputFormat::Csv => rows_to_csv(&outcome.rows)?,
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&outcome.rows)
                .map_err(|e| Failure::Numerical(format!("cannot encode trajectory: {e}")))?;
            s.push('\n');
            s.into_bytes()
        }
    };
    fs::write(&table_path, table)
        .map_err(|e| Failure::io(&format!("cannot write {}", table_path.display()), e))?;

    let summary_path = args.out_dir.join("summary.json");
    write_summary(&summary_path, &outcome.summary)?;

    if args.plot {
        let plot_path = args.out_dir.join("plot.svg");
        fs::write(&plot_path, plot_svg(&outcome.rows))
            .map_err(|e| Failure::io(&format!("cannot write {}", plot_path.display()), e))?;
    }

    let class = outcome
        .summary
        .classification
        .map(|c| c.to_string())
        .unwrap_or_else(|| "unclassified".into());
    println!(
        "solve {}: classification {}, r_end {}, residual max {:.3e} -> {}",
        outcome.summary.case.label(),
        class,
        fmt::float(outcome.summary.r_end),
        outcome.summary.residual.max_abs,
        args.out_dir.display()
    );
    Ok(0)
}

fn validate_common(a1: f64, rmax: Option<f64>, tol: f64) -> Result<(), Failure> {
    if !a1.is_finite() {
        return Err(Failure::Usage(format!("--a1 must be finite, got {a1}")));
    }
    if let Some(rm) = rmax {
        if !(rm.is_finite() && rm > 0.0) {
            return Err(Failure::Usage(format!("--rmax must be positive, got {rm}")));
        }
    }
    if !(tol.is_finite() && tol > 0.0 && tol < 1e-1) {
        return Err(Failure::Usage(format!(
            "--tol must lie in (0, 0.1), got {tol}"
        )));
    }
    Ok(())
}

fn solve_radial(case: &BackgroundCase, a1: f64, r_max: f64, tol: f64) -> Result<Outcome, Failure> {
    let traj = solve_soliton(case, a1, r_max, tol)?;
    let params = traj.params;
    let q_case = matches!(
        case,
        BackgroundCase::FlatR7 { .. } | BackgroundCase::ConeNK { .. }
    );
    let (x_start, x_end) = (traj.x_start(), traj.x_end());
    let h = Q_GRID_STEP_X;
    let sampler = |x: f64| match traj.sample(x) {
        Ok(s) => (s.u, s.z),
        Err(_) => (f64::NAN, f64::NAN),
    };

    let mut rows = Vec::with_capacity(TRAJECTORY_ROWS);
    for r in log_spaced(x_start.exp(), traj.r_end(), TRAJECTORY_ROWS) {
        let x = r.ln().clamp(x_start, x_end);
        let s = traj.sample(x)?;
        let u_prime = s.z / r;
        let q = if q_case && x - 2.0 * h >= x_start && x + 2.0 * h <= x_end {
            q_point(case, &sampler, x, h)?.unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        rows.push(TrajectoryRow {
            r,
            x,
            u: s.u,
            z: s.z,
            u_prime,
            torsion_norm_sq: analysis::torsion_norm_sq_case(case, s.u, u_prime, r)?,
            l: lyapunov(&params, &s),
            q,
        });
    }

    let end = traj.sample(x_end)?;
    let r_end = traj.r_end();
    let end_du = end.z / r_end;
    let h_res = residual_step(&params, x_start, x_end);
    let report = residual_monitor(case, &traj, h_res)?;
    let q_max_abs_dev = if q_case {
        let target = match case {
            BackgroundCase::FlatR7 { c } | BackgroundCase::ConeNK { c } => *c,
            _ => unreachable!(),
        };
        analysis::q_profile(case, &traj, 0.5, 20.0)
            .ok()
            .and_then(|p| p.max_abs_dev(target))
    } else {
        None
    };

    let summary = SolveSummary {
        case: *case,
        a1,
        tol,
        r_max_requested: r_max,
        r_end,
        r_switch: traj.r_switch,
        truncated: traj.truncated_blowup(),
        classification: classify_asymptotics(&traj, case).ok(),
        endpoint: EndpointSummary {
            r: r_end,
            u: end.u,
            u_prime: end_du,
            torsion_norm_sq: analysis::torsion_norm_sq_case(case, end.u, end_du, r_end)?,
        },
        residual: ResidualSummary {
            max_abs: report.max_abs_residual,
            endpoint_gap: report.endpoint_gap,
            nodes: report.nodes,
        },
        q_max_abs_dev,
        rows: rows.len(),
    };
    Ok(Outcome { rows, summary })
}

fn solve_cylinder(
    case: &BackgroundCase,
    b: f64,
    a1: f64,
    r_max: f64,
    tol: f64,
) -> Result<Outcome, Failure> {
    let profile = |r: f64| -> (f64, f64, f64) {
        if b == 0.0 {
            (a1 * r, a1, 0.0)
        } else {
            let g = (b * r).exp();
            (a1 / b * (g - 1.0), a1 * g, a1 * b * g)
        }
    };
    let mut rows = Vec::with_capacity(TRAJECTORY_ROWS);
    let mut max_res: f64 = 0.0;
    for r in log_spaced(CY_R_MIN, r_max, TRAJECTORY_ROWS) {
        let (u, du, d2u) = profile(r);
        max_res = max_res.max(soliton_residual(case, u, du, d2u, r)?.abs());
        rows.push(TrajectoryRow {
            r,
            x: r.ln(),
            u,
            z: r * du,
            u_prime: du,
            torsion_norm_sq: analysis::torsion_norm_sq_case(case, u, du, r)?,
            l: f64::NAN,
            q: f64::NAN,
        });
    }

    let last_decade: Vec<f64> = rows
        .iter()
        .filter(|row| row.r >= r_max / 10.0)
        .map(|row| row.torsion_norm_sq)
        .collect();
    let mut crossing: Option<f64> = None;
    for row in &rows {
        let growth = row.r * row.r * row.z.abs();
        if crossing.is_none() && growth > BLOWUP_GROWTH_THRESHOLD {
            crossing = Some(growth);
        }
    }
    let final_growth = rows
        .last()
        .map(|row| row.r * row.r * row.z.abs())
        .unwrap_or(0.0);
    let blowup_signal = crossing.is_some_and(|at| final_growth >= at);
    let classification = classify_torsion_samples(&last_decade, blowup_signal);

    let (u, du, _) = profile(r_max);
    let summary = SolveSummary {
        case: *case,
        a1,
        tol,
        r_max_requested: r_max,
        r_end: r_max,
        r_switch: None,
        truncated: false,
        classification: Some(classification),
        endpoint: EndpointSummary {
            r: r_max,
            u,
            u_prime: du,
            torsion_norm_sq: analysis::torsion_norm_sq_case(case, u, du, r_max)?,
        },
        residual: ResidualSummary {
            max_abs: max_res,
            endpoint_gap: 0.0,
            nodes: rows.len(),
        },
        q_max_abs_dev: None,
        rows: rows.len(),
    };
    Ok(Outcome { rows, summary })
}

fn rows_to_csv(rows: &[TrajectoryRow]) -> Result<Vec<u8>, Failure> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(TRAJECTORY_COLUMNS)
        .map_err(|e| Failure::Numerical(format!("cannot encode trajectory: {e}")))?;
    for row in rows {
        let fields = [
            fmt::float(row.r),
            fmt::float(row.x),
            fmt::float(row.u),
            fmt::float(row.z),
            fmt::float(row.u_prime),
            fmt::float(row.torsion_norm_sq),
            fmt::float(row.l),
            fmt::float(row.q),
        ];
        writer
            .write_record(&fields)
            .map_err(|e| Failure::Numerical(format!("cannot encode trajectory: {e}")))?;
    }
    writer
        .into_inner()
        .map_err(|e| Failure::Numerical(format!("cannot encode trajectory: {e}")))
}

fn write_summary(path: &Path, summary: &SolveSummary) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(summary)
        .map_err(|e| Failure::Numerical(format!("cannot encode summary: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::io(&format!("cannot write {}", path.display()), e))
}

fn plot_svg(rows: &[TrajectoryRow]) -> String {
    let angle: Vec<(f64, f64)> = rows.iter().map(|row| (row.r, row.u)).collect();
    let torsion: Vec<(f64, f64)> = rows
        .iter()
        .map(|row| (row.r, row.torsion_norm_sq))
        .collect();
    svg::render(&[
        svg::Panel {
            title: "angle u(r)",
            x_label: "r",
            y_label: "u",
            points: &angle,
        },
        svg::Panel {
            title: "torsion norm squared",
            x_label: "r",
            y_label: "|T|^2",
            points: &torsion,
        },
    ])
}
