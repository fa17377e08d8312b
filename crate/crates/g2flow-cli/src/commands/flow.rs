//! The `flow` subcommand: run a method-of-lines simulation from a JSON
//! configuration and write the report plus one CSV per snapshot.

use std::fs;

use g2flow::flow::run_flow;
use g2flow::FlowConfig;

use crate::cli::FlowArgs;
use crate::commands::{ensure_out_dir, Failure};
use crate::fmt;

/// Column names of every snapshot CSV, in order. `coordinate` is the radius
/// for radial topologies and the axis position for cylinder topologies.
pub const SNAPSHOT_COLUMNS: [&str; 2] = ["coordinate", "u"];

pub fn run(args: &FlowArgs) -> Result<i32, Failure> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", args.config.display())))?;
    let config: FlowConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.config.display())))?;

    let (report, snapshots) = run_flow(&config)?;

    ensure_out_dir(&args.out_dir)?;
    let report_path = args.out_dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::Numerical(format!("cannot encode report: {e}")))?;
    text.push('\n');
    fs::write(&report_path, text)
        .map_err(|e| Failure::io(&format!("cannot write {}", report_path.display()), e))?;

    for (i, grid) in snapshots.iter().enumerate() {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let enc = |e: csv::Error| Failure::Numerical(format!("cannot encode snapshot: {e}"));
        writer.write_record(SNAPSHOT_COLUMNS).map_err(enc)?;
        for (&node, &u) in grid.nodes().iter().zip(grid.values()) {
            writer
                .write_record([fmt::float(node), fmt::float(u)])
                .map_err(enc)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Failure::Numerical(format!("cannot encode snapshot: {e}")))?;
        let path = args.out_dir.join(format!("snapshot_{i:03}.csv"));
        fs::write(&path, bytes)
            .map_err(|e| Failure::io(&format!("cannot write {}", path.display()), e))?;
    }

    println!(
        "flow: {} nodes, {} steps to t = {}{}, {} snapshots -> {}",
        report.node_count,
        report.steps,
        fmt::float(report.t_final),
        if report.steady {
            " (steady state reached)"
        } else {
            ""
        },
        snapshots.len(),
        args.out_dir.display()
    );
    Ok(0)
}
