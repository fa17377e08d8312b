//! Command-line front end of the soliton laboratory.
//!
//! Four subcommands drive the numerical crate: `solve` integrates one
//! soliton profile, `sweep` runs a parameter grid concurrently, `flow`
//! simulates the parabolic flow from a JSON configuration, and `verify`
//! runs the built-in cross-check suites. All artifacts are deterministic:
//! identical inputs produce byte-identical CSV, JSON, and SVG files.

pub mod cli;
pub mod commands;
pub mod fmt;
pub mod schema;
pub mod svg;

pub use cli::run;
