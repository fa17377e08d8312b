//! Numerical laboratory for cohomogeneity-one solitons of the isometric
//! flow of G2-structures on radially symmetric backgrounds: flat 7-space,
//! Calabi-Yau cylinders, the nearly-Kaehler cone, and the two
//! Bryant-Salamon families.
//!
//! The radial symmetry reduces everything to scalar functions of the radius
//! r. The crate is organized around that reduction:
//!
//! - [`geometry`]: warped-metric profiles per background and the closed
//!   forms of the Laplacians, gradient norms, and torsion built from them.
//! - [`series`]: odd power-series solutions of the soliton equation at the
//!   regular singular point r = 0, one series per initial slope u'(0).
//! - [`integrator`]: adaptive integration of the soliton equation in
//!   log-radius coordinates, started from the series and monitored by
//!   residual re-integration and linear comparison envelopes.
//! - [`analysis`]: torsion functionals, Lyapunov diagnostics, asymptotic
//!   classification, and the first integral Q of the flat-type cases.
//! - [`flow`]: method-of-lines simulation of the underlying parabolic flow
//!   itself, for experiments beyond the soliton ansatz.
//! - [`oracle`]: finite-difference verifiers that confirm the closed forms
//!   without sharing any code with them.
//!
//! The conventions shared by every module: u is the angle variable of the
//! trigonometric substitution, z = r u' its scaled derivative, x = ln r the
//! log radius, and a soliton is a solution of
//! u'' + P(r) u'/r - Q(r) sin(u)/r^2 = 0 with the rational coefficients P, Q
//! determined by the background.

// Negated comparisons are NaN-rejecting guards; stencil loops index
// neighbors on both sides; the profile type carries boxed closures.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::type_complexity)]

pub mod analysis;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod integrator;
pub mod oracle;
pub mod series;

pub use analysis::{Classification, LyapunovSector, QProfile, TorsionProfile, ZSquareBound};
pub use error::{Error, Result};
pub use flow::{FlowConfig, FlowGrid, FlowReport, InitialData, OuterBc, TopologySpec};
pub use geometry::{BackgroundCase, WarpProfile};
pub use integrator::{LogState, ResidualReport, Solution, Trajectory};
pub use series::{OddSeries, SolitonOdeParams};
