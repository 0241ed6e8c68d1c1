//! Covariate-conditional bivariate quantile contours.
//!
//! Two estimation routes share one exact quantile-regression LP kernel
//! ([`qr`]):
//!
//! * directional regression quantiles ([`directional`]), linear or B-spline
//!   in the covariate, turned into convex contours by halfspace intersection
//!   ([`contours`]);
//! * two-step stratified quantile models ([`stratified`]) fit on a τ-grid and
//!   sampled by inverse transform, summarised by radial coverage contours.
//!
//! [`diagnostics`] measures model adequacy through directional coverage and
//! P–P comparisons.

pub mod config;
pub mod contours;
pub mod data;
pub mod diagnostics;
pub mod directional;
mod error;
pub mod io;
pub mod qr;
pub mod splines;
pub mod stratified;
pub mod synthetic;

pub use config::{RunConfig, SettingKind};
pub use contours::{Contour, ContourKind};
pub use data::Dataset;
pub use diagnostics::AdequacyReport;
pub use directional::{CovariateModel, Direction, DirectionalFit, ModelTag};
pub use error::{Error, Result};
pub use qr::{check_loss, solve, verify_optimality, QrProblem, QrSolution};
pub use splines::{KnotPlacement, SplineBasis};
pub use stratified::{Setting, StratifiedModel, TauGrid};
