//! Spectral analysis of the Hill operator `-y'' + q(x) y` with a complex
//! 1-periodic potential `q`, fiber by fiber over the quasimomentum.
//!
//! The crate computes, for the t-periodic fiber operators on `[0, 1]`:
//!
//! * the Hill discriminant `F(lambda)` and its lambda-derivatives by direct
//!   integration of the monodromy and variational systems ([`discriminant`]),
//! * an independent truncated Fourier-basis matrix eigenproblem with
//!   biorthogonal pairs and spectral projections ([`oracle`]),
//! * perturbation-series eigenvalue and eigenfunction asymptotics of
//!   arbitrary order near the periodic (`t ~ 0`) and antiperiodic
//!   (`t ~ pi`) edges ([`asymptotics`]),
//! * whole-line diagnostics: spectral arcs, gap functions, spectral
//!   singularity detection and classification, band projections, and
//!   uniform projection-norm sweeps ([`spectrum`]),
//! * sufficient-condition checkers on the Fourier coefficients of the
//!   potential ([`potential`]).
//!
//! Everything is plain data plus pure functions; all sweeps are safe to run
//! concurrently.

pub mod asymptotics;
pub mod discriminant;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod potential;
pub mod spectrum;

pub use error::{Error, Result};
pub use potential::PotentialSpec;

/// Default quasimomentum edge width separating the near-0 / middle / near-pi
/// regimes. Configuration constant, not a claim about the operator.
pub const DEFAULT_RHO: f64 = 0.1;
