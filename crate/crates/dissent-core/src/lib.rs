//! Numerical toolkit for dissipatively driven entanglement between two atomic
//! ensembles.
//!
//! Two ensembles of `N` atoms each are driven by off-resonant probe light so
//! that collective emission acts as the nonlocal jump operators
//! `A = (μ Σσ_I + ν Σσ†_II)/√N` and `B = (μ Σσ_II + ν Σσ†_I)/√N`. Their
//! common dark state is a two-mode squeezed state; single-particle noise
//! (cooling, heating, dephasing) limits how close the ensembles get to it.
//!
//! Modules:
//!
//! * [`model_core`]: squeezing parameters `μ, ν`, optical depth, the
//!   entanglement measure `ξ`.
//! * [`two_level`]: noise-rate composition, steady-state `ξ∞`, the
//!   quasi-static `ξ(t)` and the nonlocal-variance moment equations.
//! * [`bosonic`]: Gaussian covariance dynamics of the ideal two-mode model
//!   and the EPR variance.
//! * [`collective_rates`]: dipole kernels and Gaussian-cloud averaged pair
//!   decay rates.
//! * [`lindblad`]: exact density-matrix dynamics for a handful of atoms,
//!   used as ground truth for the moment closure.
//! * [`multilevel`]: three-level rate equations and the measured `ξ_exp`
//!   for hyperfine-level encodings.
//! * [`cesium`]: angular-momentum coefficients and laser-induced rates for
//!   the Cs D1/D2 lines.
//!
//! All rates are in units of the single-atom decay rate `Γ = 1` except at the
//! boundary of [`cesium`], which accepts MHz.

pub mod bosonic;
pub mod cesium;
pub mod collective_rates;
pub mod error;
pub mod lindblad;
pub mod model_core;
pub mod multilevel;
pub mod ode;
pub mod quadrature;
pub mod two_level;

pub use error::{Result, SimError};
