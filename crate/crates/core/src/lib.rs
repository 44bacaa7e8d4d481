//! Time-harmonic acoustic scattering in a two-layer half-space geometry:
//! an unbounded rough interface separates media with wavenumbers `k1` (above)
//! and `k2` (below), with an optional impenetrable obstacle buried in the
//! lower layer. The solver truncates the vertical direction with spectral
//! Dirichlet-to-Neumann (DtN) maps on two artificial lines `x2 = ±h`, and the
//! lateral direction at `|x1| = A` with homogeneous Neumann walls, then
//! discretizes the strip with P1 triangles.
//!
//! Crate layout:
//!
//! * [`special`] — branch-cut square root, Bessel/Hankel functions, and the
//!   point-source fields used as incident waves.
//! * [`geometry`] — interface profiles, obstacle curves, scene validation,
//!   and conforming strip meshes.
//! * [`dtn`] — FFT-based spectral DtN operators on the truncation lines.
//! * [`assembly`] — P1 finite-element assembly of the variational system,
//!   volume right-hand sides, and smoothed point-source patches.
//! * [`solve`] — wavenumber regime validation and the sparse direct solve.
//! * [`fields`] — field evaluation in the strip, angular-spectrum
//!   continuation away from it, norms, and residual probes.
//! * [`oracle_flat`] — an independent spectral-quadrature reference solution
//!   for a flat interface with no obstacle.
//! * [`experiments`] — end-to-end experiment drivers (validation against the
//!   flat oracle, manufactured-solution convergence, reciprocity, dipole
//!   consistency, source-approach boundedness, dataset generation).
//! * [`config`] — JSON scene configuration.

// Positivity guards are written `!(x > 0.0)` rather than `x <= 0.0` so that
// NaN inputs are rejected instead of silently accepted.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod config;
pub mod dtn;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod geometry;
pub mod oracle_flat;
pub mod solve;
pub mod special;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Complex = num_complex::Complex64;

/// Result alias with the crate error type.
pub type Result<T> = std::result::Result<T, Error>;
