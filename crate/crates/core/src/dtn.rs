//! Spectral Dirichlet-to-Neumann (DtN) operators on the horizontal
//! truncation lines `x2 = ±h`.
//!
//! On the laterally truncated strip the field trace on a line is represented
//! by its Fourier series on `[-A, A)` sampled at `n` uniform points
//! (`n` a power of two). The DtN map is diagonal in that basis:
//!
//! ```text
//! (T phi)^(m) = i sqrt(k^2 - xi_m^2) phi^(m),    xi_m = pi m / A,
//! ```
//!
//! with the branch-cut square root of [`crate::special::branch_sqrt`], so the
//! symbol has `Re <= 0` and `Im >= 0`: propagating modes carry energy away,
//! evanescent modes decay. The same operator (same sign) applies on the top
//! line (normal `+e2`) and the bottom line (normal `-e2`).
//!
//! Degenerate grid frequencies: if some `xi_m^2` collides with a *real* `k^2`
//! the symbol vanishes exactly and the truncated problem can become
//! resonance-sensitive; the constructor then nudges `k` by 1e-12 relative and
//! records the fact.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::Error;
use crate::special::branch_sqrt;
use crate::{Complex, Result};

/// Relative nudge applied to `k` when a grid frequency hits `k^2` exactly.
const DEGENERATE_REL_NUDGE: f64 = 1e-12;

/// Spectral DtN operator on a horizontal line of half-width `A`,
/// discretized with `n` uniform grid points (`n` a power of two).
pub struct DtnOperator {
    n: usize,
    half_width: f64,
    /// Multiplier in FFT frequency order: `m = 0, 1, …, n/2-1, -n/2, …, -1`.
    symbol: Vec<Complex>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
    nudged: bool,
}

impl DtnOperator {
    /// Builds the operator for squared wavenumber `k_sq` (with `Im >= 0`).
    pub fn new(k_sq: Complex, half_width: f64, n: usize) -> Result<Self> {
        if !n.is_power_of_two() || n < 4 {
            return Err(Error::solver(format!(
                "DtN grid size must be a power of two >= 4, got {n}"
            )));
        }
        if !(half_width > 0.0) {
            return Err(Error::solver("DtN half-width must be positive".to_string()));
        }
        if !(k_sq.im >= 0.0) || !(k_sq.re > 0.0) {
            return Err(Error::regime(format!(
                "DtN needs Re k^2 > 0 and Im k^2 >= 0, got {k_sq}"
            )));
        }

        // Detect exact symbol zeros on the frequency grid (real k^2 only;
        // a positive imaginary part already keeps the symbol away from 0).
        let mut k_sq = k_sq;
        let mut nudged = false;
        if k_sq.im == 0.0 {
            let collision = (0..n).any(|idx| {
                let m = fft_index_to_mode(idx, n);
                let xi = core::f64::consts::PI * m as f64 / half_width;
                (k_sq.re - xi * xi).abs() <= DEGENERATE_REL_NUDGE * k_sq.re.max(1.0)
            });
            if collision {
                // k -> k (1 + 1e-12), i.e. k^2 -> k^2 (1 + 1e-12)^2.
                let f = 1.0 + DEGENERATE_REL_NUDGE;
                k_sq *= f * f;
                nudged = true;
            }
        }

        let mut symbol = Vec::with_capacity(n);
        for idx in 0..n {
            let m = fft_index_to_mode(idx, n);
            let xi = core::f64::consts::PI * m as f64 / half_width;
            symbol.push(Complex::i() * branch_sqrt(k_sq - xi * xi));
        }

        let mut planner = FftPlanner::new();
        Ok(DtnOperator {
            n,
            half_width,
            symbol,
            fft_fwd: planner.plan_fft_forward(n),
            fft_inv: planner.plan_fft_inverse(n),
            nudged,
        })
    }

    pub fn grid_len(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Whether the wavenumber was nudged off a degenerate grid frequency.
    pub fn was_nudged(&self) -> bool {
        self.nudged
    }

    /// Grid spacing `2A/n`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// The multiplier `sigma_m = i sqrt(k^2 - xi_m^2)` in FFT order.
    pub fn symbol(&self) -> &[Complex] {
        &self.symbol
    }

    /// Applies the operator to nodal trace samples (length `n`, taken at
    /// `x1_j = -A + j * 2A/n`).
    pub fn apply(&self, trace: &[Complex]) -> Result<Vec<Complex>> {
        if trace.len() != self.n {
            return Err(Error::solver(format!(
                "trace length {} does not match DtN grid {}",
                trace.len(),
                self.n
            )));
        }
        let mut buf = trace.to_vec();
        self.fft_fwd.process(&mut buf);
        for (v, s) in buf.iter_mut().zip(&self.symbol) {
            *v *= s / self.n as f64;
        }
        self.fft_inv.process(&mut buf);
        Ok(buf)
    }

    /// Unconjugated pairing `∫ psi (T phi) ds` over one period, using the
    /// trapezoid rule on the periodic grid (spectrally exact for the
    /// trigonometric interpolants). Symmetric in `phi <-> psi`.
    pub fn bilinear_unconjugated(&self, phi: &[Complex], psi: &[Complex]) -> Result<Complex> {
        let t_phi = self.apply(phi)?;
        let dx = self.spacing();
        Ok(dx * psi.iter().zip(&t_phi).map(|(p, t)| p * t).sum::<Complex>())
    }

    /// Sesquilinear pairing `∫ conj(psi) (T phi) ds` over one period.
    pub fn sesquilinear(&self, phi: &[Complex], psi: &[Complex]) -> Result<Complex> {
        let t_phi = self.apply(phi)?;
        let dx = self.spacing();
        Ok(dx * psi.iter().zip(&t_phi).map(|(p, t)| p.conj() * t).sum::<Complex>())
    }

    /// First row generator of the (symmetric circulant) matrix
    /// `B[j][l] = kernel[(j - l) mod n]` realizing the weighted bilinear map
    /// `psi^T B phi = ∫ psi (T phi) ds` on nodal samples. Includes the
    /// quadrature weight `2A/n`.
    pub fn weighted_kernel(&self) -> Vec<Complex> {
        let mut buf = self.symbol.clone();
        self.fft_inv.process(&mut buf);
        let scale = self.spacing() / self.n as f64;
        for v in &mut buf {
            *v *= scale;
        }
        buf
    }
}

/// Folds `n + 1` boundary-trace samples (both lateral wall corners kept as
/// separate nodes) into the `n`-point periodic grid the spectral operator
/// works on: interior samples pass through, the two corner samples average.
pub fn fold_trace(trace: &[Complex]) -> Vec<Complex> {
    let n = trace.len() - 1;
    let mut out = trace[..n].to_vec();
    out[0] = 0.5 * (trace[0] + trace[n]);
    out
}

/// Inverse layout of [`fold_trace`]: expands `n` periodic samples to the
/// `n + 1` trace nodes by repeating the shared corner value.
pub fn unfold_trace(periodic: &[Complex]) -> Vec<Complex> {
    let mut out = periodic.to_vec();
    out.push(periodic[0]);
    out
}

/// FFT bin index -> signed mode number (`0..n/2-1`, then `-n/2..-1`).
fn fft_index_to_mode(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}
