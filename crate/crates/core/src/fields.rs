//! Field evaluation and spectral propagation.
//!
//! Inside the strip the solver's nodal vector is interpolated with the P1
//! basis. Above the top line (and below the bottom line) the field is a
//! superposition of outgoing plane-wave modes, so a trace on the line
//! determines the field everywhere beyond it: each Fourier mode is
//! multiplied by `exp(i gamma_m d)` with `gamma_m = sqrt(k^2 - xi_m^2)` and
//! `d >= 0` the distance from the line. Propagating modes shift phase,
//! evanescent modes decay.
//!
//! Continuation in the opposite direction (from a line back toward the
//! strip) would multiply evanescent modes by growing exponentials and is
//! refused by the API rather than warned about.

use rustfft::FftPlanner;

use crate::assembly::PointSource;
use crate::error::Error;
use crate::geometry::{Mesh, Scene};
use crate::special::branch_sqrt;
use crate::{Complex, Result};

/// Which physical field an evaluation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// The solver unknown: total field with the incident singularity
    /// replaced by its smooth patch.
    TotalSmoothed,
    /// The scattered field: `total - incident` above the interface, the
    /// full transmitted field below it. The patches cancel in the
    /// subtraction, so this is the exact scattered field even inside the
    /// smoothing ball.
    Scattered,
    /// The patched incident field of the driving source.
    Incident,
}

/// A solved field bound to its scene, mesh, and driving source.
pub struct FieldSolution<'a> {
    pub scene: &'a Scene,
    pub mesh: &'a Mesh,
    /// Patched total field at every mesh node (zeros on eliminated nodes).
    pub nodal_total: Vec<Complex>,
    pub source: PointSource,
}

impl<'a> FieldSolution<'a> {
    pub fn new(
        scene: &'a Scene,
        mesh: &'a Mesh,
        nodal_total: Vec<Complex>,
        source: PointSource,
    ) -> Result<FieldSolution<'a>> {
        if nodal_total.len() != mesh.n_nodes() {
            return Err(Error::evaluation(format!(
                "nodal vector length {} does not match the mesh ({} nodes)",
                nodal_total.len(),
                mesh.n_nodes()
            )));
        }
        Ok(FieldSolution {
            scene,
            mesh,
            nodal_total,
            source,
        })
    }

    /// Evaluates one field kind at a point inside the strip.
    pub fn eval(&self, kind: FieldKind, p: [f64; 2]) -> Result<Complex> {
        match kind {
            FieldKind::Incident => self.source.incident(p),
            FieldKind::TotalSmoothed => self.interp(p),
            FieldKind::Scattered => {
                let total = self.interp(p)?;
                if self.scene.in_upper_layer(p) {
                    Ok(total - self.source.incident(p)?)
                } else {
                    Ok(total)
                }
            }
        }
    }

    pub fn eval_many(&self, kind: FieldKind, points: &[[f64; 2]]) -> Result<Vec<Complex>> {
        points.iter().map(|&p| self.eval(kind, p)).collect()
    }

    fn interp(&self, p: [f64; 2]) -> Result<Complex> {
        let (e, lambda) = self.mesh.locate(p).ok_or_else(|| {
            Error::evaluation(format!(
                "point [{}, {}] is outside the strip mesh (or inside the obstacle)",
                p[0], p[1]
            ))
        })?;
        let tri = self.mesh.elements[e];
        Ok((0..3)
            .map(|i| self.nodal_total[tri[i]] * lambda[i])
            .sum())
    }

    /// Total-field trace on the top line, one value per trace node
    /// (`n + 1` values including both wall corners).
    pub fn top_trace(&self) -> Vec<Complex> {
        self.mesh
            .top_trace
            .iter()
            .map(|&n| self.nodal_total[n])
            .collect()
    }

    /// Total-field trace on the bottom line.
    pub fn bottom_trace(&self) -> Vec<Complex> {
        self.mesh
            .bottom_trace
            .iter()
            .map(|&n| self.nodal_total[n])
            .collect()
    }

    /// Scattered-field line above the strip (`height >= h`): subtracts the
    /// exact incident trace on the top line, then propagates the scattered
    /// trace upward.
    pub fn scattered_line_above(&self, height: f64) -> Result<SpectralLine> {
        let h = self.scene.half_height;
        let n = self.mesh.n_cols;
        let a = self.scene.half_width;
        let mut samples = Vec::with_capacity(n);
        for j in 0..n {
            let x1 = -a + 2.0 * a * j as f64 / n as f64;
            let node = self.mesh.top_trace[j];
            let inc = self.source.incident([x1, h])?;
            samples.push(self.nodal_total[node] - inc);
        }
        let line = SpectralLine::from_samples(&samples, a, h)?;
        propagate_up(&line, self.scene.k1_sq, height)
    }
}

/// Periodic samples of a field on a horizontal line, stored spectrally.
#[derive(Debug, Clone)]
pub struct SpectralLine {
    /// Unnormalized DFT coefficients in FFT index order.
    coeffs: Vec<Complex>,
    half_width: f64,
    pub height: f64,
}

impl SpectralLine {
    /// Builds the line from `n` samples at `x1_j = -A + 2A j/n`.
    pub fn from_samples(samples: &[Complex], half_width: f64, height: f64) -> Result<SpectralLine> {
        let n = samples.len();
        if n < 2 || !(half_width > 0.0) {
            return Err(Error::evaluation(format!(
                "spectral line needs >= 2 samples and positive half-width, got {n} and {half_width}"
            )));
        }
        let mut coeffs = samples.to_vec();
        FftPlanner::new().plan_fft_forward(n).process(&mut coeffs);
        Ok(SpectralLine {
            coeffs,
            half_width,
            height,
        })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Grid samples (inverse transform).
    pub fn samples(&self) -> Vec<Complex> {
        let n = self.coeffs.len();
        let mut buf = self.coeffs.clone();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        for v in &mut buf {
            *v /= n as f64;
        }
        buf
    }

    /// Sample positions matching [`samples`](Self::samples).
    pub fn grid(&self) -> Vec<f64> {
        let n = self.coeffs.len();
        (0..n)
            .map(|j| -self.half_width + 2.0 * self.half_width * j as f64 / n as f64)
            .collect()
    }

    /// Band-limited evaluation at an arbitrary `x1` by direct mode
    /// summation (exact for the trigonometric interpolant).
    pub fn eval_at(&self, x1: f64) -> Complex {
        let n = self.coeffs.len();
        let mut out = Complex::new(0.0, 0.0);
        for (idx, c) in self.coeffs.iter().enumerate() {
            let m = signed_mode(idx, n);
            let xi = std::f64::consts::PI * m as f64 / self.half_width;
            out += c * Complex::new(0.0, xi * (x1 + self.half_width)).exp();
        }
        out / n as f64
    }

    /// Discrete L2 norm of the samples (trapezoid weight `2A/n`, evaluated
    /// spectrally via the Parseval identity).
    pub fn l2_norm(&self) -> f64 {
        let n = self.coeffs.len() as f64;
        let sum: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        (2.0 * self.half_width * sum / (n * n)).sqrt()
    }
}

/// FFT bin index -> signed mode number.
fn signed_mode(idx: usize, n: usize) -> i64 {
    if idx < n.div_ceil(2) {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

fn propagate(line: &SpectralLine, k_sq: Complex, distance: f64, to_height: f64) -> SpectralLine {
    let n = line.coeffs.len();
    let coeffs = line
        .coeffs
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let m = signed_mode(idx, n);
            let xi = std::f64::consts::PI * m as f64 / line.half_width;
            let gamma = branch_sqrt(k_sq - xi * xi);
            c * (Complex::new(0.0, 1.0) * gamma * distance).exp()
        })
        .collect();
    SpectralLine {
        coeffs,
        half_width: line.half_width,
        height: to_height,
    }
}

/// Continues a radiating field upward from its line to `to_height` above
/// it. Moving the target below the line is refused: that direction would
/// amplify evanescent modes without bound.
pub fn propagate_up(line: &SpectralLine, k1_sq: Complex, to_height: f64) -> Result<SpectralLine> {
    if to_height < line.height {
        return Err(Error::evaluation(format!(
            "cannot continue a trace at height {} downward to {}; evanescent modes would \
             grow exponentially",
            line.height, to_height
        )));
    }
    Ok(propagate(line, k1_sq, to_height - line.height, to_height))
}

/// Mirror of [`propagate_up`] for the field below the strip.
pub fn propagate_down(line: &SpectralLine, k2_sq: Complex, to_height: f64) -> Result<SpectralLine> {
    if to_height > line.height {
        return Err(Error::evaluation(format!(
            "cannot continue a trace at height {} upward to {}; evanescent modes would \
             grow exponentially",
            line.height, to_height
        )));
    }
    Ok(propagate(line, k2_sq, line.height - to_height, to_height))
}

/// Fourth-order finite-difference Helmholtz residuals of a field
/// evaluator, relative to the local field scale. A field satisfying
/// `laplacian(u) + k^2 u = 0` returns values at the rounding floor for
/// smooth evaluators.
pub fn helmholtz_residual_probe(
    eval: impl Fn([f64; 2]) -> Result<Complex>,
    k_sq: Complex,
    points: &[[f64; 2]],
    step: f64,
) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::evaluation(format!("probe step must be positive, got {step}")));
    }
    let coeffs = [(-2.0, -1.0), (-1.0, 16.0), (0.0, -30.0), (1.0, 16.0), (2.0, -1.0)];
    let mut out = Vec::with_capacity(points.len());
    for &p in points {
        let mut lap = Complex::new(0.0, 0.0);
        let mut scale = 0.0_f64;
        for dir in 0..2 {
            for (s, c) in coeffs {
                let mut q = p;
                q[dir] += s * step;
                let v = eval(q)?;
                scale = scale.max((k_sq * v).norm());
                lap += c * v;
            }
        }
        lap /= 12.0 * step * step;
        let res = lap + k_sq * eval(p)?;
        out.push(res.norm() / scale.max(1e-300));
    }
    Ok(out)
}

/// Writes field samples as CSV rows `x1, x2, re, im, kind`.
pub fn write_field_slice_csv<W: std::io::Write>(
    w: &mut W,
    rows: &[([f64; 2], Complex)],
    kind: &str,
) -> Result<()> {
    writeln!(w, "x1,x2,re,im,kind")?;
    for (p, v) in rows {
        writeln!(w, "{},{},{:.17e},{:.17e},{kind}", p[0], p[1], v.re, v.im)?;
    }
    Ok(())
}
