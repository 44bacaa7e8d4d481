//! Interface profile families. The interface is the graph
//! `Gamma = { (x1, f(x1)) }` of a C^2 function; every family provides exact
//! first and second derivatives (used by normals, curvature-aware meshing
//! checks, and arc-length integrals).

use serde::{Deserialize, Serialize};

/// Interface height profile `f(x1)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Profile {
    /// Constant height.
    Flat {
        #[serde(default)]
        height: f64,
    },
    /// `amplitude * sin(wavenumber * x1 + phase)`.
    Sinusoid {
        amplitude: f64,
        wavenumber: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude * exp(-((x1 - center)/width)^2)`.
    GaussianBump {
        amplitude: f64,
        #[serde(default)]
        center: f64,
        width: f64,
    },
    /// `amplitude * sin(wavenumber * x1) * exp(-(x1/envelope_width)^2)`:
    /// an oscillation that dies off laterally, so the interface is flat
    /// near the truncation walls.
    ModulatedSine {
        amplitude: f64,
        wavenumber: f64,
        envelope_width: f64,
    },
    /// Truncated Fourier series on the given period:
    /// `sum_j cos_coeffs[j] cos(2 pi (j+1) x1 / period)
    ///  + sin_coeffs[j] sin(2 pi (j+1) x1 / period)` plus `mean`.
    Fourier {
        period: f64,
        #[serde(default)]
        mean: f64,
        #[serde(default)]
        cos_coeffs: Vec<f64>,
        #[serde(default)]
        sin_coeffs: Vec<f64>,
    },
}

impl Profile {
    /// Height `f(x1)`.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Flat { height } => *height,
            Profile::Sinusoid {
                amplitude,
                wavenumber,
                phase,
            } => amplitude * (wavenumber * x + phase).sin(),
            Profile::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let t = (x - center) / width;
                amplitude * (-t * t).exp()
            }
            Profile::ModulatedSine {
                amplitude,
                wavenumber,
                envelope_width,
            } => {
                let t = x / envelope_width;
                amplitude * (wavenumber * x).sin() * (-t * t).exp()
            }
            Profile::Fourier {
                period,
                mean,
                cos_coeffs,
                sin_coeffs,
            } => {
                let base = 2.0 * core::f64::consts::PI / period;
                let mut v = *mean;
                for (j, c) in cos_coeffs.iter().enumerate() {
                    v += c * (base * (j + 1) as f64 * x).cos();
                }
                for (j, s) in sin_coeffs.iter().enumerate() {
                    v += s * (base * (j + 1) as f64 * x).sin();
                }
                v
            }
        }
    }

    /// Slope `f'(x1)`.
    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            Profile::Flat { .. } => 0.0,
            Profile::Sinusoid {
                amplitude,
                wavenumber,
                phase,
            } => amplitude * wavenumber * (wavenumber * x + phase).cos(),
            Profile::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let t = (x - center) / width;
                amplitude * (-t * t).exp() * (-2.0 * t / width)
            }
            Profile::ModulatedSine {
                amplitude,
                wavenumber,
                envelope_width,
            } => {
                let t = x / envelope_width;
                let env = (-t * t).exp();
                amplitude
                    * env
                    * (wavenumber * (wavenumber * x).cos()
                        - (2.0 * t / envelope_width) * (wavenumber * x).sin())
            }
            Profile::Fourier {
                period,
                cos_coeffs,
                sin_coeffs,
                ..
            } => {
                let base = 2.0 * core::f64::consts::PI / period;
                let mut v = 0.0;
                for (j, c) in cos_coeffs.iter().enumerate() {
                    let w = base * (j + 1) as f64;
                    v -= c * w * (w * x).sin();
                }
                for (j, s) in sin_coeffs.iter().enumerate() {
                    let w = base * (j + 1) as f64;
                    v += s * w * (w * x).cos();
                }
                v
            }
        }
    }

    /// Curvature numerator `f''(x1)`.
    pub fn deriv2(&self, x: f64) -> f64 {
        match self {
            Profile::Flat { .. } => 0.0,
            Profile::Sinusoid {
                amplitude,
                wavenumber,
                phase,
            } => -amplitude * wavenumber * wavenumber * (wavenumber * x + phase).sin(),
            Profile::GaussianBump {
                amplitude,
                center,
                width,
            } => {
                let t = (x - center) / width;
                amplitude * (-t * t).exp() * (4.0 * t * t - 2.0) / (width * width)
            }
            Profile::ModulatedSine {
                amplitude,
                wavenumber,
                envelope_width,
            } => {
                let w = *wavenumber;
                let ew = *envelope_width;
                let t = x / ew;
                let env = (-t * t).exp();
                let s = (w * x).sin();
                let c = (w * x).cos();
                // d2/dx2 [sin(wx) e^{-x^2/ew^2}]
                let e1 = -2.0 * x / (ew * ew); // (log env)'
                amplitude
                    * env
                    * (-w * w * s + 2.0 * w * c * e1 + s * (e1 * e1 - 2.0 / (ew * ew)))
            }
            Profile::Fourier {
                period,
                cos_coeffs,
                sin_coeffs,
                ..
            } => {
                let base = 2.0 * core::f64::consts::PI / period;
                let mut v = 0.0;
                for (j, c) in cos_coeffs.iter().enumerate() {
                    let w = base * (j + 1) as f64;
                    v -= c * w * w * (w * x).cos();
                }
                for (j, s) in sin_coeffs.iter().enumerate() {
                    let w = base * (j + 1) as f64;
                    v -= s * w * w * (w * x).sin();
                }
                v
            }
        }
    }

    /// Tight-ish bounds `(min f, max f)` over `[-half_width, half_width]`,
    /// obtained by dense sampling plus a derivative-based safety pad.
    pub fn bounds(&self, half_width: f64) -> (f64, f64) {
        let n = 4096;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut max_slope = 0.0f64;
        for i in 0..=n {
            let x = -half_width + 2.0 * half_width * i as f64 / n as f64;
            let v = self.eval(x);
            lo = lo.min(v);
            hi = hi.max(v);
            max_slope = max_slope.max(self.deriv(x).abs());
        }
        let pad = max_slope * half_width / n as f64;
        (lo - pad, hi + pad)
    }
}
