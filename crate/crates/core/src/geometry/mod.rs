//! Scene geometry: rough interface profiles, buried obstacle curves, and the
//! truncated strip domain, plus conforming mesh generation.
//!
//! Coordinate conventions used everywhere: `x1` is lateral, `x2` vertical.
//! The interface is the graph `x2 = f(x1)`; the computational strip is
//! `|x1| <= A`, `|x2| <= h` with the obstacle removed. The upper medium
//! (squared wavenumber `k1^2`) occupies `x2 > f(x1)`, the lower medium
//! (`k2^2`) the rest.

mod mesh;
mod obstacle;
mod profile;

pub use mesh::{generate_mesh, BoundaryEdge, EdgeTag, Mesh, Region};
pub use obstacle::{CoatedArc, Obstacle, ObstacleCurve};
pub use profile::Profile;

use crate::error::Error;
use crate::{Complex, Result};

/// A validated scattering scene on the truncated strip.
#[derive(Debug, Clone)]
pub struct Scene {
    pub interface: Profile,
    pub obstacle: Option<Obstacle>,
    /// Half-height `h` of the strip: DtN lines sit at `x2 = ±h`.
    pub half_height: f64,
    /// Lateral truncation half-width `A`.
    pub half_width: f64,
    pub k1_sq: Complex,
    pub k2_sq: Complex,
    /// Interface range over `[-A, A]`, cached at build time.
    pub f_lo: f64,
    pub f_hi: f64,
    /// Non-fatal configuration smells collected during validation.
    pub warnings: Vec<String>,
}

impl Scene {
    /// Validates and builds a scene.
    ///
    /// Hard errors: interface not strictly inside the strip, obstacle not
    /// strictly below the interface band and `x2 = 0`, obstacle touching the
    /// strip bottom or walls. Soft warnings: `A < 4h` (the lateral
    /// truncation relies on the `|x - z|^{-3/2}` decay of interface-guided
    /// fields, which needs room to act).
    pub fn new(
        interface: Profile,
        obstacle: Option<Obstacle>,
        half_height: f64,
        half_width: f64,
        k1_sq: Complex,
        k2_sq: Complex,
    ) -> Result<Self> {
        if !(half_height > 0.0) || !(half_width > 0.0) {
            return Err(Error::geometry(format!(
                "strip dimensions must be positive, got h = {half_height}, A = {half_width}"
            )));
        }
        let (f_lo, f_hi) = interface.bounds(half_width);
        if !(f_hi < half_height) || !(f_lo > -half_height) {
            return Err(Error::geometry(format!(
                "interface range [{f_lo}, {f_hi}] must lie strictly inside (-h, h) = ({}, {})",
                -half_height, half_height
            )));
        }

        let mut warnings = Vec::new();
        if half_width < 4.0 * half_height {
            warnings.push(format!(
                "half-width A = {half_width} is below the recommended 4h = {}; \
                 lateral truncation error may be noticeable",
                4.0 * half_height
            ));
        }

        if let Some(ob) = &obstacle {
            let bbox = ob.curve.bbox();
            let top = bbox.1[1];
            if !(top < 0.0) || !(top < f_lo) {
                return Err(Error::geometry(format!(
                    "obstacle top {top} must lie strictly below both x2 = 0 and the \
                     interface minimum {f_lo}"
                )));
            }
            if !(bbox.0[1] > -half_height) {
                return Err(Error::geometry(
                    "obstacle must stay strictly above the strip bottom".to_string(),
                ));
            }
            if !(bbox.0[0] > -half_width) || !(bbox.1[0] < half_width) {
                return Err(Error::geometry(
                    "obstacle must stay strictly inside the lateral walls".to_string(),
                ));
            }
            ob.validate()?;
        }

        Ok(Scene {
            interface,
            obstacle,
            half_height,
            half_width,
            k1_sq,
            k2_sq,
            f_lo,
            f_hi,
            warnings,
        })
    }

    /// Interface height at `x1`.
    pub fn f(&self, x1: f64) -> f64 {
        self.interface.eval(x1)
    }

    /// Squared wavenumber at a point (by layer; ignores the obstacle).
    pub fn k_sq_at(&self, p: [f64; 2]) -> Complex {
        if p[1] > self.f(p[0]) {
            self.k1_sq
        } else {
            self.k2_sq
        }
    }

    /// True if the point lies in the upper layer (above the interface).
    pub fn in_upper_layer(&self, p: [f64; 2]) -> bool {
        p[1] > self.f(p[0])
    }

    /// Euclidean distance from `p` to the interface curve `x2 = f(x1)`,
    /// minimized over `x1` in `[-A, A]`: coarse scan plus Newton refinement
    /// of the stationarity condition `(s - p1) + (f(s) - p2) f'(s) = 0`.
    pub fn distance_to_interface(&self, p: [f64; 2]) -> f64 {
        let n = 4096;
        let a = self.half_width;
        let mut best_s = 0.0;
        let mut best_d2 = f64::INFINITY;
        for i in 0..=n {
            let s = -a + 2.0 * a * i as f64 / n as f64;
            let dy = self.f(s) - p[1];
            let d2 = (s - p[0]).powi(2) + dy * dy;
            if d2 < best_d2 {
                best_d2 = d2;
                best_s = s;
            }
        }
        let mut s = best_s;
        for _ in 0..30 {
            let (f, fp, fpp) = (
                self.interface.eval(s),
                self.interface.deriv(s),
                self.interface.deriv2(s),
            );
            let g = (s - p[0]) + (f - p[1]) * fp;
            let dg = 1.0 + fp * fp + (f - p[1]) * fpp;
            if dg.abs() < 1e-300 {
                break;
            }
            let step = g / dg;
            s -= step;
            if !s.is_finite() || s.abs() > a {
                s = best_s; // Newton left the window: fall back to the scan.
                break;
            }
            if step.abs() < 1e-14 {
                break;
            }
        }
        ((s - p[0]).powi(2) + (self.f(s) - p[1]).powi(2)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn accepts_flat_scene() {
        let s = Scene::new(
            Profile::Flat { height: 0.0 },
            None,
            2.0,
            8.0,
            k(4.0, 0.0),
            k(2.0, 0.0),
        )
        .unwrap();
        assert_eq!(s.f_lo, 0.0);
        assert_eq!(s.f_hi, 0.0);
        assert!(s.warnings.is_empty());
        assert!(s.in_upper_layer([1.0, 0.5]));
        assert!(!s.in_upper_layer([1.0, -0.5]));
    }

    #[test]
    fn warns_on_narrow_strip() {
        let s = Scene::new(
            Profile::Flat { height: 0.0 },
            None,
            2.0,
            6.0,
            k(4.0, 0.0),
            k(2.0, 0.0),
        )
        .unwrap();
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn rejects_interface_leaving_strip() {
        let r = Scene::new(
            Profile::Sinusoid {
                amplitude: 2.5,
                wavenumber: 1.0,
                phase: 0.0,
            },
            None,
            2.0,
            8.0,
            k(4.0, 0.0),
            k(2.0, 0.0),
        );
        assert!(r.is_err());
    }

    #[test]
    fn rejects_obstacle_above_interface_minimum() {
        // Interface dips to -0.3; obstacle reaching -0.2 must be rejected.
        let ob = Obstacle::sound_soft(ObstacleCurve::Circle {
            center: [0.0, -0.7],
            radius: 0.5,
        });
        let r = Scene::new(
            Profile::Sinusoid {
                amplitude: 0.3,
                wavenumber: 1.0,
                phase: 0.0,
            },
            Some(ob),
            2.0,
            8.0,
            k(4.0, 0.0),
            k(2.0, 0.5),
        );
        assert!(r.is_err());
    }

    #[test]
    fn interface_distance_matches_known_geometry() {
        let flat = Scene::new(
            Profile::Flat { height: 0.3 },
            None,
            2.0,
            8.0,
            k(4.0, 0.0),
            k(2.0, 0.0),
        )
        .unwrap();
        assert!((flat.distance_to_interface([1.0, 1.5]) - 1.2).abs() < 1e-12);
        assert!((flat.distance_to_interface([-3.0, -0.5]) - 0.8).abs() < 1e-12);

        let wavy = Scene::new(
            Profile::Sinusoid {
                amplitude: 0.5,
                wavenumber: 1.0,
                phase: 0.0,
            },
            None,
            2.0,
            8.0,
            k(4.0, 0.0),
            k(2.0, 0.0),
        )
        .unwrap();
        // Directly above a crest (x1 = pi/2, f = 0.5) the nearest point is
        // the crest itself since it is a local maximum.
        let d = wavy.distance_to_interface([std::f64::consts::FRAC_PI_2, 1.4]);
        assert!((d - 0.9).abs() < 1e-10, "crest distance {d}");
        // Brute-force check at a generic point.
        let p = [0.7, 1.1];
        let mut brute = f64::INFINITY;
        for i in 0..200000 {
            let s = -8.0 + 16.0 * i as f64 / 200000.0;
            let d2 = (s - p[0]).powi(2) + (wavy.f(s) - p[1]).powi(2);
            brute = brute.min(d2.sqrt());
        }
        assert!((wavy.distance_to_interface(p) - brute).abs() < 1e-6);
    }

    #[test]
    fn accepts_buried_obstacle() {
        let ob = Obstacle::sound_soft(ObstacleCurve::Circle {
            center: [0.0, -1.0],
            radius: 0.4,
        });
        let s = Scene::new(
            Profile::Sinusoid {
                amplitude: 0.3,
                wavenumber: 1.0,
                phase: 0.0,
            },
            Some(ob),
            2.0,
            8.0,
            k(4.0, 0.0),
            k(2.0, 0.5),
        );
        assert!(s.is_ok());
    }
}
