//! Buried obstacle curves and their boundary-condition partition.
//!
//! An obstacle is a smooth simple closed curve parameterized on `[0, 2π)`,
//! traversed counterclockwise, together with a partition of its boundary
//! into coated arcs (impedance condition with coefficient `beta`) and the
//! complementary sound-soft remainder (homogeneous Dirichlet).

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Parameterized closed curve families for the obstacle boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObstacleCurve {
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    Ellipse {
        center: [f64; 2],
        semi_x: f64,
        semi_y: f64,
        /// Rotation angle of the `semi_x` axis, radians.
        rotation: f64,
    },
    /// The classic concave test shape
    /// `(cos t + 0.65 cos 2t - 0.65, 1.5 sin t)`, scaled and shifted.
    Kite {
        center: [f64; 2],
        scale: f64,
    },
}

impl ObstacleCurve {
    /// Position at parameter `t` (counterclockwise).
    pub fn point(&self, t: f64) -> [f64; 2] {
        match self {
            ObstacleCurve::Circle { center, radius } => {
                [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
            }
            ObstacleCurve::Ellipse {
                center,
                semi_x,
                semi_y,
                rotation,
            } => {
                let (lx, ly) = (semi_x * t.cos(), semi_y * t.sin());
                let (c, s) = (rotation.cos(), rotation.sin());
                [center[0] + c * lx - s * ly, center[1] + s * lx + c * ly]
            }
            ObstacleCurve::Kite { center, scale } => [
                center[0] + scale * (t.cos() + 0.65 * (2.0 * t).cos() - 0.65),
                center[1] + scale * 1.5 * t.sin(),
            ],
        }
    }

    /// First derivative of `point` with respect to `t`.
    pub fn velocity(&self, t: f64) -> [f64; 2] {
        match self {
            ObstacleCurve::Circle { radius, .. } => [-radius * t.sin(), radius * t.cos()],
            ObstacleCurve::Ellipse {
                semi_x,
                semi_y,
                rotation,
                ..
            } => {
                let (lx, ly) = (-semi_x * t.sin(), semi_y * t.cos());
                let (c, s) = (rotation.cos(), rotation.sin());
                [c * lx - s * ly, s * lx + c * ly]
            }
            ObstacleCurve::Kite { scale, .. } => [
                scale * (-t.sin() - 1.3 * (2.0 * t).sin()),
                scale * 1.5 * t.cos(),
            ],
        }
    }

    /// Second derivative of `point` with respect to `t`.
    pub fn acceleration(&self, t: f64) -> [f64; 2] {
        match self {
            ObstacleCurve::Circle { radius, .. } => [-radius * t.cos(), -radius * t.sin()],
            ObstacleCurve::Ellipse {
                semi_x,
                semi_y,
                rotation,
                ..
            } => {
                let (lx, ly) = (-semi_x * t.cos(), -semi_y * t.sin());
                let (c, s) = (rotation.cos(), rotation.sin());
                [c * lx - s * ly, s * lx + c * ly]
            }
            ObstacleCurve::Kite { scale, .. } => [
                scale * (-t.cos() - 2.6 * (2.0 * t).cos()),
                -scale * 1.5 * t.sin(),
            ],
        }
    }

    /// Unit normal pointing out of the obstacle (to the right of the
    /// counterclockwise velocity).
    pub fn outward_normal(&self, t: f64) -> [f64; 2] {
        let v = self.velocity(t);
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        [v[1] / n, -v[0] / n]
    }

    /// Axis-aligned bounding box `(min, max)` from a dense parameter scan.
    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let n = 2048;
        for i in 0..n {
            let p = self.point(TAU * i as f64 / n as f64);
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    /// Point-in-obstacle test by winding of the sampled polygon.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        // Even-odd crossing test on a fine polygonal approximation. The
        // curves here are smooth with bounded curvature, so 1024 segments
        // resolve them far beyond mesh accuracy.
        let n = 1024;
        let mut inside = false;
        let mut a = self.point(0.0);
        for i in 1..=n {
            let b = self.point(TAU * i as f64 / n as f64);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x_cross = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x_cross {
                    inside = !inside;
                }
            }
            a = b;
        }
        inside
    }

    /// Nearest-point projection: returns `(t, q, signed_dist)` where `q` is
    /// the closest curve point and the distance is negative inside.
    pub fn project(&self, p: [f64; 2]) -> (f64, [f64; 2], f64) {
        // Coarse scan, then Newton on g(t) = (p - x(t)) . x'(t) = 0.
        let n = 256;
        let mut best_t = 0.0;
        let mut best_d2 = f64::INFINITY;
        for i in 0..n {
            let t = TAU * i as f64 / n as f64;
            let q = self.point(t);
            let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            if d2 < best_d2 {
                best_d2 = d2;
                best_t = t;
            }
        }
        let mut t = best_t;
        for _ in 0..30 {
            let q = self.point(t);
            let v = self.velocity(t);
            let a = self.acceleration(t);
            let r = [p[0] - q[0], p[1] - q[1]];
            let g = r[0] * v[0] + r[1] * v[1];
            let dg = -(v[0] * v[0] + v[1] * v[1]) + r[0] * a[0] + r[1] * a[1];
            if dg.abs() < 1e-300 {
                break;
            }
            let step = g / dg;
            t -= step;
            if step.abs() < 1e-14 {
                break;
            }
        }
        t = t.rem_euclid(TAU);
        let q = self.point(t);
        let dist = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        let sign = if self.contains(p) { -1.0 } else { 1.0 };
        (t, q, sign * dist)
    }

    /// Smallest geometric feature size: the minimum radius of curvature,
    /// capped by half the smaller bounding-box extent. Meshes must resolve
    /// this scale for the snapped boundary to stay embedded.
    pub fn min_feature(&self) -> f64 {
        let mut max_kappa: f64 = 0.0;
        let n = 1024;
        for i in 0..n {
            let t = TAU * i as f64 / n as f64;
            let v = self.velocity(t);
            let a = self.acceleration(t);
            let speed2 = v[0] * v[0] + v[1] * v[1];
            let kappa = (v[0] * a[1] - v[1] * a[0]).abs() / speed2.powf(1.5);
            max_kappa = max_kappa.max(kappa);
        }
        let (lo, hi) = self.bbox();
        let half_min_extent = 0.5 * (hi[0] - lo[0]).min(hi[1] - lo[1]);
        (1.0 / max_kappa).min(half_min_extent)
    }

    /// Perimeter by composite trapezoid on `|x'(t)|` (spectrally accurate
    /// for these smooth periodic integrands).
    pub fn perimeter(&self) -> f64 {
        let n = 4096;
        let mut s = 0.0;
        for i in 0..n {
            let v = self.velocity(TAU * i as f64 / n as f64);
            s += (v[0] * v[0] + v[1] * v[1]).sqrt();
        }
        s * TAU / n as f64
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            ObstacleCurve::Circle { radius, .. } => *radius > 0.0,
            ObstacleCurve::Ellipse {
                semi_x, semi_y, ..
            } => *semi_x > 0.0 && *semi_y > 0.0,
            ObstacleCurve::Kite { scale, .. } => *scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::geometry(format!(
                "obstacle curve has non-positive size parameters: {self:?}"
            )))
        }
    }
}

/// A parameter-space arc `[t_start, t_end)` carrying an impedance
/// coefficient `beta`. Arcs may wrap once past `2π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoatedArc {
    pub t_start: f64,
    pub t_end: f64,
    pub beta: f64,
}

/// Obstacle boundary = coated arcs (impedance) plus sound-soft remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    #[serde(flatten)]
    pub curve: ObstacleCurve,
    #[serde(default)]
    pub coated: Vec<CoatedArc>,
}

impl Obstacle {
    /// Entirely sound-soft obstacle (homogeneous Dirichlet boundary).
    pub fn sound_soft(curve: ObstacleCurve) -> Self {
        Obstacle {
            curve,
            coated: Vec::new(),
        }
    }

    /// Entirely coated obstacle with a single impedance coefficient.
    pub fn fully_coated(curve: ObstacleCurve, beta: f64) -> Self {
        Obstacle {
            curve,
            coated: vec![CoatedArc {
                t_start: 0.0,
                t_end: TAU,
                beta,
            }],
        }
    }

    /// Impedance coefficient at parameter `t`, or `None` on the sound-soft
    /// part.
    pub fn beta_at(&self, t: f64) -> Option<f64> {
        let t = t.rem_euclid(TAU);
        for arc in &self.coated {
            let s = arc.t_start;
            let e = arc.t_end;
            if (t >= s && t < e) || (t + TAU >= s && t + TAU < e) {
                return Some(arc.beta);
            }
        }
        None
    }

    /// Arc length of the coated part.
    pub fn coated_length(&self) -> f64 {
        let n = 4096;
        let mut s = 0.0;
        for i in 0..n {
            let t = TAU * i as f64 / n as f64;
            if self.beta_at(t).is_some() {
                let v = self.curve.velocity(t);
                s += (v[0] * v[0] + v[1] * v[1]).sqrt();
            }
        }
        s * TAU / n as f64
    }

    /// Checks arc sanity: ordered endpoints, wrap at most once, pairwise
    /// disjoint coverage, nonnegative impedance.
    pub fn validate(&self) -> Result<()> {
        self.curve.validate()?;
        for arc in &self.coated {
            if !(arc.t_end > arc.t_start) {
                return Err(Error::geometry(format!(
                    "coated arc has empty or reversed parameter range \
                     [{}, {})",
                    arc.t_start, arc.t_end
                )));
            }
            if arc.t_start < 0.0 || arc.t_start >= TAU || arc.t_end > arc.t_start + TAU {
                return Err(Error::geometry(
                    "coated arc must start in [0, 2π) and span at most one full turn".to_string(),
                ));
            }
            if !(arc.beta >= 0.0) || !arc.beta.is_finite() {
                return Err(Error::geometry(format!(
                    "impedance coefficient must be finite and >= 0, got {}",
                    arc.beta
                )));
            }
        }
        // Pairwise-disjointness via midpoint membership of each arc in the
        // others (arcs are half-open, so shared endpoints are fine).
        for (i, a) in self.coated.iter().enumerate() {
            for b in self.coated.iter().skip(i + 1) {
                let probes = [
                    a.t_start,
                    0.5 * (a.t_start + a.t_end),
                    b.t_start,
                    0.5 * (b.t_start + b.t_end),
                ];
                for &t in &probes {
                    let t = t.rem_euclid(TAU);
                    let in_a = (t >= a.t_start && t < a.t_end)
                        || (t + TAU >= a.t_start && t + TAU < a.t_end);
                    let in_b = (t >= b.t_start && t < b.t_end)
                        || (t + TAU >= b.t_start && t + TAU < b.t_end);
                    if in_a && in_b {
                        return Err(Error::geometry(
                            "coated arcs overlap; the boundary partition must be disjoint"
                                .to_string(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// True when some coated arc has strictly positive length and `beta > 0`
    /// (the condition under which coated dissipation is active).
    pub fn has_active_coating(&self) -> bool {
        self.coated
            .iter()
            .any(|a| a.t_end > a.t_start && a.beta > 0.0)
    }

    /// True when any part of the boundary is sound-soft.
    pub fn has_sound_soft_part(&self) -> bool {
        let covered: f64 = self.coated.iter().map(|a| a.t_end - a.t_start).sum();
        covered < TAU - 1e-12
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const CURVES: [ObstacleCurve; 3] = [
        ObstacleCurve::Circle {
            center: [0.3, -1.2],
            radius: 0.5,
        },
        ObstacleCurve::Ellipse {
            center: [-0.2, -1.5],
            semi_x: 0.6,
            semi_y: 0.3,
            rotation: 0.4,
        },
        ObstacleCurve::Kite {
            center: [0.1, -1.4],
            scale: 0.35,
        },
    ];

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for curve in &CURVES {
            for i in 0..17 {
                let t = TAU * i as f64 / 17.0;
                for d in 0..2 {
                    let v_fd =
                        (curve.point(t + h)[d] - curve.point(t - h)[d]) / (2.0 * h);
                    assert!((curve.velocity(t)[d] - v_fd).abs() < 1e-8);
                    let a_fd = (curve.point(t + h)[d] - 2.0 * curve.point(t)[d]
                        + curve.point(t - h)[d])
                        / (h * h);
                    assert!((curve.acceleration(t)[d] - a_fd).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn normal_points_outward() {
        for curve in &CURVES {
            for i in 0..32 {
                let t = TAU * i as f64 / 32.0;
                let p = curve.point(t);
                let n = curve.outward_normal(t);
                let eps = 1e-3;
                assert!(!curve.contains([p[0] + eps * n[0], p[1] + eps * n[1]]));
                assert!(curve.contains([p[0] - eps * n[0], p[1] - eps * n[1]]));
            }
        }
    }

    #[test]
    fn containment_matches_geometry_for_circle() {
        let c = &CURVES[0];
        assert!(c.contains([0.3, -1.2]));
        assert!(c.contains([0.3 + 0.49, -1.2]));
        assert!(!c.contains([0.3 + 0.51, -1.2]));
        assert!(!c.contains([5.0, 5.0]));
    }

    #[test]
    fn projection_recovers_distance_to_circle() {
        let c = &CURVES[0];
        let (_, q, d) = c.project([0.3, -0.2]);
        assert!((d - 0.5).abs() < 1e-10);
        assert!((q[0] - 0.3).abs() < 1e-8 && (q[1] + 0.7).abs() < 1e-8);
        let (_, _, d_in) = c.project([0.3, -1.1]);
        assert!((d_in + 0.4).abs() < 1e-10); // inside: negative
    }

    #[test]
    fn projection_lands_on_curve_for_all_families() {
        for curve in &CURVES {
            let probes = [
                [0.0, -0.6],
                [1.2, -1.8],
                [-1.0, -1.0],
                [0.2, -2.2],
            ];
            for p in probes {
                let (t, q, d) = curve.project(p);
                let q2 = curve.point(t);
                assert!((q[0] - q2[0]).abs() < 1e-12);
                // q must be a stationary point of the distance: residual of
                // the normal equation near zero.
                let v = curve.velocity(t);
                let r = [p[0] - q[0], p[1] - q[1]];
                let g = r[0] * v[0] + r[1] * v[1];
                assert!(
                    g.abs() < 1e-8 * (1.0 + d.abs()),
                    "projection not stationary: g = {g}"
                );
                // Signed distance consistent with containment.
                assert_eq!(d < 0.0, curve.contains(p));
            }
        }
    }

    #[test]
    fn perimeter_of_circle_is_exact() {
        let c = ObstacleCurve::Circle {
            center: [0.0, -1.0],
            radius: 0.5,
        };
        assert!((c.perimeter() - PI).abs() < 1e-12);
    }

    #[test]
    fn min_feature_of_circle_is_radius() {
        let c = ObstacleCurve::Circle {
            center: [0.0, -1.0],
            radius: 0.5,
        };
        assert!((c.min_feature() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn beta_lookup_respects_arcs_and_wrap() {
        let ob = Obstacle {
            curve: CURVES[0].clone(),
            coated: vec![
                CoatedArc {
                    t_start: 0.3,
                    t_end: PI,
                    beta: 2.0,
                },
                CoatedArc {
                    t_start: 5.5,
                    t_end: TAU + 0.2,
                    beta: 3.0,
                },
            ],
        };
        ob.validate().unwrap();
        assert_eq!(ob.beta_at(1.0), Some(2.0));
        assert_eq!(ob.beta_at(4.0), None);
        assert_eq!(ob.beta_at(6.0), Some(3.0));
        assert_eq!(ob.beta_at(0.1), Some(3.0)); // wrapped tail
        assert_eq!(ob.beta_at(0.25), None); // gap between tail and next arc
        assert_eq!(ob.beta_at(0.35), Some(2.0));
        assert!(ob.has_active_coating());
        assert!(ob.has_sound_soft_part());
    }

    #[test]
    fn overlapping_arcs_rejected() {
        let ob = Obstacle {
            curve: CURVES[0].clone(),
            coated: vec![
                CoatedArc {
                    t_start: 0.0,
                    t_end: 2.0,
                    beta: 1.0,
                },
                CoatedArc {
                    t_start: 1.5,
                    t_end: 3.0,
                    beta: 1.0,
                },
            ],
        };
        assert!(ob.validate().is_err());
    }

    #[test]
    fn coated_length_of_half_circle() {
        let ob = Obstacle {
            curve: ObstacleCurve::Circle {
                center: [0.0, -1.0],
                radius: 0.5,
            },
            coated: vec![CoatedArc {
                t_start: 0.0,
                t_end: PI,
                beta: 1.0,
            }],
        };
        assert!((ob.coated_length() - 0.5 * PI).abs() < 1e-3);
    }

    #[test]
    fn fully_coated_covers_everything() {
        let ob = Obstacle::fully_coated(CURVES[2].clone(), 1.5);
        ob.validate().unwrap();
        assert!(!ob.has_sound_soft_part());
        for i in 0..64 {
            assert_eq!(ob.beta_at(TAU * i as f64 / 64.0), Some(1.5));
        }
    }
}
