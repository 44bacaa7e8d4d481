//! Quadrature rules used by the assembly: a degree-5 triangle rule for
//! volume right-hand sides, Gauss-Legendre line rules, and a polar disk
//! rule for source patches.

use std::f64::consts::TAU;

/// Barycentric points and weights; weights sum to one, so integrals are
/// `area * sum(w_q * f(x_q))`.
pub struct TriQuadrature {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Seven-point rule, exact through polynomial degree five.
pub fn tri_quadrature_deg5() -> TriQuadrature {
    let s15 = 15.0_f64.sqrt();
    let a = (6.0 - s15) / 21.0;
    let b = (6.0 + s15) / 21.0;
    let wa = (155.0 - s15) / 1200.0;
    let wb = (155.0 + s15) / 1200.0;
    let mut points = vec![[1.0 / 3.0; 3]];
    let mut weights = vec![9.0 / 40.0];
    for &(c, w) in &[(a, wa), (b, wb)] {
        let d = 1.0 - 2.0 * c;
        points.push([d, c, c]);
        points.push([c, d, c]);
        points.push([c, c, d]);
        weights.extend_from_slice(&[w, w, w]);
    }
    TriQuadrature { points, weights }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Newton was seeded in descending order; return ascending.
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Quadrature points and weights for a disk of radius `delta` centered at
/// `center`: Gauss-Legendre in the squared-radius variable (`r = delta
/// sqrt(u)` absorbs the polar Jacobian exactly) crossed with the trapezoid
/// rule in angle. Weights sum to the disk area.
pub fn disk_quadrature(
    center: [f64; 2],
    delta: f64,
    n_radial: usize,
    n_angular: usize,
) -> Vec<([f64; 2], f64)> {
    let (gl_nodes, gl_weights) = gauss_legendre(n_radial);
    let mut out = Vec::with_capacity(n_radial * n_angular);
    let w_theta = TAU / n_angular as f64;
    for (u_raw, wu) in gl_nodes.iter().zip(&gl_weights) {
        let u = 0.5 * (u_raw + 1.0); // map [-1,1] -> [0,1]
        let r = delta * u.sqrt();
        let w_r = 0.5 * wu * delta * delta / 2.0;
        for j in 0..n_angular {
            let th = w_theta * j as f64;
            out.push((
                [center[0] + r * th.cos(), center[1] + r * th.sin()],
                w_r * w_theta,
            ));
        }
    }
    out
}

/// `integral of hat_i * hat_j` over a segment of length `len`:
/// `len/3` on the diagonal, `len/6` off it.
pub fn edge_mass(len: f64) -> [[f64; 2]; 2] {
    [[len / 3.0, len / 6.0], [len / 6.0, len / 3.0]]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of `l0^a l1^b l2^c` over the reference triangle with
    /// area 1/2: `a! b! c! / (a+b+c+2)! * 2 * area` -- with area folded out
    /// since our weights are normalized.
    fn exact_bary_monomial(a: u32, b: u32, c: u32) -> f64 {
        let fact = |m: u32| (1..=m as u64).product::<u64>() as f64;
        2.0 * fact(a) * fact(b) * fact(c) / fact(a + b + c + 2)
    }

    #[test]
    fn triangle_rule_exact_through_degree_five() {
        let q = tri_quadrature_deg5();
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                for c in 0..=(5 - a - b) {
                    if a + b + c > 5 {
                        continue;
                    }
                    let num: f64 = q
                        .points
                        .iter()
                        .zip(&q.weights)
                        .map(|(l, w)| {
                            w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32)
                        })
                        .sum();
                    let exact = exact_bary_monomial(a, b, c);
                    assert!(
                        (num - exact).abs() < 1e-14,
                        "monomial ({a},{b},{c}): {num} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        // Degree 15 is exact for an 8-point rule.
        for deg in 0..=15usize {
            let num: f64 = x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| wi * xi.powi(deg as i32))
                .sum();
            let exact = if deg % 2 == 1 {
                0.0
            } else {
                2.0 / (deg as f64 + 1.0)
            };
            assert!((num - exact).abs() < 1e-13, "degree {deg}: {num} vs {exact}");
        }
        // Nodes ascending and symmetric.
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        assert!((x[0] + x[7]).abs() < 1e-14);
    }

    #[test]
    fn disk_rule_integrates_smooth_functions() {
        let pts = disk_quadrature([0.4, -0.2], 0.7, 24, 48);
        let area: f64 = pts.iter().map(|(_, w)| w).sum();
        assert!((area - std::f64::consts::PI * 0.49).abs() < 1e-12);
        // Odd moments about the center vanish by symmetry.
        let m1: f64 = pts.iter().map(|(p, w)| w * (p[0] - 0.4)).sum();
        assert!(m1.abs() < 1e-13);
        // Radial polynomial: integral of r^2 over disk = pi delta^4 / 2.
        let m2: f64 = pts
            .iter()
            .map(|(p, w)| w * ((p[0] - 0.4).powi(2) + (p[1] + 0.2).powi(2)))
            .sum();
        assert!((m2 - std::f64::consts::PI * 0.7f64.powi(4) / 2.0).abs() < 1e-12);
        // A genuinely 2D smooth integrand: plane wave over the disk, against
        // a brute-force Cartesian reference.
        let f = |p: [f64; 2]| (3.1 * p[0] - 1.7 * p[1]).cos();
        let num: f64 = pts.iter().map(|(p, w)| w * f(*p)).sum();
        let mut reference = 0.0;
        let n = 2000;
        let step = 1.4 / n as f64;
        for i in 0..n {
            for j in 0..n {
                let p = [
                    0.4 - 0.7 + (i as f64 + 0.5) * step,
                    -0.2 - 0.7 + (j as f64 + 0.5) * step,
                ];
                if (p[0] - 0.4).powi(2) + (p[1] + 0.2).powi(2) <= 0.49 {
                    reference += step * step * f(p);
                }
            }
        }
        assert!(
            (num - reference).abs() < 2e-3 * reference.abs().max(1.0),
            "{num} vs {reference}"
        );
    }
}
