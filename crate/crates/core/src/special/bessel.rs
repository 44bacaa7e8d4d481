//! Bessel and Hankel functions of orders 0 and 1 for complex argument.
//!
//! Power series are used for `|z| <= 12` and the large-argument Hankel
//! expansions beyond. At the crossover both sides deliver ~1e-11 relative
//! accuracy in f64: the alternating series loses ~5 digits to cancellation
//! at `|z| = 12`, while the smallest term of the divergent asymptotic series
//! is ~e^{-2|z|}. Pushing the crossover lower would make the asymptotic side
//! worse than 1e-10, which is the accuracy the rest of the crate assumes.
//!
//! Supported domain: `Re z >= 0` (arguments here are `k * r` with `Re k > 0`,
//! `Im k >= 0`, `r > 0`). `Y` and Hankel functions require `z != 0`.

use crate::Complex;

/// Series/asymptotic crossover radius.
const CROSSOVER: f64 = 12.0;

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const FRAC_2_PI: f64 = core::f64::consts::FRAC_2_PI;

/// Bessel function J0.
pub fn bessel_j0(z: Complex) -> Complex {
    if z.norm() <= CROSSOVER {
        j0_series(z)
    } else {
        let (h1, h2) = hankel_pair(0, z);
        0.5 * (h1 + h2)
    }
}

/// Bessel function J1.
pub fn bessel_j1(z: Complex) -> Complex {
    if z.norm() <= CROSSOVER {
        j1_series(z)
    } else {
        let (h1, h2) = hankel_pair(1, z);
        0.5 * (h1 + h2)
    }
}

/// Bessel function Y0 (`z != 0`).
pub fn bessel_y0(z: Complex) -> Complex {
    if z.norm() <= CROSSOVER {
        y0_series(z)
    } else {
        let (h1, h2) = hankel_pair(0, z);
        (h1 - h2) / Complex::new(0.0, 2.0)
    }
}

/// Bessel function Y1 (`z != 0`).
pub fn bessel_y1(z: Complex) -> Complex {
    if z.norm() <= CROSSOVER {
        y1_series(z)
    } else {
        let (h1, h2) = hankel_pair(1, z);
        (h1 - h2) / Complex::new(0.0, 2.0)
    }
}

/// Hankel function of the first kind, order 0: `J0 + i Y0`.
pub fn hankel1_0(z: Complex) -> Complex {
    if z.norm() <= CROSSOVER {
        j0_series(z) + Complex::i() * y0_series(z)
    } else {
        hankel_pair(0, z).0
    }
}

/// Hankel function of the first kind, order 1: `J1 + i Y1`.
pub fn hankel1_1(z: Complex) -> Complex {
    if z.norm() <= CROSSOVER {
        j1_series(z) + Complex::i() * y1_series(z)
    } else {
        hankel_pair(1, z).0
    }
}

/// `J1(z)/z`, finite at `z = 0` (limit 1/2). Used by the smoothed dipole
/// patch, whose radial factor is `J1(k r)/(k r)` times a linear function.
pub fn j1_over_z(z: Complex) -> Complex {
    if z.norm() <= CROSSOVER {
        // (1/2) * sum_m (-q)^m / (m! (m+1)!), q = z^2/4.
        let q = z * z * 0.25;
        let mut term = Complex::new(0.5, 0.0);
        let mut sum = term;
        for m in 1..200 {
            term *= -q / ((m * (m + 1)) as f64);
            sum += term;
            if term.norm() <= 1e-17 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        bessel_j1(z) / z
    }
}

fn j0_series(z: Complex) -> Complex {
    let q = z * z * 0.25;
    let mut term = Complex::new(1.0, 0.0);
    let mut sum = term;
    for m in 1..200 {
        term *= -q / ((m * m) as f64);
        sum += term;
        if term.norm() <= 1e-17 * sum.norm().max(1e-30) {
            break;
        }
    }
    sum
}

fn j1_series(z: Complex) -> Complex {
    0.5 * z
        * {
            let q = z * z * 0.25;
            let mut term = Complex::new(1.0, 0.0);
            let mut sum = term;
            for m in 1..200 {
                term *= -q / ((m * (m + 1)) as f64);
                sum += term;
                if term.norm() <= 1e-17 * sum.norm().max(1e-30) {
                    break;
                }
            }
            sum
        }
}

fn y0_series(z: Complex) -> Complex {
    debug_assert!(z.norm() > 0.0, "Y0 requires z != 0");
    let q = z * z * 0.25;
    // sum_{m>=1} (-1)^{m+1} H_m q^m / (m!)^2
    let mut term = Complex::new(1.0, 0.0); // running (-1)^m q^m/(m!)^2
    let mut harmonic = 0.0;
    let mut sum = Complex::new(0.0, 0.0);
    for m in 1..200 {
        term *= -q / ((m * m) as f64); // (-1)^m q^m/(m!)^2
        harmonic += 1.0 / m as f64;
        let contribution = -term * harmonic; // (-1)^{m+1} H_m q^m/(m!)^2
        sum += contribution;
        if contribution.norm() <= 1e-17 * sum.norm().max(1e-30) {
            break;
        }
    }
    FRAC_2_PI * (((z * 0.5).ln() + EULER_GAMMA) * j0_series(z) + sum)
}

fn y1_series(z: Complex) -> Complex {
    debug_assert!(z.norm() > 0.0, "Y1 requires z != 0");
    let q = z * z * 0.25;
    // sum_{k>=0} (psi(k+1) + psi(k+2)) (-q)^k / (k! (k+1)!),
    // psi(k+1) = -gamma + H_k.
    let mut term = Complex::new(1.0, 0.0); // (-q)^k / (k!(k+1)!)
    let mut h_k = 0.0;
    let mut h_k1 = 1.0;
    let mut sum = term * (-2.0 * EULER_GAMMA + h_k + h_k1);
    for k in 1..200 {
        term *= -q / ((k * (k + 1)) as f64);
        h_k += 1.0 / k as f64;
        h_k1 += 1.0 / (k + 1) as f64;
        let contribution = term * (-2.0 * EULER_GAMMA + h_k + h_k1);
        sum += contribution;
        if contribution.norm() <= 1e-17 * sum.norm().max(1e-30) {
            break;
        }
    }
    -2.0 / (core::f64::consts::PI * z) + FRAC_2_PI * (z * 0.5).ln() * j1_series(z)
        - z / (2.0 * core::f64::consts::PI) * sum
}

/// Large-argument Hankel pair `(H^(1)_nu, H^(2)_nu)` via the asymptotic
/// expansions, truncated adaptively at the smallest term.
fn hankel_pair(nu: u32, z: Complex) -> (Complex, Complex) {
    let nu_f = nu as f64;
    let omega = z - (nu_f * 0.5 + 0.25) * core::f64::consts::PI;
    // Principal sqrt is fine away from the negative real axis.
    let prefactor = (FRAC_2_PI / z).sqrt();
    let four_nu_sq = 4.0 * nu_f * nu_f;

    let mut sum1 = Complex::new(1.0, 0.0);
    let mut sum2 = Complex::new(1.0, 0.0);
    let mut term1 = Complex::new(1.0, 0.0);
    let mut term2 = Complex::new(1.0, 0.0);
    let mut prev_norm = f64::INFINITY;
    for k in 1..40u32 {
        let factor = (four_nu_sq - ((2 * k - 1) as f64).powi(2)) / (8.0 * k as f64);
        term1 *= Complex::i() * factor / z;
        term2 *= -Complex::i() * factor / z;
        let n = term1.norm();
        if n >= prev_norm {
            // Divergent tail reached; stop before it degrades the sum.
            break;
        }
        sum1 += term1;
        sum2 += term2;
        prev_norm = n;
        if n <= 1e-17 * sum1.norm() {
            break;
        }
    }
    let e_plus = (Complex::i() * omega).exp();
    let e_minus = (-Complex::i() * omega).exp();
    (prefactor * e_plus * sum1, prefactor * e_minus * sum2)
}
