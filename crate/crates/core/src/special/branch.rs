use crate::Complex;

/// Square root with the branch cut along the negative imaginary axis.
///
/// For `z = z1 + i z2` this returns
///
/// ```text
/// sqrt(z) = sgn(z2) * sqrt((|z| + z1)/2) + i * sqrt((|z| - z1)/2),
/// ```
///
/// with `sgn(0) := +1`, i.e. the root whose argument lies in
/// `[-pi/4 .. 3pi/4)` — equivalently `arg z` is measured in `[-pi/2, 3pi/2)`.
/// Consequences relied on elsewhere:
///
/// * `Im branch_sqrt(z) >= 0` for every `z` (radiating/evanescent modes never
///   grow with distance), and `Re branch_sqrt(z) >= 0` when `Im z >= 0`;
/// * the map is continuous across the negative *real* axis, so vertical
///   wavenumbers `sqrt(k^2 - xi^2)` vary continuously through cutoff when
///   `xi` sweeps along the real axis.
///
/// The two half-formulas below avoid the cancellation in `|z| ± z1` when
/// `z` sits close to the real axis.
pub fn branch_sqrt(z: Complex) -> Complex {
    let r = z.norm();
    if r == 0.0 {
        return Complex::new(0.0, 0.0);
    }
    let sign = if z.im < 0.0 { -1.0 } else { 1.0 };
    let (p, q) = if z.re >= 0.0 {
        let p = ((r + z.re) / 2.0).sqrt();
        let q = if p > 0.0 { z.im.abs() / (2.0 * p) } else { 0.0 };
        (p, q)
    } else {
        let q = ((r - z.re) / 2.0).sqrt();
        let p = if q > 0.0 { z.im.abs() / (2.0 * q) } else { 0.0 };
        (p, q)
    };
    Complex::new(sign * p, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn matches_hand_values() {
        // Positive real axis.
        let s = branch_sqrt(Complex::new(4.0, 0.0));
        assert_relative_eq!(s.re, 2.0, max_relative = 1e-15);
        assert_eq!(s.im, 0.0);
        // Negative real axis: continuous, lands on +i side.
        let s = branch_sqrt(Complex::new(-9.0, 0.0));
        assert_relative_eq!(s.im, 3.0, max_relative = 1e-15);
        assert_eq!(s.re, 0.0);
        // +i and -i.
        let s = branch_sqrt(Complex::new(0.0, 1.0));
        assert_relative_eq!(s.re, 0.5f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(s.im, 0.5f64.sqrt(), max_relative = 1e-14);
        let s = branch_sqrt(Complex::new(0.0, -1.0));
        assert_relative_eq!(s.re, -(0.5f64.sqrt()), max_relative = 1e-14);
        assert_relative_eq!(s.im, 0.5f64.sqrt(), max_relative = 1e-14);
        // Zero.
        assert_eq!(branch_sqrt(Complex::new(0.0, 0.0)), Complex::new(0.0, 0.0));
    }

    #[test]
    fn continuous_across_negative_real_axis() {
        let above = branch_sqrt(Complex::new(-4.0, 1e-12));
        let below = branch_sqrt(Complex::new(-4.0, -1e-12));
        assert!((above - below).norm() < 1e-9);
    }

    #[test]
    fn continuous_across_negative_imaginary_axis() {
        // With the imaginary part kept nonnegative, the root passes through
        // the lower half-plane without a jump...
        let right = branch_sqrt(Complex::new(1e-12, -4.0));
        let left = branch_sqrt(Complex::new(-1e-12, -4.0));
        assert!((right - left).norm() < 1e-9);
        assert!(right.norm() > 1.0);
    }

    #[test]
    fn jump_sits_below_the_positive_real_axis() {
        // ... so the sign change happens approaching the positive real axis
        // from below, a region that squared wavenumbers with nonnegative
        // imaginary part never produce.
        let above = branch_sqrt(Complex::new(4.0, 1e-12));
        let below = branch_sqrt(Complex::new(4.0, -1e-12));
        assert!((above + below).norm() < 1e-9);
        // Limits from above agree with the on-axis value.
        assert!((above - branch_sqrt(Complex::new(4.0, 0.0))).norm() < 1e-9);
    }

    proptest! {
        #[test]
        fn squares_back(re in -100.0f64..100.0, im in -100.0f64..100.0) {
            let z = Complex::new(re, im);
            let s = branch_sqrt(z);
            let back = s * s;
            prop_assert!((back - z).norm() <= 1e-12 * z.norm().max(1.0));
        }

        #[test]
        fn imaginary_part_nonnegative(re in -100.0f64..100.0, im in -100.0f64..100.0) {
            let s = branch_sqrt(Complex::new(re, im));
            prop_assert!(s.im >= 0.0);
        }

        #[test]
        fn upper_half_plane_matches_principal(re in -100.0f64..100.0, im in 0.0f64..100.0) {
            let z = Complex::new(re, im);
            let ours = branch_sqrt(z);
            let principal = z.sqrt();
            prop_assert!((ours - principal).norm() <= 1e-12 * principal.norm().max(1e-12));
        }
    }
}
