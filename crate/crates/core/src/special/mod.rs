//! Special functions: the branch-cut square root used by every spectral
//! multiplier in the crate, Bessel/Hankel functions of orders 0 and 1 for
//! complex argument, and the closed-form point-source fields (free-space,
//! half-plane, and the lateral derivative of the half-plane source).

mod bessel;
mod branch;
mod greens;

pub use bessel::{bessel_j0, bessel_j1, bessel_y0, bessel_y1, hankel1_0, hankel1_1, j1_over_z};
pub use branch::branch_sqrt;
pub use greens::{
    fundamental_solution, grad_fundamental_solution, grad_halfplane_green, grad_hspsw_field,
    halfplane_green, hspsw_field,
};
