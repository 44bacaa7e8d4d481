//! Global system assembly.
//!
//! The discrete problem is: find nodal values `u` with
//!
//! ```text
//!   a(u, v) = -(g, v)   for all P1 test functions v,
//!
//!   a(u, v) = (grad u, grad v) - (k^2 u, v)
//!             - <T_top u, v>_{x2=+h} - <T_bot u, v>_{x2=-h}
//!             - i <beta u, v>_{coated obstacle arcs},
//! ```
//!
//! with homogeneous Dirichlet values eliminated on the sound-soft obstacle
//! part. `T_top`/`T_bot` are the spectral half-space maps of `dtn`; their
//! nodal blocks are dense circulants folded onto the `n + 1` trace nodes.
//! The matrix is complex symmetric (unconjugated), not Hermitian.

mod quadrature;
mod sources;

pub use quadrature::{disk_quadrature, edge_mass, gauss_legendre, tri_quadrature_deg5, TriQuadrature};
pub use sources::{rhs_point_source, PointSource, SourceKind};

use faer::sparse::{SparseColMat, Triplet};

use crate::dtn::DtnOperator;
use crate::error::Error;
use crate::geometry::{EdgeTag, Mesh, Region, Scene};
use crate::{Complex, Result};

/// Node-to-unknown mapping with Dirichlet nodes eliminated.
#[derive(Debug, Clone)]
pub struct DofMap {
    node_to_dof: Vec<Option<usize>>,
    dof_to_node: Vec<usize>,
}

impl DofMap {
    /// Builds the map for `n_nodes` nodes, eliminating `dirichlet` (sorted
    /// or not, duplicates allowed).
    pub fn new(n_nodes: usize, dirichlet: &[usize]) -> DofMap {
        let mut eliminated = vec![false; n_nodes];
        for &n in dirichlet {
            eliminated[n] = true;
        }
        let mut node_to_dof = vec![None; n_nodes];
        let mut dof_to_node = Vec::with_capacity(n_nodes);
        for (n, &gone) in eliminated.iter().enumerate() {
            if !gone {
                node_to_dof[n] = Some(dof_to_node.len());
                dof_to_node.push(n);
            }
        }
        DofMap {
            node_to_dof,
            dof_to_node,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_to_node.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.node_to_dof.len()
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        self.node_to_dof[node]
    }

    pub fn node(&self, dof: usize) -> usize {
        self.dof_to_node[dof]
    }

    /// Unknown vector -> nodal vector, zero at eliminated nodes.
    pub fn expand(&self, dofs: &[Complex]) -> Vec<Complex> {
        let mut out = vec![Complex::new(0.0, 0.0); self.node_to_dof.len()];
        for (d, &n) in self.dof_to_node.iter().enumerate() {
            out[n] = dofs[d];
        }
        out
    }

    /// Nodal vector -> unknown vector (drops eliminated entries).
    pub fn restrict(&self, nodes: &[Complex]) -> Vec<Complex> {
        self.dof_to_node.iter().map(|&n| nodes[n]).collect()
    }
}

/// Optional complex shift `k2^2 -> k2^2 + i alpha` applied on a collar of
/// elements around the obstacle (used to damp obstacle-trapped energy).
#[derive(Debug, Clone, Copy)]
pub struct AbsorbingShift {
    pub alpha: f64,
    /// Collar width, measured from the obstacle boundary.
    pub thickness: f64,
}

/// Assembled sparse system plus the operators needed for diagnostics.
pub struct AssembledSystem {
    pub matrix: SparseColMat<usize, faer::c64>,
    pub dof_map: DofMap,
    pub dtn_top: DtnOperator,
    pub dtn_bottom: DtnOperator,
    /// Element indices whose squared wavenumber was shifted (empty without
    /// an absorbing collar).
    pub annulus: Vec<usize>,
    /// Imaginary shift applied on the collar (0 without one).
    pub shift_alpha: f64,
    pub warnings: Vec<String>,
    /// Raw (row, col, value) contributions in assembly order; duplicates
    /// not summed. Kept for matrix-vector products and symmetry audits
    /// without round-tripping through the solver's storage.
    triplets: Vec<(usize, usize, Complex)>,
}

impl AssembledSystem {
    pub fn n_dofs(&self) -> usize {
        self.dof_map.n_dofs()
    }

    /// `M u` from the raw triplets (deterministic order).
    pub fn apply(&self, u: &[Complex]) -> Vec<Complex> {
        let mut out = vec![Complex::new(0.0, 0.0); self.n_dofs()];
        for &(i, j, v) in &self.triplets {
            out[i] += v * u[j];
        }
        out
    }

    pub fn raw_triplets(&self) -> &[(usize, usize, Complex)] {
        &self.triplets
    }
}

/// Assembles the sesquilinear form into a sparse complex-symmetric matrix.
pub fn assemble_system(
    scene: &Scene,
    mesh: &Mesh,
    shift: Option<AbsorbingShift>,
) -> Result<AssembledSystem> {
    let dof_map = DofMap::new(mesh.n_nodes(), &mesh.dirichlet_nodes);
    let mut warnings = scene.warnings.clone();

    let dtn_top = DtnOperator::new(scene.k1_sq, scene.half_width, mesh.n_cols)?;
    let dtn_bottom = DtnOperator::new(scene.k2_sq, scene.half_width, mesh.n_cols)?;
    if dtn_top.was_nudged() || dtn_bottom.was_nudged() {
        warnings.push(
            "a cut-off frequency coincided with a lateral mode; the spectral symbol \
             was nudged off the degeneracy"
                .to_string(),
        );
    }

    // Absorbing collar flags.
    let annulus = match shift {
        None => Vec::new(),
        Some(s) => collar_elements(scene, mesh, s)?,
    };
    let mut is_annulus = vec![false; mesh.n_elements()];
    for &e in &annulus {
        is_annulus[e] = true;
    }
    let shift_value = Complex::new(0.0, shift.map_or(0.0, |s| s.alpha));

    let mut triplets: Vec<(usize, usize, Complex)> = Vec::new();
    let add = |triplets: &mut Vec<(usize, usize, Complex)>, ni: usize, nj: usize, v: Complex| {
        if let (Some(i), Some(j)) = (dof_map.dof(ni), dof_map.dof(nj)) {
            triplets.push((i, j, v));
        }
    };

    // Volume terms: exact P1 stiffness and mass.
    for (e, tri) in mesh.elements.iter().enumerate() {
        let [p0, p1, p2] = tri.map(|v| mesh.nodes[v]);
        let area = 0.5
            * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
        if !(area > 0.0) {
            return Err(Error::mesh(format!("element {e} has nonpositive area")));
        }
        let b = [p1[1] - p2[1], p2[1] - p0[1], p0[1] - p1[1]];
        let c = [p2[0] - p1[0], p0[0] - p2[0], p1[0] - p0[0]];
        let mut k_sq = match mesh.regions[e] {
            Region::Upper => scene.k1_sq,
            Region::Lower => scene.k2_sq,
        };
        if is_annulus[e] {
            k_sq += shift_value;
        }
        for i in 0..3 {
            for j in 0..3 {
                let stiff = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
                let mass = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                add(
                    &mut triplets,
                    tri[i],
                    tri[j],
                    Complex::new(stiff, 0.0) - k_sq * mass,
                );
            }
        }
    }

    // Impedance term on coated obstacle arcs: -i beta <u, v>.
    for be in &mesh.boundary {
        if let EdgeTag::ObstacleImpedance { beta } = be.tag {
            let (p, q) = (mesh.nodes[be.nodes[0]], mesh.nodes[be.nodes[1]]);
            let len = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            let m = edge_mass(len);
            let factor = Complex::new(0.0, -beta);
            for i in 0..2 {
                for j in 0..2 {
                    add(&mut triplets, be.nodes[i], be.nodes[j], factor * m[i][j]);
                }
            }
        }
    }

    // Spectral boundary blocks: -<T u, v> on both lines, folded onto the
    // n + 1 trace nodes (the two wall corners carry weight 1/2 because the
    // periodic grid identifies them).
    for (trace, op) in [(&mesh.top_trace, &dtn_top), (&mesh.bottom_trace, &dtn_bottom)] {
        let kernel = op.weighted_kernel();
        let n = op.grid_len();
        for i in 0..=n {
            let wi = if i == 0 || i == n { 0.5 } else { 1.0 };
            for j in 0..=n {
                let wj = if j == 0 || j == n { 0.5 } else { 1.0 };
                let d = ((i % n) + n - (j % n)) % n;
                add(&mut triplets, trace[i], trace[j], -(wi * wj) * kernel[d]);
            }
        }
    }

    // Hand off to solver storage (duplicates are summed there).
    let faer_triplets: Vec<Triplet<usize, usize, faer::c64>> = triplets
        .iter()
        .map(|&(i, j, v)| Triplet::new(i, j, faer::c64::new(v.re, v.im)))
        .collect();
    let matrix = SparseColMat::try_new_from_triplets(dof_map.n_dofs(), dof_map.n_dofs(), &faer_triplets)
        .map_err(|e| Error::solver(format!("sparse assembly failed: {e:?}")))?;

    Ok(AssembledSystem {
        matrix,
        dof_map,
        dtn_top,
        dtn_bottom,
        annulus,
        shift_alpha: shift.map_or(0.0, |s| s.alpha),
        warnings,
        triplets,
    })
}

/// Elements in the absorbing collar: lower-region elements outside the
/// obstacle whose centroid is within `thickness` of the boundary, plus any
/// element with a vertex on the curve itself.
fn collar_elements(scene: &Scene, mesh: &Mesh, s: AbsorbingShift) -> Result<Vec<usize>> {
    let ob = scene.obstacle.as_ref().ok_or_else(|| {
        Error::solver("absorbing shift requested but the scene has no obstacle".to_string())
    })?;
    if !(s.alpha >= 0.0) || !(s.thickness > 0.0) {
        return Err(Error::solver(format!(
            "absorbing shift needs alpha >= 0 and thickness > 0, got alpha = {}, thickness = {}",
            s.alpha, s.thickness
        )));
    }
    let (lo, hi) = ob.curve.bbox();
    let pad = s.thickness + 2.0 * mesh.dx;
    let near = |p: [f64; 2]| {
        p[0] > lo[0] - pad && p[0] < hi[0] + pad && p[1] > lo[1] - pad && p[1] < hi[1] + pad
    };
    let mut out = Vec::new();
    for (e, tri) in mesh.elements.iter().enumerate() {
        if mesh.regions[e] != Region::Lower {
            continue;
        }
        let [p0, p1, p2] = tri.map(|v| mesh.nodes[v]);
        let cen = [
            (p0[0] + p1[0] + p2[0]) / 3.0,
            (p0[1] + p1[1] + p2[1]) / 3.0,
        ];
        if !near(cen) {
            continue;
        }
        let (_, _, d) = ob.curve.project(cen);
        let mut take = d > 0.0 && d <= s.thickness;
        if !take {
            // Keep the first ring attached even when a centroid falls just
            // past the collar: any vertex on the curve counts.
            take = tri.iter().any(|&v| {
                let (_, _, dv) = ob.curve.project(mesh.nodes[v]);
                dv.abs() < 1e-9
            });
        }
        if take {
            out.push(e);
        }
    }
    if out.is_empty() {
        return Err(Error::solver(
            "absorbing collar is empty; thickness is below the mesh scale".to_string(),
        ));
    }
    Ok(out)
}

/// `-(g, v)` for a volume source `g`, integrated with the degree-5 rule.
pub fn rhs_local_source(
    mesh: &Mesh,
    dof_map: &DofMap,
    g: impl Fn([f64; 2]) -> Complex,
) -> Vec<Complex> {
    let quad = tri_quadrature_deg5();
    let mut rhs = vec![Complex::new(0.0, 0.0); dof_map.n_dofs()];
    for tri in &mesh.elements {
        let [p0, p1, p2] = tri.map(|v| mesh.nodes[v]);
        let area = 0.5
            * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
        for (l, w) in quad.points.iter().zip(&quad.weights) {
            let x = [
                l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0],
                l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1],
            ];
            let val = g(x) * (w * area);
            for m in 0..3 {
                if let Some(d) = dof_map.dof(tri[m]) {
                    rhs[d] -= val * l[m];
                }
            }
        }
    }
    rhs
}

/// `sum over coated edges of beta * u^H M_edge u` — the impedance
/// dissipation quadratic form, recomputed from the mesh (not the matrix)
/// for energy audits.
pub fn impedance_quadratic(mesh: &Mesh, u_nodes: &[Complex]) -> f64 {
    let mut total = 0.0;
    for be in &mesh.boundary {
        if let EdgeTag::ObstacleImpedance { beta } = be.tag {
            let (p, q) = (mesh.nodes[be.nodes[0]], mesh.nodes[be.nodes[1]]);
            let len = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            let (ua, ub) = (u_nodes[be.nodes[0]], u_nodes[be.nodes[1]]);
            let quad = len / 3.0 * (ua.norm_sqr() + ub.norm_sqr())
                + len / 3.0 * (ua * ub.conj()).re;
            total += beta * quad;
        }
    }
    total
}

/// `integral of |u|^2` over one region, from the exact P1 mass matrix.
pub fn region_l2_sq(mesh: &Mesh, region: Region, u_nodes: &[Complex]) -> f64 {
    let mut total = 0.0;
    for (e, tri) in mesh.elements.iter().enumerate() {
        if mesh.regions[e] != region {
            continue;
        }
        total += element_l2_sq(mesh, *tri, u_nodes);
    }
    total
}

fn element_area_and_grads(mesh: &Mesh, tri: [usize; 3]) -> (f64, [f64; 3], [f64; 3]) {
    let [p0, p1, p2] = tri.map(|v| mesh.nodes[v]);
    let area =
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
    let b = [p1[1] - p2[1], p2[1] - p0[1], p0[1] - p1[1]];
    let c = [p2[0] - p1[0], p0[0] - p2[0], p1[0] - p0[0]];
    (area, b, c)
}

fn element_l2_sq(mesh: &Mesh, tri: [usize; 3], u_nodes: &[Complex]) -> f64 {
    let (area, _, _) = element_area_and_grads(mesh, tri);
    let u = tri.map(|v| u_nodes[v]);
    let mut total = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let m = area / 12.0 * if i == j { 2.0 } else { 1.0 };
            total += m * (u[i] * u[j].conj()).re;
        }
    }
    total
}

fn element_h1_semi_sq(mesh: &Mesh, tri: [usize; 3], u_nodes: &[Complex]) -> f64 {
    let (area, b, c) = element_area_and_grads(mesh, tri);
    let u = tri.map(|v| u_nodes[v]);
    // The P1 gradient is constant per element: grad = sum u_i (b_i, c_i)/(2 area).
    let gx: Complex = (0..3).map(|i| u[i] * b[i]).sum::<Complex>() / (2.0 * area);
    let gy: Complex = (0..3).map(|i| u[i] * c[i]).sum::<Complex>() / (2.0 * area);
    area * (gx.norm_sqr() + gy.norm_sqr())
}

/// `integral of |u|^2` over the elements picked by `keep(element index,
/// centroid)`; exact for the P1 interpolant.
pub fn l2_sq_where(
    mesh: &Mesh,
    u_nodes: &[Complex],
    mut keep: impl FnMut(usize, [f64; 2]) -> bool,
) -> f64 {
    let mut total = 0.0;
    for (e, tri) in mesh.elements.iter().enumerate() {
        let cen = centroid(mesh, *tri);
        if keep(e, cen) {
            total += element_l2_sq(mesh, *tri, u_nodes);
        }
    }
    total
}

/// Squared discrete H1 norm (`|u|^2 + |grad u|^2` integrated) over the
/// elements picked by `keep(element index, centroid)`.
pub fn h1_sq_where(
    mesh: &Mesh,
    u_nodes: &[Complex],
    mut keep: impl FnMut(usize, [f64; 2]) -> bool,
) -> f64 {
    let mut total = 0.0;
    for (e, tri) in mesh.elements.iter().enumerate() {
        let cen = centroid(mesh, *tri);
        if keep(e, cen) {
            total += element_l2_sq(mesh, *tri, u_nodes) + element_h1_semi_sq(mesh, *tri, u_nodes);
        }
    }
    total
}

fn centroid(mesh: &Mesh, tri: [usize; 3]) -> [f64; 2] {
    let [p0, p1, p2] = tri.map(|v| mesh.nodes[v]);
    [
        (p0[0] + p1[0] + p2[0]) / 3.0,
        (p0[1] + p1[1] + p2[1]) / 3.0,
    ]
}

/// `integral of |u_h - f|^2` over the strip, with `u_h` the P1 interpolant
/// of the nodal values, by the degree-5 elementwise rule. This is the true
/// function-space error, which includes the interpolation error that a
/// plain node-by-node comparison misses.
pub fn quadrature_l2_error_sq(
    mesh: &Mesh,
    u_nodes: &[Complex],
    f: impl Fn([f64; 2]) -> Complex,
) -> f64 {
    let quad = tri_quadrature_deg5();
    let mut total = 0.0;
    for tri in &mesh.elements {
        let [p0, p1, p2] = tri.map(|v| mesh.nodes[v]);
        let area = 0.5
            * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
        let u = tri.map(|v| u_nodes[v]);
        for (l, w) in quad.points.iter().zip(&quad.weights) {
            let x = [
                l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0],
                l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1],
            ];
            let uh = l[0] * u[0] + l[1] * u[1] + l[2] * u[2];
            total += w * area * (uh - f(x)).norm_sqr();
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_mesh, Obstacle, ObstacleCurve, Profile};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::collections::BTreeMap;

    fn scene(k2_im: f64, obstacle: Option<Obstacle>) -> Scene {
        Scene::new(
            Profile::Sinusoid {
                amplitude: 0.25,
                wavenumber: 1.0,
                phase: 0.0,
            },
            obstacle,
            1.5,
            6.0,
            Complex::new(4.0, 0.0),
            Complex::new(2.0, k2_im),
        )
        .unwrap()
    }

    fn coated_circle() -> Obstacle {
        Obstacle::fully_coated(
            ObstacleCurve::Circle {
                center: [0.4, -0.8],
                radius: 0.35,
            },
            1.7,
        )
    }

    fn soft_circle() -> Obstacle {
        Obstacle::sound_soft(ObstacleCurve::Circle {
            center: [0.4, -0.8],
            radius: 0.35,
        })
    }

    fn random_dof_vector(n: usize, seed: u64) -> Vec<Complex> {
        let mut rng = StdRng::seed_from_u64(seed);
        (0..n)
            .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    fn summed_entries(sys: &AssembledSystem) -> BTreeMap<(usize, usize), Complex> {
        let mut map = BTreeMap::new();
        for &(i, j, v) in sys.raw_triplets() {
            *map.entry((i, j)).or_insert(Complex::new(0.0, 0.0)) += v;
        }
        map
    }

    #[test]
    fn dof_map_eliminates_and_roundtrips() {
        let dm = DofMap::new(6, &[1, 4, 4]);
        assert_eq!(dm.n_dofs(), 4);
        assert_eq!(dm.dof(0), Some(0));
        assert_eq!(dm.dof(1), None);
        assert_eq!(dm.dof(2), Some(1));
        assert_eq!(dm.node(3), 5);
        let dofs: Vec<Complex> = (0..4).map(|i| Complex::new(i as f64, 0.0)).collect();
        let nodes = dm.expand(&dofs);
        assert_eq!(nodes[1], Complex::new(0.0, 0.0));
        assert_eq!(nodes[5], Complex::new(3.0, 0.0));
        assert_eq!(dm.restrict(&nodes), dofs);
    }

    #[test]
    fn matrix_is_complex_symmetric() {
        let sc = scene(0.4, Some(coated_circle()));
        let mesh = generate_mesh(&sc, 0.11).unwrap();
        let sys = assemble_system(&sc, &mesh, None).unwrap();
        let map = summed_entries(&sys);
        let mut max_rel: f64 = 0.0;
        let scale = map
            .values()
            .map(|v| v.norm())
            .fold(0.0_f64, f64::max);
        for (&(i, j), &v) in &map {
            if i <= j {
                let vt = map.get(&(j, i)).copied().unwrap_or(Complex::new(0.0, 0.0));
                max_rel = max_rel.max((v - vt).norm() / scale);
            }
        }
        assert!(max_rel < 1e-14, "symmetry defect {max_rel:.2e}");
    }

    #[test]
    fn quadratic_form_dissipates_for_random_vectors() {
        // Im a(u, u) <= 0 for every u is the discrete dissipation law; it
        // pins down the signs of the spectral blocks, the impedance term,
        // and the lossy lower medium all at once.
        for (label, sc) in [
            ("lossy lower layer", scene(0.4, None)),
            ("coated obstacle", scene(0.0, Some(coated_circle()))),
            ("soft obstacle + loss", scene(0.7, Some(soft_circle()))),
        ] {
            let mesh = generate_mesh(&sc, 0.11).unwrap();
            let sys = assemble_system(&sc, &mesh, None).unwrap();
            for seed in 0..5 {
                let u = random_dof_vector(sys.n_dofs(), 1000 + seed);
                let mu = sys.apply(&u);
                let quad: Complex = u
                    .iter()
                    .zip(&mu)
                    .map(|(ui, mi)| ui.conj() * mi)
                    .sum();
                let scale: f64 = u.iter().map(|v| v.norm_sqr()).sum::<f64>();
                assert!(
                    quad.im <= 1e-10 * scale.max(1.0),
                    "{label}: Im a(u,u) = {:.3e} > 0",
                    quad.im
                );
            }
        }
    }

    #[test]
    fn dirichlet_nodes_are_eliminated() {
        let sc = scene(0.3, Some(soft_circle()));
        let mesh = generate_mesh(&sc, 0.11).unwrap();
        let sys = assemble_system(&sc, &mesh, None).unwrap();
        assert!(!mesh.dirichlet_nodes.is_empty());
        assert_eq!(
            sys.n_dofs(),
            mesh.n_nodes() - mesh.dirichlet_nodes.len()
        );
        for &(i, j, _) in sys.raw_triplets() {
            assert!(i < sys.n_dofs() && j < sys.n_dofs());
        }
    }

    #[test]
    fn zero_shift_is_bit_identical() {
        let sc = scene(0.3, Some(coated_circle()));
        let mesh = generate_mesh(&sc, 0.11).unwrap();
        let plain = assemble_system(&sc, &mesh, None).unwrap();
        let shifted = assemble_system(
            &sc,
            &mesh,
            Some(AbsorbingShift {
                alpha: 0.0,
                thickness: 0.2,
            }),
        )
        .unwrap();
        assert!(!shifted.annulus.is_empty());
        assert_eq!(plain.triplets.len(), shifted.triplets.len());
        for (a, b) in plain.triplets.iter().zip(&shifted.triplets) {
            assert_eq!(a.0, b.0);
            assert_eq!(a.1, b.1);
            assert_eq!(a.2.re.to_bits(), b.2.re.to_bits());
            assert_eq!(a.2.im.to_bits(), b.2.im.to_bits());
        }
    }

    #[test]
    fn collar_sits_outside_the_obstacle_within_thickness() {
        let sc = scene(0.3, Some(coated_circle()));
        let mesh = generate_mesh(&sc, 0.15).unwrap();
        let sys = assemble_system(
            &sc,
            &mesh,
            Some(AbsorbingShift {
                alpha: 0.5,
                thickness: 0.25,
            }),
        )
        .unwrap();
        let curve = &sc.obstacle.as_ref().unwrap().curve;
        assert!(sys.annulus.len() > 10);
        for &e in &sys.annulus {
            assert_eq!(mesh.regions[e], Region::Lower);
            let tri = mesh.elements[e];
            let cen = [
                tri.iter().map(|&v| mesh.nodes[v][0]).sum::<f64>() / 3.0,
                tri.iter().map(|&v| mesh.nodes[v][1]).sum::<f64>() / 3.0,
            ];
            let (_, _, d) = curve.project(cen);
            assert!(d > -1e-9, "collar element centroid inside obstacle");
            // Attached-ring elements may poke slightly past the collar, but
            // never more than an element diameter.
            assert!(d <= 0.25 + 2.0 * mesh.dx, "collar element too far: {d}");
        }
        // The shift actually lands in the matrix: imaginary diagonal mass
        // on collar elements differs from the unshifted assembly.
        let plain = assemble_system(&sc, &mesh, None).unwrap();
        let shifted_map = summed_entries(&sys);
        let plain_map = summed_entries(&plain);
        let diff: f64 = shifted_map
            .iter()
            .map(|(k, v)| (v - plain_map[k]).norm())
            .sum();
        assert!(diff > 1e-6);
    }

    #[test]
    fn shift_without_obstacle_is_an_error() {
        let sc = scene(0.3, None);
        let mesh = generate_mesh(&sc, 0.25).unwrap();
        assert!(assemble_system(
            &sc,
            &mesh,
            Some(AbsorbingShift {
                alpha: 0.1,
                thickness: 0.2
            })
        )
        .is_err());
    }

    #[test]
    fn local_source_rhs_sums_to_minus_integral() {
        // Partition of unity: sum_i (g, phi_i) = integral of g.
        let sc = scene(0.0, None);
        let mesh = generate_mesh(&sc, 0.3).unwrap();
        let dm = DofMap::new(mesh.n_nodes(), &[]);
        let rhs = rhs_local_source(&mesh, &dm, |_| Complex::new(1.0, 0.0));
        let total: Complex = rhs.iter().sum();
        let area = 4.0 * sc.half_width * sc.half_height;
        assert!((total + area).norm() < 1e-10, "sum {total}, area {area}");
    }

    #[test]
    fn region_l2_matches_hand_integral() {
        let sc = scene(0.0, None);
        let mesh = generate_mesh(&sc, 0.25).unwrap();
        // u = x1 (real linear): integral over the lower region of x1^2.
        let u: Vec<Complex> = mesh
            .nodes
            .iter()
            .map(|p| Complex::new(p[0], 0.0))
            .collect();
        let got = region_l2_sq(&mesh, Region::Lower, &u);
        // Lower region = { -6 < x1 < 6, -1.5 < x2 < f(x1) } with the mesh's
        // piecewise-linear f; integral x1^2 (f + 1.5) dx1. Against the exact
        // profile the difference is O(dx^2).
        let mut exact = 0.0;
        let n = 20000;
        for i in 0..n {
            let x = -6.0 + 12.0 * (i as f64 + 0.5) / n as f64;
            exact += 12.0 / n as f64 * x * x * (sc.f(x) + 1.5);
        }
        assert!(
            (got - exact).abs() < 2e-2 * exact,
            "lower-region L2 {got} vs {exact}"
        );
    }

    #[test]
    fn impedance_quadratic_matches_hand_value() {
        let sc = scene(0.0, Some(coated_circle()));
        let mesh = generate_mesh(&sc, 0.15).unwrap();
        // Constant u = 1: quadratic = beta * total coated length.
        let u = vec![Complex::new(1.0, 0.0); mesh.n_nodes()];
        let got = impedance_quadratic(&mesh, &u);
        let perim = 2.0 * std::f64::consts::PI * 0.35;
        assert!(
            (got - 1.7 * perim).abs() < 0.02 * 1.7 * perim,
            "impedance quadratic {got} vs {}",
            1.7 * perim
        );
    }
}
