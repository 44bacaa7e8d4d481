//! Conforming P1 triangle mesh on the truncated strip.
//!
//! The mesh is a mapped structured grid: a fixed number of rows below and
//! above the interface, with each column's row heights stretched so that one
//! mesh row lies exactly on `x2 = f(x1)`. Quads are split into triangles
//! with the diagonal alternating by cell parity, which keeps the mesh
//! mirror-symmetric about `x1 = 0` whenever the scene is. The top and
//! bottom rows are exactly uniform, which the spectral boundary maps rely
//! on; lateral walls are exactly vertical.
//!
//! A buried obstacle is cut out by snapping nearby nodes onto the curve and
//! removing the triangles inside. The exposed edges become tagged boundary
//! edges carrying the impedance coefficient of their arc (or a sound-soft
//! marker).

use std::collections::HashMap;
use std::io::Write as IoWrite;

use crate::error::Error;
use crate::geometry::Scene;
use crate::Result;

/// Which medium an element belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Upper,
    Lower,
}

/// Tag for a boundary edge of the mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeTag {
    /// `x2 = +h` (upper spectral boundary).
    Top,
    /// `x2 = -h` (lower spectral boundary).
    Bottom,
    WallLeft,
    WallRight,
    /// Sound-soft part of the obstacle boundary.
    ObstacleDirichlet,
    /// Coated part of the obstacle boundary with impedance coefficient.
    ObstacleImpedance { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: EdgeTag,
}

/// Triangle mesh with region tags, boundary tags, and trace index lists.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub elements: Vec<[usize; 3]>,
    /// Region of each element (same indexing as `elements`).
    pub regions: Vec<Region>,
    pub boundary: Vec<BoundaryEdge>,
    /// Node ids along `x2 = +h`, left to right; length `n_cols + 1`,
    /// laterally uniform.
    pub top_trace: Vec<usize>,
    /// Node ids along `x2 = -h`, left to right.
    pub bottom_trace: Vec<usize>,
    /// Node ids along the interface row, left to right.
    pub interface_nodes: Vec<usize>,
    /// Sorted, deduplicated nodes subject to the homogeneous Dirichlet
    /// condition (sound-soft obstacle part).
    pub dirichlet_nodes: Vec<usize>,
    pub half_width: f64,
    pub half_height: f64,
    /// Number of lateral cells (a power of two).
    pub n_cols: usize,
    /// Lateral cell width `2A / n_cols`.
    pub dx: f64,
    bins: Bins,
}

/// Uniform-bin element locator.
#[derive(Debug, Clone)]
struct Bins {
    nbx: usize,
    nby: usize,
    x0: f64,
    y0: f64,
    wx: f64,
    wy: f64,
    cells: Vec<Vec<u32>>,
}

impl Bins {
    fn build(nodes: &[[f64; 2]], elements: &[[usize; 3]], a: f64, h: f64, dx: f64) -> Bins {
        let nbx = ((2.0 * a) / dx).round().max(1.0) as usize;
        let nby = ((2.0 * h) / dx).ceil().max(1.0) as usize;
        let (wx, wy) = (2.0 * a / nbx as f64, 2.0 * h / nby as f64);
        let mut cells = vec![Vec::new(); nbx * nby];
        for (e, tri) in elements.iter().enumerate() {
            let xs = tri.map(|v| nodes[v][0]);
            let ys = tri.map(|v| nodes[v][1]);
            let clampi = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
            let i0 = clampi((xs.iter().cloned().fold(f64::INFINITY, f64::min) + a) / wx, nbx);
            let i1 = clampi((xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + a) / wx, nbx);
            let j0 = clampi((ys.iter().cloned().fold(f64::INFINITY, f64::min) + h) / wy, nby);
            let j1 = clampi((ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + h) / wy, nby);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    cells[j * nbx + i].push(e as u32);
                }
            }
        }
        Bins {
            nbx,
            nby,
            x0: -a,
            y0: -h,
            wx,
            wy,
            cells,
        }
    }

    fn candidates(&self, p: [f64; 2]) -> &[u32] {
        let i = (((p[0] - self.x0) / self.wx) as usize).min(self.nbx - 1);
        let j = (((p[1] - self.y0) / self.wy) as usize).min(self.nby - 1);
        &self.cells[j * self.nbx + i]
    }
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Signed area of element `e` (positive for the CCW orientation we
    /// construct).
    pub fn element_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.elements[e].map(|v| self.nodes[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Longest edge over all elements.
    pub fn mesh_size(&self) -> f64 {
        let mut h: f64 = 0.0;
        for tri in &self.elements {
            for k in 0..3 {
                let p = self.nodes[tri[k]];
                let q = self.nodes[tri[(k + 1) % 3]];
                h = h.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
            }
        }
        h
    }

    /// Worst element shape quality: `4*sqrt(3)*area / sum(edge^2)`, which is
    /// `1` for equilateral triangles and `0` for degenerate ones.
    pub fn quality_min(&self) -> f64 {
        let mut qmin = f64::INFINITY;
        for e in 0..self.elements.len() {
            let tri = self.elements[e];
            let mut s2 = 0.0;
            for k in 0..3 {
                let p = self.nodes[tri[k]];
                let q = self.nodes[tri[(k + 1) % 3]];
                s2 += (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            }
            qmin = qmin.min(4.0 * 3.0_f64.sqrt() * self.element_area(e) / s2);
        }
        qmin
    }

    /// Locates the element containing `p`, returning `(element,
    /// barycentric coordinates)`. Points inside the obstacle or outside the
    /// strip return `None`. Points on shared edges resolve to the
    /// lowest-index candidate, deterministically.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let tol = -1e-9;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &e in self.bins.candidates(p) {
            let e = e as usize;
            let [a, b, c] = self.elements[e].map(|v| self.nodes[v]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
            let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
            let l0 = 1.0 - l1 - l2;
            let worst = l0.min(l1).min(l2);
            if worst >= tol {
                // Candidates arrive in ascending element order, so ties keep
                // the lowest index.
                if best.map_or(true, |(_, _, bw)| worst > bw) {
                    best = Some((e, [l0, l1, l2], worst));
                }
                // A clearly interior hit cannot be improved.
                if worst > 1e-9 {
                    break;
                }
            }
        }
        best.map(|(e, l, _)| (e, l))
    }

    /// Writes the mesh in a simple line-oriented text format (documented in
    /// the repository README).
    pub fn write_text<W: IoWrite>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# stripwave mesh v1")?;
        writeln!(
            w,
            "domain {} {} {}",
            self.half_width, self.half_height, self.n_cols
        )?;
        writeln!(w, "nodes {}", self.nodes.len())?;
        for p in &self.nodes {
            writeln!(w, "{:.17e} {:.17e}", p[0], p[1])?;
        }
        writeln!(w, "elements {}", self.elements.len())?;
        for (tri, reg) in self.elements.iter().zip(&self.regions) {
            let r = match reg {
                Region::Upper => "upper",
                Region::Lower => "lower",
            };
            writeln!(w, "{} {} {} {}", tri[0], tri[1], tri[2], r)?;
        }
        writeln!(w, "boundary {}", self.boundary.len())?;
        for be in &self.boundary {
            match be.tag {
                EdgeTag::Top => writeln!(w, "{} {} top", be.nodes[0], be.nodes[1])?,
                EdgeTag::Bottom => writeln!(w, "{} {} bottom", be.nodes[0], be.nodes[1])?,
                EdgeTag::WallLeft => writeln!(w, "{} {} wall_left", be.nodes[0], be.nodes[1])?,
                EdgeTag::WallRight => writeln!(w, "{} {} wall_right", be.nodes[0], be.nodes[1])?,
                EdgeTag::ObstacleDirichlet => {
                    writeln!(w, "{} {} obstacle_dirichlet", be.nodes[0], be.nodes[1])?
                }
                EdgeTag::ObstacleImpedance { beta } => writeln!(
                    w,
                    "{} {} obstacle_impedance {:.17e}",
                    be.nodes[0], be.nodes[1], beta
                )?,
            }
        }
        let ids = |v: &[usize]| {
            v.iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(w, "trace_top {}", ids(&self.top_trace))?;
        writeln!(w, "trace_bottom {}", ids(&self.bottom_trace))?;
        writeln!(w, "trace_interface {}", ids(&self.interface_nodes))?;
        Ok(())
    }
}

/// Fraction of the lateral cell width within which a node is snapped onto
/// the obstacle curve. Values near 1/3 keep the cut triangles well-shaped;
/// much smaller values leave slivers, much larger ones distort neighbors.
const SNAP_FRACTION: f64 = 0.35;

/// Generates the strip mesh for a scene at target element size `h_mesh`.
///
/// The lateral cell count is rounded up to a power of two (the boundary
/// spectral maps need it) and vertical spacing follows the lateral spacing
/// to keep elements isotropic, so the realized size can be up to 2x finer
/// than requested. With an obstacle present, `h_mesh` must resolve the
/// obstacle's smallest feature (three cells per feature radius).
pub fn generate_mesh(scene: &Scene, h_mesh: f64) -> Result<Mesh> {
    if !(h_mesh > 0.0) || !h_mesh.is_finite() {
        return Err(Error::mesh(format!("mesh size must be positive, got {h_mesh}")));
    }
    let a = scene.half_width;
    let h = scene.half_height;
    let nx = ((2.0 * a / h_mesh).ceil() as usize).max(4).next_power_of_two();
    if nx > (1 << 16) {
        return Err(Error::mesh(format!(
            "mesh size {h_mesh} needs {nx} columns; refusing (> 65536)"
        )));
    }
    let dx = 2.0 * a / nx as f64;

    if let Some(ob) = &scene.obstacle {
        let feat = ob.curve.min_feature();
        if 3.0 * dx > feat {
            return Err(Error::mesh(format!(
                "cell width {dx:.4} too coarse for obstacle feature size {feat:.4}; \
                 need at least three cells per feature"
            )));
        }
    }

    // Row counts per band, from the mean band heights; every column shares
    // the counts so the grid stays logically structured.
    let mean_f = 0.5 * (scene.f_lo + scene.f_hi);
    let n_lo = (((mean_f + h) / dx).ceil() as usize).max(2);
    let n_up = (((h - mean_f) / dx).ceil() as usize).max(2);
    let n_rows = n_lo + n_up + 1;

    // Interface must keep at least one full row of clearance from both
    // spectral lines for the banded layout to make sense.
    if scene.f_hi + dx >= h || scene.f_lo - dx <= -h {
        return Err(Error::mesh(
            "interface too close to x2 = ±h for this mesh size".to_string(),
        ));
    }

    let idx = |r: usize, c: usize| r * (nx + 1) + c;
    let mut nodes = vec![[0.0_f64; 2]; n_rows * (nx + 1)];
    for c in 0..=nx {
        let x1 = -a + dx * c as f64;
        let f = scene.f(x1);
        for r in 0..=n_lo {
            nodes[idx(r, c)] = [x1, -h + (f + h) * r as f64 / n_lo as f64];
        }
        for r in (n_lo + 1)..n_rows {
            let s = (r - n_lo) as f64 / n_up as f64;
            nodes[idx(r, c)] = [x1, f + (h - f) * s];
        }
    }

    // Triangulate: diagonal direction alternates with cell parity.
    let mut elements: Vec<[usize; 3]> = Vec::with_capacity(2 * nx * (n_rows - 1));
    let mut regions: Vec<Region> = Vec::with_capacity(2 * nx * (n_rows - 1));
    for r in 0..n_rows - 1 {
        let reg = if r < n_lo { Region::Lower } else { Region::Upper };
        for c in 0..nx {
            let (v00, v10) = (idx(r, c), idx(r, c + 1));
            let (v01, v11) = (idx(r + 1, c), idx(r + 1, c + 1));
            if (r + c) % 2 == 0 {
                elements.push([v00, v10, v11]);
                elements.push([v00, v11, v01]);
            } else {
                elements.push([v00, v10, v01]);
                elements.push([v10, v11, v01]);
            }
            regions.push(reg);
            regions.push(reg);
        }
    }

    // Obstacle cut: snap nodes onto the curve, drop interior triangles.
    let mut keep = vec![true; elements.len()];
    let mut snapped = vec![false; nodes.len()];
    if let Some(ob) = &scene.obstacle {
        let (lo, hi) = ob.curve.bbox();
        let pad = 3.0 * dx;
        let near = |p: [f64; 2]| {
            p[0] > lo[0] - pad && p[0] < hi[0] + pad && p[1] > lo[1] - pad && p[1] < hi[1] + pad
        };

        // Signed distance and projection parameter for nodes near the curve.
        let mut sd: Vec<Option<f64>> = vec![None; nodes.len()];
        let mut structural_hit = false;
        for r in 0..n_rows {
            for c in 0..=nx {
                let i = idx(r, c);
                if near(nodes[i]) {
                    let (_, _, d) = ob.curve.project(nodes[i]);
                    sd[i] = Some(d);
                    if (d < SNAP_FRACTION * dx)
                        && (r == 0 || r >= n_lo || c == 0 || c == nx)
                    {
                        structural_hit = true;
                    }
                }
            }
        }
        if structural_hit {
            return Err(Error::mesh(
                "obstacle comes within a snapping distance of the interface, walls, \
                 or bottom row; refine the mesh or move the obstacle"
                    .to_string(),
            ));
        }

        let snap = |i: usize,
                    nodes: &mut Vec<[f64; 2]>,
                    sd: &mut Vec<Option<f64>>,
                    snapped: &mut Vec<bool>| {
            let (_, q, _) = ob.curve.project(nodes[i]);
            nodes[i] = q;
            sd[i] = Some(0.0);
            snapped[i] = true;
        };

        // Pass 1: snap anything already within the threshold.
        for i in 0..nodes.len() {
            if let Some(d) = sd[i] {
                if d.abs() <= SNAP_FRACTION * dx {
                    snap(i, &mut nodes, &mut sd, &mut snapped);
                }
            }
        }

        // Pass 2: each edge crossing the curve must have an on-curve
        // endpoint; pull over the nearer endpoint of violating edges.
        for _round in 0..32 {
            let mut changed = false;
            for tri in &elements {
                for k in 0..3 {
                    let (p, q) = (tri[k], tri[(k + 1) % 3]);
                    if snapped[p] || snapped[q] {
                        continue;
                    }
                    if let (Some(dp), Some(dq)) = (sd[p], sd[q]) {
                        if dp * dq < 0.0 {
                            let target = if dp.abs() <= dq.abs() { p } else { q };
                            snap(target, &mut nodes, &mut sd, &mut snapped);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        // Removal: any strictly interior vertex kills the triangle; fully
        // snapped triangles go by centroid, and snapped slivers go too
        // (their vertices stay on the curve, so dropping them just trims
        // the inscribed polygon).
        let inside = |i: usize| sd[i].map_or(false, |d| d < 0.0 && !snapped[i]);
        for (e, tri) in elements.iter().enumerate() {
            if tri.iter().any(|&v| inside(v)) {
                keep[e] = false;
                continue;
            }
            if tri.iter().all(|&v| snapped[v]) {
                let cen = centroid(&nodes, tri);
                let ar = tri_area(&nodes, tri);
                if ob.curve.contains(cen) || ar < 0.01 * dx * dx {
                    keep[e] = false;
                }
            }
        }

        // Pass 3: exposed cut edges whose second endpoint is off-curve get
        // that endpoint snapped as well, so the discrete boundary is a
        // polygon inscribed in the true curve. Re-run removal afterwards.
        for _round in 0..5 {
            let counts = edge_counts(&elements, &keep);
            let mut to_snap: Vec<usize> = Vec::new();
            for (e, tri) in elements.iter().enumerate() {
                if !keep[e] {
                    continue;
                }
                for k in 0..3 {
                    let (p, q) = (tri[k], tri[(k + 1) % 3]);
                    let key = (p.min(q), p.max(q));
                    if counts[&key] == 1 && sd[p].is_some() && sd[q].is_some() {
                        // Outer boundary edges never carry sd on both ends
                        // (the obstacle clears the walls), so this is a cut
                        // edge.
                        if snapped[p] != snapped[q] {
                            to_snap.push(if snapped[p] { q } else { p });
                        }
                    }
                }
            }
            if to_snap.is_empty() {
                break;
            }
            to_snap.sort_unstable();
            to_snap.dedup();
            for i in to_snap {
                snap(i, &mut nodes, &mut sd, &mut snapped);
            }
            for (e, tri) in elements.iter().enumerate() {
                if !keep[e] {
                    continue;
                }
                if tri.iter().all(|&v| snapped[v]) {
                    let cen = centroid(&nodes, tri);
                    let ar = tri_area(&nodes, tri);
                    if ob.curve.contains(cen) || ar < 0.01 * dx * dx {
                        keep[e] = false;
                    }
                }
            }
        }

        // Merge snapped nodes that projected onto nearly the same curve
        // point; without this, triangles between them have vanishing area.
        let merge_tol = 0.25 * dx;
        let snapped_ids: Vec<usize> = (0..nodes.len()).filter(|&i| snapped[i]).collect();
        let mut rep: HashMap<usize, usize> = HashMap::new();
        for (ii, &i) in snapped_ids.iter().enumerate() {
            for &j in &snapped_ids[..ii] {
                let jr = *rep.get(&j).unwrap_or(&j);
                let (p, q) = (nodes[i], nodes[jr]);
                if ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() < merge_tol {
                    rep.insert(i, jr);
                    break;
                }
            }
        }
        if !rep.is_empty() {
            for (e, tri) in elements.iter_mut().enumerate() {
                for v in tri.iter_mut() {
                    if let Some(&r) = rep.get(v) {
                        *v = r;
                    }
                }
                if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                    keep[e] = false;
                }
            }
            // The collapse can reshape cut-adjacent triangles; sweep for
            // newly degenerate all-snapped ones once more.
            for (e, tri) in elements.iter().enumerate() {
                if keep[e] && tri.iter().all(|&v| snapped[v]) {
                    let cen = centroid(&nodes, tri);
                    let ar = tri_area(&nodes, tri);
                    if ob.curve.contains(cen) || ar < 0.01 * dx * dx {
                        keep[e] = false;
                    }
                }
            }
        }

        // Collar smoothing: relax non-snapped free nodes adjacent to the cut
        // so that snapping distortion spreads over a ring of elements.
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for (e, tri) in elements.iter().enumerate() {
            if keep[e] {
                for &v in tri {
                    adj[v].push(e);
                }
            }
        }
        let mut collar: Vec<usize> = Vec::new();
        for r in 1..n_lo {
            for c in 1..nx {
                let i = idx(r, c);
                if snapped[i] || sd[i].is_none() {
                    continue;
                }
                let near_cut = adj[i].iter().any(|&e| {
                    elements[e].iter().any(|&v| snapped[v])
                });
                if near_cut && !adj[i].is_empty() {
                    collar.push(i);
                }
            }
        }
        for _iter in 0..8 {
            for &i in &collar {
                let mut sum = [0.0; 2];
                let mut cnt = 0.0;
                for &e in &adj[i] {
                    for &v in &elements[e] {
                        if v != i {
                            sum[0] += nodes[v][0];
                            sum[1] += nodes[v][1];
                            cnt += 1.0;
                        }
                    }
                }
                let old = nodes[i];
                let relax = 0.5;
                let cand = [
                    old[0] + relax * (sum[0] / cnt - old[0]),
                    old[1] + relax * (sum[1] / cnt - old[1]),
                ];
                // Reject moves that collapse or invert an incident element,
                // or that land the node inside the obstacle.
                nodes[i] = cand;
                let ok = adj[i].iter().all(|&e| {
                    let ar = tri_area(&nodes, &elements[e]);
                    ar > 0.05 * dx * dx
                }) && !ob.curve.contains(cand);
                if !ok {
                    nodes[i] = old;
                }
            }
        }
    }

    // Final orientation / degeneracy audit.
    for (e, tri) in elements.iter().enumerate() {
        if keep[e] {
            let ar = tri_area(&nodes, tri);
            if !(ar > 1e-5 * dx * dx) {
                return Err(Error::mesh(format!(
                    "degenerate element after obstacle cut (area {ar:.3e}); \
                     refine the mesh"
                )));
            }
        }
    }

    // Compact node ids.
    let mut new_id = vec![usize::MAX; nodes.len()];
    let mut out_nodes: Vec<[f64; 2]> = Vec::new();
    let mut out_elems: Vec<[usize; 3]> = Vec::new();
    let mut out_regs: Vec<Region> = Vec::new();
    for (e, tri) in elements.iter().enumerate() {
        if !keep[e] {
            continue;
        }
        let mut mapped = [0usize; 3];
        for (k, &v) in tri.iter().enumerate() {
            if new_id[v] == usize::MAX {
                new_id[v] = out_nodes.len();
                out_nodes.push(nodes[v]);
            }
            mapped[k] = new_id[v];
        }
        out_elems.push(mapped);
        out_regs.push(regions[e]);
    }

    // Structured boundary edges and traces (all structural nodes survive the
    // cut, so the maps are total).
    let map = |r: usize, c: usize| -> Result<usize> {
        let m = new_id[idx(r, c)];
        if m == usize::MAX {
            Err(Error::mesh(
                "structural boundary node was removed by the obstacle cut".to_string(),
            ))
        } else {
            Ok(m)
        }
    };
    let mut boundary: Vec<BoundaryEdge> = Vec::new();
    for c in 0..nx {
        boundary.push(BoundaryEdge {
            nodes: [map(0, c)?, map(0, c + 1)?],
            tag: EdgeTag::Bottom,
        });
        boundary.push(BoundaryEdge {
            nodes: [map(n_rows - 1, c)?, map(n_rows - 1, c + 1)?],
            tag: EdgeTag::Top,
        });
    }
    for r in 0..n_rows - 1 {
        boundary.push(BoundaryEdge {
            nodes: [map(r, 0)?, map(r + 1, 0)?],
            tag: EdgeTag::WallLeft,
        });
        boundary.push(BoundaryEdge {
            nodes: [map(r, nx)?, map(r + 1, nx)?],
            tag: EdgeTag::WallRight,
        });
    }

    // Obstacle boundary edges: cut edges are the once-counted edges with
    // both endpoints snapped.
    let mut dirichlet_nodes: Vec<usize> = Vec::new();
    if let Some(ob) = &scene.obstacle {
        let counts = edge_counts(&elements, &keep);
        for (e, tri) in elements.iter().enumerate() {
            if !keep[e] {
                continue;
            }
            for k in 0..3 {
                let (p, q) = (tri[k], tri[(k + 1) % 3]);
                let key = (p.min(q), p.max(q));
                // A count-one edge lives in exactly one kept triangle, so
                // this loop visits it exactly once.
                if counts[&key] == 1 && snapped[p] && snapped[q] {
                    let mid = [
                        0.5 * (nodes[p][0] + nodes[q][0]),
                        0.5 * (nodes[p][1] + nodes[q][1]),
                    ];
                    let (t_mid, _, _) = ob.curve.project(mid);
                    let tag = match ob.beta_at(t_mid) {
                        Some(beta) => EdgeTag::ObstacleImpedance { beta },
                        None => EdgeTag::ObstacleDirichlet,
                    };
                    if tag == EdgeTag::ObstacleDirichlet {
                        dirichlet_nodes.push(new_id[p]);
                        dirichlet_nodes.push(new_id[q]);
                    }
                    boundary.push(BoundaryEdge {
                        nodes: [new_id[p], new_id[q]],
                        tag,
                    });
                }
            }
        }
    }
    dirichlet_nodes.sort_unstable();
    dirichlet_nodes.dedup();

    let top_trace: Vec<usize> = (0..=nx).map(|c| map(n_rows - 1, c)).collect::<Result<_>>()?;
    let bottom_trace: Vec<usize> = (0..=nx).map(|c| map(0, c)).collect::<Result<_>>()?;
    let interface_nodes: Vec<usize> = (0..=nx).map(|c| map(n_lo, c)).collect::<Result<_>>()?;

    let bins = Bins::build(&out_nodes, &out_elems, a, h, dx);
    Ok(Mesh {
        nodes: out_nodes,
        elements: out_elems,
        regions: out_regs,
        boundary,
        top_trace,
        bottom_trace,
        interface_nodes,
        dirichlet_nodes,
        half_width: a,
        half_height: h,
        n_cols: nx,
        dx,
        bins,
    })
}

fn centroid(nodes: &[[f64; 2]], tri: &[usize; 3]) -> [f64; 2] {
    let [a, b, c] = tri.map(|v| nodes[v]);
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

fn tri_area(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = tri.map(|v| nodes[v]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_counts(elements: &[[usize; 3]], keep: &[bool]) -> HashMap<(usize, usize), u32> {
    let mut counts: HashMap<(usize, usize), u32> = HashMap::new();
    for (e, tri) in elements.iter().enumerate() {
        if keep[e] {
            for k in 0..3 {
                let (p, q) = (tri[k], tri[(k + 1) % 3]);
                *counts.entry((p.min(q), p.max(q))).or_insert(0) += 1;
            }
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Obstacle, ObstacleCurve, Profile, Scene};
    use crate::Complex;

    fn flat_scene() -> Scene {
        Scene::new(
            Profile::Flat { height: 0.0 },
            None,
            2.0,
            8.0,
            Complex::new(4.0, 0.0),
            Complex::new(2.0, 0.0),
        )
        .unwrap()
    }

    fn wavy_scene(obstacle: Option<Obstacle>) -> Scene {
        Scene::new(
            Profile::Sinusoid {
                amplitude: 0.3,
                wavenumber: 1.0,
                phase: 0.0,
            },
            obstacle,
            2.0,
            8.0,
            Complex::new(4.0, 0.0),
            Complex::new(2.0, 0.5),
        )
        .unwrap()
    }

    fn total_area(m: &Mesh) -> f64 {
        (0..m.n_elements()).map(|e| m.element_area(e)).sum()
    }

    #[test]
    fn flat_mesh_covers_strip_exactly() {
        let m = generate_mesh(&flat_scene(), 0.3).unwrap();
        assert!(m.n_cols.is_power_of_two());
        assert!(m.dx <= 0.3);
        assert!((total_area(&m) - 4.0 * 8.0 * 2.0).abs() < 1e-10);
        for e in 0..m.n_elements() {
            assert!(m.element_area(e) > 0.0);
        }
        assert!(m.mesh_size() <= 0.3 * 2.0_f64.sqrt() + 1e-12);
    }

    #[test]
    fn banded_area_telescopes_for_wavy_interface() {
        // The piecewise-linear interface splits the strip without gaps or
        // overlaps, so the total is exactly the rectangle area.
        let m = generate_mesh(&wavy_scene(None), 0.25).unwrap();
        assert!((total_area(&m) - 64.0).abs() < 1e-9);
    }

    #[test]
    fn regions_respect_the_interpolated_interface() {
        let scene = wavy_scene(None);
        let m = generate_mesh(&scene, 0.25).unwrap();
        for e in 0..m.n_elements() {
            let cen = centroid(&m.nodes, &m.elements[e]);
            // Compare against the piecewise-linear interpolant through the
            // column samples, which is what the mesh actually conforms to.
            let c = ((cen[0] + scene.half_width) / m.dx).floor() as usize;
            let x_l = -scene.half_width + m.dx * c as f64;
            let (f_l, f_r) = (scene.f(x_l), scene.f(x_l + m.dx));
            let f_lin = f_l + (f_r - f_l) * (cen[0] - x_l) / m.dx;
            match m.regions[e] {
                Region::Upper => assert!(cen[1] > f_lin - 1e-12),
                Region::Lower => assert!(cen[1] < f_lin + 1e-12),
            }
        }
    }

    #[test]
    fn traces_are_uniform_and_on_spectral_lines() {
        let scene = wavy_scene(None);
        let m = generate_mesh(&scene, 0.25).unwrap();
        assert_eq!(m.top_trace.len(), m.n_cols + 1);
        for (c, (&t, &b)) in m.top_trace.iter().zip(&m.bottom_trace).enumerate() {
            let x = -scene.half_width + m.dx * c as f64;
            assert!((m.nodes[t][0] - x).abs() < 1e-12);
            assert!((m.nodes[t][1] - scene.half_height).abs() < 1e-12);
            assert!((m.nodes[b][0] - x).abs() < 1e-12);
            assert!((m.nodes[b][1] + scene.half_height).abs() < 1e-12);
        }
        for (c, &i) in m.interface_nodes.iter().enumerate() {
            let x = -scene.half_width + m.dx * c as f64;
            assert!((m.nodes[i][1] - scene.f(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn mesh_is_mirror_symmetric_for_symmetric_scene() {
        let scene = Scene::new(
            Profile::GaussianBump {
                amplitude: 0.4,
                center: 0.0,
                width: 1.0,
            },
            None,
            2.0,
            8.0,
            Complex::new(4.0, 0.0),
            Complex::new(2.0, 0.0),
        )
        .unwrap();
        let m = generate_mesh(&scene, 0.25).unwrap();
        // Node multiset must be invariant under x1 -> -x1.
        let mut keyed: Vec<(i64, i64)> = m
            .nodes
            .iter()
            .map(|p| ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64))
            .collect();
        let mut mirrored: Vec<(i64, i64)> = keyed.iter().map(|&(x, y)| (-x, y)).collect();
        keyed.sort_unstable();
        mirrored.sort_unstable();
        assert_eq!(keyed, mirrored);
    }

    #[test]
    fn locator_reconstructs_points() {
        let scene = wavy_scene(None);
        let m = generate_mesh(&scene, 0.25).unwrap();
        let probes = [
            [0.3, 0.7],
            [-5.2, -1.1],
            [7.9, 1.9],
            [0.0, 0.29], // near the interface
        ];
        for p in probes {
            let (e, l) = m.locate(p).expect("probe point must be found");
            let [a, b, c] = m.elements[e].map(|v| m.nodes[v]);
            let x = l[0] * a[0] + l[1] * b[0] + l[2] * c[0];
            let y = l[0] * a[1] + l[1] * b[1] + l[2] * c[1];
            assert!((x - p[0]).abs() < 1e-10 && (y - p[1]).abs() < 1e-10);
        }
        assert!(m.locate([8.5, 0.0]).is_none());
        assert!(m.locate([0.0, 2.5]).is_none());
    }

    #[test]
    fn obstacle_cut_removes_interior_and_closes_boundary() {
        let ob = Obstacle::sound_soft(ObstacleCurve::Circle {
            center: [0.3, -1.0],
            radius: 0.45,
        });
        let scene = wavy_scene(Some(ob.clone()));
        let m = generate_mesh(&scene, 0.15).unwrap();

        // No kept element centroid inside the curve.
        for e in 0..m.n_elements() {
            let cen = centroid(&m.nodes, &m.elements[e]);
            assert!(
                !ob.curve.contains(cen),
                "element {e} centroid {cen:?} is inside the obstacle"
            );
        }
        // Total area is the strip minus the obstacle, up to the polygonal
        // approximation of the circle: relative error O((dx/r)^2).
        let strip = 64.0;
        let hole = std::f64::consts::PI * 0.45 * 0.45;
        let defect = (total_area(&m) - (strip - hole)).abs() / hole;
        assert!(defect < 0.02, "hole area defect {defect:.3}");

        // Cut edges: every obstacle boundary node has exactly two incident
        // obstacle edges (closed polygon), and their length approximates
        // the circle perimeter.
        let mut deg: HashMap<usize, u32> = HashMap::new();
        let mut len = 0.0;
        let mut n_cut = 0;
        for be in &m.boundary {
            if matches!(be.tag, EdgeTag::ObstacleDirichlet) {
                n_cut += 1;
                *deg.entry(be.nodes[0]).or_insert(0) += 1;
                *deg.entry(be.nodes[1]).or_insert(0) += 1;
                let (p, q) = (m.nodes[be.nodes[0]], m.nodes[be.nodes[1]]);
                len += ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                // Endpoints lie on the circle.
                for v in be.nodes {
                    let r = ((m.nodes[v][0] - 0.3).powi(2) + (m.nodes[v][1] + 1.0).powi(2))
                        .sqrt();
                    assert!((r - 0.45).abs() < 1e-9);
                }
            }
        }
        assert!(n_cut > 8);
        assert!(deg.values().all(|&d| d == 2), "cut boundary is not a closed loop");
        let perim = 2.0 * std::f64::consts::PI * 0.45;
        assert!((len - perim).abs() / perim < 0.02);

        // All sound-soft: every cut node is a Dirichlet node.
        assert_eq!(m.dirichlet_nodes.len(), deg.len());
        // Points inside the obstacle are not locatable.
        assert!(m.locate([0.3, -1.0]).is_none());
        // Element quality survives the cut.
        assert!(m.quality_min() > 0.02, "quality {}", m.quality_min());
    }

    #[test]
    fn obstacle_cut_works_for_ellipse_and_kite() {
        // The ellipse's tightest feature radius is b^2/a = 0.164 and the
        // kite's is 0.0855 * scale, so each case picks a mesh size that
        // honors the three-cells-per-feature rule without being huge.
        let cases = [
            (
                ObstacleCurve::Ellipse {
                    center: [-0.4, -1.1],
                    semi_x: 0.55,
                    semi_y: 0.3,
                    rotation: 0.5,
                },
                8.0, // scene half-width
                0.06,
            ),
            (
                ObstacleCurve::Kite {
                    center: [0.2, -1.2],
                    scale: 0.45,
                },
                3.0,
                0.013,
            ),
        ];
        for (curve, half_width, h_mesh) in cases {
            let ob = Obstacle::fully_coated(curve.clone(), 1.3);
            let scene = Scene::new(
                Profile::Sinusoid {
                    amplitude: 0.3,
                    wavenumber: 1.0,
                    phase: 0.0,
                },
                Some(ob),
                2.0,
                half_width,
                Complex::new(4.0, 0.0),
                Complex::new(2.0, 0.5),
            )
            .unwrap();
            let m = generate_mesh(&scene, h_mesh).unwrap();
            let mut len = 0.0;
            for be in &m.boundary {
                match be.tag {
                    EdgeTag::ObstacleImpedance { beta } => {
                        assert_eq!(beta, 1.3);
                        let (p, q) = (m.nodes[be.nodes[0]], m.nodes[be.nodes[1]]);
                        len += ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                    }
                    EdgeTag::ObstacleDirichlet => panic!("fully coated: no Dirichlet edges"),
                    _ => {}
                }
            }
            let perim = curve.perimeter();
            assert!(
                (len - perim).abs() / perim < 0.02,
                "perimeter defect for {curve:?}: {} vs {perim}",
                len
            );
            assert!(m.dirichlet_nodes.is_empty());
            assert!(m.quality_min() > 0.02);
        }
    }

    #[test]
    fn mixed_partition_tags_both_edge_kinds() {
        use crate::geometry::CoatedArc;
        let ob = Obstacle {
            curve: ObstacleCurve::Circle {
                center: [0.0, -1.0],
                radius: 0.45,
            },
            coated: vec![CoatedArc {
                t_start: 0.0,
                t_end: std::f64::consts::PI,
                beta: 2.0,
            }],
        };
        let scene = wavy_scene(Some(ob));
        let m = generate_mesh(&scene, 0.12).unwrap();
        let (mut l_imp, mut l_dir) = (0.0, 0.0);
        for be in &m.boundary {
            let (p, q) = (m.nodes[be.nodes[0]], m.nodes[be.nodes[1]]);
            let l = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            match be.tag {
                EdgeTag::ObstacleImpedance { .. } => l_imp += l,
                EdgeTag::ObstacleDirichlet => l_dir += l,
                _ => {}
            }
        }
        let half = std::f64::consts::PI * 0.45;
        // Edge-level tagging quantizes the split point to the mesh scale.
        assert!((l_imp - half).abs() / half < 0.1, "coated {l_imp} vs {half}");
        assert!((l_dir - half).abs() / half < 0.1, "soft {l_dir} vs {half}");
        assert!(!m.dirichlet_nodes.is_empty());
    }

    #[test]
    fn coarse_mesh_with_obstacle_is_rejected() {
        let ob = Obstacle::sound_soft(ObstacleCurve::Circle {
            center: [0.0, -1.0],
            radius: 0.3,
        });
        let scene = wavy_scene(Some(ob));
        assert!(generate_mesh(&scene, 0.5).is_err());
    }

    #[test]
    fn invalid_mesh_size_is_rejected() {
        assert!(generate_mesh(&flat_scene(), 0.0).is_err());
        assert!(generate_mesh(&flat_scene(), -1.0).is_err());
        assert!(generate_mesh(&flat_scene(), 1e-6).is_err());
    }

    #[test]
    fn text_export_roundtrips_counts() {
        let m = generate_mesh(&flat_scene(), 0.5).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains(&format!("nodes {}", m.n_nodes())));
        assert!(text.contains(&format!("elements {}", m.n_elements())));
        assert!(text.contains("trace_top"));
        let n_lines = text.lines().count();
        assert!(n_lines > m.n_nodes() + m.n_elements());
    }
}
