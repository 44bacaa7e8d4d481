//! JSON run configuration: a scene block plus optional per-subcommand
//! experiment sections, and a stable fingerprint of the raw file bytes.
//!
//! The fingerprint hashes the bytes as they sit on disk — before parsing —
//! so any edit to the file (even whitespace) changes it.  Emitted datasets
//! embed the fingerprint, which ties every artifact back to the exact
//! configuration that produced it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fields::FieldKind;
use crate::geometry::{Obstacle, Profile, Scene};
use crate::{Complex, Result};

/// 64-bit FNV-1a over a byte slice.  Chosen as the dataset fingerprint for
/// its fixed, documented constants: anyone can recompute it from the file
/// with a ten-line script, with no dependency on this crate.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 14695981039346656037;
    const PRIME: u64 = 1099511628211;
    let mut h = OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// Scene block of a run configuration.  Wavenumber squares are written as
/// `[re, im]` pairs; the interface and obstacle reuse the geometry wire
/// formats (`family`- and `kind`-tagged objects).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub profile: Profile,
    #[serde(default)]
    pub obstacle: Option<Obstacle>,
    pub half_height: f64,
    pub half_width: f64,
    pub k1_sq: [f64; 2],
    pub k2_sq: [f64; 2],
}

impl SceneConfig {
    pub fn k1_sq(&self) -> Complex {
        Complex::new(self.k1_sq[0], self.k1_sq[1])
    }

    pub fn k2_sq(&self) -> Complex {
        Complex::new(self.k2_sq[0], self.k2_sq[1])
    }

    /// Validates the block and builds the scene.
    pub fn build(&self) -> Result<Scene> {
        Scene::new(
            self.profile.clone(),
            self.obstacle.clone(),
            self.half_height,
            self.half_width,
            self.k1_sq(),
            self.k2_sq(),
        )
    }
}

/// Which field a dataset or slice stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldChoice {
    Total,
    Scattered,
    Incident,
}

impl FieldChoice {
    pub fn kind(self) -> FieldKind {
        match self {
            FieldChoice::Total => FieldKind::TotalSmoothed,
            FieldChoice::Scattered => FieldKind::Scattered,
            FieldChoice::Incident => FieldKind::Incident,
        }
    }
}

fn default_field() -> FieldChoice {
    FieldChoice::Scattered
}

fn default_grid_n() -> usize {
    61
}

/// One solve with a point source, sampled on a uniform grid and written as
/// a field-slice CSV (`x1,x2,re,im,kind`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub source: [f64; 2],
    /// Use the horizontal-derivative (dipole) source instead of a monopole.
    #[serde(default)]
    pub dipole: bool,
    /// Sampling window; defaults to the strip inset by one mesh cell.
    #[serde(default)]
    pub span_x: Option<[f64; 2]>,
    #[serde(default)]
    pub span_y: Option<[f64; 2]>,
    #[serde(default = "default_grid_n")]
    pub nx: usize,
    #[serde(default = "default_grid_n")]
    pub ny: usize,
}

/// Source/receiver exchange check on a list of point pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReciprocitySection {
    /// Each entry is `[[z1, z2], [w1, w2]]` — the two points to swap.
    pub pairs: Vec<[[f64; 2]; 2]>,
}

/// Dipole-vs-difference-quotient consistency check.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HspswSection {
    pub source: [f64; 2],
    /// Strictly decreasing difference steps.
    pub epsilons: Vec<f64>,
}

/// Source-approach stability check: march a monopole onto the interface
/// and watch the field norm over a fixed observation rectangle.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproachSection {
    /// Horizontal position of the interface anchor point.
    pub x1_star: f64,
    /// Largest standoff; step `j` uses `approach_radius / j`.
    pub approach_radius: f64,
    pub j_max: usize,
    pub region_center: [f64; 2],
    pub region_half: [f64; 2],
}

/// Multistatic dataset: a line of sources against a line of receivers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub source_height: f64,
    pub source_span: [f64; 2],
    pub n_sources: usize,
    pub receiver_height: f64,
    pub receiver_span: [f64; 2],
    pub n_receivers: usize,
    #[serde(default = "default_field")]
    pub field: FieldChoice,
}

/// Convergence study selector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "study", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvergeSection {
    /// Manufactured-solution ladder on the configured scene.  The bump must
    /// sit strictly inside one layer; its wavenumber follows that layer.
    Mms {
        center: [f64; 2],
        half_widths: [f64; 2],
        #[serde(default)]
        phase: [f64; 2],
        /// Strictly decreasing target cell widths, at least three.
        mesh_sizes: Vec<f64>,
    },
    /// Flat-interface validation against the independent layered reference.
    /// Ignores the configured profile and obstacle (the reference only
    /// exists for a flat, obstacle-free scene) but keeps the wavenumbers
    /// and strip dimensions.
    Flat {
        source: [f64; 2],
        source_radius: f64,
        receiver_height: f64,
        receiver_span: [f64; 2],
        n_receivers: usize,
        /// Strictly decreasing target cell widths, at least two.
        mesh_sizes: Vec<f64>,
    },
}

/// Reference-field slices from the layered-medium formula, written as a
/// field-slice CSV.  Only valid for a flat interface at height zero with
/// no obstacle.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub source: [f64; 2],
    /// Horizontal slice heights to sample (any height except the source's).
    pub heights: Vec<f64>,
    pub span: [f64; 2],
    pub n_samples: usize,
}

/// Top-level run configuration.  Subcommand sections are optional; running
/// a subcommand whose section is missing is a configuration error.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scene: SceneConfig,
    /// Target mesh cell width; the CLI flag overrides it.
    #[serde(default)]
    pub mesh_h: Option<f64>,
    /// Smoothing-patch radius for point sources; defaults per source.
    #[serde(default)]
    pub source_radius: Option<f64>,
    #[serde(default)]
    pub solve: Option<SolveSection>,
    #[serde(default)]
    pub reciprocity: Option<ReciprocitySection>,
    #[serde(default)]
    pub hspsw: Option<HspswSection>,
    #[serde(default)]
    pub approach: Option<ApproachSection>,
    #[serde(default)]
    pub dataset: Option<DatasetSection>,
    #[serde(default)]
    pub converge: Option<ConvergeSection>,
    #[serde(default)]
    pub oracle: Option<OracleSection>,
}

/// Reads a configuration file and returns it with the FNV-1a fingerprint
/// of the raw bytes.
pub fn load(path: &Path) -> Result<(RunConfig, u64)> {
    let bytes = fs::read(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    let hash = fnv1a64(&bytes);
    let cfg: RunConfig = serde_json::from_slice(&bytes)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    Ok((cfg, hash))
}
