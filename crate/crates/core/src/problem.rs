//! Slab transport problem, spatial mesh and Monte Carlo run configuration.
//!
//! The problem is one-group, steady-state, isotropic scattering and source on
//! `[0, L]` with vacuum boundaries on both ends. Cross sections are piecewise
//! constant over [`MaterialRegion`]s; the absorption cross section is always
//! derived as `sigma_t - sigma_s`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when matching region boundaries to mesh edges.
const EDGE_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("invalid region {index}: {reason}")]
    InvalidRegion { index: usize, reason: String },
    #[error("regions do not tile [0, {length}]: {reason}")]
    Tiling { length: f64, reason: String },
    #[error("slab length must be positive, got {0}")]
    Length(f64),
    #[error("mesh needs at least one cell")]
    EmptyMesh,
    #[error("mesh edges must be strictly increasing (edge {0})")]
    NonMonotoneEdges(usize),
    #[error("region boundary at x = {0} does not coincide with a mesh edge")]
    UnalignedRegion(f64),
    #[error("position x = {x} is outside the slab [0, {length}]")]
    OutOfDomain { x: f64, length: f64 },
    #[error("invalid run configuration: {0}")]
    Config(String),
}

/// A slab interval with constant material data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialRegion {
    pub x_left: f64,
    pub x_right: f64,
    pub sigma_t: f64,
    pub sigma_s: f64,
    pub q: f64,
}

impl MaterialRegion {
    pub fn sigma_a(&self) -> f64 {
        self.sigma_t - self.sigma_s
    }

    fn validate(&self, index: usize) -> Result<(), ProblemError> {
        let bad = |reason: &str| ProblemError::InvalidRegion {
            index,
            reason: reason.to_string(),
        };
        let finite = [
            self.x_left,
            self.x_right,
            self.sigma_t,
            self.sigma_s,
            self.q,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(bad("non-finite value"));
        }
        if self.x_left >= self.x_right {
            return Err(bad("x_left must be < x_right"));
        }
        if self.sigma_t <= 0.0 {
            return Err(bad("sigma_t must be > 0"));
        }
        if self.sigma_s < 0.0 || self.sigma_s > self.sigma_t {
            return Err(bad("need 0 <= sigma_s <= sigma_t"));
        }
        if self.q < 0.0 {
            return Err(bad("q must be >= 0"));
        }
        Ok(())
    }
}

/// Material constants at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossSections {
    pub sigma_t: f64,
    pub sigma_s: f64,
    pub q: f64,
}

impl CrossSections {
    pub fn sigma_a(&self) -> f64 {
        self.sigma_t - self.sigma_s
    }
}

/// Slab `[0, L]` tiled by material regions, vacuum on both faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabProblem {
    length: f64,
    regions: Vec<MaterialRegion>,
}

impl SlabProblem {
    pub fn new(length: f64, regions: Vec<MaterialRegion>) -> Result<Self, ProblemError> {
        if !(length.is_finite() && length > 0.0) {
            return Err(ProblemError::Length(length));
        }
        if regions.is_empty() {
            return Err(ProblemError::Tiling {
                length,
                reason: "no regions".into(),
            });
        }
        for (i, r) in regions.iter().enumerate() {
            r.validate(i)?;
        }
        let tol = EDGE_MATCH_TOL * length;
        if regions[0].x_left.abs() > tol {
            return Err(ProblemError::Tiling {
                length,
                reason: format!("first region starts at {}", regions[0].x_left),
            });
        }
        for (i, pair) in regions.windows(2).enumerate() {
            if (pair[0].x_right - pair[1].x_left).abs() > tol {
                return Err(ProblemError::Tiling {
                    length,
                    reason: format!("gap or overlap between regions {} and {}", i, i + 1),
                });
            }
        }
        let last = regions.last().unwrap().x_right;
        if (last - length).abs() > tol {
            return Err(ProblemError::Tiling {
                length,
                reason: format!("last region ends at {last}"),
            });
        }
        Ok(Self { length, regions })
    }

    /// Homogeneous slab with a single region.
    pub fn homogeneous(
        length: f64,
        sigma_t: f64,
        sigma_s: f64,
        q: f64,
    ) -> Result<Self, ProblemError> {
        Self::new(
            length,
            vec![MaterialRegion {
                x_left: 0.0,
                x_right: length,
                sigma_t,
                sigma_s,
                q,
            }],
        )
    }

    /// The unit-slab benchmark: sigma_t = 1, sigma_s = 0.9, Q = 1.
    pub fn benchmark() -> Self {
        Self::homogeneous(1.0, 1.0, 0.9, 1.0).expect("benchmark data is valid")
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn regions(&self) -> &[MaterialRegion] {
        &self.regions
    }

    /// Index of the region containing `x`. Intervals are half-open
    /// `[x_left, x_right)` except the last, which is closed at `L`.
    pub fn region_index(&self, x: f64) -> Result<usize, ProblemError> {
        if !(0.0..=self.length).contains(&x) {
            return Err(ProblemError::OutOfDomain {
                x,
                length: self.length,
            });
        }
        let idx = self.regions.partition_point(|r| r.x_right <= x);
        Ok(idx.min(self.regions.len() - 1))
    }

    pub fn cross_sections_at(&self, x: f64) -> Result<CrossSections, ProblemError> {
        let r = &self.regions[self.region_index(x)?];
        Ok(CrossSections {
            sigma_t: r.sigma_t,
            sigma_s: r.sigma_s,
            q: r.q,
        })
    }

    /// Total source `∫ Q dx` over the slab.
    pub fn total_source(&self) -> f64 {
        self.regions
            .iter()
            .map(|r| r.q * (r.x_right - r.x_left))
            .sum()
    }
}

/// Ordered mesh edges `0 = x_0 < x_1 < ... < x_I = L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    edges: Vec<f64>,
}

impl Mesh1D {
    pub fn from_edges(edges: Vec<f64>) -> Result<Self, ProblemError> {
        if edges.len() < 2 {
            return Err(ProblemError::EmptyMesh);
        }
        for (i, pair) in edges.windows(2).enumerate() {
            if pair[1].partial_cmp(&pair[0]) != Some(std::cmp::Ordering::Greater) {
                return Err(ProblemError::NonMonotoneEdges(i + 1));
            }
        }
        Ok(Self { edges })
    }

    /// Uniform mesh of `cells` cells over the problem's slab. Every material
    /// interface must land on a mesh edge.
    pub fn uniform(problem: &SlabProblem, cells: usize) -> Result<Self, ProblemError> {
        if cells == 0 {
            return Err(ProblemError::EmptyMesh);
        }
        let length = problem.length();
        let dx = length / cells as f64;
        let mut edges: Vec<f64> = (0..cells).map(|i| i as f64 * dx).collect();
        edges.push(length);
        for r in &problem.regions()[1..] {
            let k = (r.x_left / dx).round();
            if (k * dx - r.x_left).abs() > EDGE_MATCH_TOL * length {
                return Err(ProblemError::UnalignedRegion(r.x_left));
            }
            // snap so that region lookups by cell midpoint stay exact
            edges[k as usize] = r.x_left;
        }
        Self::from_edges(edges)
    }

    /// Subdivide every cell into `factor` equal pieces.
    pub fn refined(&self, factor: usize) -> Self {
        assert!(factor >= 1, "refinement factor must be >= 1");
        let mut edges = Vec::with_capacity(self.cells() * factor + 1);
        for i in 0..self.cells() {
            let (a, b) = (self.edges[i], self.edges[i + 1]);
            let h = (b - a) / factor as f64;
            for k in 0..factor {
                edges.push(a + k as f64 * h);
            }
        }
        edges.push(*self.edges.last().unwrap());
        Self { edges }
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn cells(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn faces(&self) -> usize {
        self.edges.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|p| p[1] - p[0]).collect()
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }

    pub fn length(&self) -> f64 {
        self.edges[self.cells()] - self.edges[0]
    }

    /// Cell containing `x`, half-open convention, closed at the right end.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let n = self.cells();
        if x < self.edges[0] || x > self.edges[n] {
            return None;
        }
        let idx = self.edges[1..].partition_point(|&e| e <= x);
        Some(idx.min(n - 1))
    }
}

/// Per-cell material constants on a mesh whose edges align with the regions.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMaterials {
    pub sigma_t: Vec<f64>,
    pub sigma_s: Vec<f64>,
    pub q: Vec<f64>,
}

impl CellMaterials {
    pub fn new(problem: &SlabProblem, mesh: &Mesh1D) -> Result<Self, ProblemError> {
        if (mesh.length() - problem.length()).abs() > EDGE_MATCH_TOL * problem.length() {
            return Err(ProblemError::Config(format!(
                "mesh length {} differs from slab length {}",
                mesh.length(),
                problem.length()
            )));
        }
        for r in &problem.regions()[1..] {
            let aligned = mesh
                .edges()
                .iter()
                .any(|&e| (e - r.x_left).abs() <= EDGE_MATCH_TOL * problem.length());
            if !aligned {
                return Err(ProblemError::UnalignedRegion(r.x_left));
            }
        }
        let n = mesh.cells();
        let mut out = Self {
            sigma_t: Vec::with_capacity(n),
            sigma_s: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
        };
        for i in 0..n {
            let xs = problem.cross_sections_at(mesh.center(i))?;
            out.sigma_t.push(xs.sigma_t);
            out.sigma_s.push(xs.sigma_s);
            out.q.push(xs.q);
        }
        Ok(out)
    }

    pub fn sigma_a(&self, i: usize) -> f64 {
        self.sigma_t[i] - self.sigma_s[i]
    }

    pub fn len(&self) -> usize {
        self.sigma_t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_t.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CaptureMode {
    Analog,
    #[default]
    Implicit,
}

impl std::str::FromStr for CaptureMode {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "analog" => Ok(Self::Analog),
            "implicit" => Ok(Self::Implicit),
            other => Err(ProblemError::Config(format!(
                "unknown capture mode '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for CaptureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Analog => "analog",
            Self::Implicit => "implicit",
        })
    }
}

/// Monte Carlo run parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub histories: u64,
    pub rng_seed: u64,
    pub capture_mode: CaptureMode,
    pub replicate_count: usize,
    /// Implicit-capture weight below which roulette is played.
    pub weight_cutoff: f64,
    /// Roulette survival probability; survivors have weight divided by it.
    pub roulette_survival: f64,
    /// Floor on `|mu|` in the `w/|mu|` face-flux tally.
    pub face_mu_floor: f64,
    /// Collision/crossing events after which a history is abandoned.
    pub max_events: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            histories: 10_000,
            rng_seed: 1,
            capture_mode: CaptureMode::Implicit,
            replicate_count: 1,
            weight_cutoff: 0.01,
            roulette_survival: 0.5,
            face_mu_floor: 1e-3,
            max_events: 1_000_000,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.histories == 0 {
            return Err(ProblemError::Config("histories must be >= 1".into()));
        }
        if self.replicate_count == 0 {
            return Err(ProblemError::Config("replicates must be >= 1".into()));
        }
        if !(self.weight_cutoff > 0.0 && self.weight_cutoff < 1.0) {
            return Err(ProblemError::Config(
                "weight_cutoff must be in (0, 1)".into(),
            ));
        }
        if !(self.roulette_survival > 0.0 && self.roulette_survival <= 1.0) {
            return Err(ProblemError::Config(
                "roulette_survival must be in (0, 1]".into(),
            ));
        }
        if !(self.face_mu_floor >= 0.0 && self.face_mu_floor < 1.0) {
            return Err(ProblemError::Config(
                "face_mu_floor must be in [0, 1)".into(),
            ));
        }
        if self.max_events == 0 {
            return Err(ProblemError::Config("max_events must be >= 1".into()));
        }
        Ok(())
    }
}
