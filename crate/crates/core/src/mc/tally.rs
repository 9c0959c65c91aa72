//! Track-length and face-crossing accumulators.

use serde::{Deserialize, Serialize};
use std::io::{self, Write};

/// Per-cell track-length sums.
///
/// `sum_wl` and `sum_mu2_wl` accumulate `w·ℓ` and `μ²·w·ℓ`. The `sq_*` and
/// `cross` fields hold sums over histories of the squared (and mixed)
/// per-history totals, used for history-level variance estimates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellTally {
    pub sum_wl: f64,
    pub sum_mu2_wl: f64,
    pub sq_wl: f64,
    pub sq_mu2_wl: f64,
    pub cross: f64,
}

/// Per-face crossing sums.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FaceTally {
    /// `Σ w/|μ|` (with the `|μ|` floor applied).
    pub sum_w_over_mu: f64,
    /// `Σ w·sign(μ)`, the net current.
    pub sum_w_signed: f64,
    /// `Σ |μ|·w`.
    pub sum_mu_w: f64,
}

/// Accumulated tallies over a set of histories on a fixed mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TallySet {
    cells: Vec<CellTally>,
    faces: Vec<FaceTally>,
    histories: u64,
    anomalous: u64,
    total_source: f64,
    #[serde(skip)]
    pending: Vec<[f64; 2]>,
    #[serde(skip)]
    touched: Vec<usize>,
}

impl PartialEq for TallySet {
    fn eq(&self, other: &Self) -> bool {
        self.cells == other.cells
            && self.faces == other.faces
            && self.histories == other.histories
            && self.anomalous == other.anomalous
            && self.total_source.to_bits() == other.total_source.to_bits()
    }
}

impl TallySet {
    pub fn new(cells: usize, total_source: f64) -> Self {
        Self {
            cells: vec![CellTally::default(); cells],
            faces: vec![FaceTally::default(); cells + 1],
            histories: 0,
            anomalous: 0,
            total_source,
            pending: vec![[0.0; 2]; cells],
            touched: Vec::new(),
        }
    }

    pub fn cells(&self) -> &[CellTally] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &CellTally {
        &self.cells[i]
    }

    pub fn faces(&self) -> &[FaceTally] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &FaceTally {
        &self.faces[f]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Completed histories.
    pub fn histories(&self) -> u64 {
        self.histories
    }

    /// Histories cut off by the event cap.
    pub fn anomalous_histories(&self) -> u64 {
        self.anomalous
    }

    /// `∫ Q dx`, the normalization applied to per-history estimates.
    pub fn total_source(&self) -> f64 {
        self.total_source
    }

    /// Record a track segment of path length `length` in `cell`.
    pub fn score_track(&mut self, cell: usize, mu: f64, weight: f64, length: f64) {
        let wl = weight * length;
        let slot = &mut self.pending[cell];
        if slot[0] == 0.0 && slot[1] == 0.0 {
            self.touched.push(cell);
        }
        slot[0] += wl;
        slot[1] += mu * mu * wl;
    }

    /// Record a crossing of `face` by a particle with direction `mu`.
    pub fn score_crossing(&mut self, face: usize, mu: f64, weight: f64, mu_floor: f64) {
        let t = &mut self.faces[face];
        t.sum_w_over_mu += weight / mu.abs().max(mu_floor);
        t.sum_w_signed += weight * mu.signum();
        t.sum_mu_w += mu.abs() * weight;
    }

    /// Fold the pending per-history track sums into the totals.
    pub fn end_history(&mut self, anomalous: bool) {
        // cells in first-touch order; keeps the sums independent of hashing
        for &c in &self.touched {
            let [a, b] = std::mem::take(&mut self.pending[c]);
            let t = &mut self.cells[c];
            t.sum_wl += a;
            t.sum_mu2_wl += b;
            t.sq_wl += a * a;
            t.sq_mu2_wl += b * b;
            t.cross += a * b;
        }
        self.touched.clear();
        self.histories += 1;
        if anomalous {
            self.anomalous += 1;
        }
    }

    /// Add another tally set over the same mesh.
    pub fn merge(&mut self, other: &TallySet) {
        assert_eq!(
            self.cells.len(),
            other.cells.len(),
            "merging tallies over different meshes"
        );
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.sum_wl += b.sum_wl;
            a.sum_mu2_wl += b.sum_mu2_wl;
            a.sq_wl += b.sq_wl;
            a.sq_mu2_wl += b.sq_mu2_wl;
            a.cross += b.cross;
        }
        for (a, b) in self.faces.iter_mut().zip(&other.faces) {
            a.sum_w_over_mu += b.sum_w_over_mu;
            a.sum_w_signed += b.sum_w_signed;
            a.sum_mu_w += b.sum_mu_w;
        }
        self.histories += other.histories;
        self.anomalous += other.anomalous;
    }

    /// Raw tally dump: a cell section followed by a face section.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "cell,sum_wl,sum_mu2_wl,sq_wl,sq_mu2_wl,cross")?;
        for (i, c) in self.cells.iter().enumerate() {
            writeln!(
                out,
                "{i},{:e},{:e},{:e},{:e},{:e}",
                c.sum_wl, c.sum_mu2_wl, c.sq_wl, c.sq_mu2_wl, c.cross
            )?;
        }
        writeln!(out)?;
        writeln!(out, "face,sum_w_over_mu,sum_w_signed,sum_mu_w")?;
        for (f, t) in self.faces.iter().enumerate() {
            writeln!(
                out,
                "{f},{:e},{:e},{:e}",
                t.sum_w_over_mu, t.sum_w_signed, t.sum_mu_w
            )?;
        }
        Ok(())
    }
}
