//! Closure functionals for the low-order equations, estimated from tallies.
//!
//! Per cell: the Eddington factor `E_i = Σμ²wℓ / Σwℓ`, the second-moment
//! factor `F_i = S/(NΔx_i) · Σ(1/3 − μ²)wℓ`, and the scalar flux
//! `φ_i = S/(NΔx_i) · Σwℓ`, where `S = ∫Q dx`. Per boundary: the ratio of
//! outgoing current to face flux `C_b`, the face Eddington factor `E_b` and
//! `F_b = (1/3 − E_b)·φ_b`.

use crate::mc::TallySet;
use crate::problem::Mesh1D;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

pub const ONE_THIRD: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFactors {
    /// `|J| / φ` at the boundary face.
    pub c: f64,
    pub e: f64,
    pub f: f64,
    pub phi: f64,
    pub fallback: bool,
}

impl BoundaryFactors {
    /// Marshak values used when a face has no crossings.
    pub fn marshak() -> Self {
        Self {
            c: 0.5,
            e: ONE_THIRD,
            f: 0.0,
            phi: 0.0,
            fallback: true,
        }
    }
}

/// Seed and history count of the tallies a closure set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub histories: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureSet {
    pub eddington: Vec<f64>,
    pub sm_factor: Vec<f64>,
    pub phi_mc: Vec<f64>,
    /// Relative standard error of `E_i` (0 where undefined).
    pub eddington_rel_err: Vec<f64>,
    /// Relative standard error of `φ_i` (0 where undefined).
    pub phi_rel_err: Vec<f64>,
    pub left: BoundaryFactors,
    pub right: BoundaryFactors,
    pub fallback_cells: Vec<usize>,
    pub provenance: Option<Provenance>,
}

/// Returns `(E_i, fallback)`; empty cells get the diffusion value 1/3.
pub fn estimate_eddington(tallies: &TallySet, i: usize) -> (f64, bool) {
    let c = tallies.cell(i);
    if c.sum_wl > 0.0 {
        (c.sum_mu2_wl / c.sum_wl, false)
    } else {
        (ONE_THIRD, true)
    }
}

pub fn estimate_sm_factor(tallies: &TallySet, i: usize, histories: u64, dx: f64) -> f64 {
    let c = tallies.cell(i);
    if c.sum_wl <= 0.0 {
        return 0.0;
    }
    tallies.total_source() / (histories as f64 * dx) * (ONE_THIRD * c.sum_wl - c.sum_mu2_wl)
}

pub fn estimate_scalar_flux(tallies: &TallySet, i: usize, histories: u64, dx: f64) -> f64 {
    tallies.total_source() * tallies.cell(i).sum_wl / (histories as f64 * dx)
}

pub fn estimate_boundary_factors(
    tallies: &TallySet,
    side: Side,
    histories: u64,
) -> BoundaryFactors {
    let face = match side {
        Side::Left => 0,
        Side::Right => tallies.num_cells(),
    };
    let t = tallies.face(face);
    if t.sum_w_over_mu <= 0.0 {
        return BoundaryFactors::marshak();
    }
    let phi = tallies.total_source() * t.sum_w_over_mu / histories as f64;
    let e = t.sum_mu_w / t.sum_w_over_mu;
    BoundaryFactors {
        c: t.sum_w_signed.abs() / t.sum_w_over_mu,
        e,
        f: (ONE_THIRD - e) * phi,
        phi,
        fallback: false,
    }
}

/// History-level relative standard errors of the flux and Eddington factor
/// in cell `i` (delta method for the ratio).
fn relative_errors(tallies: &TallySet, i: usize) -> (f64, f64) {
    let n = tallies.histories() as f64;
    let c = tallies.cell(i);
    if n < 2.0 || c.sum_wl <= 0.0 {
        return (0.0, 0.0);
    }
    let mean_b = c.sum_wl / n;
    let var_b = ((c.sq_wl / n - mean_b * mean_b) * n / (n - 1.0)).max(0.0);
    let phi_rel = (var_b / n).sqrt() / mean_b;
    let r = c.sum_mu2_wl / c.sum_wl;
    let s2 = ((c.sq_mu2_wl - 2.0 * r * c.cross + r * r * c.sq_wl) / (n - 1.0)).max(0.0);
    let e_rel = if r > 0.0 {
        (s2 / n).sqrt() / mean_b / r
    } else {
        0.0
    };
    (phi_rel, e_rel)
}

impl ClosureSet {
    /// Builds every cell and boundary functional from one tally set.
    pub fn from_tallies(tallies: &TallySet, mesh: &Mesh1D, provenance: Option<Provenance>) -> Self {
        assert_eq!(
            tallies.num_cells(),
            mesh.cells(),
            "tallies and mesh disagree"
        );
        let n = tallies.histories().max(1);
        let cells = mesh.cells();
        let mut out = Self {
            eddington: Vec::with_capacity(cells),
            sm_factor: Vec::with_capacity(cells),
            phi_mc: Vec::with_capacity(cells),
            eddington_rel_err: Vec::with_capacity(cells),
            phi_rel_err: Vec::with_capacity(cells),
            left: estimate_boundary_factors(tallies, Side::Left, n),
            right: estimate_boundary_factors(tallies, Side::Right, n),
            fallback_cells: Vec::new(),
            provenance,
        };
        for i in 0..cells {
            let dx = mesh.width(i);
            let (e, fallback) = estimate_eddington(tallies, i);
            if fallback {
                out.fallback_cells.push(i);
            }
            let (phi_rel, e_rel) = relative_errors(tallies, i);
            out.eddington.push(e);
            out.sm_factor.push(estimate_sm_factor(tallies, i, n, dx));
            out.phi_mc.push(estimate_scalar_flux(tallies, i, n, dx));
            out.eddington_rel_err.push(e_rel);
            out.phi_rel_err.push(phi_rel);
        }
        out
    }

    /// Closures from known angular moments: cell-average scalar flux and
    /// second moment `∫μ²ψ dμ`, plus boundary factors.
    pub fn from_moments(
        phi: &[f64],
        second_moment: &[f64],
        left: BoundaryFactors,
        right: BoundaryFactors,
    ) -> Self {
        assert_eq!(phi.len(), second_moment.len());
        let mut fallback_cells = Vec::new();
        let eddington = phi
            .iter()
            .zip(second_moment)
            .enumerate()
            .map(|(i, (&p, &m))| {
                if p > 0.0 {
                    m / p
                } else {
                    fallback_cells.push(i);
                    ONE_THIRD
                }
            })
            .collect();
        Self {
            eddington,
            sm_factor: phi
                .iter()
                .zip(second_moment)
                .map(|(&p, &m)| ONE_THIRD * p - m)
                .collect(),
            phi_mc: phi.to_vec(),
            eddington_rel_err: vec![0.0; phi.len()],
            phi_rel_err: vec![0.0; phi.len()],
            left,
            right,
            fallback_cells,
            provenance: None,
        }
    }

    /// Diffusion closures: `E ≡ 1/3`, `F ≡ 0`, Marshak boundaries.
    pub fn diffusion(cells: usize) -> Self {
        Self {
            eddington: vec![ONE_THIRD; cells],
            sm_factor: vec![0.0; cells],
            phi_mc: vec![0.0; cells],
            eddington_rel_err: vec![0.0; cells],
            phi_rel_err: vec![0.0; cells],
            left: BoundaryFactors::marshak(),
            right: BoundaryFactors::marshak(),
            fallback_cells: Vec::new(),
            provenance: None,
        }
    }

    /// Replaces the angular closures by their diffusion values while keeping
    /// the MC flux, boundary current ratios and provenance.
    pub fn with_diffusion_closures(mut self) -> Self {
        self.eddington.iter_mut().for_each(|e| *e = ONE_THIRD);
        self.sm_factor.iter_mut().for_each(|f| *f = 0.0);
        for b in [&mut self.left, &mut self.right] {
            b.e = ONE_THIRD;
            b.f = 0.0;
        }
        self
    }

    pub fn cells(&self) -> usize {
        self.eddington.len()
    }

    pub fn boundary(&self, side: Side) -> &BoundaryFactors {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn is_fallback(&self, i: usize) -> bool {
        self.fallback_cells.binary_search(&i).is_ok()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "cell,E,F,phi_mc,stderr_E_rel,stderr_phi_rel,fallback")?;
        for i in 0..self.cells() {
            writeln!(
                out,
                "{i},{:.12e},{:.12e},{:.12e},{:.6e},{:.6e},{}",
                self.eddington[i],
                self.sm_factor[i],
                self.phi_mc[i],
                self.eddington_rel_err[i],
                self.phi_rel_err[i],
                u8::from(self.is_fallback(i))
            )?;
        }
        writeln!(out)?;
        writeln!(out, "boundary,C_b,E_b,F_b,phi_b,fallback")?;
        for side in [Side::Left, Side::Right] {
            let b = self.boundary(side);
            writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{}",
                side.as_str(),
                b.c,
                b.e,
                b.f,
                b.phi,
                u8::from(b.fallback)
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{run_histories, TallySet};
    use crate::problem::{RunConfig, SlabProblem};
    use approx::assert_relative_eq;

    fn three_tracks() -> TallySet {
        let mut t = TallySet::new(1, 1.0);
        for &(mu, w, l) in &[(0.8, 1.0, 0.2), (0.5, 0.5, 0.4), (-0.1, 2.0, 0.1)] {
            t.score_track(0, mu, w, l);
            t.end_history(false);
        }
        t
    }

    #[test]
    fn eddington_weighted_average() {
        let t = three_tracks();
        let (e, fb) = estimate_eddington(&t, 0);
        assert!(!fb);
        assert_relative_eq!(e, 0.18 / 0.6, max_relative = 1e-14);

        let mut t = TallySet::new(2, 1.0);
        t.score_track(0, 1.0, 1.0, 0.3);
        t.end_history(false);
        assert_eq!(estimate_eddington(&t, 0), (1.0, false));
        assert_eq!(estimate_eddington(&t, 1), (ONE_THIRD, true));
    }

    #[test]
    fn sm_factor_and_flux() {
        let t = three_tracks();
        assert_relative_eq!(
            estimate_sm_factor(&t, 0, 3, 0.5),
            (0.2 - 0.18) / 1.5,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            estimate_scalar_flux(&t, 0, 3, 0.5),
            0.4,
            max_relative = 1e-14
        );

        let mut t = TallySet::new(2, 1.0);
        t.score_track(0, ONE_THIRD.sqrt(), 1.0, 1.0);
        t.end_history(false);
        assert!(estimate_sm_factor(&t, 0, 1, 1.0).abs() < 1e-16);
        assert_eq!(estimate_sm_factor(&t, 1, 1, 1.0), 0.0);
        assert_eq!(estimate_scalar_flux(&t, 1, 1, 1.0), 0.0);

        let mut t = TallySet::new(1, 1.0);
        t.score_track(0, 1.0, 1.0, 1.0);
        t.end_history(false);
        assert_eq!(estimate_scalar_flux(&t, 0, 1, 1.0), 1.0);
    }

    #[test]
    fn boundary_factors_single_crossing() {
        let mut t = TallySet::new(1, 1.0);
        t.score_crossing(0, -0.5, 1.0, 1e-3);
        t.end_history(false);
        let b = estimate_boundary_factors(&t, Side::Left, 1);
        assert_eq!(b.c, 0.5);
        assert_eq!(b.e, 0.25);
        assert_eq!(b.phi, 2.0);
        assert_relative_eq!(b.f, (ONE_THIRD - 0.25) * 2.0);
        assert!(!b.fallback);
        assert_eq!(
            estimate_boundary_factors(&t, Side::Right, 1),
            BoundaryFactors::marshak()
        );
        let m = BoundaryFactors::marshak();
        assert_eq!((m.c, m.e, m.f, m.phi), (0.5, ONE_THIRD, 0.0, 0.0));
    }

    #[test]
    fn identity_holds_on_benchmark_run() {
        let p = SlabProblem::benchmark();
        let mesh = Mesh1D::uniform(&p, 8).unwrap();
        let cfg = RunConfig {
            histories: 2000,
            rng_seed: 3,
            ..RunConfig::default()
        };
        let t = run_histories(&p, &mesh, &cfg).unwrap();
        let c = ClosureSet::from_tallies(&t, &mesh, None);
        assert!(c.fallback_cells.is_empty());
        for i in 0..8 {
            let rhs = (ONE_THIRD - c.eddington[i]) * c.phi_mc[i];
            assert!((c.sm_factor[i] - rhs).abs() <= 1e-12 * c.sm_factor[i].abs());
            assert!(c.eddington[i] > 0.0 && c.eddington[i] <= 1.0);
            assert!(c.eddington_rel_err[i] > 0.0 && c.eddington_rel_err[i] < 0.1);
        }
        for b in [c.left, c.right] {
            assert!(b.c > 0.0 && b.c <= 1.0);
            assert!(b.e > 0.0 && b.e <= 1.0);
        }
    }

    #[test]
    fn diffusion_override_keeps_flux() {
        let mut t = TallySet::new(1, 1.0);
        t.score_track(0, 0.9, 1.0, 1.0);
        t.score_crossing(1, 0.9, 1.0, 1e-3);
        t.end_history(false);
        let mesh = Mesh1D::from_edges(vec![0.0, 1.0]).unwrap();
        let c = ClosureSet::from_tallies(&t, &mesh, None).with_diffusion_closures();
        assert_eq!(c.eddington, vec![ONE_THIRD]);
        assert_eq!(c.sm_factor, vec![0.0]);
        assert_eq!(c.phi_mc, vec![1.0]);
        assert_eq!(c.right.e, ONE_THIRD);
    }

    #[test]
    fn csv_has_cells_and_boundaries() {
        let mut buf = Vec::new();
        ClosureSet::diffusion(3).write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("left,5.0"));
        assert_eq!(s.lines().count(), 1 + 3 + 1 + 1 + 2);
    }
}
