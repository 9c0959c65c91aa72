//! Discrete-ordinates reference solutions.
//!
//! Diamond-difference sweeps with Gauss–Legendre quadrature, source iteration
//! on the isotropic scattering source, and Aitken Δ² extrapolation of
//! target-cell averages over a ladder of refined space/angle grids.

use crate::closures::{BoundaryFactors, ClosureSet, Side, ONE_THIRD};
use crate::problem::{CellMaterials, Mesh1D, ProblemError, SlabProblem};
use serde::{Deserialize, Serialize};
use std::io::{self, Write};
use thiserror::Error;

/// Significant digits a benchmark must certify.
pub const REQUIRED_DIGITS: u32 = 6;
/// Digit count reported when the ladder is converged to round-off.
pub const MAX_DIGITS: u32 = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SnError {
    #[error("quadrature order must be even and >= 2, got {0}")]
    QuadratureOrder(usize),
    #[error("source iteration did not converge in {iterations} iterations (spectral radius ≈ {spectral_radius:.4})")]
    NonConvergence {
        iterations: usize,
        spectral_radius: f64,
    },
    #[error("source array has {got} entries, mesh has {expected} cells")]
    SourceLength { got: usize, expected: usize },
    #[error("refinement ladder needs at least 3 levels, got {0}")]
    ShortLadder(usize),
    #[error("ladder is {kind} in target cell {cell}: levels {values:?}")]
    Ladder {
        cell: usize,
        kind: &'static str,
        values: [f64; 3],
    },
    #[error("benchmark certified only {digits} digits in cell {cell} (need {required})")]
    Certification {
        cell: usize,
        digits: u32,
        required: u32,
    },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularQuadrature {
    pub mu: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AngularQuadrature {
    pub fn order(&self) -> usize {
        self.mu.len()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], ascending in `mu`.
pub fn gauss_legendre(n: usize) -> Result<AngularQuadrature, SnError> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(SnError::QuadratureOrder(n));
    }
    let mut mu = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n / 2;
    for k in 0..half {
        // Tricomi initial guess for the k-th largest root
        let theta = std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5);
        let mut x = theta.cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        mu[n - 1 - k] = x;
        mu[k] = -x;
        weights[n - 1 - k] = w;
        weights[k] = w;
    }
    Ok(AngularQuadrature { mu, weights })
}

/// Half-range (double) Gauss–Legendre: `n/2` Gauss points mapped onto each
/// of `[-1, 0]` and `[0, 1]`. Integrates the boundary discontinuity of the
/// angular flux at `μ = 0` exactly, unlike the full-range set.
pub fn double_gauss_legendre(n: usize) -> Result<AngularQuadrature, SnError> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(SnError::QuadratureOrder(n));
    }
    let half = if (n / 2).is_multiple_of(2) {
        gauss_legendre(n / 2)?
    } else {
        // odd half-range order: a single-point rule is mu = 1/2
        odd_gauss_legendre(n / 2)
    };
    let mut mu = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (&x, &w) in half.mu.iter().zip(&half.weights) {
        mu.push(0.5 * (x - 1.0));
        weights.push(0.5 * w);
    }
    for (&x, &w) in half.mu.iter().zip(&half.weights) {
        mu.push(0.5 * (x + 1.0));
        weights.push(0.5 * w);
    }
    Ok(AngularQuadrature { mu, weights })
}

fn odd_gauss_legendre(n: usize) -> AngularQuadrature {
    let mut mu = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        let theta = std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5);
        let mut x = theta.cos();
        if 2 * k + 1 == n {
            x = 0.0;
        } else {
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let step = p / d;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        mu[n - 1 - k] = x;
        mu[k] = -x;
        weights[n - 1 - k] = w;
        weights[k] = w;
    }
    AngularQuadrature { mu, weights }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureKind {
    GaussLegendre,
    DoubleGaussLegendre,
}

impl QuadratureKind {
    pub fn build(self, n: usize) -> Result<AngularQuadrature, SnError> {
        match self {
            QuadratureKind::GaussLegendre => gauss_legendre(n),
            QuadratureKind::DoubleGaussLegendre => double_gauss_legendre(n),
        }
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Sweeps one direction across the mesh from vacuum inflow, calling
/// `visit(i, ψ_avg)` per cell. Returns the exiting edge flux and the number
/// of negative outgoing edge fluxes.
fn sweep_direction(
    mu: f64,
    sigma_t: &[f64],
    widths: &[f64],
    source: &[f64],
    mut visit: impl FnMut(usize, f64),
) -> (f64, usize) {
    let n = widths.len();
    let amu = mu.abs();
    let mut psi_in = 0.0;
    let mut negatives = 0;
    let mut step = |i: usize| {
        let a = sigma_t[i] * widths[i] / (2.0 * amu);
        let out = ((1.0 - a) * psi_in + source[i] * widths[i] / amu) / (1.0 + a);
        if out < 0.0 {
            negatives += 1;
        }
        visit(i, 0.5 * (psi_in + out));
        psi_in = out;
    };
    if mu > 0.0 {
        (0..n).for_each(&mut step);
    } else {
        (0..n).rev().for_each(&mut step);
    }
    (psi_in, negatives)
}

/// Angular flux from a single transport sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularFlux {
    pub cells: usize,
    /// Cell averages, row-major `[cell][direction]`.
    pub cell_average: Vec<f64>,
    /// Edge flux at `x = 0` per direction (zero for incoming directions).
    pub left_edge: Vec<f64>,
    /// Edge flux at `x = L` per direction (zero for incoming directions).
    pub right_edge: Vec<f64>,
    pub negative_edges: usize,
}

impl AngularFlux {
    pub fn at(&self, cell: usize, dir: usize) -> f64 {
        self.cell_average[cell * self.left_edge.len() + dir]
    }
}

/// Diamond-difference sweep for all directions. `source` is the isotropic
/// angular emission density per cell, `(Σ_s φ + Q)/2`.
pub fn sweep(
    materials: &CellMaterials,
    mesh: &Mesh1D,
    quad: &AngularQuadrature,
    source: &[f64],
) -> Result<AngularFlux, SnError> {
    let n = mesh.cells();
    if source.len() != n {
        return Err(SnError::SourceLength {
            got: source.len(),
            expected: n,
        });
    }
    let widths = mesh.widths();
    let m = quad.order();
    let mut out = AngularFlux {
        cells: n,
        cell_average: vec![0.0; n * m],
        left_edge: vec![0.0; m],
        right_edge: vec![0.0; m],
        negative_edges: 0,
    };
    for (k, &mu) in quad.mu.iter().enumerate() {
        let avg = &mut out.cell_average;
        let (exit, neg) = sweep_direction(mu, &materials.sigma_t, &widths, source, |i, psi| {
            avg[i * m + k] = psi
        });
        out.negative_edges += neg;
        if mu > 0.0 {
            out.right_edge[k] = exit;
        } else {
            out.left_edge[k] = exit;
        }
    }
    Ok(out)
}

/// Converged discrete-ordinates solution on one mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnSolution {
    pub edges: Vec<f64>,
    pub quadrature: AngularQuadrature,
    pub phi: Vec<f64>,
    /// Cell-average `∫ μ² ψ dμ`.
    pub second_moment: Vec<f64>,
    /// Exiting angular flux at `x = 0` per direction.
    pub left_edge: Vec<f64>,
    /// Exiting angular flux at `x = L` per direction.
    pub right_edge: Vec<f64>,
    pub iterations: usize,
    pub spectral_radius: f64,
    pub negative_edges: usize,
    pub absorption: f64,
    pub leakage: [f64; 2],
    pub source: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationControl {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for IterationControl {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 100_000,
        }
    }
}

/// Source iteration until the max relative change of `φ` drops below the
/// tolerance.
pub fn source_iteration(
    problem: &SlabProblem,
    mesh: &Mesh1D,
    quad: &AngularQuadrature,
    control: IterationControl,
) -> Result<SnSolution, SnError> {
    let mat = CellMaterials::new(problem, mesh)?;
    let widths = mesh.widths();
    let n = mesh.cells();
    let mut phi = vec![0.0; n];
    let mut new_phi = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    let mut source = vec![0.0; n];
    let mut left_edge = vec![0.0; quad.order()];
    let mut right_edge = vec![0.0; quad.order()];
    let mut prev_change = f64::NAN;
    let mut spectral_radius = 0.0;
    let mut negative_edges;
    let mut iterations = 0;
    loop {
        iterations += 1;
        for i in 0..n {
            source[i] = 0.5 * (mat.sigma_s[i] * phi[i] + mat.q[i]);
        }
        new_phi.iter_mut().for_each(|v| *v = 0.0);
        m2.iter_mut().for_each(|v| *v = 0.0);
        negative_edges = 0;
        for (k, (&mu, &w)) in quad.mu.iter().zip(&quad.weights).enumerate() {
            let wm2 = w * mu * mu;
            let (exit, neg) = sweep_direction(mu, &mat.sigma_t, &widths, &source, |i, psi| {
                new_phi[i] += w * psi;
                m2[i] += wm2 * psi;
            });
            negative_edges += neg;
            if mu > 0.0 {
                right_edge[k] = exit;
            } else {
                left_edge[k] = exit;
            }
        }
        let change = phi
            .iter()
            .zip(&new_phi)
            .map(|(&old, &new)| {
                if new != 0.0 {
                    ((new - old) / new).abs()
                } else {
                    (new - old).abs()
                }
            })
            .fold(0.0, f64::max);
        if prev_change.is_finite() && prev_change > 0.0 {
            spectral_radius = change / prev_change;
        }
        prev_change = change;
        std::mem::swap(&mut phi, &mut new_phi);
        let no_coupling = mat.sigma_s.iter().all(|&s| s == 0.0);
        if change < control.tolerance || no_coupling {
            break;
        }
        if iterations >= control.max_iterations {
            return Err(SnError::NonConvergence {
                iterations,
                spectral_radius,
            });
        }
    }
    let absorption = (0..n).map(|i| mat.sigma_a(i) * widths[i] * phi[i]).sum();
    let source_total = (0..n).map(|i| mat.q[i] * widths[i]).sum();
    let leak = |edge: &[f64]| -> f64 {
        quad.mu
            .iter()
            .zip(&quad.weights)
            .zip(edge)
            .map(|((&mu, &w), &psi)| w * mu.abs() * psi)
            .sum()
    };
    Ok(SnSolution {
        edges: mesh.edges().to_vec(),
        quadrature: quad.clone(),
        leakage: [leak(&left_edge), leak(&right_edge)],
        phi,
        second_moment: m2,
        left_edge,
        right_edge,
        iterations,
        spectral_radius,
        negative_edges,
        absorption,
        source: source_total,
    })
}

impl SnSolution {
    pub fn cells(&self) -> usize {
        self.phi.len()
    }

    /// `|absorption + leakage − source| / source`.
    pub fn balance_error(&self) -> f64 {
        (self.absorption + self.leakage[0] + self.leakage[1] - self.source).abs() / self.source
    }

    /// Boundary factors from the exiting angular flux.
    pub fn boundary_factors(&self, side: Side) -> BoundaryFactors {
        let edge = match side {
            Side::Left => &self.left_edge,
            Side::Right => &self.right_edge,
        };
        let (mut phi, mut cur, mut m2) = (0.0, 0.0, 0.0);
        for ((&mu, &w), &psi) in self
            .quadrature
            .mu
            .iter()
            .zip(&self.quadrature.weights)
            .zip(edge)
        {
            phi += w * psi;
            cur += w * mu * psi;
            m2 += w * mu * mu * psi;
        }
        if phi <= 0.0 {
            return BoundaryFactors::marshak();
        }
        BoundaryFactors {
            c: cur.abs() / phi,
            e: m2 / phi,
            f: ONE_THIRD * phi - m2,
            phi,
            fallback: false,
        }
    }

    /// Volume average of a per-cell quantity onto a coarser nested mesh.
    pub fn restrict(&self, values: &[f64], target: &Mesh1D) -> Vec<f64> {
        restrict_to(&self.edges, values, target)
    }

    /// Exact-moment closures on a nested coarse mesh.
    pub fn oracle_closures(&self, target: &Mesh1D) -> ClosureSet {
        let phi = self.restrict(&self.phi, target);
        let m2 = self.restrict(&self.second_moment, target);
        ClosureSet::from_moments(
            &phi,
            &m2,
            self.boundary_factors(Side::Left),
            self.boundary_factors(Side::Right),
        )
    }
}

/// Averages fine-cell values over each target cell. Fine edges must nest
/// inside the target edges.
pub fn restrict_to(fine_edges: &[f64], values: &[f64], target: &Mesh1D) -> Vec<f64> {
    let t = target.edges();
    let mut out = vec![0.0; target.cells()];
    let mut j = 0;
    for (i, &v) in values.iter().enumerate() {
        let (a, b) = (fine_edges[i], fine_edges[i + 1]);
        let mid = 0.5 * (a + b);
        while j + 1 < target.cells() && mid > t[j + 1] {
            j += 1;
        }
        out[j] += v * (b - a);
    }
    for (j, o) in out.iter_mut().enumerate() {
        *o /= target.width(j);
    }
    out
}

/// Relative level-to-level gap below which a ladder counts as converged.
pub const CONVERGED_GAP: f64 = 1e-9;

/// Aitken Δ² limit of three successive values and the relative gap between
/// the limit and the last value. Returns the last value when the second
/// difference vanishes.
pub fn aitken(values: [f64; 3]) -> (f64, f64) {
    let [x0, x1, x2] = values;
    let d1 = x1 - x0;
    let d2 = x2 - x1;
    let denom = d2 - d1;
    if denom == 0.0 {
        return (x2, 0.0);
    }
    let limit = x2 - d2 * d2 / denom;
    let spread = if limit != 0.0 {
        ((limit - x2) / limit).abs()
    } else {
        (limit - x2).abs()
    };
    (limit, spread)
}

/// Significant digits implied by a relative spread.
pub fn digits_from_spread(spread: f64) -> u32 {
    if spread <= 0.0 {
        return MAX_DIGITS;
    }
    let d = (-spread.log10()).floor();
    if d <= 0.0 {
        0
    } else {
        (d as u32).min(MAX_DIGITS)
    }
}

/// One rung of a refinement ladder: each target cell is split into
/// `refinement` fine cells and solved with a `quadrature`-point set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LadderLevel {
    pub refinement: usize,
    pub quadrature: usize,
    pub kind: QuadratureKind,
}

/// Ladder with refinement `base·2^k` and the quadrature order doubling every
/// other level starting from `first_order`.
pub fn doubling_ladder(
    base: usize,
    levels: usize,
    first_order: usize,
    kind: QuadratureKind,
) -> Vec<LadderLevel> {
    (0..levels)
        .map(|k| LadderLevel {
            refinement: base << k,
            quadrature: first_order << (k / 2),
            kind,
        })
        .collect()
}

/// Default certification ladder: refinements 2^4..2^9 per target cell,
/// double-Gauss orders 128, 128, 256, 256, 512, 512.
pub fn default_ladder() -> Vec<LadderLevel> {
    doubling_ladder(16, 6, 128, QuadratureKind::DoubleGaussLegendre)
}

/// Independent cross-check ladder: refinements 3·2^3..3·2^8, orders 96..384.
pub fn alternate_ladder() -> Vec<LadderLevel> {
    doubling_ladder(24, 6, 96, QuadratureKind::DoubleGaussLegendre)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: LadderLevel,
    pub fine_cells: usize,
    pub phi: Vec<f64>,
    pub iterations: usize,
    pub spectral_radius: f64,
    pub negative_edges: usize,
    pub balance_error: f64,
}

/// Extrapolated reference cell averages on a target mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSolution {
    pub edges: Vec<f64>,
    pub phi: Vec<f64>,
    /// Per-cell certified significant digits.
    pub cell_digits: Vec<u32>,
    pub certified_digits: u32,
    pub ladder: Vec<LevelRecord>,
}

impl BenchmarkSolution {
    pub fn cells(&self) -> usize {
        self.phi.len()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "I,cell,x_center,phi_ex,certified_digits")?;
        let n = self.cells();
        for i in 0..n {
            let xc = 0.5 * (self.edges[i] + self.edges[i + 1]);
            writeln!(
                out,
                "{n},{i},{xc:.10},{:.15e},{}",
                self.phi[i], self.cell_digits[i]
            )?;
        }
        Ok(())
    }
}

/// Solves every ladder level, restricts each to `target`, and extrapolates
/// the last three levels cell by cell.
pub fn refine_and_extrapolate(
    problem: &SlabProblem,
    target: &Mesh1D,
    ladder: &[LadderLevel],
) -> Result<BenchmarkSolution, SnError> {
    let solution = extrapolate_unchecked(problem, target, ladder)?;
    if let Some((cell, &digits)) = solution
        .cell_digits
        .iter()
        .enumerate()
        .min_by_key(|(_, d)| **d)
    {
        if digits < REQUIRED_DIGITS {
            return Err(SnError::Certification {
                cell,
                digits,
                required: REQUIRED_DIGITS,
            });
        }
    }
    Ok(solution)
}

/// As [`refine_and_extrapolate`] without the digit requirement.
pub fn extrapolate_unchecked(
    problem: &SlabProblem,
    target: &Mesh1D,
    ladder: &[LadderLevel],
) -> Result<BenchmarkSolution, SnError> {
    if ladder.len() < 3 {
        return Err(SnError::ShortLadder(ladder.len()));
    }
    let mut records = Vec::with_capacity(ladder.len());
    for &level in ladder {
        let fine = target.refined(level.refinement);
        let quad = level.kind.build(level.quadrature)?;
        let sol = source_iteration(problem, &fine, &quad, IterationControl::default())?;
        records.push(LevelRecord {
            level,
            fine_cells: fine.cells(),
            phi: sol.restrict(&sol.phi, target),
            iterations: sol.iterations,
            spectral_radius: sol.spectral_radius,
            negative_edges: sol.negative_edges,
            balance_error: sol.balance_error(),
        });
    }
    let k = records.len();
    let n = target.cells();
    let mut phi = Vec::with_capacity(n);
    let mut cell_digits = Vec::with_capacity(n);
    for i in 0..n {
        let values = [
            records[k - 3].phi[i],
            records[k - 2].phi[i],
            records[k - 1].phi[i],
        ];
        let scale = values[2].abs();
        let (d1, d2) = (values[1] - values[0], values[2] - values[1]);
        let gap = d1.abs().max(d2.abs());
        // below the iteration/round-off floor the ladder is flat and the
        // Aitken step would only amplify noise
        if gap <= CONVERGED_GAP * scale {
            phi.push(values[2]);
            cell_digits.push(digits_from_spread(gap / scale));
            continue;
        }
        if d1 * d2 < 0.0 {
            return Err(SnError::Ladder {
                cell: i,
                kind: "non-monotone",
                values,
            });
        }
        if d2.abs() >= d1.abs() {
            return Err(SnError::Ladder {
                cell: i,
                kind: "stagnating",
                values,
            });
        }
        let (limit, spread) = aitken(values);
        phi.push(limit);
        cell_digits.push(digits_from_spread(spread));
    }
    let certified_digits = cell_digits.iter().copied().min().unwrap_or(0);
    Ok(BenchmarkSolution {
        edges: target.edges().to_vec(),
        phi,
        cell_digits,
        certified_digits,
        ladder: records,
    })
}
