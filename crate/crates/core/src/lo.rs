//! Finite-volume low-order solvers closed by MC functionals.
//!
//! Both schemes balance the currents through the two faces of each cell
//! against absorption and source:
//!
//! ```text
//! J_{i+1/2} − J_{i−1/2} + Σ_{a,i} Δx_i φ_i = Q_i Δx_i
//! ```
//!
//! with interior face currents
//!
//! * quasidiffusion (HQD): `J_{i+1/2} = −(E_{i+1}φ_{i+1} − E_iφ_i) / (Σ_{t,i+1/2} Δx_{i+1/2})`
//! * second moment (HSM): `J_{i+1/2} = −((φ_{i+1} − φ_i)/3 − (F_{i+1} − F_i)) / (Σ_{t,i+1/2} Δx_{i+1/2})`
//!
//! At a vacuum boundary the face flux `φ_b` is eliminated with
//! `|J_b| = C_b φ_b` and a half-cell difference for the current, which gives
//! a Robin-type row modification.

use crate::closures::{ClosureSet, Provenance, ONE_THIRD};
use crate::problem::{CellMaterials, Mesh1D, ProblemError, SlabProblem};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoError {
    #[error("closure set has {closures} cells but the mesh has {mesh}")]
    MissingClosure { closures: usize, mesh: usize },
    #[error("invalid closure in cell {cell}: {reason}")]
    InvalidClosure { cell: usize, reason: String },
    #[error("singular tridiagonal system: zero pivot at row {row}")]
    Singular { row: usize },
    #[error("inconsistent system dimensions")]
    Dimension,
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "HQD")]
    Hqd,
    #[serde(rename = "HSM")]
    Hsm,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Hqd, Method::Hsm];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Hqd => "HQD",
            Method::Hsm => "HSM",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hqd" | "qd" => Ok(Method::Hqd),
            "hsm" | "sm" => Ok(Method::Hsm),
            other => Err(format!("unknown method '{other}' (expected hqd or hsm)")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `A φ = rhs` with `A` tridiagonal. `lower[0]` and `upper[n-1]` are unused
/// and kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.upper[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    /// `‖A x − rhs‖_∞`.
    pub fn residual_inf(&self, x: &[f64]) -> f64 {
        self.apply(x)
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Thomas algorithm: forward elimination, back substitution.
pub fn solve_tridiagonal(sys: &TridiagonalSystem) -> Result<Vec<f64>, LoError> {
    let n = sys.len();
    if n == 0 || sys.lower.len() != n || sys.upper.len() != n || sys.rhs.len() != n {
        return Err(LoError::Dimension);
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = sys.diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(LoError::Singular { row: 0 });
    }
    c[0] = sys.upper[0] / pivot;
    d[0] = sys.rhs[0] / pivot;
    for i in 1..n {
        pivot = sys.diag[i] - sys.lower[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(LoError::Singular { row: i });
        }
        c[i] = sys.upper[i] / pivot;
        d[i] = (sys.rhs[i] - sys.lower[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Width-weighted face cross section and face-centred width between two
/// neighbouring cells.
pub fn face_sigma_and_width(
    sigma_t_i: f64,
    sigma_t_ip1: f64,
    dx_i: f64,
    dx_ip1: f64,
) -> (f64, f64) {
    let sigma = (sigma_t_i * dx_i + sigma_t_ip1 * dx_ip1) / (dx_i + dx_ip1);
    (sigma, 0.5 * (dx_i + dx_ip1))
}

/// `1 / (Σ_{t,f} Δx_f)` for each interior face `f = 1..I-1` (index `f-1`).
fn face_couplings(mat: &CellMaterials, widths: &[f64]) -> Vec<f64> {
    (0..widths.len().saturating_sub(1))
        .map(|i| {
            let (s, h) =
                face_sigma_and_width(mat.sigma_t[i], mat.sigma_t[i + 1], widths[i], widths[i + 1]);
            1.0 / (s * h)
        })
        .collect()
}

fn check_closures(closures: &ClosureSet, cells: usize) -> Result<(), LoError> {
    if closures.cells() != cells || closures.sm_factor.len() != cells {
        return Err(LoError::MissingClosure {
            closures: closures.cells(),
            mesh: cells,
        });
    }
    for (i, &e) in closures.eddington.iter().enumerate() {
        if !(e > 0.0 && e.is_finite()) {
            return Err(LoError::InvalidClosure {
                cell: i,
                reason: format!("Eddington factor {e}"),
            });
        }
    }
    for b in [&closures.left, &closures.right] {
        if !(b.c > 0.0 && b.e > 0.0 && b.f.is_finite()) {
            return Err(LoError::InvalidClosure {
                cell: usize::MAX,
                reason: format!("boundary factors {b:?}"),
            });
        }
    }
    Ok(())
}

fn half_cell_optical_width(mat: &CellMaterials, widths: &[f64], i: usize) -> f64 {
    0.5 * mat.sigma_t[i] * widths[i]
}

struct Prepared {
    mat: CellMaterials,
    widths: Vec<f64>,
    coupling: Vec<f64>,
}

fn prepare(
    problem: &SlabProblem,
    mesh: &Mesh1D,
    closures: &ClosureSet,
) -> Result<Prepared, LoError> {
    check_closures(closures, mesh.cells())?;
    let mat = CellMaterials::new(problem, mesh)?;
    let widths = mesh.widths();
    let coupling = face_couplings(&mat, &widths);
    Ok(Prepared {
        mat,
        widths,
        coupling,
    })
}

fn base_system(p: &Prepared) -> TridiagonalSystem {
    let n = p.widths.len();
    let mut sys = TridiagonalSystem::zeros(n);
    for i in 0..n {
        sys.rhs[i] = p.mat.q[i] * p.widths[i];
    }
    sys
}

/// Quasidiffusion system.
pub fn assemble_hqd(
    problem: &SlabProblem,
    mesh: &Mesh1D,
    closures: &ClosureSet,
) -> Result<TridiagonalSystem, LoError> {
    let p = prepare(problem, mesh, closures)?;
    Ok(assemble_hqd_prepared(&p, closures))
}

fn assemble_hqd_prepared(p: &Prepared, closures: &ClosureSet) -> TridiagonalSystem {
    let n = p.widths.len();
    let e = &closures.eddington;
    let mut sys = base_system(p);
    for (f, &a) in p.coupling.iter().enumerate() {
        let (l, r) = (f, f + 1);
        sys.diag[l] += e[l] * a;
        sys.upper[l] = -(e[r] * a);
        sys.diag[r] += e[r] * a;
        sys.lower[r] = -(e[l] * a);
    }
    for (i, b) in [(0, &closures.left), (n - 1, &closures.right)] {
        let h = half_cell_optical_width(&p.mat, &p.widths, i);
        sys.diag[i] += b.c * e[i] / (b.c * h + b.e);
    }
    for i in 0..n {
        sys.diag[i] += p.mat.sigma_a(i) * p.widths[i];
    }
    sys
}

/// Second-moment system. The `F` differences sit on the right-hand side.
pub fn assemble_hsm(
    problem: &SlabProblem,
    mesh: &Mesh1D,
    closures: &ClosureSet,
) -> Result<TridiagonalSystem, LoError> {
    let p = prepare(problem, mesh, closures)?;
    Ok(assemble_hsm_prepared(&p, closures))
}

fn assemble_hsm_prepared(p: &Prepared, closures: &ClosureSet) -> TridiagonalSystem {
    let n = p.widths.len();
    let f = &closures.sm_factor;
    let mut sys = base_system(p);
    for (k, &a) in p.coupling.iter().enumerate() {
        let (l, r) = (k, k + 1);
        sys.diag[l] += ONE_THIRD * a;
        sys.upper[l] = -(ONE_THIRD * a);
        sys.diag[r] += ONE_THIRD * a;
        sys.lower[r] = -(ONE_THIRD * a);
        sys.rhs[l] += a * (f[l] - f[r]);
        sys.rhs[r] += a * (f[r] - f[l]);
    }
    for (i, b) in [(0, &closures.left), (n - 1, &closures.right)] {
        let h = half_cell_optical_width(&p.mat, &p.widths, i);
        let denom = b.c * h + ONE_THIRD;
        sys.diag[i] += b.c * ONE_THIRD / denom;
        sys.rhs[i] += b.c * (f[i] - b.f) / denom;
    }
    for i in 0..n {
        sys.diag[i] += p.mat.sigma_a(i) * p.widths[i];
    }
    sys
}

pub fn assemble(
    problem: &SlabProblem,
    mesh: &Mesh1D,
    closures: &ClosureSet,
    method: Method,
) -> Result<TridiagonalSystem, LoError> {
    match method {
        Method::Hqd => assemble_hqd(problem, mesh, closures),
        Method::Hsm => assemble_hsm(problem, mesh, closures),
    }
}

/// Cell-average scalar flux of a hybrid solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoSolution {
    pub phi: Vec<f64>,
    pub method: Method,
    pub provenance: Option<Provenance>,
    /// Outgoing leakage through `x = 0` and `x = L`.
    pub leakage: [f64; 2],
    /// Total absorption `Σ Σ_{a,i} Δx_i φ_i`.
    pub absorption: f64,
    /// Total source `Σ Q_i Δx_i`.
    pub source: f64,
}

impl LoSolution {
    /// `|absorption + leakage − source| / source`.
    pub fn balance_error(&self) -> f64 {
        let lhs = self.absorption + self.leakage[0] + self.leakage[1];
        (lhs - self.source).abs() / self.source.abs().max(f64::MIN_POSITIVE)
    }
}

fn boundary_leakage(p: &Prepared, closures: &ClosureSet, method: Method, phi: &[f64]) -> [f64; 2] {
    let n = phi.len();
    let mut out = [0.0; 2];
    for (k, (i, b)) in [(0, &closures.left), (n - 1, &closures.right)]
        .into_iter()
        .enumerate()
    {
        let h = half_cell_optical_width(&p.mat, &p.widths, i);
        out[k] = match method {
            Method::Hqd => b.c * closures.eddington[i] * phi[i] / (b.c * h + b.e),
            Method::Hsm => {
                b.c * (ONE_THIRD * phi[i] - closures.sm_factor[i] + b.f) / (b.c * h + ONE_THIRD)
            }
        };
    }
    out
}

/// Assembles the chosen low-order system and solves it directly.
pub fn solve_hybrid(
    problem: &SlabProblem,
    mesh: &Mesh1D,
    closures: &ClosureSet,
    method: Method,
) -> Result<LoSolution, LoError> {
    let p = prepare(problem, mesh, closures)?;
    let sys = match method {
        Method::Hqd => assemble_hqd_prepared(&p, closures),
        Method::Hsm => assemble_hsm_prepared(&p, closures),
    };
    let phi = solve_tridiagonal(&sys)?;
    let leakage = boundary_leakage(&p, closures, method, &phi);
    let absorption = (0..phi.len())
        .map(|i| p.mat.sigma_a(i) * p.widths[i] * phi[i])
        .sum();
    let source = (0..phi.len()).map(|i| p.mat.q[i] * p.widths[i]).sum();
    Ok(LoSolution {
        phi,
        method,
        provenance: closures.provenance,
        leakage,
        absorption,
        source,
    })
}
