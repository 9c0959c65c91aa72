//! Hybrid Monte Carlo / deterministic solvers for one-group slab transport.
//!
//! Monte Carlo histories supply track-length estimates of the Eddington
//! factor and the second-moment factor per cell; these close finite-volume
//! quasidiffusion (HQD) or second-moment (HSM) low-order equations whose
//! solution is the hybrid scalar flux. A discrete-ordinates reference with
//! Aitken extrapolation measures the error of both the hybrid and plain MC
//! fluxes.

pub mod closures;
pub mod config;
pub mod experiments;
pub mod lo;
pub mod mc;
pub mod problem;
pub mod sn;

pub use closures::{BoundaryFactors, ClosureSet, Provenance, Side};
pub use lo::{solve_hybrid, LoSolution, Method, TridiagonalSystem};
pub use mc::{run_histories, TallySet};
pub use problem::{CaptureMode, Mesh1D, RunConfig, SlabProblem};
