//! Monte Carlo particle transport with track-length and face-crossing tallies.

pub mod rng;
pub mod tally;
pub mod transport;

use crate::problem::ProblemError;
use thiserror::Error;

pub use rng::{HistoryStream, ScriptedStream, UniformSource};
pub use tally::{CellTally, FaceTally, TallySet};
pub use transport::{
    collide, distance_to_collision, fly_and_tally, run_histories, sample_direction,
    sample_source_particle, Flight, FlightEnd, HistoryOutcome, ParticleState, SourceSampler,
    Termination, TransportContext,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("problem has no positive source anywhere")]
    ZeroSource,
    #[error("tracking invariant violated: {0}")]
    Geometry(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}
