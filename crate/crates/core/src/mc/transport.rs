//! Random-walk kernels: source sampling, flights with surface tracking,
//! collisions, and the per-history driver.

use super::rng::{HistoryStream, UniformSource};
use super::tally::TallySet;
use super::McError;
use crate::problem::{CaptureMode, CellMaterials, Mesh1D, RunConfig, SlabProblem};
use rayon::prelude::*;

/// Histories per work unit. Fixed so the merge tree does not depend on the
/// number of workers.
pub const CHUNK_HISTORIES: u64 = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState {
    pub x: f64,
    pub mu: f64,
    pub w: f64,
    pub alive: bool,
    pub cell: usize,
}

/// Isotropic direction cosine; exact zeros are redrawn.
pub fn sample_direction<R: UniformSource + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let mu = 2.0 * rng.open01() - 1.0;
        if mu != 0.0 {
            return mu;
        }
    }
}

/// Inverse-CDF sampler for a piecewise-constant source density.
#[derive(Debug, Clone)]
pub struct SourceSampler {
    // (x_left, q, cumulative source at x_left)
    pieces: Vec<(f64, f64, f64)>,
    total: f64,
}

impl SourceSampler {
    pub fn new(problem: &SlabProblem) -> Result<Self, McError> {
        let mut pieces = Vec::new();
        let mut cum = 0.0;
        for r in problem.regions() {
            if r.q > 0.0 {
                pieces.push((r.x_left, r.q, cum));
                cum += r.q * (r.x_right - r.x_left);
            }
        }
        if pieces.is_empty() || cum <= 0.0 {
            return Err(McError::ZeroSource);
        }
        Ok(Self { pieces, total: cum })
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn sample_position(&self, u: f64) -> f64 {
        let target = u * self.total;
        let k = self
            .pieces
            .partition_point(|&(_, _, c)| c <= target)
            .saturating_sub(1);
        let (x0, q, c) = self.pieces[k];
        x0 + (target - c) / q
    }
}

/// Draws a birth site (position first, then direction) with unit weight.
pub fn sample_source_particle<R: UniformSource + ?Sized>(
    sampler: &SourceSampler,
    mesh: &Mesh1D,
    rng: &mut R,
) -> ParticleState {
    let x = sampler.sample_position(rng.open01());
    let mu = sample_direction(rng);
    let cell = mesh.locate(x).expect("source sampled inside the slab");
    ParticleState {
        x,
        mu,
        w: 1.0,
        alive: true,
        cell,
    }
}

/// Exponential flight distance `-ln(ξ)/Σ_t`.
pub fn distance_to_collision<R: UniformSource + ?Sized>(sigma_t: f64, rng: &mut R) -> f64 {
    -rng.open01().ln() / sigma_t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlightEnd {
    Collision,
    Leaked,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flight {
    pub end: FlightEnd,
    /// Geometric path length covered.
    pub path: f64,
}

/// Moves `p` through `optical_depth` mean free paths, tallying every cell
/// segment and face crossing on the way. A particle that crosses `x = 0` or
/// `x = L` is tallied at the boundary face and killed.
pub fn fly_and_tally(
    p: &mut ParticleState,
    optical_depth: f64,
    mesh: &Mesh1D,
    sigma_t: &[f64],
    tallies: &mut TallySet,
    mu_floor: f64,
) -> Result<Flight, McError> {
    debug_assert!(p.alive);
    let edges = mesh.edges();
    let last = mesh.cells() - 1;
    let mut remaining = optical_depth;
    let mut path = 0.0;
    loop {
        let c = p.cell;
        let (face, x_face) = if p.mu > 0.0 {
            (c + 1, edges[c + 1])
        } else {
            (c, edges[c])
        };
        let to_face = (x_face - p.x) / p.mu;
        if to_face < 0.0 {
            return Err(McError::Geometry(format!(
                "negative distance {to_face} to face {face} from x = {} in cell {c}",
                p.x
            )));
        }
        let tau_face = to_face * sigma_t[c];
        if remaining < tau_face {
            let s = remaining / sigma_t[c];
            if s > 0.0 {
                tallies.score_track(c, p.mu, p.w, s);
            }
            p.x += p.mu * s;
            // rounding may carry a collision site past the face
            p.x = p.x.clamp(edges[c], edges[c + 1]);
            path += s;
            return Ok(Flight {
                end: FlightEnd::Collision,
                path,
            });
        }
        if to_face > 0.0 {
            tallies.score_track(c, p.mu, p.w, to_face);
        }
        tallies.score_crossing(face, p.mu, p.w, mu_floor);
        remaining -= tau_face;
        path += to_face;
        p.x = x_face;
        if p.mu > 0.0 {
            if c == last {
                p.alive = false;
                return Ok(Flight {
                    end: FlightEnd::Leaked,
                    path,
                });
            }
            p.cell = c + 1;
        } else {
            if c == 0 {
                p.alive = false;
                return Ok(Flight {
                    end: FlightEnd::Leaked,
                    path,
                });
            }
            p.cell = c - 1;
        }
    }
}

/// Collision physics. Analog: scatter with probability `Σ_s/Σ_t`, otherwise
/// absorb. Implicit: scale the weight by `Σ_s/Σ_t`, then roulette below the
/// cutoff. Survivors leave isotropically.
pub fn collide<R: UniformSource + ?Sized>(
    p: &mut ParticleState,
    sigma_t: f64,
    sigma_s: f64,
    mode: CaptureMode,
    config: &RunConfig,
    rng: &mut R,
) {
    let c = sigma_s / sigma_t;
    match mode {
        CaptureMode::Analog => {
            if rng.open01() >= c {
                p.alive = false;
                return;
            }
        }
        CaptureMode::Implicit => {
            p.w *= c;
            if p.w <= 0.0 {
                p.alive = false;
                return;
            }
            if p.w < config.weight_cutoff {
                if rng.open01() < config.roulette_survival {
                    p.w /= config.roulette_survival;
                } else {
                    p.alive = false;
                    return;
                }
            }
        }
    }
    p.mu = sample_direction(rng);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Leaked,
    Absorbed,
    /// Killed by Russian roulette.
    Roulette,
    /// Event cap reached.
    Anomalous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryOutcome {
    pub termination: Termination,
    pub collisions: u64,
    /// Total geometric distance travelled.
    pub path_length: f64,
}

/// Immutable per-run data shared by all histories.
#[derive(Debug, Clone)]
pub struct TransportContext<'a> {
    pub mesh: &'a Mesh1D,
    pub materials: CellMaterials,
    pub source: SourceSampler,
    pub config: &'a RunConfig,
}

impl<'a> TransportContext<'a> {
    pub fn new(
        problem: &SlabProblem,
        mesh: &'a Mesh1D,
        config: &'a RunConfig,
    ) -> Result<Self, McError> {
        config.validate()?;
        Ok(Self {
            mesh,
            materials: CellMaterials::new(problem, mesh)?,
            source: SourceSampler::new(problem)?,
            config,
        })
    }

    pub fn new_tallies(&self) -> TallySet {
        TallySet::new(self.mesh.cells(), self.source.total())
    }

    /// One birth-to-death random walk using the stream of `history`.
    pub fn simulate_history(
        &self,
        history: u64,
        tallies: &mut TallySet,
    ) -> Result<HistoryOutcome, McError> {
        let mut rng = HistoryStream::new(self.config.rng_seed, history);
        self.simulate_with(&mut rng, tallies)
    }

    pub fn simulate_with<R: UniformSource + ?Sized>(
        &self,
        rng: &mut R,
        tallies: &mut TallySet,
    ) -> Result<HistoryOutcome, McError> {
        let cfg = self.config;
        let mut p = sample_source_particle(&self.source, self.mesh, rng);
        let mut collisions = 0u64;
        let mut path_length = 0.0;
        let termination = loop {
            let tau = distance_to_collision(1.0, rng);
            let flight = fly_and_tally(
                &mut p,
                tau,
                self.mesh,
                &self.materials.sigma_t,
                tallies,
                cfg.face_mu_floor,
            )?;
            path_length += flight.path;
            if flight.end == FlightEnd::Leaked {
                break Termination::Leaked;
            }
            let c = p.cell;
            collide(
                &mut p,
                self.materials.sigma_t[c],
                self.materials.sigma_s[c],
                cfg.capture_mode,
                cfg,
                rng,
            );
            collisions += 1;
            if !p.alive {
                let rouletted =
                    cfg.capture_mode == CaptureMode::Implicit && self.materials.sigma_s[c] > 0.0;
                break if rouletted {
                    Termination::Roulette
                } else {
                    Termination::Absorbed
                };
            }
            if collisions >= cfg.max_events {
                break Termination::Anomalous;
            }
        };
        tallies.end_history(termination == Termination::Anomalous);
        Ok(HistoryOutcome {
            termination,
            collisions,
            path_length,
        })
    }

    /// Runs histories `0..N` and merges their tallies. Work is split into
    /// fixed chunks that are reduced in index order, so the result is
    /// bit-identical for any thread pool size.
    pub fn run_histories(&self) -> Result<TallySet, McError> {
        let n = self.config.histories;
        let chunks = n.div_ceil(CHUNK_HISTORIES);
        let parts: Vec<TallySet> = (0..chunks)
            .into_par_iter()
            .map(|k| {
                let mut t = self.new_tallies();
                let end = ((k + 1) * CHUNK_HISTORIES).min(n);
                for h in k * CHUNK_HISTORIES..end {
                    self.simulate_history(h, &mut t)?;
                }
                Ok(t)
            })
            .collect::<Result<_, McError>>()?;
        let mut total = self.new_tallies();
        for part in &parts {
            total.merge(part);
        }
        Ok(total)
    }
}

/// Runs `config.histories` histories on `mesh` in the current rayon pool.
pub fn run_histories(
    problem: &SlabProblem,
    mesh: &Mesh1D,
    config: &RunConfig,
) -> Result<TallySet, McError> {
    TransportContext::new(problem, mesh, config)?.run_histories()
}
