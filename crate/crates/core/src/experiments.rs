//! Paired MC-versus-hybrid replicate studies and their tabulated outputs.

use crate::closures::{ClosureSet, Provenance};
use crate::lo::{solve_hybrid, LoError, Method};
use crate::mc::{run_histories, McError};
use crate::problem::{CaptureMode, Mesh1D, ProblemError, RunConfig, SlabProblem};
use crate::sn::BenchmarkSolution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Written into the manifest so readers know how L∞ was normalized.
pub const LINF_NOTE: &str = "linf = max_i |phi_i - phi_ex_i| / max_i |phi_ex_i|";
pub const AGGREGATION_NOTE: &str = "error_means.csv and error_ratios.csv use the replicate mean; median and sample std are listed alongside";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Domain(&'static str),
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("no reference solution for I = {0}")]
    MissingReference(usize),
    #[error("closure provenance does not match the replicate seed")]
    Pairing,
    #[error("invalid study configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Lo(#[from] LoError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// `sqrt(Σ(φ−φex)²Δx / Σ φex²Δx)`.
pub fn relative_l2_error(
    phi: &[f64],
    phi_ex: &[f64],
    mesh: &Mesh1D,
) -> Result<f64, ExperimentError> {
    if phi.len() != phi_ex.len() {
        return Err(ExperimentError::Length(phi.len(), phi_ex.len()));
    }
    if phi.len() != mesh.cells() {
        return Err(ExperimentError::Length(phi.len(), mesh.cells()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (i, (&a, &b)) in phi.iter().zip(phi_ex).enumerate() {
        let dx = mesh.width(i);
        num += (a - b) * (a - b) * dx;
        den += b * b * dx;
    }
    if den == 0.0 {
        return Err(ExperimentError::Domain(
            "reference flux is identically zero",
        ));
    }
    Ok((num / den).sqrt())
}

/// Relative sup-norm error.
pub fn linf_error(phi: &[f64], phi_ex: &[f64]) -> Result<f64, ExperimentError> {
    if phi.len() != phi_ex.len() {
        return Err(ExperimentError::Length(phi.len(), phi_ex.len()));
    }
    let den = phi_ex.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if den == 0.0 {
        return Err(ExperimentError::Domain(
            "reference flux is identically zero",
        ));
    }
    let num = phi
        .iter()
        .zip(phi_ex)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Norm {
    L2,
    Linf,
}

impl Norm {
    pub const ALL: [Norm; 2] = [Norm::L2, Norm::Linf];

    pub fn as_str(&self) -> &'static str {
        match self {
            Norm::L2 => "L2",
            Norm::Linf => "Linf",
        }
    }
}

/// A scalar-flux estimate being scored: plain MC or one of the hybrids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Estimator {
    Mc,
    Hqd,
    Hsm,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Mc, Estimator::Hqd, Estimator::Hsm];

    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::Mc => "MC",
            Estimator::Hqd => "HQD",
            Estimator::Hsm => "HSM",
        }
    }
}

impl From<Method> for Estimator {
    fn from(m: Method) -> Self {
        match m {
            Method::Hqd => Estimator::Hqd,
            Method::Hsm => Estimator::Hsm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorPair {
    pub l2: f64,
    pub linf: f64,
}

impl ErrorPair {
    pub fn get(&self, norm: Norm) -> f64 {
        match norm {
            Norm::L2 => self.l2,
            Norm::Linf => self.linf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub seed: u64,
    pub histories: u64,
    pub cells: usize,
    pub mc: ErrorPair,
    pub hqd: ErrorPair,
    pub hsm: ErrorPair,
    pub fallback_cells: usize,
    /// Not part of any written output.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl ReplicateResult {
    pub fn errors(&self, est: Estimator) -> ErrorPair {
        match est {
            Estimator::Mc => self.mc,
            Estimator::Hqd => self.hqd,
            Estimator::Hsm => self.hsm,
        }
    }

    pub fn error(&self, est: Estimator, norm: Norm) -> f64 {
        self.errors(est).get(norm)
    }

    /// Equality of everything except wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self {
            wall_time: Duration::ZERO,
            ..self.clone()
        } == Self {
            wall_time: Duration::ZERO,
            ..other.clone()
        }
    }
}

/// Scalar fluxes produced by one paired replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedFluxes {
    pub closures: ClosureSet,
    pub mc: Vec<f64>,
    pub hqd: Vec<f64>,
    pub hsm: Vec<f64>,
}

/// One history ensemble, its closures, and both hybrid solves.
/// `diffusion` replaces the cell closures by `E = 1/3`, `F = 0`.
pub fn paired_fluxes(
    problem: &SlabProblem,
    mesh: &Mesh1D,
    config: &RunConfig,
    diffusion: bool,
) -> Result<PairedFluxes, ExperimentError> {
    let tallies = run_histories(problem, mesh, config)?;
    let provenance = Provenance {
        seed: config.rng_seed,
        histories: tallies.histories(),
    };
    let mut closures = ClosureSet::from_tallies(&tallies, mesh, Some(provenance));
    if diffusion {
        closures = closures.with_diffusion_closures();
    }
    let hqd = solve_hybrid(problem, mesh, &closures, Method::Hqd)?;
    let hsm = solve_hybrid(problem, mesh, &closures, Method::Hsm)?;
    for p in [hqd.provenance, hsm.provenance] {
        if p != Some(provenance) {
            return Err(ExperimentError::Pairing);
        }
    }
    Ok(PairedFluxes {
        mc: closures.phi_mc.clone(),
        hqd: hqd.phi,
        hsm: hsm.phi,
        closures,
    })
}

/// Runs `config.histories` histories with `seed` and scores MC, HQD and HSM
/// against `phi_ex`.
pub fn run_paired_replicate(
    problem: &SlabProblem,
    mesh: &Mesh1D,
    phi_ex: &[f64],
    config: &RunConfig,
    seed: u64,
    diffusion: bool,
) -> Result<ReplicateResult, ExperimentError> {
    let start = Instant::now();
    let config = RunConfig {
        rng_seed: seed,
        ..config.clone()
    };
    let f = paired_fluxes(problem, mesh, &config, diffusion)?;
    let score = |phi: &[f64]| -> Result<ErrorPair, ExperimentError> {
        Ok(ErrorPair {
            l2: relative_l2_error(phi, phi_ex, mesh)?,
            linf: linf_error(phi, phi_ex)?,
        })
    };
    Ok(ReplicateResult {
        seed,
        histories: config.histories,
        cells: mesh.cells(),
        mc: score(&f.mc)?,
        hqd: score(&f.hqd)?,
        hsm: score(&f.hsm)?,
        fallback_cells: f.closures.fallback_cells.len(),
        wall_time: start.elapsed(),
    })
}

/// Fraction of replicates where `est` beats the paired MC error. Ties go to MC.
pub fn win_ratio(results: &[ReplicateResult], est: Estimator, norm: Norm) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    let wins = results
        .iter()
        .filter(|r| r.error(est, norm) < r.error(Estimator::Mc, norm))
        .count();
    wins as f64 / results.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (0 for a single value).
    pub std: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    if values.is_empty() {
        return Summary::default();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let median = if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    };
    let std = if k > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Summary { mean, median, std }
}

/// Parameters of a grid-refinement study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub cells: Vec<usize>,
    pub histories: Vec<u64>,
    pub replicates: usize,
    /// Per-N replicate counts overriding `replicates`.
    #[serde(default)]
    pub replicates_by_histories: BTreeMap<u64, usize>,
    pub master_seed: u64,
    /// One history ensemble per mode and replicate.
    pub capture_modes: Vec<CaptureMode>,
    /// Cutoffs and caps; `histories`, `rng_seed` and `capture_mode` are ignored.
    pub run: RunConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            cells: vec![4, 8, 16, 32, 64],
            histories: vec![100, 1_000, 10_000, 100_000, 1_000_000],
            replicates: 100,
            replicates_by_histories: BTreeMap::new(),
            master_seed: 1,
            capture_modes: vec![CaptureMode::Analog, CaptureMode::Implicit],
            run: RunConfig::default(),
        }
    }
}

impl StudyConfig {
    pub fn replicates_for(&self, histories: u64) -> usize {
        self.replicates_by_histories
            .get(&histories)
            .copied()
            .unwrap_or(self.replicates)
    }

    /// Seed of replicate `r`: a counter offset from the master seed.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        self.master_seed.wrapping_add(r as u64)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.cells.is_empty() || self.histories.is_empty() || self.capture_modes.is_empty() {
            return Err(ExperimentError::Config(
                "cells, histories and capture modes must be nonempty".into(),
            ));
        }
        if self.cells.contains(&0) || self.histories.contains(&0) {
            return Err(ExperimentError::Config(
                "cells and histories must be positive".into(),
            ));
        }
        if self.replicates == 0 || self.replicates_by_histories.values().any(|&r| r == 0) {
            return Err(ExperimentError::Config(
                "replicate counts must be positive".into(),
            ));
        }
        let check = RunConfig {
            histories: 1,
            replicate_count: 1,
            ..self.run.clone()
        };
        check.validate()?;
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the problem and this config.
    pub fn hash(&self, problem: &SlabProblem) -> String {
        content_hash(&(problem, self))
    }
}

/// Hex SHA-256 of the JSON serialization of `value`.
pub fn content_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    Sha256::digest(&json)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// All replicates of one `(I, N)` configuration in seed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationResults {
    pub capture: CaptureMode,
    pub cells: usize,
    pub dx: f64,
    pub histories: u64,
    pub replicates: Vec<ReplicateResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinRatioRow {
    pub capture: CaptureMode,
    pub cells: usize,
    pub dx: f64,
    pub histories: u64,
    pub estimator: Estimator,
    pub norm: Norm,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStatsRow {
    pub capture: CaptureMode,
    pub cells: usize,
    pub dx: f64,
    pub histories: u64,
    pub estimator: Estimator,
    pub norm: Norm,
    pub replicates: usize,
    pub summary: Summary,
}

/// `RE(2Δx)/RE(Δx)` between adjacent grids of the study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRatioRow {
    pub capture: CaptureMode,
    pub coarse_cells: usize,
    pub fine_cells: usize,
    pub histories: u64,
    pub estimator: Estimator,
    pub norm: Norm,
    pub mean_ratio: f64,
    pub median_ratio: f64,
}

/// Selects one `(capture, I, N)` configuration in a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableKey {
    pub capture: CaptureMode,
    pub cells: usize,
    pub histories: u64,
}

impl TableKey {
    pub fn new(capture: CaptureMode, cells: usize, histories: u64) -> Self {
        Self {
            capture,
            cells,
            histories,
        }
    }

    fn matches(&self, capture: CaptureMode, cells: usize, histories: u64) -> bool {
        self.capture == capture && self.cells == cells && self.histories == histories
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub problem: SlabProblem,
    pub config: StudyConfig,
    pub configurations: Vec<ConfigurationResults>,
    pub win_ratios: Vec<WinRatioRow>,
    pub error_stats: Vec<ErrorStatsRow>,
    pub error_ratios: Vec<ErrorRatioRow>,
}

impl StudyReport {
    pub fn configuration(
        &self,
        capture: CaptureMode,
        cells: usize,
        histories: u64,
    ) -> Option<&ConfigurationResults> {
        self.configurations
            .iter()
            .find(|c| c.capture == capture && c.cells == cells && c.histories == histories)
    }

    pub fn win_ratio(&self, key: TableKey, est: Estimator, norm: Norm) -> Option<f64> {
        self.win_ratios
            .iter()
            .find(|r| {
                key.matches(r.capture, r.cells, r.histories) && r.estimator == est && r.norm == norm
            })
            .map(|r| r.ratio)
    }

    pub fn stats(&self, key: TableKey, est: Estimator, norm: Norm) -> Option<Summary> {
        self.error_stats
            .iter()
            .find(|r| {
                key.matches(r.capture, r.cells, r.histories) && r.estimator == est && r.norm == norm
            })
            .map(|r| r.summary)
    }

    /// Ratio row whose coarse grid is `key.cells`.
    pub fn error_ratio(&self, key: TableKey, est: Estimator, norm: Norm) -> Option<&ErrorRatioRow> {
        self.error_ratios.iter().find(|r| {
            key.matches(r.capture, r.coarse_cells, r.histories)
                && r.estimator == est
                && r.norm == norm
        })
    }

    pub fn write_win_ratio_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "capture,I,dx,N,method,norm,ratio")?;
        for r in &self.win_ratios {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.4}",
                r.capture,
                r.cells,
                r.dx,
                r.histories,
                r.estimator.as_str(),
                r.norm.as_str(),
                r.ratio
            )?;
        }
        Ok(())
    }

    pub fn write_errors_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "capture,I,dx,N,replicate,seed,mc_l2,hqd_l2,hsm_l2,mc_linf,hqd_linf,hsm_linf,fallback_cells"
        )?;
        for c in &self.configurations {
            for (k, r) in c.replicates.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{k},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{}",
                    c.capture,
                    c.cells,
                    c.dx,
                    c.histories,
                    r.seed,
                    r.mc.l2,
                    r.hqd.l2,
                    r.hsm.l2,
                    r.mc.linf,
                    r.hqd.linf,
                    r.hsm.linf,
                    r.fallback_cells
                )?;
            }
        }
        Ok(())
    }

    pub fn write_error_means_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "capture,I,dx,N,method,norm,replicates,mean,median,std")?;
        for r in &self.error_stats {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{:.6e},{:.6e},{:.6e}",
                r.capture,
                r.cells,
                r.dx,
                r.histories,
                r.estimator.as_str(),
                r.norm.as_str(),
                r.replicates,
                r.summary.mean,
                r.summary.median,
                r.summary.std
            )?;
        }
        Ok(())
    }

    pub fn write_error_ratios_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "capture,I_coarse,I_fine,N,method,norm,mean_ratio,median_ratio"
        )?;
        for r in &self.error_ratios {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.4},{:.4}",
                r.capture,
                r.coarse_cells,
                r.fine_cells,
                r.histories,
                r.estimator.as_str(),
                r.norm.as_str(),
                r.mean_ratio,
                r.median_ratio
            )?;
        }
        Ok(())
    }

    /// Errors per configuration in ascending order.
    pub fn write_sorted_errors_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "capture,I,dx,N,method,norm,rank,error")?;
        for c in &self.configurations {
            for est in Estimator::ALL {
                for norm in Norm::ALL {
                    for (rank, e) in sorted_series(&c.replicates, est, norm)
                        .into_iter()
                        .enumerate()
                    {
                        writeln!(
                            out,
                            "{},{},{},{},{},{},{rank},{e:.10e}",
                            c.capture,
                            c.cells,
                            c.dx,
                            c.histories,
                            est.as_str(),
                            norm.as_str()
                        )?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes the five CSV tables and `manifest.json` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<(), ExperimentError> {
        fs::create_dir_all(dir)?;
        let file = |name: &str| -> io::Result<io::BufWriter<fs::File>> {
            Ok(io::BufWriter::new(fs::File::create(dir.join(name))?))
        };
        self.write_win_ratio_csv(file("win_ratio.csv")?)?;
        self.write_errors_csv(file("errors.csv")?)?;
        self.write_error_means_csv(file("error_means.csv")?)?;
        self.write_error_ratios_csv(file("error_ratios.csv")?)?;
        self.write_sorted_errors_csv(file("sorted_errors.csv")?)?;
        let manifest = StudyManifest::new(&self.problem, &self.config);
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyManifest {
    pub version: String,
    pub master_seed: u64,
    pub config_hash: String,
    pub linf_normalization: String,
    pub aggregation: String,
    pub problem: SlabProblem,
    pub config: StudyConfig,
}

impl StudyManifest {
    pub fn new(problem: &SlabProblem, config: &StudyConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: config.master_seed,
            config_hash: config.hash(problem),
            linf_normalization: LINF_NOTE.to_string(),
            aggregation: AGGREGATION_NOTE.to_string(),
            problem: problem.clone(),
            config: config.clone(),
        }
    }
}

pub fn sorted_series(results: &[ReplicateResult], est: Estimator, norm: Norm) -> Vec<f64> {
    let mut v: Vec<f64> = results.iter().map(|r| r.error(est, norm)).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Runs every `(I, N)` configuration with its replicates and tabulates the
/// results. `references` must hold a benchmark solution for every `I`.
pub fn grid_refinement_study(
    problem: &SlabProblem,
    config: &StudyConfig,
    references: &[BenchmarkSolution],
) -> Result<StudyReport, ExperimentError> {
    config.validate()?;
    let mut cells = config.cells.clone();
    cells.sort_unstable();
    cells.dedup();
    let mut histories = config.histories.clone();
    histories.sort_unstable();
    histories.dedup();

    let mut jobs = Vec::new();
    for &capture in &config.capture_modes {
        for &i in &cells {
            let reference = references
                .iter()
                .find(|r| r.cells() == i)
                .ok_or(ExperimentError::MissingReference(i))?;
            let mesh = Mesh1D::uniform(problem, i)?;
            for &n in &histories {
                jobs.push((capture, mesh.clone(), &reference.phi, n));
            }
        }
    }
    let configurations = jobs
        .into_par_iter()
        .map(
            |(capture, mesh, phi_ex, n)| -> Result<ConfigurationResults, ExperimentError> {
                let run = RunConfig {
                    histories: n,
                    capture_mode: capture,
                    ..config.run.clone()
                };
                let replicates = (0..config.replicates_for(n))
                    .into_par_iter()
                    .map(|r| {
                        run_paired_replicate(
                            problem,
                            &mesh,
                            phi_ex,
                            &run,
                            config.replicate_seed(r),
                            false,
                        )
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(ConfigurationResults {
                    capture,
                    cells: mesh.cells(),
                    dx: problem.length() / mesh.cells() as f64,
                    histories: n,
                    replicates,
                })
            },
        )
        .collect::<Result<Vec<_>, _>>()?;
    Ok(tabulate(problem.clone(), config.clone(), configurations))
}

/// Builds the win-ratio, statistics and ratio tables from raw results.
pub fn tabulate(
    problem: SlabProblem,
    config: StudyConfig,
    configurations: Vec<ConfigurationResults>,
) -> StudyReport {
    let mut win_ratios = Vec::new();
    let mut error_stats = Vec::new();
    for c in &configurations {
        for est in [Estimator::Hqd, Estimator::Hsm] {
            for norm in Norm::ALL {
                win_ratios.push(WinRatioRow {
                    capture: c.capture,
                    cells: c.cells,
                    dx: c.dx,
                    histories: c.histories,
                    estimator: est,
                    norm,
                    ratio: win_ratio(&c.replicates, est, norm),
                });
            }
        }
        for est in Estimator::ALL {
            for norm in Norm::ALL {
                let values: Vec<f64> = c.replicates.iter().map(|r| r.error(est, norm)).collect();
                error_stats.push(ErrorStatsRow {
                    capture: c.capture,
                    cells: c.cells,
                    dx: c.dx,
                    histories: c.histories,
                    estimator: est,
                    norm,
                    replicates: values.len(),
                    summary: summarize(&values),
                });
            }
        }
    }
    let mut error_ratios = Vec::new();
    let mut all_cells: Vec<usize> = configurations.iter().map(|c| c.cells).collect();
    all_cells.sort_unstable();
    all_cells.dedup();
    let mut all_histories: Vec<u64> = configurations.iter().map(|c| c.histories).collect();
    all_histories.sort_unstable();
    all_histories.dedup();
    let mut captures: Vec<CaptureMode> = Vec::new();
    for c in &configurations {
        if !captures.contains(&c.capture) {
            captures.push(c.capture);
        }
    }
    let lookup = |capture: CaptureMode, i: usize, n: u64, est: Estimator, norm: Norm| {
        error_stats
            .iter()
            .find(|r| {
                r.capture == capture
                    && r.cells == i
                    && r.histories == n
                    && r.estimator == est
                    && r.norm == norm
            })
            .map(|r| r.summary)
    };
    for &capture in &captures {
        for &n in &all_histories {
            for est in Estimator::ALL {
                for norm in Norm::ALL {
                    for pair in all_cells.windows(2) {
                        let (coarse, fine) = (
                            lookup(capture, pair[0], n, est, norm),
                            lookup(capture, pair[1], n, est, norm),
                        );
                        if let (Some(a), Some(b)) = (coarse, fine) {
                            error_ratios.push(ErrorRatioRow {
                                capture,
                                coarse_cells: pair[0],
                                fine_cells: pair[1],
                                histories: n,
                                estimator: est,
                                norm,
                                mean_ratio: a.mean / b.mean,
                                median_ratio: a.median / b.median,
                            });
                        }
                    }
                }
            }
        }
    }
    StudyReport {
        problem,
        config,
        configurations,
        win_ratios,
        error_stats,
        error_ratios,
    }
}
