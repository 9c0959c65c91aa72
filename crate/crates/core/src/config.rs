//! TOML run configuration.
//!
//! Every section is optional. Missing values fall back to the built-in
//! benchmark and defaults; command-line flags override file values.

use crate::experiments::StudyConfig;
use crate::problem::{CaptureMode, MaterialRegion, ProblemError, RunConfig, SlabProblem};
use crate::sn::{alternate_ladder, default_ladder, LadderLevel};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub problem: Option<ProblemSection>,
    pub run: RunSection,
    pub reference: ReferenceSection,
    pub study: StudySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub length: f64,
    pub regions: Vec<MaterialRegion>,
}

/// Single-run parameters shared by `mc`, `hybrid` and `dump-closures`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub cells: Option<usize>,
    pub histories: Option<u64>,
    pub seed: Option<u64>,
    pub capture_mode: Option<CaptureMode>,
    pub weight_cutoff: Option<f64>,
    pub roulette_survival: Option<f64>,
    pub face_mu_floor: Option<f64>,
    pub max_events: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LadderChoice {
    #[default]
    Default,
    Alternate,
}

impl LadderChoice {
    pub fn levels(self) -> Vec<LadderLevel> {
        match self {
            LadderChoice::Default => default_ladder(),
            LadderChoice::Alternate => alternate_ladder(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    pub cells: Option<Vec<usize>>,
    pub ladder: Option<LadderChoice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicateOverride {
    pub histories: u64,
    pub replicates: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub cells: Option<Vec<usize>>,
    pub histories: Option<Vec<u64>>,
    pub replicates: Option<usize>,
    pub master_seed: Option<u64>,
    pub capture_modes: Option<Vec<CaptureMode>>,
    pub replicate_overrides: Vec<ReplicateOverride>,
}

pub const DEFAULT_CELLS: usize = 16;
pub const DEFAULT_HISTORIES: u64 = 100_000;

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ProblemError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProblemError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ProblemError> {
        toml::from_str(text).map_err(|e| ProblemError::Config(e.to_string()))
    }

    /// The configured slab, or the benchmark when absent.
    pub fn problem(&self) -> Result<SlabProblem, ProblemError> {
        match &self.problem {
            Some(p) => SlabProblem::new(p.length, p.regions.clone()),
            None => Ok(SlabProblem::benchmark()),
        }
    }

    pub fn cells(&self) -> usize {
        self.run.cells.unwrap_or(DEFAULT_CELLS)
    }

    pub fn run_config(&self) -> RunConfig {
        let d = RunConfig::default();
        let r = &self.run;
        RunConfig {
            histories: r.histories.unwrap_or(DEFAULT_HISTORIES),
            rng_seed: r.seed.unwrap_or(d.rng_seed),
            capture_mode: r.capture_mode.unwrap_or(d.capture_mode),
            replicate_count: 1,
            weight_cutoff: r.weight_cutoff.unwrap_or(d.weight_cutoff),
            roulette_survival: r.roulette_survival.unwrap_or(d.roulette_survival),
            face_mu_floor: r.face_mu_floor.unwrap_or(d.face_mu_floor),
            max_events: r.max_events.unwrap_or(d.max_events),
        }
    }

    pub fn reference_cells(&self) -> Vec<usize> {
        self.reference
            .cells
            .clone()
            .unwrap_or_else(|| vec![4, 8, 16, 32, 64])
    }

    pub fn ladder(&self) -> LadderChoice {
        self.reference.ladder.unwrap_or_default()
    }

    pub fn study_config(&self) -> StudyConfig {
        let d = StudyConfig::default();
        let s = &self.study;
        StudyConfig {
            cells: s.cells.clone().unwrap_or(d.cells),
            histories: s.histories.clone().unwrap_or(d.histories),
            replicates: s.replicates.unwrap_or(d.replicates),
            replicates_by_histories: s
                .replicate_overrides
                .iter()
                .map(|o| (o.histories, o.replicates))
                .collect(),
            master_seed: s.master_seed.unwrap_or(d.master_seed),
            capture_modes: s.capture_modes.clone().unwrap_or(d.capture_modes),
            run: self.run_config(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = FileConfig::parse("").unwrap();
        assert_eq!(c.problem().unwrap(), SlabProblem::benchmark());
        assert_eq!(c.cells(), DEFAULT_CELLS);
        assert_eq!(c.run_config().histories, DEFAULT_HISTORIES);
        let expected = StudyConfig {
            run: c.run_config(),
            ..StudyConfig::default()
        };
        assert_eq!(c.study_config(), expected);
        assert_eq!(c.ladder(), LadderChoice::Default);
    }

    #[test]
    fn full_file_parses() {
        let c = FileConfig::parse(
            r#"
            [problem]
            length = 2.0
            regions = [
              { x_left = 0.0, x_right = 1.0, sigma_t = 1.0, sigma_s = 0.5, q = 1.0 },
              { x_left = 1.0, x_right = 2.0, sigma_t = 2.0, sigma_s = 0.0, q = 0.0 },
            ]

            [run]
            cells = 8
            histories = 500
            seed = 9
            capture_mode = "analog"

            [reference]
            cells = [4, 8]
            ladder = "alternate"

            [study]
            cells = [4]
            histories = [100, 1000]
            replicates = 3
            master_seed = 42
            capture_modes = ["implicit"]
            replicate_overrides = [{ histories = 1000, replicates = 2 }]
            "#,
        )
        .unwrap();
        let p = c.problem().unwrap();
        assert_eq!(p.length(), 2.0);
        assert_eq!(p.regions().len(), 2);
        let r = c.run_config();
        assert_eq!(
            (r.histories, r.rng_seed, r.capture_mode),
            (500, 9, CaptureMode::Analog)
        );
        assert_eq!(c.reference_cells(), vec![4, 8]);
        assert_eq!(c.ladder(), LadderChoice::Alternate);
        let s = c.study_config();
        assert_eq!(s.master_seed, 42);
        assert_eq!(s.replicates_for(1000), 2);
        assert_eq!(s.replicates_for(100), 3);
        assert_eq!(s.capture_modes, vec![CaptureMode::Implicit]);
    }

    #[test]
    fn bad_files_are_config_errors() {
        assert!(matches!(
            FileConfig::parse("[run]\nbogus = 1"),
            Err(ProblemError::Config(_))
        ));
        assert!(matches!(
            FileConfig::parse("[run]\ncells = \"x\""),
            Err(ProblemError::Config(_))
        ));
        let c = FileConfig::parse("[problem]\nlength = 1.0\nregions = []").unwrap();
        assert!(c.problem().is_err());
    }
}
