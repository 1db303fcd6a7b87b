use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::DatasetSpec;
use super::PipelineError;
use crate::classify::ScoreSimSpec;
use crate::grabcut::GrabcutParams;
use crate::optimize::ParamSpace;
use crate::synthsig::{ConditioningSpec, RecordingSpec};

pub const CONFIG_FORMAT: &str = "eegseg-experiment";
pub const CONFIG_VERSION: u32 = 1;

/// Per-user AUCs the simulated users are calibrated to.
pub const USER_AUCS: [f64; 5] = [0.63, 0.75, 0.73, 0.78, 0.65];

/// Presentation time per image, carried into reports as metadata only.
pub const SECONDS_PER_IMAGE: f64 = 43.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataMode {
    Sim,
    Synthsig,
}

impl std::str::FromStr for DataMode {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sim" => Ok(DataMode::Sim),
            "synthsig" => Ok(DataMode::Synthsig),
            other => Err(PipelineError::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub cols: usize,
    pub rows: usize,
    pub min_overlap: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            cols: 16,
            rows: 12,
            min_overlap: 0.0,
        }
    }
}

/// Classifier settings for `synthsig` mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthsigSpec {
    pub recording: RecordingSpec,
    pub conditioning: ConditioningSpec,
    pub c_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub cv_folds: usize,
    pub balanced: bool,
    /// Folds over training images used to score the training maps out of sample.
    pub inner_folds: usize,
}

impl Default for SynthsigSpec {
    fn default() -> Self {
        Self {
            recording: RecordingSpec {
                sample_rate: 250,
                ..Default::default()
            },
            conditioning: ConditioningSpec::default(),
            c_grid: vec![1.0, 10.0],
            gamma_grid: vec![1e-4, 1e-3],
            cv_folds: 5,
            balanced: false,
            inner_folds: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub dataset: u64,
    pub scores: u64,
    pub folds: u64,
    pub search: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self::from_master(0)
    }
}

impl Seeds {
    /// Distinct stream seeds derived from one number.
    pub fn from_master(seed: u64) -> Self {
        let mix = |k: u64| seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k.wrapping_mul(0xD1B5_4A32_D192_ED03));
        Self {
            dataset: mix(1),
            scores: mix(2),
            folds: mix(3),
            search: mix(4),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub format: String,
    pub version: u32,
    pub dataset: DatasetSpec,
    pub grid: GridSpec,
    pub mode: DataMode,
    /// One entry per simulated user; in `synthsig` mode only the count matters.
    pub users: Vec<ScoreSimSpec>,
    pub synthsig: SynthsigSpec,
    pub search: ParamSpace,
    pub grabcut: GrabcutParams,
    /// Number of test images in each fold.
    pub test_folds: Vec<usize>,
    pub seeds: Seeds,
    pub out_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

fn calibrated_users() -> Vec<ScoreSimSpec> {
    USER_AUCS
        .iter()
        .map(|&a| ScoreSimSpec::default().with_auc(a).expect("reachable AUC"))
        .collect()
}

impl ExperimentConfig {
    /// 64x48 images on a 16x12 grid of 4-pixel windows; the filter range is
    /// scaled to the window size.
    pub fn desk() -> Self {
        Self {
            format: CONFIG_FORMAT.into(),
            version: CONFIG_VERSION,
            dataset: DatasetSpec::default(),
            grid: GridSpec::default(),
            mode: DataMode::Sim,
            users: calibrated_users(),
            synthsig: SynthsigSpec::default(),
            search: ParamSpace {
                sigma_range: (0.0, 70.0 * 4.0 / 30.0),
                n_trials: 30,
                ..Default::default()
            },
            grabcut: GrabcutParams::default(),
            test_folds: vec![5, 5, 5, 5, 2],
            seeds: Seeds::default(),
            out_dir: None,
        }
    }

    /// 480x360 images with 30-pixel windows and 1000 search trials.
    pub fn paper() -> Self {
        let mut cfg = Self::desk();
        cfg.dataset.width = 480;
        cfg.dataset.height = 360;
        cfg.search = ParamSpace::default();
        cfg
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seeds = Seeds::from_master(seed);
        self
    }

    pub fn n_images(&self) -> usize {
        self.dataset.n_images
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if self.format != CONFIG_FORMAT || self.version != CONFIG_VERSION {
            return bad(format!(
                "expected {CONFIG_FORMAT} version {CONFIG_VERSION}, found {:?} version {}",
                self.format, self.version
            ));
        }
        self.dataset.validate()?;
        let (w, h) = (self.dataset.width, self.dataset.height);
        if self.grid.cols == 0 || self.grid.rows == 0 || w % self.grid.cols != 0 || h % self.grid.rows != 0 {
            return bad(format!("{w}x{h} image does not split into {}x{} windows", self.grid.cols, self.grid.rows));
        }
        if !(0.0..=1.0).contains(&self.grid.min_overlap) {
            return bad("grid.min_overlap must lie in [0, 1]".into());
        }
        if self.users.is_empty() {
            return bad("at least one user is required".into());
        }
        for (u, spec) in self.users.iter().enumerate() {
            spec.validate()
                .map_err(|e| PipelineError::InvalidConfig(format!("user {u}: {e}")))?;
        }
        self.search
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        if self.test_folds.is_empty() || self.test_folds.contains(&0) {
            return bad("test folds must be non-empty".into());
        }
        let total: usize = self.test_folds.iter().sum();
        if total != self.n_images() {
            return bad(format!("test folds cover {total} images, dataset has {}", self.n_images()));
        }
        if self.test_folds.len() > 1 && self.test_folds.iter().any(|&t| t >= self.n_images()) {
            return bad("every fold needs at least one training image".into());
        }
        if self.mode == DataMode::Synthsig {
            let s = &self.synthsig;
            s.recording
                .validate()
                .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
            if s.c_grid.is_empty() || s.gamma_grid.is_empty() || s.cv_folds < 2 || s.inner_folds < 2 {
                return bad("synthsig: grids must be non-empty and fold counts at least 2".into());
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
