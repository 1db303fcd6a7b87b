//! End-to-end experiments: synthetic scenes, per-user score maps, parameter
//! learning with image-level cross-validation, multi-user fusion and reports.

mod config;
mod dataset;
mod maps;
mod report;
mod run;

pub use config::{
    DataMode, ExperimentConfig, GridSpec, Seeds, SynthsigSpec, CONFIG_FORMAT, CONFIG_VERSION,
    SECONDS_PER_IMAGE, USER_AUCS,
};
pub use dataset::{generate_dataset, load_dataset, save_dataset, DatasetSpec, Sample, Shape};
pub use maps::{
    image_features, simulate_maps, simulate_scores, train_user_classifier, window_grids, ClassifierRun, FoldMaps,
};
pub use report::{Cell, ConfigSummary, FoldRecord, FusionRow, FusionSummary, SegmentationReport};
pub use run::{assign_folds, run_config, run_crossval, run_fusion, CrossvalRun, Experiment};

use thiserror::Error;

use crate::classify::ClassifyError;
use crate::eegmap::EegMapError;
use crate::imaging::ImagingError;
use crate::optimize::OptimizeError;
use crate::segment::SegmentError;
use crate::synthsig::SynthError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Map(#[from] EegMapError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

impl PipelineError {
    /// 2 for configuration problems, 3 for failures on the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::InvalidConfig(_) => 2,
            _ => 3,
        }
    }
}

/// Seed for one work unit, independent of evaluation order.
pub(crate) fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
