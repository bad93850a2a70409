//! Metrics, ablation runs, the Isolation Forest ramp-up benchmark, holdout
//! thresholding for externally scored detectors, and report files.

pub mod ablation;
pub mod holdout;
pub mod metrics;
pub mod rampup;
pub mod report;

use std::path::PathBuf;

use thiserror::Error;

use crate::client::ClientError;
use crate::forest::ForestError;
use crate::prompt::PromptError;

pub use ablation::{run_ablation, AblationOptions, AblationRow, AblationRun, Detector, EvalSample, ScoredRecord};
pub use holdout::{holdout_threshold_eval, read_score_set, HoldoutResult, ScoredSample};
pub use metrics::{compute_metrics, ConfusionMatrix, Metrics};
pub use rampup::{default_train_sizes, ramp_up, BenchmarkLine, RampUpConfig, RampUpPoint};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("sample {sample_id}: {source}")]
    Detector {
        sample_id: String,
        #[source]
        source: ClientError,
    },
    #[error("sample {sample_id}: {source}")]
    Prompt {
        sample_id: String,
        #[source]
        source: PromptError,
    },
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("need {needed} normal training vectors, only {available} available")]
    InsufficientNormals { needed: usize, available: usize },
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl EvalError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        EvalError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub fn is_cache_miss(&self) -> bool {
        matches!(self, EvalError::Detector { source, .. } if source.is_cache_miss())
    }
}
