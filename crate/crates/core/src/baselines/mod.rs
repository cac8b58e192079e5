//! Keypoint-based supervised classifiers used as comparison points for the
//! rule-based engine.

pub mod features;
pub mod forest;
pub mod mlp;
pub mod validation;

pub use features::{featurize, FeatureError, FeatureVector, Sample, FEATURE_LEN};
pub use forest::{train_forest, DecisionTree, ForestModel, ForestParams, Node};
pub use mlp::{train_mlp, MlpModel, MlpParams};
pub use validation::{
    cross_validate, run_sweep, write_sweep_csv, CvResult, ModelSpec, SweepResult, SweepRow, TrainedModel,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BaselineError {
    #[error("need at least {needed} training samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{folds} folds need at least {folds} samples, got {got}")]
    TooFewSamples { folds: usize, got: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// SplitMix64 finaliser, used to derive independent sub-seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
