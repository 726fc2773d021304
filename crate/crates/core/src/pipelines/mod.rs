//! Training and evaluation for classification, per-edge segmentation and feature-space
//! de-noising, plus the pooling/feature ablation grid.
//!
//! Every mesh is scaled into the unit box before anything else; optional rotations are
//! applied after that, about the box center.

mod ablation;
mod config;
mod metrics;
mod train;

pub use ablation::{run_ablation, AblationRow, AblationTable};
pub use config::{ExperimentConfig, FeatureSpec, Task};
pub use metrics::{accuracy, argmax, mean_squared_error, soft_edge_accuracy, EpochRecord, MetricsReport};
pub use train::{
    evaluate_classification, evaluate_denoising, evaluate_segmentation, identity_baseline, predict, train,
    train_with_progress, EvalOptions, TrainOutcome,
};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datasets::{add_vertex_noise, augment, AugmentOptions, DatasetError, LabeledMesh, Split};
use crate::features::FeatureError;
use crate::mesh::{normalize_unit_box, Mesh, MeshError};
use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("training diverged at epoch {epoch}, step {step}: {message}")]
    Divergence { epoch: usize, step: usize, message: String },
    #[error("checkpoint was trained for {got}, not {expected}")]
    TaskMismatch { expected: String, got: String },
    #[error("no samples in the {0} split")]
    MissingSplit(Split),
    #[error("empty evaluation set")]
    EmptyTestSet,
    #[error("edge labels: {0}")]
    MissingLabels(String),
    #[error("clean and noisy meshes differ: {0}")]
    TopologyMismatch(String),
}

/// A clean mesh and a noisy copy with the same faces.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoisePair {
    pub id: String,
    pub clean: Mesh,
    pub noisy: Mesh,
    pub split: Split,
}

/// Mixes two indices into a seed so that separate uses of one seed do not share streams.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ a.rotate_left(32));
    rng.set_stream(b);
    rng.next_u64()
}

/// Unit-box normalization, then an optional seeded rotation.
pub fn prepare_mesh(mesh: &Mesh, rotation_seed: Option<u64>) -> Result<Mesh, PipelineError> {
    let m = normalize_unit_box(mesh)?;
    Ok(match rotation_seed {
        Some(seed) => augment(
            &m,
            &AugmentOptions {
                random_rotation: true,
                jitter_sigma: 0.0,
                seed,
            },
        ),
        None => m,
    })
}

/// Clean unit-box meshes paired with Gaussian-noised copies of the given variance.
pub fn make_pairs(dataset: &[LabeledMesh], variance: f64, seed: u64) -> Result<Vec<DenoisePair>, PipelineError> {
    dataset
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let clean = normalize_unit_box(&s.mesh)?;
            let noisy = add_vertex_noise(&clean, variance, derive_seed(seed, 0x6e6f697365, i as u64))?;
            Ok(DenoisePair {
                id: s.id.clone(),
                clean,
                noisy,
                split: s.split,
            })
        })
        .collect()
}
