use std::fmt;

use super::config::{ExperimentConfig, FeatureSpec, Task};
use super::train::train;
use super::PipelineError;
use crate::datasets::{dataset_hash, LabeledMesh};
use crate::features::FeatureKind;
use crate::ops::PoolPolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub policy: PoolPolicy,
    pub features: FeatureSpec,
    pub accuracy: f64,
    pub config_hash: String,
    pub dataset_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn cell(&self, policy: PoolPolicy, features: FeatureKind) -> Option<&AblationRow> {
        self.rows
            .iter()
            .find(|r| r.policy == policy && r.features == FeatureSpec::Kind(features))
    }
}

impl fmt::Display for AblationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:<10} {:>9}  {:<16}  {:<16}", "policy", "features", "accuracy", "config", "dataset")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<10} {:<10} {:>9.4}  {:<16}  {:<16}",
                r.policy.to_string(),
                r.features.to_string(),
                r.accuracy,
                r.config_hash,
                r.dataset_hash
            )?;
        }
        Ok(())
    }
}

/// Trains and tests `{legacy, enhanced} x {meshcnn5, ff}` classifiers that differ from `base`
/// only in those two settings.
pub fn run_ablation(base: &ExperimentConfig, dataset: &[LabeledMesh]) -> Result<AblationTable, PipelineError> {
    if base.task != Task::Classification {
        return Err(PipelineError::TaskMismatch {
            expected: Task::Classification.to_string(),
            got: base.task.to_string(),
        });
    }
    let hash = dataset_hash(dataset);
    let mut rows = Vec::new();
    for policy in [PoolPolicy::Legacy, PoolPolicy::Enhanced] {
        for kind in [FeatureKind::Meshcnn5, FeatureKind::Ff] {
            let config = ExperimentConfig {
                policy,
                features: FeatureSpec::Kind(kind),
                ..base.clone()
            };
            let outcome = train(&config, dataset)?;
            rows.push(AblationRow {
                policy,
                features: config.features,
                accuracy: outcome.report.accuracy.ok_or(PipelineError::EmptyTestSet)?,
                config_hash: config.hash_hex(),
                dataset_hash: hash.clone(),
            });
        }
    }
    Ok(AblationTable { rows })
}
