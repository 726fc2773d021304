//! Metric definitions and reports.

use std::fmt;

use serde::Serialize;

use super::config::Task;
use super::PipelineError;

/// Index of the largest value; the first one wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(predicted: &[usize], labels: &[usize]) -> Result<f64, PipelineError> {
    if predicted.is_empty() {
        return Err(PipelineError::EmptyTestSet);
    }
    if predicted.len() != labels.len() {
        return Err(PipelineError::InvalidConfig(format!(
            "{} predictions for {} labels",
            predicted.len(),
            labels.len()
        )));
    }
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Length-weighted share of correctly labeled edges.
pub fn soft_edge_accuracy(lengths: &[f64], predicted: &[usize], labels: &[usize]) -> Result<f64, PipelineError> {
    if lengths.len() != predicted.len() || lengths.len() != labels.len() {
        return Err(PipelineError::MissingLabels(format!(
            "{} edges, {} predictions, {} labels",
            lengths.len(),
            predicted.len(),
            labels.len()
        )));
    }
    let total: f64 = lengths.iter().sum();
    if total <= 0.0 {
        return Err(PipelineError::EmptyTestSet);
    }
    let hit: f64 = lengths
        .iter()
        .zip(predicted.iter().zip(labels))
        .filter(|(_, (p, l))| p == l)
        .map(|(w, _)| w)
        .sum();
    Ok(hit / total)
}

/// Mean over every entry of the squared difference.
pub fn mean_squared_error(a: &[f64], b: &[f64]) -> Result<f64, PipelineError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(PipelineError::TopologyMismatch(format!("{} values against {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

/// Everything one training run reports. Wall-clock time is kept out of the serialized
/// records so reruns produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub task: String,
    pub config_hash: String,
    pub dataset_hash: String,
    pub seed: u64,
    pub features: String,
    pub policy: String,
    pub epochs: Vec<EpochRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub soft_edge_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identity_mse: Option<f64>,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

#[derive(Serialize)]
struct EpochLine<'a> {
    record: &'static str,
    config_hash: &'a str,
    #[serde(flatten)]
    epoch: &'a EpochRecord,
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    record: &'static str,
    #[serde(flatten)]
    report: &'a MetricsReport,
}

impl MetricsReport {
    pub fn new(task: Task, config_hash: String, dataset_hash: String, seed: u64) -> Self {
        Self {
            task: task.to_string(),
            config_hash,
            dataset_hash,
            seed,
            features: String::new(),
            policy: String::new(),
            epochs: Vec::new(),
            accuracy: None,
            soft_edge_accuracy: None,
            mse: None,
            identity_mse: None,
            wall_clock_secs: 0.0,
        }
    }

    /// One JSON object per epoch, then a summary object, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for epoch in &self.epochs {
            let line = EpochLine {
                record: "epoch",
                config_hash: &self.config_hash,
                epoch,
            };
            out.push_str(&serde_json::to_string(&line).expect("plain data serializes"));
            out.push('\n');
        }
        let summary = SummaryLine {
            record: "summary",
            report: self,
        };
        let mut value = serde_json::to_value(&summary).expect("plain data serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("epochs");
        }
        out.push_str(&value.to_string());
        out.push('\n');
        out
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "task          {}", self.task)?;
        writeln!(f, "config hash   {}", self.config_hash)?;
        writeln!(f, "dataset hash  {}", self.dataset_hash)?;
        writeln!(f, "seed          {}", self.seed)?;
        if let Some(last) = self.epochs.last() {
            writeln!(f, "final loss    {:.6} (epoch {})", last.loss, last.epoch)?;
        }
        let rows = [
            ("accuracy", self.accuracy),
            ("soft edge acc", self.soft_edge_accuracy),
            ("mse", self.mse),
            ("identity mse", self.identity_mse),
        ];
        for (name, v) in rows {
            if let Some(v) = v {
                writeln!(f, "{name:<13} {v:.6}")?;
            }
        }
        Ok(())
    }
}
