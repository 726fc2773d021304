//! Experiment configuration as `key = value` text.
//!
//! One setting per line; `#` starts a comment; blank lines are ignored. Unknown or repeated
//! keys are errors. Every key has a default, so an empty file is the default classification
//! experiment.
//!
//! | key | values | default |
//! |-----|--------|---------|
//! | `task` | `classification`, `segmentation`, `denoising` | `classification` |
//! | `features` | a feature kind, or `meshcnn5:` followed by `+`-joined groups from `dihedral`, `angles`, `ratios` | `ff` |
//! | `target` | a feature kind (denoising only) or `none` | `none` |
//! | `policy` | `enhanced`, `legacy` | `enhanced` |
//! | `widths` | comma-separated convolution widths | `16,32,32` |
//! | `pools` | comma-separated, strictly decreasing edge targets, at most one per width | `360,240,180` |
//! | `classes` | output classes (classification, segmentation) | `4` |
//! | `optimizer` | `adam`, `sgd` | `adam` |
//! | `lr` | learning rate | `0.0002` |
//! | `momentum` | SGD momentum | `0.9` |
//! | `epochs` | training epochs | `100` |
//! | `batch` | meshes per gradient-accumulation group | `8` |
//! | `lr_decay_at` | fraction of epochs after which the rate drops tenfold | `0.75` |
//! | `rotate` | random rotation of training meshes, `true` or `false` | `false` |
//! | `jitter` | per-vertex Gaussian jitter sigma on training meshes | `0` |
//! | `noise` | vertex noise variance for denoising pairs | `0.1` |
//! | `seed` | seed for initialization, shuffling and augmentation | `0` |

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::features::{extract, FeatureKind};
use crate::mesh::{EdgeTopology, Mesh};
use crate::nn::{LayerSpec, OptimizerKind};
use crate::ops::PoolPolicy;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Classification,
    Segmentation,
    Denoising,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Self::Classification => "classification",
            Self::Segmentation => "segmentation",
            Self::Denoising => "denoising",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::Classification, Self::Segmentation, Self::Denoising]
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown task `{s}`"))
    }
}

/// Input representation: a whole feature kind or a subset of the five-channel set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureSpec {
    Kind(FeatureKind),
    Meshcnn5Subset { dihedral: bool, angles: bool, ratios: bool },
}

impl FeatureSpec {
    pub fn channels(self) -> usize {
        match self {
            Self::Kind(k) => k.channels(),
            Self::Meshcnn5Subset { dihedral, angles, ratios } => {
                usize::from(dihedral) + 2 * usize::from(angles) + 2 * usize::from(ratios)
            }
        }
    }

    /// Whether rotating and translating the mesh leaves the channels unchanged.
    pub fn is_rigid_invariant(self) -> bool {
        match self {
            Self::Kind(k) => k.is_rigid_invariant(),
            Self::Meshcnn5Subset { .. } => true,
        }
    }

    fn columns(dihedral: bool, angles: bool, ratios: bool) -> Vec<usize> {
        let mut c = Vec::new();
        if dihedral {
            c.push(0);
        }
        if angles {
            c.extend([1, 2]);
        }
        if ratios {
            c.extend([3, 4]);
        }
        c
    }

    pub fn extract(self, topology: &EdgeTopology, mesh: &Mesh) -> Result<Tensor, PipelineError> {
        match self {
            Self::Kind(k) => {
                let f = extract(k, topology, mesh)?;
                Ok(Tensor::from_vec(f.rows(), f.channels(), f.into_vec()))
            }
            Self::Meshcnn5Subset { dihedral, angles, ratios } => {
                let f = extract(FeatureKind::Meshcnn5, topology, mesh)?;
                let full = Tensor::from_vec(f.rows(), 5, f.into_vec());
                Ok(full.select_columns(&Self::columns(dihedral, angles, ratios)))
            }
        }
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Kind(k) => write!(f, "{k}"),
            Self::Meshcnn5Subset { dihedral, angles, ratios } => {
                let groups: Vec<&str> = [(dihedral, "dihedral"), (angles, "angles"), (ratios, "ratios")]
                    .into_iter()
                    .filter_map(|(on, name)| on.then_some(name))
                    .collect();
                write!(f, "meshcnn5:{}", groups.join("+"))
            }
        }
    }
}

impl FromStr for FeatureSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let Some(groups) = s.strip_prefix("meshcnn5:") else {
            return s.parse::<FeatureKind>().map(Self::Kind).map_err(|e| e.to_string());
        };
        let (mut dihedral, mut angles, mut ratios) = (false, false, false);
        for g in groups.split('+') {
            let slot = match g {
                "dihedral" => &mut dihedral,
                "angles" => &mut angles,
                "ratios" => &mut ratios,
                _ => return Err(format!("unknown channel group `{g}`")),
            };
            if std::mem::replace(slot, true) {
                return Err(format!("channel group `{g}` repeated"));
            }
        }
        Ok(match (dihedral, angles, ratios) {
            (true, true, true) => Self::Kind(FeatureKind::Meshcnn5),
            _ => Self::Meshcnn5Subset { dihedral, angles, ratios },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub features: FeatureSpec,
    pub target: Option<FeatureKind>,
    pub policy: PoolPolicy,
    pub widths: Vec<usize>,
    pub pools: Vec<usize>,
    pub classes: usize,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub lr_decay_at: f64,
    pub rotate: bool,
    pub jitter: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: Task::Classification,
            features: FeatureSpec::Kind(FeatureKind::Ff),
            target: None,
            policy: PoolPolicy::Enhanced,
            widths: vec![16, 32, 32],
            pools: vec![360, 240, 180],
            classes: 4,
            optimizer: OptimizerKind::adam(),
            lr: 2e-4,
            epochs: 100,
            batch: 8,
            lr_decay_at: 0.75,
            rotate: false,
            jitter: 0.0,
            noise: 0.1,
            seed: 0,
        }
    }
}

const KEYS: [&str; 17] = [
    "task", "features", "target", "policy", "widths", "pools", "classes", "optimizer", "lr", "momentum", "epochs",
    "batch", "lr_decay_at", "rotate", "jitter", "noise", "seed",
];

fn list(value: &str) -> Result<Vec<usize>, String> {
    if value.trim().is_empty() || value.trim() == "none" {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|_| format!("`{v}` is not a count")))
        .collect()
}

fn number<T: FromStr>(value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("`{value}` is not a valid number"))
}

fn join(values: &[usize]) -> String {
    if values.is_empty() {
        return "none".into();
    }
    values.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut config = Self::default();
        let mut seen = HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| PipelineError::Config { line: n + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(err(format!("key `{key}` set twice")));
            }
            config.set(key, value.trim()).map_err(|e| match e {
                PipelineError::Config { message, .. } => err(message),
                other => other,
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Sets one key from its text form. Does not run [`ExperimentConfig::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let mut apply = || -> Result<(), String> {
            match key {
                "task" => self.task = value.parse()?,
                "features" => self.features = value.parse()?,
                "target" => {
                    self.target = match value {
                        "none" => None,
                        v => Some(v.parse::<FeatureKind>().map_err(|e| e.to_string())?),
                    }
                }
                "policy" => self.policy = value.parse()?,
                "widths" => self.widths = list(value)?,
                "pools" => self.pools = list(value)?,
                "classes" => self.classes = number(value)?,
                "optimizer" => {
                    self.optimizer = match (value, self.optimizer) {
                        ("adam", OptimizerKind::Adam { .. }) | ("sgd", OptimizerKind::Sgd { .. }) => self.optimizer,
                        ("adam", _) => OptimizerKind::adam(),
                        ("sgd", _) => OptimizerKind::Sgd { momentum: 0.9 },
                        _ => return Err(format!("unknown optimizer `{value}`")),
                    }
                }
                "momentum" => match &mut self.optimizer {
                    OptimizerKind::Sgd { momentum } => *momentum = number(value)?,
                    OptimizerKind::Adam { .. } => return Err("momentum applies to the sgd optimizer only".into()),
                },
                "lr" => self.lr = number(value)?,
                "epochs" => self.epochs = number(value)?,
                "batch" => self.batch = number(value)?,
                "lr_decay_at" => self.lr_decay_at = number(value)?,
                "rotate" => self.rotate = value.parse().map_err(|_| format!("`{value}` is not true or false"))?,
                "jitter" => self.jitter = number(value)?,
                "noise" => self.noise = number(value)?,
                "seed" => self.seed = number(value)?,
                _ => return Err(format!("unknown key `{key}`")),
            }
            Ok(())
        };
        apply().map_err(|message| PipelineError::Config { line: 0, message })
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(m.to_string()));
        match (self.task, self.target) {
            (Task::Denoising, None) => return bad("denoising needs a target feature kind"),
            (Task::Denoising, Some(_)) => {}
            (_, Some(_)) => return bad("target applies to denoising only"),
            (_, None) if self.classes < 2 => return bad("at least two classes are needed"),
            _ => {}
        }
        if self.features.channels() == 0 {
            return bad("feature selection has no channels");
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return bad("widths must be non-empty and positive");
        }
        if self.pools.len() > self.widths.len() {
            return bad("more pool targets than convolution widths");
        }
        if self.pools.contains(&0) || self.pools.windows(2).any(|w| w[1] >= w[0]) {
            return bad("pool targets must be positive and strictly decreasing");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if let OptimizerKind::Sgd { momentum } = self.optimizer {
            if !(0.0..1.0).contains(&momentum) {
                return bad("momentum must be in [0, 1)");
            }
        }
        if self.epochs == 0 || self.batch == 0 {
            return bad("epochs and batch must be positive");
        }
        if !(self.lr_decay_at > 0.0 && self.lr_decay_at <= 1.0) {
            return bad("lr_decay_at must be in (0, 1]");
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0 && self.noise.is_finite() && self.noise >= 0.0) {
            return bad("jitter and noise must be finite and non-negative");
        }
        Ok(())
    }

    /// Canonical text: every key, fixed order. Parsing it gives back an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = match key {
                "task" => self.task.to_string(),
                "features" => self.features.to_string(),
                "target" => self.target.map_or("none".into(), |k| k.to_string()),
                "policy" => self.policy.to_string(),
                "widths" => join(&self.widths),
                "pools" => join(&self.pools),
                "classes" => self.classes.to_string(),
                "optimizer" => match self.optimizer {
                    OptimizerKind::Adam { .. } => "adam".into(),
                    OptimizerKind::Sgd { .. } => "sgd".into(),
                },
                "momentum" => match self.optimizer {
                    OptimizerKind::Sgd { momentum } => format!("{momentum:?}"),
                    OptimizerKind::Adam { .. } => continue,
                },
                "lr" => format!("{:?}", self.lr),
                "epochs" => self.epochs.to_string(),
                "batch" => self.batch.to_string(),
                "lr_decay_at" => format!("{:?}", self.lr_decay_at),
                "rotate" => self.rotate.to_string(),
                "jitter" => format!("{:?}", self.jitter),
                "noise" => format!("{:?}", self.noise),
                "seed" => self.seed.to_string(),
                _ => unreachable!(),
            };
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    /// First eight bytes of the SHA-256 of [`ExperimentConfig::to_text`].
    pub fn hash(&self) -> [u8; 8] {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest[..8].try_into().expect("digest is 32 bytes")
    }

    pub fn hash_hex(&self) -> String {
        hex(&self.hash())
    }

    pub fn output_channels(&self) -> usize {
        match self.task {
            Task::Denoising => self.target.map_or(0, FeatureKind::channels),
            _ => self.classes,
        }
    }

    /// Conv, norm, ReLU and pool per width; then a global-pool head for classification, or
    /// one unpool-conv stage per pool and a final per-edge convolution otherwise.
    pub fn layers(&self) -> Vec<LayerSpec> {
        let mut layers = Vec::new();
        let mut c = self.features.channels();
        for (i, &w) in self.widths.iter().enumerate() {
            layers.extend([
                LayerSpec::MeshConv { cin: c, cout: w },
                LayerSpec::InstanceNorm { channels: w },
                LayerSpec::Relu,
            ]);
            if let Some(&target) = self.pools.get(i) {
                layers.push(LayerSpec::Pool { target });
            }
            c = w;
        }
        let out = self.output_channels();
        if self.task == Task::Classification {
            layers.extend([LayerSpec::GlobalAveragePool, LayerSpec::Dense { cin: c, cout: out }]);
            return layers;
        }
        for k in (0..self.pools.len()).rev() {
            let w = self.widths[k];
            layers.extend([
                LayerSpec::Unpool,
                LayerSpec::MeshConv { cin: c, cout: w },
                LayerSpec::InstanceNorm { channels: w },
                LayerSpec::Relu,
            ]);
            c = w;
        }
        layers.push(LayerSpec::MeshConv { cin: c, cout: out });
        layers
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_hash() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(ExperimentConfig::parse("").unwrap(), c);
        let mut d = c.clone();
        d.seed = 1;
        assert_ne!(d.hash(), c.hash());
        assert_eq!(c.hash_hex().len(), 16);
    }

    #[test]
    fn parse_reads_keys_and_comments() {
        let text = "# demo\ntask = denoising\nfeatures = meshcnn5:dihedral+ratios  # two groups\ntarget = xyz\n\
                    pools = none\noptimizer = sgd\nmomentum = 0.5\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.task, Task::Denoising);
        assert_eq!(c.features.channels(), 3);
        assert_eq!(c.features.to_string(), "meshcnn5:dihedral+ratios");
        assert_eq!(c.target, Some(FeatureKind::Xyz));
        assert!(c.pools.is_empty());
        assert_eq!(c.optimizer, OptimizerKind::Sgd { momentum: 0.5 });
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(c.output_channels(), 3);
    }

    #[test]
    fn parse_rejects_bad_input() {
        for (text, line) in [
            ("colour = red", 1),
            ("task = classification\ntask = segmentation", 2),
            ("\nepochs = many", 2),
            ("no equals sign", 1),
            ("features = meshcnn5:dihedral+dihedral", 1),
            ("momentum = 0.5", 1),
        ] {
            match ExperimentConfig::parse(text) {
                Err(PipelineError::Config { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        for text in ["task = denoising", "target = ff", "pools = 100,200", "widths = none", "lr = 0", "classes = 1"] {
            assert!(matches!(ExperimentConfig::parse(text), Err(PipelineError::InvalidConfig(_))), "{text}");
        }
    }

    #[test]
    fn full_subset_is_the_whole_kind() {
        let f: FeatureSpec = "meshcnn5:ratios+angles+dihedral".parse().unwrap();
        assert_eq!(f, FeatureSpec::Kind(FeatureKind::Meshcnn5));
    }

    #[test]
    fn layer_stacks_are_valid_models() {
        for task in ["classification", "segmentation", "denoising\ntarget = ff"] {
            let c = ExperimentConfig::parse(&format!("task = {task}")).unwrap();
            let m = crate::nn::ModelGraph::new(c.features.channels(), c.layers(), c.policy, 0).unwrap();
            assert_eq!(m.output_channels(), c.output_channels());
        }
    }
}
