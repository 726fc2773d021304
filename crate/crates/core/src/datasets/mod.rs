//! Synthetic labeled mesh collections, augmentation, noise and the on-disk manifest.

mod manifest;
pub mod shapes;

pub use manifest::{parse_edge_labels, parse_index, read_manifest, write_edge_labels, write_manifest, IndexEntry, INDEX_FILE};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::mesh::{apply_motion, validate_manifold, Mesh, MeshError, RigidMotion};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Mesh(#[from] MeshError),
    #[error("{context}: {source}")]
    MeshFile {
        context: String,
        #[source]
        source: MeshError,
    },
    #[error("index line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("edge labels: {0}")]
    Labels(String),
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("no tessellation lands in the edge range {min}..={max}")]
    UnreachableRange { min: usize, max: usize },
    #[error("noise variance must be finite and non-negative, got {0}")]
    NegativeVariance(f64),
    #[error("class {class} has {have} samples, split needs {need}")]
    InsufficientSamples { class: String, have: usize, need: usize },
    #[error("generated sample {id} is not manifold: {report}")]
    NotManifold { id: String, report: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    PrimitiveZoo,
    EngravedCube,
    ArticulatedLimbs,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::PrimitiveZoo => "primitive-zoo",
            Self::EngravedCube => "engraved-cube",
            Self::ArticulatedLimbs => "articulated-limbs",
        }
    }

    /// Edge-count range used when none is given.
    pub fn default_edge_range(self) -> (usize, usize) {
        match self {
            Self::PrimitiveZoo => (240, 480),
            Self::EngravedCube => (600, 900),
            Self::ArticulatedLimbs => (300, 600),
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "primitive-zoo" => Ok(Self::PrimitiveZoo),
            "engraved-cube" => Ok(Self::EngravedCube),
            "articulated-limbs" => Ok(Self::ArticulatedLimbs),
            other => Err(DatasetError::InvalidSpec(format!("unknown generator `{other}`"))),
        }
    }
}

/// What to generate. For `articulated-limbs`, `classes` is the number of labeled parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: GeneratorKind,
    pub classes: usize,
    pub per_class: usize,
    pub edge_range: (usize, usize),
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(kind: GeneratorKind, classes: usize, per_class: usize, seed: u64) -> Self {
        Self {
            kind,
            classes,
            per_class,
            edge_range: kind.default_edge_range(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    #[default]
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMesh {
    pub id: String,
    pub mesh: Mesh,
    pub class_label: Option<usize>,
    /// One label per edge of `build_edge_topology(&mesh)`.
    pub edge_labels: Option<Vec<usize>>,
    pub split: Split,
}

fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Builds every sample of `spec`; each sample draws from its own seeded stream, so a sample
/// does not depend on how many others are generated.
pub fn generate(spec: &DatasetSpec) -> Result<Vec<LabeledMesh>, DatasetError> {
    let (lo, hi) = spec.edge_range;
    if lo > hi {
        return Err(DatasetError::InvalidSpec(format!("edge range {lo}..={hi} is empty")));
    }
    let max_classes = match spec.kind {
        GeneratorKind::PrimitiveZoo => shapes::ZOO_FAMILIES.len(),
        GeneratorKind::EngravedCube => shapes::GLYPHS.len(),
        GeneratorKind::ArticulatedLimbs => 6,
    };
    let min_classes = if spec.kind == GeneratorKind::ArticulatedLimbs { 2 } else { 1 };
    if spec.classes < min_classes || spec.classes > max_classes {
        return Err(DatasetError::InvalidSpec(format!(
            "{} supports {min_classes} to {max_classes} classes, got {}",
            spec.kind, spec.classes
        )));
    }
    let mut out = Vec::new();
    match spec.kind {
        GeneratorKind::ArticulatedLimbs => {
            for i in 0..spec.per_class {
                let mut rng = sample_rng(spec.seed, i as u64);
                let (mesh, labels) = shapes::limb_sample(spec.classes, spec.edge_range, &mut rng)?;
                out.push(LabeledMesh {
                    id: format!("limb-{i:04}"),
                    mesh,
                    class_label: None,
                    edge_labels: Some(labels),
                    split: Split::Train,
                });
            }
        }
        kind => {
            for class in 0..spec.classes {
                for i in 0..spec.per_class {
                    let mut rng = sample_rng(spec.seed, (class as u64) << 32 | i as u64);
                    let (mesh, name) = if kind == GeneratorKind::PrimitiveZoo {
                        (shapes::zoo_sample(class, spec.edge_range, &mut rng)?, shapes::ZOO_FAMILIES[class].to_string())
                    } else {
                        (shapes::engraved_cube_sample(class, spec.edge_range, &mut rng)?, format!("glyph{class}"))
                    };
                    out.push(LabeledMesh {
                        id: format!("{name}-{i:04}"),
                        mesh,
                        class_label: Some(class),
                        edge_labels: None,
                        split: Split::Train,
                    });
                }
            }
        }
    }
    for s in &out {
        let report = validate_manifold(&s.mesh);
        if !report.is_empty() {
            return Err(DatasetError::NotManifold {
                id: s.id.clone(),
                report: report.to_string(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentOptions {
    pub random_rotation: bool,
    pub jitter_sigma: f64,
    pub seed: u64,
}

/// Optional Haar-uniform rotation about the origin, then per-vertex Gaussian jitter.
pub fn augment(mesh: &Mesh, options: &AugmentOptions) -> Mesh {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let rotated = if options.random_rotation {
        apply_motion(mesh, &RigidMotion::random_rotation(&mut rng))
    } else {
        mesh.clone()
    };
    if options.jitter_sigma > 0.0 {
        perturb(&rotated, options.jitter_sigma, &mut rng)
    } else {
        rotated
    }
}

fn perturb(mesh: &Mesh, sigma: f64, rng: &mut ChaCha8Rng) -> Mesh {
    let normal = Normal::new(0.0, sigma).expect("sigma is finite");
    let vertices = mesh
        .vertices()
        .iter()
        .map(|p| p + Vector3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng)))
        .collect();
    mesh.with_vertices(vertices)
}

/// I.i.d. Gaussian noise of the given variance on every coordinate.
pub fn add_vertex_noise(mesh: &Mesh, variance: f64, seed: u64) -> Result<Mesh, DatasetError> {
    if !(variance.is_finite() && variance >= 0.0) {
        return Err(DatasetError::NegativeVariance(variance));
    }
    if variance == 0.0 {
        return Ok(mesh.clone());
    }
    Ok(perturb(mesh, variance.sqrt(), &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Stratified split: per class (meshes without a class form one group), a seeded shuffle
/// takes `per_class_train` samples for training and the next `per_class_test` for testing.
/// Remaining samples are dropped. Output keeps the input order.
pub fn split(
    dataset: &[LabeledMesh],
    per_class_train: usize,
    per_class_test: usize,
    seed: u64,
) -> Result<Vec<LabeledMesh>, DatasetError> {
    let mut groups: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
    for (i, s) in dataset.iter().enumerate() {
        groups.entry(s.class_label).or_default().push(i);
    }
    let need = per_class_train + per_class_test;
    let mut assigned: Vec<Option<Split>> = vec![None; dataset.len()];
    for (class, members) in groups {
        if members.len() < need {
            return Err(DatasetError::InsufficientSamples {
                class: class.map_or("unlabeled".into(), |c| c.to_string()),
                have: members.len(),
                need,
            });
        }
        let mut order = members;
        let mut rng = sample_rng(seed, class.map_or(u64::MAX, |c| c as u64));
        order.shuffle(&mut rng);
        for (rank, &i) in order.iter().enumerate().take(need) {
            assigned[i] = Some(if rank < per_class_train { Split::Train } else { Split::Test });
        }
    }
    Ok(dataset
        .iter()
        .zip(assigned)
        .filter_map(|(s, a)| {
            a.map(|split| LabeledMesh {
                split,
                ..s.clone()
            })
        })
        .collect())
}

/// Hex digest over ids, labels, splits and exact mesh bytes.
pub fn dataset_hash(dataset: &[LabeledMesh]) -> String {
    let mut h = Sha256::new();
    for s in dataset {
        h.update((s.id.len() as u64).to_le_bytes());
        h.update(s.id.as_bytes());
        h.update(s.class_label.map_or(u64::MAX, |c| c as u64).to_le_bytes());
        h.update([s.split as u8]);
        match &s.edge_labels {
            Some(l) => {
                h.update((l.len() as u64).to_le_bytes());
                for &x in l {
                    h.update((x as u64).to_le_bytes());
                }
            }
            None => h.update(u64::MAX.to_le_bytes()),
        }
        h.update(s.mesh.canonical_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests;
