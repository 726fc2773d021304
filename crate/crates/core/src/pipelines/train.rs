use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{hex, ExperimentConfig, FeatureSpec, Task};
use super::metrics::{argmax, mean_squared_error, soft_edge_accuracy, EpochRecord, MetricsReport};
use super::{derive_seed, make_pairs, prepare_mesh, DenoisePair, PipelineError};
use crate::datasets::{add_vertex_noise, dataset_hash, LabeledMesh, Split};
use crate::features::{ChannelStats, FeatureKind};
use crate::mesh::{build_edge_topology, EdgeTopology, Mesh};
use crate::nn::{Checkpoint, ModelGraph, Optimizer};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub report: MetricsReport,
}

/// Test-time options. A rotation seed rotates every evaluated mesh by its own seeded rotation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    pub rotation_seed: Option<u64>,
}

enum Target {
    Class(usize),
    Edges(Vec<usize>),
    Features(Tensor),
}

struct Sample {
    /// Input mesh; the noisy one for de-noising.
    mesh: Mesh,
    topology: EdgeTopology,
    input: Tensor,
    target: Target,
}

fn normalize(stats: &ChannelStats, x: &Tensor) -> Result<Tensor, PipelineError> {
    Ok(Tensor::from_vec(x.rows(), x.cols(), stats.normalize_slice(x.data())?))
}

fn denormalize(stats: &ChannelStats, x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for r in 0..out.rows() {
        for (c, v) in out.row_mut(r).iter_mut().enumerate() {
            *v = *v * stats.std[c] + stats.mean[c];
        }
    }
    out
}

fn target_kind(config: &ExperimentConfig) -> Result<FeatureKind, PipelineError> {
    config
        .target
        .ok_or_else(|| PipelineError::InvalidConfig("denoising needs a target feature kind".into()))
}

fn labeled_sample(config: &ExperimentConfig, s: &LabeledMesh, rotation: Option<u64>) -> Result<Sample, PipelineError> {
    let mesh = prepare_mesh(&s.mesh, rotation)?;
    let topology = build_edge_topology(&mesh)?;
    let input = config.features.extract(&topology, &mesh)?;
    let target = match config.task {
        Task::Classification => Target::Class(
            s.class_label
                .ok_or_else(|| PipelineError::MissingLabels(format!("{} has no class label", s.id)))?,
        ),
        Task::Segmentation => {
            let labels = s
                .edge_labels
                .clone()
                .ok_or_else(|| PipelineError::MissingLabels(format!("{} has no edge labels", s.id)))?;
            if labels.len() != topology.edge_count() {
                return Err(PipelineError::MissingLabels(format!(
                    "{} has {} labels for {} edges",
                    s.id,
                    labels.len(),
                    topology.edge_count()
                )));
            }
            Target::Edges(labels)
        }
        Task::Denoising => unreachable!("de-noising samples come from pairs"),
    };
    Ok(Sample {
        mesh,
        topology,
        input,
        target,
    })
}

fn pair_sample(config: &ExperimentConfig, p: &DenoisePair, rotation: Option<u64>) -> Result<Sample, PipelineError> {
    if p.clean.faces() != p.noisy.faces() || p.clean.vertex_count() != p.noisy.vertex_count() {
        return Err(PipelineError::TopologyMismatch(p.id.clone()));
    }
    let (clean, noisy) = match rotation {
        Some(seed) => (prepare_rotated(&p.clean, seed), prepare_rotated(&p.noisy, seed)),
        None => (p.clean.clone(), p.noisy.clone()),
    };
    let topology = build_edge_topology(&noisy)?;
    let input = config.features.extract(&topology, &noisy)?;
    let target = FeatureSpec::Kind(target_kind(config)?).extract(&topology, &clean)?;
    Ok(Sample {
        mesh: noisy,
        topology,
        input,
        target: Target::Features(target),
    })
}

/// Pairs are already in the unit box; rotation about the origin must not rescale them apart.
fn prepare_rotated(mesh: &Mesh, seed: u64) -> Mesh {
    crate::datasets::augment(
        mesh,
        &crate::datasets::AugmentOptions {
            random_rotation: true,
            jitter_sigma: 0.0,
            seed,
        },
    )
}

fn split_of<'a, T>(items: &'a [T], split: Split, of: impl Fn(&T) -> Split) -> Vec<&'a T> {
    items.iter().filter(|s| of(s) == split).collect()
}

/// One forward and backward pass; returns the loss and parameter gradients.
fn sample_gradients(
    model: &ModelGraph,
    input: &Tensor,
    topology: &EdgeTopology,
    target: &Target,
) -> Result<(f64, Vec<Tensor>), PipelineError> {
    let mut pass = model.forward(input, topology)?;
    let loss = match target {
        Target::Class(c) => pass.cross_entropy(&[*c])?,
        Target::Edges(labels) => pass.cross_entropy(labels)?,
        Target::Features(t) => pass.mse(t)?,
    };
    Ok((loss, pass.backward()?))
}

pub fn train(config: &ExperimentConfig, dataset: &[LabeledMesh]) -> Result<TrainOutcome, PipelineError> {
    train_with_progress(config, dataset, |_| {})
}

/// Trains on the `Train` split and, if a `Test` split exists, reports the task metric on it.
/// `progress` sees every finished epoch.
pub fn train_with_progress(
    config: &ExperimentConfig,
    dataset: &[LabeledMesh],
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, PipelineError> {
    config.validate()?;
    let started = Instant::now();
    let train_set = split_of(dataset, Split::Train, |s| s.split);
    if train_set.is_empty() {
        return Err(PipelineError::MissingSplit(Split::Train));
    }
    let pairs = match config.task {
        Task::Denoising => make_pairs(dataset, config.noise, config.seed)?,
        _ => Vec::new(),
    };
    let train_pairs = split_of(&pairs, Split::Train, |p| p.split);
    let build = |i: usize, rotation: Option<u64>| -> Result<Sample, PipelineError> {
        match config.task {
            Task::Denoising => pair_sample(config, train_pairs[i], rotation),
            _ => labeled_sample(config, train_set[i], rotation),
        }
    };
    let base: Vec<Sample> = (0..train_set.len())
        .into_par_iter()
        .map(|i| build(i, None))
        .collect::<Result<_, _>>()?;

    let input_stats = ChannelStats::fit_rows(base.iter().map(|s| (s.input.cols(), s.input.data())))?;
    let target_stats = match config.task {
        Task::Denoising => Some(ChannelStats::fit_rows(base.iter().map(|s| match &s.target {
            Target::Features(t) => (t.cols(), t.data()),
            _ => unreachable!(),
        }))?),
        _ => None,
    };
    let normalized = |s: &Sample| -> Result<(Tensor, Target), PipelineError> {
        let input = normalize(&input_stats, &s.input)?;
        let target = match &s.target {
            Target::Features(t) => Target::Features(normalize(target_stats.as_ref().expect("fitted"), t)?),
            Target::Class(c) => Target::Class(*c),
            Target::Edges(l) => Target::Edges(l.clone()),
        };
        Ok((input, target))
    };
    let fixed: Vec<(Tensor, Target)> = base.iter().map(normalized).collect::<Result<_, _>>()?;

    let mut model = ModelGraph::new(config.features.channels(), config.layers(), config.policy, config.seed)?;
    let mut optimizer = Optimizer::new(config.optimizer, config.lr, model.params());
    let decay_epoch = (config.epochs as f64 * config.lr_decay_at).floor() as usize;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let augmenting = config.rotate || config.jitter > 0.0;
    let mut report = MetricsReport::new(config.task, config.hash_hex(), dataset_hash(dataset), config.seed);
    report.features = config.features.to_string();
    report.policy = config.policy.to_string();

    for epoch in 0..config.epochs {
        if epoch == decay_epoch && decay_epoch > 0 {
            optimizer.set_lr(config.lr * 0.1);
        }
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (step, group) in order.chunks(config.batch).enumerate() {
            let diverged = |message: String| PipelineError::Divergence {
                epoch: epoch + 1,
                step: step + 1,
                message,
            };
            let results: Vec<(f64, Vec<Tensor>)> = group
                .par_iter()
                .map(|&i| {
                    if !augmenting {
                        let (input, target) = &fixed[i];
                        return sample_gradients(&model, input, &base[i].topology, target);
                    }
                    let s = augmented(config, i, epoch, &build)?;
                    let (input, target) = normalized(&s)?;
                    sample_gradients(&model, &input, &s.topology, &target)
                })
                .collect::<Result<_, _>>()?;
            let mut total: Option<Vec<Tensor>> = None;
            for (loss, grads) in results {
                if !loss.is_finite() {
                    return Err(diverged(format!("loss is {loss}")));
                }
                loss_sum += loss;
                match &mut total {
                    None => total = Some(grads),
                    Some(acc) => acc.iter_mut().zip(&grads).for_each(|(a, g)| a.add_assign(g)),
                }
            }
            let scale = 1.0 / group.len() as f64;
            let grads: Vec<Tensor> = total.expect("groups are non-empty").iter().map(|g| g.scaled(scale)).collect();
            optimizer
                .step(model.params_mut(), &grads)
                .map_err(|e| diverged(e.to_string()))?;
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            loss: loss_sum / order.len() as f64,
            lr: optimizer.lr(),
        };
        progress(&record);
        report.epochs.push(record);
    }

    let checkpoint = Checkpoint {
        model,
        input_stats,
        target_stats,
        config_hash: config.hash(),
        config_text: config.to_text(),
    };
    let has_test = dataset.iter().any(|s| s.split == Split::Test);
    if has_test {
        let opts = EvalOptions::default();
        match config.task {
            Task::Classification => report.accuracy = Some(evaluate_classification(&checkpoint, dataset, &opts)?),
            Task::Segmentation => report.soft_edge_accuracy = Some(evaluate_segmentation(&checkpoint, dataset, &opts)?),
            Task::Denoising => {
                report.mse = Some(evaluate_denoising(&checkpoint, &pairs)?);
                report.identity_mse = Some(identity_baseline(&pairs, target_kind(config)?)?);
            }
        }
    }
    report.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(TrainOutcome { checkpoint, report })
}

/// Per-epoch augmented copy of a training sample.
fn augmented(
    config: &ExperimentConfig,
    i: usize,
    epoch: usize,
    build: &(impl Fn(usize, Option<u64>) -> Result<Sample, PipelineError> + Sync),
) -> Result<Sample, PipelineError> {
    let seed = derive_seed(config.seed, epoch as u64 + 1, i as u64);
    let mut s = build(i, config.rotate.then_some(seed))?;
    if config.jitter > 0.0 {
        let sigma2 = config.jitter * config.jitter;
        let jittered = add_vertex_noise(&s.mesh, sigma2, seed ^ 0x6a69)?;
        s.input = config.features.extract(&s.topology, &jittered)?;
        s.mesh = jittered;
    }
    Ok(s)
}

fn checkpoint_config(checkpoint: &Checkpoint, expected: Task) -> Result<ExperimentConfig, PipelineError> {
    let config = ExperimentConfig::parse(&checkpoint.config_text)?;
    if config.task != expected {
        return Err(PipelineError::TaskMismatch {
            expected: expected.to_string(),
            got: config.task.to_string(),
        });
    }
    if config.hash() != checkpoint.config_hash {
        return Err(PipelineError::InvalidConfig(format!(
            "checkpoint config hash {} does not match its config text",
            hex(&checkpoint.config_hash)
        )));
    }
    Ok(config)
}

/// Raw model output for one prepared mesh: class logits, per-edge logits, or de-normalized
/// target features.
pub fn predict(checkpoint: &Checkpoint, mesh: &Mesh) -> Result<Tensor, PipelineError> {
    let config = ExperimentConfig::parse(&checkpoint.config_text)?;
    let topology = build_edge_topology(mesh)?;
    run_model(checkpoint, &config, mesh, &topology)
}

fn run_model(
    checkpoint: &Checkpoint,
    config: &ExperimentConfig,
    mesh: &Mesh,
    topology: &EdgeTopology,
) -> Result<Tensor, PipelineError> {
    let input = normalize(&checkpoint.input_stats, &config.features.extract(topology, mesh)?)?;
    let out = checkpoint.model.forward(&input, topology)?.output().clone();
    Ok(match &checkpoint.target_stats {
        Some(stats) => denormalize(stats, &out),
        None => out,
    })
}

fn eval_rotation(opts: &EvalOptions, i: usize) -> Option<u64> {
    opts.rotation_seed.map(|s| derive_seed(s, 0x7465_7374, i as u64))
}

/// Share of `Test` meshes whose largest logit is their class.
pub fn evaluate_classification(
    checkpoint: &Checkpoint,
    dataset: &[LabeledMesh],
    opts: &EvalOptions,
) -> Result<f64, PipelineError> {
    let config = checkpoint_config(checkpoint, Task::Classification)?;
    let test = split_of(dataset, Split::Test, |s| s.split);
    if test.is_empty() {
        return Err(PipelineError::EmptyTestSet);
    }
    let hits: Vec<bool> = test
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let sample = labeled_sample(&config, s, eval_rotation(opts, i))?;
            let logits = run_model(checkpoint, &config, &sample.mesh, &sample.topology)?;
            let Target::Class(label) = sample.target else { unreachable!() };
            Ok(argmax(logits.row(0)) == label)
        })
        .collect::<Result<_, PipelineError>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}

/// Length-weighted edge accuracy, averaged over `Test` meshes.
pub fn evaluate_segmentation(
    checkpoint: &Checkpoint,
    dataset: &[LabeledMesh],
    opts: &EvalOptions,
) -> Result<f64, PipelineError> {
    let config = checkpoint_config(checkpoint, Task::Segmentation)?;
    let test = split_of(dataset, Split::Test, |s| s.split);
    if test.is_empty() {
        return Err(PipelineError::EmptyTestSet);
    }
    let scores: Vec<f64> = test
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let sample = labeled_sample(&config, s, eval_rotation(opts, i))?;
            let logits = run_model(checkpoint, &config, &sample.mesh, &sample.topology)?;
            let predicted: Vec<usize> = (0..logits.rows()).map(|r| argmax(logits.row(r))).collect();
            let lengths: Vec<f64> = sample
                .topology
                .edges()
                .iter()
                .map(|&[u, v]| (sample.mesh.vertices()[u] - sample.mesh.vertices()[v]).norm())
                .collect();
            let Target::Edges(labels) = &sample.target else { unreachable!() };
            soft_edge_accuracy(&lengths, &predicted, labels)
        })
        .collect::<Result<_, _>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Mean over `Test` pairs of the raw-channel MSE between the model's output and the clean
/// mesh's target features.
pub fn evaluate_denoising(checkpoint: &Checkpoint, pairs: &[DenoisePair]) -> Result<f64, PipelineError> {
    let config = checkpoint_config(checkpoint, Task::Denoising)?;
    let test = split_of(pairs, Split::Test, |p| p.split);
    if test.is_empty() {
        return Err(PipelineError::EmptyTestSet);
    }
    let errors: Vec<f64> = test
        .par_iter()
        .map(|p| {
            let sample = pair_sample(&config, p, None)?;
            let out = run_model(checkpoint, &config, &sample.mesh, &sample.topology)?;
            let Target::Features(t) = &sample.target else { unreachable!() };
            mean_squared_error(out.data(), t.data())
        })
        .collect::<Result<_, _>>()?;
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

/// Mean over `Test` pairs of the MSE between noisy-mesh and clean-mesh features.
pub fn identity_baseline(pairs: &[DenoisePair], kind: FeatureKind) -> Result<f64, PipelineError> {
    let test = split_of(pairs, Split::Test, |p| p.split);
    if test.is_empty() {
        return Err(PipelineError::EmptyTestSet);
    }
    let spec = FeatureSpec::Kind(kind);
    let errors: Vec<f64> = test
        .par_iter()
        .map(|p| {
            if p.clean.faces() != p.noisy.faces() || p.clean.vertex_count() != p.noisy.vertex_count() {
                return Err(PipelineError::TopologyMismatch(p.id.clone()));
            }
            let topology = build_edge_topology(&p.clean)?;
            let clean = spec.extract(&topology, &p.clean)?;
            let noisy = spec.extract(&topology, &p.noisy)?;
            mean_squared_error(noisy.data(), clean.data())
        })
        .collect::<Result<_, _>>()?;
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}
