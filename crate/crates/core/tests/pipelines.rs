use meshff::datasets::{self, DatasetSpec, GeneratorKind, LabeledMesh, Split};
use meshff::features::ChannelStats;
use meshff::mesh::{build_edge_topology, normalize_unit_box};
use meshff::nn::{decode_checkpoint, encode_checkpoint};
use meshff::pipelines::{
    evaluate_classification, evaluate_denoising, evaluate_segmentation, identity_baseline, make_pairs, train,
    EvalOptions, ExperimentConfig, PipelineError,
};

fn zoo(per_class: usize, train_n: usize, test_n: usize, seed: u64) -> Vec<LabeledMesh> {
    let all = datasets::generate(&DatasetSpec::new(GeneratorKind::PrimitiveZoo, 4, per_class, seed)).unwrap();
    datasets::split(&all, train_n, test_n, seed).unwrap()
}

fn small(extra: &str) -> ExperimentConfig {
    let mut config = ExperimentConfig::parse("widths = 8,8\npools = 300,200\nlr = 0.005\nepochs = 1\n").unwrap();
    for line in extra.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line.split_once('=').unwrap();
        config.set(k.trim(), v.trim()).unwrap();
    }
    config
}

#[test]
fn one_epoch_on_eight_meshes_has_finite_loss() {
    let data = zoo(3, 2, 1, 1);
    assert_eq!(data.iter().filter(|s| s.split == Split::Train).count(), 8);
    let out = train(&small(""), &data).unwrap();
    assert_eq!(out.report.epochs.len(), 1);
    assert!(out.report.epochs[0].loss.is_finite());
    let acc = out.report.accuracy.unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(out.report.config_hash, small("").hash_hex());
}

#[test]
fn same_seed_same_result() {
    let data = zoo(3, 2, 1, 2);
    let config = small("epochs = 2\nseed = 4");
    let a = train(&config, &data).unwrap();
    let b = train(&config, &data).unwrap();
    assert_eq!(a.report.accuracy, b.report.accuracy);
    assert_eq!(a.report.to_jsonl(), b.report.to_jsonl());
    assert_eq!(encode_checkpoint(&a.checkpoint), encode_checkpoint(&b.checkpoint));
}

#[test]
fn checkpoint_statistics_come_from_the_train_split() {
    let data = zoo(3, 2, 1, 3);
    let config = small("");
    let ckpt = train(&config, &data).unwrap().checkpoint;
    let train_features: Vec<_> = data
        .iter()
        .filter(|s| s.split == Split::Train)
        .map(|s| {
            let m = normalize_unit_box(&s.mesh).unwrap();
            let t = build_edge_topology(&m).unwrap();
            meshff::features::extract(meshff::FeatureKind::Ff, &t, &m).unwrap()
        })
        .collect();
    let expected = ChannelStats::fit(&train_features).unwrap();
    for c in 0..2 {
        assert!((ckpt.input_stats.mean[c] - expected.mean[c]).abs() < 1e-12);
        assert!((ckpt.input_stats.std[c] - expected.std[c]).abs() < 1e-12);
    }
    assert_eq!(decode_checkpoint(&encode_checkpoint(&ckpt)).unwrap(), ckpt);
}

#[test]
fn untrained_classifier_is_near_chance() {
    // 30 test meshes per class; an untrained model's accuracy should sit within three binomial
    // standard deviations of 1/4, computed here from n and p.
    let data = zoo(31, 1, 30, 4);
    let mut config = small("epochs = 1\nlr = 0.000000001");
    config.seed = 8;
    let ckpt = train(&ExperimentConfig { ..config }, &data).unwrap().checkpoint;
    let acc = evaluate_classification(&ckpt, &data, &EvalOptions::default()).unwrap();
    let n = 120.0;
    let sigma = (0.25 * 0.75 / n as f64).sqrt();
    assert!((acc - 0.25).abs() <= 3.0 * sigma + 1e-12, "accuracy {acc}");
}

#[test]
fn evaluation_preconditions() {
    let data = zoo(3, 2, 1, 5);
    let ckpt = train(&small(""), &data).unwrap().checkpoint;
    let train_only: Vec<LabeledMesh> = data.iter().filter(|s| s.split == Split::Train).cloned().collect();
    assert!(matches!(
        evaluate_classification(&ckpt, &train_only, &EvalOptions::default()),
        Err(PipelineError::EmptyTestSet)
    ));
    assert!(matches!(
        evaluate_segmentation(&ckpt, &data, &EvalOptions::default()),
        Err(PipelineError::TaskMismatch { .. })
    ));
    let pairs = make_pairs(&data, 0.1, 0).unwrap();
    assert!(matches!(evaluate_denoising(&ckpt, &pairs), Err(PipelineError::TaskMismatch { .. })));
}

#[test]
fn rotated_evaluation_of_invariant_features_is_unchanged() {
    let data = zoo(3, 2, 1, 6);
    let ckpt = train(&small("epochs = 2"), &data).unwrap().checkpoint;
    let plain = evaluate_classification(&ckpt, &data, &EvalOptions::default()).unwrap();
    let rotated = evaluate_classification(&ckpt, &data, &EvalOptions { rotation_seed: Some(3) }).unwrap();
    assert_eq!(plain, rotated);
}

#[test]
fn segmentation_and_denoising_run() {
    let limbs = datasets::generate(&DatasetSpec::new(GeneratorKind::ArticulatedLimbs, 3, 6, 1)).unwrap();
    let limbs = datasets::split(&limbs, 4, 2, 1).unwrap();
    let seg = ExperimentConfig::parse("task = segmentation\nclasses = 3\nwidths = 8,8\npools = 300\nepochs = 1\nlr = 0.005")
        .unwrap();
    let out = train(&seg, &limbs).unwrap();
    let soft = out.report.soft_edge_accuracy.unwrap();
    assert!((0.0..=1.0).contains(&soft));

    let data = zoo(2, 1, 1, 7);
    let den = ExperimentConfig::parse("task = denoising\ntarget = ff\nwidths = 8\npools = none\nepochs = 1").unwrap();
    let out = train(&den, &data).unwrap();
    assert!(out.report.mse.unwrap() >= 0.0);
    let clean_pairs = make_pairs(&data, 0.0, 0).unwrap();
    assert_eq!(identity_baseline(&clean_pairs, meshff::FeatureKind::Ff).unwrap(), 0.0);
    assert_eq!(identity_baseline(&clean_pairs, meshff::FeatureKind::Xyz).unwrap(), 0.0);
}

#[test]
fn diverging_training_reports_epoch_and_step() {
    let data = zoo(3, 2, 1, 8);
    let config = small("lr = 1e300\nepochs = 3\noptimizer = sgd\nmomentum = 0");
    match train(&config, &data) {
        Err(PipelineError::Divergence { epoch, step, .. }) => assert!(epoch >= 1 && step >= 1),
        other => panic!("expected divergence, got {:?}", other.map(|o| o.report)),
    }
}
