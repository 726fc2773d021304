use super::*;
use crate::features::{extract, FeatureKind};
use crate::mesh::build_edge_topology;

#[test]
fn zoo_counts_and_validity() {
    let spec = DatasetSpec::new(GeneratorKind::PrimitiveZoo, 4, 20, 7);
    let data = generate(&spec).unwrap();
    assert_eq!(data.len(), 80);
    for s in &data {
        let t = build_edge_topology(&s.mesh).unwrap();
        assert!((240..=480).contains(&t.edge_count()), "{} has {} edges", s.id, t.edge_count());
    }
    let again = generate(&spec).unwrap();
    for (a, b) in data.iter().zip(&again) {
        assert_eq!(a.mesh.canonical_bytes(), b.mesh.canonical_bytes());
    }
}

#[test]
fn engraved_cubes_and_limbs() {
    let cubes = generate(&DatasetSpec::new(GeneratorKind::EngravedCube, 3, 2, 1)).unwrap();
    assert_eq!(cubes.len(), 6);
    let limbs = generate(&DatasetSpec::new(GeneratorKind::ArticulatedLimbs, 3, 4, 1)).unwrap();
    for s in &limbs {
        let t = build_edge_topology(&s.mesh).unwrap();
        let labels = s.edge_labels.as_ref().unwrap();
        assert_eq!(labels.len(), t.edge_count());
        let mut distinct = labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        assert!(distinct.len() >= 2);
    }
}

#[test]
fn unreachable_range_is_reported() {
    let mut spec = DatasetSpec::new(GeneratorKind::EngravedCube, 2, 1, 0);
    spec.edge_range = (10, 20);
    assert!(matches!(generate(&spec), Err(DatasetError::UnreachableRange { .. })));
    let mut spec = DatasetSpec::new(GeneratorKind::PrimitiveZoo, 5, 1, 0);
    assert!(matches!(generate(&spec), Err(DatasetError::InvalidSpec(_))));
    spec.classes = 2;
    spec.edge_range = (5, 4);
    assert!(generate(&spec).is_err());
}

#[test]
fn augmentation_contracts() {
    let data = generate(&DatasetSpec::new(GeneratorKind::PrimitiveZoo, 4, 1, 3)).unwrap();
    let mesh = &data[2].mesh;
    assert_eq!(&augment(mesh, &AugmentOptions::default()), mesh);
    let opts = AugmentOptions {
        random_rotation: true,
        jitter_sigma: 0.0,
        seed: 5,
    };
    let rotated = augment(mesh, &opts);
    assert_eq!(rotated, augment(mesh, &opts));
    let t = build_edge_topology(mesh).unwrap();
    let ff = |m: &Mesh| extract(FeatureKind::Ff, &t, m).unwrap();
    assert!(ff(mesh).max_abs_diff(&ff(&rotated)) < 1e-9);
    let xyz = |m: &Mesh| extract(FeatureKind::Xyz, &t, m).unwrap();
    assert!(xyz(mesh).max_abs_diff(&xyz(&rotated)) > 1e-3);
}

#[test]
fn noise_statistics() {
    let mesh = crate::mesh::primitives::icosphere(5);
    assert!(mesh.vertex_count() >= 10_000);
    assert_eq!(add_vertex_noise(&mesh, 0.0, 1).unwrap(), mesh);
    let noisy = add_vertex_noise(&mesh, 0.1, 1).unwrap();
    let deltas: Vec<f64> = noisy
        .vertices()
        .iter()
        .zip(mesh.vertices())
        .flat_map(|(a, b)| (a - b).iter().copied().collect::<Vec<_>>())
        .collect();
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (deltas.len() - 1) as f64;
    assert!((var - 0.1).abs() < 0.01, "sample variance {var}");
    assert_ne!(add_vertex_noise(&mesh, 0.1, 2).unwrap(), noisy);
    assert_eq!(noisy.faces(), mesh.faces());
    assert!(matches!(add_vertex_noise(&mesh, -1.0, 1), Err(DatasetError::NegativeVariance(_))));
}

#[test]
fn stratified_splits() {
    let data = generate(&DatasetSpec::new(GeneratorKind::PrimitiveZoo, 2, 20, 4)).unwrap();
    for (train, test) in [(16, 4), (10, 10)] {
        let s = split(&data, train, test, 9).unwrap();
        for class in 0..2 {
            let count = |sp: Split| s.iter().filter(|m| m.class_label == Some(class) && m.split == sp).count();
            assert_eq!((count(Split::Train), count(Split::Test)), (train, test));
        }
        let train_ids: std::collections::HashSet<_> = s.iter().filter(|m| m.split == Split::Train).map(|m| &m.id).collect();
        assert!(s.iter().filter(|m| m.split == Split::Test).all(|m| !train_ids.contains(&m.id)));
        assert_eq!(s, split(&data, train, test, 9).unwrap());
    }
    assert!(matches!(split(&data, 16, 5, 0), Err(DatasetError::InsufficientSamples { .. })));
}

#[test]
fn manifest_round_trip() {
    let data = split(&generate(&DatasetSpec::new(GeneratorKind::ArticulatedLimbs, 3, 3, 2)).unwrap(), 2, 1, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_manifest(dir.path(), &data).unwrap();
    let back = read_manifest(dir.path()).unwrap();
    assert_eq!(back.len(), data.len());
    for (a, b) in data.iter().zip(&back) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.edge_labels, b.edge_labels);
        assert_eq!(a.mesh.faces(), b.mesh.faces());
        assert_eq!(a.split, b.split);
    }
}
