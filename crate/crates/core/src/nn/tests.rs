use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::features::{extract, FeatureKind};
use crate::mesh::{build_edge_topology, primitives, EdgeTopology, Mesh};
use crate::ops::PoolPolicy;
use crate::tensor::Tensor;

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn rel(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

enum Loss {
    Labels(Vec<usize>),
    Target(Tensor),
}

fn loss_value(model: &ModelGraph, x: &Tensor, t: &EdgeTopology, loss: &Loss) -> f64 {
    let mut pass = model.forward(x, t).unwrap();
    match loss {
        Loss::Labels(l) => pass.cross_entropy(l).unwrap(),
        Loss::Target(y) => pass.mse(y).unwrap(),
    }
}

/// Central differences over every parameter entry and every input entry.
fn gradient_check(model: &ModelGraph, x: &Tensor, t: &EdgeTopology, loss: &Loss) {
    let h = 1e-5;
    let mut pass = model.forward(x, t).unwrap();
    match loss {
        Loss::Labels(l) => pass.cross_entropy(l).unwrap(),
        Loss::Target(y) => pass.mse(y).unwrap(),
    };
    let (grads, gx) = pass.backward_with_input().unwrap();
    for (b, g) in grads.iter().enumerate() {
        for i in 0..g.data().len() {
            let (mut plus, mut minus) = (model.clone(), model.clone());
            plus.params_mut()[b].data_mut()[i] += h;
            minus.params_mut()[b].data_mut()[i] -= h;
            let n = (loss_value(&plus, x, t, loss) - loss_value(&minus, x, t, loss)) / (2.0 * h);
            assert!(rel(g.data()[i], n) < 1e-6, "param block {b} entry {i}: {} vs {n}", g.data()[i]);
        }
    }
    for i in 0..x.data().len() {
        let (mut plus, mut minus) = (x.clone(), x.clone());
        plus.data_mut()[i] += h;
        minus.data_mut()[i] -= h;
        let n = (loss_value(model, &plus, t, loss) - loss_value(model, &minus, t, loss)) / (2.0 * h);
        assert!(rel(gx.data()[i], n) < 1e-6, "input entry {i}: {} vs {n}", gx.data()[i]);
    }
}

fn small_mesh() -> EdgeTopology {
    build_edge_topology(&primitives::icosahedron()).unwrap()
}

#[test]
fn conv_layer_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = small_mesh();
    let m = ModelGraph::new(2, vec![LayerSpec::MeshConv { cin: 2, cout: 3 }], PoolPolicy::Enhanced, 4).unwrap();
    gradient_check(&m, &random(30, 2, &mut rng), &t, &Loss::Target(random(30, 3, &mut rng)));
}

#[test]
fn instance_norm_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = small_mesh();
    let mut m = ModelGraph::new(3, vec![LayerSpec::InstanceNorm { channels: 3 }], PoolPolicy::Enhanced, 4).unwrap();
    m.params_mut()[0] = random(1, 3, &mut rng);
    m.params_mut()[1] = random(1, 3, &mut rng);
    gradient_check(&m, &random(30, 3, &mut rng), &t, &Loss::Target(random(30, 3, &mut rng)));
}

#[test]
fn relu_dense_and_average_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = small_mesh();
    let layers = vec![
        LayerSpec::Dense { cin: 2, cout: 4 },
        LayerSpec::Relu,
        LayerSpec::GlobalAveragePool,
        LayerSpec::Dense { cin: 4, cout: 3 },
    ];
    let mut m = ModelGraph::new(2, layers, PoolPolicy::Enhanced, 4).unwrap();
    m.params_mut()[1] = random(1, 4, &mut rng);
    gradient_check(&m, &random(30, 2, &mut rng), &t, &Loss::Labels(vec![2]));
}

#[test]
fn pool_and_unpool_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t = build_edge_topology(&primitives::icosphere(1)).unwrap();
    let layers = vec![
        LayerSpec::MeshConv { cin: 2, cout: 3 },
        LayerSpec::Pool { target: 90 },
        LayerSpec::MeshConv { cin: 3, cout: 3 },
        LayerSpec::Unpool,
        LayerSpec::Dense { cin: 3, cout: 2 },
    ];
    let m = ModelGraph::new(2, layers, PoolPolicy::Enhanced, 5).unwrap();
    let labels: Vec<usize> = (0..120).map(|i| i % 2).collect();
    gradient_check(&m, &random(120, 2, &mut rng), &t, &Loss::Labels(labels));
}

#[test]
fn legacy_pool_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = build_edge_topology(&primitives::icosphere(1)).unwrap();
    let layers = vec![
        LayerSpec::Pool { target: 96 },
        LayerSpec::GlobalAveragePool,
        LayerSpec::Dense { cin: 2, cout: 2 },
    ];
    let m = ModelGraph::new(2, layers, PoolPolicy::Legacy, 5).unwrap();
    gradient_check(&m, &random(120, 2, &mut rng), &t, &Loss::Labels(vec![1]));
}

#[test]
fn average_of_constants_and_relu_examples() {
    let t = small_mesh();
    let gap = ModelGraph::new(2, vec![LayerSpec::GlobalAveragePool], PoolPolicy::Enhanced, 0).unwrap();
    let out = gap.forward(&Tensor::filled(30, 2, 0.375), &t).unwrap();
    assert_eq!(out.output().data(), &[0.375, 0.375]);

    let relu = ModelGraph::new(1, vec![LayerSpec::Relu], PoolPolicy::Enhanced, 0).unwrap();
    let x = Tensor::from_vec(30, 1, (0..30).map(|i| if i == 0 { -1.0 } else { 2.0 }).collect());
    let out = relu.forward(&x, &t).unwrap();
    assert_eq!(&out.output().data()[..2], &[0.0, 2.0]);
}

#[test]
fn encoder_decoder_restores_rows() {
    let t = build_edge_topology(&primitives::icosphere(2)).unwrap();
    let layers = vec![
        LayerSpec::MeshConv { cin: 1, cout: 4 },
        LayerSpec::Pool { target: 360 },
        LayerSpec::Pool { target: 240 },
        LayerSpec::MeshConv { cin: 4, cout: 4 },
        LayerSpec::Unpool,
        LayerSpec::Unpool,
        LayerSpec::MeshConv { cin: 4, cout: 2 },
    ];
    let m = ModelGraph::new(1, layers, PoolPolicy::Enhanced, 1).unwrap();
    let x = Tensor::from_vec(480, 1, (0..480).map(|i| (i as f64 * 0.37).sin()).collect());
    let pass = m.forward(&x, &t).unwrap();
    assert_eq!(pass.output().shape(), (480, 2));
    assert_eq!(pass.histories().len(), 2);
    assert_eq!(pass.topology().edge_count(), 480);
}

#[test]
fn pool_layer_is_a_no_op_on_small_meshes() {
    let t = small_mesh();
    let m = ModelGraph::new(1, vec![LayerSpec::Pool { target: 40 }, LayerSpec::Unpool], PoolPolicy::Enhanced, 0).unwrap();
    let x = Tensor::from_vec(30, 1, (0..30).map(f64::from).collect());
    let pass = m.forward(&x, &t).unwrap();
    assert_eq!(pass.output(), &x);
}

#[test]
fn instance_norm_standardizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t = small_mesh();
    let m = ModelGraph::new(3, vec![LayerSpec::InstanceNorm { channels: 3 }], PoolPolicy::Enhanced, 0).unwrap();
    let x = random(30, 3, &mut rng).scaled(4.0);
    let pass = m.forward(&x, &t).unwrap();
    let y = pass.output();
    for k in 0..3 {
        let mean = (0..30).map(|r| y.get(r, k)).sum::<f64>() / 30.0;
        let var = (0..30).map(|r| (y.get(r, k) - mean).powi(2)).sum::<f64>() / 30.0;
        assert!(mean.abs() < 1e-9 && (var - 1.0).abs() < 1e-9, "channel {k}: {mean} {var}");
    }
}

#[test]
fn second_backward_is_stale() {
    let t = small_mesh();
    let m = ModelGraph::new(1, vec![LayerSpec::MeshConv { cin: 1, cout: 2 }], PoolPolicy::Enhanced, 0).unwrap();
    let mut pass = m.forward(&Tensor::filled(30, 1, 1.0), &t).unwrap();
    assert_eq!(pass.backward(), Err(NnError::NoLoss));
    pass.mse(&Tensor::zeros(30, 2)).unwrap();
    pass.backward().unwrap();
    assert_eq!(pass.backward(), Err(NnError::StaleCache));
}

#[test]
fn constant_and_scaled_losses() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let t = small_mesh();
    let layers = vec![LayerSpec::MeshConv { cin: 2, cout: 2 }, LayerSpec::Relu];
    let m = ModelGraph::new(2, layers, PoolPolicy::Enhanced, 3).unwrap();
    let x = random(30, 2, &mut rng);

    let mut pass = m.forward(&x, &t).unwrap();
    let out = pass.output_var();
    let tape = pass.tape_mut();
    let s = tape.sum(out);
    let zero = tape.scale(s, 0.0);
    pass.set_loss(zero).unwrap();
    assert!(pass.backward().unwrap().iter().all(|g| g.data().iter().all(|&v| v == 0.0)));

    let target = random(30, 2, &mut rng);
    let grads_at = |scale: f64| {
        let mut pass = m.forward(&x, &t).unwrap();
        let out = pass.output_var();
        let l = pass.tape_mut().mse(out, &target).unwrap();
        let l = pass.tape_mut().scale(l, scale);
        pass.set_loss(l).unwrap();
        pass.backward().unwrap()
    };
    for (a, b) in grads_at(1.0).iter().zip(grads_at(2.0)) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(2.0 * x, *y);
        }
    }
}

#[test]
fn loss_examples() {
    let mut tape = Tape::new();
    let logits = tape.leaf(Tensor::filled(1, 4, 0.7));
    let ce = tape.cross_entropy(logits, &[3]).unwrap();
    assert!((tape.value(ce).get(0, 0) - 4f64.ln()).abs() < 1e-12);
    assert_eq!(
        tape.cross_entropy(logits, &[4]).unwrap_err(),
        NnError::LabelOutOfRange { label: 4, classes: 4 }
    );
    let pred = tape.leaf(Tensor::filled(5, 2, 0.3));
    let same = tape.mse(pred, &Tensor::filled(5, 2, 0.3)).unwrap();
    assert_eq!(tape.value(same).get(0, 0), 0.0);
    let off = tape.mse(pred, &Tensor::filled(5, 2, 0.2)).unwrap();
    assert!((tape.value(off).get(0, 0) - 0.01).abs() < 1e-15);
}

#[test]
fn invalid_layer_stacks_are_rejected() {
    let bad = [
        vec![LayerSpec::MeshConv { cin: 3, cout: 2 }],
        vec![LayerSpec::Unpool],
        vec![LayerSpec::Pool { target: 5 }, LayerSpec::Pool { target: 3 }, LayerSpec::Unpool],
        vec![LayerSpec::GlobalAveragePool, LayerSpec::MeshConv { cin: 2, cout: 2 }],
        vec![LayerSpec::InstanceNorm { channels: 4 }],
    ];
    for layers in bad {
        assert!(matches!(
            ModelGraph::new(2, layers, PoolPolicy::Enhanced, 0),
            Err(NnError::InvalidModel(_))
        ));
    }
}

#[test]
fn logits_ignore_edge_order() {
    let mesh = primitives::icosphere(1);
    let mut faces = mesh.faces().to_vec();
    faces.reverse();
    faces.rotate_left(7);
    let shuffled = Mesh::new(mesh.vertices().to_vec(), faces).unwrap();
    let layers = vec![
        LayerSpec::MeshConv { cin: 2, cout: 4 },
        LayerSpec::InstanceNorm { channels: 4 },
        LayerSpec::Relu,
        LayerSpec::MeshConv { cin: 4, cout: 4 },
        LayerSpec::GlobalAveragePool,
        LayerSpec::Dense { cin: 4, cout: 3 },
    ];
    let m = ModelGraph::new(2, layers, PoolPolicy::Enhanced, 12).unwrap();
    let logits = |mesh: &Mesh| {
        let t = build_edge_topology(mesh).unwrap();
        let f = extract(FeatureKind::Ff, &t, mesh).unwrap();
        let x = Tensor::from_vec(f.rows(), 2, f.into_vec());
        m.forward(&x, &t).unwrap().output().clone()
    };
    let (a, b) = (logits(&mesh), logits(&shuffled));
    assert_ne!(build_edge_topology(&mesh).unwrap().edges(), build_edge_topology(&shuffled).unwrap().edges());
    for (x, y) in a.data().iter().zip(b.data()) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn training_is_deterministic() {
    let t = small_mesh();
    let run = || {
        let layers = vec![
            LayerSpec::MeshConv { cin: 1, cout: 3 },
            LayerSpec::Relu,
            LayerSpec::GlobalAveragePool,
            LayerSpec::Dense { cin: 3, cout: 2 },
        ];
        let mut m = ModelGraph::new(1, layers, PoolPolicy::Enhanced, 99).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::adam(), 0.01, m.params());
        let x = Tensor::from_vec(30, 1, (0..30).map(|i| (i as f64).cos()).collect());
        for step in 0..10 {
            let mut pass = m.forward(&x, &t).unwrap();
            pass.cross_entropy(&[step % 2]).unwrap();
            let g = pass.backward().unwrap();
            opt.step(m.params_mut(), &g).unwrap();
        }
        m
    };
    let (a, b) = (run(), run());
    for (x, y) in a.params().iter().zip(b.params()) {
        assert!(x.data().iter().zip(y.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
