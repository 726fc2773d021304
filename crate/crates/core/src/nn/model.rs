use std::fmt;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tape::{Tape, Var};
use super::NnError;
use crate::mesh::EdgeTopology;
use crate::ops::{PoolHistory, PoolPolicy, Pooler};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    MeshConv { cin: usize, cout: usize },
    InstanceNorm { channels: usize },
    Relu,
    /// Collapse edges until at most `target` remain; a no-op on meshes already that small.
    Pool { target: usize },
    /// Undo the most recent unmatched `Pool`.
    Unpool,
    GlobalAveragePool,
    Dense { cin: usize, cout: usize },
}

impl LayerSpec {
    /// Shapes of this layer's parameter blocks, in registry order.
    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        match *self {
            Self::MeshConv { cin, cout } => vec![(5 * cin, cout), (1, cout)],
            Self::InstanceNorm { channels } => vec![(1, channels), (1, channels)],
            Self::Dense { cin, cout } => vec![(cin, cout), (1, cout)],
            _ => Vec::new(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::MeshConv { .. } => "mesh-conv",
            Self::InstanceNorm { .. } => "instance-norm",
            Self::Relu => "relu",
            Self::Pool { .. } => "pool",
            Self::Unpool => "unpool",
            Self::GlobalAveragePool => "global-average-pool",
            Self::Dense { .. } => "dense",
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::MeshConv { cin, cout } | Self::Dense { cin, cout } => write!(f, "{}({cin}->{cout})", self.name()),
            Self::InstanceNorm { channels } => write!(f, "{}({channels})", self.name()),
            Self::Pool { target } => write!(f, "{}({target})", self.name()),
            _ => f.write_str(self.name()),
        }
    }
}

/// A feed-forward stack of mesh layers and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    input_channels: usize,
    layers: Vec<LayerSpec>,
    params: Vec<Tensor>,
    policy: PoolPolicy,
}

/// Checks channel flow, pool/unpool pairing and that mesh layers precede global pooling.
fn check_layers(input_channels: usize, layers: &[LayerSpec]) -> Result<usize, NnError> {
    let mut channels = input_channels;
    let mut open_pools = 0usize;
    let mut pooled_globally = false;
    let mut has_unpool = false;
    for (i, layer) in layers.iter().enumerate() {
        let bad = |m: String| Err(NnError::InvalidModel(format!("layer {i} ({layer}): {m}")));
        let mesh_layer = matches!(
            layer,
            LayerSpec::MeshConv { .. } | LayerSpec::InstanceNorm { .. } | LayerSpec::Pool { .. } | LayerSpec::Unpool
        );
        if mesh_layer && pooled_globally {
            return bad("mesh layers cannot follow global average pooling".into());
        }
        match *layer {
            LayerSpec::MeshConv { cin, cout } | LayerSpec::Dense { cin, cout } => {
                if cin != channels {
                    return bad(format!("expects {cin} input channels, receives {channels}"));
                }
                if cout == 0 {
                    return bad("zero output channels".into());
                }
                channels = cout;
            }
            LayerSpec::InstanceNorm { channels: c } => {
                if c != channels {
                    return bad(format!("normalizes {c} channels, receives {channels}"));
                }
            }
            LayerSpec::Pool { target } => {
                if target == 0 {
                    return bad("pool target must be positive".into());
                }
                open_pools += 1;
            }
            LayerSpec::Unpool => {
                if open_pools == 0 {
                    return bad("no pool left to undo".into());
                }
                open_pools -= 1;
                has_unpool = true;
            }
            LayerSpec::GlobalAveragePool => pooled_globally = true,
            LayerSpec::Relu => {}
        }
    }
    if has_unpool && open_pools != 0 {
        return Err(NnError::InvalidModel(format!("{open_pools} pool layers have no matching unpool")));
    }
    Ok(channels)
}

impl ModelGraph {
    /// Seeded initialization: uniform in `±sqrt(6 / (fan_in + fan_out))` for weights (with
    /// `fan_in = 5 cin` for convolutions), zero biases, unit scale and zero shift for norms.
    pub fn new(input_channels: usize, layers: Vec<LayerSpec>, policy: PoolPolicy, seed: u64) -> Result<Self, NnError> {
        check_layers(input_channels, &layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for layer in &layers {
            match *layer {
                LayerSpec::MeshConv { cin, cout } | LayerSpec::Dense { cin, cout } => {
                    let fan_in = if matches!(layer, LayerSpec::MeshConv { .. }) { 5 * cin } else { cin };
                    let limit = (6.0 / (fan_in + cout) as f64).sqrt();
                    let w = (0..fan_in * cout).map(|_| rng.gen_range(-limit..limit)).collect();
                    params.push(Tensor::from_vec(fan_in, cout, w));
                    params.push(Tensor::zeros(1, cout));
                }
                LayerSpec::InstanceNorm { channels } => {
                    params.push(Tensor::filled(1, channels, 1.0));
                    params.push(Tensor::zeros(1, channels));
                }
                _ => {}
            }
        }
        Ok(Self {
            input_channels,
            layers,
            params,
            policy,
        })
    }

    /// Reassembles a model from stored parts, checking every parameter shape.
    pub fn from_parts(
        input_channels: usize,
        layers: Vec<LayerSpec>,
        params: Vec<Tensor>,
        policy: PoolPolicy,
    ) -> Result<Self, NnError> {
        check_layers(input_channels, &layers)?;
        let shapes: Vec<(usize, usize)> = layers.iter().flat_map(LayerSpec::param_shapes).collect();
        if shapes.len() != params.len() {
            return Err(NnError::InvalidModel(format!(
                "{} parameter blocks stored, layers need {}",
                params.len(),
                shapes.len()
            )));
        }
        for (i, (shape, p)) in shapes.iter().zip(&params).enumerate() {
            if *shape != p.shape() {
                return Err(NnError::InvalidModel(format!(
                    "parameter {i} has shape {:?}, expected {shape:?}",
                    p.shape()
                )));
            }
        }
        Ok(Self {
            input_channels,
            layers,
            params,
            policy,
        })
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn output_channels(&self) -> usize {
        check_layers(self.input_channels, &self.layers).expect("validated at construction")
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn policy(&self) -> PoolPolicy {
        self.policy
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.data().len()).sum()
    }

    /// Runs the layers on one mesh and keeps everything needed for one backward pass.
    pub fn forward(&self, features: &Tensor, topology: &EdgeTopology) -> Result<ForwardPass, NnError> {
        if features.cols() != self.input_channels {
            return Err(NnError::Layer {
                layer: 0,
                message: format!("input has {} channels, model expects {}", features.cols(), self.input_channels),
            });
        }
        if features.rows() != topology.edge_count() {
            return Err(NnError::Layer {
                layer: 0,
                message: format!("{} feature rows for {} edges", features.rows(), topology.edge_count()),
            });
        }
        let mut tape = Tape::new();
        let params: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.clone())).collect();
        let input = tape.leaf(features.clone());
        let mut x = input;
        let mut topo = Rc::new(topology.clone());
        let mut stack: Vec<(Rc<EdgeTopology>, PoolHistory)> = Vec::new();
        let mut histories = Vec::new();
        let mut next_param = 0;
        for (i, layer) in self.layers.iter().enumerate() {
            let err = |message: String| NnError::Layer { layer: i, message };
            match *layer {
                LayerSpec::MeshConv { .. } => {
                    let (w, b) = (params[next_param], params[next_param + 1]);
                    next_param += 2;
                    x = tape.conv(x, w, b, topo.clone()).map_err(|e| err(e.to_string()))?;
                }
                LayerSpec::InstanceNorm { .. } => {
                    let (g, b) = (params[next_param], params[next_param + 1]);
                    next_param += 2;
                    x = tape.instance_norm(x, g, b);
                }
                LayerSpec::Relu => x = tape.relu(x),
                LayerSpec::Pool { target } => {
                    let mut pooler = Pooler::new(tape.value(x), &topo, self.policy).map_err(|e| err(e.to_string()))?;
                    while pooler.edge_count() > target {
                        if pooler.step().is_none() {
                            return Err(err(format!(
                                "no legal collapse left at {} edges (target {target})",
                                pooler.edge_count()
                            )));
                        }
                    }
                    let out = pooler.finish();
                    x = tape.linear_map(x, Rc::new(out.history.averaging_map()));
                    histories.push(out.history.clone());
                    let previous = std::mem::replace(&mut topo, Rc::new(out.topology));
                    stack.push((previous, out.history));
                }
                LayerSpec::Unpool => {
                    let (previous, history) = stack.pop().expect("pairing validated at construction");
                    x = tape.linear_map(x, Rc::new(history.unpool_map()));
                    topo = previous;
                }
                LayerSpec::GlobalAveragePool => x = tape.mean_rows(x),
                LayerSpec::Dense { .. } => {
                    let (w, b) = (params[next_param], params[next_param + 1]);
                    next_param += 2;
                    x = tape.dense(x, w, b);
                }
            }
        }
        Ok(ForwardPass {
            tape,
            input,
            output: x,
            params,
            histories,
            topology: topo,
            loss: None,
            consumed: false,
        })
    }
}

/// One forward evaluation with its tape, ready for a single backward pass.
#[derive(Debug)]
pub struct ForwardPass {
    tape: Tape,
    input: Var,
    output: Var,
    params: Vec<Var>,
    histories: Vec<PoolHistory>,
    topology: Rc<EdgeTopology>,
    loss: Option<Var>,
    consumed: bool,
}

impl ForwardPass {
    pub fn output(&self) -> &Tensor {
        self.tape.value(self.output)
    }

    pub fn output_var(&self) -> Var {
        self.output
    }

    /// Histories of every pool layer, in layer order.
    pub fn histories(&self) -> &[PoolHistory] {
        &self.histories
    }

    /// Topology of the output rows.
    pub fn topology(&self) -> &EdgeTopology {
        &self.topology
    }

    /// For building custom losses on top of the output.
    pub fn tape_mut(&mut self) -> &mut Tape {
        &mut self.tape
    }

    /// Marks a 1 x 1 node as the loss to differentiate.
    pub fn set_loss(&mut self, loss: Var) -> Result<f64, NnError> {
        let v = self.tape.value(loss);
        if v.shape() != (1, 1) {
            return Err(NnError::Shape(format!("loss must be 1x1, got {:?}", v.shape())));
        }
        let value = v.get(0, 0);
        self.loss = Some(loss);
        Ok(value)
    }

    pub fn cross_entropy(&mut self, labels: &[usize]) -> Result<f64, NnError> {
        let l = self.tape.cross_entropy(self.output, labels)?;
        self.set_loss(l)
    }

    pub fn mse(&mut self, target: &Tensor) -> Result<f64, NnError> {
        let l = self.tape.mse(self.output, target)?;
        self.set_loss(l)
    }

    /// Gradients of the loss for every registered parameter. Works once per forward pass.
    pub fn backward(&mut self) -> Result<Vec<Tensor>, NnError> {
        if self.consumed {
            return Err(NnError::StaleCache);
        }
        let loss = self.loss.ok_or(NnError::NoLoss)?;
        self.consumed = true;
        let mut grads = self.tape.gradients(loss);
        Ok(self
            .params
            .iter()
            .map(|&p| {
                grads[p.index()]
                    .take()
                    .unwrap_or_else(|| Tensor::zeros(self.tape.value(p).rows(), self.tape.value(p).cols()))
            })
            .collect())
    }

    /// Gradient with respect to the input features, alongside the parameter gradients.
    pub fn backward_with_input(&mut self) -> Result<(Vec<Tensor>, Tensor), NnError> {
        if self.consumed {
            return Err(NnError::StaleCache);
        }
        let loss = self.loss.ok_or(NnError::NoLoss)?;
        self.consumed = true;
        let mut grads = self.tape.gradients(loss);
        let zeros = |v: Var| Tensor::zeros(self.tape.value(v).rows(), self.tape.value(v).cols());
        let params = self
            .params
            .iter()
            .map(|&p| grads[p.index()].take().unwrap_or_else(|| zeros(p)))
            .collect();
        let gi = grads[self.input.index()].take().unwrap_or_else(|| zeros(self.input));
        Ok((params, gi))
    }
}
