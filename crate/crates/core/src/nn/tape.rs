use std::rc::Rc;

use super::NnError;
use crate::mesh::EdgeTopology;
use crate::ops::{conv_backward, conv_forward, ConvParams, OpsError, SparseMap};
use crate::tensor::Tensor;

/// Variance floor inside instance normalization.
pub const NORM_EPS: f64 = 1e-10;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Maps the upstream gradient and the parents' values to one gradient per parent.
type Backward = Box<dyn Fn(&Tensor, &[&Tensor]) -> Vec<Tensor>>;

struct Node {
    value: Tensor,
    parents: Vec<usize>,
    backward: Option<Backward>,
}

/// Append-only record of a computation. Nodes are stored in creation order, which is a
/// topological order, so the reverse sweep is a single backwards pass over the list.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl std::fmt::Debug for Tape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tape({} nodes)", self.nodes.len())
    }
}

fn relu_mask(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Vec::new(), None)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, parents: Vec<Var>, backward: Option<Backward>) -> Var {
        self.nodes.push(Node {
            value,
            parents: parents.into_iter().map(|p| p.0).collect(),
            backward,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|v| v.max(0.0));
        self.push(
            y,
            vec![x],
            Some(Box::new(|g, p| {
                let mut d = g.clone();
                for (d, &x) in d.data_mut().iter_mut().zip(p[0].data()) {
                    *d *= relu_mask(x);
                }
                vec![d]
            })),
        )
    }

    /// Edge convolution with `weight` (5 cin x cout) and `bias` (1 x cout).
    pub fn conv(&mut self, x: Var, weight: Var, bias: Var, topology: Rc<EdgeTopology>) -> Result<Var, OpsError> {
        let params = ConvParams {
            weight: self.value(weight).clone(),
            bias: self.value(bias).data().to_vec(),
        };
        let (y, cache) = conv_forward(self.value(x), &topology, &params)?;
        Ok(self.push(
            y,
            vec![x, weight, bias],
            Some(Box::new(move |g, p| {
                let params = ConvParams {
                    weight: p[1].clone(),
                    bias: p[2].data().to_vec(),
                };
                let grads = conv_backward(g, &cache, &topology, &params);
                let cout = grads.bias.len();
                vec![grads.input, grads.weight, Tensor::from_vec(1, cout, grads.bias)]
            })),
        ))
    }

    /// Per-channel standardization over rows followed by `gamma * x + beta` (both 1 x C).
    pub fn instance_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let (n, c) = xv.shape();
        let mut mean = vec![0.0; c];
        let mut inv_std = vec![0.0; c];
        for k in 0..c {
            let m = (0..n).map(|r| xv.get(r, k)).sum::<f64>() / n as f64;
            let var = (0..n).map(|r| (xv.get(r, k) - m).powi(2)).sum::<f64>() / n as f64;
            mean[k] = m;
            inv_std[k] = 1.0 / (var + NORM_EPS).sqrt();
        }
        let mut xhat = Tensor::zeros(n, c);
        for r in 0..n {
            for k in 0..c {
                xhat.set(r, k, (xv.get(r, k) - mean[k]) * inv_std[k]);
            }
        }
        let (gv, bv) = (self.value(gamma).data().to_vec(), self.value(beta).data().to_vec());
        let mut y = xhat.clone();
        for r in 0..n {
            for (k, v) in y.row_mut(r).iter_mut().enumerate() {
                *v = gv[k] * *v + bv[k];
            }
        }
        self.push(
            y,
            vec![x, gamma, beta],
            Some(Box::new(move |g, p| {
                let gamma = p[1].data();
                let mut dx = Tensor::zeros(n, c);
                let mut dgamma = vec![0.0; c];
                let dbeta = g.column_sums();
                for k in 0..c {
                    let mut sum_dxhat = 0.0;
                    let mut sum_dxhat_xhat = 0.0;
                    for r in 0..n {
                        let dxhat = g.get(r, k) * gamma[k];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat.get(r, k);
                        dgamma[k] += g.get(r, k) * xhat.get(r, k);
                    }
                    for r in 0..n {
                        let dxhat = g.get(r, k) * gamma[k];
                        let v = inv_std[k] / n as f64 * (n as f64 * dxhat - sum_dxhat - xhat.get(r, k) * sum_dxhat_xhat);
                        dx.set(r, k, v);
                    }
                }
                vec![dx, Tensor::from_vec(1, c, dgamma), Tensor::from_vec(1, c, dbeta)]
            })),
        )
    }

    /// `map · x`; used for pooling and unpooling.
    pub fn linear_map(&mut self, x: Var, map: Rc<SparseMap>) -> Var {
        let y = map.apply(self.value(x));
        self.push(y, vec![x], Some(Box::new(move |g, _| vec![map.apply_transpose(g)])))
    }

    /// Column means as a single row.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let n = xv.rows();
        let c = xv.cols();
        let y = Tensor::from_vec(1, c, xv.column_sums().into_iter().map(|s| s / n as f64).collect());
        self.push(
            y,
            vec![x],
            Some(Box::new(move |g, _| {
                let mut d = Tensor::zeros(n, c);
                for r in 0..n {
                    for (k, v) in d.row_mut(r).iter_mut().enumerate() {
                        *v = g.get(0, k) / n as f64;
                    }
                }
                vec![d]
            })),
        )
    }

    /// Row-wise affine map `x W + b` with `b` of shape 1 x cout.
    pub fn dense(&mut self, x: Var, weight: Var, bias: Var) -> Var {
        let mut y = self.value(x).matmul(self.value(weight));
        y.add_row(self.value(bias).data());
        self.push(
            y,
            vec![x, weight, bias],
            Some(Box::new(|g, p| {
                let dx = g.matmul_t(p[1]);
                let dw = p[0].t_matmul(g);
                let db = Tensor::from_vec(1, g.cols(), g.column_sums());
                vec![dx, dw, db]
            })),
        )
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let y = self.value(x).scaled(s);
        self.push(y, vec![x], Some(Box::new(move |g, _| vec![g.scaled(s)])))
    }

    /// Sum of all entries as a 1 x 1 tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let (r, c) = self.value(x).shape();
        let y = Tensor::scalar(self.value(x).sum());
        self.push(y, vec![x], Some(Box::new(move |g, _| vec![Tensor::filled(r, c, g.get(0, 0))])))
    }

    /// Mean over rows of `-log softmax(logits[r])[labels[r]]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var, NnError> {
        let lv = self.value(logits);
        let (n, k) = lv.shape();
        if labels.len() != n {
            return Err(NnError::Shape(format!("{} labels for {n} logit rows", labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(NnError::LabelOutOfRange { label: bad, classes: k });
        }
        let mut probs = Tensor::zeros(n, k);
        let mut loss = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            let row = lv.row(r);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
            let lse = m + z.ln();
            loss += lse - row[label];
            for (j, p) in probs.row_mut(r).iter_mut().enumerate() {
                *p = (row[j] - lse).exp();
            }
        }
        let labels = labels.to_vec();
        Ok(self.push(
            Tensor::scalar(loss / n as f64),
            vec![logits],
            Some(Box::new(move |g, _| {
                let mut d = probs.clone();
                for (r, &l) in labels.iter().enumerate() {
                    let v = d.get(r, l) - 1.0;
                    d.set(r, l, v);
                }
                vec![d.scaled(g.get(0, 0) / n as f64)]
            })),
        ))
    }

    /// Mean squared difference over every entry.
    pub fn mse(&mut self, pred: Var, target: &Tensor) -> Result<Var, NnError> {
        let pv = self.value(pred);
        if pv.shape() != target.shape() {
            return Err(NnError::Shape(format!(
                "prediction {:?} vs target {:?}",
                pv.shape(),
                target.shape()
            )));
        }
        let count = pv.data().len().max(1) as f64;
        let diff = Tensor::from_vec(
            pv.rows(),
            pv.cols(),
            pv.data().iter().zip(target.data()).map(|(p, t)| p - t).collect(),
        );
        let loss = diff.data().iter().map(|d| d * d).sum::<f64>() / count;
        Ok(self.push(
            Tensor::scalar(loss),
            vec![pred],
            Some(Box::new(move |g, _| vec![diff.scaled(2.0 * g.get(0, 0) / count)])),
        ))
    }

    /// Reverse sweep from `root` (seeded with ones). Returns the gradient of every node that
    /// `root` depends on, `None` elsewhere.
    pub fn gradients(&self, root: Var) -> Vec<Option<Tensor>> {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        let (r, c) = self.nodes[root.0].value.shape();
        grads[root.0] = Some(Tensor::filled(r, c, 1.0));
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            let Some(backward) = &node.backward else { continue };
            let Some(g) = grads[i].take() else { continue };
            let parents: Vec<&Tensor> = node.parents.iter().map(|&p| &self.nodes[p].value).collect();
            for (&p, d) in node.parents.iter().zip(backward(&g, &parents)) {
                match &mut grads[p] {
                    Some(acc) => acc.add_assign(&d),
                    slot => *slot = Some(d),
                }
            }
            grads[i] = Some(g);
        }
        grads
    }
}
