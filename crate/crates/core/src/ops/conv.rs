use rand::Rng;

use super::OpsError;
use crate::mesh::EdgeTopology;
use crate::tensor::Tensor;

/// Five stacked `cin x cout` kernels plus a bias.
///
/// `weight` rows `k*cin..(k+1)*cin` hold kernel `k`, applied to `f(e)`, `|f(a)-f(c)|`,
/// `f(a)+f(c)`, `|f(b)-f(d)|` and `f(b)+f(d)` in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weight: Tensor,
    pub bias: Vec<f64>,
}

impl ConvParams {
    pub fn zeros(cin: usize, cout: usize) -> Self {
        Self {
            weight: Tensor::zeros(5 * cin, cout),
            bias: vec![0.0; cout],
        }
    }

    /// Glorot-uniform over the stacked `(5 cin) x cout` matrix, zero bias.
    pub fn glorot<R: Rng + ?Sized>(cin: usize, cout: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (5 * cin + cout) as f64).sqrt();
        let data = (0..5 * cin * cout).map(|_| rng.gen_range(-limit..limit)).collect();
        Self {
            weight: Tensor::from_vec(5 * cin, cout, data),
            bias: vec![0.0; cout],
        }
    }

    pub fn cin(&self) -> usize {
        self.weight.rows() / 5
    }

    pub fn cout(&self) -> usize {
        self.weight.cols()
    }

    /// Writes `kernel` (cin x cout, row-major) into slot `k`.
    pub fn set_kernel(&mut self, k: usize, kernel: &[f64]) {
        let (cin, cout) = (self.cin(), self.cout());
        assert_eq!(kernel.len(), cin * cout);
        self.weight.data_mut()[k * cin * cout..(k + 1) * cin * cout].copy_from_slice(kernel);
    }
}

/// Everything the backward pass needs from the forward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    input: Tensor,
    gathered: Tensor,
}

/// `(e, |a-c|, a+c, |b-d|, b+d)` per edge, empty ring slots read as zero rows.
fn gather(features: &Tensor, topology: &EdgeTopology) -> Tensor {
    let c = features.cols();
    let zero = vec![0.0; c];
    let mut g = Tensor::zeros(features.rows(), 5 * c);
    for e in 0..features.rows() {
        let ring = topology.neighbors(e);
        let fetch = |slot: Option<usize>| slot.map_or(zero.as_slice(), |n| features.row(n));
        let (a, b, cc, d) = (fetch(ring[0]), fetch(ring[1]), fetch(ring[2]), fetch(ring[3]));
        let row = g.row_mut(e);
        row[..c].copy_from_slice(features.row(e));
        for k in 0..c {
            row[c + k] = (a[k] - cc[k]).abs();
            row[2 * c + k] = a[k] + cc[k];
            row[3 * c + k] = (b[k] - d[k]).abs();
            row[4 * c + k] = b[k] + d[k];
        }
    }
    g
}

pub fn conv_forward(
    features: &Tensor,
    topology: &EdgeTopology,
    params: &ConvParams,
) -> Result<(Tensor, ConvCache), OpsError> {
    if features.cols() != params.cin() {
        return Err(OpsError::ChannelMismatch {
            expected: params.cin(),
            got: features.cols(),
        });
    }
    if features.rows() != topology.edge_count() {
        return Err(OpsError::RowMismatch {
            expected: topology.edge_count(),
            got: features.rows(),
        });
    }
    let gathered = gather(features, topology);
    let mut out = gathered.matmul(&params.weight);
    out.add_row(&params.bias);
    Ok((
        out,
        ConvCache {
            input: features.clone(),
            gathered,
        },
    ))
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Vec<f64>,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Exact reverse-mode gradients; the subgradient of `|x|` at 0 is taken as 0.
pub fn conv_backward(upstream: &Tensor, cache: &ConvCache, topology: &EdgeTopology, params: &ConvParams) -> ConvGrads {
    let weight = cache.gathered.t_matmul(upstream);
    let bias = upstream.column_sums();
    let d_gathered = upstream.matmul_t(&params.weight);

    let x = &cache.input;
    let c = x.cols();
    let mut input = Tensor::zeros(x.rows(), c);
    for e in 0..x.rows() {
        let g = d_gathered.row(e);
        for (dst, src) in input.row_mut(e).iter_mut().zip(&g[..c]) {
            *dst += src;
        }
        let ring = topology.neighbors(e);
        for (pair, (first, second)) in [(ring[0], ring[2]), (ring[1], ring[3])].into_iter().enumerate() {
            let abs_grad = &g[(1 + 2 * pair) * c..(2 + 2 * pair) * c];
            let sum_grad = &g[(2 + 2 * pair) * c..(3 + 2 * pair) * c];
            for k in 0..c {
                let fv = first.map_or(0.0, |n| x.get(n, k));
                let sv = second.map_or(0.0, |n| x.get(n, k));
                let s = sign(fv - sv) * abs_grad[k];
                if let Some(n) = first {
                    input.row_mut(n)[k] += s + sum_grad[k];
                }
                if let Some(n) = second {
                    input.row_mut(n)[k] += -s + sum_grad[k];
                }
            }
        }
    }
    ConvGrads { input, weight, bias }
}
