use crate::tensor::Tensor;

/// Row-sparse linear map: output row `i` is `sum w * input[j]` over `rows[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMap {
    rows: Vec<Vec<(usize, f64)>>,
    input_rows: usize,
}

impl SparseMap {
    pub fn identity(n: usize) -> Self {
        Self {
            rows: (0..n).map(|i| vec![(i, 1.0)]).collect(),
            input_rows: n,
        }
    }

    /// Entries of each row must reference inputs below `input_rows`.
    pub fn new(rows: Vec<Vec<(usize, f64)>>, input_rows: usize) -> Self {
        assert!(rows.iter().flatten().all(|&(j, _)| j < input_rows), "sparse index out of range");
        Self { rows, input_rows }
    }

    pub fn output_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn input_rows(&self) -> usize {
        self.input_rows
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `M x`
    pub fn apply(&self, x: &Tensor) -> Tensor {
        assert_eq!(x.rows(), self.input_rows, "sparse map input rows");
        let c = x.cols();
        let mut out = Tensor::zeros(self.rows.len(), c);
        for (i, row) in self.rows.iter().enumerate() {
            let dst = out.row_mut(i);
            for &(j, w) in row {
                for (d, s) in dst.iter_mut().zip(x.row(j)) {
                    *d += w * s;
                }
            }
        }
        out
    }

    /// `Mᵀ g`
    pub fn apply_transpose(&self, g: &Tensor) -> Tensor {
        assert_eq!(g.rows(), self.rows.len(), "sparse map output rows");
        let c = g.cols();
        let mut out = Tensor::zeros(self.input_rows, c);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                let src = g.row(i).to_vec();
                for (d, s) in out.row_mut(j).iter_mut().zip(&src) {
                    *d += w * s;
                }
            }
        }
        out
    }
}

/// Weighted sum of sparse rows with merged duplicate indices, sorted by index.
pub(crate) fn combine(parts: &[(&[(usize, f64)], f64)]) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = parts
        .iter()
        .flat_map(|(row, s)| row.iter().map(move |&(j, w)| (j, w * s)))
        .collect();
    all.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(all.len());
    for (j, w) in all {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += w,
            _ => out.push((j, w)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_is_adjoint() {
        let m = SparseMap::new(vec![vec![(0, 0.5), (2, 0.25)], vec![(1, 2.0)]], 3);
        let x = Tensor::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let g = Tensor::from_vec(2, 2, vec![0.5, -1.0, 2.0, 3.0]);
        let lhs: f64 = m.apply(&x).data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = m.apply_transpose(&g).data().iter().zip(x.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn combine_merges_duplicates() {
        let a = [(0, 1.0), (2, 1.0)];
        let b = [(2, 1.0)];
        assert_eq!(combine(&[(&a, 0.5), (&b, 0.5)]), vec![(0, 0.5), (2, 1.0)]);
    }
}
