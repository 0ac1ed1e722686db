use crate::dom_graph::DomGraph;
use crate::linalg::Matrix;

/// Compressed sparse row matrix used for graph propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// `self * x`.
    pub fn apply(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.rows(), self.n, "propagation shape");
        let mut out = Matrix::zeros(self.n, x.cols());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                let src = x.row(j);
                for (o, s) in out.row_mut(i).iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        out
    }

    /// `selfᵀ * x`.
    pub fn apply_transpose(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.rows(), self.n, "propagation shape");
        let mut out = Matrix::zeros(self.n, x.cols());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                let src = x.row(i);
                for (o, s) in out.row_mut(j).iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }
}

/// Self-loop-augmented neighbour lists (CSR) for attention layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborLists {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl NeighborLists {
    /// Undirected tree edges plus one self loop per node; each list is sorted.
    pub fn with_self_loops(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut lists: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for &(a, b) in edges {
            if a != b {
                lists[a].push(b);
                lists[b].push(a);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for mut l in lists {
            l.sort_unstable();
            l.dedup();
            targets.extend(l);
            offsets.push(targets.len());
        }
        NeighborLists { offsets, targets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    /// Range of flat edge slots belonging to node `i`.
    pub fn slots(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn target(&self, slot: usize) -> usize {
        self.targets[slot]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.slots(i)]
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` over `n` nodes with undirected `edges`.
pub fn normalized_adjacency_from_edges(n: usize, edges: &[(usize, usize)]) -> SparseMatrix {
    let lists = NeighborLists::with_self_loops(n, edges);
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / (lists.neighbors(i).len() as f64).sqrt()).collect();
    let mut values = Vec::with_capacity(lists.edge_count());
    for i in 0..n {
        for &j in lists.neighbors(i) {
            values.push(inv_sqrt[i] * inv_sqrt[j]);
        }
    }
    SparseMatrix { n, offsets: lists.offsets, cols: lists.targets, values }
}

pub fn normalized_adjacency(graph: &DomGraph) -> SparseMatrix {
    normalized_adjacency_from_edges(graph.len(), &graph.edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node() {
        let a = normalized_adjacency_from_edges(1, &[]).to_dense();
        assert_eq!(a, Matrix::from_rows(&[vec![1.0]]));
    }

    #[test]
    fn one_edge() {
        let a = normalized_adjacency_from_edges(2, &[(0, 1)]).to_dense();
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[(i, j)] - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn path_of_three() {
        let a = normalized_adjacency_from_edges(3, &[(0, 1), (1, 2)]).to_dense();
        assert!((a[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((a[(0, 1)] - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert_eq!(a[(0, 2)], 0.0);
        assert_eq!(a, a.transpose());
    }

    #[test]
    fn transpose_apply_matches_dense() {
        let s = normalized_adjacency_from_edges(4, &[(0, 1), (0, 2), (2, 3)]);
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, -1.0], vec![3.0, 0.5], vec![-2.0, 1.0]]);
        let d = s.to_dense();
        assert!(s.apply(&x).max_abs_diff(&d.matmul(&x)) < 1e-15);
        assert!(s.apply_transpose(&x).max_abs_diff(&d.transpose().matmul(&x)) < 1e-15);
    }
}
