//! Matrix-valued reverse-mode tape.
//!
//! Every operation appends a node holding its value and the inputs it was
//! computed from. `backward` walks the tape once in reverse and
//! accumulates adjoints, skipping nodes that no parameter feeds into.

use super::adjacency::{NeighborLists, SparseMatrix};
use crate::linalg::{dot, norm, Matrix, NORM_EPS};

/// ε inside the layer-norm variance.
pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<'g> {
    Leaf,
    MatMul(Var, Var),
    Propagate(&'g SparseMatrix, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Relu(Var),
    Elu(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, normed: Matrix, inv_std: Vec<f64> },
    Attention { graph: &'g NeighborLists, wh: Var, src: Var, dst: Var, slope: f64, pre: Vec<f64>, alpha: Vec<f64> },
    ConcatCols(Vec<Var>),
    Mean(Vec<Var>),
    SelectRow(Var, usize),
    MeanRows(Var),
    MaskedSoftmax(&'g [bool], Var),
    MaskRows(&'g [bool], Var),
    WeightedSum { weights: Var, values: Var },
    CosineLoss { pred: Var, target: &'g [f64] },
}

struct Node<'g> {
    value: Matrix,
    op: Op<'g>,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape<'g> {
    nodes: Vec<Node<'g>>,
}

/// Adjoints produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads[v.0].take()
    }
}

fn accumulate(slot: &mut Option<Matrix>, g: Matrix) {
    match slot {
        Some(existing) => existing.add_assign(&g),
        None => *slot = Some(g),
    }
}

impl<'g> Tape<'g> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix, op: Op<'g>, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|i| self.nodes[i.0].needs_grad);
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that receives a gradient.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, needs_grad: true });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, needs_grad: false });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.push(value, Op::MatMul(a, b), &[a, b])
    }

    pub fn propagate(&mut self, adj: &'g SparseMatrix, x: Var) -> Var {
        let value = adj.apply(self.value(x));
        self.push(value, Op::Propagate(adj, x), &[x])
    }

    /// `x` plus the 1 × cols row `bias` broadcast over rows.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Var {
        let b = self.value(bias);
        assert_eq!(b.shape(), (1, self.value(x).cols()), "bias shape");
        let mut value = self.value(x).clone();
        for i in 0..value.rows() {
            for (o, bb) in value.row_mut(i).iter_mut().zip(b.as_slice()) {
                *o += bb;
            }
        }
        self.push(value, Op::AddBias(x, bias), &[x, bias])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        self.push(value, Op::Add(a, b), &[a, b])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.max(0.0));
        self.push(value, Op::Relu(x), &[x])
    }

    pub fn elu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| if v > 0.0 { v } else { v.exp_m1() });
        self.push(value, Op::Elu(x), &[x])
    }

    /// Row-wise layer normalisation with affine 1 × cols `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let input = self.value(x);
        let (rows, cols) = input.shape();
        let mut normed = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for i in 0..rows {
            let r = input.row(i);
            let mean = r.iter().sum::<f64>() / cols as f64;
            let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let s = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(s);
            for (o, v) in normed.row_mut(i).iter_mut().zip(r) {
                *o = (v - mean) * s;
            }
        }
        let (g, b) = (self.value(gamma), self.value(beta));
        let mut value = normed.clone();
        for i in 0..rows {
            for ((o, gg), bb) in value.row_mut(i).iter_mut().zip(g.as_slice()).zip(b.as_slice()) {
                *o = *o * gg + bb;
            }
        }
        self.push(value, Op::LayerNorm { x, gamma, beta, normed, inv_std }, &[x, gamma, beta])
    }

    /// Attention aggregation: `e_ij = LeakyReLU(src_i + dst_j)` over the
    /// neighbours `j` of `i`, `α_i = softmax(e_i)`, `out_i = Σ_j α_ij wh_j`.
    /// `src` and `dst` are n × 1 score columns.
    pub fn attention(&mut self, graph: &'g NeighborLists, wh: Var, src: Var, dst: Var, slope: f64) -> Var {
        let (h, s, d) = (self.value(wh), self.value(src), self.value(dst));
        let n = h.rows();
        assert_eq!(graph.len(), n, "attention graph size");
        let mut pre = vec![0.0; graph.edge_count()];
        let mut alpha = vec![0.0; graph.edge_count()];
        let mut value = Matrix::zeros(n, h.cols());
        for i in 0..n {
            let slots = graph.slots(i);
            let mut max = f64::NEG_INFINITY;
            for k in slots.clone() {
                let e = s.as_slice()[i] + d.as_slice()[graph.target(k)];
                pre[k] = e;
                let act = if e > 0.0 { e } else { slope * e };
                alpha[k] = act;
                max = max.max(act);
            }
            let mut total = 0.0;
            for k in slots.clone() {
                alpha[k] = (alpha[k] - max).exp();
                total += alpha[k];
            }
            for k in slots {
                alpha[k] /= total;
                let j = graph.target(k);
                let a = alpha[k];
                for (o, v) in value.row_mut(i).iter_mut().zip(h.row(j)) {
                    *o += a * v;
                }
            }
        }
        self.push(value, Op::Attention { graph, wh, src, dst, slope, pre, alpha }, &[wh, src, dst])
    }

    /// Attention coefficients of an attention node, one per neighbour slot.
    pub fn attention_coefficients(&self, v: Var) -> Option<&[f64]> {
        match &self.nodes[v.0].op {
            Op::Attention { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut value = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for p in parts {
            let m = self.value(*p);
            assert_eq!(m.rows(), rows, "concat rows");
            for i in 0..rows {
                value.row_mut(i)[offset..offset + m.cols()].copy_from_slice(m.row(i));
            }
            offset += m.cols();
        }
        self.push(value, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn mean(&mut self, parts: &[Var]) -> Var {
        let mut value = self.value(parts[0]).clone();
        for p in &parts[1..] {
            value.add_assign(self.value(*p));
        }
        value.scale(1.0 / parts.len() as f64);
        self.push(value, Op::Mean(parts.to_vec()), parts)
    }

    pub fn select_row(&mut self, x: Var, row: usize) -> Var {
        let value = Matrix::row_vector(self.value(x).row(row));
        self.push(value, Op::SelectRow(x, row), &[x])
    }

    pub fn mean_rows(&mut self, x: Var) -> Var {
        let m = self.value(x);
        let mut value = Matrix::zeros(1, m.cols());
        for i in 0..m.rows() {
            for (o, v) in value.as_mut_slice().iter_mut().zip(m.row(i)) {
                *o += v;
            }
        }
        value.scale(1.0 / m.rows() as f64);
        self.push(value, Op::MeanRows(x), &[x])
    }

    /// Softmax of an n × 1 column restricted to `mask`; other rows are 0.
    pub fn masked_softmax(&mut self, mask: &'g [bool], logits: Var) -> Var {
        let l = self.value(logits);
        assert_eq!(l.shape(), (mask.len(), 1), "logit shape");
        let max = l
            .as_slice()
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut value = Matrix::zeros(mask.len(), 1);
        let mut total = 0.0;
        for (i, (&v, &m)) in l.as_slice().iter().zip(mask).enumerate() {
            if m {
                let e = (v - max).exp();
                value.as_mut_slice()[i] = e;
                total += e;
            }
        }
        if total > 0.0 {
            value.scale(1.0 / total.max(NORM_EPS));
        }
        self.push(value, Op::MaskedSoftmax(mask, logits), &[logits])
    }

    /// Zero out rows outside `mask`.
    pub fn mask_rows(&mut self, mask: &'g [bool], x: Var) -> Var {
        let mut value = self.value(x).clone();
        for (i, &m) in mask.iter().enumerate() {
            if !m {
                value.row_mut(i).fill(0.0);
            }
        }
        self.push(value, Op::MaskRows(mask, x), &[x])
    }

    /// `weightsᵀ · values`: an n × 1 column against an n × d matrix, giving 1 × d.
    pub fn weighted_sum(&mut self, weights: Var, values: Var) -> Var {
        let value = self.value(weights).t_matmul(self.value(values));
        self.push(value, Op::WeightedSum { weights, values }, &[weights, values])
    }

    /// `1 − cos(pred, target)` as a 1 × 1 node.
    pub fn cosine_loss(&mut self, pred: Var, target: &'g [f64]) -> Var {
        let p = self.value(pred).as_slice();
        let loss = 1.0 - dot(p, target) / (norm(p) * norm(target)).max(NORM_EPS);
        self.push(Matrix::filled(1, 1, loss), Op::CosineLoss { pred, target }, &[pred])
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.value(output).shape(), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Matrix::filled(1, 1, 1.0));
        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backprop(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn backprop(&self, node: &Node<'g>, g: &Matrix, grads: &mut [Option<Matrix>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], g.matmul_t(self.value(*b)));
                }
                if self.wants(*b) {
                    accumulate(&mut grads[b.0], self.value(*a).t_matmul(g));
                }
            }
            Op::Propagate(adj, x) => accumulate(&mut grads[x.0], adj.apply_transpose(g)),
            Op::AddBias(x, b) => {
                if self.wants(*x) {
                    accumulate(&mut grads[x.0], g.clone());
                }
                if self.wants(*b) {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, v) in gb.as_mut_slice().iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads[b.0], gb);
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if self.wants(*v) {
                        accumulate(&mut grads[v.0], g.clone());
                    }
                }
            }
            Op::Relu(x) => {
                let input = self.value(*x);
                let mut gx = g.clone();
                for (o, v) in gx.as_mut_slice().iter_mut().zip(input.as_slice()) {
                    if *v <= 0.0 {
                        *o = 0.0;
                    }
                }
                accumulate(&mut grads[x.0], gx);
            }
            Op::Elu(x) => {
                let input = self.value(*x);
                let mut gx = g.clone();
                for ((o, v), y) in gx.as_mut_slice().iter_mut().zip(input.as_slice()).zip(node.value.as_slice()) {
                    if *v <= 0.0 {
                        *o *= y + 1.0;
                    }
                }
                accumulate(&mut grads[x.0], gx);
            }
            Op::LayerNorm { x, gamma, beta, normed, inv_std } => {
                let (rows, cols) = g.shape();
                if self.wants(*gamma) || self.wants(*beta) {
                    let mut gg = Matrix::zeros(1, cols);
                    let mut gb = Matrix::zeros(1, cols);
                    for i in 0..rows {
                        for j in 0..cols {
                            gg.as_mut_slice()[j] += g[(i, j)] * normed[(i, j)];
                            gb.as_mut_slice()[j] += g[(i, j)];
                        }
                    }
                    if self.wants(*gamma) {
                        accumulate(&mut grads[gamma.0], gg);
                    }
                    if self.wants(*beta) {
                        accumulate(&mut grads[beta.0], gb);
                    }
                }
                if self.wants(*x) {
                    let gamma_v = self.value(*gamma).as_slice();
                    let mut gx = Matrix::zeros(rows, cols);
                    for i in 0..rows {
                        let gh: Vec<f64> = g.row(i).iter().zip(gamma_v).map(|(a, b)| a * b).collect();
                        let mean_gh = gh.iter().sum::<f64>() / cols as f64;
                        let mean_gh_h = dot(&gh, normed.row(i)) / cols as f64;
                        for j in 0..cols {
                            gx[(i, j)] = inv_std[i] * (gh[j] - mean_gh - normed[(i, j)] * mean_gh_h);
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
            }
            Op::Attention { graph, wh, src, dst, slope, pre, alpha } => {
                let h = self.value(*wh);
                let n = h.rows();
                let mut g_wh = Matrix::zeros(n, h.cols());
                let mut g_src = Matrix::zeros(n, 1);
                let mut g_dst = Matrix::zeros(n, 1);
                for i in 0..n {
                    let slots = graph.slots(i);
                    let g_i = g.row(i);
                    let d_alpha: Vec<f64> = slots.clone().map(|k| dot(g_i, h.row(graph.target(k)))).collect();
                    let weighted: f64 = slots.clone().zip(&d_alpha).map(|(k, d)| alpha[k] * d).sum();
                    for (k, d) in slots.zip(&d_alpha) {
                        let j = graph.target(k);
                        let a = alpha[k];
                        for (o, v) in g_wh.row_mut(j).iter_mut().zip(g_i) {
                            *o += a * v;
                        }
                        let de = a * (d - weighted);
                        let dpre = if pre[k] > 0.0 { de } else { slope * de };
                        g_src.as_mut_slice()[i] += dpre;
                        g_dst.as_mut_slice()[j] += dpre;
                    }
                }
                for (v, gv) in [(wh, g_wh), (src, g_src), (dst, g_dst)] {
                    if self.wants(*v) {
                        accumulate(&mut grads[v.0], gv);
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let cols = self.value(*p).cols();
                    if self.wants(*p) {
                        let mut gp = Matrix::zeros(g.rows(), cols);
                        for i in 0..g.rows() {
                            gp.row_mut(i).copy_from_slice(&g.row(i)[offset..offset + cols]);
                        }
                        accumulate(&mut grads[p.0], gp);
                    }
                    offset += cols;
                }
            }
            Op::Mean(parts) => {
                let mut share = g.clone();
                share.scale(1.0 / parts.len() as f64);
                for p in parts {
                    if self.wants(*p) {
                        accumulate(&mut grads[p.0], share.clone());
                    }
                }
            }
            Op::SelectRow(x, row) => {
                let (rows, cols) = self.value(*x).shape();
                let mut gx = Matrix::zeros(rows, cols);
                gx.row_mut(*row).copy_from_slice(g.as_slice());
                accumulate(&mut grads[x.0], gx);
            }
            Op::MeanRows(x) => {
                let (rows, cols) = self.value(*x).shape();
                let mut gx = Matrix::zeros(rows, cols);
                for i in 0..rows {
                    for (o, v) in gx.row_mut(i).iter_mut().zip(g.as_slice()) {
                        *o = v / rows as f64;
                    }
                }
                accumulate(&mut grads[x.0], gx);
            }
            Op::MaskedSoftmax(mask, logits) => {
                let w = node.value.as_slice();
                let weighted: f64 = w.iter().zip(g.as_slice()).map(|(a, b)| a * b).sum();
                let mut gl = Matrix::zeros(mask.len(), 1);
                for (i, &m) in mask.iter().enumerate() {
                    if m {
                        gl.as_mut_slice()[i] = w[i] * (g.as_slice()[i] - weighted);
                    }
                }
                accumulate(&mut grads[logits.0], gl);
            }
            Op::MaskRows(mask, x) => {
                let mut gx = g.clone();
                for (i, &m) in mask.iter().enumerate() {
                    if !m {
                        gx.row_mut(i).fill(0.0);
                    }
                }
                accumulate(&mut grads[x.0], gx);
            }
            Op::WeightedSum { weights, values } => {
                if self.wants(*weights) {
                    accumulate(&mut grads[weights.0], self.value(*values).matmul_t(g));
                }
                if self.wants(*values) {
                    accumulate(&mut grads[values.0], self.value(*weights).matmul(g));
                }
            }
            Op::CosineLoss { pred, target } => {
                let p = self.value(*pred).as_slice();
                let (np, nt) = (norm(p), norm(target));
                let denom = (np * nt).max(NORM_EPS);
                let cos = dot(p, target) / denom;
                let scale = g.as_slice()[0];
                let gp: Vec<f64> = p
                    .iter()
                    .zip(target.iter())
                    .map(|(pi, ti)| -scale * (ti / denom - cos * pi / (np * np).max(NORM_EPS)))
                    .collect();
                accumulate(&mut grads[pred.0], Matrix::from_vec(1, gp.len(), gp));
            }
        }
    }
}
