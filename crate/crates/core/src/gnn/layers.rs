//! Graph layers. The `*_on_tape` builders are what the models use; the
//! eager wrappers evaluate a single layer on plain matrices.

use super::adjacency::{NeighborLists, SparseMatrix};
use super::tape::{Tape, Var};
use crate::error::{Result, WiceError};
use crate::linalg::Matrix;

/// Negative slope of the LeakyReLU inside attention scores.
pub const ATTENTION_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Elu,
}

fn activate(tape: &mut Tape<'_>, x: Var, act: Activation) -> Var {
    match act {
        Activation::Identity => x,
        Activation::Relu => tape.relu(x),
        Activation::Elu => tape.elu(x),
    }
}

fn check(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(WiceError::DimensionMismatch { expected, found })
    }
}

/// `act(Â H W + b)`.
pub fn gcn_on_tape<'g>(tape: &mut Tape<'g>, adj: &'g SparseMatrix, h: Var, w: Var, b: Var, act: Activation) -> Var {
    let hw = tape.matmul(h, w);
    let agg = tape.propagate(adj, hw);
    let out = tape.add_bias(agg, b);
    activate(tape, out, act)
}

pub fn gcn_layer(h: &Matrix, adj: &SparseMatrix, w: &Matrix, b: &Matrix, act: Activation) -> Result<Matrix> {
    check(adj.size(), h.rows())?;
    check(h.cols(), w.rows())?;
    check(w.cols(), b.cols())?;
    check(1, b.rows())?;
    let mut tape = Tape::new();
    let (h, w, b) = (tape.constant(h.clone()), tape.constant(w.clone()), tape.constant(b.clone()));
    let out = gcn_on_tape(&mut tape, adj, h, w, b, act);
    Ok(tape.value(out).clone())
}

/// Parameters of one attention head: projection `w` (in × out) and the
/// two halves of the attention vector (out × 1 each).
#[derive(Debug, Clone, PartialEq)]
pub struct GatHead {
    pub w: Matrix,
    pub a_src: Matrix,
    pub a_dst: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadCombine {
    Concat,
    Mean,
}

/// Tape handles of one head.
#[derive(Debug, Clone, Copy)]
pub struct GatHeadVars {
    pub w: Var,
    pub a_src: Var,
    pub a_dst: Var,
}

/// Multi-head attention layer. Returns the output and each head's
/// attention node (see [`Tape::attention_coefficients`]).
pub fn gat_on_tape<'g>(
    tape: &mut Tape<'g>,
    graph: &'g NeighborLists,
    h: Var,
    heads: &[GatHeadVars],
    bias: Var,
    combine: HeadCombine,
    act: Activation,
) -> (Var, Vec<Var>) {
    let mut outs = Vec::with_capacity(heads.len());
    for head in heads {
        let wh = tape.matmul(h, head.w);
        let src = tape.matmul(wh, head.a_src);
        let dst = tape.matmul(wh, head.a_dst);
        outs.push(tape.attention(graph, wh, src, dst, ATTENTION_SLOPE));
    }
    let combined = match combine {
        HeadCombine::Concat => tape.concat_cols(&outs),
        HeadCombine::Mean => tape.mean(&outs),
    };
    let out = tape.add_bias(combined, bias);
    (activate(tape, out, act), outs)
}

/// Eager attention layer: output plus per-head coefficients, indexed like
/// the neighbour slots of `graph`.
pub fn gat_layer(
    h: &Matrix,
    graph: &NeighborLists,
    heads: &[GatHead],
    bias: &Matrix,
    combine: HeadCombine,
    act: Activation,
) -> Result<(Matrix, Vec<Vec<f64>>)> {
    check(graph.len(), h.rows())?;
    for head in heads {
        check(h.cols(), head.w.rows())?;
        check(head.w.cols(), head.a_src.rows())?;
        check(head.w.cols(), head.a_dst.rows())?;
    }
    let out_width = match combine {
        HeadCombine::Concat => heads.iter().map(|hd| hd.w.cols()).sum(),
        HeadCombine::Mean => heads.first().map_or(0, |hd| hd.w.cols()),
    };
    check(out_width, bias.cols())?;
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone());
    let vars: Vec<GatHeadVars> = heads
        .iter()
        .map(|hd| GatHeadVars {
            w: tape.constant(hd.w.clone()),
            a_src: tape.constant(hd.a_src.clone()),
            a_dst: tape.constant(hd.a_dst.clone()),
        })
        .collect();
    let b = tape.constant(bias.clone());
    let (out, att) = gat_on_tape(&mut tape, graph, hv, &vars, b, combine, act);
    let alphas = att.iter().map(|a| tape.attention_coefficients(*a).unwrap_or(&[]).to_vec()).collect();
    Ok((tape.value(out).clone(), alphas))
}

/// Residual block parameters: layer-norm affine terms and a GCN layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DgcnBlock {
    pub gamma: Matrix,
    pub beta: Matrix,
    pub w: Matrix,
    pub b: Matrix,
}

#[derive(Debug, Clone, Copy)]
pub struct DgcnBlockVars {
    pub gamma: Var,
    pub beta: Var,
    pub w: Var,
    pub b: Var,
}

/// `H + Â · ReLU(LayerNorm(H)) · W + b`.
pub fn dgcn_on_tape<'g>(tape: &mut Tape<'g>, adj: &'g SparseMatrix, h: Var, p: DgcnBlockVars) -> Var {
    let normed = tape.layer_norm(h, p.gamma, p.beta);
    let act = tape.relu(normed);
    let f = gcn_on_tape(tape, adj, act, p.w, p.b, Activation::Identity);
    tape.add(h, f)
}

pub fn dgcn_block(h: &Matrix, adj: &SparseMatrix, params: &DgcnBlock) -> Result<Matrix> {
    check(adj.size(), h.rows())?;
    check(h.cols(), params.w.rows())?;
    check(h.cols(), params.w.cols())?;
    check(h.cols(), params.gamma.cols())?;
    check(h.cols(), params.beta.cols())?;
    check(h.cols(), params.b.cols())?;
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone());
    let p = DgcnBlockVars {
        gamma: tape.constant(params.gamma.clone()),
        beta: tape.constant(params.beta.clone()),
        w: tape.constant(params.w.clone()),
        b: tape.constant(params.b.clone()),
    };
    let out = dgcn_on_tape(&mut tape, adj, hv, p);
    Ok(tape.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::adjacency::normalized_adjacency_from_edges;

    #[test]
    fn identity_gcn_layer() {
        let adj = normalized_adjacency_from_edges(1, &[]);
        let h = Matrix::from_rows(&[vec![1.5, -2.0, 0.25]]);
        let out = gcn_layer(&h, &adj, &Matrix::identity(3), &Matrix::zeros(1, 3), Activation::Identity).unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn zero_input_gives_bias() {
        let adj = normalized_adjacency_from_edges(3, &[(0, 1), (1, 2)]);
        let w = Matrix::filled(2, 2, 0.7);
        let b = Matrix::from_rows(&[vec![-1.0, 2.0]]);
        let out = gcn_layer(&Matrix::zeros(3, 2), &adj, &w, &b, Activation::Relu).unwrap();
        for i in 0..3 {
            assert_eq!(out.row(i), &[0.0, 2.0]);
        }
    }

    #[test]
    fn gcn_shape_errors() {
        let adj = normalized_adjacency_from_edges(2, &[(0, 1)]);
        let err = gcn_layer(&Matrix::zeros(2, 3), &adj, &Matrix::zeros(4, 2), &Matrix::zeros(1, 2), Activation::Relu);
        assert!(matches!(err, Err(WiceError::DimensionMismatch { expected: 3, found: 4 })));
    }

    #[test]
    fn isolated_node_attends_to_itself() {
        let g = NeighborLists::with_self_loops(1, &[]);
        let head = GatHead {
            w: Matrix::identity(2),
            a_src: Matrix::from_rows(&[vec![0.3], vec![-0.1]]),
            a_dst: Matrix::from_rows(&[vec![0.2], vec![0.5]]),
        };
        let h = Matrix::from_rows(&[vec![1.0, 2.0]]);
        let (out, alpha) =
            gat_layer(&h, &g, &[head], &Matrix::zeros(1, 2), HeadCombine::Mean, Activation::Identity).unwrap();
        assert_eq!(alpha[0], vec![1.0]);
        assert_eq!(out, h);
    }

    #[test]
    fn zero_block_is_identity() {
        let adj = normalized_adjacency_from_edges(3, &[(0, 1), (0, 2)]);
        let h = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.0], vec![3.0, 1.0]]);
        let zero = DgcnBlock {
            gamma: Matrix::zeros(1, 2),
            beta: Matrix::zeros(1, 2),
            w: Matrix::zeros(2, 2),
            b: Matrix::zeros(1, 2),
        };
        let mut x = h.clone();
        for _ in 0..4 {
            x = dgcn_block(&x, &adj, &zero).unwrap();
        }
        assert_eq!(x, h);
    }
}
