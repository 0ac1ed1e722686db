use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wice_core::gnn::{
    gat_layer, gcn_layer, normalized_adjacency_from_edges, plain_forward, wgcn_forward, Activation, Architecture,
    GatHead, GraphSample, HeadCombine, ModelConfig, ModelParams, NeighborLists,
};
use wice_core::linalg::Matrix;

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

#[test]
fn gcn_layer_matches_triple_loop_and_snapshot() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let h = uniform(&mut rng, 3, 4);
    let w = uniform(&mut rng, 4, 2);
    let b = uniform(&mut rng, 1, 2);
    let edges = [(0, 1), (1, 2)];
    let out = gcn_layer(&h, &normalized_adjacency_from_edges(3, &edges), &w, &b, Activation::Identity).unwrap();

    let deg = [2.0f64, 3.0, 2.0];
    let mut a = [[0.0f64; 3]; 3];
    for i in 0..3 {
        a[i][i] = 1.0;
    }
    for (i, j) in edges {
        a[i][j] = 1.0;
        a[j][i] = 1.0;
    }
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] /= (deg[i] * deg[j]).sqrt();
        }
    }
    let mut hw = [[0.0f64; 2]; 3];
    for i in 0..3 {
        for k in 0..2 {
            for m in 0..4 {
                hw[i][k] += h[(i, m)] * w[(m, k)];
            }
        }
    }
    for i in 0..3 {
        for k in 0..2 {
            let mut expected = b[(0, k)];
            for j in 0..3 {
                expected += a[i][j] * hw[j][k];
            }
            assert!((out[(i, k)] - expected).abs() < 1e-14);
        }
    }

    let snapshot = [
        [0.39086770927177494, 0.24320042967879751],
        [0.1569370486151651, 0.26910253987266003],
        [0.2631524270732204, 0.65244164301111],
    ];
    for i in 0..3 {
        for k in 0..2 {
            assert!((out[(i, k)] - snapshot[i][k]).abs() < 1e-12, "{:?}", out);
        }
    }
}

#[test]
fn gat_two_nodes_by_hand() {
    let head = GatHead {
        w: Matrix::from_rows(&[vec![1.0]]),
        a_src: Matrix::from_rows(&[vec![0.5]]),
        a_dst: Matrix::from_rows(&[vec![1.0]]),
    };
    let h = Matrix::from_rows(&[vec![1.0], vec![-2.0]]);
    let g = NeighborLists::with_self_loops(2, &[(0, 1)]);
    let (out, alpha) =
        gat_layer(&h, &g, &[head], &Matrix::zeros(1, 1), HeadCombine::Mean, Activation::Identity).unwrap();
    // Node 0: e00 = 0.5 + 1 = 1.5, e01 = LeakyReLU(0.5 - 2) = -0.3.
    // Node 1: e10 = LeakyReLU(-1 + 1) = 0, e11 = LeakyReLU(-1 - 2) = -0.6.
    let a00 = 1.0 / (1.0 + (-1.8f64).exp());
    let a10 = 1.0 / (1.0 + (-0.6f64).exp());
    let expected_alpha = [a00, 1.0 - a00, a10, 1.0 - a10];
    for (a, e) in alpha[0].iter().zip(expected_alpha) {
        assert!((a - e).abs() < 1e-15);
    }
    assert!((out[(0, 0)] - (a00 - 2.0 * (1.0 - a00))).abs() < 1e-15);
    assert!((out[(1, 0)] - (a10 - 2.0 * (1.0 - a10))).abs() < 1e-15);
    assert!((a00 - 0.8581489350995123).abs() < 1e-15);
    assert!((a10 - 0.6456563062257954).abs() < 1e-15);
}

fn random_sample(rng: &mut ChaCha8Rng, n: usize, dim: usize, input: usize) -> (GraphSample, Vec<(usize, usize)>) {
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    let image = rng.gen_range(0..n);
    let mut text_mask: Vec<bool> = (0..n).map(|i| i != image && rng.gen_bool(0.6)).collect();
    if !text_mask.iter().any(|m| *m) {
        text_mask[(image + 1) % n] = true;
    }
    let features = uniform(rng, n, input);
    let mut text_embeddings = uniform(rng, n, dim);
    for i in 0..n {
        if !text_mask[i] {
            text_embeddings.row_mut(i).fill(0.0);
        }
    }
    let sample = GraphSample {
        page_id: "p".into(),
        site_id: "s".into(),
        features,
        adjacency: normalized_adjacency_from_edges(n, &edges),
        neighbors: NeighborLists::with_self_loops(n, &edges),
        text_mask,
        text_embeddings,
        image,
        target: Some((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()),
    };
    (sample, edges)
}

fn permute(sample: &GraphSample, edges: &[(usize, usize)], perm: &[usize]) -> GraphSample {
    // perm[old] = new
    let n = perm.len();
    let moved: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
    let mut features = Matrix::zeros(n, sample.features.cols());
    let mut text_embeddings = Matrix::zeros(n, sample.text_embeddings.cols());
    let mut text_mask = vec![false; n];
    for old in 0..n {
        features.row_mut(perm[old]).copy_from_slice(sample.features.row(old));
        text_embeddings.row_mut(perm[old]).copy_from_slice(sample.text_embeddings.row(old));
        text_mask[perm[old]] = sample.text_mask[old];
    }
    GraphSample {
        page_id: sample.page_id.clone(),
        site_id: sample.site_id.clone(),
        features,
        adjacency: normalized_adjacency_from_edges(n, &moved),
        neighbors: NeighborLists::with_self_loops(n, &moved),
        text_mask,
        text_embeddings,
        image: perm[sample.image],
        target: sample.target.clone(),
    }
}

fn small(arch: Architecture, dim: usize, seed: u64) -> ModelParams {
    let mut c = ModelConfig::new(arch, dim, seed);
    if arch != Architecture::Dgcn {
        c.hidden = vec![8, 4];
    }
    c.heads = 2;
    c.width = 6;
    ModelParams::init(c).unwrap()
}

#[test]
fn equal_logits_give_uniform_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dim = 4;
    let mut params = small(Architecture::Wgcn, dim, 0);
    let last = params.tensors.len() - 2;
    params.tensors[last].value.scale(0.0);
    let (sample, _) = random_sample(&mut rng, 9, dim, params.config.input_dim());
    let w = wgcn_forward(&params, &sample).unwrap().weights.unwrap();
    let k = sample.text_mask.iter().filter(|m| **m).count() as f64;
    for (v, m) in w.values.iter().zip(&sample.text_mask) {
        assert_eq!(*v, if *m { 1.0 / k } else { 0.0 });
    }
}

#[test]
fn plain_models_see_far_nodes() {
    // Path graph with the image at one end; the embedding of the far end
    // reaches the image node once the receptive field covers the path.
    let dim = 4;
    let n = 3;
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    for arch in [Architecture::Gcn, Architecture::Gat, Architecture::Dgcn] {
        let params = small(arch, dim, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let input = params.config.input_dim();
        let sample = GraphSample {
            page_id: "p".into(),
            site_id: "s".into(),
            features: uniform(&mut rng, n, input),
            adjacency: normalized_adjacency_from_edges(n, &edges),
            neighbors: NeighborLists::with_self_loops(n, &edges),
            text_mask: vec![false, true, true],
            text_embeddings: uniform(&mut rng, n, dim),
            image: 0,
            target: Some(vec![1.0; dim]),
        };
        let before = plain_forward(&params, &sample).unwrap().z_hat;
        let mut changed = sample.clone();
        let emb_start = input - 1 - dim;
        changed.features.row_mut(n - 1)[emb_start] += 0.5;
        let after = plain_forward(&params, &changed).unwrap().z_hat;
        let diff: f64 = before.iter().zip(&after).map(|(a, b)| (a - b).abs()).sum();
        assert!(diff > 1e-9, "{arch}: {diff:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shifting_logits_keeps_weights(seed in 0u64..1000, shift in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 4;
        let params = small(Architecture::Wgcn, dim, seed);
        let (sample, _) = random_sample(&mut rng, 3 + (seed % 9) as usize, dim, params.config.input_dim());
        let mut shifted = params.clone();
        let last_bias = shifted.tensors.len() - 1;
        shifted.tensors[last_bias].value.as_mut_slice()[0] += shift;
        let a = wgcn_forward(&params, &sample).unwrap().weights.unwrap();
        let b = wgcn_forward(&shifted, &sample).unwrap().weights.unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn relabelling_nodes_permutes_weights(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 4;
        let n = 2 + (seed % 11) as usize;
        for arch in Architecture::ALL {
            let params = small(arch, dim, seed);
            let (sample, edges) = random_sample(&mut rng, n, dim, params.config.input_dim());
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let moved = permute(&sample, &edges, &perm);
            let a = wice_core::gnn::predict(&params, &sample).unwrap();
            let b = wice_core::gnn::predict(&params, &moved).unwrap();
            for (x, y) in a.z_hat.iter().zip(&b.z_hat) {
                prop_assert!((x - y).abs() < 1e-10, "{}", arch);
            }
            prop_assert!((a.loss.unwrap() - b.loss.unwrap()).abs() < 1e-10);
            if let (Some(wa), Some(wb)) = (a.weights, b.weights) {
                for old in 0..n {
                    prop_assert!((wa.values[old] - wb.values[perm[old]]).abs() < 1e-12);
                }
            }
            if let (Some(aa), Some(ab)) = (a.attention, b.attention) {
                for old in 0..n {
                    prop_assert!((aa[old] - ab[perm[old]]).abs() < 1e-12);
                }
            }
        }
    }
}
