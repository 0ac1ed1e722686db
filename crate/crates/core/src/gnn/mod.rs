//! Graph neural networks over DOM graphs.

pub mod adjacency;
pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod model;
pub mod optim;
pub mod tape;

pub use adjacency::{normalized_adjacency, normalized_adjacency_from_edges, NeighborLists, SparseMatrix};
pub use checkpoint::Checkpoint;
pub use layers::{dgcn_block, gat_layer, gcn_layer, Activation, DgcnBlock, GatHead, HeadCombine};
pub use loss::cosine_loss;
pub use model::{
    loss_and_gradients, plain_forward, predict, wgcn_forward, Architecture, GraphSample, ModelConfig, ModelParams,
    NamedTensor, NodeWeights, Prediction, Readout, WeightMode,
};
pub use optim::{Optimizer, OptimizerKind};
