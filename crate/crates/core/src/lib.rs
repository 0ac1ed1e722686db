//! Web image context extraction straight from HTML.
//!
//! A page is parsed into a DOM graph whose nodes carry tag-type and
//! sentence-embedding features. A graph network is trained to regress the
//! embedding of the main image's reference text (alt text, caption or
//! title) as a weighted average of the text-node embeddings; at inference
//! time the text node with the largest weight is the image's context.
//!
//! Modules follow the pipeline order:
//!
//! * [`dom_graph`]: parsing, pruning, main image and reference selection.
//! * [`featurize`]: sentence vectors and node feature rows.
//! * [`gnn`]: layers, models, loss, gradients, optimisers, checkpoints.
//! * [`training`]: dataset splits and the training loop.
//! * [`eval`]: context extraction, baselines and metrics.
//! * [`synth`]: synthetic news-like corpora with planted ground truth.

pub mod dom_graph;
pub mod error;
pub mod eval;
pub mod featurize;
pub mod gnn;
pub mod linalg;
pub mod synth;
pub mod training;

pub use error::{Result, WiceError};
