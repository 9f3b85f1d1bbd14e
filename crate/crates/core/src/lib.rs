//! Graph networks over scene graphs for multiple-choice visual question
//! answering.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`] and [`nn`]: dense `f64` tensors, reverse-mode gradients,
//!   the FC/BN/ReLU/dropout/FC updating MLP and Adam.
//! - [`scene_graph`]: the symbolic graph model and its JSON format.
//! - [`encoder`]: word-vector features for nodes, edges and the global vector.
//! - [`gn`]: the graph-network block (edge, node, global updates) and stacks.
//! - [`heads`]: unfactorized and factorized answer scorers.
//! - [`trainer`]: binary-classification training and multiple-choice evaluation.
//! - [`synth`]: synthetic scene-graph QA corpora with traversal oracles.
//! - [`explain`]: norm-based salience filtering and DOT export.
//! - [`cli`]: the `gnqa` command line.

pub mod cli;
pub mod dataset;
pub mod encoder;
pub mod error;
pub mod explain;
pub mod gn;
pub mod heads;
pub mod nn;
pub mod scene_graph;
pub mod synth;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};

/// The one random source used everywhere; seeded for reproducibility.
pub type Rng = rand_chacha::ChaCha8Rng;
