//! Knowledge-graph link prediction with quaternion- and octonion-valued
//! embeddings: QMult, OMult, ConvQ, and ConvO scoring, KvsAll training, and
//! filtered-ranking evaluation with ensembling.

pub mod algebra;
pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod nn;
pub mod reference;
pub mod synthetic;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
