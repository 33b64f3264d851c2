//! Robust data pruning by geometric median matching.
//!
//! Select a `k`-subset of embedding vectors whose mean tracks the geometric
//! median of the whole (possibly adversarially corrupted) dataset, plus the
//! baselines, corruption injectors and metrics used to evaluate it.

pub mod corruption;
pub mod data;
pub mod error;
pub mod gm;
pub mod io;
pub mod metrics;
mod par;
pub mod rng;
pub mod select;
pub mod vecops;

pub use data::{EmbeddingSet, Flag};
pub use error::{Error, Result};
pub use gm::{geometric_median, GmConfig, GmInit, GmResult};
pub use rng::Rng;
pub use select::{select, Method, Replacement, SelectionResult, SelectorConfig, ThetaInit};
