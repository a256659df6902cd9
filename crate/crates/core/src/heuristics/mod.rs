//! Assignment heuristics for placing components into ensemble instances:
//! exclusive selection, partitioning and clustering.

mod kmeans;
mod partition;
mod select;

pub use kmeans::{kmeans, KMeans};
pub use partition::partition;
pub use select::{
    exact_select, exclusive_select, select, Assignment, Candidate, CostFn, Demand, SelectStrategy,
    SelectionProblem,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HeuristicsError {
    #[error("k must satisfy 1 <= k <= n (k = {k}, n = {n})")]
    InvalidK { k: usize, n: usize },
    #[error("points have differing dimensions")]
    RaggedPoints,
    #[error("partitioning needs at least one instance")]
    NoInstances,
}
