//! Split-tree generation and path-length functionals.
//!
//! Two constructions are provided. [`grow_size_tree`] splits cardinalities
//! top-down (each node's children get a shifted multinomial share of its
//! items). [`build_incremental`] inserts items one at a time and redistributes
//! on overflow. Both yield the same law for the tree of cardinalities.

mod incremental;
pub mod params;
mod size;

pub use incremental::{build_incremental, construction_equivalence_sample, sample_insertion_depth, ItemTree};
pub use params::{SplitParams, SplitVectorDraw};
pub use size::{grow_size_tree, grow_tree_stats, split_cardinalities, NodeId, SizeTree, TreeStats};

pub(crate) use size::{walk, Sink};
