//! Mixed-value index: symbol signatures route values to regex clusters.

mod generalize;
mod signature;
mod tree;

pub use generalize::generalize_pattern;
pub use signature::SymbolSignature;
pub use tree::{PatternLeaf, PatternTree, CLUSTER_SHARE_TENTHS, LEAF_PATTERN_CAP, SCORE_SAMPLE_VALUES};
