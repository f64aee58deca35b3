//! The reliable-node sampler and the clustering-oriented graph rewriter.

mod upsilon;
mod xi;

pub use upsilon::{
    build_supervised_target, compute_centroid_nodes, upsilon_transform, CentroidNodes, EdgeTag,
    SelfSupervisionGraph, UpsilonOptions,
};
pub use xi::{top_two, xi_select, xi_select_soft, ReliableSet};
