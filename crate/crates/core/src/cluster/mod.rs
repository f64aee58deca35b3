//! K-means, soft assignments, Hungarian matching and external metrics.

mod assign;
mod hungarian;
mod kmeans;
mod metrics;

pub use assign::{
    argmax, gaussian_soft_assign, hard_target, student_t_assign, AssignmentKind, SoftAssignment,
};
pub use hungarian::{hungarian_map, map_truth_to_pred, max_weight_assignment};
pub use kmeans::{kmeans, kmeans_with, ClusterModel, KMeansOptions, KMeansResult, VARIANCE_FLOOR};
pub use metrics::{build_cluster_graph, cluster_sizes, evaluate_clustering, ClusteringScores};
