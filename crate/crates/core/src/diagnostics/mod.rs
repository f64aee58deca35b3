//! Gradient-alignment metrics, loss-identity checks, graph-evolution
//! counts and per-epoch traces.

mod alignment;
mod evolution;
mod theory;
mod trace;

pub use alignment::{
    clustering_theta_grad, filter_impact, lambda_fd, lambda_fr, lambda_fr_with_targets,
    lambda_prime_fd, lambda_prime_fr, pointwise_alignment, recon_theta_grad, ClusteringObjective,
};
pub use evolution::{cumulative_difference, graph_evolution_stats, EvolutionStats};
pub use theory::{
    decomposition_residuals, gradient_suite, identity_suite, GradientCheck, Residuals, SuiteReport,
};
pub use trace::{DiagnosticTrace, EpochRecord, TraceSummary, CSV_HEADER};
