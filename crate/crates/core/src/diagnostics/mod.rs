//! Distances between distributions, degeneracy measures, exact oracles, a
//! quadrature reference posterior and closed-form efficiency formulas.

mod ecdf;
mod oracle;
mod reference;
mod theory;

pub use ecdf::{ks_statistic, w1_distance, w1_distance_with, CdfEvaluator, DistCdf, DistanceGrid, Ecdf};
pub use oracle::{
    brute_force_oracle, oracle_mixture, oracle_product_target, MixtureOracleEstimator, OracleEstimator, OracleReport,
    DEFAULT_ORACLE_CAP,
};
pub use reference::{reference_theta_posterior, GridSpec, ReferencePosterior};
pub use theory::{
    efficiency_frontier, efficiency_frontier_large_k, frontier_sides, iid_frontier_log_sides, iid_product_variances,
    theory_ratio, TheoryRatio,
};

use crate::importance::WeightedParticles;

/// Sum of the `p` largest normalized weights; 1 when `p` covers every atom.
pub fn top_mass(particles: &WeightedParticles, p: usize) -> f64 {
    particles.top_mass(p)
}
