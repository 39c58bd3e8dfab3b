//! Reference algorithms the estimators are compared against.

mod fista;
mod rd;

pub use fista::{
    fista, fista_oracle_lambda, fista_with_tolerance, lambda_grid, lasso_objective,
    lipschitz_constant, soft_threshold, FistaResult, FISTA_TOLERANCE,
};
pub use rd::{
    blahut_arimoto, discretized_laplace, ecsq_rd_point, empirical_entropy, laplace_entropy_bits,
    shannon_lower_bound, DiscreteSource, RDPoint, RdCurve, BA_TOLERANCE,
};
