//! Density estimation on Voronoi cells, with classical baselines and a
//! benchmark harness.
pub mod error;

mod baselines;
mod beta;
pub mod config;
mod data;
mod estimator;
mod geometry;
mod kernel;
mod metrics;
mod quad;
pub mod seeding;
mod special;
pub mod sweep;

pub use baselines::{alpha_from_bandwidth, AdaKdeModel, CvdeModel, KdeModel};
pub use beta::{
    asymptotic_beta, newton_beta_update, solve_beta, zero_crossing_length, BetaTable,
};
pub use data::{
    generate, load_csv, min_max_normalize, points_to_csv, sample_rows, subsample_split,
    true_log_density, Family, LabeledSample, SyntheticSpec,
};
pub use error::{Error, Result};
pub use estimator::{select_alpha, DensityModel, ModeSet, RvdeModel, DEFAULT_TABLE_GRID};
pub use geometry::{gabriel_graph, GabrielEdge, GabrielGraph, PointSet};
pub use kernel::{unit_sphere_area, Kernel};
pub use metrics::{evaluate_hellinger, evaluate_loglik, LoglikSummary};
pub use seeding::derive_seed;
