//! Density-valued vector autoregression with latent factors.
//!
//! Per-unit densities are estimated as B-spline mixtures, mapped to Euclidean
//! coordinates by a shifted logit transform carrying an L2-isometric metric,
//! and modeled by a cross-unit VAR with interactive fixed effects. Directed
//! predictive edges are selected by one-sided t-tests under
//! Benjamini–Yekutieli FDR control.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod em;
pub mod error;
pub mod factor_var;
pub mod inference;
pub mod panel;
pub mod pipeline;
pub mod quadrature;
pub mod simplex;
pub mod simulation;
pub mod spline;
pub mod synthetic;

pub use clustering::{cluster_regions, RegionAssignment};
pub use em::{fit_map, fit_mle, log_likelihood, DirichletPrior, EmOptions, EmReport, WeightVector};
pub use error::{Error, Result};
pub use factor_var::{fit as fit_factor_var, FactorVarConfig, FactorVarFit};
pub use inference::{
    by_fdr, covariance, select_edges, CovarianceEstimate, DirectionConvention, Edge, EdgeNetwork,
    EdgeSelection, HypothesisFamily,
};
pub use panel::TransformedPanel;
pub use pipeline::{run_analysis, week_index, Observation, PipelineConfig, WeeklyWeights};
pub use simplex::{logit_delta, oplus, otimes, softmax_delta, MetricPack, TransformConfig};
pub use simulation::{
    generate, run_sweep, spectral_radius, DgpParams, GroundTruth, MetricsRow, SweepConfig,
};
pub use spline::SplineBasis;
