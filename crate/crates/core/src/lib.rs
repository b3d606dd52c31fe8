//! Spectral estimation and asymptotic inference for stochastic blockmodels
//! with discrete nodal covariates.
//!
//! The library reformulates a blockmodel with covariates as a generalized
//! random dot product graph on an expanded block set, and provides:
//!
//! * [`model`] — link functions, covariate laws, and expanded block-probability
//!   matrices θ_Z;
//! * [`spectral`] — adjacency spectral embedding with indefinite signature and
//!   profile-likelihood dimension selection;
//! * [`clustering`] — Gaussian mixture / k-means clustering and the adjusted
//!   Rand index;
//! * [`estimator`] — the end-to-end fit pipeline and homophily (β) estimators;
//! * [`inference`] — plug-in asymptotic bias/variance/covariance formulas and
//!   standard errors;
//! * [`simulate`] — network sampling and the Monte Carlo harness;
//! * [`graphio`] — edge-list and covariate ingestion, preprocessing;
//! * [`config`] — plain-text key-value configs for model specs and designs.

pub mod clustering;
pub mod config;
pub mod error;
pub mod estimator;
pub mod graphio;
pub mod inference;
pub mod model;
pub mod simulate;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
pub use estimator::{BetaEstimate, BlockFit, FitOptions, FitResult};
pub use graphio::Graph;
pub use inference::SbmMoments;
pub use model::{CovariateLaw, ExpandedSbm, Homophily, LinkFunction, SbmSpec};
pub use spectral::{EigenSelection, Embedding};
