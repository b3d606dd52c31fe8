//! Shared helpers for the benchmark targets: canonical benchmark models.

use sbm_core::model::{CovariateLaw, Homophily, LinkFunction, SbmSpec};
use sbm_core::simulate::{sample_graph, SampledGraph};

/// Two-block model with one balanced covariate and logit homophily 1.5.
pub fn benchmark_spec() -> SbmSpec {
    SbmSpec {
        k: 2,
        pi: vec![0.5, 0.5],
        nu: vec![vec![-1.5], vec![1.0]],
        covariates: vec![CovariateLaw::BernoulliPerBlock(vec![0.5, 0.5])],
        beta: Homophily::PerCovariate(vec![1.5]),
        link: LinkFunction::Logit,
        rho: 1.0,
    }
}

/// Samples the benchmark model at the given size with a fixed seed.
pub fn benchmark_graph(n: usize) -> SampledGraph {
    sample_graph(&benchmark_spec(), n, 1234).expect("benchmark model is valid")
}
