//! JSON report assembly. Timing fields live in a dedicated `timings` section
//! so deterministic snapshot comparisons can exclude them.

use nalgebra::DMatrix;
use sbm_core::estimator::{BetaVariant, DiffHomophilyFit, FitOptions, FitResult};
use sbm_core::inference::Regime;
use sbm_core::model::LinkFunction;
use serde_json::{json, Value};

use crate::LoadedGraph;

pub fn variant_name(v: BetaVariant) -> &'static str {
    match v {
        BetaVariant::SimpleMean => "simple_mean",
        BetaVariant::WeightedMean => "weighted_mean",
        BetaVariant::SinglePair => "single_pair",
    }
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| {
                Value::Array(
                    (0..m.ncols())
                        .map(|j| json!(m[(i, j)]))
                        .collect(),
                )
            })
            .collect(),
    )
}

fn input_json(loaded: &LoadedGraph) -> Value {
    json!({
        "nodes": loaded.graph.n,
        "edges": loaded.graph.edges.len(),
        "duplicate_lines_dropped": loaded.duplicates,
        "self_loops_dropped": loaded.self_loops,
        "covariate_columns": loaded.required,
    })
}

fn options_json(opts: &FitOptions) -> Value {
    json!({
        "k": opts.k,
        "link": match opts.link { LinkFunction::Identity => "identity", LinkFunction::Logit => "logit" },
        "clusterer": match opts.clusterer { sbm_core::estimator::Clusterer::Gmm => "gmm", sbm_core::estimator::Clusterer::KMeans => "kmeans" },
        "seed": opts.seed,
        "clip_epsilon": opts.clip_epsilon,
        "regime": match opts.regime { Regime::Dense => "dense", Regime::Sparse => "sparse" },
        "hollow_correction": opts.hollow_correction,
    })
}

pub fn fit_report(
    loaded: &LoadedGraph,
    opts: &FitOptions,
    fit: &FitResult,
    total_s: f64,
) -> Value {
    let bf = &fit.block_fit;
    let betas: Vec<Value> = fit
        .betas
        .iter()
        .map(|b| {
            json!({
                "covariate": b.covariate + 1,
                "estimator": variant_name(b.variant),
                "value": b.value,
                "bias_hat": b.bias_hat,
                "se_conservative": b.se_hat,
                "se_mean": b.se_proper,
                "pairs_used": b.pairs_used.len(),
            })
        })
        .collect();
    json!({
        "command": "fit",
        "input": input_json(loaded),
        "options": options_json(opts),
        "model": {
            "ktilde": bf.ktilde,
            "d_hat": fit.d_hat,
            "signature": [bf.signature.0, bf.signature.1],
        },
        "estimates": {
            "theta_hat_z": matrix_json(&bf.theta_hat_z),
            "b_hat_z": matrix_json(&bf.b_hat_z),
            "eta_hat": bf.eta_hat,
            "block_counts": bf.block_counts,
            "latent_group": bf.psi_group,
            "covariate_value_per_block": bf.z_theta,
            "clip_count": bf.clip_count,
            "latent_positions": matrix_json(&fit.latent_positions),
            "betas": betas,
        },
        "timings": {
            "embed_s": fit.timings.embed_s,
            "cluster_s": fit.timings.cluster_s,
            "estimate_s": fit.timings.estimate_s,
            "total_s": total_s,
        },
    })
}

pub fn differential_report(
    loaded: &LoadedGraph,
    opts: &FitOptions,
    fit: &DiffHomophilyFit,
    total_s: f64,
) -> Value {
    json!({
        "command": "fit",
        "mode": "differential_homophily",
        "input": input_json(loaded),
        "options": options_json(opts),
        "estimates": {
            "beta1": fit.beta1,
            "beta2": fit.beta2,
            "theta_hat_z": matrix_json(&fit.theta_hat_z),
            "b_hat_z": matrix_json(&fit.b_hat_z),
        },
        "timings": { "total_s": total_s },
    })
}
