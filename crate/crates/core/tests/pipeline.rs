//! End-to-end pipeline checks on sampled and exact inputs.

use nalgebra::DMatrix;
use sbm_core::clustering::adjusted_rand_index;
use sbm_core::estimator::{self, Clusterer, EstimatorKind, FitOptions};
use sbm_core::model::{self, CovariateLaw, Homophily, LinkFunction, SbmSpec};
use sbm_core::simulate;

fn example1_spec() -> SbmSpec {
    SbmSpec {
        k: 2,
        pi: vec![0.5, 0.5],
        nu: vec![vec![0.1], vec![0.7]],
        covariates: vec![],
        beta: Homophily::PerCovariate(vec![]),
        link: LinkFunction::Identity,
        rho: 1.0,
    }
}

fn example2_spec() -> SbmSpec {
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

#[test]
fn example1_no_covariates_recovers_theta_and_latents() {
    let spec = example1_spec();
    let sample = simulate::sample_graph(&spec, 2000, 11).unwrap();
    let opts = FitOptions {
        link: LinkFunction::Identity,
        d_hat: Some(2),
        seed: 5,
        ..FitOptions::new(2)
    };
    let fit = estimator::fit(&sample.graph, &opts).unwrap();
    let bf = &fit.block_fit;
    assert_eq!(bf.ktilde, 2);
    assert_eq!(
        adjusted_rand_index(&bf.xi_hat, &sample.expanded).unwrap(),
        1.0
    );
    // θ̂ close to [[0.01, 0.07], [0.07, 0.49]] up to block order: identify
    // the dense block by the larger diagonal entry.
    let t = &bf.theta_hat_z;
    let hi = if t[(0, 0)] > t[(1, 1)] { 0 } else { 1 };
    let lo = 1 - hi;
    assert!((t[(hi, hi)] - 0.49).abs() < 0.01, "θ̂ dense = {}", t[(hi, hi)]);
    assert!((t[(hi, lo)] - 0.07).abs() < 0.01);
    assert!((t[(lo, lo)] - 0.01).abs() < 0.01);
    // latent positions ≈ {0.7, 0.1} after sign alignment
    let x = &fit.latent_positions;
    let (a, b) = (x[(hi, 0)], x[(lo, 0)]);
    let (a, b) = if a + b < 0.0 { (-a, -b) } else { (a, b) };
    assert!((a - 0.7).abs() < 0.01, "p̂ = {}", a);
    assert!((b - 0.1).abs() < 0.01, "q̂ = {}", b);
}

#[test]
fn example2_end_to_end() {
    let spec = example2_spec();
    let sample = simulate::sample_graph(&spec, 2000, 3).unwrap();
    let opts = FitOptions {
        link: LinkFunction::Logit,
        estimator: EstimatorKind::Both,
        seed: 7,
        ..FitOptions::new(2)
    };
    let fit = estimator::fit(&sample.graph, &opts).unwrap();
    assert_eq!(fit.d_hat, 4, "d̂ = {}", fit.d_hat);
    assert_eq!(fit.block_fit.signature, (3, 1));
    assert_eq!(
        adjusted_rand_index(&fit.block_fit.xi_hat, &sample.expanded).unwrap(),
        1.0
    );
    assert_eq!(fit.betas.len(), 2);
    for b in &fit.betas {
        assert!(
            (b.value - 1.5).abs() < 0.1,
            "{:?} β̂ = {}",
            b.variant,
            b.value
        );
        assert!(b.se_hat.unwrap() > 0.0);
    }
}

#[test]
fn exact_theta_input_is_a_fixpoint() {
    // Build the exact edge-probability matrix for Example 2 with 50 nodes per
    // expanded block and run the pipeline on it; both β estimators must
    // return exactly 1.5.
    let expanded = model::expand(&example2_spec()).unwrap();
    let per = 50usize;
    let n = per * expanded.ktilde;
    let labels: Vec<usize> = (0..n).map(|i| i / per).collect();
    let p = DMatrix::from_fn(n, n, |i, j| expanded.theta_z[(labels[i], labels[j])]);
    let covs: Vec<Vec<u8>> = vec![labels
        .iter()
        .map(|&b| expanded.label_map[b].z[0])
        .collect()];
    let opts = FitOptions {
        link: LinkFunction::Logit,
        clusterer: Clusterer::KMeans,
        d_hat: Some(4),
        hollow_correction: false,
        ..FitOptions::new(2)
    };
    let fit = estimator::fit_matrix(&p, &covs, &opts).unwrap();
    for b in &fit.betas {
        assert!(
            (b.value - 1.5).abs() < 0.02,
            "{:?} β̂ = {}",
            b.variant,
            b.value
        );
    }
}

#[test]
fn simulate_fit_roundtrip_ari_one() {
    let spec = example1_spec();
    let sample = simulate::sample_graph(&spec, 2000, 21).unwrap();
    let opts = FitOptions {
        seed: 22,
        ..FitOptions::new(2)
    };
    let fit = estimator::fit(&sample.graph, &opts).unwrap();
    assert_eq!(
        adjusted_rand_index(&fit.block_fit.xi_hat, &sample.expanded).unwrap(),
        1.0
    );
}
