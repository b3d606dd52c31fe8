//! Structural invariants of the asymptotic moment formulas.

use nalgebra::DMatrix;
use sbm_core::inference::{covariance_sigma, variance_sigma2, Regime, SbmMoments};
use sbm_core::model::{self, CovariateLaw, Homophily, LinkFunction, SbmSpec};

fn example1_moments() -> SbmMoments {
    // Example 1 latent blocks with one balanced covariate, identity link.
    let spec = SbmSpec {
        k: 2,
        pi: vec![0.5, 0.5],
        nu: vec![vec![0.1], vec![0.7]],
        covariates: vec![CovariateLaw::BernoulliPerBlock(vec![0.5, 0.5])],
        beta: Homophily::PerCovariate(vec![0.1]),
        link: LinkFunction::Identity,
        rho: 1.0,
    };
    let e = model::expand(&spec).unwrap();
    SbmMoments::from_theta(e.eta.as_slice(), &e.theta_z).unwrap()
}

fn example2_moments() -> SbmMoments {
    let spec = SbmSpec {
        k: 2,
        pi: vec![0.5, 0.5],
        nu: vec![vec![-1.5], vec![1.0]],
        covariates: vec![CovariateLaw::BernoulliPerBlock(vec![0.5, 0.5])],
        beta: Homophily::PerCovariate(vec![1.5]),
        link: LinkFunction::Logit,
        rho: 1.0,
    };
    let e = model::expand(&spec).unwrap();
    SbmMoments::from_theta(e.eta.as_slice(), &e.theta_z).unwrap()
}

/// Full covariance matrix over upper-triangular block pairs is PSD (up to
/// a small negative eigenvalue tolerance).
fn assert_psd(m: &SbmMoments) {
    let kt = m.ktilde();
    let mut pairs = Vec::new();
    for k in 0..kt {
        for l in k..kt {
            pairs.push((k, l));
        }
    }
    let p = pairs.len();
    let mut c = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = covariance_sigma(m, pairs[i], pairs[j], Regime::Dense);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    let eig = c.symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    assert!(
        min > -1e-8 * scale.max(1.0),
        "covariance matrix has eigenvalue {}",
        min
    );
}

#[test]
fn covariance_matrix_psd_example1() {
    assert_psd(&example1_moments());
}

#[test]
fn covariance_matrix_psd_example2() {
    assert_psd(&example2_moments());
}

/// As θ → 0 the dense and sparse variance formulas agree to first order:
/// scaling all probabilities by 1e-3 drives their ratio to 1.
#[test]
fn dense_sparse_agree_in_theta_to_zero_limit() {
    let base = example1_moments();
    let kt = base.ktilde();
    let scaled_theta = base.theta.map(|t| t * 1e-3);
    let eta: Vec<f64> = base.eta.iter().cloned().collect();
    let scaled = SbmMoments::from_theta(&eta, &scaled_theta).unwrap();
    for k in 0..kt {
        for l in k..kt {
            let dense = variance_sigma2(&scaled, k, l, Regime::Dense);
            let sparse = variance_sigma2(&scaled, k, l, Regime::Sparse);
            let ratio = dense / sparse;
            assert!(
                (ratio - 1.0).abs() < 5e-3,
                "σ²({},{}) dense/sparse ratio {}",
                k,
                l,
                ratio
            );
        }
    }
}
