//! Generative model: link functions, latent centroids, covariate laws, and
//! construction of the expanded block-probability matrix θ_Z.
//!
//! A stochastic blockmodel with discrete nodal covariates is reformulated as a
//! plain blockmodel on an *expanded* set of blocks: one block per (latent
//! block, covariate pattern) combination. All homophily parameters appear as
//! additive shifts inside the link function, so the expanded block-probability
//! matrix determines every estimand.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Link function mapping latent-space inner products to probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkFunction {
    /// h(u) = u. Valid only when every implied entry lies in [0,1].
    Identity,
    /// h(u) = e^u / (1 + e^u).
    Logit,
}

impl LinkFunction {
    /// Forward map h: reals → [0,1].
    pub fn forward(self, u: f64) -> f64 {
        match self {
            LinkFunction::Identity => u,
            LinkFunction::Logit => 1.0 / (1.0 + (-u).exp()),
        }
    }

    /// Inverse map h⁻¹: (0,1) → reals.
    pub fn inverse(self, p: f64) -> f64 {
        match self {
            LinkFunction::Identity => p,
            LinkFunction::Logit => (p / (1.0 - p)).ln(),
        }
    }

    /// Derivative of the inverse map, (h⁻¹)′(p).
    pub fn inverse_derivative(self, p: f64) -> f64 {
        match self {
            LinkFunction::Identity => 1.0,
            LinkFunction::Logit => 1.0 / (p * (1.0 - p)),
        }
    }
}

/// Law of the discrete nodal covariates, conditional on the latent block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovariateLaw {
    /// One binary covariate; success probability depends on the latent block:
    /// Z_i | τ_i = k  ~  Bernoulli(b_k).
    BernoulliPerBlock(Vec<f64>),
    /// Two binary covariates drawn jointly with given marginals and Pearson
    /// correlation, identically across blocks. Realized via the explicit 2×2
    /// joint cell-probability table.
    BernoulliPair {
        b_z: f64,
        b_w: f64,
        correlation: f64,
    },
}

impl CovariateLaw {
    /// Number of binary covariates this law produces (1 or 2).
    pub fn arity(&self) -> usize {
        match self {
            CovariateLaw::BernoulliPerBlock(_) => 1,
            CovariateLaw::BernoulliPair { .. } => 2,
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        match self {
            CovariateLaw::BernoulliPerBlock(b) => {
                if b.len() != k {
                    return Err(Error::InvalidModel(format!(
                        "per-block covariate law has {} entries, expected K={}",
                        b.len(),
                        k
                    )));
                }
                for (i, &p) in b.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                        return Err(Error::InvalidModel(format!(
                            "covariate success probability b[{}]={} outside [0,1]",
                            i, p
                        )));
                    }
                }
                Ok(())
            }
            CovariateLaw::BernoulliPair {
                b_z,
                b_w,
                correlation,
            } => {
                joint_bernoulli_table(*b_z, *b_w, *correlation).map(|_| ())
            }
        }
    }
}

/// 2×2 joint cell probabilities `[p00, p10, p01, p11]` (indexed by (z,w)) for a
/// correlated Bernoulli pair with the given marginals and Pearson correlation.
///
/// Errors with `InvalidModel` if any cell would be negative.
pub fn joint_bernoulli_table(b_z: f64, b_w: f64, correlation: f64) -> Result<[f64; 4]> {
    if !(0.0..=1.0).contains(&b_z) || !(0.0..=1.0).contains(&b_w) {
        return Err(Error::InvalidModel(format!(
            "pair marginals ({}, {}) outside [0,1]",
            b_z, b_w
        )));
    }
    let cov = correlation * (b_z * (1.0 - b_z) * b_w * (1.0 - b_w)).sqrt();
    let p11 = b_z * b_w + cov;
    let p10 = b_z - p11;
    let p01 = b_w - p11;
    let p00 = 1.0 - p11 - p10 - p01;
    let cells = [p00, p10, p01, p11];
    for (i, &c) in cells.iter().enumerate() {
        if c < -1e-12 {
            return Err(Error::InvalidModel(format!(
                "correlated Bernoulli pair infeasible: cell {} = {:.6} < 0 \
                 (marginals {}, {}, correlation {})",
                i, c, b_z, b_w, correlation
            )));
        }
    }
    Ok(cells.map(|c| c.max(0.0)))
}

/// Homophily parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Homophily {
    /// One additive shift per covariate, applied when the two endpoints share
    /// the covariate value.
    PerCovariate(Vec<f64>),
    /// Differential homophily for a single binary covariate: `beta0` applies
    /// when both endpoints have Z=0, `beta1` when both have Z=1.
    Differential { beta0: f64, beta1: f64 },
}

/// Generative model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    /// Number of latent blocks K.
    pub k: usize,
    /// Block prior π (length K, sums to 1).
    pub pi: Vec<f64>,
    /// Latent centroids ν, one row per block (K × d).
    pub nu: Vec<Vec<f64>>,
    /// Covariate laws (total arity 0, 1, or 2).
    pub covariates: Vec<CovariateLaw>,
    /// Homophily parameters (one per covariate, or a differential pair).
    pub beta: Homophily,
    /// Link function.
    pub link: LinkFunction,
    /// Sparsity factor ρ in (0, 1].
    pub rho: f64,
}

impl SbmSpec {
    /// Total number of binary covariates across all laws.
    pub fn covariate_arity(&self) -> usize {
        self.covariates.iter().map(|c| c.arity()).sum()
    }

    /// Validates the structural invariants (probability vectors, entry ranges,
    /// law feasibility). Called by every expansion operation.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidModel("K must be positive".into()));
        }
        if self.pi.len() != self.k {
            return Err(Error::InvalidModel(format!(
                "pi has {} entries, expected K={}",
                self.pi.len(),
                self.k
            )));
        }
        let s: f64 = self.pi.iter().sum();
        if (s - 1.0).abs() > 1e-12 || self.pi.iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidModel(format!(
                "pi must have positive entries summing to 1 (sum = {})",
                s
            )));
        }
        if self.nu.len() != self.k {
            return Err(Error::InvalidModel(format!(
                "nu has {} rows, expected K={}",
                self.nu.len(),
                self.k
            )));
        }
        let d = self.nu[0].len();
        if d == 0 || self.nu.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidModel(
                "nu rows must be nonempty and of equal length".into(),
            ));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidModel(format!(
                "rho = {} outside (0, 1]",
                self.rho
            )));
        }
        for law in &self.covariates {
            law.validate(self.k)?;
        }
        match (&self.beta, self.covariate_arity()) {
            (Homophily::PerCovariate(b), a) if b.len() == a => {}
            (Homophily::Differential { .. }, 1) => {}
            (b, a) => {
                return Err(Error::InvalidModel(format!(
                    "homophily parameterization {:?} inconsistent with covariate arity {}",
                    b, a
                )))
            }
        }
        Ok(())
    }

    /// Inner product ν_k^T ν_ℓ.
    fn dot(&self, k: usize, l: usize) -> f64 {
        self.nu[k]
            .iter()
            .zip(&self.nu[l])
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Label of one expanded block: its latent block and covariate pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandedLabel {
    /// Latent block index τ in 0..K.
    pub tau: usize,
    /// Covariate values for this expanded block (length = covariate arity).
    pub z: Vec<u8>,
}

/// A blockmodel on the expanded block set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedSbm {
    /// Number of expanded blocks K̃ (2K, 4K, or 2K for differential homophily).
    pub ktilde: usize,
    /// Expanded block-probability matrix θ_Z (K̃×K̃, symmetric, entries in [0,1]).
    pub theta_z: DMatrix<f64>,
    /// Expanded block probabilities η (length K̃, sums to 1).
    pub eta: DVector<f64>,
    /// Latent block and covariate pattern of each expanded block.
    pub label_map: Vec<ExpandedLabel>,
}

/// Probability-scale matrix of the covariate-free model:
/// entry (k,ℓ) = h(ν_k^T ν_ℓ).
pub fn theta_of_latents(spec: &SbmSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    build_theta(spec, 1, |_, _| 0.0)
}

/// Expands a model with one binary covariate into a 2K-block model.
///
/// Expanded block ordering: (τ=0,Z=0), (τ=0,Z=1), (τ=1,Z=0), …
/// Entry ((k,z),(ℓ,z′)) = h(ν_k^Tν_ℓ + β·1{z = z′}).
pub fn expand_one_covariate(spec: &SbmSpec) -> Result<ExpandedSbm> {
    spec.validate()?;
    let beta = match &spec.beta {
        Homophily::PerCovariate(b) if b.len() == 1 => b[0],
        _ => {
            return Err(Error::InvalidModel(
                "expand_one_covariate requires exactly one scalar homophily parameter".into(),
            ))
        }
    };
    let b = per_block_marginals(spec, 0)?;
    let theta_z = build_theta(spec, 2, |pa, pb| if pa == pb { beta } else { 0.0 })?;
    let mut eta = DVector::zeros(2 * spec.k);
    let mut label_map = Vec::with_capacity(2 * spec.k);
    for k in 0..spec.k {
        // pattern order: Z=0 first, then Z=1
        eta[2 * k] = spec.pi[k] * (1.0 - b[k]);
        eta[2 * k + 1] = spec.pi[k] * b[k];
        label_map.push(ExpandedLabel { tau: k, z: vec![0] });
        label_map.push(ExpandedLabel { tau: k, z: vec![1] });
    }
    Ok(ExpandedSbm {
        ktilde: 2 * spec.k,
        theta_z,
        eta,
        label_map,
    })
}

/// Expands a model with two binary covariates into a 4K-block model.
///
/// Within each latent block the covariate-pattern order is
/// (0,0), (1,0), (0,1), (1,1). Entry = h(ν_k^Tν_ℓ + β₁·1{Z¹ equal} + β₂·1{Z² equal}).
pub fn expand_two_covariates(spec: &SbmSpec) -> Result<ExpandedSbm> {
    spec.validate()?;
    let (b1, b2) = match &spec.beta {
        Homophily::PerCovariate(b) if b.len() == 2 => (b[0], b[1]),
        _ => {
            return Err(Error::InvalidModel(
                "expand_two_covariates requires exactly two homophily parameters".into(),
            ))
        }
    };
    let pats: [(u8, u8); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];
    let theta_z = build_theta(spec, 4, |pa, pb| {
        let (z1a, z2a) = pats[pa];
        let (z1b, z2b) = pats[pb];
        let mut s = 0.0;
        if z1a == z1b {
            s += b1;
        }
        if z2a == z2b {
            s += b2;
        }
        s
    })?;
    let cell = pattern_probabilities(spec)?;
    let mut eta = DVector::zeros(4 * spec.k);
    let mut label_map = Vec::with_capacity(4 * spec.k);
    for k in 0..spec.k {
        for (p, &(z1, z2)) in pats.iter().enumerate() {
            eta[4 * k + p] = spec.pi[k] * cell[k][p];
            label_map.push(ExpandedLabel {
                tau: k,
                z: vec![z1, z2],
            });
        }
    }
    Ok(ExpandedSbm {
        ktilde: 4 * spec.k,
        theta_z,
        eta,
        label_map,
    })
}

/// Expands a differential-homophily model (one binary covariate, parameters
/// (β₀, β₁)) into a 2K-block model: entry h(ν^Tν + β₀) when both endpoints have
/// Z=0, h(ν^Tν + β₁) when both have Z=1, h(ν^Tν) for mixed pairs.
pub fn expand_differential_homophily(spec: &SbmSpec) -> Result<ExpandedSbm> {
    spec.validate()?;
    let (beta0, beta1) = match &spec.beta {
        Homophily::Differential { beta0, beta1 } => (*beta0, *beta1),
        _ => {
            return Err(Error::InvalidModel(
                "expand_differential_homophily requires a differential pair".into(),
            ))
        }
    };
    let b = per_block_marginals(spec, 0)?;
    let theta_z = build_theta(spec, 2, |pa, pb| match (pa, pb) {
        (0, 0) => beta0,
        (1, 1) => beta1,
        _ => 0.0,
    })?;
    let mut eta = DVector::zeros(2 * spec.k);
    let mut label_map = Vec::with_capacity(2 * spec.k);
    for k in 0..spec.k {
        eta[2 * k] = spec.pi[k] * (1.0 - b[k]);
        eta[2 * k + 1] = spec.pi[k] * b[k];
        label_map.push(ExpandedLabel { tau: k, z: vec![0] });
        label_map.push(ExpandedLabel { tau: k, z: vec![1] });
    }
    Ok(ExpandedSbm {
        ktilde: 2 * spec.k,
        theta_z,
        eta,
        label_map,
    })
}

/// Builds the appropriate expanded model for the spec's covariate arity:
/// arity 0 gives the plain K-block model, arity 1 the 2K expansion (or the
/// differential-homophily expansion when so parameterized), arity 2 the 4K one.
pub fn expand(spec: &SbmSpec) -> Result<ExpandedSbm> {
    match (&spec.beta, spec.covariate_arity()) {
        (Homophily::Differential { .. }, 1) => expand_differential_homophily(spec),
        (_, 0) => {
            let theta_z = theta_of_latents(spec)?;
            Ok(ExpandedSbm {
                ktilde: spec.k,
                theta_z,
                eta: DVector::from_iterator(spec.k, spec.pi.iter().copied()),
                label_map: (0..spec.k)
                    .map(|k| ExpandedLabel { tau: k, z: vec![] })
                    .collect(),
            })
        }
        (_, 1) => expand_one_covariate(spec),
        (_, 2) => expand_two_covariates(spec),
        (_, a) => Err(Error::InvalidModel(format!(
            "unsupported covariate arity {}",
            a
        ))),
    }
}

/// Per-block marginal success probability of covariate `idx` (0-based over the
/// flattened covariate list).
fn per_block_marginals(spec: &SbmSpec, idx: usize) -> Result<Vec<f64>> {
    let mut flat = 0usize;
    for law in &spec.covariates {
        match law {
            CovariateLaw::BernoulliPerBlock(b) => {
                if flat == idx {
                    return Ok(b.clone());
                }
                flat += 1;
            }
            CovariateLaw::BernoulliPair { b_z, b_w, .. } => {
                if flat == idx {
                    return Ok(vec![*b_z; spec.k]);
                }
                if flat + 1 == idx {
                    return Ok(vec![*b_w; spec.k]);
                }
                flat += 2;
            }
        }
    }
    Err(Error::InvalidModel(format!(
        "covariate index {} out of range",
        idx
    )))
}

/// Per-block probabilities of the four covariate patterns (00, 10, 01, 11)
/// for a two-covariate spec.
fn pattern_probabilities(spec: &SbmSpec) -> Result<Vec<[f64; 4]>> {
    match spec.covariates.as_slice() {
        [CovariateLaw::BernoulliPerBlock(b1), CovariateLaw::BernoulliPerBlock(b2)] => Ok((0..spec
            .k)
            .map(|k| {
                let (p, q) = (b1[k], b2[k]);
                [
                    (1.0 - p) * (1.0 - q),
                    p * (1.0 - q),
                    (1.0 - p) * q,
                    p * q,
                ]
            })
            .collect()),
        [CovariateLaw::BernoulliPair {
            b_z,
            b_w,
            correlation,
        }] => {
            let cells = joint_bernoulli_table(*b_z, *b_w, *correlation)?;
            Ok(vec![cells; spec.k])
        }
        _ => Err(Error::InvalidModel(
            "two-covariate expansion requires two per-block laws or one pair law".into(),
        )),
    }
}

/// Evaluates the expanded matrix for a given per-latent-block pattern count and
/// additive shift rule, checking the [0,1] range for the Identity link.
fn build_theta<F: Fn(usize, usize) -> f64>(
    spec: &SbmSpec,
    patterns: usize,
    shift: F,
) -> Result<DMatrix<f64>> {
    let kt = spec.k * patterns;
    let mut th = DMatrix::zeros(kt, kt);
    for a in 0..kt {
        for b in 0..kt {
            let (k, pa) = (a / patterns, a % patterns);
            let (l, pb) = (b / patterns, b % patterns);
            let v = spec.link.forward(spec.dot(k, l) + shift(pa, pb)) * spec.rho;
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "probability entry ({},{}) = {} outside [0,1]; \
                     Identity-link models must keep every entry in range",
                    a, b, v
                )));
            }
            th[(a, b)] = v;
        }
    }
    Ok(th)
}
