//! Network sampling from model specifications and the Monte Carlo harness.
//!
//! Edge sampling uses geometric skip-sampling over the node-pair space of
//! each pair of expanded blocks: every pair is an independent Bernoulli draw
//! exactly, but the cost is proportional to the number of realized edges plus
//! the number of block pairs, so sparse graphs are cheap.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::clustering;
use crate::error::{Error, Result};
use crate::estimator::{self, BetaVariant, Clusterer, EstimatorKind, FitOptions};
use crate::graphio::Graph;
use crate::model::{self, joint_bernoulli_table, CovariateLaw, ExpandedSbm, SbmSpec};

/// Deterministic per-replicate seed derivation: a counter-based split of the
/// base seed (SplitMix64-style), so parallel execution order cannot change
/// results.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// A sampled network with its ground truth.
#[derive(Debug, Clone)]
pub struct SampledGraph {
    /// The graph, with covariate columns attached (named "z1", "z2", …).
    pub graph: Graph,
    /// Latent block τ per node.
    pub tau: Vec<usize>,
    /// Expanded block per node.
    pub expanded: Vec<usize>,
}

/// Samples a network of n nodes from a model specification: latent blocks
/// from π, covariates from the covariate laws conditional on the block, and
/// independent Bernoulli edges with the expanded block probabilities.
pub fn sample_graph(spec: &SbmSpec, n: usize, seed: u64) -> Result<SampledGraph> {
    let expanded = model::expand(spec)?;
    if n < expanded.ktilde {
        return Err(Error::InvalidInput(format!(
            "n = {} smaller than the {} expanded blocks",
            n, expanded.ktilde
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    // Draw expanded block memberships from η (equivalent to τ ~ π followed by
    // the covariate law conditional on τ).
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = expanded.ktilde - 1;
        for b in 0..expanded.ktilde {
            acc += expanded.eta[b];
            if u < acc {
                pick = b;
                break;
            }
        }
        labels.push(pick);
    }
    let edges = sample_edges(&expanded.theta_z, &labels, &mut rng);

    let arity = expanded.label_map[0].z.len();
    let tau: Vec<usize> = labels.iter().map(|&b| expanded.label_map[b].tau).collect();
    let mut graph = Graph::from_edges(n, edges)?;
    for c in 0..arity {
        let vals: Vec<u8> = labels.iter().map(|&b| expanded.label_map[b].z[c]).collect();
        graph = graph.with_covariate(&format!("z{}", c + 1), vals)?;
    }
    Ok(SampledGraph {
        graph,
        tau,
        expanded: labels,
    })
}

/// Samples edges for nodes with known expanded-block labels from an arbitrary
/// block-probability matrix (also the parametric-bootstrap sampler).
pub fn sample_edges(
    theta_z: &DMatrix<f64>,
    labels: &[usize],
    rng: &mut ChaCha8Rng,
) -> Vec<(u32, u32)> {
    let kt = theta_z.nrows();
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); kt];
    for (i, &b) in labels.iter().enumerate() {
        members[b].push(i as u32);
    }
    let mut edges = Vec::new();
    for a in 0..kt {
        for b in a..kt {
            let p = theta_z[(a, b)].clamp(0.0, 1.0);
            if p <= 0.0 || members[a].is_empty() || members[b].is_empty() {
                continue;
            }
            if a == b {
                let na = members[a].len() as u64;
                let m = na * (na.saturating_sub(1)) / 2;
                skip_sample(m, p, rng, |t| {
                    let (i, j) = triangular_pair(t, na);
                    edges.push((members[a][i as usize], members[a][j as usize]));
                });
            } else {
                let (na, nb) = (members[a].len() as u64, members[b].len() as u64);
                skip_sample(na * nb, p, rng, |t| {
                    edges.push((
                        members[a][(t / nb) as usize],
                        members[b][(t % nb) as usize],
                    ));
                });
            }
        }
    }
    edges
}

/// Visits each index in 0..m independently with probability p, via geometric
/// gap sampling (exact Bernoulli process).
fn skip_sample<F: FnMut(u64)>(m: u64, p: f64, rng: &mut ChaCha8Rng, mut visit: F) {
    if p >= 1.0 - 1e-15 {
        for t in 0..m {
            visit(t);
        }
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut t: u64 = 0;
    loop {
        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let gap = (u.ln() / log_q).floor() as u64;
        t = match t.checked_add(gap) {
            Some(v) => v,
            None => return,
        };
        if t >= m {
            return;
        }
        visit(t);
        t += 1;
    }
}

/// Maps a linear index t in 0..n(n−1)/2 to the pair (i, j), i < j, in
/// lexicographic order.
fn triangular_pair(t: u64, n: u64) -> (u64, u64) {
    // row i contributes (n-1-i) pairs; find i by the quadratic formula.
    let tf = t as f64;
    let nf = n as f64;
    let mut i = (nf - 0.5 - (((nf - 0.5) * (nf - 0.5)) - 2.0 * tf).max(0.0).sqrt()).floor() as u64;
    // guard against floating-point off-by-one
    loop {
        let start = i * (n - 1) - i * (i.saturating_sub(1)) / 2; // pairs before row i
        if t < start {
            i -= 1;
            continue;
        }
        let within = t - start;
        if within >= n - 1 - i {
            i += 1;
            continue;
        }
        return (i, i + 1 + within);
    }
}

/// Draws two correlated binary vectors with the given marginals and Pearson
/// correlation (via the explicit 2×2 joint cell table).
pub fn sample_correlated_bernoulli(
    b_z: f64,
    b_w: f64,
    correlation: f64,
    n: usize,
    seed: u64,
) -> Result<(Vec<u8>, Vec<u8>)> {
    let cells = joint_bernoulli_table(b_z, b_w, correlation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        // cells are (z,w) = (0,0), (1,0), (0,1), (1,1)
        let (zi, wi) = if u < cells[0] {
            (0, 0)
        } else if u < cells[0] + cells[1] {
            (1, 0)
        } else if u < cells[0] + cells[1] + cells[2] {
            (0, 1)
        } else {
            (1, 1)
        };
        z.push(zi);
        w.push(wi);
    }
    Ok((z, w))
}

/// A Monte Carlo design: a model, network sizes, and a replicate budget.
#[derive(Debug, Clone)]
pub struct McDesign {
    /// Design name (used in reports).
    pub name: String,
    /// Generative model.
    pub spec: SbmSpec,
    /// Network sizes to simulate.
    pub n_values: Vec<usize>,
    /// Replicates per network size.
    pub replicates: usize,
    /// Which β estimator(s) to run.
    pub estimator: EstimatorKind,
    /// Base seed; per-replicate seeds are derived by [`derive_seed`].
    pub seed: u64,
    /// Optional embedding-dimension override passed to the fit.
    pub d_hat: Option<usize>,
    /// Clustering procedure.
    pub clusterer: Clusterer,
}

/// Summary row: one (network size, covariate, estimator variant) cell.
#[derive(Debug, Clone)]
pub struct McRow {
    /// Network size.
    pub n: usize,
    /// Covariate index.
    pub covariate: usize,
    /// Estimator variant.
    pub variant: BetaVariant,
    /// Mean absolute error |β̂ − β| over converged replicates.
    pub mean_abs_err: f64,
    /// Monte Carlo standard error of the absolute error (NaN for 1 replicate).
    pub mcse: f64,
    /// Mean adjusted Rand index of the expanded-block recovery.
    pub mean_ari: f64,
    /// Mean wall-clock fit time in seconds.
    pub mean_time_s: f64,
    /// Replicates dropped for degenerate fits.
    pub divergent: usize,
    /// Replicates contributing to the means.
    pub used: usize,
}

/// Aggregated Monte Carlo results.
#[derive(Debug, Clone)]
pub struct McSummary {
    /// Design name.
    pub name: String,
    /// One row per (n, covariate, variant).
    pub rows: Vec<McRow>,
}

/// True homophily parameter per covariate implied by a spec.
fn true_betas(spec: &SbmSpec) -> Vec<f64> {
    match &spec.beta {
        model::Homophily::PerCovariate(b) => b.clone(),
        model::Homophily::Differential { beta0, beta1 } => vec![*beta0, *beta1],
    }
}

/// Runs a Monte Carlo design: replicates are sampled with derived seeds,
/// fitted in parallel, and aggregated. Degenerate fits are counted and
/// excluded from the means; other errors propagate.
pub fn run_design(design: &McDesign) -> Result<McSummary> {
    let betas_true = true_betas(&design.spec);
    let link = design.spec.link;
    let mut rows = Vec::new();
    for &n in &design.n_values {
        // (covariate, variant) -> per-replicate values
        let results: Vec<Result<ReplicateOutcome>> = (0..design.replicates)
            .into_par_iter()
            .map(|rep| run_replicate(design, n, rep as u64, link))
            .collect();
        let mut per_cell: std::collections::BTreeMap<(usize, u8), Vec<f64>> = Default::default();
        let mut aris = Vec::new();
        let mut times = Vec::new();
        let mut divergent = 0usize;
        for r in results {
            match r {
                Ok(out) => {
                    for (cov, variant, value) in out.betas {
                        per_cell
                            .entry((cov, variant_tag(variant)))
                            .or_default()
                            .push((value - betas_true[cov]).abs());
                    }
                    aris.push(out.ari);
                    times.push(out.time_s);
                }
                Err(Error::DegenerateFit(_)) => divergent += 1,
                Err(e) => return Err(e),
            }
        }
        let mean_ari = mean(&aris);
        let mean_time = mean(&times);
        for ((cov, vt), errs) in per_cell {
            let m = mean(&errs);
            let mcse = if errs.len() > 1 {
                let var = errs.iter().map(|e| (e - m).powi(2)).sum::<f64>()
                    / (errs.len() - 1) as f64;
                (var / errs.len() as f64).sqrt()
            } else {
                f64::NAN
            };
            rows.push(McRow {
                n,
                covariate: cov,
                variant: untag_variant(vt),
                mean_abs_err: m,
                mcse,
                mean_ari,
                mean_time_s: mean_time,
                divergent,
                used: errs.len(),
            });
        }
    }
    Ok(McSummary {
        name: design.name.clone(),
        rows,
    })
}

struct ReplicateOutcome {
    betas: Vec<(usize, BetaVariant, f64)>,
    ari: f64,
    time_s: f64,
}

fn variant_tag(v: BetaVariant) -> u8 {
    match v {
        BetaVariant::SimpleMean => 0,
        BetaVariant::WeightedMean => 1,
        BetaVariant::SinglePair => 2,
    }
}

fn untag_variant(t: u8) -> BetaVariant {
    match t {
        0 => BetaVariant::SimpleMean,
        1 => BetaVariant::WeightedMean,
        _ => BetaVariant::SinglePair,
    }
}

fn run_replicate(
    design: &McDesign,
    n: usize,
    rep: u64,
    link: crate::model::LinkFunction,
) -> Result<ReplicateOutcome> {
    let seed = derive_seed(design.seed, (n as u64) << 32 | rep);
    let sample = sample_graph(&design.spec, n, seed)?;
    let opts = FitOptions {
        d_hat: design.d_hat,
        link,
        estimator: design.estimator,
        clusterer: design.clusterer,
        seed: derive_seed(seed, 1),
        ..FitOptions::new(design.spec.k)
    };
    let t0 = std::time::Instant::now();
    let fit = estimator::fit(&sample.graph, &opts)?;
    let time_s = t0.elapsed().as_secs_f64();
    let ari = clustering::adjusted_rand_index(&fit.block_fit.xi_hat, &sample.expanded)?;
    let betas = fit
        .betas
        .iter()
        .map(|b| (b.covariate, b.variant, b.value))
        .collect();
    Ok(ReplicateOutcome {
        betas,
        ari,
        time_s,
    })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Parametric-bootstrap standard errors for β̂: resamples networks from the
/// fitted expanded blockmodel (η̂, θ̂_Z, per-block covariate values), refits
/// each, and reports the SD per (covariate, variant). Degenerate bootstrap
/// fits are skipped.
pub fn bootstrap_beta_se(
    bf: &crate::estimator::BlockFit,
    n: usize,
    opts: &FitOptions,
    replicates: usize,
    seed: u64,
) -> Result<Vec<(usize, BetaVariant, f64)>> {
    if replicates < 2 {
        return Err(Error::InvalidInput("bootstrap needs at least 2 replicates".into()));
    }
    let arity = bf.z_theta.first().map_or(0, |z| z.len());
    let theta = bf.theta_hat_z.clone();
    let eta = bf.eta_hat.clone();
    let samples: Vec<Vec<(usize, BetaVariant, f64)>> = (0..replicates)
        .into_par_iter()
        .filter_map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, rep as u64));
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut pick = eta.len() - 1;
                for (b, &e) in eta.iter().enumerate() {
                    acc += e;
                    if u < acc {
                        pick = b;
                        break;
                    }
                }
                labels.push(pick);
            }
            let edges = sample_edges(&theta, &labels, &mut rng);
            let covs: Vec<Vec<u8>> = (0..arity)
                .map(|c| labels.iter().map(|&b| bf.z_theta[b][c]).collect())
                .collect();
            let boot_opts = FitOptions {
                d_hat: Some(bf.signature.0 + bf.signature.1),
                seed: derive_seed(seed, 0x8000_0000 | rep as u64),
                ..opts.clone()
            };
            let density = 2.0 * edges.len() as f64 / (n as f64 * (n - 1) as f64);
            let csr = crate::sparse::CsrMatrix::adjacency(n, &edges).ok()?;
            let fit = estimator::fit_operator(&csr, &covs, density, &boot_opts).ok()?;
            Some(
                fit.betas
                    .iter()
                    .map(|b| (b.covariate, b.variant, b.value))
                    .collect(),
            )
        })
        .collect();
    if samples.len() < 2 {
        return Err(Error::DegenerateFit(
            "fewer than 2 successful bootstrap replicates".into(),
        ));
    }
    let mut cells: std::collections::BTreeMap<(usize, u8), Vec<f64>> = Default::default();
    for s in &samples {
        for &(cov, variant, value) in s {
            cells.entry((cov, variant_tag(variant))).or_default().push(value);
        }
    }
    Ok(cells
        .into_iter()
        .map(|((cov, vt), vals)| {
            let m = mean(&vals);
            let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>()
                / (vals.len() - 1).max(1) as f64)
                .sqrt();
            (cov, untag_variant(vt), sd)
        })
        .collect())
}

/// Re-exported for design configs that need direct access to the expansion.
pub fn expand_spec(spec: &SbmSpec) -> Result<ExpandedSbm> {
    model::expand(spec)
}

/// Convenience: checks a covariate law is usable for per-node sampling.
pub fn validate_law(law: &CovariateLaw, k: usize) -> Result<()> {
    let spec_probe = SbmSpec {
        k,
        pi: vec![1.0 / k as f64; k],
        nu: vec![vec![0.0]; k],
        covariates: vec![law.clone()],
        beta: model::Homophily::PerCovariate(vec![0.0; law.arity()]),
        link: crate::model::LinkFunction::Identity,
        rho: 1.0,
    };
    spec_probe.validate()
}
