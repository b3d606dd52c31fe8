//! End-to-end fit pipeline: embed, cluster, recover block probabilities,
//! group expanded blocks into latent blocks, estimate homophily parameters
//! with plug-in inference, and recover latent positions net of covariates.
//!
//! The pipeline treats a blockmodel with binary covariates as a plain
//! blockmodel on K̃ = K·2^(number of covariates) expanded blocks: nodes are
//! embedded by adjacency spectral embedding, clustered into K̃ groups, the
//! block-probability matrix θ̂_Z is rebuilt from cluster centroids under the
//! indefinite metric, and the homophily parameters are read off differences of
//! h⁻¹(θ̂_Z) entries.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::clustering::{self, ClusterConfig};
use crate::error::{Error, Result};
use crate::graphio::Graph;
use crate::inference::{
    self, PairTriple, Regime, SbmMoments, SeConvention,
};
use crate::model::LinkFunction;
use crate::sparse::SymOp;
use crate::spectral::{self, Embedding};

/// Which β estimator(s) to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// Plain mean over the pair set M.
    SimpleMean,
    /// Block-size-weighted mean.
    WeightedMean,
    /// Both estimators.
    Both,
}

/// Clustering procedure for the embedded rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clusterer {
    /// Gaussian mixture model with full covariances.
    Gmm,
    /// Lloyd's k-means.
    KMeans,
}

/// Options controlling the fit pipeline.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Number of latent blocks K (required).
    pub k: usize,
    /// Embedding dimension override; `None` selects d̂ by profile likelihood.
    pub d_hat: Option<usize>,
    /// Link function h.
    pub link: LinkFunction,
    /// Which β estimator(s) to compute.
    pub estimator: EstimatorKind,
    /// Clustering procedure.
    pub clusterer: Clusterer,
    /// RNG seed for clustering initializations.
    pub seed: u64,
    /// Probability clipping bound for h⁻¹ (entries forced into
    /// [ε, 1−ε]).
    pub clip_epsilon: f64,
    /// Asymptotic regime for the plug-in inference formulas.
    pub regime: Regime,
    /// Sparsity factor ρ̂; `None` uses the edge-density plug-in in sparse
    /// mode.
    pub rho_hat: Option<f64>,
    /// Apply the simple-graph hollow-diagonal correction to plug-in biases.
    pub hollow_correction: bool,
}

impl FitOptions {
    /// Default options for K latent blocks: Identity link, both estimators,
    /// GMM clustering, dense regime, clip 1e-6, hollow correction on.
    pub fn new(k: usize) -> Self {
        FitOptions {
            k,
            d_hat: None,
            link: LinkFunction::Identity,
            estimator: EstimatorKind::Both,
            clusterer: Clusterer::Gmm,
            seed: 0,
            clip_epsilon: 1e-6,
            regime: Regime::Dense,
            rho_hat: None,
            hollow_correction: true,
        }
    }
}

/// Clustering output and derived block-level quantities.
#[derive(Debug, Clone)]
pub struct BlockFit {
    /// Number of expanded blocks K̃.
    pub ktilde: usize,
    /// Estimated expanded-block centroids μ̂ (K̃×d̂), columns signature-first.
    pub mu_hat: DMatrix<f64>,
    /// Signature (d̂₁, d̂₂).
    pub signature: (usize, usize),
    /// Expanded-block label per node.
    pub xi_hat: Vec<usize>,
    /// Latent-block label per node (via the diagonal grouping).
    pub tau_hat: Vec<usize>,
    /// Latent group ψ̂ of each expanded block.
    pub psi_group: Vec<usize>,
    /// θ̂_Z = μ̂ I μ̂^T, clipped to [ε, 1−ε].
    pub theta_hat_z: DMatrix<f64>,
    /// B̂_Z = h⁻¹(θ̂_Z) entrywise (in sparse Identity mode, of θ̂_Z/ρ̂).
    pub b_hat_z: DMatrix<f64>,
    /// Node count per expanded block.
    pub block_counts: Vec<usize>,
    /// Estimated expanded-block probabilities η̂.
    pub eta_hat: Vec<f64>,
    /// Per expanded block and covariate: counts of values [0, 1].
    pub cov_counts: Vec<Vec<[usize; 2]>>,
    /// Majority covariate value(s) per expanded block.
    pub z_theta: Vec<Vec<u8>>,
    /// Number of θ̂_Z entries clipped into [ε, 1−ε].
    pub clip_count: usize,
}

/// Variant of a β estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaVariant {
    /// Mean over the pair set M.
    SimpleMean,
    /// ω̂-weighted, weight-normalized mean over M.
    WeightedMean,
    /// A single (kℓ, kℓ′) pair.
    SinglePair,
}

/// A point estimate of one homophily parameter with plug-in inference.
#[derive(Debug, Clone)]
pub struct BetaEstimate {
    /// Point estimate β̂.
    pub value: f64,
    /// Estimator variant.
    pub variant: BetaVariant,
    /// Covariate index this estimate refers to.
    pub covariate: usize,
    /// The (k, ℓ, ℓ′) triples used.
    pub pairs_used: Vec<PairTriple>,
    /// Plug-in bias estimate ψ̂_β/n (ψ̈/(nρ̂) in sparse mode); `None` when the
    /// plug-in moments were unavailable.
    pub bias_hat: Option<f64>,
    /// Conservative plug-in SE (per-pair-summed covariance, no 1/|M|²).
    pub se_hat: Option<f64>,
    /// The averaged estimator's own plug-in SE (with 1/|M|² normalization).
    pub se_proper: Option<f64>,
}

/// Wall-clock stage timings, in seconds.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    /// Eigendecomposition and embedding.
    pub embed_s: f64,
    /// Clustering of embedded rows.
    pub cluster_s: f64,
    /// Block-matrix assembly, β estimation, and plug-in inference.
    pub estimate_s: f64,
}

/// Full output of the fit pipeline.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Clustering output and block-level estimates.
    pub block_fit: BlockFit,
    /// β estimates (per covariate; two entries per covariate when both
    /// estimator variants are requested).
    pub betas: Vec<BetaEstimate>,
    /// Recovered latent positions net of covariates (K×d_X).
    pub latent_positions: DMatrix<f64>,
    /// Embedding dimension used.
    pub d_hat: usize,
    /// Stage timings.
    pub timings: StageTimings,
}

/// Fits the pipeline to a graph, reading binary covariates from the graph's
/// covariate table (arity 0, 1, or 2).
pub fn fit(graph: &Graph, opts: &FitOptions) -> Result<FitResult> {
    let covs: Vec<Vec<u8>> = (0..graph.covariates.len())
        .map(|i| graph.covariate_values(i))
        .collect::<Result<_>>()?;
    let a = graph.adjacency()?;
    let density = if graph.n > 1 {
        2.0 * graph.edges.len() as f64 / (graph.n as f64 * (graph.n - 1) as f64)
    } else {
        0.0
    };
    fit_operator(&a, &covs, density, opts)
}

/// Test hook: runs the same pipeline on an arbitrary symmetric nonnegative
/// matrix (e.g. the exact probability matrix P) with explicit covariates.
pub fn fit_matrix(
    a: &DMatrix<f64>,
    covariates: &[Vec<u8>],
    opts: &FitOptions,
) -> Result<FitResult> {
    let n = a.nrows();
    let density = a.sum() / (n as f64 * (n - 1) as f64);
    fit_operator(a, covariates, density, opts)
}

/// Pipeline core, generic over the adjacency operator.
pub fn fit_operator<M: SymOp>(
    a: &M,
    covariates: &[Vec<u8>],
    density: f64,
    opts: &FitOptions,
) -> Result<FitResult> {
    let n = a.dim();
    let arity = covariates.len();
    if arity > 2 {
        return Err(Error::InvalidInput(format!(
            "at most two binary covariates supported, got {}",
            arity
        )));
    }
    if opts.k == 0 {
        return Err(Error::InvalidInput("K must be positive".into()));
    }
    if !(opts.clip_epsilon > 0.0 && opts.clip_epsilon < 0.5) {
        return Err(Error::InvalidInput(format!(
            "clip_epsilon = {} outside (0, 0.5)",
            opts.clip_epsilon
        )));
    }
    for (c, vals) in covariates.iter().enumerate() {
        if vals.len() != n {
            return Err(Error::InvalidInput(format!(
                "covariate {} has {} values for {} nodes",
                c,
                vals.len(),
                n
            )));
        }
        if vals.iter().all(|&v| v == vals[0]) {
            return Err(Error::InvalidInput(format!(
                "covariate {} is constant over nodes",
                c
            )));
        }
    }
    let mult = 1usize << arity;
    let ktilde = opts.k * mult;
    if n < ktilde {
        return Err(Error::InvalidInput(format!(
            "n = {} smaller than K̃ = {}",
            n, ktilde
        )));
    }

    // Stage 1: dimension selection and spectral embedding.
    let t0 = Instant::now();
    let embedding = embed_stage(a, ktilde, opts)?;
    let d_hat = embedding.dim();
    let embed_s = t0.elapsed().as_secs_f64();

    // Stage 2: cluster embedded rows into K̃ expanded blocks.
    let t1 = Instant::now();
    let (xi_hat, mu_hat) = cluster_stage(&embedding, ktilde, opts)?;
    let cluster_s = t1.elapsed().as_secs_f64();

    // Stages 3–7.
    let t2 = Instant::now();
    let block_fit = assemble_block_fit(&embedding, xi_hat, mu_hat, covariates, density, opts)?;
    let betas = estimate_betas(&block_fit, n, density, opts)?;
    let latent_positions = recover_latent_positions(&block_fit)?;
    let estimate_s = t2.elapsed().as_secs_f64();

    Ok(FitResult {
        block_fit,
        betas,
        latent_positions,
        d_hat,
        timings: StageTimings {
            embed_s,
            cluster_s,
            estimate_s,
        },
    })
}

fn embed_stage<M: SymOp>(a: &M, ktilde: usize, opts: &FitOptions) -> Result<Embedding> {
    let n = a.dim();
    if let Some(d) = opts.d_hat {
        let sel = spectral::top_eigenpairs(a, d.min(n))?;
        return Ok(spectral::embed_selection(&sel));
    }
    // Scan well past the plausible signal rank so the elbow search sees a
    // stretch of bulk eigenvalues on its right.
    let scan = (2 * ktilde + 2).max(20).min(n.saturating_sub(1)).max(2);
    let mags = spectral::ritz_magnitudes(a, scan)?;
    let d = spectral::select_dimension(&mags, scan)?.min(2 * ktilde).max(1);
    let sel = spectral::top_eigenpairs(a, d)?;
    Ok(spectral::embed_selection(&sel))
}

fn cluster_stage(
    embedding: &Embedding,
    ktilde: usize,
    opts: &FitOptions,
) -> Result<(Vec<usize>, DMatrix<f64>)> {
    let config = ClusterConfig {
        seed: opts.seed,
        ..ClusterConfig::default()
    };
    match opts.clusterer {
        Clusterer::Gmm => {
            let fit = clustering::fit_gmm(&embedding.y, ktilde, &config)?;
            Ok((fit.assignments, fit.means))
        }
        Clusterer::KMeans => {
            let fit = clustering::fit_kmeans(&embedding.y, ktilde, &config)?;
            Ok((fit.assignments, fit.means))
        }
    }
}

/// ρ̂ for sparse mode: the explicit option when given, otherwise the edge
/// density 2|E|/(n(n−1)).
fn effective_rho(density: f64, opts: &FitOptions) -> Result<f64> {
    match (opts.regime, opts.rho_hat) {
        (Regime::Dense, _) => Ok(1.0),
        (Regime::Sparse, Some(r)) if r > 0.0 => Ok(r),
        (Regime::Sparse, Some(r)) => Err(Error::InvalidInput(format!(
            "rho_hat = {} not positive",
            r
        ))),
        (Regime::Sparse, None) if density > 0.0 => Ok(density),
        (Regime::Sparse, None) => Err(Error::InvalidInput(
            "sparse mode on an empty graph: cannot estimate rho".into(),
        )),
    }
}

fn assemble_block_fit(
    embedding: &Embedding,
    xi_hat: Vec<usize>,
    mu_hat: DMatrix<f64>,
    covariates: &[Vec<u8>],
    density: f64,
    opts: &FitOptions,
) -> Result<BlockFit> {
    let n = xi_hat.len();
    let ktilde = mu_hat.nrows();
    let (d1, _d2) = embedding.signature;

    // θ̂_Z = μ̂ I μ̂^T, clipped.
    let mut mu_i = mu_hat.clone();
    for c in d1..mu_i.ncols() {
        for r in 0..ktilde {
            mu_i[(r, c)] = -mu_i[(r, c)];
        }
    }
    let mut theta_hat_z = &mu_hat * mu_i.transpose();
    // Exact symmetrization against floating-point asymmetry.
    for i in 0..ktilde {
        for j in (i + 1)..ktilde {
            let v = 0.5 * (theta_hat_z[(i, j)] + theta_hat_z[(j, i)]);
            theta_hat_z[(i, j)] = v;
            theta_hat_z[(j, i)] = v;
        }
    }
    let eps = opts.clip_epsilon;
    let mut clip_count = 0;
    for v in theta_hat_z.iter_mut() {
        if *v < eps {
            *v = eps;
            clip_count += 1;
        } else if *v > 1.0 - eps {
            *v = 1.0 - eps;
            clip_count += 1;
        }
    }

    // B̂_Z = h⁻¹(θ̂_Z); sparse Identity mode first rescales by ρ̂.
    let rho = effective_rho(density, opts)?;
    let rescale = if opts.regime == Regime::Sparse && opts.link == LinkFunction::Identity {
        1.0 / rho
    } else {
        1.0
    };
    let b_hat_z =
        DMatrix::from_fn(ktilde, ktilde, |i, j| opts.link.inverse(theta_hat_z[(i, j)]) * rescale);

    // Group the diagonal into K latent blocks.
    let diag: Vec<f64> = (0..ktilde).map(|i| b_hat_z[(i, i)]).collect();
    let psi_group = clustering::cluster_diagonal(&diag, opts.k)?;
    let tau_hat: Vec<usize> = xi_hat.iter().map(|&b| psi_group[b]).collect();

    // Block counts and per-covariate value counts.
    let mut block_counts = vec![0usize; ktilde];
    let mut cov_counts = vec![vec![[0usize; 2]; covariates.len()]; ktilde];
    for i in 0..n {
        let b = xi_hat[i];
        block_counts[b] += 1;
        for (c, vals) in covariates.iter().enumerate() {
            cov_counts[b][c][vals[i] as usize] += 1;
        }
    }
    if let Some(empty) = block_counts.iter().position(|&c| c == 0) {
        return Err(Error::DegenerateFit(format!(
            "expanded block {} is empty after clustering",
            empty
        )));
    }
    let eta_hat: Vec<f64> = block_counts.iter().map(|&c| c as f64 / n as f64).collect();
    // Majority covariate value per block (tie broken toward 0).
    let z_theta: Vec<Vec<u8>> = (0..ktilde)
        .map(|b| {
            (0..covariates.len())
                .map(|c| u8::from(cov_counts[b][c][1] > cov_counts[b][c][0]))
                .collect()
        })
        .collect();

    Ok(BlockFit {
        ktilde,
        mu_hat,
        signature: embedding.signature,
        xi_hat,
        tau_hat,
        psi_group,
        theta_hat_z,
        b_hat_z,
        block_counts,
        eta_hat,
        cov_counts,
        z_theta,
        clip_count,
    })
}

/// Simple-mean β estimator for covariate `cov` over the pair set M.
pub fn beta_simple_mean(bf: &BlockFit, cov: usize) -> Result<(f64, Vec<PairTriple>)> {
    let pairs = inference::simple_mean_pair_set(&bf.psi_group, &bf.z_theta, cov);
    if pairs.is_empty() {
        return Err(Error::DegenerateFit(format!(
            "empty pair set M for covariate {}",
            cov
        )));
    }
    let sum: f64 = pairs
        .iter()
        .map(|p| bf.b_hat_z[(p.k, p.l)] - bf.b_hat_z[(p.k, p.lp)])
        .sum();
    Ok((sum / pairs.len() as f64, pairs))
}

/// Weighted-mean β estimator: each pair's estimate is weighted by
/// ω̂ = (n₀ₖn₀ℓn₁ℓ′ + n₁ₖn₁ℓn₀ℓ′)/(nₖnℓnℓ′) and the weights are normalized to
/// sum to 1 over the pair set.
pub fn beta_weighted_mean(bf: &BlockFit, cov: usize) -> Result<(f64, Vec<PairTriple>, Vec<f64>)> {
    let pairs = inference::simple_mean_pair_set(&bf.psi_group, &bf.z_theta, cov);
    if pairs.is_empty() {
        return Err(Error::DegenerateFit(format!(
            "empty pair set for covariate {}",
            cov
        )));
    }
    let mut weights = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let (n0k, n1k) = (
            bf.cov_counts[p.k][cov][0] as f64,
            bf.cov_counts[p.k][cov][1] as f64,
        );
        let (n0l, n1l) = (
            bf.cov_counts[p.l][cov][0] as f64,
            bf.cov_counts[p.l][cov][1] as f64,
        );
        let (n0lp, n1lp) = (
            bf.cov_counts[p.lp][cov][0] as f64,
            bf.cov_counts[p.lp][cov][1] as f64,
        );
        let denom = (bf.block_counts[p.k] * bf.block_counts[p.l] * bf.block_counts[p.lp]) as f64;
        weights.push((n0k * n0l * n1lp + n1k * n1l * n0lp) / denom);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateFit(format!(
            "all weights zero for covariate {}",
            cov
        )));
    }
    let value: f64 = pairs
        .iter()
        .zip(&weights)
        .map(|(p, &w)| w * (bf.b_hat_z[(p.k, p.l)] - bf.b_hat_z[(p.k, p.lp)]))
        .sum::<f64>()
        / total;
    for w in &mut weights {
        *w /= total;
    }
    Ok((value, pairs, weights))
}

fn estimate_betas(
    bf: &BlockFit,
    n: usize,
    density: f64,
    opts: &FitOptions,
) -> Result<Vec<BetaEstimate>> {
    let arity = bf.z_theta.first().map_or(0, |z| z.len());
    let mut out = Vec::new();
    if arity == 0 {
        return Ok(out);
    }
    // Plug-in moments; inference degrades to None if they are unavailable.
    let moments = SbmMoments::from_parts(
        &bf.eta_hat,
        &bf.mu_hat,
        bf.signature,
        &bf.theta_hat_z,
    )
    .ok();
    let rho = effective_rho(density, opts)?;
    let rho_opt = if opts.regime == Regime::Sparse {
        Some(rho)
    } else {
        None
    };

    for cov in 0..arity {
        let mut push = |value: f64,
                        variant: BetaVariant,
                        pairs: Vec<PairTriple>,
                        coeffs: Option<Vec<f64>>| {
            let (mut bias_hat, mut se_hat, mut se_proper) = (None, None, None);
            if let Some(m) = &moments {
                if let Ok(cons) = inference::beta_se(
                    m,
                    &pairs,
                    coeffs.as_deref(),
                    opts.link,
                    opts.regime,
                    n,
                    rho_opt,
                    SeConvention::Conservative,
                    opts.hollow_correction,
                ) {
                    bias_hat = Some(cons.bias_hat);
                    se_hat = Some(cons.se_hat);
                }
                if let Ok(prop) = inference::beta_se(
                    m,
                    &pairs,
                    coeffs.as_deref(),
                    opts.link,
                    opts.regime,
                    n,
                    rho_opt,
                    SeConvention::ProperMean,
                    opts.hollow_correction,
                ) {
                    se_proper = Some(prop.se_hat);
                }
            }
            out.push(BetaEstimate {
                value,
                variant,
                covariate: cov,
                pairs_used: pairs,
                bias_hat,
                se_hat,
                se_proper,
            });
        };
        if matches!(opts.estimator, EstimatorKind::SimpleMean | EstimatorKind::Both) {
            let (value, pairs) = beta_simple_mean(bf, cov)?;
            push(value, BetaVariant::SimpleMean, pairs, None);
        }
        if matches!(opts.estimator, EstimatorKind::WeightedMean | EstimatorKind::Both) {
            let (value, pairs, weights) = beta_weighted_mean(bf, cov)?;
            push(value, BetaVariant::WeightedMean, pairs, Some(weights));
        }
    }
    Ok(out)
}

/// Recovers the latent positions net of covariates: eigendecomposition of the
/// K×K covariate-free submatrix of B̂_Z (entries between expanded blocks whose
/// covariate patterns differ in every covariate), with the embedding dimension
/// chosen by a second profile-likelihood pass capped at K.
pub fn recover_latent_positions(bf: &BlockFit) -> Result<DMatrix<f64>> {
    let k = bf.psi_group.iter().max().map_or(0, |&g| g + 1);
    let arity = bf.z_theta.first().map_or(0, |z| z.len());
    let mut s = DMatrix::zeros(k, k);
    if arity == 0 {
        s.copy_from(&bf.b_hat_z);
    } else {
        for g in 0..k {
            for h in 0..k {
                let mut acc = 0.0;
                let mut cnt = 0usize;
                for a in 0..bf.ktilde {
                    if bf.psi_group[a] != g {
                        continue;
                    }
                    for b in 0..bf.ktilde {
                        if bf.psi_group[b] != h || a == b {
                            continue;
                        }
                        // complementary patterns: every covariate differs
                        if (0..arity).all(|c| bf.z_theta[a][c] != bf.z_theta[b][c]) {
                            acc += bf.b_hat_z[(a, b)];
                            cnt += 1;
                        }
                    }
                }
                if cnt == 0 {
                    return Err(Error::DegenerateFit(format!(
                        "no covariate-free entry between latent blocks {} and {}",
                        g, h
                    )));
                }
                s[(g, h)] = acc / cnt as f64;
            }
        }
        // Symmetrize (finite-sample asymmetry).
        for i in 0..k {
            for j in (i + 1)..k {
                let v = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
    }
    let sel = spectral::top_eigenpairs_dense(&s, k)?;
    let d_x = if k == 1 {
        1
    } else {
        let mags: Vec<f64> = sel.values.iter().map(|v| v.abs()).collect();
        spectral::select_dimension(&mags, k).unwrap_or(k)
    };
    let emb = spectral::embed_selection(&sel.truncate(d_x));
    Ok(emb.y)
}

/// Output of the differential-homophily pipeline.
#[derive(Debug, Clone)]
pub struct DiffHomophilyFit {
    /// Homophily among value-0 pairs.
    pub beta1: f64,
    /// Homophily among value-1 pairs.
    pub beta2: f64,
    /// Expanded-block quantities in the aligned (latent, Z) ordering:
    /// blocks 2g and 2g+1 are latent block g with Z=0 and Z=1.
    pub b_hat_z: DMatrix<f64>,
    /// θ̂_Z in the same ordering.
    pub theta_hat_z: DMatrix<f64>,
    /// Expanded-block label per node (2·latent + Z).
    pub xi_hat: Vec<usize>,
}

/// Differential-homophily fit: clusters the Z=0 and Z=1 induced subgraphs
/// separately into K blocks, aligns the two block sets by symmetry of the
/// cross-covariate probabilities (brute force over the K! pairings), and reads
/// β₁, β₂ off the block matrix of the full graph.
pub fn fit_differential_homophily(graph: &Graph, opts: &FitOptions) -> Result<DiffHomophilyFit> {
    let z = graph.covariate_values(0)?;
    let k = opts.k;
    if k > 8 {
        return Err(Error::InvalidInput(
            "differential homophily alignment supports K <= 8".into(),
        ));
    }
    let n = graph.n;
    let min_side = k * (k + 2);
    for side in 0..2u8 {
        let cnt = z.iter().filter(|&&v| v == side).count();
        if cnt < min_side {
            return Err(Error::InvalidInput(format!(
                "only {} nodes with Z={} (need at least {})",
                cnt, side, min_side
            )));
        }
    }

    // Step 1–2: cluster each induced subgraph into K blocks.
    let mut sub_block = vec![0usize; n];
    for side in 0..2u8 {
        let nodes: Vec<usize> = (0..n).filter(|&i| z[i] == side).collect();
        let index_of: std::collections::HashMap<usize, usize> =
            nodes.iter().enumerate().map(|(j, &i)| (i, j)).collect();
        let sub_edges: Vec<(u32, u32)> = graph
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                let (a, b) = (a as usize, b as usize);
                match (index_of.get(&a), index_of.get(&b)) {
                    (Some(&x), Some(&y)) => Some((x as u32, y as u32)),
                    _ => None,
                }
            })
            .collect();
        let sub = crate::sparse::CsrMatrix::adjacency(nodes.len(), &sub_edges)?;
        let sub_opts = FitOptions {
            k,
            d_hat: opts.d_hat.map(|d| d.min(nodes.len())),
            ..opts.clone()
        };
        let embedding = embed_stage(&sub, k, &sub_opts)?;
        let (labels, _) = cluster_stage(&embedding, k, &sub_opts)?;
        for (j, &i) in nodes.iter().enumerate() {
            sub_block[i] = labels[j];
        }
    }

    // Step 3: full-graph embedding; centroids per (block, Z) cell.
    let a = graph.adjacency()?;
    let embedding = embed_stage(&a, 2 * k, opts)?;
    let d = embedding.dim();
    let cell = |i: usize| 2 * sub_block[i] + z[i] as usize; // provisional ordering
    let mut counts = vec![0usize; 2 * k];
    let mut mu = DMatrix::<f64>::zeros(2 * k, d);
    for i in 0..n {
        let c = cell(i);
        counts[c] += 1;
        for j in 0..d {
            mu[(c, j)] += embedding.y[(i, j)];
        }
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::DegenerateFit(format!(
            "expanded cell {} is empty",
            empty
        )));
    }
    for c in 0..2 * k {
        for j in 0..d {
            mu[(c, j)] /= counts[c] as f64;
        }
    }
    let (d1, _) = embedding.signature;
    let mut mu_i = mu.clone();
    for cidx in d1..d {
        for r in 0..2 * k {
            mu_i[(r, cidx)] = -mu_i[(r, cidx)];
        }
    }
    let mut theta = &mu * mu_i.transpose();
    let eps = opts.clip_epsilon;
    for v in theta.iter_mut() {
        *v = v.clamp(eps, 1.0 - eps);
    }
    let b = DMatrix::from_fn(2 * k, 2 * k, |i, j| opts.link.inverse(theta[(i, j)]));

    // Align Z=1 blocks to Z=0 blocks: the cross matrix C[a][b] =
    // B̂(a with Z=0, b with Z=1) is symmetric under the correct pairing.
    let c_mat = DMatrix::from_fn(k, k, |a, bb| b[(2 * a, 2 * bb + 1)]);
    let perms = permutations(k);
    let mut best: Option<(f64, &Vec<usize>)> = None;
    for p in &perms {
        let mut cost = 0.0;
        for a in 0..k {
            for bb in (a + 1)..k {
                let diff = c_mat[(a, p[bb])] - c_mat[(bb, p[a])];
                cost += diff * diff;
            }
        }
        if best.as_ref().map_or(true, |(bc, _)| cost < *bc) {
            best = Some((cost, p));
        }
    }
    let sigma = best.unwrap().1.clone();

    // Reorder to the aligned expanded ordering (g,Z=0),(g,Z=1),…
    let slot: Vec<usize> = {
        // aligned expanded index for provisional cell 2a+z
        let mut v = vec![0usize; 2 * k];
        for g in 0..k {
            v[2 * g] = 2 * g; // Z=0 block g stays
            v[2 * sigma[g] + 1] = 2 * g + 1; // Z=1 block sigma[g] pairs with g
        }
        v
    };
    let mut theta_al = DMatrix::zeros(2 * k, 2 * k);
    let mut b_al = DMatrix::zeros(2 * k, 2 * k);
    for i in 0..2 * k {
        for j in 0..2 * k {
            theta_al[(slot[i], slot[j])] = theta[(i, j)];
            b_al[(slot[i], slot[j])] = b[(i, j)];
        }
    }
    let xi_hat: Vec<usize> = (0..n).map(|i| slot[cell(i)]).collect();

    // β₁ = B̂(g0,g0) − B̂(g0,g1); β₂ = B̂(g1,g1) − B̂(g0,g1), averaged over g.
    let mut beta1 = 0.0;
    let mut beta2 = 0.0;
    for g in 0..k {
        let mixed = b_al[(2 * g, 2 * g + 1)];
        beta1 += b_al[(2 * g, 2 * g)] - mixed;
        beta2 += b_al[(2 * g + 1, 2 * g + 1)] - mixed;
    }
    beta1 /= k as f64;
    beta2 /= k as f64;

    Ok(DiffHomophilyFit {
        beta1,
        beta2,
        b_hat_z: b_al,
        theta_hat_z: theta_al,
        xi_hat,
    })
}

/// All permutations of 0..k (k ≤ 8 enforced by callers).
fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    fn heap(v: &mut Vec<usize>, m: usize, out: &mut Vec<Vec<usize>>) {
        if m <= 1 {
            out.push(v.clone());
            return;
        }
        for i in 0..m {
            heap(v, m - 1, out);
            if m % 2 == 0 {
                v.swap(i, m - 1);
            } else {
                v.swap(0, m - 1);
            }
        }
    }
    heap(&mut cur, k, &mut out);
    out
}
