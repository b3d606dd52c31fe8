//! Clustering of embedded rows: Gaussian mixture model (EM), k-means,
//! balanced scalar clustering of diagonal entries, and the adjusted Rand
//! index.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Options shared by the GMM and k-means fitters.
#[derive(Debug, Clone)]
pub struct ClusterConfig {
    /// Maximum EM / Lloyd iterations per initialization.
    pub max_iter: usize,
    /// Relative log-likelihood (or inertia) change below which a run stops.
    pub tol: f64,
    /// Number of random initializations; the best run is returned.
    pub n_init: usize,
    /// RNG seed; runs are deterministic given the seed.
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            max_iter: 200,
            tol: 1e-8,
            n_init: 5,
            seed: 0,
        }
    }
}

/// Result of a Gaussian-mixture EM fit.
#[derive(Debug, Clone)]
pub struct GmmFit {
    /// Number of components K.
    pub k: usize,
    /// Component means (K×d, one row per component).
    pub means: DMatrix<f64>,
    /// Full covariance matrix per component.
    pub covariances: Vec<DMatrix<f64>>,
    /// Mixing weights (sum to 1).
    pub weights: DVector<f64>,
    /// Hard labels: argmax responsibility per row.
    pub assignments: Vec<usize>,
    /// Final log-likelihood of the winning run.
    pub loglik: f64,
}

/// Result of a k-means fit.
#[derive(Debug, Clone)]
pub struct KmeansFit {
    /// Cluster centers (K×d).
    pub means: DMatrix<f64>,
    /// Hard labels per row.
    pub assignments: Vec<usize>,
    /// Sum of squared distances to assigned centers.
    pub inertia: f64,
}

/// Per-M-step covariance regularization factor (times trace/d).
const COV_REG: f64 = 1e-9;

/// Fits a K-component full-covariance Gaussian mixture by EM, returning the
/// best of `n_init` runs by log-likelihood (ties broken by lowest run index).
pub fn fit_gmm(points: &DMatrix<f64>, k: usize, config: &ClusterConfig) -> Result<GmmFit> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "K = {} outside 1..={} points",
            k, n
        )));
    }
    let mut best: Option<GmmFit> = None;
    let mut last_err = None;
    for init in 0..config.n_init.max(1) {
        let seed = config
            .seed
            .wrapping_mul(0x9E3779B97F4A7C15)
            .wrapping_add(init as u64);
        // A numerically degenerate restart (collapsed component, singular
        // covariance) is discarded; only if every restart fails is the error
        // surfaced.
        match gmm_single(points, k, config, seed) {
            Ok(fit) => {
                if best.as_ref().map_or(true, |b| fit.loglik > b.loglik) {
                    best = Some(fit);
                }
            }
            Err(e @ Error::NumericalFailure(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    match best {
        Some(fit) => Ok(fit),
        None => Err(last_err.unwrap_or_else(|| {
            Error::NumericalFailure("all GMM restarts failed".into())
        })),
    }
}

fn gmm_single(
    points: &DMatrix<f64>,
    k: usize,
    config: &ClusterConfig,
    seed: u64,
) -> Result<GmmFit> {
    let (n, d) = (points.nrows(), points.ncols());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Initialize means by k-means++ and covariances by the pooled covariance.
    let mut means = kmeanspp_centers(points, k, &mut rng);
    let pooled = pooled_covariance(points);
    let mut covs: Vec<DMatrix<f64>> = (0..k).map(|_| pooled.clone()).collect();
    let mut weights = DVector::from_element(k, 1.0 / k as f64);

    let mut resp = DMatrix::zeros(n, k);
    let mut prev_ll = f64::NEG_INFINITY;
    let mut loglik = f64::NEG_INFINITY;

    for _iter in 0..config.max_iter {
        // E-step: responsibilities via log-sum-exp.
        let mut ll = 0.0;
        let chols: Vec<GaussParams> = (0..k)
            .map(|c| GaussParams::new(&covs[c]))
            .collect::<Result<_>>()?;
        for i in 0..n {
            let xi = points.row(i).transpose();
            let mut logp = vec![0.0; k];
            for c in 0..k {
                let diff = &xi - means.row(c).transpose();
                logp[c] = weights[c].max(1e-300).ln() + chols[c].logpdf(&diff);
            }
            let mx = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logp.iter().map(|&l| (l - mx).exp()).sum();
            ll += mx + sum.ln();
            for c in 0..k {
                resp[(i, c)] = (logp[c] - mx).exp() / sum;
            }
        }
        loglik = ll;
        if loglik < prev_ll - 1e-6 * (1.0 + prev_ll.abs()) {
            return Err(Error::NumericalFailure(format!(
                "EM log-likelihood decreased: {} -> {}",
                prev_ll, loglik
            )));
        }
        let done = (loglik - prev_ll).abs() <= config.tol * (1.0 + loglik.abs());
        prev_ll = loglik;

        // M-step.
        for c in 0..k {
            let nc: f64 = (0..n).map(|i| resp[(i, c)]).sum();
            if nc < 1e-10 {
                return Err(Error::NumericalFailure(format!(
                    "GMM component {} collapsed to zero responsibility",
                    c
                )));
            }
            weights[c] = nc / n as f64;
            let mut mu = DVector::zeros(d);
            for i in 0..n {
                mu.axpy(resp[(i, c)], &points.row(i).transpose(), 1.0);
            }
            mu /= nc;
            let mut cov = DMatrix::zeros(d, d);
            for i in 0..n {
                let diff = points.row(i).transpose() - &mu;
                cov.ger(resp[(i, c)] / nc, &diff, &diff, 1.0);
            }
            let reg = COV_REG * (cov.trace() / d as f64).max(1e-300);
            for j in 0..d {
                cov[(j, j)] += reg;
            }
            means.row_mut(c).copy_from(&mu.transpose());
            covs[c] = cov;
        }
        if done {
            break;
        }
    }

    let assignments = (0..n)
        .map(|i| {
            let mut arg = 0;
            for c in 1..k {
                if resp[(i, c)] > resp[(i, arg)] {
                    arg = c;
                }
            }
            arg
        })
        .collect();
    Ok(GmmFit {
        k,
        means,
        covariances: covs,
        weights,
        assignments,
        loglik,
    })
}

/// Cached Cholesky factor and normalizing constant of one Gaussian component.
struct GaussParams {
    chol: Cholesky<f64, nalgebra::Dyn>,
    log_norm: f64,
}

impl GaussParams {
    fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let d = cov.nrows();
        let mut c = cov.clone();
        let mut chol = Cholesky::new(c.clone());
        let mut bump = 1e-12 * (cov.trace() / d as f64).max(1e-300);
        while chol.is_none() && bump < 1e3 {
            for j in 0..d {
                c[(j, j)] += bump;
            }
            chol = Cholesky::new(c.clone());
            bump *= 10.0;
        }
        let chol = chol.ok_or_else(|| {
            Error::NumericalFailure("GMM covariance not positive definite".into())
        })?;
        let logdet: f64 = (0..d).map(|j| chol.l_dirty()[(j, j)].ln()).sum::<f64>() * 2.0;
        let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + logdet);
        Ok(GaussParams { chol, log_norm })
    }

    fn logpdf(&self, diff: &DVector<f64>) -> f64 {
        let z = self.chol.solve(diff);
        self.log_norm - 0.5 * diff.dot(&z)
    }
}

fn pooled_covariance(points: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = (points.nrows(), points.ncols());
    let mean = points.row_mean().transpose();
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..n {
        let diff = points.row(i).transpose() - &mean;
        cov.ger(1.0 / n as f64, &diff, &diff, 1.0);
    }
    let reg = 1e-6 * (cov.trace() / d as f64).max(1e-12);
    for j in 0..d {
        cov[(j, j)] += reg;
    }
    cov
}

fn kmeanspp_centers(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let (n, d) = (points.nrows(), points.ncols());
    let mut centers = DMatrix::zeros(k, d);
    let first = rng.gen_range(0..n);
    centers.row_mut(0).copy_from(&points.row(first));
    let mut dist2 = vec![0.0f64; n];
    for c in 1..k {
        let mut total = 0.0;
        for i in 0..n {
            let mut best = f64::INFINITY;
            for cc in 0..c {
                let dd = (points.row(i) - centers.row(cc)).norm_squared();
                if dd < best {
                    best = dd;
                }
            }
            dist2[i] = best;
            total += best;
        }
        let idx = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = n - 1;
            for (i, &dd) in dist2.iter().enumerate() {
                if target < dd {
                    pick = i;
                    break;
                }
                target -= dd;
            }
            pick
        };
        centers.row_mut(c).copy_from(&points.row(idx));
    }
    centers
}

/// Lloyd's k-means with k-means++ seeding; best of `n_init` runs by inertia.
pub fn fit_kmeans(points: &DMatrix<f64>, k: usize, config: &ClusterConfig) -> Result<KmeansFit> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "K = {} outside 1..={} points",
            k, n
        )));
    }
    let mut best: Option<KmeansFit> = None;
    for init in 0..config.n_init.max(1) {
        let seed = config
            .seed
            .wrapping_mul(0x9E3779B97F4A7C15)
            .wrapping_add(0xC0FFEE + init as u64);
        let fit = kmeans_single(points, k, config, seed);
        if best.as_ref().map_or(true, |b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.unwrap())
}

fn kmeans_single(
    points: &DMatrix<f64>,
    k: usize,
    config: &ClusterConfig,
    seed: u64,
) -> KmeansFit {
    let (n, d) = (points.nrows(), points.ncols());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeanspp_centers(points, k, &mut rng);
    let mut assignments = vec![0usize; n];
    let mut inertia = f64::INFINITY;

    for _ in 0..config.max_iter {
        // Assignment step.
        let mut new_inertia = 0.0;
        for i in 0..n {
            let mut arg = 0;
            let mut best = f64::INFINITY;
            for c in 0..k {
                let dd = (points.row(i) - centers.row(c)).norm_squared();
                if dd < best {
                    best = dd;
                    arg = c;
                }
            }
            assignments[i] = arg;
            new_inertia += best;
        }
        // Update step.
        let mut counts = vec![0usize; k];
        let mut sums = DMatrix::zeros(k, d);
        for i in 0..n {
            counts[assignments[i]] += 1;
            let mut row = sums.row_mut(assignments[i]);
            row += points.row(i);
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Reseed an empty cluster from the farthest point.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = (points.row(a) - centers.row(assignments[a])).norm_squared();
                        let db = (points.row(b) - centers.row(assignments[b])).norm_squared();
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centers.row_mut(c).copy_from(&points.row(far));
            } else {
                for j in 0..d {
                    centers[(c, j)] = sums[(c, j)] / counts[c] as f64;
                }
            }
        }
        let done = (inertia - new_inertia).abs() <= config.tol * (1.0 + new_inertia);
        inertia = new_inertia;
        if done {
            break;
        }
    }
    KmeansFit {
        means: centers,
        assignments,
        inertia,
    }
}

/// Partitions the K̃ diagonal values into K equal-size groups minimizing
/// within-group variance (groups are contiguous in sorted order, which is
/// optimal under the equal-size constraint). Labels are assigned in order of
/// first appearance in the input.
pub fn cluster_diagonal(diag: &[f64], k: usize) -> Result<Vec<usize>> {
    let kt = diag.len();
    if k == 0 || kt % k != 0 {
        return Err(Error::InvalidInput(format!(
            "cannot split {} diagonal entries into {} equal groups",
            kt, k
        )));
    }
    let m = kt / k;
    let mut order: Vec<usize> = (0..kt).collect();
    order.sort_by(|&a, &b| diag[b].partial_cmp(&diag[a]).unwrap());
    let mut group_of = vec![0usize; kt];
    for (rank, &idx) in order.iter().enumerate() {
        group_of[idx] = rank / m;
    }
    // Relabel by first appearance for input-order determinism.
    let mut relabel = vec![usize::MAX; k];
    let mut next = 0;
    let mut labels = vec![0usize; kt];
    for i in 0..kt {
        let g = group_of[i];
        if relabel[g] == usize::MAX {
            relabel[g] = next;
            next += 1;
        }
        labels[i] = relabel[g];
    }
    Ok(labels)
}

/// Adjusted Rand index between two partitions of the same items.
pub fn adjusted_rand_index(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::InvalidInput(format!(
            "label vectors have different lengths: {} vs {}",
            labels_a.len(),
            labels_b.len()
        )));
    }
    let n = labels_a.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty label vectors".into()));
    }
    let ka = labels_a.iter().max().unwrap() + 1;
    let kb = labels_b.iter().max().unwrap() + 1;
    let mut table = vec![vec![0u64; kb]; ka];
    for i in 0..n {
        table[labels_a[i]][labels_b[i]] += 1;
    }
    let choose2 = |x: u64| (x * x.saturating_sub(1) / 2) as f64;
    let sum_ij: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_a: f64 = table
        .iter()
        .map(|row| choose2(row.iter().sum::<u64>()))
        .sum();
    let sum_b: f64 = (0..kb)
        .map(|j| choose2(table.iter().map(|row| row[j]).sum::<u64>()))
        .sum();
    let total = choose2(n as u64);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-300 {
        return Ok(1.0); // both partitions trivial
    }
    Ok((sum_ij - expected) / (max_index - expected))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ari_hand_oracle() {
        let a = vec![0, 0, 1, 1];
        assert!((adjusted_rand_index(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let b = vec![1, 1, 0, 0];
        assert!((adjusted_rand_index(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        let c = vec![0, 1, 0, 1];
        assert!((adjusted_rand_index(&a, &c).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn diagonal_grouping() {
        assert_eq!(
            cluster_diagonal(&[3.75, 3.75, 2.5, 2.5], 2).unwrap(),
            vec![0, 0, 1, 1]
        );
        assert_eq!(
            cluster_diagonal(&[5.1, 1.0, 5.0, 1.1], 2).unwrap(),
            vec![0, 1, 0, 1]
        );
        assert_eq!(cluster_diagonal(&[1.0, 1.0], 1).unwrap(), vec![0, 0]);
    }

    #[test]
    fn kmeans_two_scalar_clusters() {
        let pts = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 1.0, 1.0]);
        let fit = fit_kmeans(&pts, 2, &ClusterConfig::default()).unwrap();
        let mut ms: Vec<f64> = fit.means.column(0).iter().cloned().collect();
        ms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ms[0] - 0.0).abs() < 1e-12 && (ms[1] - 1.0).abs() < 1e-12);
        assert!(fit.inertia < 1e-12);
    }
}
