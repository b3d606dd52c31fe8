//! Plug-in asymptotic bias, variance, and covariance formulas for spectral
//! block-probability estimates, the delta-method transfer through h⁻¹, the
//! sparse-regime variants, and standard errors for homophily estimators.
//!
//! All quantities are driven by [`SbmMoments`]: the expanded block
//! probabilities η, latent centroids μ, block-probability matrix θ, the
//! second-moment matrix Δ = Σ_k η_k μ_k μ_k^T, and the bilinear form
//! ζ_{kℓ} = μ_k^T Δ⁻¹ μ_ℓ. The asymptotic law is that of n(θ̂_{kℓ} − θ_{kℓ}):
//! mean ψ_{kℓ} and covariance Σ over entry pairs.
//!
//! Two regime variants exist throughout: `Dense` uses Bernoulli variance
//! factors θ(1−θ); `Sparse` substitutes every (1−θ) factor by 1, matching the
//! semi-sparse lemma.
//!
//! An additional hollow-diagonal correction to ψ is provided: the lemma's
//! expansion takes the adjacency diagonal equal to its conditional mean,
//! while simple graphs have an all-zero diagonal, which contributes the extra
//! O(1) bias −(θ_kk+θ_ℓℓ)ζ_{kℓ} + Σ_r η_r θ_rr ζ_{kr} ζ_{ℓr}.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::LinkFunction;

/// Asymptotic regime for the variance factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Bernoulli factors θ(1−θ).
    Dense,
    /// Semi-sparse factors θ (every (1−θ) replaced by 1).
    Sparse,
}

/// Condition-number guard for Δ inversion.
const DELTA_COND_LIMIT: f64 = 1e12;
/// Magnitude threshold for keeping eigenvalues of θ when recovering μ.
const RANK_TOL: f64 = 1e-10;

/// Moment quantities of an expanded blockmodel driving all asymptotic
/// formulas.
#[derive(Debug, Clone)]
pub struct SbmMoments {
    /// Expanded block probabilities (length K̃, positive, sums to 1).
    pub eta: DVector<f64>,
    /// Latent centroids, one row per expanded block (K̃×d).
    pub mu: DMatrix<f64>,
    /// Block-probability matrix θ (K̃×K̃).
    pub theta: DMatrix<f64>,
    /// Signature (d₁, d₂) of the indefinite metric.
    pub signature: (usize, usize),
    /// Δ = Σ_k η_k μ_k μ_k^T.
    pub delta: DMatrix<f64>,
    /// Δ⁻¹.
    pub delta_inv: DMatrix<f64>,
    /// ζ_{kℓ} = μ_k^T Δ⁻¹ μ_ℓ.
    pub zeta: DMatrix<f64>,
    /// Condition number of Δ.
    pub delta_condition: f64,
    /// C_a = Δ⁻¹ E_a Δ⁻¹ with E_a = Σ_r η_r θ_{ar}(1−θ_{ar}) μ_r μ_r^T.
    c_dense: Vec<DMatrix<f64>>,
    /// Sparse variant: E_a = Σ_r η_r θ_{ar} μ_r μ_r^T.
    c_sparse: Vec<DMatrix<f64>>,
    /// Δ⁻¹ I_{d1,d2} Δ⁻¹ (for ψ).
    core: DMatrix<f64>,
}

impl SbmMoments {
    /// Builds moments from block probabilities η and the probability matrix θ,
    /// recovering μ and the signature from the eigendecomposition of θ.
    pub fn from_theta(eta: &[f64], theta: &DMatrix<f64>) -> Result<Self> {
        let kt = theta.nrows();
        if theta.ncols() != kt || eta.len() != kt {
            return Err(Error::InvalidInput(format!(
                "eta length {} inconsistent with theta {}x{}",
                eta.len(),
                kt,
                theta.ncols()
            )));
        }
        let eig = theta.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..kt).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .abs()
                .partial_cmp(&eig.eigenvalues[a].abs())
                .unwrap()
        });
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|&i| eig.eigenvalues[i].abs() > RANK_TOL)
            .collect();
        let d = kept.len();
        if d == 0 {
            return Err(Error::InvalidInput("theta matrix has rank 0".into()));
        }
        let mut mu = DMatrix::zeros(kt, d);
        let mut d1 = 0;
        for (c, &i) in kept.iter().enumerate() {
            let w = eig.eigenvalues[i];
            if w > 0.0 {
                d1 += 1;
            }
            let s = w.abs().sqrt();
            for r in 0..kt {
                mu[(r, c)] = eig.eigenvectors[(r, i)] * s;
            }
        }
        // Reorder columns so positive-eigenvalue directions come first.
        let mut cols: Vec<usize> = (0..d).collect();
        cols.sort_by_key(|&c| if eig.eigenvalues[kept[c]] > 0.0 { 0 } else { 1 });
        let mu = mu.select_columns(&cols);
        Self::from_parts(eta, &mu, (d1, d - d1), theta)
    }

    /// Builds moments from explicit centroids and signature (plug-in path:
    /// η̂, μ̂, θ̂ from a fitted model).
    pub fn from_parts(
        eta: &[f64],
        mu: &DMatrix<f64>,
        signature: (usize, usize),
        theta: &DMatrix<f64>,
    ) -> Result<Self> {
        let kt = mu.nrows();
        let d = mu.ncols();
        if signature.0 + signature.1 != d {
            return Err(Error::InvalidInput(format!(
                "signature {:?} inconsistent with centroid dimension {}",
                signature, d
            )));
        }
        if eta.len() != kt || theta.nrows() != kt || theta.ncols() != kt {
            return Err(Error::InvalidInput(
                "eta / mu / theta dimensions inconsistent".into(),
            ));
        }
        let s: f64 = eta.iter().sum();
        if eta.iter().any(|&e| e <= 0.0) || (s - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "eta must be positive and sum to 1 (sum = {})",
                s
            )));
        }
        let eta = DVector::from_iterator(kt, eta.iter().copied());
        let mut delta = DMatrix::zeros(d, d);
        for k in 0..kt {
            let row = mu.row(k).transpose();
            delta.ger(eta[k], &row, &row, 1.0);
        }
        let eig = delta.clone().symmetric_eigen();
        let max_ev = eig.eigenvalues.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        let min_ev = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, |a, b| a.min(b.abs()));
        let cond = if min_ev > 0.0 { max_ev / min_ev } else { f64::INFINITY };
        if !cond.is_finite() || cond > DELTA_COND_LIMIT {
            return Err(Error::NumericalFailure(format!(
                "Delta matrix ill-conditioned (condition number {:.3e} > {:.0e})",
                cond, DELTA_COND_LIMIT
            )));
        }
        let mut delta_inv = DMatrix::zeros(d, d);
        for i in 0..d {
            let v = eig.eigenvectors.column(i);
            let vi = DVector::from_column_slice(v.as_slice());
            delta_inv.ger(1.0 / eig.eigenvalues[i], &vi, &vi, 1.0);
        }
        let zeta = mu * &delta_inv * mu.transpose();

        // Indefinite metric core Δ⁻¹ I Δ⁻¹.
        let mut i_mat = DMatrix::zeros(d, d);
        for j in 0..d {
            i_mat[(j, j)] = if j < signature.0 { 1.0 } else { -1.0 };
        }
        let core = &delta_inv * i_mat * &delta_inv;

        // Per-block covariance-driver matrices C_a = Δ⁻¹ E_a Δ⁻¹.
        let mut c_dense = Vec::with_capacity(kt);
        let mut c_sparse = Vec::with_capacity(kt);
        for a in 0..kt {
            let mut e_d = DMatrix::zeros(d, d);
            let mut e_s = DMatrix::zeros(d, d);
            for r in 0..kt {
                let row = mu.row(r).transpose();
                let t = theta[(a, r)];
                e_d.ger(eta[r] * t * (1.0 - t), &row, &row, 1.0);
                e_s.ger(eta[r] * t, &row, &row, 1.0);
            }
            c_dense.push(&delta_inv * e_d * &delta_inv);
            c_sparse.push(&delta_inv * e_s * &delta_inv);
        }
        Ok(SbmMoments {
            eta,
            mu: mu.clone(),
            theta: theta.clone(),
            signature,
            delta,
            delta_inv,
            zeta,
            delta_condition: cond,
            c_dense,
            c_sparse,
            core,
        })
    }

    /// Number of expanded blocks K̃.
    pub fn ktilde(&self) -> usize {
        self.eta.len()
    }

    /// Variance factor θ_{kℓ}(1−θ_{kℓ}) (Dense) or θ_{kℓ} (Sparse).
    fn vf(&self, k: usize, l: usize, regime: Regime) -> f64 {
        let t = self.theta[(k, l)];
        match regime {
            Regime::Dense => t * (1.0 - t),
            Regime::Sparse => t,
        }
    }

    /// G(a, x, y) = μ_x^T Δ⁻¹ E_a Δ⁻¹ μ_y.
    fn g(&self, a: usize, x: usize, y: usize, regime: Regime) -> f64 {
        let c = match regime {
            Regime::Dense => &self.c_dense[a],
            Regime::Sparse => &self.c_sparse[a],
        };
        quad(&self.mu, x, c, y)
    }
}

/// μ_x^T M μ_y for rows x, y of the centroid matrix.
fn quad(mu: &DMatrix<f64>, x: usize, m: &DMatrix<f64>, y: usize) -> f64 {
    let d = mu.ncols();
    let mut acc = 0.0;
    for i in 0..d {
        let mut inner = 0.0;
        for j in 0..d {
            inner += m[(i, j)] * mu[(y, j)];
        }
        acc += mu[(x, i)] * inner;
    }
    acc
}

/// Asymptotic bias ψ_{kℓ} of n(θ̂_{kℓ} − θ_{kℓ}).
pub fn bias_psi(m: &SbmMoments, k: usize, l: usize, regime: Regime) -> f64 {
    let kt = m.ktilde();
    let t1: f64 = (0..kt)
        .map(|r| m.eta[r] * (m.vf(k, r, regime) + m.vf(l, r, regime)))
        .sum();
    let term1 = t1 * quad(&m.mu, k, &m.core, l);
    let mut term2 = 0.0;
    // μ_s^T core (μ_ℓ μ_k^T + μ_k μ_ℓ^T) Δ⁻¹ μ_s
    //   = (μ_s^T core μ_ℓ)(μ_k^T Δ⁻¹ μ_s) + (μ_s^T core μ_k)(μ_ℓ^T Δ⁻¹ μ_s)
    for s in 0..kt {
        let c: f64 = (0..kt).map(|r| m.eta[r] * m.vf(s, r, regime)).sum::<f64>() * m.eta[s];
        let val = quad(&m.mu, s, &m.core, l) * m.zeta[(k, s)]
            + quad(&m.mu, s, &m.core, k) * m.zeta[(l, s)];
        term2 += c * val;
    }
    term1 - term2
}

/// Hollow-diagonal correction to ψ_{kℓ} for simple graphs (A_ii = 0):
/// −(θ_kk + θ_ℓℓ)·ζ_{kℓ} + Σ_r η_r θ_rr ζ_{kr} ζ_{ℓr}.
pub fn hollow_bias_correction(m: &SbmMoments, k: usize, l: usize) -> f64 {
    let kt = m.ktilde();
    let mut corr = -(m.theta[(k, k)] + m.theta[(l, l)]) * m.zeta[(k, l)];
    for r in 0..kt {
        corr += m.eta[r] * m.theta[(r, r)] * m.zeta[(k, r)] * m.zeta[(l, r)];
    }
    corr
}

/// Asymptotic variance σ²_{kℓ} of n(θ̂_{kℓ} − θ_{kℓ}); uses the diagonal
/// formula when k = ℓ.
pub fn variance_sigma2(m: &SbmMoments, k: usize, l: usize, regime: Regime) -> f64 {
    let kt = m.ktilde();
    let z = &m.zeta;
    let eta = &m.eta;
    if k == l {
        let f = 1.0 / eta[k] - 2.0 * z[(k, k)];
        let t1 = 4.0 * m.vf(k, k, regime) * z[(k, k)].powi(2);
        let t2 = 4.0
            * (0..kt)
                .map(|r| eta[r] * m.vf(k, r, regime) * z[(k, r)].powi(2))
                .sum::<f64>()
            * f;
        let mut t3 = 0.0;
        for r in 0..kt {
            for s in 0..kt {
                t3 += eta[r] * eta[s] * m.vf(r, s, regime) * z[(k, r)].powi(2) * z[(k, s)].powi(2);
            }
        }
        return t1 + t2 + 2.0 * t3;
    }
    let t1 = (m.vf(k, k, regime) + m.vf(l, l, regime)) * z[(k, l)].powi(2);
    let t2 = 2.0 * m.vf(k, l, regime) * z[(k, k)] * z[(l, l)];
    let t3 = (0..kt)
        .map(|r| eta[r] * m.vf(k, r, regime) * z[(l, r)].powi(2))
        .sum::<f64>()
        * (1.0 / eta[k] - 2.0 * z[(k, k)]);
    let t4 = (0..kt)
        .map(|r| eta[r] * m.vf(l, r, regime) * z[(k, r)].powi(2))
        .sum::<f64>()
        * (1.0 / eta[l] - 2.0 * z[(l, l)]);
    let t5 = -2.0
        * (0..kt)
            .map(|r| {
                eta[r] * (m.vf(k, r, regime) + m.vf(l, r, regime)) * z[(k, r)] * z[(r, l)] * z[(k, l)]
            })
            .sum::<f64>();
    let mut t6 = 0.0;
    for r in 0..kt {
        for s in 0..kt {
            t6 += eta[r]
                * eta[s]
                * m.vf(r, s, regime)
                * (z[(k, r)] * z[(l, s)] + z[(l, r)] * z[(k, s)]).powi(2);
        }
    }
    t1 + t2 + t3 + t4 + t5 + 0.5 * t6
}

/// Asymptotic covariance of n(θ̂_{kℓ} − θ_{kℓ}) and n(θ̂_{k′ℓ′} − θ_{k′ℓ′}).
///
/// Assembled as the nine gated limit terms of the covariance expansion plus
/// the transpose-pairing terms (each perturbation entry pairs with both (i,j)
/// and (j,i)); on identical pairs this reduces to [`variance_sigma2`].
pub fn covariance_sigma(
    m: &SbmMoments,
    pair_a: (usize, usize),
    pair_b: (usize, usize),
    regime: Regime,
) -> f64 {
    let (k, l) = pair_a;
    let (kp, lp) = pair_b;
    let z = &m.zeta;
    let eta = &m.eta;
    let kt = m.ktilde();

    // Nine-term assembly (direct pairing).
    let mut t = 0.0;
    if k == kp {
        t += m.g(k, l, lp, regime) / eta[k];
    }
    if k == lp {
        t += m.g(k, l, kp, regime) / eta[k];
    }
    if l == kp {
        t += m.g(l, k, lp, regime) / eta[l];
    }
    if l == lp {
        t += m.g(l, k, kp, regime) / eta[l];
    }
    t -= m.g(k, l, kp, regime) * z[(lp, k)];
    t -= m.g(l, k, kp, regime) * z[(lp, l)];
    t -= z[(kp, l)] * m.g(kp, k, lp, regime);
    t -= z[(lp, l)] * m.g(lp, k, kp, regime);
    for a in 0..kt {
        t += eta[a] * z[(a, l)] * m.g(a, k, kp, regime) * z[(lp, a)];
    }

    // Transpose-pairing contribution.
    t += m.vf(k, kp, regime) * z[(l, kp)] * z[(lp, k)];
    t += m.vf(k, lp, regime) * z[(l, lp)] * z[(kp, k)];
    t += m.vf(l, kp, regime) * z[(k, kp)] * z[(lp, l)];
    t += m.vf(l, lp, regime) * z[(k, lp)] * z[(kp, l)];
    t -= z[(k, kp)] * m.g(k, l, lp, regime);
    t -= z[(l, kp)] * m.g(l, k, lp, regime);
    t -= z[(k, kp)] * m.g(kp, l, lp, regime);
    t -= z[(lp, k)] * m.g(lp, l, kp, regime);
    for a in 0..kt {
        t += eta[a] * z[(l, a)] * z[(a, kp)] * m.g(a, lp, k, regime);
    }
    t
}

/// Delta-method transfer of (ψ, σ²) through h⁻¹ at θ_{kℓ}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaMoments {
    /// ψ̃ = ψ·(h⁻¹)′(θ).
    pub psi_tilde: f64,
    /// σ̃² = σ²·[(h⁻¹)′(θ)]².
    pub sigma2_tilde: f64,
}

/// Applies the delta method at entry (k, ℓ); errors when θ_{kℓ} sits on the
/// boundary where (h⁻¹)′ is undefined.
pub fn delta_method(
    m: &SbmMoments,
    k: usize,
    l: usize,
    link: LinkFunction,
    regime: Regime,
) -> Result<DeltaMoments> {
    let t = m.theta[(k, l)];
    if link != LinkFunction::Identity && !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidInput(format!(
            "delta method undefined at theta[{}][{}] = {}",
            k, l, t
        )));
    }
    let g = link.inverse_derivative(t);
    Ok(DeltaMoments {
        psi_tilde: bias_psi(m, k, l, regime) * g,
        sigma2_tilde: variance_sigma2(m, k, l, regime) * g * g,
    })
}

/// One (kℓ, kℓ′) entry pair of a β estimator: β̂_m = h⁻¹(θ̂_{kℓ}) − h⁻¹(θ̂_{kℓ′}).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairTriple {
    /// Common row index k.
    pub k: usize,
    /// Column of the matched entry (covariate values equal).
    pub l: usize,
    /// Column of the unmatched entry.
    pub lp: usize,
}

/// Standard-error convention for averaged β estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeConvention {
    /// σ̂²_β = Σ_{m,m′} Cov(β̂_m, β̂_{m′}) — the per-pair-summed plug-in the
    /// variance tables report. Deliberately conservative: it omits the 1/|M|²
    /// normalization of the averaged estimator.
    Conservative,
    /// The averaged estimator's own asymptotic variance,
    /// σ̂²_β = (1/|M|²)·Σ_{m,m′} Cov(β̂_m, β̂_{m′}).
    ProperMean,
}

/// Plug-in bias and standard error of an averaged β estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSe {
    /// Asymptotic bias ψ̂_β (per the n(β̂−β) law); reported bias is ψ̂_β/n
    /// (Dense) or ψ̂_β/(nρ̂) (Sparse).
    pub psi_beta: f64,
    /// Asymptotic standard deviation σ̂_β of the chosen convention.
    pub sigma_beta: f64,
    /// Finite-sample bias estimate.
    pub bias_hat: f64,
    /// Finite-sample standard error: σ̂_β/n (Dense), σ̂_β/(n·ρ̂^{1/2}) (Sparse).
    pub se_hat: f64,
}

/// Plug-in bias and SE of β̂ = Σ_m c_m (h⁻¹(θ̂_{kℓ}) − h⁻¹(θ̂_{kℓ′})).
///
/// `coeffs` supplies the per-triple coefficients c_m; `None` means the plain
/// mean c_m = 1/|M|. `hollow` adds the simple-graph diagonal correction to
/// every entry bias. In sparse mode `rho_hat` must be given.
#[allow(clippy::too_many_arguments)]
pub fn beta_se(
    m: &SbmMoments,
    pairs: &[PairTriple],
    coeffs: Option<&[f64]>,
    link: LinkFunction,
    regime: Regime,
    n: usize,
    rho_hat: Option<f64>,
    convention: SeConvention,
    hollow: bool,
) -> Result<BetaSe> {
    if pairs.is_empty() {
        return Err(Error::DegenerateFit("empty pair set for beta SE".into()));
    }
    if let Some(c) = coeffs {
        if c.len() != pairs.len() {
            return Err(Error::InvalidInput(
                "coefficient vector length mismatch".into(),
            ));
        }
    }
    let nm = pairs.len() as f64;

    // Aggregate signed coefficients per unique unordered matrix entry.
    let mut entries: Vec<(usize, usize)> = Vec::new();
    let mut coef: Vec<f64> = Vec::new();
    let add = |e: (usize, usize), c: f64, entries: &mut Vec<(usize, usize)>, coef: &mut Vec<f64>| {
        let key = (e.0.min(e.1), e.0.max(e.1));
        match entries.iter().position(|&x| x == key) {
            Some(i) => coef[i] += c,
            None => {
                entries.push(key);
                coef.push(c);
            }
        }
    };
    let mut psi_beta = 0.0;
    for (i, p) in pairs.iter().enumerate() {
        let c = coeffs.map_or(1.0 / nm, |cs| cs[i]);
        add((p.k, p.l), c, &mut entries, &mut coef);
        add((p.k, p.lp), -c, &mut entries, &mut coef);
        let bias_m = entry_bias(m, p.k, p.l, link, regime, hollow)?
            - entry_bias(m, p.k, p.lp, link, regime, hollow)?;
        psi_beta += c * bias_m;
    }

    // Quadratic form of the delta-scaled covariance over the unique entries.
    let ne = entries.len();
    let g: Vec<f64> = entries
        .iter()
        .map(|&(a, b)| link.inverse_derivative(m.theta[(a, b)]))
        .collect();
    let mut var = 0.0;
    for i in 0..ne {
        for j in 0..ne {
            let scale = match convention {
                SeConvention::Conservative => coef[i] * coef[j] * nm * nm,
                SeConvention::ProperMean => coef[i] * coef[j],
            };
            if scale == 0.0 {
                continue;
            }
            var += scale * g[i] * g[j] * covariance_sigma(m, entries[i], entries[j], regime);
        }
    }
    let sigma_beta = var.max(0.0).sqrt();

    let (bias_hat, se_hat) = match regime {
        Regime::Dense => (psi_beta / n as f64, sigma_beta / n as f64),
        Regime::Sparse => {
            let rho = rho_hat.ok_or_else(|| {
                Error::InvalidInput("sparse regime requires rho_hat".into())
            })?;
            if !(rho > 0.0) {
                return Err(Error::InvalidInput(format!("rho_hat = {} not positive", rho)));
            }
            (
                psi_beta / (n as f64 * rho),
                sigma_beta / (n as f64 * rho.sqrt()),
            )
        }
    };
    Ok(BetaSe {
        psi_beta,
        sigma_beta,
        bias_hat,
        se_hat,
    })
}

/// Delta-scaled bias of a single matrix entry, optionally hollow-corrected.
fn entry_bias(
    m: &SbmMoments,
    k: usize,
    l: usize,
    link: LinkFunction,
    regime: Regime,
    hollow: bool,
) -> Result<f64> {
    let t = m.theta[(k, l)];
    if link != LinkFunction::Identity && !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidInput(format!(
            "bias undefined at theta[{}][{}] = {}",
            k, l, t
        )));
    }
    let g = link.inverse_derivative(t);
    let mut psi = bias_psi(m, k, l, regime);
    if hollow {
        psi += hollow_bias_correction(m, k, l);
    }
    Ok(psi * g)
}

/// Builds the simple-mean pair set M for covariate `cov` over the expanded
/// blocks: triples (k, ℓ, ℓ′) with ℓ ≠ ℓ′ in the same latent group,
/// covariate `cov` matched between k and ℓ but not between k and ℓ′, and all
/// other covariates having equal match-status between (k,ℓ) and (k,ℓ′).
pub fn simple_mean_pair_set(
    latent_group: &[usize],
    patterns: &[Vec<u8>],
    cov: usize,
) -> Vec<PairTriple> {
    let kt = latent_group.len();
    let n_cov = patterns.first().map_or(0, |p| p.len());
    let mut out = Vec::new();
    for k in 0..kt {
        for l in 0..kt {
            for lp in 0..kt {
                if l == lp || latent_group[l] != latent_group[lp] {
                    continue;
                }
                if !(patterns[k][cov] == patterns[l][cov] && patterns[k][cov] != patterns[lp][cov])
                {
                    continue;
                }
                let ok = (0..n_cov).filter(|&c| c != cov).all(|c| {
                    (patterns[k][c] == patterns[l][c]) == (patterns[k][c] == patterns[lp][c])
                });
                if ok {
                    out.push(PairTriple { k, l, lp });
                }
            }
        }
    }
    out
}
