//! Blind spatial clustering with a complex angular central Gaussian mixture
//! model, fitted per frequency by EM.
//!
//! Each time-frequency bin of a multichannel spectrogram is reduced to its
//! direction: the channel vector normalized to unit norm. Every frequency
//! gets its own K-component mixture over those directions. After fitting,
//! component labels are made consistent across frequency by permutation
//! alignment, the speech component is picked by envelope correlation with
//! the recording, and its posterior becomes the extraction mask.
//!
//! The shape-matrix update is the standard fixed-point estimator
//! `B = M * sum_t gamma * z z^H / (z^H B_old^{-1} z) / sum_t gamma`,
//! one step per EM iteration, with trace-proportional diagonal loading.

use ndarray::{Array1, Array2, Array3, ArrayView1};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{self, Cholesky};
use crate::maskers::Mask;
use crate::stft::{Spectrogram, StftError};

type C64 = Complex64;

#[derive(Debug, Error)]
pub enum CacgmmError {
    #[error("spatial clustering needs at least 2 channels, got {0}")]
    TooFewChannels(usize),
    #[error("need at least as many frames ({frames}) as components ({components})")]
    TooFewFrames { frames: usize, components: usize },
    #[error("shape matrix not positive definite after loading")]
    NotPositiveDefinite,
    #[error("permutation alignment supports at most 6 components, got {0}")]
    TooManyComponents(usize),
    #[error("invalid cACGMM config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Stft(#[from] StftError),
    #[error("internal: {0}")]
    Internal(String),
}

type Result<T> = std::result::Result<T, CacgmmError>;

#[derive(Debug, Clone)]
pub struct CacgmmConfig {
    /// Mixture components K.
    pub components: usize,
    /// EM iterations.
    pub max_iters: usize,
    /// Diagonal loading fraction for shape matrices.
    pub b_loading: f64,
    /// Norm floor below which a bin is replaced by the fixed unit vector e1.
    pub z_floor: f64,
    /// Seed for the Dirichlet posterior initialization.
    pub seed: u64,
}

impl Default for CacgmmConfig {
    fn default() -> Self {
        Self { components: 2, max_iters: 30, b_loading: 1e-4, z_floor: 1e-10, seed: 0 }
    }
}

impl CacgmmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.components < 1 {
            return Err(CacgmmError::BadConfig("components must be >= 1".into()));
        }
        if self.max_iters < 1 {
            return Err(CacgmmError::BadConfig("max_iters must be >= 1".into()));
        }
        if !(self.b_loading > 0.0) {
            return Err(CacgmmError::BadConfig("b_loading must be > 0".into()));
        }
        Ok(())
    }
}

/// Everything the EM iterates: per-frequency mixture weights and shape
/// matrices, posteriors, and the log-likelihood trace.
#[derive(Debug, Clone)]
pub struct CacgmmState {
    /// Mixture weights, `F x K`; each row sums to 1.
    pub alpha: Array2<f64>,
    /// Hermitian PD shape matrices, `F * K` entries of `M x M`, f-major.
    pub shapes: Vec<Array2<C64>>,
    /// Posteriors, `K x T x F`; sums to 1 over components at every bin.
    pub gamma: Array3<f64>,
    /// Total log-likelihood after each EM iteration.
    pub loglik_history: Vec<f64>,
}

impl CacgmmState {
    pub fn components(&self) -> usize {
        self.alpha.ncols()
    }

    pub fn freq_bins(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn frames(&self) -> usize {
        self.gamma.dim().1
    }

    pub fn channels(&self) -> usize {
        self.shapes[0].nrows()
    }

    pub fn shape(&self, f: usize, k: usize) -> &Array2<C64> {
        &self.shapes[f * self.components() + k]
    }

    fn initial(channels: usize, frames: usize, freq_bins: usize, components: usize, gamma: Array3<f64>) -> Self {
        let alpha = Array2::from_elem((freq_bins, components), 1.0 / components as f64);
        let shapes = vec![linalg::identity(channels); freq_bins * components];
        debug_assert_eq!(gamma.dim(), (components, frames, freq_bins));
        Self { alpha, shapes, gamma, loglik_history: Vec::new() }
    }
}

/// Unit-norm directional observations, `M x T x F`. Bins whose norm falls
/// below `z_floor` emit the fixed unit vector e1.
pub fn directional_stats(s: &Spectrogram, z_floor: f64) -> Result<Array3<C64>> {
    let m = s.channels();
    if m < 2 {
        return Err(CacgmmError::TooFewChannels(m));
    }
    let (t_len, f_len) = (s.frames(), s.freq_bins());
    let mut z = Array3::<C64>::zeros((m, t_len, f_len));
    for t in 0..t_len {
        for f in 0..f_len {
            let norm = (0..m).map(|c| s.bins()[[c, t, f]].norm_sqr()).sum::<f64>().sqrt();
            if norm >= z_floor {
                for c in 0..m {
                    z[[c, t, f]] = s.bins()[[c, t, f]] / norm;
                }
            } else {
                z[[0, t, f]] = C64::new(1.0, 0.0);
            }
        }
    }
    Ok(z)
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// Log of the cACG normalizer (M-1)! / (2 pi^M det B), given the factor of B.
fn log_normalizer(m: usize, chol: &Cholesky) -> f64 {
    ln_factorial(m - 1) - std::f64::consts::LN_2 - m as f64 * std::f64::consts::PI.ln() - chol.log_det()
}

/// Log density of the complex angular central Gaussian
/// `(M-1)! / (2 pi^M det B) * (z^H B^{-1} z)^{-M}` for a unit vector z.
pub fn cacg_logpdf(z: &ArrayView1<C64>, b: &Array2<C64>) -> Result<f64> {
    let m = z.len();
    let chol = Cholesky::new(&b.view()).ok_or(CacgmmError::NotPositiveDefinite)?;
    let q = chol.quadratic_form_inv(z);
    Ok(log_normalizer(m, &chol) - m as f64 * q.ln())
}

/// Result of one E-step: normalized posteriors and the total log-likelihood
/// `sum_{t,f} log sum_k alpha_f^k A(z; B_f^k)`.
#[derive(Debug, Clone)]
pub struct EStep {
    pub posteriors: Array3<f64>,
    pub log_likelihood: f64,
}

/// Posterior update by log-sum-exp normalization of `log alpha + logpdf`.
pub fn e_step(z_stats: &Array3<C64>, state: &CacgmmState) -> Result<EStep> {
    let (m, t_len, f_len) = z_stats.dim();
    let k_len = state.components();
    let mut gamma = Array3::<f64>::zeros((k_len, t_len, f_len));
    let mut loglik = 0.0;
    let mut z = Array1::<C64>::zeros(m);
    let mut logp = vec![0.0f64; k_len];
    for f in 0..f_len {
        let chols: Vec<Cholesky> = (0..k_len)
            .map(|k| Cholesky::new(&state.shape(f, k).view()).ok_or(CacgmmError::NotPositiveDefinite))
            .collect::<Result<_>>()?;
        let lognorms: Vec<f64> = chols.iter().map(|c| log_normalizer(m, c)).collect();
        for t in 0..t_len {
            for c in 0..m {
                z[c] = z_stats[[c, t, f]];
            }
            for k in 0..k_len {
                let q = chols[k].quadratic_form_inv(&z.view());
                logp[k] = state.alpha[[f, k]].ln() + lognorms[k] - m as f64 * q.ln();
            }
            let max = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = logp.iter().map(|&v| (v - max).exp()).sum();
            let lse = max + sum_exp.ln();
            loglik += lse;
            for k in 0..k_len {
                gamma[[k, t, f]] = (logp[k] - lse).exp();
            }
        }
    }
    Ok(EStep { posteriors: gamma, log_likelihood: loglik })
}

/// One fixed-point parameter update from the given posteriors, followed by
/// Hermitian symmetrization and `b_loading * trace(B)/M` diagonal loading.
/// Components that captured no posterior mass at a frequency are rescued:
/// weight floored at 1e-6 and shape reset to identity.
pub fn m_step(
    z_stats: &Array3<C64>,
    gamma: &Array3<f64>,
    state: &CacgmmState,
    b_loading: f64,
) -> Result<CacgmmState> {
    let (m, t_len, f_len) = z_stats.dim();
    let k_len = state.components();
    let mut alpha = Array2::<f64>::zeros((f_len, k_len));
    let mut shapes = Vec::with_capacity(f_len * k_len);
    let mut z = Array1::<C64>::zeros(m);
    for f in 0..f_len {
        for k in 0..k_len {
            let chol = Cholesky::new(&state.shape(f, k).view()).ok_or(CacgmmError::NotPositiveDefinite)?;
            let mut num = Array2::<C64>::zeros((m, m));
            let mut mass = 0.0f64;
            for t in 0..t_len {
                let g = gamma[[k, t, f]];
                mass += g;
                if g == 0.0 {
                    continue;
                }
                for c in 0..m {
                    z[c] = z_stats[[c, t, f]];
                }
                let q = chol.quadratic_form_inv(&z.view());
                let w = g / q;
                for i in 0..m {
                    for j in 0..m {
                        num[[i, j]] += z[i] * z[j].conj() * w;
                    }
                }
            }
            if mass <= 1e-10 {
                // degenerate-component rescue
                alpha[[f, k]] = 1e-6;
                shapes.push(linalg::identity(m));
                continue;
            }
            alpha[[f, k]] = mass / t_len as f64;
            let mut b = linalg::hermitize(&(num * (m as f64 / mass)));
            let load = linalg::trace(&b.view()).re / m as f64 * b_loading;
            for i in 0..m {
                b[[i, i]] += C64::new(load, 0.0);
            }
            shapes.push(b);
        }
        // renormalize weights (rescue flooring can perturb the sum)
        let row_sum: f64 = (0..k_len).map(|k| alpha[[f, k]]).sum();
        for k in 0..k_len {
            alpha[[f, k]] /= row_sum;
        }
    }
    Ok(CacgmmState {
        alpha,
        shapes,
        gamma: gamma.clone(),
        loglik_history: state.loglik_history.clone(),
    })
}

/// Fit by alternating m/e steps from a Dirichlet(1) random posterior
/// initialization drawn with `cfg.seed`.
pub fn fit(s: &Spectrogram, cfg: &CacgmmConfig) -> Result<CacgmmState> {
    cfg.validate()?;
    let m = s.channels();
    if m < 2 {
        return Err(CacgmmError::TooFewChannels(m));
    }
    if s.frames() < cfg.components {
        return Err(CacgmmError::TooFewFrames { frames: s.frames(), components: cfg.components });
    }
    let gamma0 = dirichlet_init(cfg.components, s.frames(), s.freq_bins(), cfg.seed);
    fit_with_init(s, cfg, gamma0)
}

/// Symmetric Dirichlet(1) posterior draw, `K x T x F`.
pub fn dirichlet_init(components: usize, frames: usize, freq_bins: usize, seed: u64) -> Array3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gamma = Array3::<f64>::zeros((components, frames, freq_bins));
    for t in 0..frames {
        for f in 0..freq_bins {
            let mut sum = 0.0;
            for k in 0..components {
                let u: f64 = rng.gen();
                let e = -(1.0 - u).ln() + 1e-12;
                gamma[[k, t, f]] = e;
                sum += e;
            }
            for k in 0..components {
                gamma[[k, t, f]] /= sum;
            }
        }
    }
    gamma
}

/// Fit from an explicit initial posterior (used for equivariance checks and
/// reproducing runs).
pub fn fit_with_init(s: &Spectrogram, cfg: &CacgmmConfig, gamma0: Array3<f64>) -> Result<CacgmmState> {
    cfg.validate()?;
    let z = directional_stats(s, cfg.z_floor)?;
    let (m, t_len, f_len) = z.dim();
    if gamma0.dim() != (cfg.components, t_len, f_len) {
        return Err(CacgmmError::Internal(format!(
            "initial posterior shape {:?} does not match (K, T, F) = {:?}",
            gamma0.dim(),
            (cfg.components, t_len, f_len)
        )));
    }
    let mut state = CacgmmState::initial(m, t_len, f_len, cfg.components, gamma0);
    for _ in 0..cfg.max_iters {
        let mut next = m_step(&z, &state.gamma, &state, cfg.b_loading)?;
        let es = e_step(&z, &next)?;
        next.gamma = es.posteriors;
        next.loglik_history.push(es.log_likelihood);
        state = next;
    }
    Ok(state)
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        let da = a - mx;
        let db = b - my;
        cov += da * db;
        vx += da * da;
        vy += db * db;
    }
    if vx < 1e-30 || vy < 1e-30 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    // lexicographic, identity first
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..k).collect();
    fn rec(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            prefix.push(v);
            rec(prefix, rest, out);
            prefix.pop();
            rest.insert(i, v);
        }
    }
    rec(&mut Vec::new(), &mut items, &mut out);
    out
}

/// Make component labels consistent across frequency: per frequency, pick
/// the relabeling whose posterior time sequences correlate best with global
/// activity centroids, then iterate with refreshed centroids (at most 10
/// rounds). Identity wins ties, so an aligned state passes through
/// unchanged.
pub fn align_permutations(state: &CacgmmState) -> Result<CacgmmState> {
    let k_len = state.components();
    if k_len > 6 {
        return Err(CacgmmError::TooManyComponents(k_len));
    }
    let (t_len, f_len) = (state.frames(), state.freq_bins());
    let perms = permutations(k_len);
    let mut aligned = state.clone();
    for _round in 0..10 {
        // centroid_k(t) = mean over f of the posteriors
        let mut centroids = vec![vec![0.0f64; t_len]; k_len];
        for k in 0..k_len {
            for t in 0..t_len {
                let mut s = 0.0;
                for f in 0..f_len {
                    s += aligned.gamma[[k, t, f]];
                }
                centroids[k][t] = s / f_len as f64;
            }
        }
        let mut changed = false;
        for f in 0..f_len {
            // correlation of each local activity with each centroid
            let mut corr = vec![vec![0.0f64; k_len]; k_len];
            for k in 0..k_len {
                let activity: Vec<f64> = (0..t_len).map(|t| aligned.gamma[[k, t, f]]).collect();
                for (j, centroid) in centroids.iter().enumerate() {
                    corr[k][j] = pearson(&activity, centroid);
                }
            }
            let mut best = &perms[0];
            let mut best_score = f64::NEG_INFINITY;
            for p in &perms {
                let score: f64 = (0..k_len).map(|k| corr[k][p[k]]).sum();
                if score > best_score {
                    best_score = score;
                    best = p;
                }
            }
            if best.iter().enumerate().any(|(i, &v)| i != v) {
                apply_permutation(&mut aligned, f, best);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(aligned)
}

/// Relabel components at frequency `f`: old component k becomes `perm[k]`.
fn apply_permutation(state: &mut CacgmmState, f: usize, perm: &[usize]) {
    let k_len = perm.len();
    let t_len = state.frames();
    let old_alpha: Vec<f64> = (0..k_len).map(|k| state.alpha[[f, k]]).collect();
    let old_shapes: Vec<Array2<C64>> =
        (0..k_len).map(|k| state.shapes[f * k_len + k].clone()).collect();
    let old_gamma: Vec<Vec<f64>> = (0..k_len)
        .map(|k| (0..t_len).map(|t| state.gamma[[k, t, f]]).collect())
        .collect();
    for k in 0..k_len {
        let dst = perm[k];
        state.alpha[[f, dst]] = old_alpha[k];
        state.shapes[f * k_len + dst] = old_shapes[k].clone();
        for t in 0..t_len {
            state.gamma[[dst, t, f]] = old_gamma[k][t];
        }
    }
}

/// Pick the component whose masked frame-energy envelope best matches the
/// recording's envelope on the reference channel. Ties go to the lower
/// index.
pub fn select_speech(s: &Spectrogram, state: &CacgmmState, reference: usize) -> usize {
    let (t_len, f_len) = (s.frames(), s.freq_bins());
    let k_len = state.components();
    let refc = s.channel(reference);
    let mut env_ref = vec![0.0f64; t_len];
    for t in 0..t_len {
        for f in 0..f_len {
            env_ref[t] += refc[[t, f]].norm_sqr();
        }
    }
    let mut best = 0usize;
    let mut best_corr = f64::NEG_INFINITY;
    for k in 0..k_len {
        let mut env = vec![0.0f64; t_len];
        for t in 0..t_len {
            for f in 0..f_len {
                let v = refc[[t, f]].norm() * state.gamma[[k, t, f]];
                env[t] += v * v;
            }
        }
        let c = pearson(&env, &env_ref);
        if c > best_corr {
            best_corr = c;
            best = k;
        }
    }
    best
}

/// The full cleaning stage: fit, align, select the speech component, and
/// apply its posterior as a mask to every channel. Returns the masked
/// spectrogram and the mask itself.
pub fn extract(s: &Spectrogram, cfg: &CacgmmConfig) -> Result<(Spectrogram, Mask)> {
    let state = fit(s, cfg)?;
    extract_with_state(s, &state)
}

/// Extraction from an already-fitted state (alignment and selection happen
/// here).
pub fn extract_with_state(s: &Spectrogram, state: &CacgmmState) -> Result<(Spectrogram, Mask)> {
    let aligned = align_permutations(state)?;
    let speech = select_speech(s, &aligned, 0);
    let (t_len, f_len) = (s.frames(), s.freq_bins());
    let mut mask_values = Array2::<f64>::zeros((t_len, f_len));
    for t in 0..t_len {
        for f in 0..f_len {
            mask_values[[t, f]] = aligned.gamma[[speech, t, f]];
        }
    }
    let mask = Mask::new(mask_values).map_err(|e| CacgmmError::Internal(e.to_string()))?;
    let mut bins = s.bins().clone();
    for c in 0..s.channels() {
        for t in 0..t_len {
            for f in 0..f_len {
                bins[[c, t, f]] *= mask.values()[[t, f]];
            }
        }
    }
    let masked = Spectrogram::new(bins, s.config(), s.sample_rate_hz())?;
    Ok((masked, mask))
}
