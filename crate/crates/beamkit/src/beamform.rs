//! Mask-based MVDR beamforming.
//!
//! Spatial covariances come from mask-weighted outer products of the STFT
//! channel vectors; the distortionless weights are
//! `w_f = (Phi_n^{-1} Phi_s / trace(Phi_n^{-1} Phi_s)) u` with `u` a one-hot
//! reference selector. Two noise-covariance estimators are available: the
//! complement-mask average and the subtraction of the speech covariance from
//! the plain time average. Shifting `u` across all channels reuses the same
//! ratio matrix, which is how the stacked multichannel output is produced
//! without extra solves.

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{self, Cholesky};
use crate::maskers::Mask;
use crate::stft::{Spectrogram, StftError};

type C64 = Complex64;

#[derive(Debug, Error)]
pub enum BeamformError {
    #[error("mask shape {mask:?} does not match spectrogram frames/bins {spec:?}")]
    ShapeMismatch { mask: (usize, usize), spec: (usize, usize) },
    #[error("non-finite covariance entries at frequency bin {0}")]
    NonFinite(usize),
    #[error("reference channel {reference} out of range for {channels} channels")]
    ReferenceOutOfRange { reference: usize, channels: usize },
    #[error(transparent)]
    Stft(#[from] StftError),
}

type Result<T> = std::result::Result<T, BeamformError>;

/// Which formula estimates the noise covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovMode {
    /// `Phi_n = sum_t (1 - M) Y Y^H / sum_t (1 - M)`
    #[default]
    Complement,
    /// `Phi_n = (1/T) sum_t Y Y^H - Phi_s`
    Subtract,
}

const NOISE_LOADING: f64 = 1e-6;
const MASS_FLOOR: f64 = 1e-8;
const TRACE_FLOOR: f64 = 1e-10;

/// Per-frequency speech and noise covariance matrices.
#[derive(Debug, Clone)]
pub struct CovariancePair {
    /// Speech covariances, one `M x M` Hermitian PSD matrix per bin.
    pub phi_s: Vec<Array2<C64>>,
    /// Noise covariances, diagonally loaded.
    pub phi_n: Vec<Array2<C64>>,
}

impl CovariancePair {
    pub fn freq_bins(&self) -> usize {
        self.phi_s.len()
    }

    pub fn channels(&self) -> usize {
        self.phi_s[0].nrows()
    }
}

/// Per-frequency beamformer weights for one reference channel.
#[derive(Debug, Clone)]
pub struct BeamformerSolution {
    /// `F x M` complex weights.
    pub weights: Array2<C64>,
    pub reference: usize,
}

/// Mask-weighted covariance estimation. Frequencies where the mask mass
/// falls below 1e-8 get `Phi_s = 0` and the plain time average as noise
/// covariance ("no speech here"); the complement mass degenerating gets the
/// same time-average fallback for the noise side.
pub fn estimate_covariances(y: &Spectrogram, mask: &Mask, mode: CovMode) -> Result<CovariancePair> {
    let (t_len, f_len) = (y.frames(), y.freq_bins());
    if mask.shape() != (t_len, f_len) {
        return Err(BeamformError::ShapeMismatch { mask: mask.shape(), spec: (t_len, f_len) });
    }
    let m = y.channels();
    let mut phi_s = Vec::with_capacity(f_len);
    let mut phi_n = Vec::with_capacity(f_len);
    let mut acc_s = Array2::<C64>::zeros((m, m));
    let mut acc_n = Array2::<C64>::zeros((m, m));
    let mut acc_all = Array2::<C64>::zeros((m, m));
    for f in 0..f_len {
        acc_s.fill(C64::new(0.0, 0.0));
        acc_n.fill(C64::new(0.0, 0.0));
        acc_all.fill(C64::new(0.0, 0.0));
        let mut mass_s = 0.0f64;
        let mut mass_n = 0.0f64;
        for t in 0..t_len {
            let w = mask.values()[[t, f]];
            mass_s += w;
            mass_n += 1.0 - w;
            for i in 0..m {
                let yi = y.bins()[[i, t, f]];
                for j in 0..m {
                    let o = yi * y.bins()[[j, t, f]].conj();
                    acc_s[[i, j]] += o * w;
                    acc_n[[i, j]] += o * (1.0 - w);
                    acc_all[[i, j]] += o;
                }
            }
        }
        let avg = &acc_all / t_len as f64;
        let (s, n_pre) = if mass_s < MASS_FLOOR {
            (Array2::<C64>::zeros((m, m)), avg.clone())
        } else {
            let s = &acc_s / mass_s;
            let n_pre = match mode {
                CovMode::Complement => {
                    if mass_n < MASS_FLOOR {
                        avg.clone()
                    } else {
                        &acc_n / mass_n
                    }
                }
                CovMode::Subtract => &avg - &s,
            };
            (s, n_pre)
        };
        let s = linalg::hermitize(&s);
        let mut n = linalg::hermitize(&n_pre);
        let load = linalg::trace(&n.view()).re / m as f64 * NOISE_LOADING;
        for i in 0..m {
            n[[i, i]] += C64::new(load, 0.0);
        }
        phi_s.push(s);
        phi_n.push(n);
    }
    Ok(CovariancePair { phi_s, phi_n })
}

/// `Phi_n^{-1} Phi_s` and its trace. Cholesky solve when the noise
/// covariance is PD, pseudo-inverse fallback otherwise.
fn ratio_and_trace(phi_n: &Array2<C64>, phi_s: &Array2<C64>) -> (Array2<C64>, C64) {
    let g = match Cholesky::new(&phi_n.view()) {
        Some(ch) => ch.solve_matrix(&phi_s.view()),
        None => linalg::pinv_hermitian(&phi_n.view(), 1e-12).dot(phi_s),
    };
    let tr = linalg::trace(&g.view());
    (g, tr)
}

fn check_finite(cov: &CovariancePair) -> Result<()> {
    for f in 0..cov.freq_bins() {
        let ok = cov.phi_s[f]
            .iter()
            .chain(cov.phi_n[f].iter())
            .all(|v| v.re.is_finite() && v.im.is_finite());
        if !ok {
            return Err(BeamformError::NonFinite(f));
        }
    }
    Ok(())
}

/// Distortionless weights for one reference channel. Frequencies whose
/// ratio trace vanishes pass the reference channel through unchanged.
pub fn mvdr_weights(cov: &CovariancePair, reference: usize) -> Result<BeamformerSolution> {
    check_finite(cov)?;
    let m = cov.channels();
    if reference >= m {
        return Err(BeamformError::ReferenceOutOfRange { reference, channels: m });
    }
    let f_len = cov.freq_bins();
    let mut weights = Array2::<C64>::zeros((f_len, m));
    for f in 0..f_len {
        let (g, tr) = ratio_and_trace(&cov.phi_n[f], &cov.phi_s[f]);
        if tr.re < TRACE_FLOOR || !tr.re.is_finite() {
            weights[[f, reference]] = C64::new(1.0, 0.0);
        } else {
            for i in 0..m {
                weights[[f, i]] = g[[i, reference]] / tr;
            }
        }
    }
    Ok(BeamformerSolution { weights, reference })
}

/// `BF_{t,f} = w_f^H Y_{t,f}` — a single-channel spectrogram.
pub fn apply(y: &Spectrogram, sol: &BeamformerSolution) -> Result<Spectrogram> {
    let m = y.channels();
    if sol.weights.dim() != (y.freq_bins(), m) {
        return Err(BeamformError::ShapeMismatch {
            mask: sol.weights.dim(),
            spec: (y.freq_bins(), m),
        });
    }
    let (t_len, f_len) = (y.frames(), y.freq_bins());
    let mut bins = Array3::<C64>::zeros((1, t_len, f_len));
    for t in 0..t_len {
        for f in 0..f_len {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..m {
                acc += sol.weights[[f, i]].conj() * y.bins()[[i, t, f]];
            }
            bins[[0, t, f]] = acc;
        }
    }
    Ok(Spectrogram::new(bins, y.config(), y.sample_rate_hz())?)
}

/// Beamform once per reference channel by shifting the one-hot selector:
/// output channel m equals `apply(y, mvdr_weights(cov, m))`, with the ratio
/// matrix and trace computed once per frequency and reused.
pub fn stack_reference_channels(y: &Spectrogram, cov: &CovariancePair) -> Result<Spectrogram> {
    check_finite(cov)?;
    let m = y.channels();
    if cov.channels() != m || cov.freq_bins() != y.freq_bins() {
        return Err(BeamformError::ShapeMismatch {
            mask: (cov.freq_bins(), cov.channels()),
            spec: (y.freq_bins(), m),
        });
    }
    let (t_len, f_len) = (y.frames(), y.freq_bins());
    let mut bins = Array3::<C64>::zeros((m, t_len, f_len));
    for f in 0..f_len {
        let (g, tr) = ratio_and_trace(&cov.phi_n[f], &cov.phi_s[f]);
        let degenerate = tr.re < TRACE_FLOOR || !tr.re.is_finite();
        for r in 0..m {
            for t in 0..t_len {
                let mut acc = C64::new(0.0, 0.0);
                if degenerate {
                    acc = y.bins()[[r, t, f]];
                } else {
                    for i in 0..m {
                        acc += (g[[i, r]] / tr).conj() * y.bins()[[i, t, f]];
                    }
                }
                bins[[r, t, f]] = acc;
            }
        }
    }
    Ok(Spectrogram::new(bins, y.config(), y.sample_rate_hz())?)
}
