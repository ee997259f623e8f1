//! The full inference chain: first mask, mask-based MVDR stacked over every
//! reference channel, a second mask on the beamformed stack, and the alpha
//! remix gate blending beamformer output with the masked output. Also the
//! training-side entry point that cleans a recording into a pseudo-target
//! with the spatial clustering stage.
//!
//! Every intermediate product is returned alongside the waveform so tests
//! and the CLI can inspect each stage.

use ndarray::Array3;
use num_complex::Complex64;
use thiserror::Error;

use crate::audio_io::{AudioError, Waveform};
use crate::beamform::{self, BeamformError, CovMode, CovariancePair};
use crate::cacgmm::{self, CacgmmConfig, CacgmmError};
use crate::maskers::{self, Mask, MaskError, MaskProvider};
use crate::stft::{self, Spectrogram, StftConfig, StftError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("remix gate alpha {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("enhancement needs at least 2 channels, got {0}")]
    TooFewChannels(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Stft(#[from] StftError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Beamform(#[from] BeamformError),
    #[error(transparent)]
    Cacgmm(#[from] CacgmmError),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

type Result<T> = std::result::Result<T, PipelineError>;

/// Configuration of one enhancement run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Remix gate: 1.0 is pure beamformer, 0.0 is pure masked output.
    pub alpha: f64,
    /// Reference channel for the one-hot selector and the final output.
    pub reference: usize,
    pub first_masker: MaskProvider,
    pub second_masker: MaskProvider,
    pub cov_mode: CovMode,
    pub stft: StftConfig,
}

/// Every intermediate product of [`enhance`].
#[derive(Debug, Clone)]
pub struct EnhanceArtifacts {
    pub mixture_spec: Spectrogram,
    pub first_mask: Mask,
    pub covariances: CovariancePair,
    /// Beamformer output stacked over all reference channels, `M x T x F`.
    pub beamformed: Spectrogram,
    pub second_mask: Mask,
    /// Second mask applied to the reference beamformer channel.
    pub masked: Spectrogram,
    /// The alpha blend that is synthesized into the output waveform.
    pub remixed: Spectrogram,
}

/// `alpha * bf + (1 - alpha) * masked`, elementwise.
pub fn remix(bf: &Spectrogram, masked: &Spectrogram, alpha: f64) -> Result<Spectrogram> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(PipelineError::AlphaOutOfRange(alpha));
    }
    if bf.bins().dim() != masked.bins().dim() {
        return Err(PipelineError::ShapeMismatch(format!(
            "remix inputs {:?} vs {:?}",
            bf.bins().dim(),
            masked.bins().dim()
        )));
    }
    let bins = bf.bins() * Complex64::new(alpha, 0.0)
        + masked.bins() * Complex64::new(1.0 - alpha, 0.0);
    Ok(Spectrogram::new(bins, bf.config(), bf.sample_rate_hz())?)
}

fn mask_spectrogram(s: &Spectrogram, mask: &Mask) -> Result<Spectrogram> {
    if mask.shape() != (s.frames(), s.freq_bins()) {
        return Err(PipelineError::ShapeMismatch(format!(
            "mask {:?} vs spectrogram frames/bins {:?}",
            mask.shape(),
            (s.frames(), s.freq_bins())
        )));
    }
    let mut bins = Array3::<Complex64>::zeros(s.bins().dim());
    for c in 0..s.channels() {
        for t in 0..s.frames() {
            for f in 0..s.freq_bins() {
                bins[[c, t, f]] = s.bins()[[c, t, f]] * mask.values()[[t, f]];
            }
        }
    }
    Ok(Spectrogram::new(bins, s.config(), s.sample_rate_hz())?)
}

#[cfg(debug_assertions)]
fn debug_check_covariances(cov: &CovariancePair) {
    for f in 0..cov.freq_bins() {
        for mat in [&cov.phi_s[f], &cov.phi_n[f]] {
            let m = mat.nrows();
            for i in 0..m {
                for j in 0..m {
                    debug_assert!(
                        (mat[[i, j]] - mat[[j, i]].conj()).norm() < 1e-9,
                        "covariance lost Hermitian symmetry at bin {f}"
                    );
                }
            }
        }
    }
}

/// Run the whole chain on a multichannel waveform. Returns the enhanced
/// single-channel waveform and all stage artifacts.
pub fn enhance(y: &Waveform, cfg: &PipelineConfig) -> Result<(Waveform, EnhanceArtifacts)> {
    if y.channels() < 2 {
        return Err(PipelineError::TooFewChannels(y.channels()));
    }
    if !(0.0..=1.0).contains(&cfg.alpha) {
        return Err(PipelineError::AlphaOutOfRange(cfg.alpha));
    }
    let mixture_spec = stft::analyze(y, &cfg.stft)?;
    let first_mask = maskers::provide(&cfg.first_masker, &mixture_spec)?;
    let covariances = beamform::estimate_covariances(&mixture_spec, &first_mask, cfg.cov_mode)?;
    #[cfg(debug_assertions)]
    debug_check_covariances(&covariances);
    let beamformed = beamform::stack_reference_channels(&mixture_spec, &covariances)?;
    let second_mask = maskers::provide(&cfg.second_masker, &beamformed)?;
    let bf_ref = beamformed.extract_channel(cfg.reference)?;
    let masked = mask_spectrogram(&bf_ref, &second_mask)?;
    let remixed = remix(&bf_ref, &masked, cfg.alpha)?;
    let out = stft::synthesize(&remixed)?;
    Ok((
        out,
        EnhanceArtifacts {
            mixture_spec,
            first_mask,
            covariances,
            beamformed,
            second_mask,
            masked,
            remixed,
        },
    ))
}

/// Training-side target cleaning: spatial clustering extracts the speech
/// component and the reference channel of the masked spectrogram is
/// synthesized back to a waveform.
pub fn make_target(
    recording: &Waveform,
    stft_cfg: &StftConfig,
    cacgmm_cfg: &CacgmmConfig,
    reference: usize,
) -> Result<Waveform> {
    if recording.channels() < 2 {
        return Err(PipelineError::TooFewChannels(recording.channels()));
    }
    let spec = stft::analyze(recording, stft_cfg)?;
    let (cleaned, _mask) = cacgmm::extract(&spec, cacgmm_cfg)?;
    let ref_ch = cleaned.extract_channel(reference)?;
    Ok(stft::synthesize(&ref_ch)?)
}

/// Same as [`make_target`] but also returns the extraction mask (the CLI
/// writes it next to the output).
pub fn make_target_with_mask(
    recording: &Waveform,
    stft_cfg: &StftConfig,
    cacgmm_cfg: &CacgmmConfig,
    reference: usize,
) -> Result<(Waveform, Mask)> {
    if recording.channels() < 2 {
        return Err(PipelineError::TooFewChannels(recording.channels()));
    }
    let spec = stft::analyze(recording, stft_cfg)?;
    let (cleaned, mask) = cacgmm::extract(&spec, cacgmm_cfg)?;
    let ref_ch = cleaned.extract_channel(reference)?;
    Ok((stft::synthesize(&ref_ch)?, mask))
}
