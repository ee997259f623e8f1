//! Short-time Fourier transform and its inverse.
//!
//! Framing is the 32 ms window / 8 ms hop configuration (512/128 samples at
//! 16 kHz) with a periodic hann window, which satisfies constant overlap-add
//! at 75% overlap. Spectra are one-sided with F = fft_len/2 + 1 bins; frame
//! energy relates to bin energy with the usual doubling of the interior bins.

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::audio_io::Waveform;

type C64 = Complex64;

#[derive(Debug, Error)]
pub enum StftError {
    #[error("invalid STFT config: {0}")]
    BadConfig(String),
    #[error("signal too short: {len} samples < one window of {window}")]
    SignalTooShort { len: usize, window: usize },
    #[error("shape inconsistent with config: {0}")]
    BadShape(String),
    #[error("non-finite spectrogram bins")]
    NonFinite,
}

type Result<T> = std::result::Result<T, StftError>;

/// Analysis/synthesis framing. `fft_len` equals `window_len`; the window is
/// a periodic hann.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    window_len: usize,
    hop: usize,
}

impl StftConfig {
    pub fn new(window_len: usize, hop: usize) -> Result<Self> {
        if window_len == 0 || !window_len.is_power_of_two() {
            return Err(StftError::BadConfig(format!(
                "window_len {window_len} must be a power of two"
            )));
        }
        if hop == 0 || window_len % hop != 0 {
            return Err(StftError::BadConfig(format!(
                "hop {hop} must divide window_len {window_len}"
            )));
        }
        Ok(Self { window_len, hop })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn fft_len(&self) -> usize {
        self.window_len
    }

    /// One-sided bin count.
    pub fn freq_bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// Frame count for a signal of `len` samples; no zero padding past the
    /// last full frame.
    pub fn num_frames(&self, len: usize) -> Result<usize> {
        if len < self.window_len {
            return Err(StftError::SignalTooShort { len, window: self.window_len });
        }
        Ok(1 + (len - self.window_len) / self.hop)
    }

    /// Periodic hann window of length `window_len`.
    pub fn window(&self) -> Array1<f64> {
        let n = self.window_len as f64;
        Array1::from_iter((0..self.window_len).map(|i| {
            0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n).cos())
        }))
    }
}

impl Default for StftConfig {
    /// 32 ms window, 8 ms hop at 16 kHz.
    fn default() -> Self {
        Self { window_len: 512, hop: 128 }
    }
}

/// One-sided complex STFT tensor, `channels x frames x bins`.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    bins: Array3<C64>,
    config: StftConfig,
    sample_rate_hz: u32,
}

impl Spectrogram {
    pub fn new(bins: Array3<C64>, config: StftConfig, sample_rate_hz: u32) -> Result<Self> {
        if bins.dim().2 != config.freq_bins() {
            return Err(StftError::BadShape(format!(
                "expected {} frequency bins, got {}",
                config.freq_bins(),
                bins.dim().2
            )));
        }
        if bins.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(StftError::NonFinite);
        }
        Ok(Self { bins, config, sample_rate_hz })
    }

    pub fn bins(&self) -> &Array3<C64> {
        &self.bins
    }

    pub fn into_bins(self) -> Array3<C64> {
        self.bins
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn channels(&self) -> usize {
        self.bins.dim().0
    }

    pub fn frames(&self) -> usize {
        self.bins.dim().1
    }

    pub fn freq_bins(&self) -> usize {
        self.bins.dim().2
    }

    /// `frames x bins` view of one channel.
    pub fn channel(&self, m: usize) -> ArrayView2<'_, C64> {
        self.bins.index_axis(Axis(0), m)
    }

    /// A new spectrogram holding only the given channel.
    pub fn extract_channel(&self, m: usize) -> Result<Self> {
        if m >= self.channels() {
            return Err(StftError::BadShape(format!(
                "channel {m} out of range for {} channels",
                self.channels()
            )));
        }
        let ch = self.channel(m).to_owned().insert_axis(Axis(0));
        Self::new(ch, self.config, self.sample_rate_hz)
    }

    /// Sample indices covered by the full overlap-add sum, where synthesis
    /// reconstructs analysis input exactly.
    pub fn interior_sample_range(&self) -> std::ops::Range<usize> {
        let w = self.config.window_len();
        let h = self.config.hop();
        let t = self.frames();
        if t < w / h {
            return 0..0;
        }
        (w - h)..((t - 1) * h + h)
    }
}

/// Forward STFT of every channel. T = 1 + floor((len - window)/hop); each
/// frame is hann-windowed before the FFT.
pub fn analyze(w: &Waveform, cfg: &StftConfig) -> Result<Spectrogram> {
    let frames = cfg.num_frames(w.frames())?;
    let n = cfg.fft_len();
    let f_bins = cfg.freq_bins();
    let window = cfg.window();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);

    let mut bins = Array3::<C64>::zeros((w.channels(), frames, f_bins));
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for ch in 0..w.channels() {
        let x = w.channel(ch);
        for t in 0..frames {
            let start = t * cfg.hop();
            for j in 0..n {
                buf[j] = C64::new(x[start + j] * window[j], 0.0);
            }
            fft.process(&mut buf);
            for k in 0..f_bins {
                bins[[ch, t, k]] = buf[k];
            }
        }
    }
    Spectrogram::new(bins, *cfg, w.sample_rate_hz())
}

/// Inverse STFT by weighted overlap-add with the analysis window. Interior
/// samples satisfy perfect reconstruction; edges are best effort.
pub fn synthesize(s: &Spectrogram) -> Result<Waveform> {
    let cfg = s.config();
    let n = cfg.fft_len();
    let f_bins = cfg.freq_bins();
    let frames = s.frames();
    let window = cfg.window();
    let out_len = (frames - 1) * cfg.hop() + n;

    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(n);

    let mut acc = Array2::<f64>::zeros((s.channels(), out_len));
    let mut wsum = vec![0.0f64; out_len];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    let scale = 1.0 / n as f64;
    for ch in 0..s.channels() {
        for t in 0..frames {
            buf[0] = s.bins[[ch, t, 0]];
            for k in 1..f_bins - 1 {
                buf[k] = s.bins[[ch, t, k]];
                buf[n - k] = s.bins[[ch, t, k]].conj();
            }
            buf[n / 2] = s.bins[[ch, t, f_bins - 1]];
            ifft.process(&mut buf);
            let start = t * cfg.hop();
            for j in 0..n {
                acc[[ch, start + j]] += buf[j].re * scale * window[j];
                if ch == 0 {
                    wsum[start + j] += window[j] * window[j];
                }
            }
        }
    }
    for ch in 0..s.channels() {
        for j in 0..out_len {
            acc[[ch, j]] = if wsum[j] > 1e-12 { acc[[ch, j]] / wsum[j] } else { 0.0 };
        }
    }
    Waveform::new(acc, s.sample_rate_hz()).map_err(|_| StftError::NonFinite)
}
