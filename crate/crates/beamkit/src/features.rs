//! Spectro-spatial input features: log power spectrogram of the reference
//! channel plus sin/cos inter-channel phase differences against it.

use ndarray::{Array2, Array3};
use thiserror::Error;

use crate::stft::Spectrogram;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("channel {channel} out of range for {channels} channels")]
    ChannelOutOfRange { channel: usize, channels: usize },
    #[error("IPD features need at least 2 channels, got {0}")]
    TooFewChannels(usize),
}

type Result<T> = std::result::Result<T, FeatureError>;

const LOG_FLOOR: f64 = 1e-12;

/// Stacked features, `C x T x F` with C = 1 + 2*(M-1): log power first,
/// then cos(IPD), sin(IPD) pairs for each non-reference channel in
/// ascending channel order.
#[derive(Debug, Clone)]
pub struct FeatureTensor {
    pub values: Array3<f64>,
    pub reference_channel: usize,
}

/// ln(|Y|^2 + 1e-12) of one channel.
pub fn log_power(s: &Spectrogram, channel: usize) -> Result<Array2<f64>> {
    if channel >= s.channels() {
        return Err(FeatureError::ChannelOutOfRange { channel, channels: s.channels() });
    }
    Ok(s.channel(channel).mapv(|v| (v.norm_sqr() + LOG_FLOOR).ln()))
}

/// Log power of the reference channel plus cos/sin IPD for every other
/// channel. Zero-magnitude bins take IPD = 0 (cos = 1, sin = 0).
pub fn ipd_features(s: &Spectrogram, reference: usize) -> Result<FeatureTensor> {
    let m = s.channels();
    if m < 2 {
        return Err(FeatureError::TooFewChannels(m));
    }
    if reference >= m {
        return Err(FeatureError::ChannelOutOfRange { channel: reference, channels: m });
    }
    let (t, f) = (s.frames(), s.freq_bins());
    let mut values = Array3::<f64>::zeros((1 + 2 * (m - 1), t, f));
    values
        .index_axis_mut(ndarray::Axis(0), 0)
        .assign(&log_power(s, reference)?);
    let refc = s.channel(reference);
    let mut row = 1;
    for ch in (0..m).filter(|&ch| ch != reference) {
        let other = s.channel(ch);
        for ti in 0..t {
            for fi in 0..f {
                let a = other[[ti, fi]];
                let b = refc[[ti, fi]];
                let (cos_ipd, sin_ipd) = if a.norm() == 0.0 || b.norm() == 0.0 {
                    (1.0, 0.0)
                } else {
                    let ipd = a.arg() - b.arg();
                    (ipd.cos(), ipd.sin())
                };
                values[[row, ti, fi]] = cos_ipd;
                values[[row + 1, ti, fi]] = sin_ipd;
            }
        }
        row += 2;
    }
    Ok(FeatureTensor { values, reference_channel: reference })
}
