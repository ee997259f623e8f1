//! Time-frequency masks and the pluggable providers that produce them:
//! oracle ideal-ratio masks from ground-truth stems, cACGMM posteriors, and
//! masks loaded from an external file.
//!
//! The mask file format "MSK1" is bytes 0-3 ASCII `MSK1`, bytes 4-7 u32 LE
//! frame count T, bytes 8-11 u32 LE bin count F, then T*F IEEE-754 float-32
//! LE values, row-major with t outer.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use thiserror::Error;

use crate::audio_io::Waveform;
use crate::cacgmm::{self, CacgmmConfig, CacgmmError};
use crate::stft::{self, Spectrogram, StftError};

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("mask shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: (usize, usize), found: (usize, usize) },
    #[error("bad mask file magic: expected \"MSK1\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("truncated mask payload: header declares {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("mask value {0} outside [0, 1]")]
    ValueOutOfRange(f64),
    #[error("non-finite mask value")]
    NonFinite,
    #[error("mask file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Cacgmm(#[from] CacgmmError),
    #[error(transparent)]
    Stft(#[from] StftError),
}

type Result<T> = std::result::Result<T, MaskError>;

/// Real `T x F` mask with every value in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    values: Array2<f64>,
}

impl Mask {
    /// Validates range and finiteness. Values within 1e-6 of [0, 1] are
    /// clamped (float round-off from external tools); anything further out
    /// is rejected.
    pub fn new(mut values: Array2<f64>) -> Result<Self> {
        for v in values.iter_mut() {
            if !v.is_finite() {
                return Err(MaskError::NonFinite);
            }
            if *v < -1e-6 || *v > 1.0 + 1e-6 {
                return Err(MaskError::ValueOutOfRange(*v));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn freq_bins(&self) -> usize {
        self.values.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.frames(), self.freq_bins())
    }
}

/// Where a pipeline stage gets its mask.
#[derive(Debug, Clone)]
pub enum MaskProvider {
    /// Ideal ratio mask from ground-truth stems.
    Oracle { speech: Waveform, noise: Waveform, channel: usize },
    /// Posterior of the selected cACGMM speech component.
    Cacgmm(CacgmmConfig),
    /// Fixed mask loaded from an MSK1 file.
    File(PathBuf),
}

/// |S| / (|S| + |N| + 1e-12) on the chosen channel.
pub fn oracle_irm(speech: &Spectrogram, noise: &Spectrogram, channel: usize) -> Result<Mask> {
    let expected = (speech.frames(), speech.freq_bins());
    let found = (noise.frames(), noise.freq_bins());
    if expected != found {
        return Err(MaskError::ShapeMismatch { expected, found });
    }
    let s = speech.channel(channel);
    let n = noise.channel(channel);
    let mut values = Array2::<f64>::zeros(expected);
    for t in 0..expected.0 {
        for f in 0..expected.1 {
            let sm = s[[t, f]].norm();
            let nm = n[[t, f]].norm();
            values[[t, f]] = sm / (sm + nm + 1e-12);
        }
    }
    Mask::new(values)
}

/// Produce a mask for the spectrogram `y` according to the provider kind.
pub fn provide(p: &MaskProvider, y: &Spectrogram) -> Result<Mask> {
    match p {
        MaskProvider::Oracle { speech, noise, channel } => {
            let cfg = y.config();
            let s = stft::analyze(speech, &cfg)?;
            let n = stft::analyze(noise, &cfg)?;
            let expected = (y.frames(), y.freq_bins());
            let found = (s.frames(), s.freq_bins());
            if expected != found {
                return Err(MaskError::ShapeMismatch { expected, found });
            }
            oracle_irm(&s, &n, *channel)
        }
        MaskProvider::Cacgmm(cfg) => {
            let (_, mask) = cacgmm::extract(y, cfg)?;
            Ok(mask)
        }
        MaskProvider::File(path) => {
            let mask = read_mask(path)?;
            let expected = (y.frames(), y.freq_bins());
            if mask.shape() != expected {
                return Err(MaskError::ShapeMismatch { expected, found: mask.shape() });
            }
            Ok(mask)
        }
    }
}

pub fn write_mask(path: impl AsRef<Path>, m: &Mask) -> Result<()> {
    let path = path.as_ref();
    let (t, f) = m.shape();
    let mut bytes = Vec::with_capacity(12 + 4 * t * f);
    bytes.extend_from_slice(b"MSK1");
    bytes.extend_from_slice(&(t as u32).to_le_bytes());
    bytes.extend_from_slice(&(f as u32).to_le_bytes());
    for ti in 0..t {
        for fi in 0..f {
            bytes.extend_from_slice(&(m.values[[ti, fi]] as f32).to_le_bytes());
        }
    }
    crate::audio_io::write_atomic(path, &bytes)
        .map_err(|e| MaskError::Io { path: path.to_path_buf(), source: io::Error::other(e) })
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            MaskError::FileNotFound(path.to_path_buf())
        } else {
            MaskError::Io { path: path.to_path_buf(), source: e }
        }
    })?;
    if bytes.len() < 4 || &bytes[0..4] != b"MSK1" {
        let mut magic = [0u8; 4];
        let n = bytes.len().min(4);
        magic[..n].copy_from_slice(&bytes[..n]);
        return Err(MaskError::BadMagic(magic));
    }
    if bytes.len() < 12 {
        return Err(MaskError::Truncated { expected: 12, found: bytes.len() });
    }
    let t = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let f = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let payload = t
        .checked_mul(f)
        .and_then(|n| n.checked_mul(4))
        .ok_or(MaskError::Truncated { expected: usize::MAX, found: bytes.len() - 12 })?;
    if bytes.len() - 12 < payload {
        return Err(MaskError::Truncated { expected: payload, found: bytes.len() - 12 });
    }
    let mut values = Array2::<f64>::zeros((t, f));
    for ti in 0..t {
        for fi in 0..f {
            let at = 12 + (ti * f + fi) * 4;
            let v = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
            values[[ti, fi]] = v as f64;
        }
    }
    Mask::new(values)
}
