//! Multichannel WAV reading/writing and sample-rate conversion.
//!
//! Only RIFF/WAVE with PCM-16 or IEEE-float-32 payloads is handled; that is
//! the entire on-disk surface of the toolkit. PCM-16 samples are scaled by
//! 1/32768 so that the integer range maps onto [-1, 1) and round trips are
//! exact to one quantization step.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV codec: format tag {0:#06x}")]
    UnsupportedCodec(u16),
    #[error("non-finite samples in {0}")]
    NonFiniteSamples(String),
    #[error("cannot write {path}: {source}")]
    UnwritablePath { path: PathBuf, source: io::Error },
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
}

type Result<T> = std::result::Result<T, AudioError>;

/// Sample codec for [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavCodec {
    Pcm16,
    Float32,
}

/// A multichannel time-domain signal: `channels x frames`, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Array2<f64>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Array2<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(AudioError::InvalidWaveform("sample rate must be > 0".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(AudioError::InvalidWaveform("samples must be finite".into()));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    /// Single-channel waveform from a plain vector.
    pub fn from_mono(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        let n = samples.len();
        let arr = Array2::from_shape_vec((1, n), samples)
            .expect("shape (1, n) always matches a vec of length n");
        Self::new(arr, sample_rate_hz)
    }

    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn frames(&self) -> usize {
        self.samples.ncols()
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn channel(&self, m: usize) -> ArrayView1<'_, f64> {
        self.samples.row(m)
    }

    pub fn duration_seconds(&self) -> f64 {
        self.frames() as f64 / self.sample_rate_hz as f64
    }

    /// A new waveform holding only the given channel.
    pub fn extract_channel(&self, m: usize) -> Result<Self> {
        if m >= self.channels() {
            return Err(AudioError::InvalidWaveform(format!(
                "channel {m} out of range for {} channels",
                self.channels()
            )));
        }
        let row = self.samples.row(m).to_owned().insert_axis(ndarray::Axis(0));
        Self::new(row, self.sample_rate_hz)
    }
}

fn read_u16(bytes: &[u8], at: usize) -> Option<u16> {
    bytes.get(at..at + 2).map(|b| u16::from_le_bytes([b[0], b[1]]))
}

fn read_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

struct FmtChunk {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

/// Read a RIFF/WAVE file. PCM-16 samples are scaled by 1/32768; float-32
/// samples pass through unchanged.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            AudioError::FileNotFound(path.to_path_buf())
        } else {
            AudioError::Io { path: path.to_path_buf(), source: e }
        }
    })?;
    let malformed = |msg: &str| AudioError::MalformedHeader(format!("{}: {msg}", path.display()));

    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("not a RIFF/WAVE file"));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(&bytes, pos + 4).ok_or_else(|| malformed("truncated chunk header"))? as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| malformed("chunk extends past end of file"))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(malformed("fmt chunk too small"));
                }
                let mut format_tag = read_u16(body, 0).unwrap();
                if format_tag == 0xFFFE {
                    // WAVE_FORMAT_EXTENSIBLE: real tag lives in the subformat GUID
                    format_tag = read_u16(body, 24).ok_or_else(|| malformed("extensible fmt chunk too small"))?;
                }
                fmt = Some(FmtChunk {
                    format_tag,
                    channels: read_u16(body, 2).unwrap(),
                    sample_rate: read_u32(body, 4).unwrap(),
                    bits_per_sample: read_u16(body, 14).unwrap(),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word-aligned
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| malformed("missing fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("missing data chunk"))?;
    if fmt.channels == 0 {
        return Err(malformed("zero channels"));
    }
    if fmt.sample_rate == 0 {
        return Err(malformed("zero sample rate"));
    }

    let channels = fmt.channels as usize;
    let samples = match (fmt.format_tag, fmt.bits_per_sample) {
        (1, 16) => {
            let frame_bytes = 2 * channels;
            if data.len() % frame_bytes != 0 {
                return Err(malformed("data chunk not a whole number of frames"));
            }
            let frames = data.len() / frame_bytes;
            let mut arr = Array2::<f64>::zeros((channels, frames));
            for t in 0..frames {
                for c in 0..channels {
                    let at = (t * channels + c) * 2;
                    let v = i16::from_le_bytes([data[at], data[at + 1]]);
                    arr[[c, t]] = v as f64 / 32768.0;
                }
            }
            arr
        }
        (3, 32) => {
            let frame_bytes = 4 * channels;
            if data.len() % frame_bytes != 0 {
                return Err(malformed("data chunk not a whole number of frames"));
            }
            let frames = data.len() / frame_bytes;
            let mut arr = Array2::<f64>::zeros((channels, frames));
            for t in 0..frames {
                for c in 0..channels {
                    let at = (t * channels + c) * 4;
                    let v = f32::from_le_bytes([data[at], data[at + 1], data[at + 2], data[at + 3]]);
                    if !v.is_finite() {
                        return Err(AudioError::NonFiniteSamples(path.display().to_string()));
                    }
                    arr[[c, t]] = v as f64;
                }
            }
            arr
        }
        (tag, _) if tag != 1 && tag != 3 => return Err(AudioError::UnsupportedCodec(tag)),
        _ => {
            return Err(malformed(&format!(
                "unsupported bit depth {} for format tag {}",
                fmt.bits_per_sample, fmt.format_tag
            )))
        }
    };

    Waveform::new(samples, fmt.sample_rate)
}

/// Write a waveform as RIFF/WAVE. PCM-16 clamps to [-1, 1 - 2^-15] and
/// quantizes round-half-away-from-zero; float-32 casts each sample.
pub fn write_wav(path: impl AsRef<Path>, w: &Waveform, codec: WavCodec) -> Result<()> {
    let path = path.as_ref();
    let channels = w.channels();
    let frames = w.frames();
    let (format_tag, bits): (u16, u16) = match codec {
        WavCodec::Pcm16 => (1, 16),
        WavCodec::Float32 => (3, 32),
    };
    let bytes_per_sample = (bits / 8) as usize;
    let data_len = channels * frames * bytes_per_sample;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format_tag.to_le_bytes());
    out.extend_from_slice(&(channels as u16).to_le_bytes());
    out.extend_from_slice(&w.sample_rate_hz().to_le_bytes());
    let byte_rate = w.sample_rate_hz() as usize * channels * bytes_per_sample;
    out.extend_from_slice(&(byte_rate as u32).to_le_bytes());
    out.extend_from_slice(&((channels * bytes_per_sample) as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for t in 0..frames {
        for c in 0..channels {
            let v = w.samples()[[c, t]];
            match codec {
                WavCodec::Pcm16 => {
                    let clamped = v.clamp(-1.0, 1.0 - 1.0 / 32768.0);
                    let q = (clamped * 32768.0).round() as i16;
                    out.extend_from_slice(&q.to_le_bytes());
                }
                WavCodec::Float32 => {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
    }
    write_atomic(path, &out)
}

/// Write `bytes` to a temp file in the same directory, then rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let err = |source| AudioError::UnwritablePath { path: path.to_path_buf(), source };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(err)?;
    fs::rename(&tmp, path).map_err(err)
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Modified Bessel function I0, power series.
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..64 {
        term *= (half / m as f64) * (half / m as f64);
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    sum
}

const KAISER_BETA: f64 = 8.6;

pub(crate) fn kaiser(u: f64) -> f64 {
    if u.abs() > 1.0 {
        0.0
    } else {
        bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / bessel_i0(KAISER_BETA)
    }
}

/// Windowed-sinc resampler: Kaiser window, 32 taps per output phase, cutoff
/// at 0.9x the lower of the two Nyquist frequencies. Tap sums are normalized
/// per output sample so DC passes exactly.
pub fn resample(w: &Waveform, target_rate_hz: u32) -> Result<Waveform> {
    if target_rate_hz == 0 {
        return Err(AudioError::InvalidWaveform("target rate must be > 0".into()));
    }
    if target_rate_hz == w.sample_rate_hz() {
        return Ok(w.clone());
    }
    let src = w.sample_rate_hz() as f64;
    let tgt = target_rate_hz as f64;
    let ratio = tgt / src;
    let in_len = w.frames();
    let out_len = (in_len as f64 * ratio).round() as usize;
    let cutoff = 0.45 * ratio.min(1.0); // cycles per input sample
    let half_support = 16.0 * (src / tgt).max(1.0); // input samples

    let mut out = Array2::<f64>::zeros((w.channels(), out_len));
    for ch in 0..w.channels() {
        let x = w.channel(ch);
        for n in 0..out_len {
            let center = n as f64 / ratio;
            let j0 = ((center - half_support).ceil() as i64).max(0);
            let j1 = ((center + half_support).floor() as i64).min(in_len as i64 - 1);
            let mut acc = 0.0;
            let mut norm = 0.0;
            for j in j0..=j1 {
                let d = j as f64 - center;
                let wgt = sinc(2.0 * cutoff * d) * kaiser(d / half_support);
                acc += x[j as usize] * wgt;
                norm += wgt;
            }
            out[[ch, n]] = if norm.abs() > 1e-12 { acc / norm } else { 0.0 };
        }
    }
    Waveform::new(out, target_rate_hz)
}
