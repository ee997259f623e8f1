//! beamkit: multichannel speech denoising building blocks.
//!
//! The toolkit covers two workflows. The training-side cleaning stage fits a
//! complex angular central Gaussian mixture model per frequency to pull a
//! low-noise pseudo-target out of a multichannel recording. The inference
//! chain estimates a time-frequency mask, beamforms with mask-based MVDR
//! weights stacked over every reference channel, masks the beamformed
//! output, and blends the two with a remix gate. Synthetic anechoic scenes
//! and objective metrics make both ends verifiable on plain WAV files.

pub mod audio_io;
pub mod beamform;
pub mod cacgmm;
pub mod cli;
pub mod features;
mod linalg;
pub mod maskers;
pub mod metrics;
pub mod pipeline;
pub mod scenegen;
pub mod stft;

pub use audio_io::{read_wav, resample, write_wav, WavCodec, Waveform};
pub use beamform::{CovMode, CovariancePair};
pub use cacgmm::{CacgmmConfig, CacgmmState};
pub use maskers::{Mask, MaskProvider};
pub use pipeline::{EnhanceArtifacts, PipelineConfig};
pub use scenegen::{ArrayGeometry, Scene, SceneConfig};
pub use stft::{Spectrogram, StftConfig};
