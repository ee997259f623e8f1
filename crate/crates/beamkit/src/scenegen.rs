//! Synthetic multichannel acoustic scenes: far-field point sources steered
//! to a virtual anechoic array by fractional delays, plus spatially white
//! Gaussian ambient noise, mixed against the speech source at a requested
//! SNR with every stem kept for ground truth.
//!
//! A scene persists as a directory: `mixture.wav`, `stem_<k>.wav`, and
//! `scene.json` with labels, angles, per-stem SNRs, and seeds.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{self, AudioError, WavCodec, Waveform};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("source at {distance} m is inside the array (max radius {radius} m)")]
    SourceInsideArray { distance: f64, radius: f64 },
    #[error("zero-power input")]
    ZeroPower,
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty source clip")]
    EmptySource,
    #[error("point source must be single-channel, got {0} channels")]
    NotMono(usize),
    #[error("scene directory {0} is missing {1}")]
    MissingFile(PathBuf, String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("bad scene metadata: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

type Result<T> = std::result::Result<T, SceneError>;

/// Virtual microphone array. Positions are meters relative to the array
/// origin; sources are placed by azimuth/elevation/distance from the same
/// origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub mic_positions: Vec<[f64; 3]>,
    pub sound_speed: f64,
    pub sample_rate_hz: u32,
}

impl ArrayGeometry {
    /// M microphones equally spaced on a circle in the horizontal plane.
    pub fn circular(mics: usize, radius_m: f64, sample_rate_hz: u32) -> Self {
        let mic_positions = (0..mics)
            .map(|m| {
                let ang = 2.0 * std::f64::consts::PI * m as f64 / mics as f64;
                [radius_m * ang.cos(), radius_m * ang.sin(), 0.0]
            })
            .collect();
        Self { mic_positions, sound_speed: 343.0, sample_rate_hz }
    }

    /// Four microphones on the corners of a square with the given side.
    pub fn square(side_m: f64, sample_rate_hz: u32) -> Self {
        let h = side_m / 2.0;
        Self {
            mic_positions: vec![[h, h, 0.0], [h, -h, 0.0], [-h, -h, 0.0], [-h, h, 0.0]],
            sound_speed: 343.0,
            sample_rate_hz,
        }
    }

    pub fn mics(&self) -> usize {
        self.mic_positions.len()
    }

    pub fn max_radius(&self) -> f64 {
        self.mic_positions
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Direction and range of a point source relative to the array origin.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SourcePlacement {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub distance_m: f64,
}

impl SourcePlacement {
    fn cartesian(&self) -> [f64; 3] {
        let az = self.azimuth_deg.to_radians();
        let el = self.elevation_deg.to_radians();
        [
            self.distance_m * el.cos() * az.cos(),
            self.distance_m * el.cos() * az.sin(),
            self.distance_m * el.sin(),
        ]
    }
}

const INTERP_HALF_WIDTH: f64 = 16.0;

/// Windowed-sinc fractional-delay read of `x` at position `t` (samples).
fn interp_at(x: &[f64], t: f64) -> f64 {
    let j0 = ((t - INTERP_HALF_WIDTH).ceil() as i64).max(0);
    let j1 = ((t + INTERP_HALF_WIDTH).floor() as i64).min(x.len() as i64 - 1);
    let mut acc = 0.0;
    for j in j0..=j1 {
        let d = t - j as f64;
        acc += x[j as usize] * audio_io::sinc(d) * audio_io::kaiser(d / INTERP_HALF_WIDTH);
    }
    acc
}

/// Steer a mono source to every microphone: per mic, the fractional delay
/// relative to mic 0 and a 1/r amplitude relative to mic 0.
pub fn steer(src: &Waveform, geom: &ArrayGeometry, placement: SourcePlacement) -> Result<Waveform> {
    if src.channels() != 1 {
        return Err(SceneError::NotMono(src.channels()));
    }
    if src.sample_rate_hz() != geom.sample_rate_hz {
        return Err(SceneError::RateMismatch(src.sample_rate_hz(), geom.sample_rate_hz));
    }
    let radius = geom.max_radius();
    if placement.distance_m <= radius {
        return Err(SceneError::SourceInsideArray { distance: placement.distance_m, radius });
    }
    let p = placement.cartesian();
    let dist = |mic: &[f64; 3]| {
        ((p[0] - mic[0]).powi(2) + (p[1] - mic[1]).powi(2) + (p[2] - mic[2]).powi(2)).sqrt()
    };
    let r0 = dist(&geom.mic_positions[0]);
    let n = src.frames();
    let x: Vec<f64> = src.channel(0).to_vec();
    let mut out = Array2::<f64>::zeros((geom.mics(), n));
    for (m, mic) in geom.mic_positions.iter().enumerate() {
        let rm = dist(mic);
        let delay = (rm - r0) / geom.sound_speed * geom.sample_rate_hz as f64;
        let gain = r0 / rm;
        if delay == 0.0 {
            for i in 0..n {
                out[[m, i]] = gain * x[i];
            }
        } else {
            for i in 0..n {
                out[[m, i]] = gain * interp_at(&x, i as f64 - delay);
            }
        }
    }
    Ok(Waveform::new(out, geom.sample_rate_hz)?)
}

fn mean_power(w: &Waveform) -> f64 {
    let n = (w.channels() * w.frames()) as f64;
    w.samples().iter().map(|v| v * v).sum::<f64>() / n
}

/// Scale `noise` so that the speech-to-noise ratio is `snr_db`, powers
/// averaged over all channels and samples. Returns speech + g*noise and g.
pub fn mix_at_snr(speech: &Waveform, noise: &Waveform, snr_db: f64) -> Result<(Waveform, f64)> {
    if speech.samples().dim() != noise.samples().dim() {
        return Err(SceneError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            speech.samples().dim(),
            noise.samples().dim()
        )));
    }
    if speech.sample_rate_hz() != noise.sample_rate_hz() {
        return Err(SceneError::RateMismatch(speech.sample_rate_hz(), noise.sample_rate_hz()));
    }
    let p_s = mean_power(speech);
    let p_n = mean_power(noise);
    if p_s <= 0.0 || p_n <= 0.0 {
        return Err(SceneError::ZeroPower);
    }
    let gain = (p_s / (p_n * 10f64.powf(snr_db / 10.0))).sqrt();
    let mixed = speech.samples() + &(noise.samples() * gain);
    Ok((Waveform::new(mixed, speech.sample_rate_hz())?, gain))
}

/// Knobs for [`make_scene`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Overall mixture SNR with respect to the speech stem.
    pub snr_db: f64,
    /// Diffuse ambient level relative to the steered speech power.
    pub ambient_rel_db: f64,
    pub clip_seconds: f64,
    /// Drives source placements.
    pub rng_seed: u64,
    /// Drives the Gaussian ambient samples.
    pub ambient_seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { snr_db: -3.0, ambient_rel_db: -20.0, clip_seconds: 9.0, rng_seed: 0, ambient_seed: 0 }
    }
}

/// Per-stem bookkeeping kept in `scene.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StemInfo {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub placement: Option<SourcePlacement>,
    pub snr_vs_speech_db: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneMetadata {
    pub sample_rate_hz: u32,
    pub snr_db: f64,
    pub rng_seed: u64,
    pub ambient_seed: u64,
    pub speech_index: usize,
    pub stems: Vec<StemInfo>,
}

/// A mixture with its ground-truth stems. The mixture is the elementwise sum
/// of the stems; exactly one stem is the speech.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mixture: Waveform,
    pub stems: Vec<(String, Waveform)>,
    pub metadata: SceneMetadata,
}

impl Scene {
    pub fn speech_stem(&self) -> &Waveform {
        &self.stems[self.metadata.speech_index].1
    }
}

/// Repeat a clip until it covers `len` samples, then cut.
fn tile_to(src: &Waveform, len: usize) -> Result<Waveform> {
    if src.frames() == 0 {
        return Err(SceneError::EmptySource);
    }
    let mut out = Array2::<f64>::zeros((src.channels(), len));
    for c in 0..src.channels() {
        for i in 0..len {
            out[[c, i]] = src.samples()[[c, i % src.frames()]];
        }
    }
    Ok(Waveform::new(out, src.sample_rate_hz())?)
}

fn draw_placement(rng: &mut ChaCha8Rng) -> SourcePlacement {
    SourcePlacement {
        azimuth_deg: rng.gen_range(0.0..360.0),
        elevation_deg: rng.gen_range(-20.0..20.0),
        distance_m: rng.gen_range(1.0..3.0),
    }
}

/// Build a scene: steer the speech and each distractor to seeded random
/// placements, add seeded Gaussian ambient at `ambient_rel_db` below the
/// speech, scale the whole noise bed to hit `snr_db`, and keep every scaled
/// stem. The mixture is computed as the running sum of the stems, so the
/// bookkeeping invariant is exact.
pub fn make_scene(
    speech_src: &Waveform,
    distractor_srcs: &[Waveform],
    geom: &ArrayGeometry,
    cfg: &SceneConfig,
) -> Result<Scene> {
    let fs = geom.sample_rate_hz;
    let clip_len = (cfg.clip_seconds * fs as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let speech_place = draw_placement(&mut rng);
    let distractor_places: Vec<SourcePlacement> =
        distractor_srcs.iter().map(|_| draw_placement(&mut rng)).collect();

    let speech = steer(&tile_to(speech_src, clip_len)?, geom, speech_place)?;
    let p_speech = mean_power(&speech);
    if p_speech <= 0.0 {
        return Err(SceneError::ZeroPower);
    }

    let mut distractors = Vec::with_capacity(distractor_srcs.len());
    for (src, place) in distractor_srcs.iter().zip(&distractor_places) {
        distractors.push(steer(&tile_to(src, clip_len)?, geom, *place)?);
    }

    // spatially independent Gaussian ambient, pinned relative to the speech
    let mut amb_rng = ChaCha8Rng::seed_from_u64(cfg.ambient_seed);
    let mut ambient = Array2::<f64>::zeros((geom.mics(), clip_len));
    for c in 0..geom.mics() {
        for i in 0..clip_len {
            let u1: f64 = amb_rng.gen_range(1e-12..1.0);
            let u2: f64 = amb_rng.gen();
            ambient[[c, i]] =
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
    let p_amb = ambient.iter().map(|v| v * v).sum::<f64>() / ambient.len() as f64;
    let amb_target = p_speech * 10f64.powf(cfg.ambient_rel_db / 10.0);
    let ambient = Waveform::new(ambient * (amb_target / p_amb).sqrt(), fs)?;

    let mut noise_bed = ambient.samples().clone();
    for d in &distractors {
        noise_bed = noise_bed + d.samples();
    }
    let noise_bed = Waveform::new(noise_bed, fs)?;
    let (_, gain) = mix_at_snr(&speech, &noise_bed, cfg.snr_db)?;

    // scaled stems, summed in order so mixture == sum(stems) exactly
    let mut stems: Vec<(String, Waveform)> = vec![("speech".to_string(), speech.clone())];
    for (i, d) in distractors.iter().enumerate() {
        stems.push((format!("distractor_{i}"), Waveform::new(d.samples() * gain, fs)?));
    }
    stems.push(("ambient".to_string(), Waveform::new(ambient.samples() * gain, fs)?));

    let mut mixture = stems[0].1.samples().clone();
    for (_, stem) in stems.iter().skip(1) {
        mixture = mixture + stem.samples();
    }
    let mixture = Waveform::new(mixture, fs)?;

    let mut infos = Vec::with_capacity(stems.len());
    for (i, (label, stem)) in stems.iter().enumerate() {
        let placement = if label == "speech" {
            Some(speech_place)
        } else if let Some(stripped) = label.strip_prefix("distractor_") {
            let idx: usize = stripped.parse().unwrap_or(0);
            Some(distractor_places[idx])
        } else {
            None
        };
        let p_stem = mean_power(stem);
        let snr_vs_speech_db = if i == 0 || p_stem <= 0.0 {
            0.0
        } else {
            10.0 * (p_speech / p_stem).log10()
        };
        infos.push(StemInfo { label: label.clone(), placement, snr_vs_speech_db });
    }

    Ok(Scene {
        mixture,
        stems,
        metadata: SceneMetadata {
            sample_rate_hz: fs,
            snr_db: cfg.snr_db,
            rng_seed: cfg.rng_seed,
            ambient_seed: cfg.ambient_seed,
            speech_index: 0,
            stems: infos,
        },
    })
}

pub fn save_scene(dir: impl AsRef<Path>, scene: &Scene) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| SceneError::Io { path: dir.to_path_buf(), source: e })?;
    audio_io::write_wav(dir.join("mixture.wav"), &scene.mixture, WavCodec::Float32)?;
    for (k, (_, stem)) in scene.stems.iter().enumerate() {
        audio_io::write_wav(dir.join(format!("stem_{k}.wav")), stem, WavCodec::Float32)?;
    }
    let json = serde_json::to_string_pretty(&scene.metadata)?;
    audio_io::write_atomic(&dir.join("scene.json"), json.as_bytes())?;
    Ok(())
}

pub fn load_scene(dir: impl AsRef<Path>) -> Result<Scene> {
    let dir = dir.as_ref();
    let meta_path = dir.join("scene.json");
    let raw = fs::read_to_string(&meta_path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            SceneError::MissingFile(dir.to_path_buf(), "scene.json".into())
        } else {
            SceneError::Io { path: meta_path.clone(), source: e }
        }
    })?;
    let metadata: SceneMetadata = serde_json::from_str(&raw)?;
    let mixture = audio_io::read_wav(dir.join("mixture.wav"))?;
    let mut stems = Vec::with_capacity(metadata.stems.len());
    for (k, info) in metadata.stems.iter().enumerate() {
        let stem = audio_io::read_wav(dir.join(format!("stem_{k}.wav")))?;
        stems.push((info.label.clone(), stem));
    }
    Ok(Scene { mixture, stems, metadata })
}

/// Everything in the noise bed: the elementwise sum of all non-speech stems.
pub fn noise_sum(scene: &Scene) -> Result<Waveform> {
    let mut acc: Option<Array2<f64>> = None;
    for (k, (_, stem)) in scene.stems.iter().enumerate() {
        if k == scene.metadata.speech_index {
            continue;
        }
        acc = Some(match acc {
            None => stem.samples().clone(),
            Some(a) => a + stem.samples(),
        });
    }
    let acc = acc.ok_or(SceneError::EmptySource)?;
    Ok(Waveform::new(acc, scene.mixture.sample_rate_hz())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics;

    fn noise_clip(seed: u64, len: usize, fs: u32) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // band-limit a touch so fractional delays stay clean near Nyquist
        let raw: Vec<f64> = (0..len + 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let smoothed: Vec<f64> =
            (0..len).map(|i| (raw[i] + raw[i + 1] + raw[i + 2]) / 3.0).collect();
        Waveform::from_mono(smoothed, fs).unwrap()
    }

    #[test]
    fn steer_single_mic_is_identity() {
        let geom = ArrayGeometry {
            mic_positions: vec![[0.0, 0.0, 0.0]],
            sound_speed: 343.0,
            sample_rate_hz: 16000,
        };
        let src = noise_clip(1, 400, 16000);
        let out = steer(
            &src,
            &geom,
            SourcePlacement { azimuth_deg: 45.0, elevation_deg: 0.0, distance_m: 2.0 },
        )
        .unwrap();
        assert_eq!(out.samples(), src.samples());
    }

    #[test]
    fn symmetric_mics_get_identical_channels() {
        let geom = ArrayGeometry {
            mic_positions: vec![[0.05, 0.0, 0.0], [-0.05, 0.0, 0.0]],
            sound_speed: 343.0,
            sample_rate_hz: 16000,
        };
        // source broadside: equidistant from both mics
        let src = noise_clip(2, 400, 16000);
        let out = steer(
            &src,
            &geom,
            SourcePlacement { azimuth_deg: 90.0, elevation_deg: 0.0, distance_m: 2.0 },
        )
        .unwrap();
        for i in 0..400 {
            assert!((out.samples()[[0, i]] - out.samples()[[1, i]]).abs() < 1e-9);
        }
    }

    /// Sub-sample delay estimate: integer cross-correlation peak refined by
    /// parabolic interpolation.
    fn measure_delay(a: &[f64], b: &[f64], max_lag: usize) -> f64 {
        let corr = |lag: usize| -> f64 {
            let mut s = 0.0;
            for n in 0..a.len() - lag {
                s += a[n] * b[n + lag];
            }
            s
        };
        let scores: Vec<f64> = (0..=max_lag).map(corr).collect();
        let (k, _) = scores
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .unwrap();
        if k == 0 || k == max_lag {
            return k as f64;
        }
        let (c0, c1, c2) = (scores[k - 1], scores[k], scores[k + 1]);
        k as f64 + 0.5 * (c0 - c2) / (c0 - 2.0 * c1 + c2)
    }

    #[test]
    fn broadside_pair_delay_matches_geometry() {
        // mics 0.1 m apart along y; source on the +y axis, so the far mic
        // lags by 0.1/343 s = 4.66 samples at 16 kHz
        let geom = ArrayGeometry {
            mic_positions: vec![[0.0, 0.05, 0.0], [0.0, -0.05, 0.0]],
            sound_speed: 343.0,
            sample_rate_hz: 16000,
        };
        let src = noise_clip(3, 4000, 16000);
        let out = steer(
            &src,
            &geom,
            SourcePlacement { azimuth_deg: 90.0, elevation_deg: 0.0, distance_m: 2.0 },
        )
        .unwrap();
        let a: Vec<f64> = out.channel(0).to_vec();
        let b: Vec<f64> = out.channel(1).to_vec();
        let got = measure_delay(&a, &b, 10);
        let want = 0.1 / 343.0 * 16000.0; // 4.664...
        assert!((got - want).abs() < 0.3, "measured {got}, expected {want}");
    }

    #[test]
    fn source_inside_array_rejected() {
        let geom = ArrayGeometry::circular(4, 0.05, 16000);
        let src = noise_clip(4, 64, 16000);
        let r = steer(
            &src,
            &geom,
            SourcePlacement { azimuth_deg: 0.0, elevation_deg: 0.0, distance_m: 0.01 },
        );
        assert!(matches!(r, Err(SceneError::SourceInsideArray { .. })));
    }

    #[test]
    fn mix_gain_hand_values() {
        let a = Waveform::from_mono(vec![1.0, -1.0, 1.0, -1.0], 16000).unwrap();
        let b = Waveform::from_mono(vec![-1.0, 1.0, -1.0, 1.0], 16000).unwrap();
        let (_, g) = mix_at_snr(&a, &b, 0.0).unwrap();
        assert!((g - 1.0).abs() < 1e-12);
        let (_, g) = mix_at_snr(&a, &b, -3.0).unwrap();
        assert!((g - 10f64.powf(0.15)).abs() < 1e-12);
    }

    #[test]
    fn mix_measured_snr_matches_requested() {
        let speech = noise_clip(5, 2000, 16000);
        let noise = noise_clip(6, 2000, 16000);
        for &snr in &[-30.0, -3.0, 0.0, 12.5] {
            let (mixed, g) = mix_at_snr(&speech, &noise, snr).unwrap();
            let scaled_noise = Waveform::new(noise.samples() * g, 16000).unwrap();
            let measured = 10.0 * (mean_power(&speech) / mean_power(&scaled_noise)).log10();
            assert!((measured - snr).abs() < 1e-9, "snr {snr}: measured {measured}");
            // mixture really is speech + g*noise
            for i in 0..2000 {
                let want = speech.samples()[[0, i]] + scaled_noise.samples()[[0, i]];
                assert!((mixed.samples()[[0, i]] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mix_rejects_zero_power() {
        let a = Waveform::from_mono(vec![0.0; 8], 16000).unwrap();
        let b = Waveform::from_mono(vec![1.0; 8], 16000).unwrap();
        assert!(matches!(mix_at_snr(&a, &b, 0.0), Err(SceneError::ZeroPower)));
    }

    fn small_scene(seed: u64, snr_db: f64) -> Scene {
        let geom = ArrayGeometry::square(0.05, 16000);
        let speech = noise_clip(100 + seed, 3200, 16000);
        let d1 = noise_clip(200 + seed, 3200, 16000);
        let cfg = SceneConfig {
            snr_db,
            clip_seconds: 0.2,
            rng_seed: seed,
            ambient_seed: seed + 1,
            ..Default::default()
        };
        make_scene(&speech, &[d1], &geom, &cfg).unwrap()
    }

    #[test]
    fn stems_sum_to_mixture() {
        let scene = small_scene(7, -3.0);
        let mut acc = Array2::<f64>::zeros(scene.mixture.samples().dim());
        for (_, stem) in &scene.stems {
            acc = acc + stem.samples();
        }
        for (a, b) in acc.iter().zip(scene.mixture.samples().iter()) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(scene.metadata.speech_index, 0);
        assert_eq!(scene.stems.len(), 3); // speech + 1 distractor + ambient
    }

    #[test]
    fn high_snr_mixture_is_nearly_speech() {
        let scene = small_scene(8, 60.0);
        let mix = scene.mixture.channel(0);
        let speech = scene.speech_stem().channel(0);
        let got = metrics::si_snr(&mix, &speech).unwrap();
        assert!(got >= 40.0, "SI-SNR {got}");
    }

    #[test]
    fn scene_generation_is_deterministic() {
        let a = small_scene(9, -3.0);
        let b = small_scene(9, -3.0);
        assert_eq!(a.mixture.samples(), b.mixture.samples());
        for ((_, s1), (_, s2)) in a.stems.iter().zip(b.stems.iter()) {
            assert_eq!(s1.samples(), s2.samples());
        }
        assert_eq!(
            serde_json::to_string(&a.metadata).unwrap(),
            serde_json::to_string(&b.metadata).unwrap()
        );
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let scene = small_scene(10, -5.0);
        save_scene(dir.path(), &scene).unwrap();
        let back = load_scene(dir.path()).unwrap();
        assert_eq!(back.stems.len(), scene.stems.len());
        assert_eq!(back.metadata.speech_index, 0);
        // float32 on disk: compare after casting
        for ((_, a), (_, b)) in scene.stems.iter().zip(back.stems.iter()) {
            for (x, y) in a.samples().iter().zip(b.samples().iter()) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
    }

    #[test]
    fn measured_scene_snr_matches_requested() {
        let scene = small_scene(11, -7.0);
        let noise = noise_sum(&scene).unwrap();
        let measured = 10.0 * (mean_power(scene.speech_stem()) / mean_power(&noise)).log10();
        assert!((measured - (-7.0)).abs() < 1e-9, "measured {measured}");
    }
}
