//! Batch command-line front end: scene generation, pseudo-target
//! extraction, enhancement, and evaluation.
//!
//! Exit codes: 0 success, 1 usage error, 2 processing error. Diagnostics go
//! to stderr; machine-readable results are single JSON lines on stdout. A
//! JSON config file (`--config`) supplies defaults; explicit flags win.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::audio_io::{self, WavCodec, Waveform};
use crate::beamform::CovMode;
use crate::cacgmm::CacgmmConfig;
use crate::maskers::{self, MaskProvider};
use crate::metrics::{self, EvalReport};
use crate::pipeline::{self, PipelineConfig};
use crate::scenegen::{self, ArrayGeometry, SceneConfig};
use crate::stft::StftConfig;

#[derive(Parser, Debug)]
#[command(name = "beamkit", version, about = "Multichannel speech denoising toolkit")]
pub struct Cli {
    /// JSON config file with default values; explicit flags take precedence
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovModeArg {
    Complement,
    Subtract,
}

impl From<CovModeArg> for CovMode {
    fn from(v: CovModeArg) -> Self {
        match v {
            CovModeArg::Complement => CovMode::Complement,
            CovModeArg::Subtract => CovMode::Subtract,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic scene directory from source WAVs
    Mix {
        /// Mono speech WAV
        #[arg(long, value_name = "WAV")]
        speech: PathBuf,
        /// Mono distractor WAVs
        #[arg(long, value_name = "WAV", num_args = 1.., required = true)]
        distractors: Vec<PathBuf>,
        /// Mixture SNR with respect to the speech stem
        #[arg(long, value_name = "DB", allow_hyphen_values = true)]
        snr_db: Option<f64>,
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Output scene directory
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Microphone count of the virtual circular array
        #[arg(long, value_name = "N")]
        mics: Option<usize>,
        /// Array radius in meters
        #[arg(long, value_name = "M")]
        radius_m: Option<f64>,
        #[arg(long, value_name = "S")]
        clip_seconds: Option<f64>,
        /// Ambient level relative to speech
        #[arg(long, value_name = "DB", allow_hyphen_values = true)]
        ambient_db: Option<f64>,
        #[arg(long, value_name = "N")]
        ambient_seed: Option<u64>,
    },
    /// Clean a multichannel recording into a pseudo-target
    Extract {
        /// Multichannel input WAV
        #[arg(long = "in", value_name = "WAV")]
        input: PathBuf,
        /// Mixture components K
        #[arg(long, value_name = "K")]
        components: Option<usize>,
        /// EM iterations
        #[arg(long, value_name = "N")]
        iters: Option<usize>,
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Output WAV (single channel)
        #[arg(long, value_name = "WAV")]
        out: PathBuf,
        /// Also write the extraction mask
        #[arg(long, value_name = "MSK")]
        mask_out: Option<PathBuf>,
        #[arg(long, value_name = "CH")]
        reference: Option<usize>,
    },
    /// Run the mask -> MVDR -> mask -> remix chain
    Enhance {
        /// Multichannel input WAV
        #[arg(long = "in", value_name = "WAV")]
        input: PathBuf,
        /// First mask provider: oracle:<scene-dir> | cacgmm | file:<msk>
        #[arg(long, value_name = "SPEC")]
        masker1: String,
        /// Second mask provider, same syntax
        #[arg(long, value_name = "SPEC")]
        masker2: String,
        /// Remix gate in [0, 1]
        #[arg(long, value_name = "A")]
        alpha: Option<f64>,
        #[arg(long, value_enum, value_name = "MODE")]
        cov_mode: Option<CovModeArg>,
        #[arg(long, value_name = "WAV")]
        out: PathBuf,
        /// Write every stage artifact into this directory
        #[arg(long, value_name = "DIR")]
        dump_stages: Option<PathBuf>,
        #[arg(long, value_name = "CH")]
        reference: Option<usize>,
    },
    /// Objective metrics for an enhanced clip
    Eval {
        #[arg(long, value_name = "WAV")]
        est: PathBuf,
        #[arg(long = "ref", value_name = "WAV")]
        reference: PathBuf,
        /// Unprocessed mixture, enables the improvement column
        #[arg(long, value_name = "WAV")]
        mix: Option<PathBuf>,
    },
}

/// Defaults loadable from `--config`; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub alpha: Option<f64>,
    pub cov_mode: Option<String>,
    pub window_len: Option<usize>,
    pub hop: Option<usize>,
    pub components: Option<usize>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
    pub reference: Option<usize>,
    pub mics: Option<usize>,
    pub radius_m: Option<f64>,
    pub clip_seconds: Option<f64>,
    pub ambient_db: Option<f64>,
    pub ambient_seed: Option<u64>,
    pub snr_db: Option<f64>,
}

enum CliError {
    Usage(String),
    Processing(anyhow::Error),
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Processing(e)
    }
}

/// Parse argv and run. This is what `main` calls and what end-to-end tests
/// drive in process.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            return 1;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("beamkit: {msg}");
            1
        }
        Err(CliError::Processing(e)) => {
            eprintln!("beamkit: {e:#}");
            2
        }
    }
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let raw = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))
                .map_err(CliError::Processing)?;
            serde_json::from_str(&raw)
                .map_err(|e| usage(format!("bad config {}: {e}", p.display())))
        }
    }
}

fn stft_config(fc: &FileConfig) -> Result<StftConfig> {
    match (fc.window_len, fc.hop) {
        (None, None) => Ok(StftConfig::default()),
        (w, h) => StftConfig::new(w.unwrap_or(512), h.unwrap_or(128))
            .map_err(|e| usage(e.to_string())),
    }
}

fn cacgmm_config(components: Option<usize>, iters: Option<usize>, seed: Option<u64>, fc: &FileConfig) -> CacgmmConfig {
    let defaults = CacgmmConfig::default();
    CacgmmConfig {
        components: components.or(fc.components).unwrap_or(defaults.components),
        max_iters: iters.or(fc.iters).unwrap_or(defaults.max_iters),
        seed: seed.or(fc.seed).unwrap_or(defaults.seed),
        ..defaults
    }
}

#[derive(Debug, Clone)]
enum MaskerSpec {
    Oracle(PathBuf),
    Cacgmm,
    File(PathBuf),
}

fn parse_masker(s: &str) -> Result<MaskerSpec> {
    if s == "cacgmm" {
        Ok(MaskerSpec::Cacgmm)
    } else if let Some(dir) = s.strip_prefix("oracle:") {
        Ok(MaskerSpec::Oracle(PathBuf::from(dir)))
    } else if let Some(path) = s.strip_prefix("file:") {
        Ok(MaskerSpec::File(PathBuf::from(path)))
    } else {
        Err(usage(format!(
            "bad masker spec {s:?}: expected oracle:<scene-dir>, cacgmm, or file:<msk>"
        )))
    }
}

fn build_provider(spec: &MaskerSpec, reference: usize, cacgmm: &CacgmmConfig) -> Result<MaskProvider> {
    match spec {
        MaskerSpec::Cacgmm => Ok(MaskProvider::Cacgmm(cacgmm.clone())),
        MaskerSpec::File(path) => Ok(MaskProvider::File(path.clone())),
        MaskerSpec::Oracle(dir) => {
            let scene = scenegen::load_scene(dir)
                .with_context(|| format!("loading scene {}", dir.display()))
                .map_err(CliError::Processing)?;
            let noise = scenegen::noise_sum(&scene)
                .context("summing noise stems")
                .map_err(CliError::Processing)?;
            Ok(MaskProvider::Oracle {
                speech: scene.speech_stem().clone(),
                noise,
                channel: reference,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let fc = load_file_config(&cli.config)?;
    match cli.command {
        Command::Mix {
            speech,
            distractors,
            snr_db,
            seed,
            out,
            mics,
            radius_m,
            clip_seconds,
            ambient_db,
            ambient_seed,
        } => {
            let snr_db = snr_db.or(fc.snr_db).unwrap_or(-3.0);
            let seed = seed.or(fc.seed).unwrap_or(0);
            let scene_cfg = SceneConfig {
                snr_db,
                ambient_rel_db: ambient_db.or(fc.ambient_db).unwrap_or(-20.0),
                clip_seconds: clip_seconds.or(fc.clip_seconds).unwrap_or(9.0),
                rng_seed: seed,
                ambient_seed: ambient_seed.or(fc.ambient_seed).unwrap_or(seed.wrapping_add(1)),
            };
            let mics = mics.or(fc.mics).unwrap_or(8);
            let radius = radius_m.or(fc.radius_m).unwrap_or(0.05);
            cmd_mix(&speech, &distractors, mics, radius, &scene_cfg, &out)
        }
        Command::Extract { input, components, iters, seed, out, mask_out, reference } => {
            let stft = stft_config(&fc)?;
            let cacgmm = cacgmm_config(components, iters, seed, &fc);
            let reference = reference.or(fc.reference).unwrap_or(0);
            cmd_extract(&input, &stft, &cacgmm, reference, &out, mask_out.as_deref())
        }
        Command::Enhance {
            input,
            masker1,
            masker2,
            alpha,
            cov_mode,
            out,
            dump_stages,
            reference,
        } => {
            // validate flag shapes before any file I/O
            let spec1 = parse_masker(&masker1)?;
            let spec2 = parse_masker(&masker2)?;
            if let Some(a) = alpha {
                if !(0.0..=1.0).contains(&a) {
                    return Err(usage(format!("--alpha {a} outside [0, 1]")));
                }
            }
            let alpha = alpha.or(fc.alpha).unwrap_or(0.2);
            if !(0.0..=1.0).contains(&alpha) {
                return Err(usage(format!("alpha {alpha} outside [0, 1]")));
            }
            let cov_mode: CovMode = match cov_mode {
                Some(m) => m.into(),
                None => match fc.cov_mode.as_deref() {
                    None => CovMode::Complement,
                    Some("complement") => CovMode::Complement,
                    Some("subtract") => CovMode::Subtract,
                    Some(other) => return Err(usage(format!("bad cov_mode {other:?} in config"))),
                },
            };
            let stft = stft_config(&fc)?;
            let reference = reference.or(fc.reference).unwrap_or(0);
            let cacgmm = cacgmm_config(None, None, None, &fc);
            cmd_enhance(
                &input,
                &spec1,
                &spec2,
                alpha,
                cov_mode,
                stft,
                reference,
                &cacgmm,
                &out,
                dump_stages.as_deref(),
            )
        }
        Command::Eval { est, reference, mix } => cmd_eval(&est, &reference, mix.as_deref()),
    }
}

fn read_mono_source(path: &Path) -> Result<Waveform> {
    let w = audio_io::read_wav(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(CliError::Processing)?;
    if w.channels() != 1 {
        return Err(CliError::Processing(anyhow!(
            "{} must be mono, has {} channels",
            path.display(),
            w.channels()
        )));
    }
    Ok(w)
}

fn cmd_mix(
    speech_path: &Path,
    distractor_paths: &[PathBuf],
    mics: usize,
    radius_m: f64,
    cfg: &SceneConfig,
    out: &Path,
) -> Result<()> {
    let speech = read_mono_source(speech_path)?;
    let rate = speech.sample_rate_hz();
    let mut distractors = Vec::with_capacity(distractor_paths.len());
    for p in distractor_paths {
        let d = read_mono_source(p)?;
        let d = if d.sample_rate_hz() == rate {
            d
        } else {
            audio_io::resample(&d, rate).context("resampling distractor").map_err(CliError::Processing)?
        };
        distractors.push(d);
    }
    let geom = ArrayGeometry::circular(mics, radius_m, rate);
    let scene = scenegen::make_scene(&speech, &distractors, &geom, cfg)
        .context("generating scene")
        .map_err(CliError::Processing)?;
    scenegen::save_scene(out, &scene)
        .with_context(|| format!("writing scene {}", out.display()))
        .map_err(CliError::Processing)?;

    #[derive(Serialize)]
    struct MixResult<'a> {
        out: &'a str,
        sample_rate_hz: u32,
        snr_db: f64,
        stems: usize,
        seed: u64,
    }
    println!(
        "{}",
        serde_json::to_string(&MixResult {
            out: &out.display().to_string(),
            sample_rate_hz: rate,
            snr_db: cfg.snr_db,
            stems: scene.stems.len(),
            seed: cfg.rng_seed,
        })
        .expect("serializable")
    );
    Ok(())
}

fn cmd_extract(
    input: &Path,
    stft: &StftConfig,
    cacgmm: &CacgmmConfig,
    reference: usize,
    out: &Path,
    mask_out: Option<&Path>,
) -> Result<()> {
    let recording = audio_io::read_wav(input)
        .with_context(|| format!("reading {}", input.display()))
        .map_err(CliError::Processing)?;
    let (target, mask) = pipeline::make_target_with_mask(&recording, stft, cacgmm, reference)
        .context("extracting pseudo-target")
        .map_err(CliError::Processing)?;
    audio_io::write_wav(out, &target, WavCodec::Float32)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(CliError::Processing)?;
    if let Some(mp) = mask_out {
        maskers::write_mask(mp, &mask)
            .with_context(|| format!("writing {}", mp.display()))
            .map_err(CliError::Processing)?;
    }

    #[derive(Serialize)]
    struct ExtractResult<'a> {
        out: &'a str,
        frames: usize,
        components: usize,
        iters: usize,
        seed: u64,
    }
    println!(
        "{}",
        serde_json::to_string(&ExtractResult {
            out: &out.display().to_string(),
            frames: target.frames(),
            components: cacgmm.components,
            iters: cacgmm.max_iters,
            seed: cacgmm.seed,
        })
        .expect("serializable")
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_enhance(
    input: &Path,
    spec1: &MaskerSpec,
    spec2: &MaskerSpec,
    alpha: f64,
    cov_mode: CovMode,
    stft: StftConfig,
    reference: usize,
    cacgmm: &CacgmmConfig,
    out: &Path,
    dump_stages: Option<&Path>,
) -> Result<()> {
    let mixture = audio_io::read_wav(input)
        .with_context(|| format!("reading {}", input.display()))
        .map_err(CliError::Processing)?;
    let cfg = PipelineConfig {
        alpha,
        reference,
        first_masker: build_provider(spec1, reference, cacgmm)?,
        second_masker: build_provider(spec2, reference, cacgmm)?,
        cov_mode,
        stft,
    };
    let (enhanced, artifacts) = pipeline::enhance(&mixture, &cfg)
        .context("running enhancement")
        .map_err(CliError::Processing)?;
    audio_io::write_wav(out, &enhanced, WavCodec::Float32)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(CliError::Processing)?;

    if let Some(dir) = dump_stages {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(CliError::Processing)?;
        let werr = |e: anyhow::Error| CliError::Processing(e);
        maskers::write_mask(dir.join("first_mask.msk"), &artifacts.first_mask)
            .context("dumping first mask")
            .map_err(werr)?;
        maskers::write_mask(dir.join("second_mask.msk"), &artifacts.second_mask)
            .context("dumping second mask")
            .map_err(werr)?;
        let bf = crate::stft::synthesize(&artifacts.beamformed)
            .context("synthesizing beamformed stack")
            .map_err(werr)?;
        audio_io::write_wav(dir.join("beamformed.wav"), &bf, WavCodec::Float32)
            .context("dumping beamformed stack")
            .map_err(werr)?;
        let masked = crate::stft::synthesize(&artifacts.masked)
            .context("synthesizing masked stage")
            .map_err(werr)?;
        audio_io::write_wav(dir.join("masked.wav"), &masked, WavCodec::Float32)
            .context("dumping masked stage")
            .map_err(werr)?;
    }

    #[derive(Serialize)]
    struct EnhanceResult<'a> {
        out: &'a str,
        frames: usize,
        alpha: f64,
    }
    println!(
        "{}",
        serde_json::to_string(&EnhanceResult {
            out: &out.display().to_string(),
            frames: enhanced.frames(),
            alpha,
        })
        .expect("serializable")
    );
    Ok(())
}

fn cmd_eval(est_path: &Path, ref_path: &Path, mix_path: Option<&Path>) -> Result<()> {
    let read = |p: &Path| {
        audio_io::read_wav(p)
            .with_context(|| format!("reading {}", p.display()))
            .map_err(CliError::Processing)
    };
    let est = read(est_path)?;
    let reference = read(ref_path)?;
    let mut len = est.frames().min(reference.frames());
    let mix = match mix_path {
        None => None,
        Some(p) => {
            let m = read(p)?;
            len = len.min(m.frames());
            Some(m)
        }
    };
    let merr = |e: metrics::MetricsError| CliError::Processing(anyhow!(e));
    let est_ch = est.channel(0);
    let ref_ch = reference.channel(0);
    let est_v = est_ch.slice(ndarray::s![..len]);
    let ref_v = ref_ch.slice(ndarray::s![..len]);
    let si = metrics::si_snr(&est_v, &ref_v).map_err(merr)?;
    let plain = metrics::snr(&est_v, &ref_v).map_err(merr)?;
    let improvement = match &mix {
        None => None,
        Some(m) => {
            let mix_ch = m.channel(0);
            let mix_v = mix_ch.slice(ndarray::s![..len]);
            Some(si - metrics::si_snr(&mix_v, &ref_v).map_err(merr)?)
        }
    };
    let report = EvalReport {
        est: est_path.display().to_string(),
        reference: ref_path.display().to_string(),
        si_snr_db: si,
        si_snr_improvement_db: improvement,
        snr_db: plain,
        mask_loss: None,
    };
    println!("{}", serde_json::to_string(&report).expect("serializable"));
    Ok(())
}
