//! Shared fixtures for the integration suites: deterministic signal
//! generators and small numeric helpers.
#![allow(dead_code)]

use beamkit::audio_io::Waveform;
use ndarray::Array1;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Harmonic stack with drifting pitch and a syllabic envelope: a stand-in
/// for speech with strong spectro-temporal structure.
pub fn speech_like(seed: u64, n: usize, fs: u32) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f0 = rng.gen_range(110.0..180.0);
    let drift = rng.gen_range(-20.0..20.0);
    let env_rate = rng.gen_range(2.5..4.0);
    let mut phase = vec![0.0f64; 12];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let tsec = i as f64 / fs as f64;
        let f_now = f0 + drift * tsec;
        let env = (std::f64::consts::PI * env_rate * tsec).sin().max(0.0).powf(0.7);
        let mut v = 0.0;
        for (h, ph) in phase.iter_mut().enumerate() {
            let freq = f_now * (h + 1) as f64;
            if freq < 0.45 * fs as f64 {
                *ph += 2.0 * std::f64::consts::PI * freq / fs as f64;
                v += ph.sin() / (h + 1) as f64;
            }
        }
        out.push(env * v * 0.25);
    }
    Waveform::from_mono(out, fs).unwrap()
}

/// Lightly smoothed white noise.
pub fn noise_like(seed: u64, n: usize, fs: u32) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n + 2).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let smooth: Vec<f64> = (0..n).map(|i| (raw[i] + raw[i + 1] + raw[i + 2]) / 3.0).collect();
    Waveform::from_mono(smooth, fs).unwrap()
}

/// Steady tonal interferer with a few inharmonic partials.
pub fn tonal_like(seed: u64, n: usize, fs: u32) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = rng.gen_range(300.0..700.0);
    let partials: Vec<(f64, f64)> =
        (0..4).map(|_| (base * rng.gen_range(1.0..3.5), rng.gen_range(0.1..0.4))).collect();
    let out: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs as f64;
            partials
                .iter()
                .map(|(f, a)| a * (2.0 * std::f64::consts::PI * f * t).sin())
                .sum()
        })
        .collect();
    Waveform::from_mono(out, fs).unwrap()
}

pub fn std_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    Complex64::new(
        r * (2.0 * std::f64::consts::PI * u2).cos() / 2f64.sqrt(),
        r * (2.0 * std::f64::consts::PI * u2).sin() / 2f64.sqrt(),
    )
}

/// Relative RMS of `err` against `reference`.
pub fn rel_rms(err: &[f64], reference: &[f64]) -> f64 {
    let e: f64 = err.iter().map(|v| v * v).sum();
    let r: f64 = reference.iter().map(|v| v * v).sum();
    (e / r.max(1e-300)).sqrt()
}

/// Channel 0 of a waveform restricted to a sample range.
pub fn channel_slice(w: &Waveform, range: std::ops::Range<usize>) -> Array1<f64> {
    range.map(|i| w.samples()[[0, i]]).collect()
}

/// Prints the per-criterion verdict line and panics on failure.
pub fn report(number: u32, name: &str, result: Result<(), String>) {
    match result {
        Ok(()) => println!("acceptance {number:2} {name}: PASS"),
        Err(msg) => {
            println!("acceptance {number:2} {name}: FAIL - {msg}");
            panic!("acceptance criterion {number} ({name}) failed: {msg}");
        }
    }
}

#[macro_export]
macro_rules! check {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err(format!($($arg)+));
        }
    };
}
