//! Objective evaluation: scale-invariant SNR, plain SNR, and the mask loss
//! `mean |Y (.) M - S_hat|` over all channels and bins.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maskers::Mask;
use crate::stft::Spectrogram;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {est} vs {reference} samples")]
    LengthMismatch { est: usize, reference: usize },
    #[error("reference signal is identically zero")]
    ZeroReference,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

type Result<T> = std::result::Result<T, MetricsError>;

/// dB values are capped here so reports stay finite.
pub const DB_CAP: f64 = 100.0;

/// Per-clip evaluation record; serializes as one JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub est: String,
    pub reference: String,
    pub si_snr_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub si_snr_improvement_db: Option<f64>,
    pub snr_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask_loss: Option<f64>,
}

fn cap_db(ratio_num: f64, ratio_den: f64) -> f64 {
    if ratio_den <= 0.0 {
        return DB_CAP;
    }
    if ratio_num <= 0.0 {
        return -DB_CAP;
    }
    (10.0 * (ratio_num / ratio_den).log10()).clamp(-DB_CAP, DB_CAP)
}

/// Scale-invariant SNR in dB, capped at +-100. The estimate is projected
/// onto the reference; what remains is error.
pub fn si_snr(est: &ArrayView1<f64>, reference: &ArrayView1<f64>) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(MetricsError::LengthMismatch { est: est.len(), reference: reference.len() });
    }
    let ref_energy: f64 = reference.iter().map(|v| v * v).sum();
    if ref_energy <= 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    let dot: f64 = est.iter().zip(reference.iter()).map(|(a, b)| a * b).sum();
    let gain = dot / ref_energy;
    let mut sig = 0.0;
    let mut err = 0.0;
    for (e, r) in est.iter().zip(reference.iter()) {
        let s = gain * r;
        sig += s * s;
        let d = e - s;
        err += d * d;
    }
    Ok(cap_db(sig, err))
}

/// Plain SNR in dB (no scale fitting), capped at +-100.
pub fn snr(est: &ArrayView1<f64>, reference: &ArrayView1<f64>) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(MetricsError::LengthMismatch { est: est.len(), reference: reference.len() });
    }
    let ref_energy: f64 = reference.iter().map(|v| v * v).sum();
    if ref_energy <= 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    let err: f64 = est
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(cap_db(ref_energy, err))
}

/// Mean absolute complex deviation of the masked mixture from the target:
/// the evaluation form of the training objective.
pub fn mask_loss(y: &Spectrogram, mask: &Mask, target: &Spectrogram) -> Result<f64> {
    let shape = y.bins().dim();
    if target.bins().dim() != shape {
        return Err(MetricsError::ShapeMismatch(format!(
            "mixture {:?} vs target {:?}",
            shape,
            target.bins().dim()
        )));
    }
    if mask.shape() != (shape.1, shape.2) {
        return Err(MetricsError::ShapeMismatch(format!(
            "mask {:?} vs frames/bins {:?}",
            mask.shape(),
            (shape.1, shape.2)
        )));
    }
    let (m, t_len, f_len) = shape;
    let mut acc = 0.0;
    for c in 0..m {
        for t in 0..t_len {
            for f in 0..f_len {
                let masked = y.bins()[[c, t, f]] * mask.values()[[t, f]];
                acc += (masked - target.bins()[[c, t, f]]).norm();
            }
        }
    }
    Ok(acc / (m * t_len * f_len) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stft::StftConfig;
    use ndarray::{Array1, Array2, Array3};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn arr(v: Vec<f64>) -> Array1<f64> {
        Array1::from_vec(v)
    }

    #[test]
    fn si_snr_caps_at_plus_100() {
        let r = arr(vec![0.3, -0.2, 0.9, 0.1]);
        assert_eq!(si_snr(&r.view(), &r.view()).unwrap(), 100.0);
        let scaled = r.mapv(|v| 2.0 * v);
        assert_eq!(si_snr(&scaled.view(), &r.view()).unwrap(), 100.0);
    }

    #[test]
    fn si_snr_orthogonal_equal_power_is_zero() {
        // reference and noise orthogonal with equal energy
        let r = arr(vec![1.0, 0.0, 1.0, 0.0]);
        let n = arr(vec![0.0, 1.0, 0.0, -1.0]);
        let est = &r + &n;
        let got = si_snr(&est.view(), &r.view()).unwrap();
        assert!(got.abs() < 1e-12);
    }

    #[test]
    fn si_snr_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = Array1::from_shape_fn(64, |_| rng.gen_range(-1.0..1.0f64));
        let e = Array1::from_shape_fn(64, |i| r[i] + 0.1 * rng.gen_range(-1.0..1.0f64));
        let a = si_snr(&e.view(), &r.view()).unwrap();
        for c in [0.5, -3.0, 1e-3] {
            let scaled = e.mapv(|v| c * v);
            let b = si_snr(&scaled.view(), &r.view()).unwrap();
            assert!((a - b).abs() < 1e-9, "scale {c}: {a} vs {b}");
        }
    }

    #[test]
    fn si_snr_rejects_zero_reference_and_mismatch() {
        let z = arr(vec![0.0; 4]);
        let e = arr(vec![1.0; 4]);
        assert!(matches!(si_snr(&e.view(), &z.view()), Err(MetricsError::ZeroReference)));
        let short = arr(vec![1.0; 3]);
        assert!(matches!(
            si_snr(&short.view(), &z.view()),
            Err(MetricsError::LengthMismatch { est: 3, reference: 4 })
        ));
    }

    fn spec_from(bins: Array3<Complex64>) -> Spectrogram {
        let f = bins.dim().2;
        let cfg = StftConfig::new(2 * (f - 1), (f - 1) / 2).unwrap();
        Spectrogram::new(bins, cfg, 16000).unwrap()
    }

    #[test]
    fn mask_loss_zero_on_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bins = Array3::from_shape_fn((2, 4, 3), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let y = spec_from(bins.clone());
        let target = spec_from(bins);
        let ones = Mask::new(Array2::from_elem((4, 3), 1.0)).unwrap();
        assert_eq!(mask_loss(&y, &ones, &target).unwrap(), 0.0);
    }

    #[test]
    fn mask_loss_zero_mask_is_mean_target_magnitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bins = Array3::from_shape_fn((2, 4, 3), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let y = spec_from(Array3::from_elem((2, 4, 3), Complex64::new(5.0, 0.0)));
        let target = spec_from(bins.clone());
        let zeros = Mask::new(Array2::zeros((4, 3))).unwrap();
        let want: f64 = bins.iter().map(|v| v.norm()).sum::<f64>() / bins.len() as f64;
        assert!((mask_loss(&y, &zeros, &target).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn mask_loss_matches_elementwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gen = |rng: &mut ChaCha8Rng| {
            Array3::from_shape_fn((3, 5, 5), |_| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
        };
        let yb = gen(&mut rng);
        let tb = gen(&mut rng);
        let mv = Array2::from_shape_fn((5, 5), |_| rng.gen_range(0.0..1.0));
        let y = spec_from(yb.clone());
        let target = spec_from(tb.clone());
        let mask = Mask::new(mv.clone()).unwrap();
        let got = mask_loss(&y, &mask, &target).unwrap();
        // brute force
        let mut acc = 0.0;
        let mut n = 0usize;
        for c in 0..3 {
            for t in 0..5 {
                for f in 0..5 {
                    acc += (yb[[c, t, f]] * mv[[t, f]] - tb[[c, t, f]]).norm();
                    n += 1;
                }
            }
        }
        assert!((got - acc / n as f64).abs() < 1e-12);
    }

    #[test]
    fn eval_report_serializes_one_line() {
        let r = EvalReport {
            est: "out.wav".into(),
            reference: "ref.wav".into(),
            si_snr_db: 12.5,
            si_snr_improvement_db: None,
            snr_db: 10.0,
            mask_loss: None,
        };
        let line = serde_json::to_string(&r).unwrap();
        assert!(!line.contains('\n'));
        assert!(line.contains("\"si_snr_db\":12.5"));
        assert!(!line.contains("si_snr_improvement_db"));
    }
}
