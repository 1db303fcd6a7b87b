//! Synthetic stimulus-locked recordings and the conditioning chain that turns
//! them into feature vectors: re-referencing, band-pass filtering, subsampling,
//! epoching and feature extraction.

mod conditioning;
pub mod filter;
pub mod io;
mod recording;

pub use conditioning::{
    build_features, class_average, extract_epochs, feature_samples, reference_and_filter, Epoch,
    FeatureVector, ReferenceMode, Subsample, ANTI_ALIAS_FRACTION, FILTER_ORDER,
};
pub use recording::{
    default_channel_gains, generate_recording, generate_sequence, ClassLabel, Onset, Recording,
    RecordingSpec, DEFAULT_NOISE_SD, LEAD_SECONDS, TAIL_SECONDS,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("invalid band [{low}, {high}] Hz at {rate} Hz sampling")]
    InvalidBand { low: f64, high: f64, rate: f64 },
    #[error("cannot subsample {from} Hz to {to} Hz by an integral factor")]
    NonIntegralFactor { from: u32, to: u32 },
    #[error("onset at sample {sample} lacks the 1 s / 2 s margin in a {len}-sample recording")]
    OnsetOutOfRange { sample: usize, len: usize },
    #[error("feature window [{start}, {end}) s outside the epoch")]
    WindowOutOfRange { start: f64, end: f64 },
    #[error("no epochs of class {0:?}")]
    EmptyClass(ClassLabel),
    #[error("malformed data: {0}")]
    Format(String),
}

/// Settings of the full conditioning chain applied to raw recordings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditioningSpec {
    pub reference_channel: usize,
    pub reference_mode: ReferenceMode,
    pub intermediate_rate: u32,
    pub band: (f64, f64),
    pub feature_window: (f64, f64),
    pub feature_rate: u32,
}

impl Default for ConditioningSpec {
    fn default() -> Self {
        Self {
            reference_channel: 0,
            reference_mode: ReferenceMode::Zero,
            intermediate_rate: 250,
            band: (0.1, 70.0),
            feature_window: (0.2, 0.9),
            feature_rate: 20,
        }
    }
}

/// Reference, subsample, band-pass and epoch a raw recording, returning one
/// feature vector per onset in onset order.
pub fn condition_recording<F: Real>(
    raw: &Recording<F>,
    spec: &ConditioningSpec,
) -> Result<Vec<FeatureVector<F>>, SynthError> {
    let reduced = raw.subsample(spec.intermediate_rate)?;
    let clean = reference_and_filter(
        &reduced,
        spec.reference_channel,
        spec.band,
        spec.reference_mode,
    )?;
    extract_epochs(&clean)?
        .iter()
        .map(|e| build_features(e, spec.feature_window, spec.feature_rate))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn sine_recording(freq: f64, rate: u32, seconds: f64) -> Recording<f64> {
        let n = (seconds * rate as f64) as usize;
        let s: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin())
            .collect();
        Recording::new(
            vec!["ref".into(), "sig".into()],
            rate,
            vec![vec![0.0; n], s],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn bandpass_rejects_100hz() {
        let rec = sine_recording(100.0, 250, 20.0);
        let out = reference_and_filter(&rec, 0, (0.1, 70.0), ReferenceMode::Zero).unwrap();
        let ratio = rms(out.channel(1)) / rms(rec.channel(1));
        assert!(ratio < 0.05, "ratio {ratio}");
    }

    #[test]
    fn bandpass_passes_10hz() {
        let rec = sine_recording(10.0, 250, 20.0);
        let out = reference_and_filter(&rec, 0, (0.1, 70.0), ReferenceMode::Zero).unwrap();
        let ratio = rms(out.channel(1)) / rms(rec.channel(1));
        assert!((ratio - 1.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn common_mode_is_rejected() {
        let n = 600;
        let common: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() * 3.0 + 1.0).collect();
        let rec = Recording::new(
            vec!["a".into(), "b".into(), "c".into()],
            250,
            vec![common.clone(), common.clone(), common],
            vec![],
        )
        .unwrap();
        for r in 0..3 {
            let out = reference_and_filter(&rec, r, (0.1, 70.0), ReferenceMode::Zero).unwrap();
            assert!(out.data().iter().flatten().all(|&v| v == 0.0));
        }
        let dropped = reference_and_filter(&rec, 1, (0.1, 70.0), ReferenceMode::Drop).unwrap();
        assert_eq!(dropped.channels(), 2);
    }

    #[test]
    fn invalid_band_rejected() {
        let rec = sine_recording(10.0, 250, 1.0);
        for band in [(0.1, 130.0), (5.0, 5.0), (-1.0, 10.0)] {
            assert!(matches!(
                reference_and_filter(&rec, 0, band, ReferenceMode::Zero),
                Err(SynthError::InvalidBand { .. })
            ));
        }
    }

    #[test]
    fn subsample_examples() {
        let rec = sine_recording(3.0, 1000, 4.0);
        let down = rec.subsample(250).unwrap();
        assert_eq!(down.len(), rec.len() / 4);
        assert_eq!(down.sample_rate(), 250);
        assert_eq!(rec.subsample(1000).unwrap(), rec);
        assert!(matches!(
            rec.subsample(300),
            Err(SynthError::NonIntegralFactor { .. })
        ));

        let flat = Recording::new(vec!["x".into()], 1000, vec![vec![2.5; 1000]], vec![]).unwrap();
        let flat_down = flat.subsample(250).unwrap();
        assert_eq!(flat_down.len(), 250);
        assert!(flat_down.channel(0).iter().all(|v: &f64| (v - 2.5).abs() < 1e-9));
    }

    fn noiseless_spec() -> RecordingSpec {
        RecordingSpec {
            n_targets: 1,
            n_distractors: 3,
            channels: 4,
            noise_sd: 0.0,
            erp_amplitude: 1.0,
            erp_latency: 0.5,
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_target_peaks_at_latency() {
        let rec = generate_recording::<f64>(&noiseless_spec(), 1).unwrap();
        let epochs = extract_epochs(&rec).unwrap();
        let target = epochs.iter().find(|e| e.label().is_target()).unwrap();
        for c in 0..target.channels() {
            let ch = target.channel(c);
            let argmax = (0..ch.len())
                .max_by(|&a, &b| ch[a].partial_cmp(&ch[b]).unwrap())
                .unwrap();
            // time 0 at index 1000, 1 ms per sample
            assert!((argmax as isize - 1500).abs() <= 1, "channel {c}: {argmax}");
        }
    }

    #[test]
    fn epochs_have_three_seconds() {
        let mut spec = noiseless_spec();
        spec.sample_rate = 250;
        let rec = generate_recording::<f64>(&spec, 2).unwrap();
        let epochs = extract_epochs(&rec).unwrap();
        assert_eq!(epochs.len(), 4);
        assert!(epochs.iter().all(|e| e.samples() == 750));
    }

    #[test]
    fn epoch_counts_preserved_for_459_onsets() {
        let spec = RecordingSpec {
            n_targets: 229,
            n_distractors: 230,
            channels: 2,
            sample_rate: 250,
            ..Default::default()
        };
        let rec = generate_recording::<f64>(&spec, 3).unwrap();
        let epochs = extract_epochs(&rec).unwrap();
        assert_eq!(epochs.len(), 459);
        assert_eq!(epochs.iter().filter(|e| e.label().is_target()).count(), 229);
        assert_eq!(epochs.iter().filter(|e| !e.label().is_target()).count(), 230);
    }

    #[test]
    fn early_onset_is_out_of_range() {
        let n = 5000;
        let rec = Recording::new(
            vec!["a".into()],
            1000,
            vec![vec![0.0; n]],
            vec![Onset {
                sample: 500,
                label: ClassLabel::Target,
            }],
        )
        .unwrap();
        assert!(matches!(
            extract_epochs(&rec),
            Err(SynthError::OnsetOutOfRange { .. })
        ));
    }

    #[test]
    fn feature_lengths() {
        let ep = Epoch::new(250, vec![vec![0.0f64; 750]; 31], ClassLabel::Target).unwrap();
        let fv = build_features(&ep, (0.2, 0.9), 20).unwrap();
        assert_eq!(fv.values.len(), 434);
        assert!(fv.values.iter().all(|&v| v == 0.0));
        assert_eq!(fv.label, ClassLabel::Target);

        let one = Epoch::new(250, vec![vec![1.0f64; 750]], ClassLabel::Distractor).unwrap();
        assert_eq!(build_features(&one, (0.0, 1.0), 20).unwrap().values.len(), 20);
        assert!(matches!(
            build_features(&one, (0.5, 2.5), 20),
            Err(SynthError::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn feature_of_ramp_matches_sample_times() {
        // a slow ramp survives the anti-alias filter, so features sample the line
        let ramp: Vec<f64> = (0..750).map(|i| i as f64 / 250.0).collect();
        let ep = Epoch::new(250, vec![ramp], ClassLabel::Target).unwrap();
        let fv = build_features(&ep, (0.2, 0.9), 20).unwrap();
        for (k, v) in fv.values.iter().enumerate() {
            let t = 1.0 + 0.2 + k as f64 / 20.0;
            assert!((v - t).abs() < 1e-6, "k={k} {v} vs {t}");
        }
    }

    #[test]
    fn class_average_examples() {
        let ep = Epoch::new(10, vec![vec![1.0f64; 30], vec![2.0; 30]], ClassLabel::Target).unwrap();
        assert_eq!(class_average(std::slice::from_ref(&ep), ClassLabel::Target).unwrap(), ep.data().to_vec());
        assert!(matches!(
            class_average(&[ep], ClassLabel::Distractor),
            Err(SynthError::EmptyClass(_))
        ));
    }

    #[test]
    fn zero_amplitude_classes_indistinguishable() {
        let spec = RecordingSpec {
            n_targets: 150,
            n_distractors: 150,
            channels: 2,
            sample_rate: 250,
            erp_amplitude: 0.0,
            noise_sd: 1.0,
            onset_interval: 1.0,
            ..Default::default()
        };
        let rec = generate_recording::<f64>(&spec, 4).unwrap();
        let epochs = extract_epochs(&rec).unwrap();
        // mean amplitude over 400-600 ms per epoch, Welch two-sample t statistic
        let stat = |e: &Epoch<f64>| e.channel(1)[350..400].iter().sum::<f64>() / 50.0;
        let (t, d): (Vec<f64>, Vec<f64>) = {
            let t = epochs.iter().filter(|e| e.label().is_target()).map(stat).collect();
            let d = epochs.iter().filter(|e| !e.label().is_target()).map(stat).collect();
            (t, d)
        };
        let mv = |x: &[f64]| {
            let m = x.iter().sum::<f64>() / x.len() as f64;
            let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
            (m, v)
        };
        let ((mt, vt), (md, vd)) = (mv(&t), mv(&d));
        let z = (mt - md) / (vt / t.len() as f64 + vd / d.len() as f64).sqrt();
        assert!(z.abs() < 1.96, "t statistic {z}");
    }
}
