use serde::{Deserialize, Serialize};

use super::filter::SosFilter;
use super::recording::{ClassLabel, Onset, Recording, LEAD_SECONDS, TAIL_SECONDS};
use super::SynthError;
use crate::scalar::Real;

/// Butterworth order used by both the band-pass and the anti-alias stage.
pub const FILTER_ORDER: usize = 4;

/// Anti-alias cutoff as a fraction of the target rate.
pub const ANTI_ALIAS_FRACTION: f64 = 0.4;

/// Signal slice from −1 s to +2 s around one onset; time 0 sits at index
/// `sample_rate`.
#[derive(Clone, Debug, PartialEq)]
pub struct Epoch<F> {
    pub(crate) sample_rate: u32,
    pub(crate) data: Vec<Vec<F>>,
    pub(crate) label: ClassLabel,
}

impl<F: Real> Epoch<F> {
    pub fn new(sample_rate: u32, data: Vec<Vec<F>>, label: ClassLabel) -> Result<Self, SynthError> {
        let expected = epoch_len(sample_rate);
        if data.is_empty() || data.iter().any(|c| c.len() != expected) {
            return Err(SynthError::InvalidSpec(format!(
                "epoch channels must hold {expected} samples"
            )));
        }
        Ok(Self {
            sample_rate,
            data,
            label,
        })
    }

    pub fn channels(&self) -> usize {
        self.data.len()
    }

    pub fn samples(&self) -> usize {
        self.data[0].len()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn label(&self) -> ClassLabel {
        self.label
    }

    pub fn channel(&self, c: usize) -> &[F] {
        &self.data[c]
    }

    pub fn data(&self) -> &[Vec<F>] {
        &self.data
    }
}

fn epoch_len(sample_rate: u32) -> usize {
    ((LEAD_SECONDS + TAIL_SECONDS) * sample_rate as f64).round() as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeatureVector<F: Real> {
    pub values: Vec<F>,
    pub label: ClassLabel,
}

/// How the reference channel itself is treated after re-referencing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceMode {
    /// Keep the channel (it becomes identically zero).
    #[default]
    Zero,
    Drop,
}

/// Subtracts the reference channel from every channel and applies a zero-phase
/// Butterworth band-pass `[low, high]` Hz.
pub fn reference_and_filter<F: Real>(
    rec: &Recording<F>,
    reference_channel: usize,
    band: (f64, f64),
    mode: ReferenceMode,
) -> Result<Recording<F>, SynthError> {
    let fs = rec.sample_rate as f64;
    let (low, high) = band;
    if !(low >= 0.0 && low < high && high < fs / 2.0) {
        return Err(SynthError::InvalidBand { low, high, rate: fs });
    }
    if reference_channel >= rec.channels() {
        return Err(SynthError::InvalidSpec(format!(
            "reference channel {reference_channel} out of {} channels",
            rec.channels()
        )));
    }
    let filter = SosFilter::<F>::butter_bandpass(FILTER_ORDER, low, high, fs);
    let reference = rec.data[reference_channel].clone();
    let mut names = Vec::with_capacity(rec.channels());
    let mut data = Vec::with_capacity(rec.channels());
    for (c, ch) in rec.data.iter().enumerate() {
        if c == reference_channel {
            match mode {
                ReferenceMode::Drop => continue,
                ReferenceMode::Zero => {
                    names.push(rec.channel_names[c].clone());
                    data.push(vec![F::zero(); ch.len()]);
                    continue;
                }
            }
        }
        let referenced: Vec<F> = ch.iter().zip(&reference).map(|(&x, &r)| x - r).collect();
        names.push(rec.channel_names[c].clone());
        data.push(filter.filtfilt(&referenced));
    }
    Recording::new(names, rec.sample_rate, data, rec.onsets.clone())
}

fn decimation_factor(from: u32, to: u32) -> Result<usize, SynthError> {
    if to == 0 || to > from || !from.is_multiple_of(to) {
        return Err(SynthError::NonIntegralFactor { from, to });
    }
    Ok((from / to) as usize)
}

fn decimate<F: Real>(x: &[F], factor: usize, filter: Option<&SosFilter<F>>) -> Vec<F> {
    match filter {
        None => x.to_vec(),
        Some(f) => f.filtfilt(x).into_iter().step_by(factor).collect(),
    }
}

/// Rate reduction by an integral factor: zero-phase anti-alias low-pass at
/// `0.4 × target_rate`, then every k-th sample.
pub trait Subsample: Sized {
    fn subsample(&self, target_rate: u32) -> Result<Self, SynthError>;
}

impl<F: Real> Subsample for Recording<F> {
    fn subsample(&self, target_rate: u32) -> Result<Self, SynthError> {
        let k = decimation_factor(self.sample_rate, target_rate)?;
        let filter = (k > 1).then(|| {
            SosFilter::butter_lowpass(
                FILTER_ORDER,
                ANTI_ALIAS_FRACTION * target_rate as f64,
                self.sample_rate as f64,
            )
        });
        let data = self
            .data
            .iter()
            .map(|c| decimate(c, k, filter.as_ref()))
            .collect();
        // onsets land on the nearest retained sample
        let len = self.len().div_ceil(k);
        let onsets = self
            .onsets
            .iter()
            .map(|o| Onset {
                sample: ((o.sample as f64 / k as f64).round() as usize).min(len - 1),
                label: o.label,
            })
            .collect();
        Recording::new(self.channel_names.clone(), target_rate, data, onsets)
    }
}

impl<F: Real> Subsample for Epoch<F> {
    fn subsample(&self, target_rate: u32) -> Result<Self, SynthError> {
        let k = decimation_factor(self.sample_rate, target_rate)?;
        if k > 1 && (LEAD_SECONDS * target_rate as f64).fract() != 0.0 {
            return Err(SynthError::NonIntegralFactor {
                from: self.sample_rate,
                to: target_rate,
            });
        }
        let filter = (k > 1).then(|| {
            SosFilter::butter_lowpass(
                FILTER_ORDER,
                ANTI_ALIAS_FRACTION * target_rate as f64,
                self.sample_rate as f64,
            )
        });
        let data = self
            .data
            .iter()
            .map(|c| decimate(c, k, filter.as_ref()))
            .collect();
        Epoch::new(target_rate, data, self.label)
    }
}

/// Cuts one epoch per onset.
pub fn extract_epochs<F: Real>(rec: &Recording<F>) -> Result<Vec<Epoch<F>>, SynthError> {
    let fs = rec.sample_rate as f64;
    let lead = (LEAD_SECONDS * fs).round() as usize;
    let span = epoch_len(rec.sample_rate);
    rec.onsets
        .iter()
        .map(|o| {
            if o.sample < lead || o.sample - lead + span > rec.len() {
                return Err(SynthError::OnsetOutOfRange {
                    sample: o.sample,
                    len: rec.len(),
                });
            }
            let start = o.sample - lead;
            let data = rec
                .data
                .iter()
                .map(|c| c[start..start + span].to_vec())
                .collect();
            Epoch::new(rec.sample_rate, data, o.label)
        })
        .collect()
}

/// Number of per-channel feature samples for a post-stimulus window `[start, end)`.
pub fn feature_samples(window: (f64, f64), rate: u32) -> usize {
    ((window.1 - window.0) * rate as f64).round() as usize
}

/// Crops each channel to the post-stimulus window `[start, end)` seconds,
/// resamples it to `rate` Hz and concatenates the channels.
///
/// Feature sample `k` is taken at `start + k / rate` seconds after low-passing
/// at `0.4 × rate`. When that instant falls between two epoch samples the value
/// is interpolated linearly, which allows rates that do not divide the epoch rate
/// (250 Hz epochs to 20 Hz features).
pub fn build_features<F: Real>(
    epoch: &Epoch<F>,
    window: (f64, f64),
    rate: u32,
) -> Result<FeatureVector<F>, SynthError> {
    let (start, end) = window;
    if !(start >= -LEAD_SECONDS && start < end && end <= TAIL_SECONDS)
        || rate == 0
        || rate > epoch.sample_rate
    {
        return Err(SynthError::WindowOutOfRange { start, end });
    }
    let fs = epoch.sample_rate as f64;
    let n = feature_samples(window, rate);
    let filter = (rate < epoch.sample_rate).then(|| {
        SosFilter::<F>::butter_lowpass(FILTER_ORDER, ANTI_ALIAS_FRACTION * rate as f64, fs)
    });
    let last = epoch.samples() - 1;
    let positions: Vec<(usize, F)> = (0..n)
        .map(|k| {
            let pos = (LEAD_SECONDS + start + k as f64 / rate as f64) * fs;
            // snap positions that are integral up to rounding noise
            let pos = if (pos - pos.round()).abs() < 1e-9 { pos.round() } else { pos };
            let i = (pos.floor() as usize).min(last);
            (i, F::lit(pos - i as f64))
        })
        .collect();
    let mut values = Vec::with_capacity(n * epoch.channels());
    for ch in &epoch.data {
        let smoothed;
        let src: &[F] = match &filter {
            Some(f) => {
                smoothed = f.filtfilt(ch);
                &smoothed
            }
            None => ch,
        };
        values.extend(positions.iter().map(|&(i, frac)| {
            if frac == F::zero() || i == last {
                src[i]
            } else {
                src[i] + frac * (src[i + 1] - src[i])
            }
        }));
    }
    Ok(FeatureVector {
        values,
        label: epoch.label,
    })
}

/// Pointwise mean over all epochs of `class`, one waveform per channel.
pub fn class_average<F: Real>(epochs: &[Epoch<F>], class: ClassLabel) -> Result<Vec<Vec<F>>, SynthError> {
    let selected: Vec<&Epoch<F>> = epochs.iter().filter(|e| e.label == class).collect();
    let first = selected.first().ok_or(SynthError::EmptyClass(class))?;
    let mut acc = vec![vec![F::zero(); first.samples()]; first.channels()];
    for e in &selected {
        if e.channels() != first.channels() || e.samples() != first.samples() {
            return Err(SynthError::InvalidSpec("epochs differ in shape".into()));
        }
        for (a, c) in acc.iter_mut().zip(&e.data) {
            a.iter_mut().zip(c).for_each(|(s, &v)| *s += v);
        }
    }
    let n = F::from_count(selected.len());
    acc.iter_mut().flatten().for_each(|v| *v /= n);
    Ok(acc)
}
