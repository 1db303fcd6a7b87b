//! Simulated classifier output per image window: a Bernoulli decision followed
//! by a Gaussian score conditioned on that decision.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::ClassifyError;
use crate::scalar::Real;

pub const DEFAULT_HIT_PROB: f64 = 0.68;
/// Score spread of both decision classes. With symmetric errors the AUC is
/// bounded by the hit probability; this value sits within 0.002 of that bound.
pub const DEFAULT_SCORE_SD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreSimSpec {
    /// Probability that a target window is called target.
    pub hit_prob: f64,
    /// Probability that a distractor window is called target; `None` means
    /// `1 - hit_prob`.
    pub false_alarm_prob: Option<f64>,
    pub target_score: Gaussian,
    pub distractor_score: Gaussian,
}

impl Default for ScoreSimSpec {
    fn default() -> Self {
        Self {
            hit_prob: DEFAULT_HIT_PROB,
            false_alarm_prob: None,
            target_score: Gaussian {
                mean: 1.0,
                sd: DEFAULT_SCORE_SD,
            },
            distractor_score: Gaussian {
                mean: -1.0,
                sd: DEFAULT_SCORE_SD,
            },
        }
    }
}

fn prob_greater(a: Gaussian, b: Gaussian) -> f64 {
    let spread = (a.sd * a.sd + b.sd * b.sd).sqrt();
    if spread == 0.0 {
        return match a.mean.partial_cmp(&b.mean) {
            Some(std::cmp::Ordering::Greater) => 1.0,
            Some(std::cmp::Ordering::Less) => 0.0,
            _ => 0.5,
        };
    }
    0.5 * erfc(-(a.mean - b.mean) / (spread * std::f64::consts::SQRT_2))
}

impl ScoreSimSpec {
    pub fn false_alarm(&self) -> f64 {
        self.false_alarm_prob.unwrap_or(1.0 - self.hit_prob)
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        if !unit(self.hit_prob) || !unit(self.false_alarm()) {
            return Err(ClassifyError::InvalidSpec(format!(
                "decision probabilities {} / {} outside [0, 1]",
                self.hit_prob,
                self.false_alarm()
            )));
        }
        for g in [self.target_score, self.distractor_score] {
            if !(g.sd > 0.0 && g.sd.is_finite() && g.mean.is_finite()) {
                return Err(ClassifyError::InvalidSpec(format!(
                    "score distribution N({}, {}) needs a finite mean and positive sd",
                    g.mean, g.sd
                )));
            }
        }
        Ok(())
    }

    /// Closed-form AUC of simulated scores against window labels: both classes
    /// are two-component Gaussian mixtures, and the AUC is the weighted sum of
    /// pairwise exceedance probabilities.
    pub fn expected_auc(&self) -> f64 {
        let (h, f) = (self.hit_prob, self.false_alarm());
        let comps = [self.target_score, self.distractor_score];
        let tw = [h, 1.0 - h];
        let dw = [f, 1.0 - f];
        let mut total = 0.0;
        for (a, &wa) in comps.iter().zip(&tw) {
            for (b, &wb) in comps.iter().zip(&dw) {
                total += wa * wb * prob_greater(*a, *b);
            }
        }
        total
    }

    /// Copy of the spec whose hit probability (and the symmetric false alarm
    /// rate, when not pinned) gives the requested expected AUC.
    pub fn with_auc(&self, target_auc: f64) -> Result<Self, ClassifyError> {
        self.validate()?;
        let at = |h: f64| {
            let mut s = self.clone();
            s.hit_prob = h;
            s
        };
        let (lo_auc, hi_auc) = (at(0.0).expected_auc(), at(1.0).expected_auc());
        if !(target_auc >= lo_auc.min(hi_auc) && target_auc <= lo_auc.max(hi_auc)) {
            return Err(ClassifyError::InvalidSpec(format!(
                "AUC {target_auc} unreachable (range {lo_auc:.4}..{hi_auc:.4})"
            )));
        }
        // expected_auc is monotone in the hit probability
        let increasing = hi_auc >= lo_auc;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if (at(mid).expected_auc() < target_auc) == increasing {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(at(0.5 * (lo + hi)))
    }
}

/// One score per window; deterministic for a given seed.
pub fn simulate_window_scores<F: Real>(
    labels: &[bool],
    spec: &ScoreSimSpec,
    seed: u64,
) -> Result<Vec<F>, ClassifyError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |g: Gaussian| Normal::new(g.mean, g.sd).expect("validated spec");
    let (called_target, called_distractor) = (normal(spec.target_score), normal(spec.distractor_score));
    let fa = spec.false_alarm();
    Ok(labels
        .iter()
        .map(|&is_target| {
            let p = if is_target { spec.hit_prob } else { fa };
            let score = if rng.gen::<f64>() < p {
                called_target.sample(&mut rng)
            } else {
                called_distractor.sample(&mut rng)
            };
            F::lit(score)
        })
        .collect())
}
