//! Parameter learning on training images: the threshold for configuration A,
//! the (p, sigma) pair for B and the (p1, p2, sigma) triple for C.
//!
//! A and B are learned per image by exhaustive sweeps and averaged over
//! images. C is learned jointly over all training images by random search on
//! `1 - mean Jaccard`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eegmap::{gaussian_filter, EegMap, EegMapError};
use crate::grabcut::GrabcutParams;
use crate::imaging::{jaccard, BinaryMask, ImagingError};
use crate::scalar::{min_max, Real};
use crate::segment::{segment_c, Scene, SegmentError};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("no training images")]
    EmptyTrainingSet,
    #[error("{maps} maps but {masks} ground-truth masks")]
    LengthMismatch { maps: usize, masks: usize },
    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),
    #[error(transparent)]
    Map(#[from] EegMapError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

pub const SIGMA_STEPS: usize = 70;
pub const P_STEPS: usize = 100;
pub const ALPHA_STEPS: usize = 100;

/// `k/100` for `k = 1..=100`.
pub fn alpha_grid() -> Vec<f64> {
    (1..=ALPHA_STEPS).map(|k| k as f64 / ALPHA_STEPS as f64).collect()
}

/// 100 values from 0 to 1 inclusive.
pub fn p_grid() -> Vec<f64> {
    (0..P_STEPS).map(|k| k as f64 / (P_STEPS - 1) as f64).collect()
}

/// Zero followed by 70 uniform steps up to `sigma_max`.
pub fn sigma_grid(sigma_max: f64) -> Vec<f64> {
    (0..=SIGMA_STEPS)
        .map(|k| k as f64 * sigma_max / SIGMA_STEPS as f64)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamSpace {
    pub sigma_range: (f64, f64),
    pub p1_range: (f64, f64),
    pub p2_range: (f64, f64),
    pub n_trials: usize,
}

impl Default for ParamSpace {
    fn default() -> Self {
        Self {
            sigma_range: (0.0, 70.0),
            p1_range: (0.0, 0.5),
            p2_range: (0.5, 1.0),
            n_trials: 1000,
        }
    }
}

impl ParamSpace {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let (s0, s1) = self.sigma_range;
        let (a0, a1) = self.p1_range;
        let (b0, b1) = self.p2_range;
        let ok = s0 >= 0.0
            && s0 <= s1
            && s1.is_finite()
            && a0 >= 0.0
            && a0 < a1
            && a1 <= 0.5
            && b0 >= 0.5
            && b0 <= b1
            && b1 <= 1.0
            && self.n_trials >= 1;
        if !ok {
            return Err(OptimizeError::InvalidSpace(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_range.1
    }

    /// Uniform draw; p1 stays strictly below the top of its half-open range.
    pub fn sample(&self, rng: &mut impl Rng) -> Triple {
        Triple {
            p1: rng.gen_range(self.p1_range.0..self.p1_range.1),
            p2: rng.gen_range(self.p2_range.0..=self.p2_range.1),
            sigma: rng.gen_range(self.sigma_range.0..=self.sigma_range.1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub p1: f64,
    pub p2: f64,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: Triple,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub seed: u64,
    pub best: Trial,
    pub trials: Vec<Trial>,
}

impl SearchOutcome {
    /// `seed,trial,p1,p2,sigma,error` with a header line.
    pub fn trial_log_csv(&self) -> String {
        let mut out = String::from("seed,trial,p1,p2,sigma,error\n");
        for t in &self.trials {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.seed, t.index, t.params.p1, t.params.p2, t.params.sigma, t.error
            )
            .expect("write to string");
        }
        out
    }
}

/// Draws `n_trials` triples in sequence, evaluates them (in parallel) and
/// returns the lowest error, earliest draw first among ties.
pub fn random_search<O>(objective: O, space: &ParamSpace, seed: u64) -> Result<SearchOutcome, OptimizeError>
where
    O: Fn(&Triple) -> f64 + Sync,
{
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Triple> = (0..space.n_trials).map(|_| space.sample(&mut rng)).collect();
    let trials: Vec<Trial> = draws
        .par_iter()
        .enumerate()
        .map(|(index, t)| Trial {
            index,
            params: *t,
            error: objective(t),
        })
        .collect();
    let best = *trials
        .iter()
        .fold(None::<&Trial>, |best, t| match best {
            Some(b) if b.error <= t.error => Some(b),
            _ => Some(t),
        })
        .expect("at least one trial");
    Ok(SearchOutcome { seed, best, trials })
}

/// Jaccard index of `values > cutoff` against `gt` for every cutoff.
pub(crate) fn jaccard_sweep<F: Real>(values: &[F], gt: &[bool], cutoffs: &[F]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite map"));
    let mut hits = Vec::with_capacity(values.len() + 1);
    hits.push(0usize);
    for &i in &order {
        hits.push(hits.last().expect("seeded") + gt[i] as usize);
    }
    let gt_total = *hits.last().expect("seeded");
    cutoffs
        .iter()
        .map(|&c| {
            let above = order.partition_point(|&i| values[i] > c);
            let tp = hits[above];
            let union = above + gt_total - tp;
            if union == 0 {
                1.0
            } else {
                tp as f64 / union as f64
            }
        })
        .collect()
}

/// Index of the first maximum.
fn first_max(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

fn check_pairs<F>(maps: &[EegMap<F>], gts: &[BinaryMask]) -> Result<(), OptimizeError> {
    if maps.is_empty() {
        return Err(OptimizeError::EmptyTrainingSet);
    }
    if maps.len() != gts.len() {
        return Err(OptimizeError::LengthMismatch {
            maps: maps.len(),
            masks: gts.len(),
        });
    }
    Ok(())
}

/// Jaccard-maximizing threshold of one normalized map, and its Jaccard.
pub fn best_alpha<F: Real>(map: &EegMap<F>, gt: &BinaryMask) -> Result<(f64, f64), OptimizeError> {
    if !map.is_normalized() {
        return Err(EegMapError::MapNotNormalized.into());
    }
    let pixels = map.rasterize();
    crate::imaging::same_dims(pixels.dims(), gt.dims())?;
    let grid = alpha_grid();
    let cutoffs: Vec<F> = grid.iter().map(|&a| F::lit(a)).collect();
    let js = jaccard_sweep(pixels.values(), gt.bits(), &cutoffs);
    let i = first_max(&js);
    Ok((grid[i], js[i]))
}

/// Mean over images of each image's best threshold.
pub fn learn_alpha<F: Real>(maps: &[EegMap<F>], gts: &[BinaryMask]) -> Result<f64, OptimizeError> {
    check_pairs(maps, gts)?;
    let per_image = maps
        .iter()
        .zip(gts)
        .map(|(m, g)| best_alpha(m, g).map(|r| r.0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(per_image.iter().sum::<f64>() / per_image.len() as f64)
}

/// Best `(p, sigma, jaccard)` for one image over the full grid; smaller sigma,
/// then smaller p, wins ties.
pub fn best_filter_params<F: Real>(
    map: &EegMap<F>,
    gt: &BinaryMask,
    sigma_max: f64,
) -> Result<(f64, f64, f64), OptimizeError> {
    let raster = map.rasterize();
    crate::imaging::same_dims(raster.dims(), gt.dims())?;
    let ps = p_grid();
    let sigmas = sigma_grid(sigma_max);
    let per_sigma: Vec<(usize, f64)> = sigmas
        .par_iter()
        .map(|&s| -> Result<(usize, f64), OptimizeError> {
            let f = gaussian_filter(&raster, s)?;
            let Some((lo, hi)) = min_max(f.values()).filter(|(lo, hi)| hi > lo) else {
                // a constant map thresholds to nothing at every p
                let empty = jaccard(&BinaryMask::empty(gt.width(), gt.height())?, gt)?;
                return Ok((0, empty));
            };
            let cutoffs: Vec<F> = ps.iter().map(|&p| lo + F::lit(p) * (hi - lo)).collect();
            let js = jaccard_sweep(f.values(), gt.bits(), &cutoffs);
            let i = first_max(&js);
            Ok((i, js[i]))
        })
        .collect::<Result<_, _>>()?;
    let scores: Vec<f64> = per_sigma.iter().map(|r| r.1).collect();
    let si = first_max(&scores);
    Ok((ps[per_sigma[si].0], sigmas[si], scores[si]))
}

/// Mean `(p, sigma)` over the per-image optima.
pub fn learn_filter_params<F: Real>(
    maps: &[EegMap<F>],
    gts: &[BinaryMask],
    sigma_max: f64,
) -> Result<(f64, f64), OptimizeError> {
    check_pairs(maps, gts)?;
    let per_image = maps
        .iter()
        .zip(gts)
        .map(|(m, g)| best_filter_params(m, g, sigma_max))
        .collect::<Result<Vec<_>, _>>()?;
    let n = per_image.len() as f64;
    Ok((
        per_image.iter().map(|r| r.0).sum::<f64>() / n,
        per_image.iter().map(|r| r.1).sum::<f64>() / n,
    ))
}

/// `1 − mean Jaccard` of configuration C over `scenes`.
pub fn grabcut_error<F: Real>(
    scenes: &[Scene<'_, F>],
    t: &Triple,
    params: &GrabcutParams,
) -> Result<f64, OptimizeError> {
    if scenes.is_empty() {
        return Err(OptimizeError::EmptyTrainingSet);
    }
    let mut total = 0.0;
    for s in scenes {
        let mask = segment_c(s.map, s.session, t.p1, t.p2, t.sigma, params)?;
        total += jaccard(&mask, s.gt)?;
    }
    Ok(1.0 - total / scenes.len() as f64)
}

/// Random search for configuration C's triple. Failures inside a trial count
/// as the worst error.
pub fn learn_grabcut_params<F: Real>(
    scenes: &[Scene<'_, F>],
    space: &ParamSpace,
    params: &GrabcutParams,
    seed: u64,
) -> Result<SearchOutcome, OptimizeError> {
    if scenes.is_empty() {
        return Err(OptimizeError::EmptyTrainingSet);
    }
    random_search(|t| grabcut_error(scenes, t, params).unwrap_or(1.0), space, seed)
}

/// Parameters of all three configurations learned for one user on one fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnedParams {
    pub fold: Option<usize>,
    pub user: Option<usize>,
    pub alpha: f64,
    pub p: f64,
    pub sigma_b: f64,
    pub p1: f64,
    pub p2: f64,
    pub sigma_c: f64,
    /// Training error of the C triple.
    pub train_error_c: f64,
}

impl LearnedParams {
    pub fn triple(&self) -> Triple {
        Triple {
            p1: self.p1,
            p2: self.p2,
            sigma: self.sigma_c,
        }
    }

    /// Componentwise mean.
    pub fn mean(all: &[LearnedParams]) -> Option<LearnedParams> {
        if all.is_empty() {
            return None;
        }
        let n = all.len() as f64;
        let avg = |f: fn(&LearnedParams) -> f64| all.iter().map(f).sum::<f64>() / n;
        Some(LearnedParams {
            fold: None,
            user: None,
            alpha: avg(|l| l.alpha),
            p: avg(|l| l.p),
            sigma_b: avg(|l| l.sigma_b),
            p1: avg(|l| l.p1),
            p2: avg(|l| l.p2),
            sigma_c: avg(|l| l.sigma_c),
            train_error_c: avg(|l| l.train_error_c),
        })
    }
}

/// Learns every configuration's parameters from `scenes`; also returns the
/// search log of configuration C.
pub fn learn_all<F: Real>(
    scenes: &[Scene<'_, F>],
    space: &ParamSpace,
    params: &GrabcutParams,
    seed: u64,
) -> Result<(LearnedParams, SearchOutcome), OptimizeError> {
    let maps: Vec<EegMap<F>> = scenes.iter().map(|s| s.map.clone()).collect();
    let gts: Vec<BinaryMask> = scenes.iter().map(|s| s.gt.clone()).collect();
    let alpha = learn_alpha(&maps, &gts)?;
    let (p, sigma_b) = learn_filter_params(&maps, &gts, space.sigma_max())?;
    let search = learn_grabcut_params(scenes, space, params, seed)?;
    let learned = LearnedParams {
        fold: None,
        user: None,
        alpha,
        p,
        sigma_b,
        p1: search.best.params.p1,
        p2: search.best.params.p2,
        sigma_c: search.best.params.sigma,
        train_error_c: search.best.error,
    };
    Ok((learned, search))
}
