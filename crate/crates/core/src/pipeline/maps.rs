//! Per-user window score maps, either simulated directly or produced by an
//! SVM trained on synthetic recordings.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{derive_seed, ExperimentConfig, PipelineError, Sample, SynthsigSpec};
use crate::classify::{grid_search_cv, simulate_window_scores, train_svm, SvmModel, SvmParams};
use crate::eegmap::{normalize_map, EegMap};
use crate::imaging::{partition_grid, WindowGrid};
use crate::synthsig::{condition_recording, generate_sequence, ClassLabel};

/// Target/distractor labels of every image's windows.
pub fn window_grids(cfg: &ExperimentConfig, samples: &[Sample]) -> Result<Vec<WindowGrid>, PipelineError> {
    let (w, h) = (cfg.dataset.width, cfg.dataset.height);
    let grid = partition_grid(w, h, cfg.grid.cols, cfg.grid.rows)?;
    samples
        .iter()
        .map(|s| Ok(grid.label_windows(&s.mask, cfg.grid.min_overlap)?))
        .collect()
}

fn map_from_scores(grid: &WindowGrid, scores: Vec<f64>) -> Result<EegMap<f64>, PipelineError> {
    Ok(normalize_map(&EegMap::new(grid.geometry, scores)?)?)
}

/// Raw simulated window scores indexed `[user][image][window]`.
pub fn simulate_scores(cfg: &ExperimentConfig, grids: &[WindowGrid]) -> Result<Vec<Vec<Vec<f64>>>, PipelineError> {
    cfg.users
        .iter()
        .enumerate()
        .map(|(u, spec)| {
            grids
                .iter()
                .enumerate()
                .map(|(j, g)| {
                    let seed = derive_seed(cfg.seeds.scores, u as u64, j as u64);
                    Ok(simulate_window_scores(&g.labels, spec, seed)?)
                })
                .collect()
        })
        .collect()
}

/// Normalized simulated maps indexed `[user][image]`.
pub fn simulate_maps(cfg: &ExperimentConfig, grids: &[WindowGrid]) -> Result<Vec<Vec<EegMap<f64>>>, PipelineError> {
    simulate_scores(cfg, grids)?
        .into_iter()
        .map(|per_image| {
            per_image
                .into_iter()
                .zip(grids)
                .map(|(scores, g)| map_from_scores(g, scores))
                .collect()
        })
        .collect()
}

/// Feature vectors of one user's recording over one image, in window order.
/// Windows are presented in a shuffled order, as in a real session.
pub fn image_features(
    spec: &SynthsigSpec,
    grid: &WindowGrid,
    seed: u64,
) -> Result<Vec<Vec<f64>>, PipelineError> {
    let mut order: Vec<usize> = (0..grid.window_count()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let labels: Vec<ClassLabel> = order.iter().map(|&w| ClassLabel::from_target(grid.labels[w])).collect();
    let rec = generate_sequence::<f64>(&spec.recording, &labels, derive_seed(seed, 1, 0))?;
    let features = condition_recording(&rec, &spec.conditioning)?;
    let mut by_window = vec![Vec::new(); grid.window_count()];
    for (w, fv) in order.into_iter().zip(features) {
        by_window[w] = fv.values;
    }
    Ok(by_window)
}

/// Maps available to one (fold, user) unit: training maps feed parameter
/// learning, test maps feed evaluation.
#[derive(Clone, Debug)]
pub struct FoldMaps {
    pub train: Vec<(usize, EegMap<f64>)>,
    pub test: Vec<(usize, EegMap<f64>)>,
}

/// One trained classifier and the maps it produced.
#[derive(Clone, Debug)]
pub struct ClassifierRun {
    pub model: SvmModel<f64>,
    pub cv_auc: f64,
    pub maps: FoldMaps,
}

fn stack(
    features: &[Vec<Vec<f64>>],
    grids: &[WindowGrid],
    images: &[usize],
) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for &j in images {
        x.extend(features[j].iter().cloned());
        y.extend(grids[j].labels.iter().copied());
    }
    (x, y)
}

fn score_images(
    model: &SvmModel<f64>,
    features: &[Vec<Vec<f64>>],
    grids: &[WindowGrid],
    images: &[usize],
) -> Result<Vec<(usize, EegMap<f64>)>, PipelineError> {
    images
        .iter()
        .map(|&j| Ok((j, map_from_scores(&grids[j], model.decision_scores(&features[j])?)?)))
        .collect()
}

/// Grid-searches and trains one user's SVM on `train` images, scores `test`
/// images with it, and scores each training image with a model that did not
/// see it (inner folds over training images, same hyperparameters).
pub fn train_user_classifier(
    spec: &SynthsigSpec,
    features: &[Vec<Vec<f64>>],
    grids: &[WindowGrid],
    train: &[usize],
    test: &[usize],
    seed: u64,
) -> Result<ClassifierRun, PipelineError> {
    let (x, y) = stack(features, grids, train);
    let best = grid_search_cv(&x, &y, &spec.c_grid, &spec.gamma_grid, spec.cv_folds, seed, spec.balanced)?;
    let params = |labels: &[bool]| {
        let p = SvmParams::new(best.c, best.gamma);
        if spec.balanced {
            p.balanced(labels)
        } else {
            p
        }
    };
    let model = train_svm(&x, &y, &params(&y))?;
    let test_maps = score_images(&model, features, grids, test)?;

    let k = spec.inner_folds.min(train.len());
    let mut train_maps = Vec::with_capacity(train.len());
    if k < 2 {
        // a single training image can only be scored in sample
        train_maps = score_images(&model, features, grids, train)?;
    } else {
        let parts: Vec<Vec<(usize, EegMap<f64>)>> = (0..k)
            .into_par_iter()
            .map(|part| {
                let held: Vec<usize> = train.iter().copied().skip(part).step_by(k).collect();
                let rest: Vec<usize> = train.iter().copied().filter(|j| !held.contains(j)).collect();
                let (xi, yi) = stack(features, grids, &rest);
                let inner = train_svm(&xi, &yi, &params(&yi))?;
                score_images(&inner, features, grids, &held)
            })
            .collect::<Result<_, PipelineError>>()?;
        for p in parts {
            train_maps.extend(p);
        }
        train_maps.sort_by_key(|m| m.0);
    }
    Ok(ClassifierRun {
        model,
        cv_auc: best.cv_auc,
        maps: FoldMaps {
            train: train_maps,
            test: test_maps,
        },
    })
}
