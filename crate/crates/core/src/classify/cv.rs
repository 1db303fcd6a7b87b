//! Stratified k-fold cross-validation over a (C, gamma) grid, scored by AUC.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::auc;
use super::svm::{check_training_data, cross_sq_dists, rbf_from_dists, self_sq_dists, solve_dual, SvmParams, Standardizer};
use super::ClassifyError;
use crate::scalar::Real;

pub const DEFAULT_C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
/// Multiplied by `1 / feature dimension` before use.
pub const DEFAULT_GAMMA_GRID: [f64; 4] = [1e-4, 1e-3, 1e-2, 1e-1];

/// Fold index for each example. Each class is shuffled and dealt round-robin,
/// so every fold holds both classes whenever each class has at least `k` members.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Result<Vec<usize>, ClassifyError> {
    if k < 2 {
        return Err(ClassifyError::DegenerateFolds {
            folds: k,
            reason: "need at least two folds".into(),
        });
    }
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.len() < k || neg.len() < k {
        return Err(ClassifyError::DegenerateFolds {
            folds: k,
            reason: format!("{} targets and {} distractors", pos.len(), neg.len()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold = vec![0; labels.len()];
    for (j, &i) in pos.iter().chain(&neg).enumerate() {
        fold[i] = j % k;
    }
    let mut seen = vec![(false, false); k];
    for (&f, &l) in fold.iter().zip(labels) {
        if l {
            seen[f].0 = true;
        } else {
            seen[f].1 = true;
        }
    }
    assert!(seen.iter().all(|&(p, n)| p && n), "single-class fold");
    Ok(fold)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GridPoint<F: Real> {
    pub c: F,
    pub gamma: F,
    pub fold_aucs: Vec<f64>,
    pub mean_auc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GridSearchResult<F: Real> {
    pub c: F,
    pub gamma: F,
    pub cv_auc: f64,
    /// Every evaluated point, ordered by C then gamma.
    pub points: Vec<GridPoint<F>>,
}

/// Cross-validated grid search returning the point of maximal mean fold AUC,
/// preferring smaller C and then smaller gamma among ties.
pub fn grid_search_cv<F: Real>(
    x: &[Vec<F>],
    y: &[bool],
    c_grid: &[F],
    gamma_grid: &[F],
    folds: usize,
    seed: u64,
    balanced: bool,
) -> Result<GridSearchResult<F>, ClassifyError> {
    check_training_data(x, y)?;
    if c_grid.is_empty() || gamma_grid.is_empty() {
        return Err(ClassifyError::NonPositiveHyperparameter);
    }
    let mut cs = c_grid.to_vec();
    let mut gammas = gamma_grid.to_vec();
    cs.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    gammas.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    for &v in cs.iter().chain(&gammas) {
        if !(v > F::zero()) {
            return Err(ClassifyError::NonPositiveHyperparameter);
        }
    }
    let fold_of = stratified_folds(y, folds, seed)?;

    // fold_aucs[f][ci * gammas.len() + gi]
    let mut fold_aucs: Vec<Vec<f64>> = Vec::with_capacity(folds);
    for f in 0..folds {
        let train: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] != f).collect();
        let val: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] == f).collect();
        let rows: Vec<&[F]> = train.iter().map(|&i| x[i].as_slice()).collect();
        let norm = Standardizer::fit(&rows);
        let zt: Vec<Vec<F>> = train.iter().map(|&i| norm.apply(&x[i])).collect();
        let zv: Vec<Vec<F>> = val.iter().map(|&i| norm.apply(&x[i])).collect();
        let yt: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let yv: Vec<bool> = val.iter().map(|&i| y[i]).collect();
        let dt = self_sq_dists(&zt);
        let dv = cross_sq_dists(&zv, &zt);
        let mut aucs = vec![0.0; cs.len() * gammas.len()];
        for (gi, &gamma) in gammas.iter().enumerate() {
            let kt = rbf_from_dists(&dt, gamma);
            let kv = rbf_from_dists(&dv, gamma);
            let per_c: Vec<Result<f64, ClassifyError>> = cs
                .par_iter()
                .map(|&c| {
                    let mut params = SvmParams::new(c, gamma);
                    if balanced {
                        params = params.balanced(&yt);
                    }
                    let upper = params.upper_bounds(&yt);
                    let sol = solve_dual(&kt, &yt, &upper, params.tol, params.max_iter);
                    let nt = yt.len();
                    let scores: Vec<F> = (0..yv.len())
                        .map(|v| {
                            let row = &kv[v * nt..(v + 1) * nt];
                            (0..nt)
                                .filter(|&j| sol.alpha[j] > F::zero())
                                .map(|j| {
                                    let a = if yt[j] { sol.alpha[j] } else { -sol.alpha[j] };
                                    a * row[j]
                                })
                                .sum::<F>()
                                - sol.rho
                        })
                        .collect();
                    auc(&scores, &yv)
                })
                .collect();
            for (ci, r) in per_c.into_iter().enumerate() {
                aucs[ci * gammas.len() + gi] = r?;
            }
        }
        fold_aucs.push(aucs);
    }

    let mut points = Vec::with_capacity(cs.len() * gammas.len());
    for (ci, &c) in cs.iter().enumerate() {
        for (gi, &gamma) in gammas.iter().enumerate() {
            let per_fold: Vec<f64> = fold_aucs.iter().map(|a| a[ci * gammas.len() + gi]).collect();
            let mean_auc = per_fold.iter().sum::<f64>() / folds as f64;
            points.push(GridPoint {
                c,
                gamma,
                fold_aucs: per_fold,
                mean_auc,
            });
        }
    }
    let best = points
        .iter()
        .fold(None::<&GridPoint<F>>, |best, p| match best {
            Some(b) if b.mean_auc >= p.mean_auc => Some(b),
            _ => Some(p),
        })
        .expect("non-empty grid");
    Ok(GridSearchResult {
        c: best.c,
        gamma: best.gamma,
        cv_auc: best.mean_auc,
        points,
    })
}
