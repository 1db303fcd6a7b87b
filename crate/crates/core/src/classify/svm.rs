//! Binary RBF-kernel support vector machine trained by sequential minimal
//! optimization on the soft-margin dual.
//!
//! The dual solved is
//!
//! ```text
//! min ½ αᵀQα − Σα   s.t.  yᵀα = 0,  0 ≤ αᵢ ≤ Cᵢ,   Qᵢⱼ = yᵢyⱼK(xᵢ, xⱼ)
//! ```
//!
//! with second-order working-pair selection. Targets carry `y = +1`, so a
//! positive decision score means "target".

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ClassifyError;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SvmParams<F: Real> {
    pub c: F,
    pub gamma: F,
    /// Stop once the maximal KKT violation drops below this value.
    pub tol: F,
    /// Iteration cap; `0` picks a cap proportional to the training-set size.
    pub max_iter: usize,
    /// Optional `(target, distractor)` multipliers on `C`.
    pub class_weights: Option<(F, F)>,
}

impl<F: Real> SvmParams<F> {
    pub fn new(c: F, gamma: F) -> Self {
        Self {
            c,
            gamma,
            tol: F::lit(1e-3),
            max_iter: 0,
            class_weights: None,
        }
    }

    /// Weights each class's `C` inversely to its frequency in `labels`.
    pub fn balanced(mut self, labels: &[bool]) -> Self {
        let n = F::from_count(labels.len());
        let pos = F::from_count(labels.iter().filter(|&&l| l).count().max(1));
        let neg = F::from_count(labels.iter().filter(|&&l| !l).count().max(1));
        let two = F::lit(2.0);
        self.class_weights = Some((n / (two * pos), n / (two * neg)));
        self
    }

    fn validate(&self) -> Result<(), ClassifyError> {
        if !(self.c > F::zero()) || !(self.gamma > F::zero()) {
            return Err(ClassifyError::NonPositiveHyperparameter);
        }
        if let Some((a, b)) = self.class_weights {
            if !(a > F::zero() && b > F::zero()) {
                return Err(ClassifyError::NonPositiveHyperparameter);
            }
        }
        Ok(())
    }

    pub(crate) fn upper_bounds(&self, y: &[bool]) -> Vec<F> {
        let (wp, wn) = self.class_weights.unwrap_or((F::one(), F::one()));
        y.iter()
            .map(|&t| self.c * if t { wp } else { wn })
            .collect()
    }
}

/// Per-component standardization to zero mean and unit standard deviation.
/// Constant components keep a divisor of one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Standardizer<F: Real> {
    pub mean: Vec<F>,
    pub std: Vec<F>,
}

impl<F: Real> Standardizer<F> {
    pub fn fit(rows: &[&[F]]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let n = F::from_count(rows.len().max(1));
        let mut mean = vec![F::zero(); d];
        for r in rows {
            mean.iter_mut().zip(r.iter()).for_each(|(m, &v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![F::zero(); d];
        for r in rows {
            for ((s, &v), &m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > F::zero() {
                    sd
                } else {
                    F::one()
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[F]) -> Vec<F> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect()
    }
}

pub(crate) fn sq_dist<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Row-major `a.len() × b.len()` matrix of squared Euclidean distances.
pub(crate) fn cross_sq_dists<F: Real>(a: &[Vec<F>], b: &[Vec<F>]) -> Vec<F> {
    a.par_iter()
        .flat_map_iter(|x| b.iter().map(move |z| sq_dist(x, z)))
        .collect()
}

/// Symmetric squared-distance matrix of `a` with itself.
pub(crate) fn self_sq_dists<F: Real>(a: &[Vec<F>]) -> Vec<F> {
    let n = a.len();
    let rows: Vec<Vec<F>> = (0..n)
        .into_par_iter()
        .map(|i| (0..i).map(|j| sq_dist(&a[i], &a[j])).collect())
        .collect();
    let mut out = vec![F::zero(); n * n];
    for (i, row) in rows.iter().enumerate() {
        for (j, &d) in row.iter().enumerate() {
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    out
}

pub(crate) fn rbf_from_dists<F: Real>(dists: &[F], gamma: F) -> Vec<F> {
    dists.par_iter().map(|&d| (-gamma * d).exp()).collect()
}

/// Solution of the dual problem.
#[derive(Clone, Debug)]
pub(crate) struct DualSolution<F> {
    pub alpha: Vec<F>,
    pub rho: F,
    pub objective: F,
    pub iterations: usize,
    pub converged: bool,
}

const TAU: f64 = 1e-12;

/// SMO on a dense kernel matrix `kernel` (row-major `n × n`).
pub(crate) fn solve_dual<F: Real>(
    kernel: &[F],
    y: &[bool],
    upper: &[F],
    tol: F,
    max_iter: usize,
) -> DualSolution<F> {
    let n = y.len();
    debug_assert_eq!(kernel.len(), n * n);
    let sign = |t: usize| if y[t] { F::one() } else { -F::one() };
    let kd = |i: usize| kernel[i * n + i];
    let tau = F::lit(TAU);
    let mut alpha = vec![F::zero(); n];
    let mut grad = vec![-F::one(); n];
    let max_iter = if max_iter == 0 {
        (100 * n).max(100_000)
    } else {
        max_iter
    };
    let is_upper = |a: F, t: usize| a >= upper[t];
    let is_lower = |a: F| a <= F::zero();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // i: maximal violator in I_up
        let mut gmax = F::neg_infinity();
        let mut i_sel = None;
        for t in 0..n {
            let in_up = if y[t] { !is_upper(alpha[t], t) } else { !is_lower(alpha[t]) };
            if in_up {
                let v = -sign(t) * grad[t];
                if v >= gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        // j: second-order choice in I_low
        let mut gmax2 = F::neg_infinity();
        let mut obj_min = F::infinity();
        let mut j_sel = None;
        if let Some(i) = i_sel {
            let ki = &kernel[i * n..(i + 1) * n];
            for t in 0..n {
                let in_low = if y[t] { !is_lower(alpha[t]) } else { !is_upper(alpha[t], t) };
                if !in_low {
                    continue;
                }
                let v = sign(t) * grad[t];
                if v >= gmax2 {
                    gmax2 = v;
                }
                let b = gmax + v;
                if b > F::zero() {
                    let mut a = kd(i) + kd(t) - F::lit(2.0) * ki[t];
                    if a <= F::zero() {
                        a = tau;
                    }
                    let obj = -(b * b) / a;
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if gmax + gmax2 >= tol => (i, j),
            _ => {
                converged = true;
                break;
            }
        };
        iterations += 1;

        let (ci, cj) = (upper[i], upper[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = kernel[i * n + j];
        let mut quad = kd(i) + kd(j) - F::lit(2.0) * kij;
        if quad <= F::zero() {
            quad = tau;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > F::zero() {
                if alpha[j] < F::zero() {
                    alpha[j] = F::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < F::zero() {
                alpha[i] = F::zero();
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < F::zero() {
                alpha[j] = F::zero();
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < F::zero() {
                alpha[i] = F::zero();
                alpha[j] = sum;
            }
        }

        // G_t += Q_ti Δα_i + Q_tj Δα_j
        let di = (alpha[i] - old_i) * sign(i);
        let dj = (alpha[j] - old_j) * sign(j);
        let ki = &kernel[i * n..(i + 1) * n];
        let kj = &kernel[j * n..(j + 1) * n];
        for t in 0..n {
            grad[t] += sign(t) * (ki[t] * di + kj[t] * dj);
        }
    }

    // offset from free variables, or the midpoint of the feasible interval
    let mut ub = F::infinity();
    let mut lb = F::neg_infinity();
    let mut sum_free = F::zero();
    let mut n_free = 0usize;
    for t in 0..n {
        let yg = sign(t) * grad[t];
        if is_upper(alpha[t], t) {
            if y[t] {
                lb = lb.max(yg);
            } else {
                ub = ub.min(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / F::from_count(n_free)
    } else {
        (ub + lb) / F::lit(2.0)
    };
    let objective = alpha
        .iter()
        .zip(&grad)
        .map(|(&a, &g)| a * (g - F::one()))
        .sum::<F>()
        / F::lit(2.0);
    DualSolution {
        alpha,
        rho,
        objective,
        iterations,
        converged,
    }
}

/// Trained classifier. Support vectors are stored in standardized space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SvmModel<F: Real> {
    pub support_vectors: Vec<Vec<F>>,
    /// `yᵢαᵢ` for each support vector.
    pub dual_coefficients: Vec<F>,
    pub bias: F,
    pub gamma: F,
    pub c: F,
    pub normalization: Standardizer<F>,
    /// Value of the minimized dual objective at the solution.
    pub dual_objective: F,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn check_training_data<F: Real>(x: &[Vec<F>], y: &[bool]) -> Result<usize, ClassifyError> {
    if x.len() != y.len() {
        return Err(ClassifyError::DimensionMismatch {
            expected: y.len(),
            actual: x.len(),
        });
    }
    if !y.iter().any(|&l| l) || !y.iter().any(|&l| !l) {
        return Err(ClassifyError::SingleClassData);
    }
    let d = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(ClassifyError::DimensionMismatch {
            expected: d,
            actual: bad.len(),
        });
    }
    Ok(d)
}

/// Fits normalization on `x`, then solves the dual.
pub fn train_svm<F: Real>(x: &[Vec<F>], y: &[bool], params: &SvmParams<F>) -> Result<SvmModel<F>, ClassifyError> {
    params.validate()?;
    check_training_data(x, y)?;
    let rows: Vec<&[F]> = x.iter().map(Vec::as_slice).collect();
    let norm = Standardizer::fit(&rows);
    let z: Vec<Vec<F>> = x.iter().map(|r| norm.apply(r)).collect();
    let kernel = rbf_from_dists(&self_sq_dists(&z), params.gamma);
    let sol = solve_dual(&kernel, y, &params.upper_bounds(y), params.tol, params.max_iter);
    Ok(SvmModel::from_solution(z, y, sol, params, norm))
}

impl<F: Real> SvmModel<F> {
    fn from_solution(
        z: Vec<Vec<F>>,
        y: &[bool],
        sol: DualSolution<F>,
        params: &SvmParams<F>,
        normalization: Standardizer<F>,
    ) -> Self {
        let mut support_vectors = Vec::new();
        let mut dual_coefficients = Vec::new();
        for ((row, &a), &t) in z.into_iter().zip(&sol.alpha).zip(y) {
            if a > F::zero() {
                support_vectors.push(row);
                dual_coefficients.push(if t { a } else { -a });
            }
        }
        Self {
            support_vectors,
            dual_coefficients,
            bias: -sol.rho,
            gamma: params.gamma,
            c: params.c,
            normalization,
            dual_objective: sol.objective,
            iterations: sol.iterations,
            converged: sol.converged,
        }
    }

    pub fn dim(&self) -> usize {
        self.normalization.dim()
    }

    /// Signed distance-like score; positive means target.
    pub fn decision_score(&self, x: &[F]) -> Result<F, ClassifyError> {
        if x.len() != self.dim() {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(self.score_standardized(&self.normalization.apply(x)))
    }

    pub(crate) fn score_standardized(&self, z: &[F]) -> F {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefficients)
            .map(|(sv, &c)| c * (-self.gamma * sq_dist(sv, z)).exp())
            .sum::<F>()
            + self.bias
    }

    pub fn decision_scores(&self, xs: &[Vec<F>]) -> Result<Vec<F>, ClassifyError> {
        xs.par_iter().map(|x| self.decision_score(x)).collect()
    }

    pub fn predict(&self, x: &[F]) -> Result<bool, ClassifyError> {
        Ok(self.decision_score(x)? > F::zero())
    }
}

const MODEL_FORMAT: &str = "eegseg-svm";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct ModelFile<F: Real> {
    format: String,
    version: u32,
    model: SvmModel<F>,
}

impl<F: Real> SvmModel<F> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifyError> {
        let file: ModelFile<F> =
            serde_json::from_str(text).map_err(|e| ClassifyError::Format(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(ClassifyError::Format(format!(
                "unsupported model file {} v{}",
                file.format, file.version
            )));
        }
        Ok(file.model)
    }
}
