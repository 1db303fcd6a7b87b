//! Full-covariance Gaussian mixtures over RGB colors, fitted by EM.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GrabcutError;
use crate::imaging::Rgb;
use crate::scalar::Real;

pub const DEFAULT_COMPONENTS: usize = 5;
pub const COVARIANCE_REGULARIZATION: f64 = 1e-6;
const EM_MAX_ITER: usize = 100;
const EM_REL_TOL: f64 = 1e-5;

pub type Vec3<F> = [F; 3];
pub type Mat3<F> = [[F; 3]; 3];

/// Lower Cholesky factor of a symmetric positive-definite matrix.
fn cholesky<F: Real>(m: &Mat3<F>) -> Option<Mat3<F>> {
    let mut l = [[F::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > F::zero()) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
struct Component<F: Real> {
    weight: F,
    mean: Vec3<F>,
    covariance: Mat3<F>,
    #[serde(skip)]
    chol: Mat3<F>,
    #[serde(skip)]
    log_norm: F,
}

impl<F: Real> Component<F> {
    fn new(weight: F, mean: Vec3<F>, covariance: Mat3<F>) -> Option<Self> {
        let chol = cholesky(&covariance)?;
        let log_det = (0..3).map(|i| chol[i][i].ln()).sum::<F>() * F::lit(2.0);
        let log_norm = weight.ln() - F::lit(0.5) * (log_det + F::lit(3.0) * (F::lit(2.0) * F::PI()).ln());
        Some(Self {
            weight,
            mean,
            covariance,
            chol,
            log_norm,
        })
    }

    /// `log(weight · N(x; mean, covariance))`.
    fn log_weighted_density(&self, x: &Vec3<F>) -> F {
        let d = [x[0] - self.mean[0], x[1] - self.mean[1], x[2] - self.mean[2]];
        let l = &self.chol;
        let y0 = d[0] / l[0][0];
        let y1 = (d[1] - l[1][0] * y0) / l[1][1];
        let y2 = (d[2] - l[2][0] * y0 - l[2][1] * y1) / l[2][2];
        self.log_norm - F::lit(0.5) * (y0 * y0 + y1 * y1 + y2 * y2)
    }
}

/// Mixture model; component weights sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Gmm<F: Real> {
    components: Vec<Component<F>>,
}

impl<F: Real> Gmm<F> {
    /// Validates weights (a simplex) and covariances (positive definite).
    pub fn new(weights: Vec<F>, means: Vec<Vec3<F>>, covariances: Vec<Mat3<F>>) -> Result<Self, GrabcutError> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != covariances.len() {
            return Err(GrabcutError::InvalidModel("component arrays differ in length".into()));
        }
        let total: F = weights.iter().copied().sum();
        if weights.iter().any(|&w| !(w > F::zero())) || (total - F::one()).abs() > F::lit(1e-6) {
            return Err(GrabcutError::InvalidModel("weights must be positive and sum to 1".into()));
        }
        let components = weights
            .into_iter()
            .zip(means)
            .zip(covariances)
            .map(|((w, m), c)| {
                Component::new(w, m, c)
                    .ok_or_else(|| GrabcutError::InvalidModel("covariance not positive definite".into()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { components })
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn weights(&self) -> Vec<F> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn means(&self) -> Vec<Vec3<F>> {
        self.components.iter().map(|c| c.mean).collect()
    }

    pub fn covariances(&self) -> Vec<Mat3<F>> {
        self.components.iter().map(|c| c.covariance).collect()
    }

    /// `-log p(x)` under the mixture.
    pub fn neg_log_likelihood(&self, x: &Vec3<F>) -> F {
        let logs: Vec<F> = self.components.iter().map(|c| c.log_weighted_density(x)).collect();
        -log_sum_exp(&logs)
    }
}

pub fn gmm_neg_loglik<F: Real>(g: &Gmm<F>, pixel: Rgb) -> F {
    g.neg_log_likelihood(&to_vec3(pixel))
}

pub(crate) fn to_vec3<F: Real>(c: Rgb) -> Vec3<F> {
    [F::from_count(c[0] as usize), F::from_count(c[1] as usize), F::from_count(c[2] as usize)]
}

fn log_sum_exp<F: Real>(v: &[F]) -> F {
    let m = v.iter().copied().fold(F::neg_infinity(), F::max);
    if m == F::neg_infinity() {
        return m;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<F>().ln()
}

/// Distinct colors with multiplicities, in ascending color order.
pub(crate) fn color_histogram(pixels: &[Rgb]) -> (Vec<Rgb>, Vec<usize>) {
    let mut sorted = pixels.to_vec();
    sorted.sort_unstable();
    let mut colors: Vec<Rgb> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for c in sorted {
        if colors.last() == Some(&c) {
            *counts.last_mut().expect("paired with colors") += 1;
        } else {
            colors.push(c);
            counts.push(1);
        }
    }
    (colors, counts)
}

fn sq_dist<F: Real>(a: &Vec3<F>, b: &Vec3<F>) -> F {
    (0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum()
}

/// Weighted data set of distinct colors.
struct Samples<F> {
    x: Vec<Vec3<F>>,
    w: Vec<F>,
    total: F,
}

impl<F: Real> Samples<F> {
    fn new(pixels: &[Rgb]) -> Self {
        let (colors, counts) = color_histogram(pixels);
        let w: Vec<F> = counts.iter().map(|&c| F::from_count(c)).collect();
        Self {
            x: colors.into_iter().map(to_vec3).collect(),
            total: F::from_count(pixels.len()),
            w,
        }
    }

    /// Weighted mean and covariance per column of `resp` (`resp[i][k]`),
    /// dropping components without mass.
    fn m_step(&self, resp: &[Vec<F>], k: usize) -> Vec<Component<F>> {
        let reg = F::lit(COVARIANCE_REGULARIZATION);
        let mut out = Vec::with_capacity(k);
        for j in 0..k {
            let nk: F = self.w.iter().zip(resp).map(|(&w, r)| w * r[j]).sum();
            if !(nk > F::lit(1e-9)) {
                continue;
            }
            let mut mean = [F::zero(); 3];
            for ((x, &w), r) in self.x.iter().zip(&self.w).zip(resp) {
                for d in 0..3 {
                    mean[d] += w * r[j] * x[d];
                }
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            let mut cov = [[F::zero(); 3]; 3];
            for ((x, &w), r) in self.x.iter().zip(&self.w).zip(resp) {
                let wr = w * r[j];
                let d = [x[0] - mean[0], x[1] - mean[1], x[2] - mean[2]];
                for a in 0..3 {
                    for b in 0..=a {
                        cov[a][b] += wr * d[a] * d[b];
                    }
                }
            }
            for a in 0..3 {
                for b in 0..=a {
                    cov[a][b] /= nk;
                    cov[b][a] = cov[a][b];
                }
                cov[a][a] += reg;
            }
            let mut bump = reg;
            let comp = loop {
                if let Some(c) = Component::new(nk / self.total, mean, cov) {
                    break c;
                }
                // rounding left the matrix indefinite; widen the diagonal
                for (a, row) in cov.iter_mut().enumerate() {
                    row[a] += bump;
                }
                bump *= F::lit(10.0);
            };
            out.push(comp);
        }
        // weights of surviving components already sum to one up to the dropped mass
        let total: F = out.iter().map(|c| c.weight).sum();
        out.into_iter()
            .map(|c| Component::new(c.weight / total, c.mean, c.covariance).expect("factorized above"))
            .collect()
    }

    /// Responsibilities and total log-likelihood under `comps`.
    fn e_step(&self, comps: &[Component<F>]) -> (Vec<Vec<F>>, F) {
        let mut ll = F::zero();
        let resp = self
            .x
            .iter()
            .zip(&self.w)
            .map(|(x, &w)| {
                let logs: Vec<F> = comps.iter().map(|c| c.log_weighted_density(x)).collect();
                let lse = log_sum_exp(&logs);
                ll += w * lse;
                logs.into_iter().map(|l| (l - lse).exp()).collect()
            })
            .collect();
        (resp, ll)
    }

    fn kmeans_pp(&self, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3<F>> {
        let pick = |rng: &mut ChaCha8Rng, weights: &[F]| -> usize {
            let total: F = weights.iter().copied().sum();
            if !(total > F::zero()) {
                return rng.gen_range(0..weights.len());
            }
            let mut u = F::lit(rng.gen::<f64>()) * total;
            for (i, &w) in weights.iter().enumerate() {
                if u < w {
                    return i;
                }
                u -= w;
            }
            weights.iter().rposition(|&w| w > F::zero()).expect("positive total")
        };
        let mut centers = vec![self.x[pick(rng, &self.w)]];
        let mut d2: Vec<F> = self.x.iter().map(|x| sq_dist(x, &centers[0])).collect();
        while centers.len() < k {
            let weights: Vec<F> = d2.iter().zip(&self.w).map(|(&d, &w)| d * w).collect();
            let c = self.x[pick(rng, &weights)];
            for (d, x) in d2.iter_mut().zip(&self.x) {
                *d = d.min(sq_dist(x, &c));
            }
            centers.push(c);
        }
        centers
    }

    fn em(&self, mut comps: Vec<Component<F>>, max_iter: usize) -> Vec<Component<F>> {
        let mut prev: Option<F> = None;
        for _ in 0..max_iter {
            let (resp, ll) = self.e_step(&comps);
            if let Some(p) = prev {
                if ((ll - p) / p.abs().max(F::min_positive_value())).abs() < F::lit(EM_REL_TOL) {
                    break;
                }
            }
            prev = Some(ll);
            comps = self.m_step(&resp, comps.len());
        }
        comps
    }

    fn log_likelihood(&self, comps: &[Component<F>]) -> F {
        self.e_step(comps).1
    }
}

/// EM from a k-means++ start (hard assignment to the chosen centers).
pub fn fit_gmm<F: Real>(pixels: &[Rgb], k: usize, seed: u64) -> Result<Gmm<F>, GrabcutError> {
    if k == 0 || pixels.len() < k {
        return Err(GrabcutError::TooFewPixels {
            needed: k.max(1),
            available: pixels.len(),
        });
    }
    let samples = Samples::<F>::new(pixels);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = samples.kmeans_pp(k, &mut rng);
    let resp: Vec<Vec<F>> = samples
        .x
        .iter()
        .map(|x| {
            let nearest = (0..k)
                .min_by(|&a, &b| {
                    sq_dist(x, &centers[a])
                        .partial_cmp(&sq_dist(x, &centers[b]))
                        .expect("finite colors")
                })
                .expect("k > 0");
            (0..k).map(|j| if j == nearest { F::one() } else { F::zero() }).collect()
        })
        .collect();
    let init = samples.m_step(&resp, k);
    Ok(Gmm {
        components: samples.em(init, EM_MAX_ITER),
    })
}

/// EM continued from `start`. Returns `start` unchanged when refitting would
/// lower the likelihood of `pixels`.
pub fn refit_gmm<F: Real>(start: &Gmm<F>, pixels: &[Rgb]) -> Result<Gmm<F>, GrabcutError> {
    if pixels.is_empty() {
        return Err(GrabcutError::TooFewPixels {
            needed: 1,
            available: 0,
        });
    }
    let samples = Samples::<F>::new(pixels);
    let fitted = samples.em(start.components.clone(), EM_MAX_ITER);
    if samples.log_likelihood(&fitted) >= samples.log_likelihood(&start.components) {
        Ok(Gmm { components: fitted })
    } else {
        Ok(start.clone())
    }
}
