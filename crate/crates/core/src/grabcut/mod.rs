//! Iterated graph-cut segmentation seeded by a trimap.
//!
//! Energy of a labeling `L` under color models `(G_fg, G_bg)`:
//!
//! ```text
//! E = Σ_p −log G_{L_p}(c_p) + λ Σ_{p~q, L_p≠L_q} exp(−β‖c_p − c_q‖²) / dist(p, q)
//! ```
//!
//! over 8-connected pairs, with `β = 1 / (2·mean‖c_p − c_q‖²)`. Each iteration
//! refits both models on the current labeling and then takes the exact
//! minimum cut, so the energy never increases.

mod gmm;
mod maxflow;

pub use gmm::{
    fit_gmm, gmm_neg_loglik, refit_gmm, Gmm, Mat3, Vec3, COVARIANCE_REGULARIZATION, DEFAULT_COMPONENTS,
};
pub use maxflow::{max_flow, FlowNetwork, MinCut};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eegmap::{Trimap, TrimapLabel};
use crate::imaging::{same_dims, BinaryMask, Image, ImagingError};
use crate::scalar::Real;
use gmm::{color_histogram, to_vec3};

#[derive(Debug, Error)]
pub enum GrabcutError {
    #[error("need at least {needed} pixels to fit the color model, got {available}")]
    TooFewPixels { needed: usize, available: usize },
    #[error("trimap has no probable-foreground pixels")]
    EmptyForeground,
    #[error("invalid mixture model: {0}")]
    InvalidModel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

pub const DEFAULT_LAMBDA: f64 = 50.0;
pub const DEFAULT_ITERATIONS: usize = 5;
/// Iteration stops once fewer than this fraction of pixels change label.
pub const CONVERGENCE_FRACTION: f64 = 0.001;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrabcutParams {
    pub iterations: usize,
    pub components: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for GrabcutParams {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            components: DEFAULT_COMPONENTS,
            lambda: DEFAULT_LAMBDA,
            seed: 0,
        }
    }
}

/// One neighbor pair with its unscaled smoothness weight `exp(−β‖Δc‖²)/dist`.
#[derive(Clone, Copy, Debug)]
struct Pair<F> {
    p: usize,
    q: usize,
    weight: F,
}

/// Per-image data reused across segmentations: neighbor weights and the
/// color palette.
#[derive(Clone, Debug)]
pub struct GrabcutSession<F: Real> {
    image: Image,
    pairs: Vec<Pair<F>>,
    beta: F,
    palette: Vec<crate::imaging::Rgb>,
    palette_index: Vec<usize>,
}

impl<F: Real> GrabcutSession<F> {
    pub fn new(image: &Image) -> Self {
        let (w, h) = image.dims();
        let px = image.pixels();
        let mut raw: Vec<(usize, usize, F, F)> = Vec::with_capacity(4 * w * h);
        let diag = F::lit(std::f64::consts::SQRT_2);
        for y in 0..h {
            for x in 0..w {
                let p = y * w + x;
                let mut push = |q: usize, dist: F| {
                    let (a, b) = (to_vec3::<F>(px[p]), to_vec3::<F>(px[q]));
                    let d2 = (0..3).map(|i| (a[i] - b[i]) * (a[i] - b[i])).sum::<F>();
                    raw.push((p, q, d2, dist));
                };
                if x + 1 < w {
                    push(p + 1, F::one());
                }
                if y + 1 < h {
                    push(p + w, F::one());
                    if x + 1 < w {
                        push(p + w + 1, diag);
                    }
                    if x > 0 {
                        push(p + w - 1, diag);
                    }
                }
            }
        }
        let mean_d2 = if raw.is_empty() {
            F::zero()
        } else {
            raw.iter().map(|r| r.2).sum::<F>() / F::from_count(raw.len())
        };
        let beta = if mean_d2 > F::zero() {
            F::one() / (F::lit(2.0) * mean_d2)
        } else {
            F::zero()
        };
        let pairs = raw
            .into_iter()
            .map(|(p, q, d2, dist)| Pair {
                p,
                q,
                weight: (-beta * d2).exp() / dist,
            })
            .collect();
        let (palette, _) = color_histogram(px);
        let palette_index = px
            .iter()
            .map(|c| palette.binary_search(c).expect("palette holds every color"))
            .collect();
        Self {
            image: image.clone(),
            pairs,
            beta,
            palette,
            palette_index,
        }
    }

    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn beta(&self) -> F {
        self.beta
    }

    /// Unscaled smoothness weight between two 8-connected pixels, if adjacent.
    pub fn pair_weight(&self, p: usize, q: usize) -> Option<F> {
        self.pairs
            .iter()
            .find(|e| (e.p == p && e.q == q) || (e.p == q && e.q == p))
            .map(|e| e.weight)
    }

    /// `−log G(c_p)` for every pixel.
    fn data_costs(&self, g: &Gmm<F>) -> Vec<F> {
        let per_color: Vec<F> = self.palette.iter().map(|&c| gmm_neg_loglik(g, c)).collect();
        self.palette_index.iter().map(|&i| per_color[i]).collect()
    }

    fn energy(&self, fg: &[bool], d_fg: &[F], d_bg: &[F], lambda: F) -> F {
        let data: F = fg
            .iter()
            .enumerate()
            .map(|(p, &f)| if f { d_fg[p] } else { d_bg[p] })
            .sum();
        let smooth: F = self
            .pairs
            .iter()
            .filter(|e| fg[e.p] != fg[e.q])
            .map(|e| e.weight)
            .sum();
        data + lambda * smooth
    }

    fn pixels_where(&self, fg: &[bool], want: bool) -> Vec<crate::imaging::Rgb> {
        self.image
            .pixels()
            .iter()
            .zip(fg)
            .filter(|(_, &f)| f == want)
            .map(|(&c, _)| c)
            .collect()
    }

    /// Minimum-energy labeling for fixed models; `fixed_bg` pixels are forced
    /// to background.
    fn cut(&self, d_fg: &[F], d_bg: &[F], fixed_bg: &[bool], lambda: F) -> Vec<bool> {
        let n = d_fg.len();
        let mut net = FlowNetwork::new(n);
        let mut incident = vec![F::zero(); n];
        for e in &self.pairs {
            incident[e.p] += lambda * e.weight;
            incident[e.q] += lambda * e.weight;
        }
        // exceeds any smoothness saving available to a single pixel
        let hard = F::one() + incident.iter().copied().fold(F::zero(), F::max);
        for p in 0..n {
            if fixed_bg[p] {
                net.add_terminal_edges(p, F::zero(), hard);
            } else {
                // source side is foreground: cutting source→p pays the background cost
                let base = d_fg[p].min(d_bg[p]);
                net.add_terminal_edges(p, d_bg[p] - base, d_fg[p] - base);
            }
        }
        for e in &self.pairs {
            let c = lambda * e.weight;
            net.add_edge(e.p, e.q, c, c);
        }
        max_flow(&net).source_side
    }

    pub fn run(&self, trimap: &Trimap, params: &GrabcutParams) -> Result<GrabcutState<F>, GrabcutError> {
        same_dims(self.image.dims(), trimap.dims())?;
        if !(params.lambda >= 0.0 && params.lambda.is_finite()) {
            return Err(GrabcutError::InvalidParameter(format!("lambda {}", params.lambda)));
        }
        let k = params.components.max(1);
        let fixed_bg: Vec<bool> = trimap
            .labels()
            .iter()
            .map(|&l| l == TrimapLabel::DefiniteBackground)
            .collect();
        let mut fg: Vec<bool> = trimap
            .labels()
            .iter()
            .map(|&l| l == TrimapLabel::ProbableForeground)
            .collect();
        let n_fg = fg.iter().filter(|&&f| f).count();
        if n_fg == 0 {
            return Err(GrabcutError::EmptyForeground);
        }
        if n_fg < k || fg.len() - n_fg < k {
            return Err(GrabcutError::TooFewPixels {
                needed: k,
                available: n_fg.min(fg.len() - n_fg),
            });
        }
        let lambda = F::lit(params.lambda);
        let mut state = GrabcutState {
            foreground: fg.clone(),
            fg_model: None,
            bg_model: None,
            iterations: 0,
            energy_history: Vec::new(),
            label_changes: Vec::new(),
        };
        for it in 0..params.iterations {
            let (fg_px, bg_px) = (self.pixels_where(&fg, true), self.pixels_where(&fg, false));
            if fg_px.len() < k || bg_px.len() < k {
                break;
            }
            let (g_fg, g_bg) = match (&state.fg_model, &state.bg_model) {
                (Some(a), Some(b)) => (refit_gmm(a, &fg_px)?, refit_gmm(b, &bg_px)?),
                _ => (
                    fit_gmm(&fg_px, k, params.seed)?,
                    fit_gmm(&bg_px, k, params.seed.wrapping_add(1))?,
                ),
            };
            let (d_fg, d_bg) = (self.data_costs(&g_fg), self.data_costs(&g_bg));
            let current = self.energy(&fg, &d_fg, &d_bg, lambda);
            let proposal = self.cut(&d_fg, &d_bg, &fixed_bg, lambda);
            let proposed = self.energy(&proposal, &d_fg, &d_bg, lambda);
            // the cut is optimal; guard only against rounding in the flow sums
            let (next, energy) = if proposed <= current {
                (proposal, proposed)
            } else {
                (fg.clone(), current)
            };
            let changes = next.iter().zip(&fg).filter(|(a, b)| a != b).count();
            fg = next;
            state.fg_model = Some(g_fg);
            state.bg_model = Some(g_bg);
            state.iterations = it + 1;
            state.energy_history.push(energy);
            state.label_changes.push(changes);
            state.foreground = fg.clone();
            if (changes as f64) < CONVERGENCE_FRACTION * fg.len() as f64 {
                break;
            }
        }
        Ok(state)
    }
}

/// Result of a segmentation run.
#[derive(Clone, Debug)]
pub struct GrabcutState<F: Real> {
    pub foreground: Vec<bool>,
    pub fg_model: Option<Gmm<F>>,
    pub bg_model: Option<Gmm<F>>,
    pub iterations: usize,
    /// Energy after each iteration's cut, under that iteration's models.
    pub energy_history: Vec<F>,
    pub label_changes: Vec<usize>,
}

impl<F: Real> GrabcutState<F> {
    pub fn mask(&self, width: usize, height: usize) -> Result<BinaryMask, ImagingError> {
        BinaryMask::new(width, height, self.foreground.clone())
    }

    /// `iteration,energy,label_changes` lines with a header.
    pub fn debug_csv(&self) -> String {
        let mut out = String::from("iteration,energy,label_changes\n");
        for (i, (e, c)) in self.energy_history.iter().zip(&self.label_changes).enumerate() {
            writeln!(out, "{},{},{}", i + 1, e, c).expect("write to string");
        }
        out
    }
}

pub fn run_grabcut<F: Real>(
    image: &Image,
    seed_trimap: &Trimap,
    params: &GrabcutParams,
) -> Result<BinaryMask, GrabcutError> {
    let state = GrabcutSession::<F>::new(image).run(seed_trimap, params)?;
    Ok(state.mask(image.width(), image.height())?)
}
