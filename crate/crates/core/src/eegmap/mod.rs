//! Per-window score maps: normalization, averaging across users, Gaussian
//! smoothing at pixel resolution, thresholding and trimap construction.
//!
//! All thresholds are strict: a pixel is foreground only when its value is
//! greater than the cutoff.

mod filter;
pub mod io;

pub use filter::{gaussian_filter, gaussian_kernel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{BinaryMask, GridGeometry, ImagingError, PixelMap};
use crate::scalar::{min_max, Real};

#[derive(Debug, Error)]
pub enum EegMapError {
    #[error("map is constant; its dynamic range is zero")]
    ConstantMap,
    #[error("sigma must be non-negative, got {0}")]
    NegativeSigma(f64),
    #[error("absolute thresholds need a normalized map")]
    MapNotNormalized,
    #[error("threshold {0} outside its allowed range")]
    InvalidThreshold(f64),
    #[error("trimap thresholds need p1 in [0, 0.5) below p2 in [0.5, 1], got {p1} and {p2}")]
    InvalidThresholdOrder { p1: f64, p2: f64 },
    #[error("no pixel exceeds the foreground threshold")]
    EmptyForeground,
    #[error("maps have different grid geometry")]
    GeometryMismatch,
    #[error("no maps to average")]
    EmptyList,
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed map file: {0}")]
    Format(String),
}

/// Smoothed pixel-resolution map; values keep their original dynamic range.
pub type FilteredMap<F> = PixelMap<F>;

/// One score per window of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EegMap<F> {
    geometry: GridGeometry,
    scores: Vec<F>,
    normalized: bool,
}

impl<F: Real> EegMap<F> {
    pub fn new(geometry: GridGeometry, scores: Vec<F>) -> Result<Self, EegMapError> {
        if scores.len() != geometry.window_count() {
            return Err(ImagingError::LengthMismatch {
                expected: geometry.window_count(),
                actual: scores.len(),
            }
            .into());
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(EegMapError::Format("non-finite score".into()));
        }
        Ok(Self {
            geometry,
            scores,
            normalized: false,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn scores(&self) -> &[F] {
        &self.scores
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn rasterize(&self) -> PixelMap<F> {
        self.geometry
            .rasterize(&self.scores)
            .expect("score count matches geometry")
    }
}

/// Rescales scores to `[0, 1]`; the minimum maps to exactly 0 and the maximum
/// to exactly 1.
pub fn normalize_map<F: Real>(map: &EegMap<F>) -> Result<EegMap<F>, EegMapError> {
    let (lo, hi) = min_max(&map.scores).ok_or(EegMapError::ConstantMap)?;
    if !(hi > lo) {
        return Err(EegMapError::ConstantMap);
    }
    let span = hi - lo;
    Ok(EegMap {
        geometry: map.geometry,
        scores: map.scores.iter().map(|&v| (v - lo) / span).collect(),
        normalized: true,
    })
}

/// Pointwise mean of maps sharing a geometry, then normalized.
pub fn average_maps<F: Real>(maps: &[EegMap<F>]) -> Result<EegMap<F>, EegMapError> {
    let first = maps.first().ok_or(EegMapError::EmptyList)?;
    if maps.iter().any(|m| m.geometry != first.geometry) {
        return Err(EegMapError::GeometryMismatch);
    }
    let n = F::from_count(maps.len());
    let scores = (0..first.scores.len())
        .map(|w| maps.iter().map(|m| m.scores[w]).sum::<F>() / n)
        .collect();
    normalize_map(&EegMap::new(first.geometry, scores)?)
}

fn check_unit(p: f64) -> Result<(), EegMapError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(EegMapError::InvalidThreshold(p));
    }
    Ok(())
}

/// Pixel mask of a normalized map above `alpha`.
pub fn threshold_absolute<F: Real>(map: &EegMap<F>, alpha: f64) -> Result<BinaryMask, EegMapError> {
    if !map.normalized {
        return Err(EegMapError::MapNotNormalized);
    }
    check_unit(alpha)?;
    Ok(map.rasterize().above(F::lit(alpha)))
}

/// Cutoff at fraction `p` of the map's dynamic range.
pub fn relative_cutoff<F: Real>(map: &PixelMap<F>, p: f64) -> Result<F, EegMapError> {
    check_unit(p)?;
    let (lo, hi) = min_max(map.values()).ok_or(EegMapError::ConstantMap)?;
    if !(hi > lo) {
        return Err(EegMapError::ConstantMap);
    }
    Ok(lo + F::lit(p) * (hi - lo))
}

pub fn threshold_relative<F: Real>(map: &FilteredMap<F>, p: f64) -> Result<BinaryMask, EegMapError> {
    Ok(map.above(relative_cutoff(map, p)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrimapLabel {
    DefiniteBackground,
    ProbableBackground,
    ProbableForeground,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trimap {
    width: usize,
    height: usize,
    labels: Vec<TrimapLabel>,
}

impl Trimap {
    pub fn new(width: usize, height: usize, labels: Vec<TrimapLabel>) -> Result<Self, EegMapError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyDimensions { width, height }.into());
        }
        if labels.len() != width * height {
            return Err(ImagingError::LengthMismatch {
                expected: width * height,
                actual: labels.len(),
            }
            .into());
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    /// Definite background outside `mask`, probable foreground inside.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        let labels = mask
            .bits()
            .iter()
            .map(|&b| {
                if b {
                    TrimapLabel::ProbableForeground
                } else {
                    TrimapLabel::DefiniteBackground
                }
            })
            .collect();
        Self {
            width: mask.width(),
            height: mask.height(),
            labels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> TrimapLabel {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[TrimapLabel] {
        &self.labels
    }

    /// Pixel counts of (definite background, probable background, probable foreground).
    pub fn counts(&self) -> (usize, usize, usize) {
        self.labels.iter().fold((0, 0, 0), |(d, b, f), l| match l {
            TrimapLabel::DefiniteBackground => (d + 1, b, f),
            TrimapLabel::ProbableBackground => (d, b + 1, f),
            TrimapLabel::ProbableForeground => (d, b, f + 1),
        })
    }

    /// Pixels not fixed to background.
    pub fn unknown_region(&self) -> BinaryMask {
        BinaryMask::new(
            self.width,
            self.height,
            self.labels
                .iter()
                .map(|&l| l != TrimapLabel::DefiniteBackground)
                .collect(),
        )
        .expect("dimensions validated")
    }

    pub fn foreground_region(&self) -> BinaryMask {
        BinaryMask::new(
            self.width,
            self.height,
            self.labels
                .iter()
                .map(|&l| l == TrimapLabel::ProbableForeground)
                .collect(),
        )
        .expect("dimensions validated")
    }
}

/// Splits a filtered map into three bands at relative cutoffs `p1 < p2`.
pub fn make_trimap<F: Real>(map: &FilteredMap<F>, p1: f64, p2: f64) -> Result<Trimap, EegMapError> {
    if !((0.0..0.5).contains(&p1) && (0.5..=1.0).contains(&p2)) {
        return Err(EegMapError::InvalidThresholdOrder { p1, p2 });
    }
    let a1 = relative_cutoff(map, p1)?;
    let a2 = relative_cutoff(map, p2)?;
    let labels: Vec<TrimapLabel> = map
        .values()
        .iter()
        .map(|&v| {
            if v > a2 {
                TrimapLabel::ProbableForeground
            } else if v > a1 {
                TrimapLabel::ProbableBackground
            } else {
                TrimapLabel::DefiniteBackground
            }
        })
        .collect();
    if !labels.contains(&TrimapLabel::ProbableForeground) {
        return Err(EegMapError::EmptyForeground);
    }
    Trimap::new(map.width(), map.height(), labels)
}
