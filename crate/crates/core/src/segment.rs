//! The three ways of turning a score map into an object mask:
//! A thresholds the normalized map, B smooths it and thresholds at a fraction
//! of its dynamic range, C smooths it, seeds a trimap and runs GrabCut.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eegmap::{gaussian_filter, make_trimap, threshold_absolute, threshold_relative, EegMap, EegMapError};
use crate::grabcut::{GrabcutError, GrabcutParams, GrabcutSession};
use crate::imaging::{BinaryMask, ImagingError};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error(transparent)]
    Map(#[from] EegMapError),
    #[error(transparent)]
    Grabcut(#[from] GrabcutError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConfigId {
    A,
    B,
    C,
}

impl ConfigId {
    pub const ALL: [ConfigId; 3] = [ConfigId::A, ConfigId::B, ConfigId::C];
}

impl std::fmt::Display for ConfigId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConfigId::A => "A",
            ConfigId::B => "B",
            ConfigId::C => "C",
        })
    }
}

/// A training or test image as the optimizers see it.
#[derive(Clone, Copy)]
pub struct Scene<'a, F: Real> {
    pub map: &'a EegMap<F>,
    pub gt: &'a BinaryMask,
    pub session: &'a GrabcutSession<F>,
}

fn empty_like(map: &EegMap<impl Real>) -> BinaryMask {
    let (w, h) = map.geometry().image_dims();
    BinaryMask::empty(w, h).expect("geometry has positive size")
}

pub fn segment_a<F: Real>(map: &EegMap<F>, alpha: f64) -> Result<BinaryMask, SegmentError> {
    Ok(threshold_absolute(map, alpha)?)
}

/// A constant filtered map has no dynamic range and yields an empty mask.
pub fn segment_b<F: Real>(map: &EegMap<F>, p: f64, sigma: f64) -> Result<BinaryMask, SegmentError> {
    let filtered = gaussian_filter(&map.rasterize(), sigma)?;
    match threshold_relative(&filtered, p) {
        Err(EegMapError::ConstantMap) => Ok(empty_like(map)),
        other => Ok(other?),
    }
}

/// An empty or constant seed gives an empty mask; a seed too small for the
/// color models gives the seeded foreground region unchanged.
pub fn segment_c<F: Real>(
    map: &EegMap<F>,
    session: &GrabcutSession<F>,
    p1: f64,
    p2: f64,
    sigma: f64,
    params: &GrabcutParams,
) -> Result<BinaryMask, SegmentError> {
    let filtered = gaussian_filter(&map.rasterize(), sigma)?;
    let trimap = match make_trimap(&filtered, p1, p2) {
        Err(EegMapError::EmptyForeground) | Err(EegMapError::ConstantMap) => return Ok(empty_like(map)),
        other => other?,
    };
    match session.run(&trimap, params) {
        Ok(state) => Ok(state.mask(trimap.width(), trimap.height())?),
        Err(GrabcutError::TooFewPixels { .. }) => Ok(trimap.foreground_region()),
        Err(e) => Err(e.into()),
    }
}
