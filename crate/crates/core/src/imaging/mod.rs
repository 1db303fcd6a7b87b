//! Images, binary masks, per-pixel maps, window grids and Jaccard scoring.

mod grid;
pub mod io;

pub use grid::{partition_grid, GridGeometry, WindowGrid};

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("{width}x{height} image cannot be split into a {cols}x{rows} grid of equal windows")]
    NonDivisibleDims {
        width: usize,
        height: usize,
        cols: usize,
        rows: usize,
    },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("overlap fraction {0} outside [0, 1]")]
    InvalidOverlap(f64),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),
    #[error("malformed file: {0}")]
    Format(String),
}

pub type Rgb = [u8; 3];

fn check_dims(width: usize, height: usize) -> Result<(), ImagingError> {
    if width == 0 || height == 0 {
        return Err(ImagingError::EmptyDimensions { width, height });
    }
    Ok(())
}

/// Row-major 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self, ImagingError> {
        check_dims(width, height)?;
        if pixels.len() != width * height {
            return Err(ImagingError::LengthMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![color; width * height])
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

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, color: Rgb) {
        self.pixels[y * self.width + x] = color;
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }
}

/// Row-major boolean mask, `true` = foreground.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, ImagingError> {
        check_dims(width, height)?;
        if bits.len() != width * height {
            return Err(ImagingError::LengthMismatch {
                expected: width * height,
                actual: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn full(width: usize, height: usize) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![true; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, ImagingError> {
        check_dims(width, height)?;
        let bits = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, bits)
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

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    fn zip_with(
        &self,
        other: &BinaryMask,
        f: impl Fn(bool, bool) -> bool,
    ) -> Result<BinaryMask, ImagingError> {
        same_dims(self.dims(), other.dims())?;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| f(a, b))
            .collect();
        BinaryMask::new(self.width, self.height, bits)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask, ImagingError> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask, ImagingError> {
        self.zip_with(other, |a, b| a || b)
    }
}

/// Per-pixel real-valued map (rasterized scores, filtered maps).
#[derive(Clone, Debug, PartialEq)]
pub struct PixelMap<F> {
    width: usize,
    height: usize,
    values: Vec<F>,
}

impl<F: Real> PixelMap<F> {
    pub fn new(width: usize, height: usize, values: Vec<F>) -> Result<Self, ImagingError> {
        check_dims(width, height)?;
        if values.len() != width * height {
            return Err(ImagingError::LengthMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, value: F) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![value; width * height])
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

    pub fn get(&self, x: usize, y: usize) -> F {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn into_values(self) -> Vec<F> {
        self.values
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> PixelMap<F> {
        PixelMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Foreground where the value is strictly greater than `cutoff`.
    pub fn above(&self, cutoff: F) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.values.iter().map(|&v| v > cutoff).collect(),
        }
    }
}

pub(crate) fn same_dims(a: (usize, usize), b: (usize, usize)) -> Result<(), ImagingError> {
    if a != b {
        return Err(ImagingError::DimensionMismatch { left: a, right: b });
    }
    Ok(())
}

/// Intersection over union of two masks. Two empty masks score 1.
pub fn jaccard(a: &BinaryMask, b: &BinaryMask) -> Result<f64, ImagingError> {
    same_dims(a.dims(), b.dims())?;
    let (inter, union) = a
        .bits
        .iter()
        .zip(&b.bits)
        .fold((0usize, 0usize), |(i, u), (&x, &y)| {
            (i + (x && y) as usize, u + (x || y) as usize)
        });
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}
