use serde::{Deserialize, Serialize};

use super::{same_dims, BinaryMask, ImagingError, PixelMap};
use crate::scalar::Real;

/// Geometry of a uniform, non-overlapping window tiling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridGeometry {
    pub cols: usize,
    pub rows: usize,
    pub window_width: usize,
    pub window_height: usize,
}

impl GridGeometry {
    pub fn window_count(&self) -> usize {
        self.cols * self.rows
    }

    pub fn image_width(&self) -> usize {
        self.cols * self.window_width
    }

    pub fn image_height(&self) -> usize {
        self.rows * self.window_height
    }

    pub fn image_dims(&self) -> (usize, usize) {
        (self.image_width(), self.image_height())
    }

    /// Index of the window owning pixel `(x, y)`; windows are numbered row-major.
    pub fn window_of(&self, x: usize, y: usize) -> usize {
        (y / self.window_height) * self.cols + x / self.window_width
    }

    /// Half-open pixel rectangle `(x0, y0, x1, y1)` of window `w`.
    pub fn window_rect(&self, w: usize) -> (usize, usize, usize, usize) {
        let (c, r) = (w % self.cols, w / self.cols);
        let x0 = c * self.window_width;
        let y0 = r * self.window_height;
        (x0, y0, x0 + self.window_width, y0 + self.window_height)
    }

    /// Expands one value per window to pixel resolution.
    pub fn rasterize<F: Real>(&self, values: &[F]) -> Result<PixelMap<F>, ImagingError> {
        if values.len() != self.window_count() {
            return Err(ImagingError::LengthMismatch {
                expected: self.window_count(),
                actual: values.len(),
            });
        }
        let (w, h) = self.image_dims();
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            let row = (y / self.window_height) * self.cols;
            out.extend((0..w).map(|x| values[row + x / self.window_width]));
        }
        PixelMap::new(w, h, out)
    }

    /// Pixel mask of all windows whose flag is set.
    pub fn block_mask(&self, flags: &[bool]) -> Result<BinaryMask, ImagingError> {
        if flags.len() != self.window_count() {
            return Err(ImagingError::LengthMismatch {
                expected: self.window_count(),
                actual: flags.len(),
            });
        }
        let (w, h) = self.image_dims();
        BinaryMask::from_fn(w, h, |x, y| flags[self.window_of(x, y)])
    }
}

/// A window tiling plus its target/distractor ground truth.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowGrid {
    pub geometry: GridGeometry,
    /// `true` = target window (overlaps the object).
    pub labels: Vec<bool>,
}

/// Splits a `width`×`height` image into `cols`×`rows` equal windows, all
/// initially labeled distractor.
pub fn partition_grid(
    width: usize,
    height: usize,
    cols: usize,
    rows: usize,
) -> Result<WindowGrid, ImagingError> {
    if width == 0 || height == 0 {
        return Err(ImagingError::EmptyDimensions { width, height });
    }
    if cols == 0 || rows == 0 || !width.is_multiple_of(cols) || !height.is_multiple_of(rows) {
        return Err(ImagingError::NonDivisibleDims {
            width,
            height,
            cols,
            rows,
        });
    }
    let geometry = GridGeometry {
        cols,
        rows,
        window_width: width / cols,
        window_height: height / rows,
    };
    Ok(WindowGrid {
        geometry,
        labels: vec![false; cols * rows],
    })
}

impl WindowGrid {
    pub fn window_count(&self) -> usize {
        self.geometry.window_count()
    }

    /// Labels each window target iff the fraction of its pixels set in `gt` is at
    /// least `min_overlap` and at least one pixel is set.
    pub fn label_windows(
        &self,
        gt: &BinaryMask,
        min_overlap: f64,
    ) -> Result<WindowGrid, ImagingError> {
        if !(0.0..=1.0).contains(&min_overlap) {
            return Err(ImagingError::InvalidOverlap(min_overlap));
        }
        same_dims(self.geometry.image_dims(), gt.dims())?;
        let mut counts = vec![0usize; self.window_count()];
        for y in 0..gt.height() {
            for x in 0..gt.width() {
                if gt.get(x, y) {
                    counts[self.geometry.window_of(x, y)] += 1;
                }
            }
        }
        let area = (self.geometry.window_width * self.geometry.window_height) as f64;
        let labels = counts
            .iter()
            .map(|&n| n > 0 && n as f64 / area >= min_overlap)
            .collect();
        Ok(WindowGrid {
            geometry: self.geometry,
            labels,
        })
    }

    pub fn target_fraction(&self) -> f64 {
        self.labels.iter().filter(|&&l| l).count() as f64 / self.labels.len() as f64
    }

    pub fn rasterize<F: Real>(&self, values: &[F]) -> Result<PixelMap<F>, ImagingError> {
        self.geometry.rasterize(values)
    }
}
