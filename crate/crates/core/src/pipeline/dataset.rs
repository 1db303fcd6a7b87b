//! Synthetic scenes: one textured object on a textured background, with an
//! exact ground-truth mask.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::imaging::io::{read_image, read_mask, write_image, write_mask};
use crate::imaging::{BinaryMask, Image, Rgb};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Disc,
    Rect,
    Blob,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub n_images: usize,
    pub width: usize,
    pub height: usize,
    /// Fraction of the image covered by the object.
    pub object_area: f64,
    /// Shapes assigned to images in rotation.
    pub shapes: Vec<Shape>,
    /// Every `camouflage_every`-th image (1-based) draws its object colors
    /// from the background palette; 0 disables camouflage.
    pub camouflage_every: usize,
    /// Background patches painted in the object's colors.
    pub clutter: usize,
    /// Clutter patch area relative to the object area.
    pub clutter_scale: f64,
    /// Per-channel noise is a multiple of this step in {-1, 0, 1}.
    pub noise_step: u8,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_images: 22,
            width: 64,
            height: 48,
            object_area: 0.05,
            shapes: vec![Shape::Disc, Shape::Rect, Shape::Blob],
            camouflage_every: 8,
            clutter: 3,
            clutter_scale: 0.5,
            noise_step: 6,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(format!("dataset: {m}")));
        if self.n_images == 0 {
            return bad("n_images must be positive");
        }
        if self.width < 8 || self.height < 8 {
            return bad("images must be at least 8x8");
        }
        if !(self.object_area > 0.0 && self.object_area <= 0.5) {
            return bad("object_area must lie in (0, 0.5]");
        }
        if self.shapes.is_empty() {
            return bad("at least one shape is required");
        }
        if !(self.clutter_scale >= 0.0 && self.clutter_scale <= 2.0) {
            return bad("clutter_scale must lie in [0, 2]");
        }
        Ok(())
    }

    pub fn is_camouflage(&self, index: usize) -> bool {
        self.camouflage_every > 0 && (index + 1).is_multiple_of(self.camouflage_every)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub mask: BinaryMask,
    pub shape: Shape,
    pub camouflage: bool,
}

/// Shape outline around `(cx, cy)` at scale `s`; the remaining fields are fixed
/// per image.
#[derive(Clone, Debug)]
struct Outline {
    shape: Shape,
    angle: f64,
    aspect: f64,
    harmonics: Vec<(f64, f64, f64)>,
}

impl Outline {
    fn random(shape: Shape, rng: &mut impl Rng) -> Self {
        Self {
            shape,
            angle: rng.gen_range(0.0..PI),
            aspect: rng.gen_range(0.7..1.4),
            harmonics: (2..=4)
                .map(|k| (k as f64, rng.gen_range(0.0..0.15), rng.gen_range(0.0..2.0 * PI)))
                .collect(),
        }
    }

    /// Largest distance from the center in units of the scale.
    fn reach(&self) -> f64 {
        match self.shape {
            Shape::Disc => 1.0,
            Shape::Rect => (self.aspect.powi(2) + self.aspect.powi(-2)).sqrt(),
            Shape::Blob => 1.0 + self.harmonics.iter().map(|h| h.1).sum::<f64>(),
        }
    }

    fn contains(&self, dx: f64, dy: f64, s: f64) -> bool {
        match self.shape {
            Shape::Disc => dx * dx + dy * dy <= s * s,
            Shape::Rect => {
                let (sin, cos) = self.angle.sin_cos();
                let u = dx * cos + dy * sin;
                let v = -dx * sin + dy * cos;
                u.abs() <= s * self.aspect && v.abs() <= s / self.aspect
            }
            Shape::Blob => {
                let theta = dy.atan2(dx);
                let r = 1.0 + self.harmonics.iter().map(|&(k, a, ph)| a * (k * theta + ph).cos()).sum::<f64>();
                (dx * dx + dy * dy).sqrt() <= s * r
            }
        }
    }

    fn rasterize(&self, w: usize, h: usize, cx: f64, cy: f64, s: f64) -> Vec<bool> {
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                out.push(self.contains(x as f64 + 0.5 - cx, y as f64 + 0.5 - cy, s));
            }
        }
        out
    }

    /// Scale whose rasterized area is closest to `target` pixels.
    fn fit_scale(&self, w: usize, h: usize, cx: f64, cy: f64, target: usize) -> f64 {
        let count = |s: f64| self.rasterize(w, h, cx, cy, s).iter().filter(|&&b| b).count();
        let (mut lo, mut hi) = (0.0, w.max(h) as f64);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if count(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let miss = |s: f64| count(s).abs_diff(target);
        if miss(lo) < miss(hi) {
            lo
        } else {
            hi
        }
    }
}

fn hsv(h: f64, s: f64, v: f64) -> Rgb {
    let h = h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let q = |t: f64| ((t + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

fn nudge(c: Rgb, rng: &mut impl Rng, spread: i32) -> Rgb {
    c.map(|v| (v as i32 + rng.gen_range(-spread..=spread)).clamp(0, 255) as u8)
}

/// Hue distance on the color circle in degrees.
fn hue_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// A sum of three plane waves, used to pick background palette entries.
struct Blotches {
    waves: Vec<(f64, f64, f64)>,
}

impl Blotches {
    fn random(rng: &mut impl Rng, scale: f64) -> Self {
        Self {
            waves: (0..3)
                .map(|_| {
                    let theta: f64 = rng.gen_range(0.0..PI);
                    let f = rng.gen_range(1.5..4.0) * 2.0 * PI / scale;
                    (f * theta.cos(), f * theta.sin(), rng.gen_range(0.0..2.0 * PI))
                })
                .collect(),
        }
    }

    fn index(&self, x: f64, y: f64, n: usize) -> usize {
        let v: f64 = self.waves.iter().map(|&(fx, fy, ph)| (fx * x + fy * y + ph).sin()).sum::<f64>() / 3.0;
        (((v + 1.0) / 2.0 * n as f64) as usize).min(n - 1)
    }
}

fn generate_one(spec: &DatasetSpec, index: usize, rng: &mut ChaCha8Rng) -> Sample {
    let (w, h) = (spec.width, spec.height);
    let shape = spec.shapes[index % spec.shapes.len()];
    let camouflage = spec.is_camouflage(index);

    let bg_hues: Vec<f64> = {
        let base = rng.gen_range(0.0..360.0);
        (0..3).map(|k| base + k as f64 * rng.gen_range(20.0..50.0)).collect()
    };
    let bg_palette: Vec<Rgb> = bg_hues
        .iter()
        .map(|&hue| hsv(hue, rng.gen_range(0.25..0.6), rng.gen_range(0.35..0.85)))
        .collect();
    let obj_palette: Vec<Rgb> = if camouflage {
        (0..2).map(|k| nudge(bg_palette[k], rng, 12)).collect()
    } else {
        let hue = loop {
            let cand = rng.gen_range(0.0..360.0);
            if bg_hues.iter().all(|&b| hue_gap(cand, b) >= 70.0) {
                break cand;
            }
        };
        (0..2)
            .map(|k| hsv(hue + 15.0 * k as f64, rng.gen_range(0.55..0.9), rng.gen_range(0.45..0.95)))
            .collect()
    };

    let outline = Outline::random(shape, rng);
    let target = (spec.object_area * (w * h) as f64).round() as usize;
    let s0 = outline.fit_scale(w, h, w as f64 / 2.0, h as f64 / 2.0, target);
    let margin = |extent: usize| (s0 * outline.reach() + 1.0).min(extent as f64 / 2.0);
    let (mx, my) = (margin(w), margin(h));
    let cx = rng.gen_range(mx..=w as f64 - mx);
    let cy = rng.gen_range(my..=h as f64 - my);
    let s = outline.fit_scale(w, h, cx, cy, target);
    let inside = outline.rasterize(w, h, cx, cy, s);

    // clutter discs may touch the object but never cover its pixels
    let mut clutter = vec![false; w * h];
    let r = (spec.clutter_scale * target as f64 / PI).sqrt();
    for _ in 0..spec.clutter {
        let (px, py) = (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64));
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 + 0.5 - px, y as f64 + 0.5 - py);
                if dx * dx + dy * dy <= r * r && !inside[y * w + x] {
                    clutter[y * w + x] = true;
                }
            }
        }
    }

    let blotches = Blotches::random(rng, w.max(h) as f64);
    let stripe_angle: f64 = rng.gen_range(0.0..PI);
    let stripe_period = rng.gen_range(2.0..5.0);
    let step = spec.noise_step as i32;
    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            let base = if inside[y * w + x] || clutter[y * w + x] {
                let t = (fx * stripe_angle.cos() + fy * stripe_angle.sin()) / stripe_period;
                obj_palette[(t.floor() as i64).rem_euclid(2) as usize]
            } else {
                bg_palette[blotches.index(fx, fy, bg_palette.len())]
            };
            pixels.push(base.map(|v| (v as i32 + step * rng.gen_range(-1..=1)).clamp(0, 255) as u8));
        }
    }
    Sample {
        image: Image::new(w, h, pixels).expect("validated dimensions"),
        mask: BinaryMask::new(w, h, inside).expect("validated dimensions"),
        shape,
        camouflage,
    }
}

/// Deterministic for a given spec and seed.
pub fn generate_dataset(spec: &DatasetSpec, seed: u64) -> Result<Vec<Sample>, PipelineError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..spec.n_images).map(|i| generate_one(spec, i, &mut rng)).collect())
}

const MANIFEST: &str = "manifest.json";
const DATASET_FORMAT: &str = "eegseg-dataset";

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    entries: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    image: String,
    mask: String,
    shape: Option<Shape>,
    #[serde(default)]
    camouflage: bool,
}

/// Writes `image_NN.png`, `mask_NN.pgm` and a JSON manifest into `dir`.
pub fn save_dataset(samples: &[Sample], dir: impl AsRef<Path>) -> Result<(), PipelineError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(samples.len());
    for (j, s) in samples.iter().enumerate() {
        let (image, mask) = (format!("image_{j:02}.png"), format!("mask_{j:02}.pgm"));
        write_image(&s.image, dir.join(&image))?;
        write_mask(&s.mask, dir.join(&mask))?;
        entries.push(ManifestEntry {
            image,
            mask,
            shape: Some(s.shape),
            camouflage: s.camouflage,
        });
    }
    let manifest = Manifest {
        format: DATASET_FORMAT.into(),
        version: 1,
        entries,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(dir.join(MANIFEST), text)?;
    Ok(())
}

/// Reads a dataset written by [`save_dataset`] or assembled by hand; entries
/// without a shape are recorded as blobs.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<Sample>, PipelineError> {
    let dir = dir.as_ref();
    let text = std::fs::read_to_string(dir.join(MANIFEST))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| PipelineError::Data(e.to_string()))?;
    if manifest.format != DATASET_FORMAT || manifest.version != 1 {
        return Err(PipelineError::Data(format!("{} is not an {DATASET_FORMAT} v1 manifest", dir.display())));
    }
    manifest
        .entries
        .iter()
        .map(|e| {
            let image = read_image(dir.join(&e.image))?;
            let mask = read_mask(dir.join(&e.mask))?;
            if image.dims() != mask.dims() {
                return Err(PipelineError::Data(format!("{} and {} differ in size", e.image, e.mask)));
            }
            Ok(Sample {
                image,
                mask,
                shape: e.shape.unwrap_or(Shape::Blob),
                camouflage: e.camouflage,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hsv_primaries() {
        assert_eq!(hsv(0.0, 1.0, 1.0), [255, 0, 0]);
        assert_eq!(hsv(120.0, 1.0, 1.0), [0, 255, 0]);
        assert_eq!(hsv(240.0, 1.0, 1.0), [0, 0, 255]);
        assert_eq!(hsv(77.0, 0.0, 0.5), [128, 128, 128]);
    }

    #[test]
    fn outline_area_is_monotone_in_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for shape in [Shape::Disc, Shape::Rect, Shape::Blob] {
            let o = Outline::random(shape, &mut rng);
            let counts: Vec<usize> = (1..20)
                .map(|s| o.rasterize(40, 30, 20.0, 15.0, s as f64).iter().filter(|&&b| b).count())
                .collect();
            assert!(counts.windows(2).all(|p| p[0] <= p[1]), "{shape:?}");
        }
    }

    #[test]
    fn dataset_round_trips_through_files() {
        let spec = DatasetSpec {
            n_images: 3,
            ..Default::default()
        };
        let samples = generate_dataset(&spec, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&samples, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), samples);
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            DatasetSpec { n_images: 0, ..Default::default() },
            DatasetSpec { object_area: 0.0, ..Default::default() },
            DatasetSpec { shapes: vec![], ..Default::default() },
        ] {
            assert!(matches!(generate_dataset(&spec, 0), Err(PipelineError::InvalidConfig(_))));
        }
    }
}
