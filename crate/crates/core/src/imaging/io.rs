//! Image and mask files.
//!
//! Images are read from and written to PNG or binary PPM (chosen by file
//! extension). Masks are binary PGM files holding 0 for background and 255 for
//! foreground; on read any value of 128 or more counts as foreground.

use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder, ImageFormat, Luma, RgbImage};

use super::{BinaryMask, Image, ImagingError, PixelMap};
use crate::scalar::{min_max, Real};

fn format_for(path: &Path) -> Result<ImageFormat, ImagingError> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => Ok(ImageFormat::Png),
        Some("ppm") | Some("pgm") | Some("pnm") => Ok(ImageFormat::Pnm),
        other => Err(ImagingError::Format(format!(
            "unsupported image extension {other:?} for {}",
            path.display()
        ))),
    }
}

fn save(raw: &[u8], width: u32, height: u32, color: ExtendedColorType, path: &Path) -> Result<(), ImagingError> {
    let format = format_for(path)?;
    if format == ImageFormat::Png {
        image::save_buffer_with_format(path, raw, width, height, color, format)?;
        return Ok(());
    }
    let subtype = match color {
        ExtendedColorType::L8 => PnmSubtype::Graymap(SampleEncoding::Binary),
        _ => PnmSubtype::Pixmap(SampleEncoding::Binary),
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    PnmEncoder::new(&mut file)
        .with_subtype(subtype)
        .write_image(raw, width, height, color)?;
    Ok(())
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image, ImagingError> {
    let rgb = image::open(path.as_ref())?.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    Image::new(w, h, rgb.pixels().map(|p| p.0).collect())
}

pub fn write_image(img: &Image, path: impl AsRef<Path>) -> Result<(), ImagingError> {
    let path = path.as_ref();
    let buf = RgbImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        image::Rgb(img.pixel(x as usize, y as usize))
    });
    save(buf.as_raw(), buf.width(), buf.height(), ExtendedColorType::Rgb8, path)
}

pub fn mask_to_gray(mask: &BinaryMask) -> GrayImage {
    GrayImage::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([if mask.get(x as usize, y as usize) { 255 } else { 0 }])
    })
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask, ImagingError> {
    let gray = image::open(path.as_ref())?.to_luma8();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    BinaryMask::new(w, h, gray.pixels().map(|p| p.0[0] >= 128).collect())
}

pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<(), ImagingError> {
    let g = mask_to_gray(mask);
    save(g.as_raw(), g.width(), g.height(), ExtendedColorType::L8, path.as_ref())
}

/// Writes 8-bit gray levels, row-major.
pub fn write_gray(width: usize, height: usize, levels: &[u8], path: impl AsRef<Path>) -> Result<(), ImagingError> {
    if levels.len() != width * height {
        return Err(ImagingError::LengthMismatch {
            expected: width * height,
            actual: levels.len(),
        });
    }
    save(levels, width as u32, height as u32, ExtendedColorType::L8, path.as_ref())
}

/// Linearly maps `[min, max]` of the map to `[0, 255]`. A constant map renders black.
pub fn map_to_gray<F: Real>(map: &PixelMap<F>) -> GrayImage {
    let (lo, hi) = min_max(map.values()).unwrap_or((F::zero(), F::zero()));
    let span = (hi - lo).as_f64();
    GrayImage::from_fn(map.width() as u32, map.height() as u32, |x, y| {
        let v = map.get(x as usize, y as usize);
        let level = if span > 0.0 {
            ((v - lo).as_f64() / span * 255.0).round()
        } else {
            0.0
        };
        Luma([level.clamp(0.0, 255.0) as u8])
    })
}

pub fn write_map_gray<F: Real>(map: &PixelMap<F>, path: impl AsRef<Path>) -> Result<(), ImagingError> {
    let g = map_to_gray(map);
    save(g.as_raw(), g.width(), g.height(), ExtendedColorType::L8, path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_image() -> Image {
        let pixels = (0..6 * 4)
            .map(|i| [(i * 7) as u8, (i * 13) as u8, (255 - i) as u8])
            .collect();
        Image::new(6, 4, pixels).unwrap()
    }

    #[test]
    fn image_round_trips_png_and_ppm() {
        let dir = tempfile::tempdir().unwrap();
        let img = sample_image();
        for name in ["a.png", "a.ppm"] {
            let p = dir.path().join(name);
            write_image(&img, &p).unwrap();
            assert_eq!(read_image(&p).unwrap(), img);
        }
    }

    #[test]
    fn mask_pgm_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mask = BinaryMask::from_fn(7, 5, |x, y| (x + 2 * y) % 3 == 0).unwrap();
        let p = dir.path().join("m.pgm");
        write_mask(&mask, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"P5"));
        let body = &bytes[bytes.len() - 35..];
        assert!(body.iter().all(|&b| b == 0 || b == 255));
        let back = read_mask(&p).unwrap();
        assert_eq!(back, mask);
        write_mask(&back, &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), bytes);
    }

    #[test]
    fn map_render_spans_full_range() {
        let m = PixelMap::new(3, 1, vec![2.0, 3.0, 4.0]).unwrap();
        let g = map_to_gray(&m);
        assert_eq!(g.as_raw(), &vec![0, 128, 255]);
    }

    #[test]
    fn unknown_extension_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_image(&sample_image(), dir.path().join("x.bmp")).is_err());
    }
}
