use super::EegMapError;
use crate::imaging::PixelMap;
use crate::scalar::Real;

/// Unit-sum Gaussian weights for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-r..=r)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`), folded
/// periodically for offsets longer than the signal.
pub(crate) fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

fn convolve_line<F: Real>(src: &[F], kernel: &[F], out: &mut [F]) {
    let n = src.len();
    let r = (kernel.len() / 2) as i64;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = F::zero();
        for (k, &w) in kernel.iter().enumerate() {
            acc += w * src[reflect(i as i64 + k as i64 - r, n)];
        }
        *o = acc;
    }
}

/// Separable Gaussian smoothing with reflective borders. `sigma` is in pixels;
/// zero returns the input unchanged.
pub fn gaussian_filter<F: Real>(map: &PixelMap<F>, sigma: f64) -> Result<PixelMap<F>, EegMapError> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(EegMapError::NegativeSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(map.clone());
    }
    let kernel: Vec<F> = gaussian_kernel(sigma).into_iter().map(F::lit).collect();
    let (w, h) = map.dims();
    let mut rows = vec![F::zero(); w * h];
    for (src, dst) in map.values().chunks(w).zip(rows.chunks_mut(w)) {
        convolve_line(src, &kernel, dst);
    }
    let mut out = vec![F::zero(); w * h];
    let mut col = vec![F::zero(); h];
    let mut col_out = vec![F::zero(); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = rows[y * w + x];
        }
        convolve_line(&col, &kernel, &mut col_out);
        for y in 0..h {
            out[y * w + x] = col_out[y];
        }
    }
    Ok(PixelMap::new(w, h, out)?)
}
