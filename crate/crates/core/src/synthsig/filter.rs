//! Butterworth filters as cascades of second-order sections.
//!
//! Sections follow the bilinear-transform biquad formulas with prewarping at the
//! cutoff, so a cascade with the Butterworth Q factors reproduces the digital
//! Butterworth response exactly. Zero-phase filtering runs each section forward
//! and backward over a mirrored extension of the signal, starting each pass
//! from the steady state of the mean of its leading samples.

use crate::scalar::Real;

const EDGE_PAD: usize = 250;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad<F> {
    b0: F,
    b1: F,
    b2: F,
    a1: F,
    a2: F,
}

impl<F: Real> Biquad<F> {
    fn from_raw(b: [f64; 3], a: [f64; 3]) -> Self {
        let n = a[0];
        Self {
            b0: F::lit(b[0] / n),
            b1: F::lit(b[1] / n),
            b2: F::lit(b[2] / n),
            a1: F::lit(a[1] / n),
            a2: F::lit(a[2] / n),
        }
    }

    pub fn lowpass(cutoff: f64, sample_rate: f64, q: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * cutoff / sample_rate;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw(
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    pub fn highpass(cutoff: f64, sample_rate: f64, q: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * cutoff / sample_rate;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw(
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    pub fn dc_gain(&self) -> F {
        (self.b0 + self.b1 + self.b2) / (F::one() + self.a1 + self.a2)
    }

    /// Transposed direct form II state for a constant input `x0`.
    fn steady_state(&self, x0: F) -> [F; 2] {
        let g = self.dc_gain();
        [(g - self.b0) * x0, (self.b2 - self.a2 * g) * x0]
    }

    /// Zero-phase filtering over a mirrored extension of `x`.
    pub fn filtfilt(&self, x: &[F]) -> Vec<F> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = EDGE_PAD.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|k| x[k]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|k| x[n - 1 - k]));
        self.run(&mut ext, pad + 1);
        ext.reverse();
        self.run(&mut ext, pad + 1);
        ext.reverse();
        ext.drain(..pad);
        ext.truncate(n);
        ext
    }

    /// Runs the section from the steady state of the mean of the first `lead` samples.
    fn run(&self, data: &mut [F], lead: usize) {
        let lead = lead.clamp(1, data.len().max(1));
        let Some(head) = data.get(..lead) else { return };
        let x0 = head.iter().copied().sum::<F>() / F::from_count(lead);
        let [mut s1, mut s2] = self.steady_state(x0);
        for v in data.iter_mut() {
            let x = *v;
            let y = self.b0 * x + s1;
            s1 = self.b1 * x - self.a1 * y + s2;
            s2 = self.b2 * x - self.a2 * y;
            *v = y;
        }
    }
}

fn butterworth_qs(order: usize) -> Vec<f64> {
    (1..=order / 2)
        .map(|k| {
            let theta = (2 * k - 1) as f64 * std::f64::consts::PI / (2 * order) as f64;
            1.0 / (2.0 * theta.cos())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SosFilter<F> {
    sections: Vec<Biquad<F>>,
}

impl<F: Real> SosFilter<F> {
    /// Even-order Butterworth low-pass.
    pub fn butter_lowpass(order: usize, cutoff: f64, sample_rate: f64) -> Self {
        assert!(order >= 2 && order.is_multiple_of(2), "order must be even");
        Self {
            sections: butterworth_qs(order)
                .into_iter()
                .map(|q| Biquad::lowpass(cutoff, sample_rate, q))
                .collect(),
        }
    }

    pub fn butter_highpass(order: usize, cutoff: f64, sample_rate: f64) -> Self {
        assert!(order >= 2 && order.is_multiple_of(2), "order must be even");
        Self {
            sections: butterworth_qs(order)
                .into_iter()
                .map(|q| Biquad::highpass(cutoff, sample_rate, q))
                .collect(),
        }
    }

    /// High-pass at `low` cascaded with low-pass at `high`; `low == 0` skips the
    /// high-pass stage.
    pub fn butter_bandpass(order: usize, low: f64, high: f64, sample_rate: f64) -> Self {
        let mut f = Self::butter_lowpass(order, high, sample_rate);
        if low > 0.0 {
            f.sections
                .extend(Self::butter_highpass(order, low, sample_rate).sections);
        }
        f
    }

    pub fn sections(&self) -> &[Biquad<F>] {
        &self.sections
    }

    /// Causal filtering starting from the steady state of the first sample.
    pub fn filter_in_place(&self, data: &mut [F]) {
        for s in &self.sections {
            s.run(data, 1);
        }
    }

    /// Forward-backward (zero-phase) filtering, one section at a time so each
    /// section starts from the steady state of an already filtered signal.
    pub fn filtfilt(&self, x: &[F]) -> Vec<F> {
        let mut y = x.to_vec();
        for s in &self.sections {
            y = s.filtfilt(&y);
        }
        y
    }

    /// Magnitude of the frequency response at `freq`.
    pub fn magnitude(&self, freq: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq / sample_rate;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        self.sections
            .iter()
            .map(|s| {
                let (b0, b1, b2) = (s.b0.as_f64(), s.b1.as_f64(), s.b2.as_f64());
                let (a1, a2) = (s.a1.as_f64(), s.a2.as_f64());
                let nr = b0 + b1 * c1 + b2 * c2;
                let ni = b1 * s1 + b2 * s2;
                let dr = 1.0 + a1 * c1 + a2 * c2;
                let di = a1 * s1 + a2 * s2;
                ((nr * nr + ni * ni) / (dr * dr + di * di)).sqrt()
            })
            .product()
    }
}
