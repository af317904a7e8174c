//! Butterworth low-pass design as cascaded second-order sections.
//!
//! The analog prototype poles are scaled to the prewarped cutoff and mapped
//! through the bilinear transform. Conjugate pole pairs become biquads with a
//! double zero at z = -1; an odd order adds one first-order section. Each
//! section is normalized to unit DC gain.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Complex frequency response at normalized angular frequency `omega` (rad/sample).
    fn response(&self, omega: f64) -> (f64, f64) {
        // z^-1 = cos w - i sin w, z^-2 = cos 2w - i sin 2w
        let (c1, s1) = (omega.cos(), -omega.sin());
        let (c2, s2) = ((2.0 * omega).cos(), -(2.0 * omega).sin());
        let num = (
            self.b[0] + self.b[1] * c1 + self.b[2] * c2,
            self.b[1] * s1 + self.b[2] * s2,
        );
        let den = (1.0 + self.a[0] * c1 + self.a[1] * c2, self.a[0] * s1 + self.a[1] * s2);
        let d2 = den.0 * den.0 + den.1 * den.1;
        (
            (num.0 * den.0 + num.1 * den.1) / d2,
            (num.1 * den.0 - num.0 * den.1) / d2,
        )
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }
}

/// Cascade of biquads applied in series.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
    pub sample_rate: f64,
}

impl SosFilter {
    pub fn butterworth_lowpass(order: usize, cutoff_hz: f64, sample_rate: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig("filter order must be at least 1".into()));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        let nyquist = sample_rate / 2.0;
        if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
            return Err(Error::InvalidConfig(format!(
                "cutoff {cutoff_hz} Hz must lie strictly between 0 and Nyquist ({nyquist} Hz)"
            )));
        }

        let fs2 = 2.0 * sample_rate;
        let warped = fs2 * (PI * cutoff_hz / sample_rate).tan();
        let n = order as f64;

        let mut sections = Vec::with_capacity(order.div_ceil(2));
        // Upper-half-plane poles of the prototype; the conjugate is implied.
        for k in 0..order / 2 {
            let theta = PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
            let (re, im) = (warped * theta.cos(), warped * theta.sin());
            // z = (fs2 + s) / (fs2 - s)
            let den = (fs2 - re) * (fs2 - re) + im * im;
            let zr = ((fs2 + re) * (fs2 - re) - im * im) / den;
            let zi = ((fs2 + re) * im + im * (fs2 - re)) / den;
            let a1 = -2.0 * zr;
            let a2 = zr * zr + zi * zi;
            let g = (1.0 + a1 + a2) / 4.0;
            sections.push(Biquad {
                b: [g, 2.0 * g, g],
                a: [a1, a2],
            });
        }
        if order % 2 == 1 {
            let p = -warped;
            let zp = (fs2 + p) / (fs2 - p);
            let g = (1.0 - zp) / 2.0;
            sections.push(Biquad {
                b: [g, g, 0.0],
                a: [-zp, 0.0],
            });
        }
        Ok(SosFilter {
            sections,
            sample_rate,
        })
    }

    /// Magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let omega = 2.0 * PI * freq_hz / self.sample_rate;
        let (mut re, mut im) = (1.0, 0.0);
        for s in &self.sections {
            let (r, i) = s.response(omega);
            (re, im) = (re * r - im * i, re * i + im * r);
        }
        (re * re + im * im).sqrt()
    }

    /// Causal filtering (transposed direct form II per section).
    ///
    /// Section states start at the steady state for a constant input equal
    /// to the first sample, so a signal with a large DC offset does not ring
    /// at the start of the record.
    pub fn apply(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.is_empty() {
            return Err(Error::InvalidData("cannot filter an empty channel".into()));
        }
        if let Some(i) = input.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite sample {} at index {i}",
                input[i]
            )));
        }
        let mut out = input.to_vec();
        for s in &self.sections {
            let x0 = out[0];
            let y0 = x0 * s.dc_gain();
            let mut z2 = s.b[2] * x0 - s.a[1] * y0;
            let mut z1 = s.b[1] * x0 - s.a[0] * y0 + z2;
            for v in out.iter_mut() {
                let x = *v;
                let y = s.b[0] * x + z1;
                z1 = s.b[1] * x - s.a[0] * y + z2;
                z2 = s.b[2] * x - s.a[1] * y;
                *v = y;
            }
        }
        Ok(out)
    }
}

/// Low-pass filters one channel with an `order`-pole Butterworth design.
pub fn butterworth_lowpass(
    channel: &[f64],
    sample_rate: f64,
    cutoff_hz: f64,
    order: usize,
) -> Result<Vec<f64>> {
    SosFilter::butterworth_lowpass(order, cutoff_hz, sample_rate)?.apply(channel)
}
