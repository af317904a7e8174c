//! Half-integer Matérn covariance functions with automatic relevance determination.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;
const SQRT5: f64 = 2.236_067_977_499_79;

/// Smoothness ν of a half-integer Matérn kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    /// ν = 1/2, the exponential kernel.
    Half,
    /// ν = 3/2.
    ThreeHalves,
    /// ν = 5/2.
    FiveHalves,
}

/// Kernel and noise hyperparameters.
///
/// `length_scales` holds either one shared scale or one scale per input
/// dimension, in standardized input units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
    pub noise_variance: f64,
}

impl Hyperparameters {
    pub fn isotropic(signal_variance: f64, length_scale: f64, noise_variance: f64) -> Self {
        Hyperparameters {
            signal_variance,
            length_scales: vec![length_scale],
            noise_variance,
        }
    }

    pub fn ard(signal_variance: f64, length_scales: Vec<f64>, noise_variance: f64) -> Self {
        Hyperparameters {
            signal_variance,
            length_scales,
            noise_variance,
        }
    }

    pub fn is_ard(&self) -> bool {
        self.length_scales.len() > 1
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.signal_variance) {
            return Err(Error::InvalidHyperparameter(format!(
                "signal variance must be positive, got {}",
                self.signal_variance
            )));
        }
        if !ok(self.noise_variance) {
            return Err(Error::InvalidHyperparameter(format!(
                "noise variance must be positive, got {}",
                self.noise_variance
            )));
        }
        if self.length_scales.is_empty() {
            return Err(Error::InvalidHyperparameter("no length scales".into()));
        }
        if let Some(l) = self.length_scales.iter().find(|&&l| !ok(l)) {
            return Err(Error::InvalidHyperparameter(format!(
                "length scales must be positive, got {l}"
            )));
        }
        Ok(())
    }

    /// Checks hyperparameters against an input dimension.
    pub fn validate_for(&self, dim: usize) -> Result<()> {
        self.validate()?;
        let n = self.length_scales.len();
        if n != 1 && n != dim {
            return Err(Error::InvalidInput(format!(
                "{n} length scales for {dim}-dimensional inputs"
            )));
        }
        Ok(())
    }

    /// Length scale for dimension `d`.
    pub fn length_scale(&self, d: usize) -> f64 {
        if self.length_scales.len() == 1 {
            self.length_scales[0]
        } else {
            self.length_scales[d]
        }
    }
}

/// Closed-form Matérn covariance at distance `tau`.
pub fn matern_halfint(tau: f64, nu: Smoothness, length_scale: f64, signal_variance: f64) -> Result<f64> {
    if !(length_scale > 0.0 && length_scale.is_finite()) {
        return Err(Error::InvalidHyperparameter(format!(
            "length scale must be positive, got {length_scale}"
        )));
    }
    if !(signal_variance > 0.0 && signal_variance.is_finite()) {
        return Err(Error::InvalidHyperparameter(format!(
            "signal variance must be positive, got {signal_variance}"
        )));
    }
    if !(tau >= 0.0) {
        return Err(Error::InvalidInput(format!("distance must be non-negative, got {tau}")));
    }
    let r = tau / length_scale;
    Ok(signal_variance
        * match nu {
            Smoothness::Half => (-r).exp(),
            Smoothness::ThreeHalves => matern32_unit(r),
            Smoothness::FiveHalves => {
                let s = SQRT5 * r;
                (1.0 + s + s * s / 3.0) * (-s).exp()
            }
        })
}

/// Unit-variance Matérn-3/2 profile at scaled distance `r`.
#[inline]
pub(crate) fn matern32_unit(r: f64) -> f64 {
    let s = SQRT3 * r;
    (1.0 + s) * (-s).exp()
}

/// Squared ARD-weighted distance `sum_d ((x_d - y_d) / l_d)^2`.
#[inline]
fn scaled_sq_dist(x: &[f64], y: &[f64], hyper: &Hyperparameters) -> f64 {
    if hyper.length_scales.len() == 1 {
        let l = hyper.length_scales[0];
        let s: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        s / (l * l)
    } else {
        x.iter()
            .zip(y)
            .zip(&hyper.length_scales)
            .map(|((a, b), l)| {
                let t = (a - b) / l;
                t * t
            })
            .sum()
    }
}

/// Matérn-3/2 covariance with per-dimension length scales.
pub fn matern32_ard(x: &[f64], x2: &[f64], hyper: &Hyperparameters) -> Result<f64> {
    if x.len() != x2.len() {
        return Err(Error::InvalidInput(format!(
            "input dimensions differ: {} vs {}",
            x.len(),
            x2.len()
        )));
    }
    hyper.validate_for(x.len())?;
    Ok(hyper.signal_variance * matern32_unit(scaled_sq_dist(x, x2, hyper).sqrt()))
}

/// Row-major copy of a column-major matrix, so each point is contiguous.
pub(crate) fn rows_of(x: MatRef<'_, f64>) -> Vec<f64> {
    let (n, d) = (x.nrows(), x.ncols());
    let mut out = vec![0.0; n * d];
    for j in 0..d {
        for i in 0..n {
            out[i * d + j] = x[(i, j)];
        }
    }
    out
}

/// Covariance matrix between the rows of `x` and the rows of `x2`.
pub fn gram(x: MatRef<'_, f64>, x2: MatRef<'_, f64>, hyper: &Hyperparameters) -> Result<Mat<f64>> {
    let d = x.ncols();
    if x2.ncols() != d {
        return Err(Error::InvalidInput(format!(
            "column counts differ: {} vs {}",
            d,
            x2.ncols()
        )));
    }
    hyper.validate_for(d)?;
    let (a, b) = (rows_of(x), rows_of(x2));
    Ok(gram_rows(&a, &b, d, hyper))
}

pub(crate) fn gram_rows(a: &[f64], b: &[f64], d: usize, hyper: &Hyperparameters) -> Mat<f64> {
    let n = if d == 0 { 0 } else { a.len() / d };
    let m = if d == 0 { 0 } else { b.len() / d };
    let sf2 = hyper.signal_variance;
    Mat::from_fn(n, m, |i, j| {
        let r2 = scaled_sq_dist(&a[i * d..(i + 1) * d], &b[j * d..(j + 1) * d], hyper);
        sf2 * matern32_unit(r2.sqrt())
    })
}

/// Symmetric Gram matrix of one point set; the diagonal is exactly `signal_variance`.
pub(crate) fn gram_sym_rows(a: &[f64], d: usize, hyper: &Hyperparameters) -> Mat<f64> {
    let n = a.len() / d;
    let sf2 = hyper.signal_variance;
    let mut k = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = sf2;
        let pj = &a[j * d..(j + 1) * d];
        for i in j + 1..n {
            let r2 = scaled_sq_dist(&a[i * d..(i + 1) * d], pj, hyper);
            let v = sf2 * matern32_unit(r2.sqrt());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}
