use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpr::Prediction;
use crate::signal::Labels;

fn check_pair(a: &[f64], b: &[f64], min: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < min {
        return Err(Error::InsufficientData(format!(
            "need at least {min} values, got {}",
            a.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite value".into()));
    }
    Ok(())
}

/// Root mean square error as a percentage of the largest absolute target.
pub fn nrmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, 1)?;
    let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if ymax == 0.0 {
        return Err(Error::UndefinedNormalization("all targets are zero".into()));
    }
    let mse = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
    Ok(100.0 * mse.sqrt() / ymax)
}

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 2)?;
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

pub fn mean_abs_error(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat, 1)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Fraction of targets inside the symmetric observation interval at `level`.
pub fn interval_coverage(predictions: &[Prediction], truth: &[f64], level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("coverage level {level} outside (0, 1)")));
    }
    if predictions.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} targets",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InsufficientData("no predictions".into()));
    }
    let inside = predictions
        .iter()
        .zip(truth)
        .filter(|(p, y)| {
            let (lo, hi) = p.interval(level);
            lo <= **y && **y <= hi
        })
        .count();
    Ok(inside as f64 / truth.len() as f64)
}

/// Accuracy summary of a set of predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Percent.
    pub nrmse: f64,
    pub pearson_r: f64,
    /// Newtons.
    pub mean_abs_err: f64,
    pub coverage_95: f64,
    pub n: usize,
}

impl MetricsReport {
    pub fn compute(predictions: &[Prediction], truth: &[f64]) -> Result<Self> {
        let means: Vec<f64> = predictions.iter().map(|p| p.mean).collect();
        Ok(MetricsReport {
            nrmse: nrmse(truth, &means)?,
            pearson_r: pearson(truth, &means)?,
            mean_abs_err: mean_abs_error(truth, &means)?,
            coverage_95: interval_coverage(predictions, truth, 0.95)?,
            n: truth.len(),
        })
    }
}

/// Absolute prediction error of the rotations whose slip falls in `[lo, hi)`
/// (the last bin also takes `hi`). Empty bins carry `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlipBin {
    pub lo_deg: f64,
    pub hi_deg: f64,
    pub n: usize,
    pub mean_abs_err: Option<f64>,
    pub std_abs_err: Option<f64>,
}

pub const SLIP_RANGE_DEG: f64 = 8.0;

/// Mean and standard deviation of |error| per slip bin over `[-8°, 8°]`.
pub fn error_by_slip(
    predictions: &[Prediction],
    labels: &[Labels],
    bin_width: f64,
) -> Result<Vec<SlipBin>> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let nbins = (2.0 * SLIP_RANGE_DEG / bin_width).round();
    if !(bin_width > 0.0) || ((2.0 * SLIP_RANGE_DEG / bin_width) - nbins).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "bin width {bin_width} must divide {}",
            2.0 * SLIP_RANGE_DEG
        )));
    }
    let nbins = nbins as usize;
    let mut errs: Vec<Vec<f64>> = vec![Vec::new(); nbins];
    for (p, l) in predictions.iter().zip(labels) {
        let s = l.slip_deg;
        if !(s.abs() <= SLIP_RANGE_DEG) {
            continue;
        }
        let b = (((s + SLIP_RANGE_DEG) / bin_width).floor() as usize).min(nbins - 1);
        errs[b].push((p.mean - l.fy_n).abs());
    }
    Ok(errs
        .into_iter()
        .enumerate()
        .map(|(b, e)| {
            let lo = -SLIP_RANGE_DEG + b as f64 * bin_width;
            let (mean, std) = if e.is_empty() {
                (None, None)
            } else {
                let m = e.iter().sum::<f64>() / e.len() as f64;
                let var = if e.len() > 1 {
                    e.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (e.len() - 1) as f64
                } else {
                    0.0
                };
                (Some(m), Some(var.sqrt()))
            };
            SlipBin {
                lo_deg: lo,
                hi_deg: lo + bin_width,
                n: e.len(),
                mean_abs_err: mean,
                std_abs_err: std,
            }
        })
        .collect())
}

/// Mean |error| over rotations with `lo <= |slip| <= hi`.
pub fn mean_abs_error_in(
    predictions: &[Prediction],
    labels: &[Labels],
    lo: f64,
    hi: f64,
) -> Option<f64> {
    let e: Vec<f64> = predictions
        .iter()
        .zip(labels)
        .filter(|(_, l)| (lo..=hi).contains(&l.slip_deg.abs()))
        .map(|(p, l)| (p.mean - l.fy_n).abs())
        .collect();
    (!e.is_empty()).then(|| e.iter().sum::<f64>() / e.len() as f64)
}

/// Five-number summary plus mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

/// Quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("no samples".into()));
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let std = if s.len() > 1 {
            (s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(BoxStats {
            min: s[0],
            q1: quantile(&s, 0.25),
            median: quantile(&s, 0.5),
            q3: quantile(&s, 0.75),
            max: s[s.len() - 1],
            mean,
            std,
        })
    }
}

/// NRMSE distribution of one study configuration over its repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub label: String,
    pub input_dim: usize,
    pub nrmse: Vec<f64>,
    pub stats: BoxStats,
}

impl StudyResult {
    pub fn new(label: impl Into<String>, input_dim: usize, nrmse: Vec<f64>) -> Result<Self> {
        let stats = BoxStats::from_samples(&nrmse)?;
        Ok(StudyResult {
            label: label.into(),
            input_dim,
            nrmse,
            stats,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nrmse_examples() {
        assert_eq!(nrmse(&[1.0, -2.0], &[1.0, -2.0]).unwrap(), 0.0);
        let v = nrmse(&[0.0, 10.0], &[0.0, 0.0]).unwrap();
        assert!((v - 100.0 * 50f64.sqrt() / 10.0).abs() < 1e-12);
        assert!((v - 70.710_678_118_654_76).abs() < 1e-9);
        assert!(matches!(
            nrmse(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::UndefinedNormalization(_))
        ));
        assert!(nrmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn pearson_examples() {
        let a = [1.0, 2.0, 3.0];
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&a, &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-15);
        // Hand computation: 3 / sqrt(2 * 14/3).
        let r = pearson(&a, &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 3.0 / (2.0f64 * 14.0 / 3.0).sqrt()).abs() < 1e-12);
        assert!((r - 0.98198).abs() < 1e-5);
        assert!(matches!(
            pearson(&a, &[2.0, 2.0, 2.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    fn pred(mean: f64, var: f64) -> Prediction {
        let half = 1.96 * var.sqrt();
        Prediction {
            mean,
            variance: var,
            predictive_variance: var,
            interval_95: (mean - half, mean + half),
        }
    }

    #[test]
    fn coverage_extremes() {
        let y = [1.0, 2.0, 3.0];
        let perfect: Vec<_> = y.iter().map(|&v| pred(v, 0.5)).collect();
        assert_eq!(interval_coverage(&perfect, &y, 0.95).unwrap(), 1.0);
        let tight: Vec<_> = y.iter().map(|&v| pred(v + 0.1, 0.0)).collect();
        assert_eq!(interval_coverage(&tight, &y, 0.95).unwrap(), 0.0);
        assert!(interval_coverage(&tight, &y, 1.0).is_err());
    }

    #[test]
    fn slip_bins_cover_range_and_skip_empty() {
        let labels: Vec<Labels> = [-8.0, -0.5, 0.2, 8.0]
            .iter()
            .map(|&s| Labels {
                fy_n: 10.0,
                fz_n: 1.0,
                slip_deg: s,
                speed_kmh: 30.0,
            })
            .collect();
        let preds = vec![pred(12.0, 1.0), pred(9.0, 1.0), pred(10.0, 1.0), pred(7.0, 1.0)];
        let bins = error_by_slip(&preds, &labels, 1.0).unwrap();
        assert_eq!(bins.len(), 16);
        assert_eq!((bins[0].lo_deg, bins[15].hi_deg), (-8.0, 8.0));
        assert_eq!(bins[0].mean_abs_err, Some(2.0));
        assert_eq!(bins[7].mean_abs_err, Some(1.0));
        assert_eq!(bins[8].mean_abs_err, Some(0.0));
        assert_eq!(bins[15].mean_abs_err, Some(3.0));
        assert_eq!(bins[3].mean_abs_err, None);
        assert_eq!(bins[3].n, 0);
        assert!(error_by_slip(&preds, &labels, 3.0).is_err());
    }

    #[test]
    fn tukey_quartiles() {
        let s = BoxStats::from_samples(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 1.75, 2.5, 3.25, 4.0));
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn nrmse_is_scale_invariant(
            pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50),
            k in 0.01f64..100.0,
        ) {
            let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let yh: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(y.iter().any(|v| v.abs() > 1e-6));
            let a = nrmse(&y, &yh).unwrap();
            let ys: Vec<f64> = y.iter().map(|v| v * k).collect();
            let yhs: Vec<f64> = yh.iter().map(|v| v * k).collect();
            let b = nrmse(&ys, &yhs).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn box_stats_are_ordered(v in prop::collection::vec(-1e6f64..1e6, 1..40)) {
            let s = BoxStats::from_samples(&v).unwrap();
            prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
            prop_assert!(s.min <= s.mean && s.mean <= s.max);
        }

        #[test]
        fn pearson_is_bounded(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..50)) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            if let Ok(r) = pearson(&a, &b) {
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
