//! Accuracy metrics, cross-validation and the input/resolution studies.

mod cv;
mod metrics;

use std::hint::black_box;
use std::time::Instant;

use faer::MatRef;

pub use cv::{
    config_label, fold_assignment, holdout_cv, input_selection_study, kfold_cv, resolution_study,
    FoldPrediction, StudyConfig, STUDY_STEPS_DEG,
};
pub use metrics::{
    error_by_slip, interval_coverage, mean_abs_error, mean_abs_error_in, nrmse, pearson, BoxStats,
    MetricsReport, SlipBin, StudyResult, SLIP_RANGE_DEG,
};

use crate::error::{Error, Result};
use crate::gpr::TrainedModel;
use crate::signal::{Axis, PatchFeatures};

/// Pearson r of every grid point against the lateral force.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationProfile {
    /// Grid angles relative to the patch centre.
    pub relative_angles: Vec<f64>,
    /// Indexed by [`Axis::index`].
    pub r: [Vec<f64>; 3],
    /// Points whose values were constant over the selected rotations; their
    /// r is reported as 0.
    pub flagged: Vec<(Axis, usize)>,
    pub n_rotations: usize,
}

impl CorrelationProfile {
    pub fn max_abs_r(&self, axis: Axis) -> f64 {
        self.r[axis.index()].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

pub const DEFAULT_SLIP_FILTER_DEG: f64 = 6.0;

/// Per-point correlation with Fy over rotations with `|slip| < slip_filter`.
pub fn correlation_profile(features: &[PatchFeatures], slip_filter: f64) -> Result<CorrelationProfile> {
    let kept: Vec<&PatchFeatures> = features
        .iter()
        .filter(|f| f.labels.slip_deg.abs() < slip_filter)
        .collect();
    if kept.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} rotations with |slip| < {slip_filter}",
            kept.len()
        )));
    }
    let first = kept[0];
    let points = first.points_per_axis();
    if kept
        .iter()
        .any(|f| f.points_per_axis() != points || f.step_deg != first.step_deg)
    {
        return Err(Error::InvalidData("feature grids differ between rotations".into()));
    }
    let fy: Vec<f64> = kept.iter().map(|f| f.labels.fy_n).collect();
    let mut r: [Vec<f64>; 3] = Default::default();
    let mut flagged = Vec::new();
    for axis in Axis::ALL {
        for k in 0..points {
            let col: Vec<f64> = kept.iter().map(|f| f.axis(axis)[k]).collect();
            let v = match pearson(&col, &fy) {
                Ok(v) => v,
                Err(Error::UndefinedCorrelation(_)) if col.iter().all(|v| *v == col[0]) => {
                    flagged.push((axis, k));
                    0.0
                }
                Err(e) => return Err(e),
            };
            r[axis.index()].push(v);
        }
    }
    Ok(CorrelationProfile {
        relative_angles: first.relative_angles(),
        r,
        flagged,
        n_rotations: kept.len(),
    })
}

/// Wall-clock cost of single-point predictions (mean and variance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Latency {
    pub mean_s: f64,
    pub std_s: f64,
    pub predictions: usize,
}

/// Times `repeats` passes of one-at-a-time predictions over the rows of `x`.
pub fn bench_latency(model: &TrainedModel, x: MatRef<'_, f64>, repeats: usize) -> Result<Latency> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    if x.nrows() == 0 {
        return Err(Error::InvalidInput("no inputs to time".into()));
    }
    let rows: Vec<Vec<f64>> = (0..x.nrows())
        .map(|i| (0..x.ncols()).map(|j| x[(i, j)]).collect())
        .collect();
    let mut times = Vec::with_capacity(repeats * rows.len());
    for _ in 0..repeats {
        for row in &rows {
            let t = Instant::now();
            black_box(model.predict(black_box(row))?);
            times.push(t.elapsed().as_secs_f64());
        }
    }
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let var = times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(Latency {
        mean_s: mean,
        std_s: var.sqrt(),
        predictions: times.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Hyperparameters;
    use crate::signal::Labels;
    use faer::Mat;

    fn grid(i: usize, slip: f64) -> PatchFeatures {
        let fy = -100.0 * slip;
        PatchFeatures {
            rotation_id: i as u64,
            labels: Labels {
                fy_n: fy,
                fz_n: 4160.0,
                slip_deg: slip,
                speed_kmh: 60.0,
            },
            center_deg: 180.0,
            start_deg: 145.0,
            step_deg: 0.5,
            accel: [
                vec![1.0; 140],
                (0..140).map(|k| fy * (k as f64 + 1.0)).collect(),
                (0..140).map(|k| ((i * 31 + k * 7) % 11) as f64).collect(),
            ],
        }
    }

    #[test]
    fn profile_shape_and_flags() {
        let data: Vec<_> = (0..20).map(|i| grid(i, -9.0 + i as f64)).collect();
        let p = correlation_profile(&data, 6.0).unwrap();
        assert_eq!(p.n_rotations, 11);
        for axis in Axis::ALL {
            assert_eq!(p.r[axis.index()].len(), 140);
        }
        assert_eq!(p.relative_angles[0], -35.0);
        assert_eq!(p.flagged.len(), 140);
        assert!(p.flagged.iter().all(|(a, _)| *a == Axis::X));
        assert!((p.max_abs_r(Axis::Y) - 1.0).abs() < 1e-12);
        assert!(p.max_abs_r(Axis::Y) >= p.max_abs_r(Axis::Z));
        assert!(matches!(
            correlation_profile(&data[..2], 6.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn latency_rejects_zero_repeats() {
        let x = Mat::from_fn(4, 1, |i, _| i as f64);
        let m = TrainedModel::condition(x.as_ref(), &[0.0, 1.0, 0.0, 1.0], Hyperparameters::isotropic(1.0, 1.0, 0.1))
            .unwrap();
        assert!(bench_latency(&m, x.as_ref(), 0).is_err());
        let l = bench_latency(&m, x.as_ref(), 2).unwrap();
        assert_eq!(l.predictions, 8);
        assert!(l.mean_s > 0.0);
    }
}
