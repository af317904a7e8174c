use faer::{Mat, MatRef};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{nrmse, StudyResult};
use crate::error::{Error, Result};
use crate::gpr::{fit, GprConfig, Prediction};
use crate::signal::{AxisSet, FeatureConfig, Labels, PatchFeatures};

/// Settings shared by the holdout studies.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub repetitions: usize,
    pub train_frac: f64,
    /// Top-level seed; every split and optimizer start derives from it.
    pub seed: u64,
    pub gpr: GprConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            repetitions: 20,
            train_frac: 0.7,
            seed: 0,
            gpr: GprConfig::default(),
        }
    }
}

pub(crate) fn derived_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn derived_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn take_rows(x: MatRef<'_, f64>, idx: &[usize]) -> Mat<f64> {
    Mat::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

/// Short label for a feature configuration, e.g. `xyz@5`.
pub fn config_label(fc: &FeatureConfig) -> String {
    format!("{}@{}", fc.axes, fc.resolution_deg)
}

/// Repeated random train/validation splits; one fresh fit per repetition.
pub fn holdout_cv(
    features: &[PatchFeatures],
    fc: &FeatureConfig,
    config: &StudyConfig,
) -> Result<StudyResult> {
    let n = features.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "holdout needs at least 10 rotations, got {n}"
        )));
    }
    if config.repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
    }
    if !(config.train_frac > 0.0 && config.train_frac <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {} outside (0, 1]",
            config.train_frac
        )));
    }
    let n_train = (config.train_frac * n as f64).round() as usize;
    if n_train < 2 || n_train >= n {
        return Err(Error::InvalidConfig(format!(
            "degenerate split: {n_train} training and {} validation rotations",
            n - n_train
        )));
    }
    let (x, y) = fc.design(features)?;
    let mut scores = Vec::with_capacity(config.repetitions);
    for rep in 0..config.repetitions as u64 {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut derived_rng(config.seed, rep));
        let (train, val) = idx.split_at(n_train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let gpr = GprConfig {
            seed: derived_seed(config.seed, rep),
            ..config.gpr.clone()
        };
        let model = fit(take_rows(x.as_ref(), train).as_ref(), &yt, &gpr)?;
        let pred = model.predict_batch(take_rows(x.as_ref(), val).as_ref())?;
        let yv: Vec<f64> = val.iter().map(|&i| y[i]).collect();
        let means: Vec<f64> = pred.iter().map(|p| p.mean).collect();
        scores.push(nrmse(&yv, &means)?);
    }
    StudyResult::new(config_label(fc), x.ncols(), scores)
}

/// Out-of-fold prediction for one rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldPrediction {
    pub rotation_id: u64,
    pub fold: usize,
    pub labels: Labels,
    pub prediction: Prediction,
}

/// Fold of every rotation: a seeded shuffle dealt round-robin into `k` folds.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidConfig(format!("k = {k} exceeds {n} rotations")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut derived_rng(seed, u64::MAX));
    let mut fold = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        fold[i] = pos % k;
    }
    Ok(fold)
}

/// k-fold cross-validation; each rotation is predicted once, by the model
/// that did not see it. Output follows the input order.
pub fn kfold_cv(
    features: &[PatchFeatures],
    fc: &FeatureConfig,
    k: usize,
    gpr: &GprConfig,
    seed: u64,
) -> Result<Vec<FoldPrediction>> {
    let n = features.len();
    let folds = fold_assignment(n, k, seed)?;
    let (x, y) = fc.design(features)?;
    let mut out: Vec<Option<FoldPrediction>> = vec![None; n];
    for f in 0..k {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| folds[i] == f);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let cfg = GprConfig {
            seed: derived_seed(seed, f as u64),
            ..gpr.clone()
        };
        let model = fit(take_rows(x.as_ref(), &train).as_ref(), &yt, &cfg)?;
        let pred = model.predict_batch(take_rows(x.as_ref(), &test).as_ref())?;
        for (&i, p) in test.iter().zip(pred) {
            out[i] = Some(FoldPrediction {
                rotation_id: features[i].rotation_id,
                fold: f,
                labels: features[i].labels,
                prediction: p,
            });
        }
    }
    Ok(out.into_iter().map(|p| p.expect("every rotation is in one fold")).collect())
}

/// Holdout study per axis configuration at a fixed resolution.
pub fn input_selection_study(
    features: &[PatchFeatures],
    configs: &[AxisSet],
    resolution_deg: f64,
    config: &StudyConfig,
) -> Result<Vec<StudyResult>> {
    configs
        .iter()
        .map(|axes| holdout_cv(features, &FeatureConfig::new(axes.clone(), resolution_deg), config))
        .collect()
}

pub const STUDY_STEPS_DEG: [f64; 5] = [0.5, 1.0, 2.5, 5.0, 10.0];

/// Holdout study per patch resolution with a fixed axis set.
pub fn resolution_study(
    features: &[PatchFeatures],
    axes: &AxisSet,
    steps_deg: &[f64],
    config: &StudyConfig,
) -> Result<Vec<StudyResult>> {
    steps_deg
        .iter()
        .map(|&s| holdout_cv(features, &FeatureConfig::new(axes.clone(), s), config))
        .collect()
}
