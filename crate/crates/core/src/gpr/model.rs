use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use super::chol::{Factor, DEFAULT_JITTER_LADDER};
use super::likelihood::{from_log_params, to_log_params, Objective};
use super::optimize::{maximize, AscentOptions};
use super::standardize::Standardizer;
use crate::error::{Error, Result};
use crate::signal::FeatureConfig;
use crate::kernel::{gram_rows, gram_sym_rows, matern32_unit, rows_of, Hyperparameters};

/// Multiplier of the standard deviation for the stored 95% interval.
pub const Z95: f64 = 1.96;

/// Settings for hyperparameter fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct GprConfig {
    /// Number of optimizer starts; the first uses the initial values below,
    /// the rest are seeded random perturbations of them.
    pub restarts: usize,
    /// One length scale per input (true) or a single shared scale.
    pub ard: bool,
    pub init_signal_variance: f64,
    /// Starting length scale in standardized input units; `None` uses
    /// `sqrt(d)` so the initial scaled distances stay of order one.
    pub init_length_scale: Option<f64>,
    pub init_noise_variance: f64,
    /// Box bounds on (σ_f², l, σ_ε²) in natural units.
    pub signal_variance_bounds: (f64, f64),
    pub length_scale_bounds: (f64, f64),
    pub noise_variance_bounds: (f64, f64),
    pub ascent: AscentOptions,
    pub jitter_ladder: Vec<f64>,
    pub seed: u64,
}

impl Default for GprConfig {
    fn default() -> Self {
        GprConfig {
            restarts: 5,
            ard: true,
            init_signal_variance: 1.0,
            init_length_scale: None,
            init_noise_variance: 0.1,
            signal_variance_bounds: (1e-4, 1e4),
            length_scale_bounds: (1e-3, 1e4),
            noise_variance_bounds: (1e-8, 10.0),
            ascent: AscentOptions::default(),
            jitter_ladder: DEFAULT_JITTER_LADDER.to_vec(),
            seed: 0,
        }
    }
}

impl GprConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.restarts == 0 {
            return bad("gpr.restarts must be at least 1");
        }
        for (name, (lo, hi)) in [
            ("signal variance", self.signal_variance_bounds),
            ("length scale", self.length_scale_bounds),
            ("noise variance", self.noise_variance_bounds),
        ] {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return bad(&format!("{name} bounds must satisfy 0 < lo < hi"));
            }
        }
        for v in [
            self.init_signal_variance,
            self.init_length_scale.unwrap_or(1.0),
            self.init_noise_variance,
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad("initial hyperparameters must be positive");
            }
        }
        if self.jitter_ladder.is_empty() || self.jitter_ladder.iter().any(|j| !(*j >= 0.0)) {
            return bad("jitter ladder must be a non-empty list of non-negative values");
        }
        if self.ascent.max_iter == 0 {
            return bad("gpr.max_iter must be at least 1");
        }
        Ok(())
    }
}

/// Posterior at one test input, in original target units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    /// Variance of the latent function value.
    pub variance: f64,
    /// Variance of a new observation (latent variance plus noise).
    pub predictive_variance: f64,
    pub interval_95: (f64, f64),
}

impl Prediction {
    fn new(mean: f64, variance: f64, noise: f64) -> Self {
        let predictive_variance = variance + noise;
        let half = Z95 * predictive_variance.sqrt();
        Prediction {
            mean,
            variance,
            predictive_variance,
            interval_95: (mean - half, mean + half),
        }
    }

    /// Symmetric observation interval at confidence `level` in (0, 1).
    pub fn interval(&self, level: f64) -> (f64, f64) {
        let z = normal_quantile(0.5 + level / 2.0);
        let half = z * self.predictive_variance.sqrt();
        (self.mean - half, self.mean + half)
    }
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    StdNormal::standard().inverse_cdf(p)
}

/// Outcome of the optimizer for one start.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub start: usize,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// A conditioned GP: standardized training data, hyperparameters and the
/// factorization needed for posterior mean and variance.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub(crate) x: Mat<f64>,
    pub(crate) rows: Vec<f64>,
    pub(crate) y: Vec<f64>,
    pub(crate) hyper: Hyperparameters,
    pub(crate) factor: Factor,
    pub(crate) alpha: Vec<f64>,
    pub(crate) standardizer: Standardizer,
    pub(crate) feature_config: Option<FeatureConfig>,
    pub(crate) jitter_ladder: Vec<f64>,
    pub(crate) log_likelihood: f64,
    pub(crate) trace: Vec<FitTrace>,
}

impl TrainedModel {
    /// Conditions a GP on already-standardized data with fixed hyperparameters.
    pub fn from_parts(
        x: Mat<f64>,
        y: Vec<f64>,
        hyper: Hyperparameters,
        standardizer: Standardizer,
        jitter_ladder: &[f64],
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidInput(format!(
                "{} input rows but {} targets",
                x.nrows(),
                y.len()
            )));
        }
        if x.ncols() != standardizer.kept_dim() {
            return Err(Error::InvalidInput(format!(
                "{} columns but the standardizer keeps {}",
                x.ncols(),
                standardizer.kept_dim()
            )));
        }
        hyper.validate_for(x.ncols())?;
        let rows = rows_of(x.as_ref());
        let k = gram_sym_rows(&rows, x.ncols(), &hyper);
        let factor = Factor::new(&k, hyper.noise_variance, hyper.signal_variance, jitter_ladder)?;
        let alpha = factor.solve(&y);
        let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let log_likelihood = -0.5 * fit
            - 0.5 * factor.log_det()
            - 0.5 * y.len() as f64 * (2.0 * std::f64::consts::PI).ln();
        Ok(TrainedModel {
            x,
            rows,
            y,
            hyper,
            factor,
            alpha,
            standardizer,
            feature_config: None,
            jitter_ladder: jitter_ladder.to_vec(),
            log_likelihood,
            trace: Vec::new(),
        })
    }

    /// Conditions on raw data with fixed hyperparameters and no standardization.
    pub fn condition(x: MatRef<'_, f64>, y: &[f64], hyper: Hyperparameters) -> Result<Self> {
        TrainedModel::from_parts(
            x.to_owned(),
            y.to_vec(),
            hyper,
            Standardizer::identity(x.ncols()),
            &DEFAULT_JITTER_LADDER,
        )
    }

    pub fn with_feature_config(mut self, config: FeatureConfig) -> Self {
        self.feature_config = Some(config);
        self
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn feature_config(&self) -> Option<&FeatureConfig> {
        self.feature_config.as_ref()
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn fit_trace(&self) -> &[FitTrace] {
        &self.trace
    }

    pub fn jitter(&self) -> f64 {
        self.factor.jitter
    }

    pub fn n_train(&self) -> usize {
        self.y.len()
    }

    /// Raw input dimension expected by [`TrainedModel::predict`].
    pub fn input_dim(&self) -> usize {
        self.standardizer.input_dim
    }

    /// Standardized training inputs (dropped columns removed).
    pub fn train_inputs(&self) -> MatRef<'_, f64> {
        self.x.as_ref()
    }

    pub fn train_targets(&self) -> &[f64] {
        &self.y
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Lower Cholesky factor of `K + (σ_ε² + jitter) I`.
    pub fn cholesky_factor(&self) -> MatRef<'_, f64> {
        self.factor.l()
    }

    fn finish(&self, mean_std: f64, var_std: f64) -> Prediction {
        let s = &self.standardizer;
        Prediction::new(
            s.restore_target(mean_std),
            s.restore_variance(var_std.max(0.0)),
            s.restore_variance(self.hyper.noise_variance),
        )
    }

    /// Posterior mean and variance at one raw input.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let z = self.standardizer.transform_row(x)?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite test input".into()));
        }
        let d = z.len();
        let sf2 = self.hyper.signal_variance;
        let kstar: Vec<f64> = self
            .rows
            .chunks_exact(d)
            .map(|r| {
                let r2: f64 = r
                    .iter()
                    .zip(&z)
                    .enumerate()
                    .map(|(j, (a, b))| {
                        let t = (a - b) / self.hyper.length_scale(j);
                        t * t
                    })
                    .sum();
                sf2 * matern32_unit(r2.sqrt())
            })
            .collect();
        let mean: f64 = kstar.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = self.factor.forward(&kstar);
        let var = sf2 - v.iter().map(|t| t * t).sum::<f64>();
        Ok(self.finish(mean, var))
    }

    /// Posterior at every row of `x`, sharing one cross-covariance block.
    pub fn predict_batch(&self, x: MatRef<'_, f64>) -> Result<Vec<Prediction>> {
        let z = self.standardizer.transform_inputs(x)?;
        let d = z.ncols();
        let m = z.nrows();
        if m == 0 {
            return Ok(Vec::new());
        }
        let zrows = rows_of(z.as_ref());
        if zrows.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite test input".into()));
        }
        // n x m cross covariance
        let kxs = gram_rows(&self.rows, &zrows, d, &self.hyper);
        let alpha = Mat::from_fn(self.alpha.len(), 1, |i, _| self.alpha[i]);
        let mut means = Mat::<f64>::zeros(m, 1);
        matmul(&mut means, Accum::Replace, kxs.transpose(), &alpha, 1.0, Par::Seq);
        let v = self.factor.forward_mat(kxs);
        let sf2 = self.hyper.signal_variance;
        Ok((0..m)
            .map(|j| {
                let col = v.col(j);
                let q: f64 = (0..col.nrows()).map(|i| col[i] * col[i]).sum();
                self.finish(means[(j, 0)], sf2 - q)
            })
            .collect())
    }
}

fn log_bounds(config: &GprConfig, n_scales: usize) -> Vec<(f64, f64)> {
    let ln = |(a, b): (f64, f64)| (a.ln(), b.ln());
    let mut b = vec![ln(config.signal_variance_bounds)];
    b.extend(std::iter::repeat_n(ln(config.length_scale_bounds), n_scales));
    b.push(ln(config.noise_variance_bounds));
    b
}

/// Fits a Matérn-3/2 GP by maximizing the log marginal likelihood.
///
/// Inputs and target are z-scored first; every start runs the ascent in log
/// hyperparameter space and the start with the highest likelihood wins.
pub fn fit(x: MatRef<'_, f64>, y: &[f64], config: &GprConfig) -> Result<TrainedModel> {
    config.validate()?;
    if x.nrows() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 training points, got {}",
            x.nrows()
        )));
    }
    if x.ncols() == 0 {
        return Err(Error::InvalidInput("need at least one input column".into()));
    }
    let standardizer = Standardizer::fit(x, y)?;
    let xs = standardizer.transform_inputs(x)?;
    let ys: Vec<f64> = y.iter().map(|&v| standardizer.transform_target(v)).collect();
    let objective = Objective::new(xs.as_ref(), &ys, &config.jitter_ladder)?;

    let n_scales = if config.ard { objective.dim() } else { 1 };
    let bounds = log_bounds(config, n_scales);
    let init = to_log_params(&Hyperparameters {
        signal_variance: config.init_signal_variance,
        length_scales: vec![
            config
                .init_length_scale
                .unwrap_or((objective.dim() as f64).sqrt());
            n_scales
        ],
        noise_variance: config.init_noise_variance,
    });

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let jitter = Normal::new(0.0, 1.0).expect("unit normal");
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut trace = Vec::with_capacity(config.restarts);
    let mut last_err = None;

    for start in 0..config.restarts {
        let mut theta0 = init.clone();
        if start > 0 {
            theta0[0] += 0.5 * jitter.sample(&mut rng);
            for t in theta0[1..=n_scales].iter_mut() {
                *t += jitter.sample(&mut rng);
            }
            let (lo, hi) = (1e-3f64.ln(), 0.5f64.ln());
            theta0[n_scales + 1] = rng.random_range(lo..hi);
        }
        let eval = |theta: &[f64]| {
            objective
                .evaluate(&from_log_params(theta))
                .map(|ll| (ll.value, ll.gradient))
        };
        match maximize(eval, &theta0, &bounds, &config.ascent) {
            Ok(res) => {
                trace.push(FitTrace {
                    start,
                    log_likelihood: res.value,
                    iterations: res.iterations,
                    evaluations: res.evaluations,
                    converged: res.converged,
                });
                if best.as_ref().is_none_or(|(v, _)| res.value > *v) {
                    best = Some((res.value, res.x));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }

    let Some((_, theta)) = best else {
        return Err(last_err.unwrap_or_else(|| Error::Optimization("no start succeeded".into())));
    };
    let mut model = TrainedModel::from_parts(
        xs,
        ys,
        from_log_params(&theta),
        standardizer,
        &config.jitter_ladder,
    )?;
    model.trace = trace;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Mat<f64>, Vec<f64>) {
        let x = Mat::from_fn(30, 2, |i, j| ((i * (j + 2)) as f64 * 0.31).sin());
        let y = (0..30).map(|i| (x[(i, 0)] * 2.0).sin() + 0.3 * x[(i, 1)]).collect();
        (x, y)
    }

    #[test]
    fn fit_is_deterministic() {
        let (x, y) = toy();
        let cfg = GprConfig {
            restarts: 3,
            seed: 11,
            ..Default::default()
        };
        let a = fit(x.as_ref(), &y, &cfg).unwrap();
        let b = fit(x.as_ref(), &y, &cfg).unwrap();
        assert_eq!(a.hyperparameters(), b.hyperparameters());
        assert_eq!(a.log_likelihood().to_bits(), b.log_likelihood().to_bits());
        assert_eq!(a.fit_trace().len(), 3);
    }

    #[test]
    fn fit_improves_on_initial_guess() {
        let (x, y) = toy();
        let model = fit(x.as_ref(), &y, &GprConfig::default()).unwrap();
        let start = TrainedModel::from_parts(
            model.x.clone(),
            model.y.clone(),
            Hyperparameters::ard(1.0, vec![1.0, 1.0], 0.1),
            model.standardizer.clone(),
            &DEFAULT_JITTER_LADDER,
        )
        .unwrap();
        assert!(model.log_likelihood() > start.log_likelihood());
    }

    #[test]
    fn rejects_degenerate_training_sets() {
        let x = Mat::from_fn(1, 1, |_, _| 0.0);
        assert!(fit(x.as_ref(), &[1.0], &GprConfig::default()).is_err());
        let x = Mat::from_fn(4, 1, |i, _| i as f64);
        assert!(matches!(
            fit(x.as_ref(), &[3.0; 4], &GprConfig::default()),
            Err(Error::InvalidData(_))
        ));
    }

    #[test]
    fn dimension_mismatch_on_predict() {
        let (x, y) = toy();
        let m = TrainedModel::condition(x.as_ref(), &y, Hyperparameters::isotropic(1.0, 1.0, 0.1))
            .unwrap();
        assert!(matches!(m.predict(&[0.0]), Err(Error::InvalidInput(_))));
        let bad = Mat::<f64>::zeros(2, 3);
        assert!(m.predict_batch(bad.as_ref()).is_err());
    }

    #[test]
    fn interval_levels() {
        let p = Prediction::new(10.0, 3.0, 1.0);
        assert!((p.interval_95.1 - 10.0 - 1.96 * 2.0).abs() < 1e-12);
        let (lo, hi) = p.interval(0.95);
        assert!((hi - lo - 2.0 * 1.959_963_984_540_054 * 2.0).abs() < 1e-9);
    }
}
