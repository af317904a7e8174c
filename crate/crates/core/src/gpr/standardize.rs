use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Z-score transform of inputs and target.
///
/// Input columns whose spread is numerically zero are dropped; `kept` lists
/// the surviving raw column indices in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub input_dim: usize,
    pub kept: Vec<usize>,
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn negligible(std: f64, mean: f64) -> bool {
    !(std > 1e-12 * mean.abs().max(1.0))
}

impl Standardizer {
    /// Identity transform over `dim` inputs.
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            input_dim: dim,
            kept: (0..dim).collect(),
            input_mean: vec![0.0; dim],
            input_std: vec![1.0; dim],
            target_mean: 0.0,
            target_std: 1.0,
        }
    }

    pub fn fit(x: MatRef<'_, f64>, y: &[f64]) -> Result<Self> {
        let (n, d) = (x.nrows(), x.ncols());
        if n != y.len() {
            return Err(Error::InvalidInput(format!("{n} input rows but {} targets", y.len())));
        }
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput("empty design matrix".into()));
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite target {v}")));
        }
        let (target_mean, target_std) = mean_std(y.iter().copied());
        if negligible(target_std, target_mean) {
            return Err(Error::InvalidData("target has zero variance".into()));
        }

        let mut kept = Vec::new();
        let mut input_mean = Vec::new();
        let mut input_std = Vec::new();
        for j in 0..d {
            let col = (0..n).map(|i| x[(i, j)]);
            if col.clone().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("non-finite value in input column {j}")));
            }
            let (m, s) = mean_std(col);
            if negligible(s, m) {
                continue;
            }
            kept.push(j);
            input_mean.push(m);
            input_std.push(s);
        }
        if kept.is_empty() {
            return Err(Error::InvalidData("every input column is constant".into()));
        }
        Ok(Standardizer {
            input_dim: d,
            kept,
            input_mean,
            input_std,
            target_mean,
            target_std,
        })
    }

    pub fn kept_dim(&self) -> usize {
        self.kept.len()
    }

    pub fn transform_inputs(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if x.ncols() != self.input_dim {
            return Err(Error::InvalidInput(format!(
                "expected {} input columns, got {}",
                self.input_dim,
                x.ncols()
            )));
        }
        Ok(Mat::from_fn(x.nrows(), self.kept.len(), |i, k| {
            (x[(i, self.kept[k])] - self.input_mean[k]) / self.input_std[k]
        }))
    }

    pub fn transform_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::InvalidInput(format!(
                "expected {} inputs, got {}",
                self.input_dim,
                x.len()
            )));
        }
        Ok(self
            .kept
            .iter()
            .enumerate()
            .map(|(k, &j)| (x[j] - self.input_mean[k]) / self.input_std[k])
            .collect())
    }

    pub fn transform_target(&self, y: f64) -> f64 {
        (y - self.target_mean) / self.target_std
    }

    pub fn restore_target(&self, y: f64) -> f64 {
        y * self.target_std + self.target_mean
    }

    pub fn restore_variance(&self, v: f64) -> f64 {
        v * self.target_std * self.target_std
    }
}
