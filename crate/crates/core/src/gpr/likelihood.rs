//! Log marginal likelihood of a zero-mean GP with Matérn-3/2 ARD covariance.
//!
//! Hyperparameters are handled in log space. The parameter vector is laid out
//! as `[ln σ_f², ln l_1, …, ln l_m, ln σ_ε²]` with `m` either 1 or the input
//! dimension.

use std::f64::consts::PI;

use faer::MatRef;

use super::chol::Factor;
use crate::error::{Error, Result};
use crate::kernel::{rows_of, Hyperparameters};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Value and log-parameter gradient of the log marginal likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    pub gradient: Vec<f64>,
}

pub(crate) fn to_log_params(h: &Hyperparameters) -> Vec<f64> {
    let mut t = Vec::with_capacity(h.length_scales.len() + 2);
    t.push(h.signal_variance.ln());
    t.extend(h.length_scales.iter().map(|l| l.ln()));
    t.push(h.noise_variance.ln());
    t
}

pub(crate) fn from_log_params(theta: &[f64]) -> Hyperparameters {
    let m = theta.len() - 2;
    Hyperparameters {
        signal_variance: theta[0].exp(),
        length_scales: theta[1..=m].iter().map(|v| v.exp()).collect(),
        noise_variance: theta[m + 1].exp(),
    }
}

/// Training data laid out for repeated likelihood evaluations.
#[derive(Debug, Clone)]
pub(crate) struct Objective {
    rows: Vec<f64>,
    y: Vec<f64>,
    n: usize,
    d: usize,
    ladder: Vec<f64>,
}

impl Objective {
    pub fn new(x: MatRef<'_, f64>, y: &[f64], ladder: &[f64]) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidInput(format!(
                "{} input rows but {} targets",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidInput("empty design matrix".into()));
        }
        let rows = rows_of(x);
        if rows.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite training value".into()));
        }
        if ladder.is_empty() {
            return Err(Error::InvalidConfig("empty jitter ladder".into()));
        }
        Ok(Objective {
            rows,
            y: y.to_vec(),
            n: x.nrows(),
            d: x.ncols(),
            ladder: ladder.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn evaluate(&self, hyper: &Hyperparameters) -> Result<LogLikelihood> {
        hyper.validate_for(self.d)?;
        let (n, d) = (self.n, self.d);
        let sf2 = hyper.signal_variance;
        let sn2 = hyper.noise_variance;
        let ard = hyper.length_scales.len() > 1;

        // Inputs divided by their length scales, row-major.
        let scaled: Vec<f64> = self
            .rows
            .chunks_exact(d)
            .flat_map(|r| r.iter().enumerate().map(|(j, v)| v / hyper.length_scale(j)))
            .collect();
        let row = |i: usize| &scaled[i * d..(i + 1) * d];

        // K_f and e^{-sqrt3 r} (the latter feeds the length-scale gradient).
        let mut k = faer::Mat::<f64>::zeros(n, n);
        let mut decay = vec![0.0; n * n];
        for j in 0..n {
            k[(j, j)] = sf2;
            decay[j * n + j] = 1.0;
            let rj = row(j);
            for i in j + 1..n {
                let r2: f64 = row(i).iter().zip(rj).map(|(a, b)| (a - b) * (a - b)).sum();
                let s = SQRT3 * r2.sqrt();
                let e = (-s).exp();
                let v = sf2 * (1.0 + s) * e;
                k[(i, j)] = v;
                k[(j, i)] = v;
                decay[j * n + i] = e;
            }
        }

        let factor = Factor::new(&k, sn2, sf2, &self.ladder)?;
        let alpha = factor.solve(&self.y);
        let fit: f64 = self.y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let value = -0.5 * fit - 0.5 * factor.log_det() - 0.5 * n as f64 * (2.0 * PI).ln();

        // W = alpha alpha^T - K_y^{-1}; gradient_j = 1/2 tr(W dK_y/dtheta_j).
        let kinv = factor.inverse();
        let w = |i: usize, j: usize| alpha[i] * alpha[j] - kinv[(i, j)];
        let trace_w: f64 = (0..n).map(|i| w(i, i)).sum();

        let mut w_dot_kf = 0.0;
        let mut per_dim = vec![0.0; d];
        for j in 0..n {
            w_dot_kf += w(j, j) * sf2;
            let rj = row(j);
            for i in j + 1..n {
                let wij = w(i, j);
                w_dot_kf += 2.0 * wij * k[(i, j)];
                let m = wij * decay[j * n + i];
                for ((g, a), b) in per_dim.iter_mut().zip(row(i)).zip(rj) {
                    let t = a - b;
                    *g += m * t * t;
                }
            }
        }

        let m = hyper.length_scales.len();
        let mut gradient = Vec::with_capacity(m + 2);
        // dK_y/d ln sf2 = K_f + jitter I (the jitter scales with sf2)
        gradient.push(0.5 * (w_dot_kf + factor.jitter * trace_w));
        // dk/d ln l_j = 3 sf2 e^{-sqrt3 r} (dx_j / l_j)^2; pairs counted twice
        let scale = 3.0 * sf2;
        if ard {
            gradient.extend(per_dim.iter().map(|g| scale * g));
        } else {
            gradient.push(scale * per_dim.iter().sum::<f64>());
        }
        gradient.push(0.5 * sn2 * trace_w);

        if !value.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::IllConditioned("non-finite log likelihood".into()));
        }
        Ok(LogLikelihood { value, gradient })
    }
}

/// Log marginal likelihood of `y` under the GP prior with `hyper`, and its
/// gradient with respect to the log hyperparameters.
pub fn log_marginal_likelihood(
    x: MatRef<'_, f64>,
    y: &[f64],
    hyper: &Hyperparameters,
) -> Result<LogLikelihood> {
    Objective::new(x, y, &super::DEFAULT_JITTER_LADDER)?.evaluate(hyper)
}
