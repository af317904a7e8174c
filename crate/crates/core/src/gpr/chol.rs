use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, MatRef, Par, Side};

use crate::error::{Error, Result};

/// Diagonal jitter steps, as multiples of the signal variance.
pub const DEFAULT_JITTER_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Cholesky factor of `K + (noise + jitter) I`.
#[derive(Debug, Clone)]
pub(crate) struct Factor {
    pub llt: faer::linalg::solvers::Llt<f64>,
    /// Absolute jitter that was added to the diagonal.
    pub jitter: f64,
}

impl Factor {
    /// Factors `k + diag_add * I`. Jitter is only added when the plain
    /// factorization fails, escalating through `ladder * scale`. `k` is left
    /// untouched.
    pub fn new(k: &Mat<f64>, diag_add: f64, scale: f64, ladder: &[f64]) -> Result<Factor> {
        let mut ky = k.clone();
        let mut last_jitter = 0.0;
        for &step in std::iter::once(&0.0).chain(ladder) {
            let jitter = step * scale;
            let bump = diag_add + jitter;
            for i in 0..ky.nrows() {
                ky[(i, i)] = k[(i, i)] + bump;
            }
            last_jitter = jitter;
            if let Ok(llt) = ky.llt(Side::Lower) {
                let ok = (0..ky.nrows()).all(|i| {
                    let v = llt.L()[(i, i)];
                    v.is_finite() && v > 0.0
                });
                if ok {
                    return Ok(Factor { llt, jitter });
                }
            }
        }
        Err(Error::IllConditioned(format!(
            "Cholesky failed for {}x{} matrix after jitter {last_jitter:e}",
            k.nrows(),
            k.ncols()
        )))
    }

    pub fn l(&self) -> MatRef<'_, f64> {
        self.llt.L()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// `L^{-1} b` for a single vector.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        solve_lower_triangular_in_place(self.l(), rhs.as_mut(), Par::Seq);
        (0..b.len()).map(|i| rhs[(i, 0)]).collect()
    }

    /// `L^{-1} B` for a block of right-hand sides.
    pub fn forward_mat(&self, mut b: Mat<f64>) -> Mat<f64> {
        solve_lower_triangular_in_place(self.l(), b.as_mut(), Par::Seq);
        b
    }

    pub fn log_det(&self) -> f64 {
        let l = self.l();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> Mat<f64> {
        self.llt.inverse()
    }
}
