//! Box-constrained gradient ascent with limited-memory quasi-Newton directions
//! and a backtracking (Armijo) line search.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AscentOptions {
    pub max_iter: usize,
    /// Stop once the projected gradient's largest component falls below this.
    pub grad_tol: f64,
    /// Stop once an accepted step improves the objective by less than this (relative).
    pub value_tol: f64,
    /// Number of curvature pairs kept for the direction update.
    pub memory: usize,
    /// Largest coordinate move of a single trial step.
    pub max_step: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions {
            max_iter: 200,
            grad_tol: 1e-5,
            value_tol: 1e-10,
            memory: 10,
            max_step: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Zero the components that would push an active bound outward.
fn project(dir: &mut [f64], x: &[f64], bounds: &[(f64, f64)]) {
    for ((d, &xi), &(lo, hi)) in dir.iter_mut().zip(x).zip(bounds) {
        if (xi <= lo && *d < 0.0) || (xi >= hi && *d > 0.0) {
            *d = 0.0;
        }
    }
}

/// Maximizes `f` starting from `x0` inside the box `bounds`.
///
/// `f` returns the value and gradient; an `Err` from `f` during a line
/// search is treated as an infeasible trial point and the step is shortened.
pub fn maximize<F>(mut f: F, x0: &[f64], bounds: &[(f64, f64)], opts: &AscentOptions) -> Result<AscentResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    assert_eq!(x0.len(), bounds.len());
    let clamp = |x: &mut Vec<f64>| {
        for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
            *v = v.clamp(lo, hi);
        }
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let (mut fx, mut g) = f(&x)?;
    let mut evaluations = 1;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Optimization("non-finite objective at the starting point".into()));
    }

    let mut history: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        let mut pg = g.clone();
        project(&mut pg, &x, bounds);
        if pg.iter().fold(0.0f64, |m, v| m.max(v.abs())) < opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;

        // Two-loop recursion on the negated objective; yields an ascent direction.
        let mut dir = g.clone();
        let mut coeffs = Vec::with_capacity(history.len());
        for (s, y) in history.iter().rev() {
            let rho = 1.0 / dot(y, s);
            let a = rho * dot(s, &dir);
            for (d, yi) in dir.iter_mut().zip(y) {
                *d -= a * yi;
            }
            coeffs.push((rho, a));
        }
        if let Some((s, y)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for ((s, y), (rho, a)) in history.iter().zip(coeffs.into_iter().rev()) {
            let b = rho * dot(y, &dir);
            for (d, si) in dir.iter_mut().zip(s) {
                *d += (a - b) * si;
            }
        }
        project(&mut dir, &x, bounds);
        if !(dot(&dir, &g) > 0.0) {
            history.clear();
            dir = pg.clone();
        }

        let longest = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut t = if history.is_empty() {
            (1.0f64).min(opts.max_step / longest).min(1.0 / longest.max(1e-12))
        } else {
            (1.0f64).min(opts.max_step / longest)
        };

        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            clamp(&mut xn);
            let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let predicted = dot(&g, &step);
            if predicted <= 0.0 {
                t *= 0.5;
                continue;
            }
            evaluations += 1;
            match f(&xn) {
                Ok((fn_, gn)) if fn_.is_finite() && gn.iter().all(|v| v.is_finite()) => {
                    if fn_ >= fx + 1e-4 * predicted {
                        accepted = Some((xn, fn_, gn, step));
                        break;
                    }
                }
                Ok(_) | Err(Error::IllConditioned(_)) => {}
                Err(e) => return Err(e),
            }
            t *= 0.5;
        }

        let Some((xn, fn_, gn, step)) = accepted else {
            if history.is_empty() {
                // Even a short gradient step fails: at a (numerical) maximum.
                converged = true;
                break;
            }
            history.clear();
            continue;
        };

        // Curvature pair for the minimization of -f.
        let yv: Vec<f64> = g.iter().zip(&gn).map(|(a, b)| a - b).collect();
        if dot(&step, &yv) > 1e-12 * dot(&yv, &yv).sqrt() * dot(&step, &step).sqrt() {
            history.push_back((step, yv));
            if history.len() > opts.memory {
                history.pop_front();
            }
        }
        let improvement = fn_ - fx;
        x = xn;
        fx = fn_;
        g = gn;
        if improvement < opts.value_tol * fx.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    Ok(AscentResult {
        x,
        value: fx,
        iterations,
        evaluations,
        converged,
    })
}
