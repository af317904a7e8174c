//! Exact Gaussian process regression with a Matérn-3/2 ARD covariance.

mod chol;
mod likelihood;
mod model;
mod optimize;
mod standardize;

pub use chol::DEFAULT_JITTER_LADDER;
pub use likelihood::{log_marginal_likelihood, LogLikelihood};
pub use model::{fit, FitTrace, GprConfig, Prediction, TrainedModel, Z95};
pub use optimize::{maximize, AscentOptions, AscentResult};
pub use standardize::Standardizer;


#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{gram, matern32_ard, Hyperparameters};
    use faer::Mat;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Gauss-Jordan inverse with partial pivoting.
    fn dense_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = r.clone();
                row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                row
            })
            .collect();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
                .unwrap();
            m.swap(c, p);
            let piv = m[c][c];
            m[c].iter_mut().for_each(|v| *v /= piv);
            for r in 0..n {
                if r != c {
                    let f = m[r][c];
                    let src = m[c].clone();
                    m[r].iter_mut().zip(&src).for_each(|(v, s)| *v -= f * s);
                }
            }
        }
        m.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    fn row(x: &Mat<f64>, i: usize) -> Vec<f64> {
        (0..x.ncols()).map(|j| x[(i, j)]).collect()
    }

    /// Posterior mean and latent variance by explicit inversion.
    fn oracle(x: &Mat<f64>, y: &[f64], h: &Hyperparameters, xs: &[f64]) -> (f64, f64) {
        let n = y.len();
        let ky: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let k = matern32_ard(&row(x, i), &row(x, j), h).unwrap();
                        if i == j {
                            k + h.noise_variance
                        } else {
                            k
                        }
                    })
                    .collect()
            })
            .collect();
        let inv = dense_inverse(&ky);
        let ks: Vec<f64> = (0..n).map(|i| matern32_ard(&row(x, i), xs, h).unwrap()).collect();
        let mean: f64 = (0..n)
            .map(|i| ks[i] * (0..n).map(|j| inv[i][j] * y[j]).sum::<f64>())
            .sum();
        let q: f64 = (0..n)
            .map(|i| ks[i] * (0..n).map(|j| inv[i][j] * ks[j]).sum::<f64>())
            .sum();
        (mean, h.signal_variance - q)
    }

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Mat<f64>, Vec<f64>, Hyperparameters) {
        let x = Mat::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
        let y = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let h = Hyperparameters::ard(
            rng.random_range(0.5..2.0),
            (0..d).map(|_| rng.random_range(0.5..3.0)).collect(),
            rng.random_range(0.01..0.5),
        );
        (x, y, h)
    }

    #[test]
    fn three_point_matches_dense_inverse() {
        let x = Mat::from_fn(3, 1, |i, _| i as f64);
        let y = [0.0, 1.0, 0.0];
        let h = Hyperparameters::isotropic(1.0, 1.0, 0.01);
        let m = TrainedModel::condition(x.as_ref(), &y, h.clone()).unwrap();
        let p = m.predict(&[0.5]).unwrap();
        let (mean, var) = oracle(&x, &y, &h, &[0.5]);
        assert!((p.mean - mean).abs() < 1e-8, "{} vs {mean}", p.mean);
        assert!((p.variance - var).abs() < 1e-8, "{} vs {var}", p.variance);
        assert!((p.predictive_variance - var - 0.01).abs() < 1e-8);
    }

    #[test]
    fn random_instances_match_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.random_range(2..=30);
            let d = rng.random_range(1..=6);
            let (x, y, h) = random_problem(&mut rng, n, d);
            let m = TrainedModel::condition(x.as_ref(), &y, h.clone()).unwrap();
            let xs: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = m.predict(&xs).unwrap();
            let (mean, var) = oracle(&x, &y, &h, &xs);
            assert!((p.mean - mean).abs() <= 1e-8 * mean.abs().max(1.0));
            assert!((p.variance - var).abs() <= 1e-8 * var.abs().max(1.0));
        }
    }

    #[test]
    fn cholesky_and_alpha_reconstruct_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (x, y, h) = random_problem(&mut rng, 25, 3);
        let m = TrainedModel::condition(x.as_ref(), &y, h.clone()).unwrap();
        let k = gram(x.as_ref(), x.as_ref(), &h).unwrap();
        let l = m.cholesky_factor();
        let bump = h.noise_variance + m.jitter();
        for i in 0..25 {
            for j in 0..25 {
                let llt: f64 = (0..25).map(|t| l[(i, t)] * l[(j, t)]).sum();
                let want = k[(i, j)] + if i == j { bump } else { 0.0 };
                assert!((llt - want).abs() <= 1e-8 * want.abs().max(1.0));
            }
            let r: f64 = (0..25).map(|j| k[(i, j)] * m.alpha()[j]).sum::<f64>()
                + bump * m.alpha()[i]
                - y[i];
            assert!(r.abs() <= 1e-8 * y[i].abs().max(1.0));
        }
    }

    #[test]
    fn jitter_only_when_factorization_needs_it() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (mut x, y, h) = random_problem(&mut rng, 20, 2);
        assert_eq!(TrainedModel::condition(x.as_ref(), &y, h.clone()).unwrap().jitter(), 0.0);
        for j in 0..2 {
            x[(19, j)] = x[(0, j)];
        }
        let h = Hyperparameters { noise_variance: 1e-20, ..h };
        let m = TrainedModel::condition(x.as_ref(), &y, h.clone()).unwrap();
        assert!(m.jitter() > 0.0 && m.jitter() <= 1e-6 * h.signal_variance);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (x, y, h) = random_problem(&mut rng, 20, 3);
        let ll = log_marginal_likelihood(x.as_ref(), &y, &h).unwrap();
        let theta = likelihood::to_log_params(&h);
        let step = 1e-5;
        for (j, g) in ll.gradient.iter().enumerate() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += step;
            tm[j] -= step;
            let fp = log_marginal_likelihood(x.as_ref(), &y, &likelihood::from_log_params(&tp)).unwrap();
            let fm = log_marginal_likelihood(x.as_ref(), &y, &likelihood::from_log_params(&tm)).unwrap();
            let fd = (fp.value - fm.value) / (2.0 * step);
            assert!((g - fd).abs() <= 1e-4 * fd.abs().max(1e-2), "component {j}: {g} vs {fd}");
        }
    }

    #[test]
    fn isotropic_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (x, y, _) = random_problem(&mut rng, 15, 2);
        let h = Hyperparameters::isotropic(1.3, 0.8, 0.05);
        let ll = log_marginal_likelihood(x.as_ref(), &y, &h).unwrap();
        assert_eq!(ll.gradient.len(), 3);
        let theta = likelihood::to_log_params(&h);
        for (j, g) in ll.gradient.iter().enumerate() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += 1e-5;
            tm[j] -= 1e-5;
            let f = |t: &[f64]| {
                log_marginal_likelihood(x.as_ref(), &y, &likelihood::from_log_params(t))
                    .unwrap()
                    .value
            };
            let fd = (f(&tp) - f(&tm)) / 2e-5;
            assert!((g - fd).abs() <= 1e-4 * fd.abs().max(1e-2));
        }
    }

    #[test]
    fn noiseless_interpolation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (x, y, h) = random_problem(&mut rng, 12, 2);
        let h = Hyperparameters { noise_variance: 1e-12, ..h };
        let m = TrainedModel::condition(x.as_ref(), &y, h.clone()).unwrap();
        for (i, yi) in y.iter().enumerate() {
            let p = m.predict(&row(&x, i)).unwrap();
            assert!((p.mean - yi).abs() < 1e-6);
            assert!(p.variance <= 1e-6 * h.signal_variance);
        }
        let batch = m.predict_batch(x.as_ref()).unwrap();
        for (p, yi) in batch.iter().zip(&y) {
            assert!((p.mean - yi).abs() < 1e-6);
        }
    }

    #[test]
    fn prior_reversion_far_from_data() {
        let x = Mat::from_fn(5, 2, |i, j| (i + j) as f64 * 0.3);
        let y = [0.3, -1.0, 0.5, 2.0, -0.2];
        let h = Hyperparameters::ard(1.7, vec![0.5, 2.0], 0.1);
        let m = TrainedModel::condition(x.as_ref(), &y, h).unwrap();
        let p = m.predict(&[200.0, 200.0]).unwrap();
        assert!(p.mean.abs() < 1e-6);
        assert!((p.variance - 1.7).abs() < 1e-6);
    }

    #[test]
    fn batch_equals_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (x, y, h) = random_problem(&mut rng, 40, 5);
        let m = TrainedModel::condition(x.as_ref(), &y, h).unwrap();
        let xs = Mat::from_fn(30, 5, |_, _| rng.random_range(-3.0..3.0));
        let batch = m.predict_batch(xs.as_ref()).unwrap();
        for (i, b) in batch.iter().enumerate() {
            let p = m.predict(&row(&xs, i)).unwrap();
            assert!((p.mean - b.mean).abs() <= 1e-12 * p.mean.abs().max(1.0));
            assert!((p.variance - b.variance).abs() <= 1e-12 * p.variance.abs().max(1.0));
        }
        let one = m.predict_batch(xs.as_ref().subrows(0, 1)).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one[0].mean - batch[0].mean).abs() < 1e-14);
    }

    #[test]
    fn full_size_batch_equals_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (x, y, h) = random_problem(&mut rng, 912, 42);
        let m = TrainedModel::condition(x.as_ref(), &y, h).unwrap();
        let batch = m.predict_batch(x.as_ref()).unwrap();
        for (i, b) in batch.iter().enumerate() {
            let p = m.predict(&row(&x, i)).unwrap();
            assert!((p.mean - b.mean).abs() <= 1e-12 * p.mean.abs().max(1.0));
            assert!((p.variance - b.variance).abs() <= 1e-12 * p.variance.abs().max(1.0));
        }
    }

    #[test]
    fn recovers_prior_length_scale() {
        // Draw noiseless data from the prior through the Gram Cholesky.
        let n = 60;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        xs.sort_by(f64::total_cmp);
        let x = Mat::from_fn(n, 1, |i, _| xs[i]);
        let truth = Hyperparameters::isotropic(1.0, 1.0, 1e-8);
        let mut k = gram(x.as_ref(), x.as_ref(), &truth).unwrap();
        for i in 0..n {
            k[(i, i)] += 1e-8;
        }
        let l = k.llt(faer::Side::Lower).unwrap();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let lf = l.L();
        let y: Vec<f64> = (0..n).map(|i| (0..=i).map(|j| lf[(i, j)] * z[j]).sum()).collect();

        let model = fit(x.as_ref(), &y, &GprConfig::default()).unwrap();
        // Length scale back in raw input units.
        let l_raw = model.hyperparameters().length_scales[0] * model.standardizer().input_std[0];
        assert!((0.5..=2.0).contains(&l_raw), "recovered l = {l_raw}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn variance_within_prior_bounds(seed in any::<u64>(), n in 2usize..30, d in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, y, h) = random_problem(&mut rng, n, d);
            let m = TrainedModel::condition(x.as_ref(), &y, h.clone()).unwrap();
            for _ in 0..5 {
                let xs: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
                let p = m.predict(&xs).unwrap();
                prop_assert!(p.variance >= 0.0);
                prop_assert!(p.variance <= h.signal_variance * (1.0 + 1e-12));
            }
        }

        #[test]
        fn extra_point_never_adds_variance(seed in any::<u64>(), n in 2usize..30, d in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, y, h) = random_problem(&mut rng, n, d);
            let small = TrainedModel::condition(x.as_ref().subrows(0, n - 1), &y[..n - 1], h.clone()).unwrap();
            let big = TrainedModel::condition(x.as_ref(), &y, h.clone()).unwrap();
            for _ in 0..5 {
                let xs: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
                let a = small.predict(&xs).unwrap().variance;
                let b = big.predict(&xs).unwrap().variance;
                let (_, oa) = oracle(&x.as_ref().subrows(0, n - 1).to_owned(), &y[..n - 1], &h, &xs);
                prop_assert!((a - oa).abs() <= 1e-8 * oa.abs().max(1.0));
                prop_assert!(b <= a + 1e-10);
            }
        }
    }
}
