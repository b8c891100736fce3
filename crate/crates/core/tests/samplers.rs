use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use hidden_causes::harness::synthetic::{generate_dataset, rejection_sample_z};
use hidden_causes::hyper::{mh_step_alpha_finite, mh_step_rate, Rate};
use hidden_causes::rjmcmc::{FiniteState, KPrior, RjmcmcOptions};
use hidden_causes::{BinaryMatrix, ModelParams, SamplerState};

const GRID: usize = 4000;

fn direct_log_likelihood(x: &BinaryMatrix, z: &BinaryMatrix, y: &BinaryMatrix, lambda: f64, epsilon: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..x.rows() {
        for t in 0..x.cols() {
            let mut off = 1.0 - epsilon;
            for k in 0..z.cols() {
                if z.get(i, k) && y.get(k, t) {
                    off *= 1.0 - lambda;
                }
            }
            total += if x.get(i, t) { (1.0 - off).ln() } else { off.ln() };
        }
    }
    total
}

/// Mean and sd of a density on (lo, hi) given by its log on a midpoint grid.
fn grid_moments(lo: f64, hi: f64, log_density: impl Fn(f64) -> f64) -> (f64, f64) {
    let h = (hi - lo) / GRID as f64;
    let points: Vec<f64> = (0..GRID).map(|j| lo + (j as f64 + 0.5) * h).collect();
    let logs: Vec<f64> = points.iter().map(|&v| log_density(v)).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let mean = points.iter().zip(&w).map(|(v, w)| v * w).sum::<f64>() / total;
    let var = points.iter().zip(&w).map(|(v, w)| (v - mean).powi(2) * w).sum::<f64>() / total;
    (mean, var.sqrt())
}

fn fixture() -> (BinaryMatrix, SamplerState) {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let z = BinaryMatrix::from_rows(&[[1u8, 0], [0, 1], [1, 1], [1, 0]]).unwrap();
    let truth = ModelParams::new(0.08, 0.85, 0.4, 1.0).unwrap();
    let data = generate_dataset(&z, 40, &truth, &mut rng).unwrap();
    let y = data.truth.unwrap().y;
    let start = ModelParams::new(0.3, 0.5, 0.4, 1.0).unwrap();
    let state = SamplerState::new(z, y, 40, start).unwrap();
    (data.x, state)
}

fn mh_moments(rate: Rate, step: f64, x: &BinaryMatrix, state: &mut SamplerState, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..2_000 {
        mh_step_rate(rate, state, x, &mut rng, step).unwrap();
    }
    let draws: Vec<f64> = (0..200_000)
        .map(|_| mh_step_rate(rate, state, x, &mut rng, step).unwrap().value)
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws.len() as f64;
    (mean, var.sqrt())
}

#[test]
fn lambda_metropolis_matches_grid_posterior() {
    let (x, mut state) = fixture();
    let (z, y, eps) = (state.z().clone(), state.y().clone(), state.params.epsilon);
    let (mean, sd) = grid_moments(0.0, 1.0, |l| direct_log_likelihood(&x, &z, &y, l, eps));
    let (m, s) = mh_moments(Rate::Lambda, 0.05, &x, &mut state, 1);
    assert!((m - mean).abs() < 0.1 * sd, "mean {m} vs {mean} (sd {sd})");
    assert!((s - sd).abs() < 0.1 * sd, "sd {s} vs {sd}");
}

#[test]
fn epsilon_metropolis_matches_grid_posterior() {
    let (x, mut state) = fixture();
    let (z, y, lambda) = (state.z().clone(), state.y().clone(), state.params.lambda);
    let (mean, sd) = grid_moments(0.0, 1.0, |e| direct_log_likelihood(&x, &z, &y, lambda, e));
    let (m, s) = mh_moments(Rate::Epsilon, 0.01, &x, &mut state, 2);
    assert!((m - mean).abs() < 0.1 * sd, "mean {m} vs {mean} (sd {sd})");
    assert!((s - sd).abs() < 0.1 * sd, "sd {s} vs {sd}");
}

fn finite_log_prior(z: &BinaryMatrix, k: usize, alpha: f64) -> f64 {
    let a = alpha / k as f64;
    let n = z.rows() as f64;
    z.col_sums()
        .iter()
        .map(|&m| a.ln() + ln_gamma(m as f64 + a) + ln_gamma(n - m as f64 + 1.0) - ln_gamma(n + 1.0 + a))
        .sum()
}

fn shifted_poisson_ln(k: usize, mean: f64) -> f64 {
    let j = (k - 1) as f64;
    j * mean.ln() - mean - ln_gamma(j + 1.0)
}

#[test]
fn finite_alpha_metropolis_matches_grid_posterior() {
    let z = BinaryMatrix::from_rows(&[[1u8, 0, 0], [1, 1, 0], [0, 1, 0]]).unwrap();
    let (n, k) = z.shape();
    let h_n: f64 = (1..=n).map(|j| 1.0 / j as f64).sum();
    let (mean, sd) = grid_moments(0.0, 30.0, |a| -a + finite_log_prior(&z, k, a) + shifted_poisson_ln(k, a * h_n));

    let y = BinaryMatrix::zeros(k, 2);
    let params = ModelParams::new(0.1, 0.8, 0.5, 1.0).unwrap();
    let options = RjmcmcOptions {
        k_prior: KPrior::ShiftedPoisson,
        ..RjmcmcOptions::default()
    };
    let mut fs = FiniteState::new(SamplerState::new(z, y, 2, params).unwrap(), options).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws: Vec<f64> = (0..300_000)
        .map(|_| mh_step_alpha_finite(&mut fs, &mut rng, 0.5).unwrap().value)
        .skip(1_000)
        .collect();
    let m = draws.iter().sum::<f64>() / draws.len() as f64;
    assert!((m - mean).abs() < 0.05 * sd, "mean {m} vs {mean} (sd {sd})");
}

#[test]
fn rejection_sampler_single_column_classes_are_uniform() {
    // With two rows and one column the IBP gives [1,1], [1,0] and [0,1] equal mass.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let draws = 30_000;
    let mut counts = [0usize; 3];
    for _ in 0..draws {
        let z = rejection_sample_z(2, 1, 1.3, &mut rng, 10_000).unwrap();
        assert_eq!(z.shape(), (2, 1));
        match (z.get(0, 0), z.get(1, 0)) {
            (true, true) => counts[0] += 1,
            (true, false) => counts[1] += 1,
            (false, true) => counts[2] += 1,
            (false, false) => panic!("empty column"),
        }
    }
    let expect = draws as f64 / 3.0;
    let sd = (draws as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for c in counts {
        assert!((c as f64 - expect).abs() < 4.0 * sd, "{counts:?}");
    }
}

#[test]
fn rejection_sampler_reports_exhaustion() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert!(rejection_sample_z(3, 40, 0.1, &mut rng, 50).is_err());
}
