//! Hyperparameter updates: conjugate draws for p and α, random-walk
//! Metropolis for λ and ε.
//!
//! Priors are Beta(1, 1) on λ, ε, p and Gamma(1, 1) on α. The α draw uses
//! only the α-dependent factors of the lof probability, α^{K₊} e^{−α H_N};
//! the remaining factors do not involve α, so
//! α | Z ~ Gamma(1 + K₊, rate 1 + H_N) exactly.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ibp::harmonic;
use crate::matrix::BinaryMatrix;
use crate::model::{self, noisy_or_off, xlogy, ModelParams};
use crate::rjmcmc::FiniteState;
use crate::state::SamplerState;

/// Beta(1 + S, 1 + K T − S) parameters, S = number of ones in Y.
pub fn p_posterior(y: &BinaryMatrix) -> (f64, f64) {
    let ones = y.count_ones() as f64;
    let total = (y.rows() * y.cols()) as f64;
    (1.0 + ones, 1.0 + total - ones)
}

pub fn sample_p<R: Rng + ?Sized>(y: &BinaryMatrix, rng: &mut R) -> f64 {
    let (a, b) = p_posterior(y);
    Beta::new(a, b).expect("shape parameters are >= 1").sample(rng)
}

/// (shape, rate) of the α posterior.
pub fn alpha_posterior(k_plus: usize, n: usize) -> (f64, f64) {
    (1.0 + k_plus as f64, 1.0 + harmonic(n))
}

pub fn sample_alpha<R: Rng + ?Sized>(k_plus: usize, n: usize, rng: &mut R) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("alpha update needs N >= 1".into()));
    }
    let (shape, rate) = alpha_posterior(k_plus, n);
    let draw = Gamma::new(shape, 1.0 / rate)
        .expect("shape and scale are positive")
        .sample(rng);
    // A Gamma draw can round to exactly 0 only for absurdly small shapes; keep α > 0.
    Ok(draw.max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rate {
    Lambda,
    Epsilon,
}

impl Rate {
    fn get(self, p: &ModelParams) -> f64 {
        match self {
            Rate::Lambda => p.lambda,
            Rate::Epsilon => p.epsilon,
        }
    }

    fn with(self, p: &ModelParams, v: f64) -> ModelParams {
        let mut out = *p;
        match self {
            Rate::Lambda => out.lambda = v,
            Rate::Epsilon => out.epsilon = v,
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhOutcome {
    pub proposal: f64,
    pub value: f64,
    pub accepted: bool,
}

/// Counts of (active-parent count, x) pairs; the likelihood depends on the
/// state only through these.
#[derive(Debug, Clone, Default)]
pub struct ActivityHistogram {
    on: Vec<f64>,
    off: Vec<f64>,
}

impl ActivityHistogram {
    pub fn from_state(state: &SamplerState, x: &BinaryMatrix) -> Result<Self> {
        state.check_data(x)?;
        let mut h = Self::default();
        for i in 0..state.n() {
            for t in 0..state.trials() {
                let a = state.active_count(i, t) as usize;
                if a >= h.on.len() {
                    h.on.resize(a + 1, 0.0);
                    h.off.resize(a + 1, 0.0);
                }
                if x.get(i, t) {
                    h.on[a] += 1.0;
                } else {
                    h.off[a] += 1.0;
                }
            }
        }
        Ok(h)
    }

    pub fn log_likelihood(&self, params: &ModelParams) -> f64 {
        let mut total = 0.0;
        for (a, (&on, &off)) in self.on.iter().zip(&self.off).enumerate() {
            let q = noisy_or_off(a as u32, params);
            total += xlogy(on, 1.0 - q) + xlogy(off, q);
        }
        total
    }
}

/// Random-walk Metropolis step on λ or ε with a uniform proposal of half-width
/// `step`. Proposals outside (0, 1) are rejected; the flat prior and the
/// symmetric proposal cancel, leaving the likelihood ratio.
pub fn mh_step_rate<R: Rng + ?Sized>(
    rate: Rate,
    state: &mut SamplerState,
    x: &BinaryMatrix,
    rng: &mut R,
    step: f64,
) -> Result<MhOutcome> {
    let hist = ActivityHistogram::from_state(state, x)?;
    mh_step_rate_with(rate, state, &hist, rng, step)
}

pub(crate) fn mh_step_rate_with<R: Rng + ?Sized>(
    rate: Rate,
    state: &mut SamplerState,
    hist: &ActivityHistogram,
    rng: &mut R,
    step: f64,
) -> Result<MhOutcome> {
    let current = rate.get(&state.params);
    if !(0.0..=1.0).contains(&current) {
        return Err(Error::InvalidParameter(format!("{rate:?} = {current} not in [0, 1]")));
    }
    let proposal = current + rng.random_range(-step..=step);
    let rejected = MhOutcome {
        proposal,
        value: current,
        accepted: false,
    };
    if !(proposal > 0.0 && proposal < 1.0) {
        return Ok(rejected);
    }
    let ll_new = hist.log_likelihood(&rate.with(&state.params, proposal));
    let ll_old = hist.log_likelihood(&state.params);
    let u: f64 = rng.random();
    if accept(ll_new - ll_old, ll_new, ll_old, u) {
        state.params = rate.with(&state.params, proposal);
        Ok(MhOutcome {
            proposal,
            value: proposal,
            accepted: true,
        })
    } else {
        Ok(rejected)
    }
}

fn accept(log_ratio: f64, new: f64, old: f64, u: f64) -> bool {
    if new == f64::NEG_INFINITY {
        false
    } else if old == f64::NEG_INFINITY {
        true
    } else {
        u.ln() < log_ratio
    }
}

/// Random-walk Metropolis step on α for the finite model, targeting
/// Gamma(1, 1) × P(Z | K, α) × P(K | α).
pub fn mh_step_alpha_finite<R: Rng + ?Sized>(fs: &mut FiniteState, rng: &mut R, step: f64) -> Result<MhOutcome> {
    let current = fs.state.params.alpha;
    let proposal = current + rng.random_range(-step..=step);
    let rejected = MhOutcome {
        proposal,
        value: current,
        accepted: false,
    };
    if !(proposal > 0.0) {
        return Ok(rejected);
    }
    let target = |alpha: f64| -> Result<f64> {
        let k = fs.k();
        let n = fs.state.n();
        Ok(-alpha
            + model::log_prior_z_finite(fs.state.z(), k, alpha)?
            + fs.options.k_prior.ln_pmf(k, alpha, n))
    };
    let new = target(proposal)?;
    let old = target(current)?;
    let u: f64 = rng.random();
    if accept(new - old, new, old, u) {
        fs.state.params.alpha = proposal;
        Ok(MhOutcome {
            proposal,
            value: proposal,
            accepted: true,
        })
    } else {
        Ok(rejected)
    }
}

/// Step sizes of the Metropolis updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperSteps {
    pub lambda: f64,
    pub epsilon: f64,
    /// α step, only used by the finite sampler.
    pub alpha: f64,
}

impl Default for HyperSteps {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            epsilon: 0.01,
            alpha: 0.5,
        }
    }
}

/// Acceptance bookkeeping for the Metropolis updates of one sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HyperAccepts {
    pub lambda: bool,
    pub epsilon: bool,
    pub alpha: bool,
}

/// λ and ε by Metropolis, then p and α by Gibbs, for the infinite model.
pub fn update_infinite<R: Rng + ?Sized>(
    state: &mut SamplerState,
    x: &BinaryMatrix,
    steps: &HyperSteps,
    rng: &mut R,
) -> Result<HyperAccepts> {
    let hist = ActivityHistogram::from_state(state, x)?;
    let lambda = mh_step_rate_with(Rate::Lambda, state, &hist, rng, steps.lambda)?.accepted;
    let epsilon = mh_step_rate_with(Rate::Epsilon, state, &hist, rng, steps.epsilon)?.accepted;
    state.params.p = sample_p(state.y(), rng);
    state.params.alpha = sample_alpha(state.k_plus(), state.n(), rng)?;
    Ok(HyperAccepts {
        lambda,
        epsilon,
        alpha: true,
    })
}

/// Same schedule for the finite model, with α moved by Metropolis.
pub fn update_finite<R: Rng + ?Sized>(
    fs: &mut FiniteState,
    x: &BinaryMatrix,
    steps: &HyperSteps,
    rng: &mut R,
) -> Result<HyperAccepts> {
    let hist = ActivityHistogram::from_state(&fs.state, x)?;
    let lambda = mh_step_rate_with(Rate::Lambda, &mut fs.state, &hist, rng, steps.lambda)?.accepted;
    let epsilon = mh_step_rate_with(Rate::Epsilon, &mut fs.state, &hist, rng, steps.epsilon)?.accepted;
    fs.state.params.p = sample_p(fs.state.y(), rng);
    let alpha = mh_step_alpha_finite(fs, rng, steps.alpha)?.accepted;
    Ok(HyperAccepts {
        lambda,
        epsilon,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn posterior_parameters() {
        assert_eq!(p_posterior(&BinaryMatrix::zeros(0, 4)), (1.0, 1.0));
        assert_eq!(p_posterior(&BinaryMatrix::from_rows(&[[1u8, 1, 1, 1]]).unwrap()), (5.0, 1.0));
        assert_eq!(p_posterior(&BinaryMatrix::zeros(1, 4)), (1.0, 5.0));
        assert_eq!(alpha_posterior(0, 1), (1.0, 2.0));
        assert_eq!(alpha_posterior(3, 1), (4.0, 2.0));
    }

    #[test]
    fn alpha_draw_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let draws = 10_000;
        let (shape, rate) = alpha_posterior(2, 4);
        let mean = (0..draws).map(|_| sample_alpha(2, 4, &mut rng).unwrap()).sum::<f64>() / draws as f64;
        let se = (shape / (rate * rate) / draws as f64).sqrt();
        assert!((mean - shape / rate).abs() < 3.0 * se);
    }

    #[test]
    fn histogram_likelihood_matches_direct() {
        let z = BinaryMatrix::from_rows(&[[1u8, 1], [0, 1], [1, 0]]).unwrap();
        let y = BinaryMatrix::from_rows(&[[1u8, 0, 1, 1], [1, 1, 0, 0]]).unwrap();
        let x = BinaryMatrix::from_rows(&[[1u8, 1, 0, 1], [1, 0, 0, 1], [0, 0, 1, 1]]).unwrap();
        let params = ModelParams::new(0.07, 0.6, 0.2, 1.0).unwrap();
        let s = SamplerState::new(z.clone(), y.clone(), 4, params).unwrap();
        let h = ActivityHistogram::from_state(&s, &x).unwrap();
        let direct = model::log_likelihood(&x, &z, &y, &params).unwrap();
        assert!((h.log_likelihood(&params) - direct).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_proposals_are_rejected() {
        let x = BinaryMatrix::zeros(1, 3);
        let mut s = SamplerState::empty(1, 3, ModelParams::new(0.001, 0.5, 0.1, 1.0).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // Step 10 puts almost every proposal outside (0, 1).
        let mut outside = 0;
        for _ in 0..200 {
            let before = s.params.epsilon;
            let out = mh_step_rate(Rate::Epsilon, &mut s, &x, &mut rng, 10.0).unwrap();
            if !out.accepted {
                assert_eq!(s.params.epsilon, before);
                outside += 1;
            }
            assert!(s.params.epsilon > 0.0 && s.params.epsilon < 1.0);
        }
        assert!(outside > 150);
    }

    #[test]
    fn uphill_proposals_are_always_accepted() {
        // All-zero data with no causes: the likelihood (1 - ε)^{NT} strictly
        // prefers smaller ε, so every in-range downward move is accepted.
        let x = BinaryMatrix::zeros(2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut downhill = 0;
        for _ in 0..200 {
            let mut s = SamplerState::empty(2, 5, ModelParams::new(0.5, 0.5, 0.1, 1.0).unwrap()).unwrap();
            let out = mh_step_rate(Rate::Epsilon, &mut s, &x, &mut rng, 0.2).unwrap();
            if out.proposal < 0.5 {
                downhill += 1;
                assert!(out.accepted);
                assert_eq!(s.params.epsilon, out.proposal);
            }
        }
        assert!(downhill > 50);
    }
}
