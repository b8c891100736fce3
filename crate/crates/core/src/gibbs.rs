//! Collapsed Gibbs sampler for the infinite model.
//!
//! One sweep visits the rows of Z in order. For row i, every entry whose
//! column is used by another row is resampled with prior weight
//! m_{−i,k}/N; columns owned only by row i are zeroed, and the number of
//! fresh row-i-only causes is drawn from its conditional with the new Y
//! rows summed out. New causes get one Gibbs pass over their Y rows
//! straight away. After all rows, every y_{k,t} is resampled and empty
//! columns are dropped.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;
use crate::model::{ln_bernoulli_off, ln_observation, ModelParams};
use crate::sampling::{bernoulli, normalize_log_weights, sample_index, two_point_prob};
use crate::state::SamplerState;

/// Largest number of new causes considered for one row.
pub const MAX_NEW_CAUSES: usize = 10;

/// P(z_{i,k} = 1 | X, Z_{−(i,k)}, Y) with prior inclusion probability `prior_one`.
pub fn z_conditional(
    state: &SamplerState,
    x: &BinaryMatrix,
    i: usize,
    k: usize,
    prior_one: f64,
) -> Result<f64> {
    let current = state.z().get(i, k) as u32;
    let params = &state.params;
    let mut lw0 = (1.0 - prior_one).ln();
    let mut lw1 = prior_one.ln();
    let y = state.y();
    for (t, &a) in state.active_row(i).iter().enumerate() {
        if !y.get(k, t) {
            continue;
        }
        let others = a - current;
        let xi = x.get(i, t);
        lw0 += ln_observation(xi, others, params);
        lw1 += ln_observation(xi, others + 1, params);
    }
    two_point_prob(lw0, lw1)
}

/// Resamples z_{i,k} with prior weight θ̄ = m_{−i,k}/N. The column must be
/// used by some other row.
pub fn gibbs_sample_z_entry<R: Rng + ?Sized>(
    state: &mut SamplerState,
    x: &BinaryMatrix,
    i: usize,
    k: usize,
    rng: &mut R,
) -> Result<bool> {
    let m_minus = state.column_sums()[k] - state.z().get(i, k) as usize;
    if m_minus == 0 {
        return Err(Error::Precondition(format!(
            "column {k} has no entries outside row {i}"
        )));
    }
    let theta = m_minus as f64 / state.n() as f64;
    let p1 = z_conditional(state, x, i, k, theta)?;
    let value = bernoulli(p1, rng);
    state.set_z(i, k, value);
    Ok(value)
}

/// P(y_{k,t} = 1 | X, Z, Y_{−(k,t)}). Only rows linked to cause k contribute.
pub fn y_conditional(state: &SamplerState, x: &BinaryMatrix, k: usize, t: usize) -> Result<f64> {
    let params = &state.params;
    let current = state.y().get(k, t) as u32;
    let mut lw0 = (1.0 - params.p).ln();
    let mut lw1 = params.p.ln();
    let z = state.z();
    for i in 0..state.n() {
        if !z.get(i, k) {
            continue;
        }
        let others = state.active_count(i, t) - current;
        let xi = x.get(i, t);
        lw0 += ln_observation(xi, others, params);
        lw1 += ln_observation(xi, others + 1, params);
    }
    two_point_prob(lw0, lw1)
}

pub fn gibbs_sample_y_entry<R: Rng + ?Sized>(
    state: &mut SamplerState,
    x: &BinaryMatrix,
    k: usize,
    t: usize,
    rng: &mut R,
) -> Result<bool> {
    let p1 = y_conditional(state, x, k, t)?;
    let value = bernoulli(p1, rng);
    state.set_y(k, t, value);
    Ok(value)
}

/// P(x = 1) with `new` fresh causes whose activations are summed out:
/// 1 − (1 − ε) η (1 − λp)^new, where η = (1 − λ)^{existing active parents}.
#[inline]
pub fn marginal_on_prob(eta: f64, new: usize, params: &ModelParams) -> f64 {
    1.0 - marginal_off_prob(eta, new, params)
}

/// Complement of [`marginal_on_prob`].
#[inline]
pub fn marginal_off_prob(eta: f64, new: usize, params: &ModelParams) -> f64 {
    (1.0 - params.epsilon) * eta * (1.0 - params.lambda * params.p).powi(new as i32)
}

fn ln_poisson_pmf(j: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return if j == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    j as f64 * mean.ln() - mean - statrs::function::factorial::ln_factorial(j as u64)
}

/// Normalized conditional of K_i^new over 0..=MAX_NEW_CAUSES, with prior
/// Poisson(α/N) and the new latent rows summed out.
///
/// Row i must not own any column (every z_{i,k} = 1 has m_{−i,k} > 0).
pub fn new_cause_distribution(state: &SamplerState, x: &BinaryMatrix, i: usize) -> Result<Vec<f64>> {
    let sums = state.column_sums();
    for k in 0..state.k() {
        if state.z().get(i, k) && sums[k] == 1 {
            return Err(Error::Precondition(format!(
                "row {i} still owns singleton column {k}"
            )));
        }
    }
    let params = &state.params;
    let mean = params.alpha / state.n() as f64;
    let decay = 1.0 - params.lambda;
    let log_weights: Vec<f64> = (0..=MAX_NEW_CAUSES)
        .map(|j| {
            let mut lw = ln_poisson_pmf(j, mean);
            for (t, &a) in state.active_row(i).iter().enumerate() {
                if lw == f64::NEG_INFINITY {
                    break;
                }
                let eta = decay.powi(a as i32);
                lw += ln_bernoulli_off(x.get(i, t), marginal_off_prob(eta, j, params));
            }
            lw
        })
        .collect();
    normalize_log_weights(&log_weights)
}

/// Draws K_i^new, appends that many causes linked only to row i and gives
/// their Y rows one Gibbs pass starting from a prior draw.
pub fn sample_new_causes<R: Rng + ?Sized>(
    state: &mut SamplerState,
    x: &BinaryMatrix,
    i: usize,
    rng: &mut R,
) -> Result<usize> {
    let probs = new_cause_distribution(state, x, i)?;
    let count = sample_index(&probs, rng);
    let first = state.k();
    let trials = state.trials();
    for _ in 0..count {
        let row: Vec<u8> = (0..trials).map(|_| bernoulli(state.params.p, rng) as u8).collect();
        state.push_cause(&row)?;
        let k = state.k() - 1;
        state.set_z(i, k, true);
    }
    for k in first..first + count {
        for t in 0..trials {
            gibbs_sample_y_entry(state, x, k, t, rng)?;
        }
    }
    Ok(count)
}

/// Resamples every entry of Y in row-major order.
pub fn resample_y<R: Rng + ?Sized>(state: &mut SamplerState, x: &BinaryMatrix, rng: &mut R) -> Result<()> {
    for k in 0..state.k() {
        for t in 0..state.trials() {
            gibbs_sample_y_entry(state, x, k, t, rng)?;
        }
    }
    Ok(())
}

/// One full iteration of the infinite sampler.
pub fn gibbs_sweep<R: Rng + ?Sized>(state: &mut SamplerState, x: &BinaryMatrix, rng: &mut R) -> Result<()> {
    state.check_data(x)?;
    state.params.validate()?;
    let mut owned = Vec::new();
    for i in 0..state.n() {
        owned.clear();
        for k in 0..state.k() {
            let m_minus = state.column_sums()[k] - state.z().get(i, k) as usize;
            if m_minus > 0 {
                gibbs_sample_z_entry(state, x, i, k, rng)?;
            } else {
                owned.push(k);
            }
        }
        for &k in &owned {
            state.set_z(i, k, false);
        }
        sample_new_causes(state, x, i, rng)?;
    }
    resample_y(state, x, rng)?;
    state.compact();
    Ok(())
}
