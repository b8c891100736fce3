//! Exact posteriors by enumeration, for validating the samplers on tiny
//! instances.
//!
//! A state (Z, Y) with K causes is keyed by the bits of Z in row-major
//! order followed by the bits of Y in row-major order; bit 0 is z_{1,1}.

use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;
use crate::model::{log_likelihood, log_prior_y, log_prior_z_finite, ModelParams};
use crate::rjmcmc::KPrior;
use crate::sampling::normalize_log_weights;

pub const DEFAULT_CAP_BITS: usize = 20;

/// Exact posterior over (Z, Y) for fixed K under the finite prior.
#[derive(Debug, Clone)]
pub struct ExactPosterior {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    /// Probability of each state, indexed by [`state_key`].
    pub probs: Vec<f64>,
    /// P(z_{i,k} = 1), row-major N×K.
    pub z_marginals: Vec<f64>,
    /// P(K₊ = j) for j = 0..=K.
    pub k_plus: Vec<f64>,
}

/// Exact posterior over the number of causes with K summed over 1..=k_max.
#[derive(Debug, Clone)]
pub struct DimensionPosterior {
    /// P(K = j), index 0 unused.
    pub k: Vec<f64>,
    /// P(K₊ = j) for j = 0..=k_max.
    pub k_plus: Vec<f64>,
}

pub fn state_key(z: &BinaryMatrix, y: &BinaryMatrix) -> u64 {
    let mut key = 0u64;
    for (b, &v) in z.as_slice().iter().chain(y.as_slice()).enumerate() {
        key |= (v as u64) << b;
    }
    key
}

pub fn state_from_key(key: u64, n: usize, k: usize, trials: usize) -> (BinaryMatrix, BinaryMatrix) {
    let bit = |b: usize| ((key >> b) & 1) as u8;
    let z: Vec<u8> = (0..n * k).map(bit).collect();
    let y: Vec<u8> = (n * k..n * k + k * trials).map(bit).collect();
    (
        BinaryMatrix::from_vec(n, k, z).expect("sizes agree"),
        BinaryMatrix::from_vec(k, trials, y).expect("sizes agree"),
    )
}

fn state_bits(x: &BinaryMatrix, k: usize, cap_bits: usize) -> Result<usize> {
    let bits = x.rows() * k + k * x.cols();
    if bits > cap_bits || bits >= 64 {
        return Err(Error::EnumerationCap {
            needed_bits: bits,
            cap_bits,
        });
    }
    Ok(bits)
}

/// Unnormalized log P(X, Z, Y | K) for every state.
fn log_weights(x: &BinaryMatrix, k: usize, params: &ModelParams, bits: usize) -> Result<Vec<f64>> {
    let (n, t) = x.shape();
    (0..1u64 << bits)
        .map(|key| {
            let (z, y) = state_from_key(key, n, k, t);
            Ok(log_likelihood(x, &z, &y, params)?
                + log_prior_y(&y, params.p)?
                + log_prior_z_finite(&z, k, params.alpha)?)
        })
        .collect()
}

fn k_plus_of_key(key: u64, n: usize, k: usize) -> usize {
    (0..k)
        .filter(|&c| (0..n).any(|i| (key >> (i * k + c)) & 1 == 1))
        .count()
}

pub fn exact_posterior(x: &BinaryMatrix, k: usize, params: &ModelParams, cap_bits: usize) -> Result<ExactPosterior> {
    params.validate()?;
    let bits = state_bits(x, k, cap_bits)?;
    let (n, trials) = x.shape();
    let probs = normalize_log_weights(&log_weights(x, k, params, bits)?)?;
    let mut z_marginals = vec![0.0; n * k];
    let mut k_plus = vec![0.0; k + 1];
    for (key, &pr) in probs.iter().enumerate() {
        let key = key as u64;
        for (b, m) in z_marginals.iter_mut().enumerate() {
            if (key >> b) & 1 == 1 {
                *m += pr;
            }
        }
        k_plus[k_plus_of_key(key, n, k)] += pr;
    }
    Ok(ExactPosterior {
        n,
        k,
        trials,
        probs,
        z_marginals,
        k_plus,
    })
}

/// Posterior over K and K₊ with prior `k_prior` restricted to 1..=k_max.
pub fn exact_posterior_over_k(
    x: &BinaryMatrix,
    k_prior: &KPrior,
    k_max: usize,
    params: &ModelParams,
    cap_bits: usize,
) -> Result<DimensionPosterior> {
    params.validate()?;
    k_prior.validate()?;
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max must be >= 1".into()));
    }
    let n = x.rows();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for k in 1..=k_max {
        let bits = state_bits(x, k, cap_bits)?;
        let ln_pk = k_prior.ln_pmf(k, params.alpha, n);
        for (key, lw) in log_weights(x, k, params, bits)?.into_iter().enumerate() {
            entries.push((k, k_plus_of_key(key as u64, n, k), lw + ln_pk));
        }
    }
    let lw: Vec<f64> = entries.iter().map(|e| e.2).collect();
    let probs = normalize_log_weights(&lw)?;
    let mut k_dist = vec![0.0; k_max + 1];
    let mut k_plus = vec![0.0; k_max + 1];
    for ((k, kp, _), pr) in entries.into_iter().zip(probs) {
        k_dist[k] += pr;
        k_plus[kp] += pr;
    }
    Ok(DimensionPosterior { k: k_dist, k_plus })
}

/// Half the L1 distance between two distributions on the same support.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..len).map(|i| (at(a, i) - at(b, i)).abs()).sum::<f64>()
}
