//! Discrete draws from unnormalized log weights.

use rand::Rng;

use crate::error::{Error, Result};

/// P(a = 1) for a two-point distribution with log weights `lw0`, `lw1`.
///
/// `-inf` weights are zero mass. Both `-inf`, or any NaN, is a degeneracy.
pub fn two_point_prob(lw0: f64, lw1: f64) -> Result<f64> {
    if lw0.is_nan() || lw1.is_nan() {
        return Err(Error::Degenerate("NaN conditional weight".into()));
    }
    match (lw0 == f64::NEG_INFINITY, lw1 == f64::NEG_INFINITY) {
        (true, true) => Err(Error::Degenerate(
            "both values of a binary conditional have zero probability".into(),
        )),
        (true, false) => Ok(1.0),
        (false, true) => Ok(0.0),
        (false, false) => Ok(1.0 / (1.0 + (lw0 - lw1).exp())),
    }
}

/// Normalizes log weights into probabilities.
pub fn normalize_log_weights(log_weights: &[f64]) -> Result<Vec<f64>> {
    if log_weights.iter().any(|w| w.is_nan()) {
        return Err(Error::Degenerate("NaN conditional weight".into()));
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Degenerate("every candidate value has zero probability".into()));
    }
    let mut probs: Vec<f64> = log_weights.iter().map(|&w| (w - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

/// Index drawn from normalized probabilities.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // u landed in the rounding gap above the final partial sum.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[inline]
pub fn bernoulli<R: Rng + ?Sized>(prob: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < prob
}
