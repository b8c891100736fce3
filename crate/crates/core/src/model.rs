//! The generative model: noisy-OR observations, Bernoulli latent
//! activations and the Beta-Bernoulli / IBP structure priors.
//!
//! All probabilities are handled in log space. Boundary parameter values
//! (ε = 0, λ ∈ {0, 1}, p ∈ {0, 1}) are legal and produce `-inf` log
//! probabilities where an observation is impossible; nothing here returns NaN
//! for valid inputs.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::ibp;
use crate::matrix::BinaryMatrix;

/// Rates and concentration of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Leak: probability an observation fires with no active cause.
    pub epsilon: f64,
    /// Probability that an active cause transmits along an edge.
    pub lambda: f64,
    /// Prior activation probability of each latent cause on each trial.
    pub p: f64,
    /// IBP concentration.
    pub alpha: f64,
}

impl Default for ModelParams {
    /// The synthetic-evaluation settings: α = 3, ε = 0.01, λ = 0.9, p = 0.1.
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            lambda: 0.9,
            p: 0.1,
            alpha: 3.0,
        }
    }
}

impl ModelParams {
    pub fn new(epsilon: f64, lambda: f64, p: f64, alpha: f64) -> Result<Self> {
        let params = Self {
            epsilon,
            lambda,
            p,
            alpha,
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks 0 ≤ ε, λ, p ≤ 1 and α > 0.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("lambda", self.lambda),
            ("p", self.p),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} not in [0, 1]")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} must be positive",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Probability that an observation stays off given `active` active parents:
/// (1 − λ)^active · (1 − ε).
#[inline]
pub fn noisy_or_off(active: u32, params: &ModelParams) -> f64 {
    (1.0 - params.lambda).powi(active as i32) * (1.0 - params.epsilon)
}

/// P(x = 1) under the noisy-OR with `active` active parents.
#[inline]
pub fn noisy_or_prob(active: u32, params: &ModelParams) -> f64 {
    1.0 - noisy_or_off(active, params)
}

/// log P(x | off-probability `off`), computed from the off-probability so that
/// x = 0 keeps full relative precision.
#[inline]
pub(crate) fn ln_bernoulli_off(x: bool, off: f64) -> f64 {
    if x {
        (1.0 - off).ln()
    } else {
        off.ln()
    }
}

/// log P(x | noisy-OR with `active` parents).
#[inline]
pub fn ln_observation(x: bool, active: u32, params: &ModelParams) -> f64 {
    ln_bernoulli_off(x, noisy_or_off(active, params))
}

/// Σ_{i,t} log P(x_{i,t} | Z, Y).
pub fn log_likelihood(
    x: &BinaryMatrix,
    z: &BinaryMatrix,
    y: &BinaryMatrix,
    params: &ModelParams,
) -> Result<f64> {
    check_shapes(x, z, y)?;
    let (n, t_len) = x.shape();
    let k = z.cols();
    let mut total = 0.0;
    for i in 0..n {
        let zi = z.row(i);
        for t in 0..t_len {
            let active = (0..k).filter(|&kk| zi[kk] == 1 && y.get(kk, t)).count() as u32;
            total += ln_observation(x.get(i, t), active, params);
        }
    }
    Ok(total)
}

pub(crate) fn check_shapes(x: &BinaryMatrix, z: &BinaryMatrix, y: &BinaryMatrix) -> Result<()> {
    if z.rows() != x.rows() {
        return Err(Error::dims(format!(
            "Z has {} rows but X has {}",
            z.rows(),
            x.rows()
        )));
    }
    if y.rows() != z.cols() {
        return Err(Error::dims(format!(
            "Y has {} rows but Z has {} columns",
            y.rows(),
            z.cols()
        )));
    }
    // A 0×0 Y is what an empty nested-row list decodes to; accept it for K = 0.
    if y.cols() != x.cols() && !(y.rows() == 0 && y.cols() == 0) {
        return Err(Error::dims(format!(
            "Y has {} columns but X has {}",
            y.cols(),
            x.cols()
        )));
    }
    Ok(())
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {v} not in [0, 1]")))
    }
}

/// n · log(q), with 0 · log 0 = 0.
#[inline]
pub(crate) fn xlogy(n: f64, q: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        n * q.ln()
    }
}

/// log P(Y) with i.i.d. Bernoulli(p) entries.
pub fn log_prior_y(y: &BinaryMatrix, p: f64) -> Result<f64> {
    check_probability("p", p)?;
    let ones = y.count_ones() as f64;
    let zeros = (y.rows() * y.cols()) as f64 - ones;
    Ok(xlogy(ones, p) + xlogy(zeros, 1.0 - p))
}

/// log of one column's Beta(α/K, 1)-Bernoulli marginal with `m` ones out of `n`.
#[inline]
pub(crate) fn ln_finite_column(m: usize, n: usize, a: f64) -> f64 {
    a.ln() + ln_gamma(m as f64 + a) + ln_gamma((n - m) as f64 + 1.0)
        - ln_gamma(n as f64 + 1.0 + a)
}

/// log P(Z | K) for the finite model with θ_k ~ Beta(α/K, 1) integrated out.
/// `z` must have exactly `k` columns, empty ones included.
pub fn log_prior_z_finite(z: &BinaryMatrix, k: usize, alpha: f64) -> Result<f64> {
    if z.cols() != k {
        return Err(Error::dims(format!("Z has {} columns, K = {k}", z.cols())));
    }
    if z.rows() == 0 {
        return Err(Error::InvalidParameter("finite prior needs N >= 1".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must be positive")));
    }
    let n = z.rows();
    let a = alpha / k as f64;
    Ok(z.col_sums().iter().map(|&m| ln_finite_column(m, n, a)).sum())
}

/// Which structure prior the joint uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZPrior {
    /// Finite Beta-Bernoulli prior with this many columns.
    Finite(usize),
    /// Infinite limit (lof-class probability).
    Ibp,
}

/// log P(X | Z, Y) + log P(Y) + log P(Z), the unnormalized log posterior.
pub fn log_joint(
    x: &BinaryMatrix,
    z: &BinaryMatrix,
    y: &BinaryMatrix,
    params: &ModelParams,
    prior: ZPrior,
) -> Result<f64> {
    let lz = match prior {
        ZPrior::Finite(k) => log_prior_z_finite(z, k, params.alpha)?,
        ZPrior::Ibp => ibp::log_prior_z_ibp(z, params.alpha)?,
    };
    Ok(log_likelihood(x, z, y, params)? + log_prior_y(y, params.p)? + lz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(epsilon: f64, lambda: f64) -> ModelParams {
        ModelParams {
            epsilon,
            lambda,
            p: 0.1,
            alpha: 1.0,
        }
    }

    #[test]
    fn noisy_or_examples() {
        for lambda in [0.0, 0.3, 0.9, 1.0] {
            assert!((noisy_or_prob(0, &params(0.01, lambda)) - 0.01).abs() < 1e-15);
        }
        assert!((noisy_or_prob(1, &params(0.01, 0.9)) - 0.901).abs() < 1e-12);
        assert!((noisy_or_prob(2, &params(0.01, 0.9)) - 0.9901).abs() < 1e-12);
        assert_eq!(noisy_or_prob(3, &params(0.0, 1.0)), 1.0);
    }

    #[test]
    fn likelihood_examples() {
        let p = params(0.01, 0.9);
        let x = BinaryMatrix::zeros(1, 2);
        let ll = log_likelihood(&x, &BinaryMatrix::zeros(1, 0), &BinaryMatrix::zeros(0, 2), &p)
            .unwrap();
        assert!((ll - 2.0 * 0.99f64.ln()).abs() < 1e-12);

        let one = BinaryMatrix::from_rows(&[[1u8]]).unwrap();
        let ll = log_likelihood(&one, &one, &one, &p).unwrap();
        assert!((ll - 0.901f64.ln()).abs() < 1e-12);

        let ll = log_likelihood(
            &BinaryMatrix::zeros(0, 0),
            &BinaryMatrix::zeros(0, 0),
            &BinaryMatrix::zeros(0, 0),
            &p,
        )
        .unwrap();
        assert_eq!(ll, 0.0);
    }

    #[test]
    fn likelihood_boundaries_are_neg_infinity_not_nan() {
        let x = BinaryMatrix::from_rows(&[[1u8]]).unwrap();
        let ll = log_likelihood(&x, &BinaryMatrix::zeros(1, 0), &BinaryMatrix::zeros(0, 1), &params(0.0, 0.5))
            .unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);

        let x0 = BinaryMatrix::from_rows(&[[0u8]]).unwrap();
        let one = BinaryMatrix::from_rows(&[[1u8]]).unwrap();
        assert_eq!(log_likelihood(&x0, &one, &one, &params(0.0, 1.0)).unwrap(), f64::NEG_INFINITY);
        assert_eq!(log_likelihood(&x0, &one, &one, &params(1.0, 0.0)).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn likelihood_rejects_bad_shapes() {
        let x = BinaryMatrix::zeros(2, 3);
        let z = BinaryMatrix::zeros(2, 1);
        assert!(log_likelihood(&x, &z, &BinaryMatrix::zeros(2, 3), &params(0.1, 0.5)).is_err());
        assert!(log_likelihood(&x, &z, &BinaryMatrix::zeros(1, 2), &params(0.1, 0.5)).is_err());
        assert!(log_likelihood(&x, &BinaryMatrix::zeros(3, 1), &BinaryMatrix::zeros(1, 3), &params(0.1, 0.5)).is_err());
    }

    #[test]
    fn prior_y_examples() {
        assert_eq!(log_prior_y(&BinaryMatrix::zeros(0, 5), 0.3).unwrap(), 0.0);
        for row in [[0u8, 0], [0, 1], [1, 1]] {
            let y = BinaryMatrix::from_rows(&[row]).unwrap();
            assert!((log_prior_y(&y, 0.5).unwrap() - 0.25f64.ln()).abs() < 1e-15);
        }
        let y = BinaryMatrix::from_rows(&[[1u8, 0]]).unwrap();
        assert!((log_prior_y(&y, 0.1).unwrap() - 0.09f64.ln()).abs() < 1e-14);
        assert_eq!(log_prior_y(&y, 0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(log_prior_y(&BinaryMatrix::zeros(1, 2), 0.0).unwrap(), 0.0);
        assert!(log_prior_y(&y, 1.5).is_err());
    }

    #[test]
    fn finite_prior_examples() {
        let one = BinaryMatrix::from_rows(&[[1u8]]).unwrap();
        let zero = BinaryMatrix::from_rows(&[[0u8]]).unwrap();
        assert!((log_prior_z_finite(&one, 1, 1.0).unwrap() - 0.5f64.ln()).abs() < 1e-14);
        assert!((log_prior_z_finite(&zero, 1, 1.0).unwrap() - 0.5f64.ln()).abs() < 1e-14);
        assert!(log_prior_z_finite(&one, 2, 1.0).is_err());
        assert!(log_prior_z_finite(&one, 1, 0.0).is_err());
    }

    #[test]
    fn finite_prior_two_by_two_sums_to_one() {
        for alpha in [0.2, 1.0, 4.0] {
            let total: f64 = (0u8..16)
                .map(|bits| {
                    let z = BinaryMatrix::from_vec(2, 2, (0..4).map(|b| (bits >> b) & 1).collect())
                        .unwrap();
                    log_prior_z_finite(&z, 2, alpha).unwrap().exp()
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "alpha {alpha}: {total}");
        }
    }

    #[test]
    fn joint_is_sum_of_terms() {
        let x = BinaryMatrix::from_rows(&[[1u8, 0, 1], [0, 0, 1]]).unwrap();
        let z = BinaryMatrix::from_rows(&[[1u8, 0], [1, 1]]).unwrap();
        let y = BinaryMatrix::from_rows(&[[1u8, 0, 1], [0, 1, 0]]).unwrap();
        let p = ModelParams::new(0.05, 0.8, 0.3, 1.5).unwrap();
        let parts = log_likelihood(&x, &z, &y, &p).unwrap()
            + log_prior_y(&y, p.p).unwrap()
            + log_prior_z_finite(&z, 2, p.alpha).unwrap();
        let joint = log_joint(&x, &z, &y, &p, ZPrior::Finite(2)).unwrap();
        assert!((joint - parts).abs() < 1e-12);
        assert!(joint <= 0.0);
    }

    #[test]
    fn empty_joint_is_ibp_constant() {
        // N = 3, T = 0, K+ = 0: only exp(-α H_3) survives.
        let x = BinaryMatrix::zeros(3, 0);
        let p = ModelParams::new(0.1, 0.5, 0.2, 2.0).unwrap();
        let joint = log_joint(&x, &BinaryMatrix::zeros(3, 0), &BinaryMatrix::zeros(0, 0), &p, ZPrior::Ibp)
            .unwrap();
        let h3 = 1.0 + 0.5 + 1.0 / 3.0;
        assert!((joint + 2.0 * h3).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 1.0, 0.0, 0.1).is_ok());
        assert!(ModelParams::new(-0.1, 0.5, 0.5, 1.0).is_err());
        assert!(ModelParams::new(0.1, 0.5, 0.5, 0.0).is_err());
        assert!(ModelParams::new(0.1, 1.01, 0.5, 1.0).is_err());
    }
}
