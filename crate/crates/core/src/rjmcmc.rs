//! Reversible-jump sampler for the finite model.
//!
//! The state carries an explicit K ≥ 1, including columns of Z with no
//! edges. Each row visit makes one birth/death move on a uniformly chosen
//! column, then Gibbs-resamples row i of Z under the finite prior and all of Y.
//!
//! Two birth/death acceptance ratios are available:
//!
//! * [`BirthDeathRatio::Exchangeable`] (default) inserts the new cause at a
//!   uniformly random position. Reversing a birth means deleting any column
//!   in the run of identical columns it joined, and the same run length
//!   enters the forward probability, so the ratio is
//!   (K / K₊) · P(Z′|K+1) P(K+1) / (P(Z|K) P(K)) and its death counterpart.
//! * [`BirthDeathRatio::DeltaWeighted`] additionally weights births by
//!   δ/(K+1) and deaths by K/δ, where δ counts rows of Y equal to the
//!   new/deleted row. It is kept for comparison; it does not leave the
//!   posterior over (K, Z, Y) invariant.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::gibbs::{resample_y, z_conditional};
use crate::ibp::harmonic;
use crate::matrix::BinaryMatrix;
use crate::model::ln_finite_column;
use crate::sampling::bernoulli;
use crate::state::SamplerState;

/// Prior over the number of causes K ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KPrior {
    /// K − 1 ~ Poisson(α H_N).
    ShiftedPoisson,
    /// P(K) = (1 − q)^{K−1} q.
    Geometric { q: f64 },
    /// Uniform on 1..=max.
    Uniform { max: usize },
}

impl Default for KPrior {
    fn default() -> Self {
        KPrior::ShiftedPoisson
    }
}

impl KPrior {
    pub fn ln_pmf(&self, k: usize, alpha: f64, n: usize) -> f64 {
        if k == 0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            KPrior::ShiftedPoisson => {
                let mean = alpha * harmonic(n);
                let j = (k - 1) as f64;
                if mean == 0.0 {
                    return if k == 1 { 0.0 } else { f64::NEG_INFINITY };
                }
                j * mean.ln() - mean - ln_factorial((k - 1) as u64)
            }
            KPrior::Geometric { q } => (k - 1) as f64 * (1.0 - q).ln() + q.ln(),
            KPrior::Uniform { max } => {
                if k <= max {
                    -(max as f64).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KPrior::Geometric { q } if !(q > 0.0 && q <= 1.0) => {
                Err(Error::InvalidParameter(format!("geometric q = {q} not in (0, 1]")))
            }
            KPrior::Uniform { max: 0 } => {
                Err(Error::InvalidParameter("uniform K prior needs max >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BirthDeathRatio {
    #[default]
    Exchangeable,
    DeltaWeighted,
}

/// Prior inclusion probability used by the finite Gibbs step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinitePredictive {
    /// Beta-Bernoulli predictive (m_{−i,k} + α/K) / (N + α/K).
    #[default]
    Posterior,
    /// (m_{−i,k} + α/K) / N, clamped to 1.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RjmcmcOptions {
    pub k_prior: KPrior,
    pub ratio: BirthDeathRatio,
    pub predictive: FinitePredictive,
}

/// A [`SamplerState`] whose empty columns are part of the model, with K ≥ 1.
#[derive(Debug, Clone)]
pub struct FiniteState {
    pub state: SamplerState,
    pub options: RjmcmcOptions,
}

/// Result of a dimension move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveOutcome {
    pub acceptance: f64,
    pub accepted: bool,
}

impl FiniteState {
    pub fn new(state: SamplerState, options: RjmcmcOptions) -> Result<Self> {
        if state.k() == 0 {
            return Err(Error::InvalidParameter("finite state needs K >= 1".into()));
        }
        options.k_prior.validate()?;
        Ok(Self { state, options })
    }

    /// K = 1 with an empty column and a Y row drawn from the prior.
    pub fn single_empty<R: Rng + ?Sized>(
        n: usize,
        trials: usize,
        params: crate::model::ModelParams,
        options: RjmcmcOptions,
        rng: &mut R,
    ) -> Result<Self> {
        let row: Vec<u8> = (0..trials).map(|_| bernoulli(params.p, rng) as u8).collect();
        let mut state = SamplerState::empty(n, trials, params)?;
        state.push_cause(&row)?;
        Self::new(state, options)
    }

    pub fn k(&self) -> usize {
        self.state.k()
    }

    pub fn k_plus(&self) -> usize {
        self.state.k_plus()
    }

    fn ln_k_prior(&self, k: usize) -> f64 {
        self.options
            .k_prior
            .ln_pmf(k, self.state.params.alpha, self.state.n())
    }

    /// Number of rows of Y equal to `row`.
    fn count_equal_rows(&self, row: &[u8]) -> usize {
        let y = self.state.y();
        (0..y.rows()).filter(|&k| y.row(k) == row).count()
    }
}

/// log P(Z | K) from column sums.
fn ln_prior_from_sums(sums: impl Iterator<Item = usize>, n: usize, alpha: f64, k: usize) -> f64 {
    let a = alpha / k as f64;
    sums.map(|m| ln_finite_column(m, n, a)).sum()
}

/// Unclamped log acceptance ratio for appending an empty cause with Y row `y_row`.
pub fn birth_log_ratio(fs: &FiniteState, y_row: &[u8]) -> Result<f64> {
    let s = &fs.state;
    if y_row.len() != s.trials() {
        return Err(Error::dims(format!(
            "proposed Y row has {} entries, T = {}",
            y_row.len(),
            s.trials()
        )));
    }
    let k = s.k();
    let k_plus = s.k_plus();
    if k_plus == 0 {
        return Err(Error::Precondition("birth needs a linked column".into()));
    }
    let n = s.n();
    let alpha = s.params.alpha;
    let sums = s.column_sums();
    let ln_z_new = ln_prior_from_sums(sums.iter().copied().chain([0]), n, alpha, k + 1);
    let ln_z_old = ln_prior_from_sums(sums.iter().copied(), n, alpha, k);
    let mut ratio = (k as f64 / k_plus as f64).ln() + ln_z_new + fs.ln_k_prior(k + 1)
        - ln_z_old
        - fs.ln_k_prior(k);
    if fs.options.ratio == BirthDeathRatio::DeltaWeighted {
        let delta = fs.count_equal_rows(y_row) + 1;
        ratio += (delta as f64 / (k + 1) as f64).ln();
    }
    Ok(ratio)
}

/// Acceptance probability of a birth proposing Y row `y_row`.
pub fn birth_acceptance(fs: &FiniteState, y_row: &[u8]) -> Result<f64> {
    Ok(clamp_ratio(birth_log_ratio(fs, y_row)?))
}

/// Unclamped log acceptance ratio for deleting the unlinked column `col`.
pub fn death_log_ratio(fs: &FiniteState, col: usize) -> Result<f64> {
    let s = &fs.state;
    let k = s.k();
    if col >= k {
        return Err(Error::dims(format!("column {col} out of range for K = {k}")));
    }
    if s.column_sums()[col] != 0 {
        return Err(Error::Precondition(format!("column {col} has edges")));
    }
    if k == 1 {
        return Err(Error::Precondition("deleting the last cause would leave K = 0".into()));
    }
    let k_plus = s.k_plus();
    if k_plus == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let n = s.n();
    let alpha = s.params.alpha;
    let sums = s.column_sums();
    let ln_z_new = ln_prior_from_sums(
        sums.iter().enumerate().filter(|&(j, _)| j != col).map(|(_, &m)| m),
        n,
        alpha,
        k - 1,
    );
    let ln_z_old = ln_prior_from_sums(sums.iter().copied(), n, alpha, k);
    let mut ratio = (k_plus as f64 / (k - 1) as f64).ln() + ln_z_new + fs.ln_k_prior(k - 1)
        - ln_z_old
        - fs.ln_k_prior(k);
    if fs.options.ratio == BirthDeathRatio::DeltaWeighted {
        let delta = fs.count_equal_rows(s.y().row(col));
        ratio -= (delta as f64 / k as f64).ln();
    }
    Ok(ratio)
}

pub fn death_acceptance(fs: &FiniteState, col: usize) -> Result<f64> {
    Ok(clamp_ratio(death_log_ratio(fs, col)?))
}

fn clamp_ratio(log_ratio: f64) -> f64 {
    if log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}

/// Proposes a birth with a prior-drawn Y row; on acceptance the empty
/// cause is inserted at a uniformly random position.
pub fn try_birth<R: Rng + ?Sized>(fs: &mut FiniteState, rng: &mut R) -> Result<MoveOutcome> {
    let p = fs.state.params.p;
    let row: Vec<u8> = (0..fs.state.trials()).map(|_| bernoulli(p, rng) as u8).collect();
    let acceptance = birth_acceptance(fs, &row)?;
    let accepted = bernoulli(acceptance, rng);
    if accepted {
        let at = rng.random_range(0..=fs.k());
        fs.state.insert_cause(at, &row)?;
    }
    Ok(MoveOutcome { acceptance, accepted })
}

/// Proposes deleting unlinked column `col`. Deleting the last cause is rejected outright.
pub fn try_death<R: Rng + ?Sized>(fs: &mut FiniteState, col: usize, rng: &mut R) -> Result<MoveOutcome> {
    if fs.k() == 1 {
        return Ok(MoveOutcome {
            acceptance: 0.0,
            accepted: false,
        });
    }
    let acceptance = death_acceptance(fs, col)?;
    let accepted = bernoulli(acceptance, rng);
    if accepted {
        fs.state.remove_cause(col);
    }
    Ok(MoveOutcome { acceptance, accepted })
}

/// Finite-model prior P(z_{i,k} = 1 | z_{−i,k}).
pub fn finite_prior_weight(fs: &FiniteState, i: usize, k: usize) -> f64 {
    let s = &fs.state;
    let m_minus = (s.column_sums()[k] - s.z().get(i, k) as usize) as f64;
    let a = s.params.alpha / s.k() as f64;
    let n = s.n() as f64;
    match fs.options.predictive {
        FinitePredictive::Posterior => (m_minus + a) / (n + a),
        FinitePredictive::Printed => ((m_minus + a) / n).min(1.0),
    }
}

pub fn finite_conditional_z<R: Rng + ?Sized>(
    fs: &mut FiniteState,
    x: &BinaryMatrix,
    i: usize,
    k: usize,
    rng: &mut R,
) -> Result<bool> {
    let theta = finite_prior_weight(fs, i, k);
    let p1 = z_conditional(&fs.state, x, i, k, theta)?;
    let value = bernoulli(p1, rng);
    fs.state.set_z(i, k, value);
    Ok(value)
}

/// Fixed-K Gibbs sweep: every z_{i,k} in row-major order, then every y_{k,t}.
pub fn finite_gibbs_sweep<R: Rng + ?Sized>(fs: &mut FiniteState, x: &BinaryMatrix, rng: &mut R) -> Result<()> {
    fs.state.check_data(x)?;
    fs.state.params.validate()?;
    for i in 0..fs.state.n() {
        for k in 0..fs.k() {
            finite_conditional_z(fs, x, i, k, rng)?;
        }
    }
    resample_y(&mut fs.state, x, rng)
}

/// Counts of dimension moves during a sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MoveStats {
    pub births_proposed: usize,
    pub births_accepted: usize,
    pub deaths_proposed: usize,
    pub deaths_accepted: usize,
}

/// One iteration: for each row, a birth/death move on a random column,
/// then row i of Z and all of Y.
pub fn rjmcmc_sweep<R: Rng + ?Sized>(fs: &mut FiniteState, x: &BinaryMatrix, rng: &mut R) -> Result<MoveStats> {
    fs.state.check_data(x)?;
    fs.state.params.validate()?;
    let mut stats = MoveStats::default();
    for i in 0..fs.state.n() {
        let col = rng.random_range(0..fs.k());
        if fs.state.column_sums()[col] > 0 {
            stats.births_proposed += 1;
            stats.births_accepted += try_birth(fs, rng)?.accepted as usize;
        } else {
            stats.deaths_proposed += 1;
            stats.deaths_accepted += try_death(fs, col, rng)?.accepted as usize;
        }
        for k in 0..fs.k() {
            finite_conditional_z(fs, x, i, k, rng)?;
        }
        resample_y(&mut fs.state, x, rng)?;
    }
    Ok(stats)
}
