use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;
use crate::model::{self, ModelParams, ZPrior};

/// The mutable state of one chain: Z (N×K), Y (K×T) and the parameters.
///
/// Column sums m_k and the active-parent counts a_{i,t} = z_{i,:}·y_{:,t}
/// are kept in step with every mutation, so the samplers never rescan
/// the matrices.
#[derive(Debug, Clone)]
pub struct SamplerState {
    z: BinaryMatrix,
    y: BinaryMatrix,
    pub params: ModelParams,
    column_sums: Vec<usize>,
    active: Vec<u32>,
    trials: usize,
}

/// Plain-data form of a state for summaries and checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub z: BinaryMatrix,
    pub y: BinaryMatrix,
    pub params: ModelParams,
}

impl SamplerState {
    /// `trials` is T; it is needed separately because Y has no rows when K = 0.
    pub fn new(z: BinaryMatrix, y: BinaryMatrix, trials: usize, params: ModelParams) -> Result<Self> {
        params.validate()?;
        let y = if y.rows() == 0 {
            BinaryMatrix::zeros(0, trials)
        } else {
            y
        };
        if z.cols() != y.rows() {
            return Err(Error::dims(format!(
                "Z has {} columns but Y has {} rows",
                z.cols(),
                y.rows()
            )));
        }
        if y.cols() != trials {
            return Err(Error::dims(format!("Y has {} columns, T = {trials}", y.cols())));
        }
        let mut state = Self {
            column_sums: z.col_sums(),
            active: Vec::new(),
            trials,
            z,
            y,
            params,
        };
        state.active = state.compute_active();
        Ok(state)
    }

    /// N observed variables, no causes.
    pub fn empty(n: usize, trials: usize, params: ModelParams) -> Result<Self> {
        Self::new(BinaryMatrix::zeros(n, 0), BinaryMatrix::zeros(0, trials), trials, params)
    }

    pub fn z(&self) -> &BinaryMatrix {
        &self.z
    }

    pub fn y(&self) -> &BinaryMatrix {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.z.rows()
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    /// Number of represented columns, empty ones included.
    pub fn k(&self) -> usize {
        self.z.cols()
    }

    /// Number of columns with m_k > 0.
    pub fn k_plus(&self) -> usize {
        self.column_sums.iter().filter(|&&m| m > 0).count()
    }

    pub fn column_sums(&self) -> &[usize] {
        &self.column_sums
    }

    /// z_{i,:}·y_{:,t}.
    #[inline]
    pub fn active_count(&self, i: usize, t: usize) -> u32 {
        self.active[i * self.trials + t]
    }

    pub(crate) fn active_row(&self, i: usize) -> &[u32] {
        &self.active[i * self.trials..(i + 1) * self.trials]
    }

    pub fn set_z(&mut self, i: usize, k: usize, value: bool) {
        if self.z.get(i, k) == value {
            return;
        }
        self.z.set(i, k, value);
        if value {
            self.column_sums[k] += 1;
        } else {
            self.column_sums[k] -= 1;
        }
        let row = &mut self.active[i * self.trials..(i + 1) * self.trials];
        for (t, a) in row.iter_mut().enumerate() {
            if self.y.get(k, t) {
                if value {
                    *a += 1;
                } else {
                    *a -= 1;
                }
            }
        }
    }

    pub fn set_y(&mut self, k: usize, t: usize, value: bool) {
        if self.y.get(k, t) == value {
            return;
        }
        self.y.set(k, t, value);
        for i in 0..self.n() {
            if self.z.get(i, k) {
                let a = &mut self.active[i * self.trials + t];
                if value {
                    *a += 1;
                } else {
                    *a -= 1;
                }
            }
        }
    }

    /// Inserts a cause at column `at` with no edges and the given Y row.
    pub fn insert_cause(&mut self, at: usize, y_row: &[u8]) -> Result<()> {
        self.y.insert_row(at, y_row)?;
        self.z.insert_col(at, &vec![0; self.n()])?;
        self.column_sums.insert(at, 0);
        Ok(())
    }

    pub fn push_cause(&mut self, y_row: &[u8]) -> Result<()> {
        let at = self.k();
        self.insert_cause(at, y_row)
    }

    /// Removes cause `k` (its Z column and Y row), returning them.
    pub fn remove_cause(&mut self, k: usize) -> (Vec<u8>, Vec<u8>) {
        if self.column_sums[k] > 0 {
            for i in 0..self.n() {
                if self.z.get(i, k) {
                    for t in 0..self.trials {
                        if self.y.get(k, t) {
                            self.active[i * self.trials + t] -= 1;
                        }
                    }
                }
            }
        }
        self.column_sums.remove(k);
        (self.z.remove_col(k), self.y.remove_row(k))
    }

    /// Drops every cause with m_k = 0, keeping the order of the survivors.
    /// Returns how many were removed.
    pub fn compact(&mut self) -> usize {
        let mut removed = 0;
        for k in (0..self.k()).rev() {
            if self.column_sums[k] == 0 {
                self.remove_cause(k);
                removed += 1;
            }
        }
        removed
    }

    fn compute_active(&self) -> Vec<u32> {
        let mut active = vec![0u32; self.n() * self.trials];
        for i in 0..self.n() {
            for k in 0..self.k() {
                if self.z.get(i, k) {
                    for t in 0..self.trials {
                        if self.y.get(k, t) {
                            active[i * self.trials + t] += 1;
                        }
                    }
                }
            }
        }
        active
    }

    /// Recomputes the cached sums and counts from scratch and compares.
    pub fn check_consistency(&self) -> Result<()> {
        if self.column_sums != self.z.col_sums() {
            return Err(Error::Precondition(
                "column sums drifted from Z".into(),
            ));
        }
        if self.active != self.compute_active() {
            return Err(Error::Precondition("active counts drifted from Z·Y".into()));
        }
        Ok(())
    }

    pub fn log_likelihood(&self, x: &BinaryMatrix) -> Result<f64> {
        self.check_data(x)?;
        let mut total = 0.0;
        for i in 0..self.n() {
            for (t, &a) in self.active_row(i).iter().enumerate() {
                total += model::ln_observation(x.get(i, t), a, &self.params);
            }
        }
        Ok(total)
    }

    pub fn log_joint(&self, x: &BinaryMatrix, prior: ZPrior) -> Result<f64> {
        let lz = match prior {
            ZPrior::Finite(k) => model::log_prior_z_finite(&self.z, k, self.params.alpha)?,
            ZPrior::Ibp => {
                // Empty columns carry no mass in the infinite model.
                if self.k_plus() == self.k() {
                    crate::ibp::log_prior_z_ibp(&self.z, self.params.alpha)?
                } else {
                    let mut c = self.clone();
                    c.compact();
                    crate::ibp::log_prior_z_ibp(&c.z, self.params.alpha)?
                }
            }
        };
        Ok(self.log_likelihood(x)? + model::log_prior_y(&self.y, self.params.p)? + lz)
    }

    pub(crate) fn check_data(&self, x: &BinaryMatrix) -> Result<()> {
        if x.shape() != (self.n(), self.trials) {
            return Err(Error::dims(format!(
                "X is {}x{}, state expects {}x{}",
                x.rows(),
                x.cols(),
                self.n(),
                self.trials
            )));
        }
        Ok(())
    }

    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            z: self.z.clone(),
            y: self.y.clone(),
            params: self.params,
        }
    }
}
