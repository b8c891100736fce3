//! Posterior summaries over Z samples and the ZZᵀ-based error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;

/// Sample averages of ZZᵀ, K₊ and K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub n: usize,
    /// E[ZZᵀ], row-major N×N.
    pub mean_zzt: Vec<f64>,
    pub mean_k_plus: f64,
    pub mean_k: f64,
    pub sample_count: usize,
}

impl PosteriorSummary {
    pub fn zzt(&self, i: usize, j: usize) -> f64 {
        self.mean_zzt[i * self.n + j]
    }

    /// Summary of a single sample.
    pub fn point(z: &BinaryMatrix) -> Self {
        let mut acc = SummaryAccumulator::new(z.rows());
        acc.push(z, z.cols()).expect("row count matches");
        acc.finish().expect("one sample")
    }
}

/// Integer sums of ZZᵀ, K₊ and K; merging is exact, so reductions do not
/// depend on order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummaryAccumulator {
    n: usize,
    zzt: Vec<u64>,
    k_plus: u64,
    k: u64,
    count: usize,
}

impl SummaryAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            zzt: vec![0; n * n],
            k_plus: 0,
            k: 0,
            count: 0,
        }
    }

    /// Adds a sample; `k` is the model dimension (K₊ for the infinite model).
    pub fn push(&mut self, z: &BinaryMatrix, k: usize) -> Result<()> {
        if z.rows() != self.n {
            return Err(Error::dims(format!("sample has {} rows, expected {}", z.rows(), self.n)));
        }
        for i in 0..self.n {
            let ri = z.row(i);
            for j in i..self.n {
                let rj = z.row(j);
                let dot = ri.iter().zip(rj).filter(|&(&a, &b)| a & b == 1).count() as u64;
                self.zzt[i * self.n + j] += dot;
                if j != i {
                    self.zzt[j * self.n + i] += dot;
                }
            }
        }
        self.k_plus += z.col_sums().iter().filter(|&&m| m > 0).count() as u64;
        self.k += k as u64;
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &SummaryAccumulator) -> Result<()> {
        if other.n != self.n {
            return Err(Error::dims(format!("merging N = {} into N = {}", other.n, self.n)));
        }
        for (a, b) in self.zzt.iter_mut().zip(&other.zzt) {
            *a += b;
        }
        self.k_plus += other.k_plus;
        self.k += other.k;
        self.count += other.count;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> Result<PosteriorSummary> {
        if self.count == 0 {
            return Err(Error::Precondition("posterior summary needs at least one sample".into()));
        }
        let c = self.count as f64;
        Ok(PosteriorSummary {
            n: self.n,
            mean_zzt: self.zzt.iter().map(|&s| s as f64 / c).collect(),
            mean_k_plus: self.k_plus as f64 / c,
            mean_k: self.k as f64 / c,
            sample_count: self.count,
        })
    }
}

fn check(summary: &PosteriorSummary, z_true: &BinaryMatrix) -> Result<Vec<f64>> {
    if summary.n != z_true.rows() || summary.mean_zzt.len() != summary.n * summary.n {
        return Err(Error::dims(format!(
            "summary is over N = {}, true Z has {} rows",
            summary.n,
            z_true.rows()
        )));
    }
    Ok(z_true.gram())
}

/// Σᵢ |(Z Zᵀ)ᵢᵢ − E[ZZᵀ]ᵢᵢ|.
pub fn in_degree_error(summary: &PosteriorSummary, z_true: &BinaryMatrix) -> Result<f64> {
    let g = check(summary, z_true)?;
    let n = summary.n;
    Ok((0..n).map(|i| (g[i * n + i] - summary.zzt(i, i)).abs()).sum())
}

/// Σ_{i<j} |(Z Zᵀ)ᵢⱼ − E[ZZᵀ]ᵢⱼ|.
pub fn structure_error(summary: &PosteriorSummary, z_true: &BinaryMatrix) -> Result<f64> {
    let g = check(summary, z_true)?;
    let n = summary.n;
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += (g[i * n + j] - summary.zzt(i, j)).abs();
        }
    }
    Ok(total)
}
