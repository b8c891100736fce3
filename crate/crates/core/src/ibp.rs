//! Indian buffet process: the restaurant construction, left-ordered-form
//! accounting and the probability of a lof equivalence class.

use std::collections::BTreeMap;

use rand::Rng;
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;

/// H_n = Σ_{i=1..n} 1/i, by direct summation.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

/// Poisson draw by inversion with a sequential search of the CDF.
///
/// Means above 256 are split into independent chunks so that e^{-mean}
/// never underflows.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    const CHUNK: f64 = 256.0;
    if !(mean > 0.0) {
        return 0;
    }
    let mut remaining = mean;
    let mut total = 0;
    while remaining > CHUNK {
        total += poisson_inversion(CHUNK, rng);
        remaining -= CHUNK;
    }
    total + poisson_inversion(remaining, rng)
}

fn poisson_inversion<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut k = 0usize;
    let mut pmf = (-mean).exp();
    let mut cdf = pmf;
    while u > cdf {
        k += 1;
        pmf *= mean / k as f64;
        let next = cdf + pmf;
        if next == cdf && k as f64 > mean {
            // Rounding left the CDF just below u in the far tail.
            break;
        }
        cdf = next;
    }
    k
}

/// Draws Z from the restaurant process with `n` customers.
///
/// Customer i (1-based) takes each existing dish k with probability
/// m_k / i, where m_k counts earlier customers, then tries Poisson(α / i)
/// new dishes. Columns appear in order of first use, so every column has
/// at least one 1.
pub fn sample_ibp<R: Rng + ?Sized>(n: usize, alpha: f64, rng: &mut R) -> BinaryMatrix {
    let mut dishes: Vec<Vec<u8>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for i in 0..n {
        let customer = (i + 1) as f64;
        for (dish, m) in dishes.iter_mut().zip(counts.iter_mut()) {
            if rng.random::<f64>() < *m as f64 / customer {
                dish[i] = 1;
                *m += 1;
            }
        }
        let fresh = sample_poisson(alpha / customer, rng);
        for _ in 0..fresh {
            let mut dish = vec![0u8; n];
            dish[i] = 1;
            dishes.push(dish);
            counts.push(1);
        }
    }
    BinaryMatrix::from_columns(n, &dishes).expect("columns have n entries")
}

/// Multiplicities K_h of each distinct column pattern of Z.
///
/// A pattern is the column read top to bottom, so row 0 is the most
/// significant bit of the binary number h. Patterns of equal length order
/// lexicographically exactly as those numbers do.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LofHistogram {
    counts: BTreeMap<Vec<u8>, usize>,
    total_columns: usize,
}

impl LofHistogram {
    pub fn k_plus(&self) -> usize {
        self.total_columns
    }

    /// (pattern, K_h) pairs in increasing order of h.
    pub fn iter(&self) -> impl Iterator<Item = (&[u8], usize)> {
        self.counts.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn multiplicity(&self, pattern: &[u8]) -> usize {
        self.counts.get(pattern).copied().unwrap_or(0)
    }

    pub fn distinct_patterns(&self) -> usize {
        self.counts.len()
    }

    /// The pattern as the integer h, when it fits in 128 bits.
    pub fn pattern_value(pattern: &[u8]) -> Option<u128> {
        if pattern.len() > 128 {
            return None;
        }
        Some(pattern.iter().fold(0u128, |acc, &b| (acc << 1) | b as u128))
    }
}

/// Counts column patterns of Z. Z must have no all-zero column.
pub fn lof_histogram(z: &BinaryMatrix) -> Result<LofHistogram> {
    let mut counts = BTreeMap::new();
    for c in 0..z.cols() {
        let col = z.col(c);
        if col.iter().all(|&v| v == 0) {
            return Err(Error::ZeroColumn { column: c });
        }
        *counts.entry(col).or_insert(0) += 1;
    }
    Ok(LofHistogram {
        counts,
        total_columns: z.cols(),
    })
}

/// log P([Z]) for the lof class of Z under the infinite model:
///
/// K₊ log α − Σ_h log K_h! − α H_N + Σ_k [log (N − m_k)! + log (m_k − 1)! − log N!]
pub fn log_prior_z_ibp(z: &BinaryMatrix, alpha: f64) -> Result<f64> {
    let n = z.rows();
    if n == 0 {
        return Err(Error::InvalidParameter("IBP prior needs N >= 1".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must be positive")));
    }
    let hist = lof_histogram(z)?;
    let k_plus = hist.k_plus() as f64;
    let mut lp = k_plus * alpha.ln() - alpha * harmonic(n);
    lp -= hist.iter().map(|(_, kh)| ln_factorial(kh as u64)).sum::<f64>();
    let ln_n_fact = ln_factorial(n as u64);
    for m in z.col_sums() {
        lp += ln_factorial((n - m) as u64) + ln_factorial((m - 1) as u64) - ln_n_fact;
    }
    Ok(lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn harmonic_numbers() {
        assert_eq!(harmonic(0), 0.0);
        assert_eq!(harmonic(1), 1.0);
        assert!((harmonic(4) - 25.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn poisson_mean_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sample_poisson(0.0, &mut rng), 0);
        let draws = 20_000;
        let mean = (0..draws).map(|_| sample_poisson(2.5, &mut rng)).sum::<usize>() as f64 / draws as f64;
        assert!((mean - 2.5).abs() < 3.0 * (2.5f64 / draws as f64).sqrt());
        let big = (0..200).map(|_| sample_poisson(1000.0, &mut rng)).sum::<usize>() as f64 / 200.0;
        assert!((big - 1000.0).abs() < 3.0 * (1000.0f64 / 200.0).sqrt());
    }

    #[test]
    fn zero_alpha_gives_empty_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..6 {
            assert_eq!(sample_ibp(n, 0.0, &mut rng).shape(), (n, 0));
        }
    }

    #[test]
    fn samples_have_no_empty_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let z = sample_ibp(7, 3.0, &mut rng);
            assert!(z.col_sums().iter().all(|&m| m >= 1));
        }
    }

    #[test]
    fn histogram_examples() {
        let h = lof_histogram(&BinaryMatrix::identity(2)).unwrap();
        assert_eq!(h.distinct_patterns(), 2);
        assert_eq!(h.multiplicity(&[1, 0]), 1);
        assert_eq!(h.multiplicity(&[0, 1]), 1);

        let dup = BinaryMatrix::from_rows(&[[1u8, 1], [1, 1]]).unwrap();
        let h = lof_histogram(&dup).unwrap();
        assert_eq!(h.distinct_patterns(), 1);
        assert_eq!(h.multiplicity(&[1, 1]), 2);
        assert_eq!(h.k_plus(), 2);

        let z = BinaryMatrix::from_rows(&[[1u8, 0], [0, 0]]).unwrap();
        assert!(matches!(lof_histogram(&z), Err(Error::ZeroColumn { column: 1 })));
    }

    #[test]
    fn pattern_values_use_first_row_as_msb() {
        assert_eq!(LofHistogram::pattern_value(&[1, 0, 0]), Some(4));
        assert_eq!(LofHistogram::pattern_value(&[0, 1, 1]), Some(3));
    }

    #[test]
    fn ibp_prior_examples() {
        let empty = BinaryMatrix::zeros(1, 0);
        assert!((log_prior_z_ibp(&empty, 1.0).unwrap() + 1.0).abs() < 1e-15);
        let one = BinaryMatrix::from_rows(&[[1u8]]).unwrap();
        assert!((log_prior_z_ibp(&one, 1.0).unwrap() + 1.0).abs() < 1e-15);
        let zero_col = BinaryMatrix::from_rows(&[[0u8]]).unwrap();
        assert!(log_prior_z_ibp(&zero_col, 1.0).is_err());
    }

    #[test]
    fn ibp_prior_single_row_is_poisson_normalized() {
        // N = 1: the lof class with j copies of [1] has mass e^{-α} α^j / j!.
        for alpha in [0.5, 1.0, 3.0] {
            let total: f64 = (0..60)
                .map(|j| {
                    let z = BinaryMatrix::from_vec(1, j, vec![1; j]).unwrap();
                    log_prior_z_ibp(&z, alpha).unwrap().exp()
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "alpha {alpha}: {total}");
        }
    }
}
