//! Synthetic data: structures, rejection sampling from the IBP and the
//! forward model for Y and X.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::io::parse_csv;
use crate::ibp::sample_ibp;
use crate::matrix::BinaryMatrix;
use crate::model::{noisy_or_prob, ModelParams};
use crate::sampling::bernoulli;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub z: BinaryMatrix,
    pub y: BinaryMatrix,
    pub params: ModelParams,
}

/// Observations, optionally with the structure that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: BinaryMatrix,
    pub truth: Option<GroundTruth>,
}

impl Dataset {
    pub fn new(x: BinaryMatrix, truth: Option<GroundTruth>) -> Result<Self> {
        if let Some(t) = &truth {
            if t.z.rows() != x.rows() {
                return Err(Error::dims(format!(
                    "true Z has {} rows, X has {}",
                    t.z.rows(),
                    x.rows()
                )));
            }
            if let Some(c) = t.z.col_sums().iter().position(|&m| m == 0) {
                return Err(Error::ZeroColumn { column: c });
            }
        }
        Ok(Self { x, truth })
    }
}

/// Draws from the IBP until exactly `k_target` columns appear.
pub fn rejection_sample_z<R: Rng + ?Sized>(
    n: usize,
    k_target: usize,
    alpha: f64,
    rng: &mut R,
    max_tries: usize,
) -> Result<BinaryMatrix> {
    if max_tries == 0 {
        return Err(Error::InvalidParameter("max_tries must be >= 1".into()));
    }
    for _ in 0..max_tries {
        let z = sample_ibp(n, alpha, rng);
        if z.cols() == k_target {
            return Ok(z);
        }
    }
    Err(Error::RejectionExhausted {
        tries: max_tries,
        target: k_target,
        rate_bound: 1.0 / max_tries as f64,
    })
}

/// Y_true with i.i.d. Bernoulli(p) entries, then each x_{i,t} from the noisy-OR.
pub fn generate_dataset<R: Rng + ?Sized>(
    z_true: &BinaryMatrix,
    trials: usize,
    params: &ModelParams,
    rng: &mut R,
) -> Result<Dataset> {
    params.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParameter("T must be >= 1".into()));
    }
    let k = z_true.cols();
    let n = z_true.rows();
    let mut y = BinaryMatrix::zeros(k, trials);
    for kk in 0..k {
        for t in 0..trials {
            y.set(kk, t, bernoulli(params.p, rng));
        }
    }
    let mut x = BinaryMatrix::zeros(n, trials);
    for i in 0..n {
        let zi = z_true.row(i);
        for t in 0..trials {
            let active = (0..k).filter(|&kk| zi[kk] == 1 && y.get(kk, t)).count() as u32;
            x.set(i, t, bernoulli(noisy_or_prob(active, params), rng));
        }
    }
    Dataset::new(
        x,
        Some(GroundTruth {
            z: z_true.clone(),
            y,
            params: *params,
        }),
    )
}

/// The four fixed structures of the structure-recovery experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    /// 6×6 identity, K = 6.
    Degree1,
    /// N = 8, K = 4, two causes per disjoint block of four observations.
    Disconnected,
    /// Seeded random 8×4.
    Undercomplete,
    /// Seeded random 6×8.
    Overcomplete,
}

impl Structure {
    pub const ALL: [Structure; 4] = [
        Structure::Degree1,
        Structure::Disconnected,
        Structure::Undercomplete,
        Structure::Overcomplete,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Structure::Degree1 => "degree1",
            Structure::Disconnected => "disconnected",
            Structure::Undercomplete => "undercomplete",
            Structure::Overcomplete => "overcomplete",
        }
    }

    fn source(self) -> &'static str {
        match self {
            Structure::Degree1 => include_str!("../../data/structures/degree1.csv"),
            Structure::Disconnected => include_str!("../../data/structures/disconnected.csv"),
            Structure::Undercomplete => include_str!("../../data/structures/undercomplete.csv"),
            Structure::Overcomplete => include_str!("../../data/structures/overcomplete.csv"),
        }
    }

    pub fn matrix(self) -> BinaryMatrix {
        parse_csv(self.source(), Path::new(self.name())).expect("shipped structure files parse")
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Structure::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::UnknownStructure(s.to_string()))
    }
}

pub fn canonical_structure(name: &str) -> Result<BinaryMatrix> {
    Ok(name.parse::<Structure>()?.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn structures_have_documented_shapes() {
        let d = canonical_structure("degree1").unwrap();
        assert_eq!(d, BinaryMatrix::identity(6));
        assert!(d.col_sums().iter().all(|&m| m == 1));
        assert!((0..6).all(|i| d.row_sum(i) == 1));

        let dis = canonical_structure("disconnected").unwrap();
        assert_eq!(dis.shape(), (8, 4));
        let g = dis.gram();
        for i in 0..4 {
            for j in 4..8 {
                assert_eq!(g[i * 8 + j], 0.0);
            }
        }

        assert_eq!(canonical_structure("undercomplete").unwrap().shape(), (8, 4));
        let over = canonical_structure("overcomplete").unwrap();
        assert_eq!(over.shape(), (6, 8));
        assert!(over.cols() > over.rows());

        for s in Structure::ALL {
            let z = s.matrix();
            assert!((0..z.rows()).all(|i| z.row_sum(i) >= 1), "{s}");
            assert!(z.col_sums().iter().all(|&m| m >= 1), "{s}");
        }
        assert!(matches!(canonical_structure("ring"), Err(Error::UnknownStructure(_))));
    }

    #[test]
    fn rejection_sampling_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = rejection_sample_z(4, 0, 0.05, &mut rng, 100).unwrap();
        assert_eq!(z.shape(), (4, 0));
        assert!(matches!(
            rejection_sample_z(4, 1, 0.0, &mut rng, 50),
            Err(Error::RejectionExhausted { tries: 50, .. })
        ));
        let z = rejection_sample_z(6, 3, 3.0, &mut rng, 10_000).unwrap();
        assert_eq!(z.cols(), 3);
    }

    #[test]
    fn generated_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = canonical_structure("undercomplete").unwrap();
        let quiet = ModelParams::new(0.0, 0.9, 0.0, 3.0).unwrap();
        let ds = generate_dataset(&z, 40, &quiet, &mut rng).unwrap();
        assert_eq!(ds.x.shape(), (8, 40));
        assert_eq!(ds.x.count_ones(), 0);

        let loud = ModelParams::new(0.0, 1.0, 1.0, 3.0).unwrap();
        let ds = generate_dataset(&z, 40, &loud, &mut rng).unwrap();
        assert_eq!(ds.x.count_ones(), 8 * 40);
        assert!(generate_dataset(&z, 0, &loud, &mut rng).is_err());
    }

    #[test]
    fn single_cause_activation_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = BinaryMatrix::from_rows(&[[1u8]]).unwrap();
        let params = ModelParams::new(0.01, 0.9, 0.1, 1.0).unwrap();
        let trials = 100_000;
        let ds = generate_dataset(&z, trials, &params, &mut rng).unwrap();
        let rate = ds.x.count_ones() as f64 / trials as f64;
        let expect: f64 = 0.1 * 0.901 + 0.9 * 0.01;
        assert!((expect - 0.0991).abs() < 1e-12);
        let se = (expect * (1.0 - expect) / trials as f64).sqrt();
        assert!((rate - expect).abs() < 3.0 * se, "{rate}");
    }
}
