//! Running a chain: initialization, the per-iteration schedule, trace
//! records and posterior summaries.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::gibbs_sweep;
use crate::harness::metrics::{PosteriorSummary, SummaryAccumulator};
use crate::hyper::{update_finite, update_infinite, HyperSteps};
use crate::matrix::BinaryMatrix;
use crate::model::{ModelParams, ZPrior};
use crate::rjmcmc::{rjmcmc_sweep, FiniteState, MoveStats, RjmcmcOptions};
use crate::sampling::bernoulli;
use crate::state::{SamplerState, StateSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    #[default]
    Gibbs,
    Rjmcmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// No causes for Gibbs; one unlinked cause for RJMCMC.
    #[default]
    Empty,
    /// Ten causes, each with a random non-empty column of Z and a random row of Y.
    Random10,
}

pub const RANDOM_INIT_CAUSES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub sampler: SamplerKind,
    pub init: InitMode,
    pub iterations: usize,
    /// Iterations discarded before the summary starts accumulating.
    pub burn_in: usize,
    pub infer_hypers: bool,
    /// Fixed values, or starting values when `infer_hypers` is set.
    pub params: ModelParams,
    pub steps: HyperSteps,
    pub rjmcmc: RjmcmcOptions,
    /// Record wall-clock milliseconds in each trace record.
    pub timing: bool,
    /// Iterations at which a summary of the samples so far is kept.
    pub checkpoints: Vec<usize>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerKind::Gibbs,
            init: InitMode::Empty,
            iterations: 500,
            burn_in: 0,
            infer_hypers: false,
            params: ModelParams::default(),
            steps: HyperSteps::default(),
            rjmcmc: RjmcmcOptions::default(),
            timing: false,
            checkpoints: Vec::new(),
        }
    }
}

/// Scalars of one iteration. Iteration 0 is the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub k: usize,
    pub k_plus: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub p: f64,
    pub alpha: f64,
    /// `None` when the joint probability is zero.
    pub log_joint: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub summary: PosteriorSummary,
    /// Raw sums behind `summary`, for pooling chains.
    pub accumulator: SummaryAccumulator,
    pub checkpoints: Vec<(usize, PosteriorSummary)>,
    pub final_state: StateSnapshot,
    pub moves: MoveStats,
    pub accepts: AcceptCounts,
}

/// Accepted Metropolis proposals over the whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptCounts {
    pub lambda: usize,
    pub epsilon: usize,
    pub alpha: usize,
    pub proposals: usize,
}

enum Chain {
    Infinite(SamplerState),
    Finite(FiniteState),
}

impl Chain {
    fn state(&self) -> &SamplerState {
        match self {
            Chain::Infinite(s) => s,
            Chain::Finite(fs) => &fs.state,
        }
    }

    fn prior(&self) -> ZPrior {
        match self {
            Chain::Infinite(_) => ZPrior::Ibp,
            Chain::Finite(fs) => ZPrior::Finite(fs.k()),
        }
    }
}

/// Z with `k` random non-empty columns and Y with Bernoulli(1/2) entries.
pub fn random_state<R: Rng + ?Sized>(
    n: usize,
    trials: usize,
    k: usize,
    params: ModelParams,
    rng: &mut R,
) -> Result<SamplerState> {
    if n == 0 && k > 0 {
        return Err(Error::InvalidParameter("cannot place causes with N = 0".into()));
    }
    let columns: Vec<Vec<u8>> = (0..k)
        .map(|_| loop {
            let col: Vec<u8> = (0..n).map(|_| bernoulli(0.5, rng) as u8).collect();
            if col.contains(&1) {
                break col;
            }
        })
        .collect();
    let z = BinaryMatrix::from_columns(n, &columns)?;
    let mut y = BinaryMatrix::zeros(k, trials);
    for kk in 0..k {
        for t in 0..trials {
            y.set(kk, t, bernoulli(0.5, rng));
        }
    }
    SamplerState::new(z, y, trials, params)
}

fn initial_chain<R: Rng + ?Sized>(x: &BinaryMatrix, cfg: &ChainConfig, rng: &mut R) -> Result<Chain> {
    let (n, trials) = x.shape();
    let params = cfg.params;
    Ok(match (cfg.sampler, cfg.init) {
        (SamplerKind::Gibbs, InitMode::Empty) => Chain::Infinite(SamplerState::empty(n, trials, params)?),
        (SamplerKind::Gibbs, InitMode::Random10) => {
            Chain::Infinite(random_state(n, trials, RANDOM_INIT_CAUSES, params, rng)?)
        }
        (SamplerKind::Rjmcmc, InitMode::Empty) => {
            Chain::Finite(FiniteState::single_empty(n, trials, params, cfg.rjmcmc, rng)?)
        }
        (SamplerKind::Rjmcmc, InitMode::Random10) => Chain::Finite(FiniteState::new(
            random_state(n, trials, RANDOM_INIT_CAUSES, params, rng)?,
            cfg.rjmcmc,
        )?),
    })
}

fn record(chain: &Chain, x: &BinaryMatrix, iteration: usize, started: Option<Instant>) -> Result<TraceRecord> {
    let s = chain.state();
    let lj = s.log_joint(x, chain.prior())?;
    Ok(TraceRecord {
        iteration,
        k: s.k(),
        k_plus: s.k_plus(),
        epsilon: s.params.epsilon,
        lambda: s.params.lambda,
        p: s.params.p,
        alpha: s.params.alpha,
        log_joint: lj.is_finite().then_some(lj),
        elapsed_ms: started.map(|t0| t0.elapsed().as_secs_f64() * 1e3),
    })
}

/// Runs one chain on `x`. `observer` sees every trace record, starting
/// with iteration 0, together with the state it describes.
pub fn run_chain<R, F>(x: &BinaryMatrix, cfg: &ChainConfig, rng: &mut R, mut observer: F) -> Result<ChainOutput>
where
    R: Rng + ?Sized,
    F: FnMut(&TraceRecord, &SamplerState),
{
    cfg.params.validate()?;
    let started = cfg.timing.then(Instant::now);
    let mut chain = initial_chain(x, cfg, rng)?;
    chain.state().check_data(x)?;
    let n = x.rows();

    observer(&record(&chain, x, 0, started)?, chain.state());

    let mut acc = SummaryAccumulator::new(n);
    let mut checkpoints = Vec::new();
    let mut moves = MoveStats::default();
    let mut accepts = AcceptCounts::default();

    for iteration in 1..=cfg.iterations {
        match &mut chain {
            Chain::Infinite(state) => {
                gibbs_sweep(state, x, rng)?;
                if cfg.infer_hypers {
                    let a = update_infinite(state, x, &cfg.steps, rng)?;
                    accepts.lambda += a.lambda as usize;
                    accepts.epsilon += a.epsilon as usize;
                    accepts.alpha += a.alpha as usize;
                    accepts.proposals += 1;
                }
            }
            Chain::Finite(fs) => {
                let m = rjmcmc_sweep(fs, x, rng)?;
                moves.births_proposed += m.births_proposed;
                moves.births_accepted += m.births_accepted;
                moves.deaths_proposed += m.deaths_proposed;
                moves.deaths_accepted += m.deaths_accepted;
                if cfg.infer_hypers {
                    let a = update_finite(fs, x, &cfg.steps, rng)?;
                    accepts.lambda += a.lambda as usize;
                    accepts.epsilon += a.epsilon as usize;
                    accepts.alpha += a.alpha as usize;
                    accepts.proposals += 1;
                }
            }
        }
        let s = chain.state();
        if iteration > cfg.burn_in {
            acc.push(s.z(), s.k())?;
        }
        if cfg.checkpoints.contains(&iteration) && acc.count() > 0 {
            checkpoints.push((iteration, acc.finish()?));
        }
        observer(&record(&chain, x, iteration, started)?, s);
    }

    let s = chain.state();
    if acc.count() == 0 {
        acc.push(s.z(), s.k())?;
    }
    Ok(ChainOutput {
        summary: acc.finish()?,
        accumulator: acc,
        checkpoints,
        final_state: s.snapshot(),
        moves,
        accepts,
    })
}

/// Parses a JSON-lines trace. A last line that does not parse is
/// reported as truncation.
pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let mut records = Vec::with_capacity(lines.len());
    for (pos, &(lineno, line)) in lines.iter().enumerate() {
        match serde_json::from_str::<TraceRecord>(line) {
            Ok(r) => records.push(r),
            Err(_) if pos + 1 == lines.len() => {
                return Err(Error::TruncatedTrace {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                })
            }
            Err(e) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn data() -> BinaryMatrix {
        BinaryMatrix::from_rows(&[[1u8, 0, 1, 0, 1, 1], [1, 0, 1, 0, 0, 1], [0, 1, 0, 0, 0, 1]]).unwrap()
    }

    fn run(cfg: &ChainConfig, seed: u64) -> (Vec<TraceRecord>, ChainOutput) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trace = Vec::new();
        let out = run_chain(&data(), cfg, &mut rng, |r, _| trace.push(r.clone())).unwrap();
        (trace, out)
    }

    #[test]
    fn zero_iterations_summarize_the_initial_state() {
        for sampler in [SamplerKind::Gibbs, SamplerKind::Rjmcmc] {
            let cfg = ChainConfig {
                sampler,
                iterations: 0,
                ..ChainConfig::default()
            };
            let (trace, out) = run(&cfg, 1);
            assert_eq!(trace.len(), 1);
            assert_eq!(trace[0].iteration, 0);
            assert_eq!(out.summary.sample_count, 1);
            assert_eq!(out.summary.mean_k_plus, 0.0);
            let expected_k = if sampler == SamplerKind::Gibbs { 0 } else { 1 };
            assert_eq!(trace[0].k, expected_k);
            assert_eq!(out.final_state.params, cfg.params);
        }
    }

    #[test]
    fn random10_starts_with_ten_linked_causes() {
        let cfg = ChainConfig {
            init: InitMode::Random10,
            iterations: 0,
            ..ChainConfig::default()
        };
        let (trace, _) = run(&cfg, 2);
        assert_eq!((trace[0].k, trace[0].k_plus), (10, 10));
    }

    #[test]
    fn same_seed_same_trace() {
        for sampler in [SamplerKind::Gibbs, SamplerKind::Rjmcmc] {
            let cfg = ChainConfig {
                sampler,
                iterations: 30,
                infer_hypers: true,
                ..ChainConfig::default()
            };
            let (a, _) = run(&cfg, 9);
            let (b, _) = run(&cfg, 9);
            assert_eq!(a, b);
            assert_eq!(a.len(), 31);
            assert!(a.iter().all(|r| r.elapsed_ms.is_none() && r.k >= r.k_plus));
        }
    }

    #[test]
    fn burn_in_and_checkpoints() {
        let cfg = ChainConfig {
            iterations: 20,
            burn_in: 5,
            checkpoints: vec![3, 10, 20],
            ..ChainConfig::default()
        };
        let (_, out) = run(&cfg, 3);
        assert_eq!(out.summary.sample_count, 15);
        let at: Vec<(usize, usize)> = out.checkpoints.iter().map(|(i, s)| (*i, s.sample_count)).collect();
        assert_eq!(at, vec![(10, 5), (20, 15)]);
        assert_eq!(out.checkpoints[1].1, out.summary);
    }

    #[test]
    fn trace_lines_round_trip_and_truncation_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.jsonl");
        let cfg = ChainConfig {
            iterations: 3,
            timing: true,
            ..ChainConfig::default()
        };
        let (trace, _) = run(&cfg, 4);
        assert!(trace.iter().all(|r| r.elapsed_ms.is_some()));
        let text: String = trace
            .iter()
            .map(|r| serde_json::to_string(r).unwrap() + "\n")
            .collect();
        fs::write(&path, &text).unwrap();
        assert_eq!(read_trace(&path).unwrap(), trace);

        fs::write(&path, &text[..text.len() - 10]).unwrap();
        assert!(matches!(read_trace(&path), Err(Error::TruncatedTrace { line: 4, .. })));

        let broken = text.replacen("{", "[", 1);
        fs::write(&path, broken).unwrap();
        assert!(matches!(read_trace(&path), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn zero_probability_joint_serializes_as_null() {
        let r = TraceRecord {
            iteration: 0,
            k: 0,
            k_plus: 0,
            epsilon: 0.0,
            lambda: 0.9,
            p: 0.1,
            alpha: 1.0,
            log_joint: None,
            elapsed_ms: None,
        };
        let line = serde_json::to_string(&r).unwrap();
        assert!(line.contains("\"log_joint\":null"));
        assert!(!line.contains("elapsed_ms"));
    }
}
