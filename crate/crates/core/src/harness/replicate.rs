//! The two synthetic experiments as lists of independent jobs plus
//! aggregation into mean and standard deviation per condition.
//!
//! Every job derives its random streams from the base seed and its own
//! coordinates, so results do not depend on the order or parallelism in
//! which jobs are run.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{run_chain, ChainConfig, InitMode, SamplerKind};
use crate::error::Result;
use crate::harness::metrics::{in_degree_error, structure_error};
use crate::harness::synthetic::{generate_dataset, rejection_sample_z, Dataset, Structure};
use crate::model::ModelParams;

/// A ChaCha8 generator on stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const DATA_STREAM: u64 = 1 << 40;
const CHAIN_STREAM: u64 = 2 << 40;

fn sampler_code(s: SamplerKind) -> u64 {
    match s {
        SamplerKind::Gibbs => 0,
        SamplerKind::Rjmcmc => 1,
    }
}

fn init_code(i: InitMode) -> u64 {
    match i {
        InitMode::Empty => 0,
        InitMode::Random10 => 1,
    }
}

fn structure_code(s: Structure) -> u64 {
    Structure::ALL.iter().position(|&t| t == s).expect("listed") as u64
}

/// Recovering the number of causes from IBP-drawn structures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig3Options {
    pub n: usize,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub datasets: usize,
    pub iterations: usize,
    pub params: ModelParams,
    pub samplers: Vec<SamplerKind>,
    pub inits: Vec<InitMode>,
    pub max_tries: usize,
    pub seed: u64,
}

impl Default for Fig3Options {
    fn default() -> Self {
        Self {
            n: 6,
            k_values: vec![1, 2, 3, 4],
            trials: 500,
            datasets: 10,
            iterations: 500,
            params: ModelParams::default(),
            samplers: vec![SamplerKind::Gibbs, SamplerKind::Rjmcmc],
            inits: vec![InitMode::Empty, InitMode::Random10],
            max_tries: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fig3Job {
    pub k_true: usize,
    pub dataset: usize,
    pub sampler: SamplerKind,
    pub init: InitMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3Result {
    pub job: Fig3Job,
    /// E[K₊] for Gibbs, E[K] for RJMCMC.
    pub expected_dim: f64,
    pub mean_k_plus: f64,
    pub mean_k: f64,
    pub runtime_ms: f64,
}

impl Fig3Options {
    pub fn jobs(&self) -> Vec<Fig3Job> {
        let mut jobs = Vec::new();
        for &k_true in &self.k_values {
            for &sampler in &self.samplers {
                for &init in &self.inits {
                    for dataset in 0..self.datasets {
                        jobs.push(Fig3Job {
                            k_true,
                            dataset,
                            sampler,
                            init,
                        });
                    }
                }
            }
        }
        jobs
    }

    /// Dataset `dataset` of the K = `k_true` condition; shared by all samplers.
    pub fn dataset(&self, k_true: usize, dataset: usize) -> Result<Dataset> {
        let mut rng = stream_rng(self.seed, DATA_STREAM | (k_true as u64) << 20 | dataset as u64);
        let z = rejection_sample_z(self.n, k_true, self.params.alpha, &mut rng, self.max_tries)?;
        generate_dataset(&z, self.trials, &self.params, &mut rng)
    }

    pub fn chain_config(&self, job: &Fig3Job) -> ChainConfig {
        ChainConfig {
            sampler: job.sampler,
            init: job.init,
            iterations: self.iterations,
            params: self.params,
            ..ChainConfig::default()
        }
    }

    pub fn run(&self, job: &Fig3Job) -> Result<Fig3Result> {
        let ds = self.dataset(job.k_true, job.dataset)?;
        let stream = CHAIN_STREAM
            | (job.k_true as u64) << 24
            | (job.dataset as u64) << 4
            | sampler_code(job.sampler) << 1
            | init_code(job.init);
        let mut rng = stream_rng(self.seed, stream);
        let started = Instant::now();
        let out = run_chain(&ds.x, &self.chain_config(job), &mut rng, |_, _| {})?;
        let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
        let expected_dim = match job.sampler {
            SamplerKind::Gibbs => out.summary.mean_k_plus,
            SamplerKind::Rjmcmc => out.summary.mean_k,
        };
        Ok(Fig3Result {
            job: *job,
            expected_dim,
            mean_k_plus: out.summary.mean_k_plus,
            mean_k: out.summary.mean_k,
            runtime_ms,
        })
    }
}

/// Recovering fixed structures, with errors tracked at checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig4Options {
    pub structures: Vec<Structure>,
    pub trials: usize,
    pub datasets: usize,
    pub checkpoints: Vec<usize>,
    pub params: ModelParams,
    pub samplers: Vec<SamplerKind>,
    pub seed: u64,
}

impl Default for Fig4Options {
    fn default() -> Self {
        Self {
            structures: Structure::ALL.to_vec(),
            trials: 150,
            datasets: 10,
            checkpoints: vec![10, 25, 50, 100, 200, 500],
            params: ModelParams::default(),
            samplers: vec![SamplerKind::Gibbs, SamplerKind::Rjmcmc],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fig4Job {
    pub structure: Structure,
    pub dataset: usize,
    pub sampler: SamplerKind,
}

/// Errors of the summary over iterations 1..=`iteration`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig4Point {
    pub job: Fig4Job,
    pub iteration: usize,
    pub in_degree_error: f64,
    pub structure_error: f64,
    pub runtime_ms: f64,
}

impl Fig4Options {
    pub fn iterations(&self) -> usize {
        self.checkpoints.iter().copied().max().unwrap_or(0)
    }

    pub fn jobs(&self) -> Vec<Fig4Job> {
        let mut jobs = Vec::new();
        for &structure in &self.structures {
            for &sampler in &self.samplers {
                for dataset in 0..self.datasets {
                    jobs.push(Fig4Job {
                        structure,
                        dataset,
                        sampler,
                    });
                }
            }
        }
        jobs
    }

    pub fn dataset(&self, structure: Structure, dataset: usize) -> Result<Dataset> {
        let mut rng = stream_rng(
            self.seed,
            DATA_STREAM | 1 << 36 | structure_code(structure) << 20 | dataset as u64,
        );
        generate_dataset(&structure.matrix(), self.trials, &self.params, &mut rng)
    }

    pub fn run(&self, job: &Fig4Job) -> Result<Vec<Fig4Point>> {
        let ds = self.dataset(job.structure, job.dataset)?;
        let z_true = &ds.truth.as_ref().expect("generated data has truth").z;
        let stream = CHAIN_STREAM
            | 1 << 36
            | structure_code(job.structure) << 24
            | (job.dataset as u64) << 4
            | sampler_code(job.sampler) << 1;
        let mut rng = stream_rng(self.seed, stream);
        let cfg = ChainConfig {
            sampler: job.sampler,
            init: InitMode::Empty,
            iterations: self.iterations(),
            params: self.params,
            checkpoints: self.checkpoints.clone(),
            ..ChainConfig::default()
        };
        let started = Instant::now();
        let mut times = BTreeMap::new();
        let out = run_chain(&ds.x, &cfg, &mut rng, |r, _| {
            if cfg.checkpoints.contains(&r.iteration) {
                times.insert(r.iteration, started.elapsed().as_secs_f64() * 1e3);
            }
        })?;
        out.checkpoints
            .iter()
            .map(|(iteration, summary)| {
                Ok(Fig4Point {
                    job: *job,
                    iteration: *iteration,
                    in_degree_error: in_degree_error(summary, z_true)?,
                    structure_error: structure_error(summary, z_true)?,
                    runtime_ms: times.get(iteration).copied().unwrap_or(0.0),
                })
            })
            .collect()
    }
}

/// Mean and sample standard deviation of one condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self {
                mean: f64::NAN,
                sd: f64::NAN,
                count,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, sd, count }
    }
}

/// Groups values by key (in key order) and summarizes each group.
pub fn aggregate<K: Ord + Clone>(items: impl IntoIterator<Item = (K, f64)>) -> Vec<(K, MeanSd)> {
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for (k, v) in items {
        groups.entry(k).or_default().push(v);
    }
    groups.into_iter().map(|(k, v)| (k, MeanSd::of(&v))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_sd_over_two_runs() {
        let m = MeanSd::of(&[1.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.sd - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(MeanSd::of(&[4.0]).sd, 0.0);
        assert!(MeanSd::of(&[]).mean.is_nan());
    }

    #[test]
    fn aggregation_groups_by_key() {
        let rows = aggregate(vec![(("b", 1), 1.0), (("a", 2), 5.0), (("b", 1), 3.0)]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].0, ("a", 2));
        assert_eq!(rows[1].1.mean, 2.0);
    }

    #[test]
    fn datasets_are_shared_across_samplers_and_reproducible() {
        let opts = Fig3Options {
            n: 4,
            k_values: vec![2],
            trials: 20,
            datasets: 2,
            iterations: 3,
            ..Fig3Options::default()
        };
        let a = opts.dataset(2, 1).unwrap();
        assert_eq!(a, opts.dataset(2, 1).unwrap());
        assert_ne!(a, opts.dataset(2, 0).unwrap());
        assert_eq!(a.truth.as_ref().unwrap().z.cols(), 2);
        assert_eq!(opts.jobs().len(), 2 * 2 * 2);
        let job = opts.jobs()[3];
        let r1 = opts.run(&job).unwrap();
        let r2 = opts.run(&job).unwrap();
        assert_eq!(r1.expected_dim, r2.expected_dim);
    }

    #[test]
    fn fig4_points_cover_checkpoints() {
        let opts = Fig4Options {
            structures: vec![Structure::Degree1],
            trials: 30,
            datasets: 1,
            checkpoints: vec![2, 5],
            samplers: vec![SamplerKind::Gibbs],
            ..Fig4Options::default()
        };
        let points = opts.run(&opts.jobs()[0]).unwrap();
        let its: Vec<usize> = points.iter().map(|p| p.iteration).collect();
        assert_eq!(its, vec![2, 5]);
        assert!(points.iter().all(|p| p.structure_error >= 0.0 && p.in_degree_error >= 0.0));
    }
}
