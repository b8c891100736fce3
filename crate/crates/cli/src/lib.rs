//! Batch front end: `generate`, `fit`, `eval` and `replicate`.
//!
//! Each command reads an optional JSON config (`--config`); flags given on
//! the command line override it. Every output directory gets a
//! `manifest.json` holding the resolved config, which can be passed back
//! through `--config` to reproduce the run.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use hidden_causes::chain::{run_chain, AcceptCounts, ChainConfig, InitMode, SamplerKind, TraceRecord};
use hidden_causes::harness::io::{read_bundle, read_csv, write_bundle};
use hidden_causes::harness::metrics::{in_degree_error, structure_error, PosteriorSummary, SummaryAccumulator};
use hidden_causes::harness::replicate::{aggregate, stream_rng, Fig3Options, Fig4Options, MeanSd};
use hidden_causes::harness::synthetic::{generate_dataset, rejection_sample_z, Structure};
use hidden_causes::rjmcmc::MoveStats;
use hidden_causes::state::StateSnapshot;
use hidden_causes::{BinaryMatrix, Error, ModelParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Model(Error::Degenerate(_)) => EXIT_DEGENERATE,
            CliError::Model(Error::InvalidParameter(_) | Error::UnknownStructure(_)) => EXIT_USAGE,
            CliError::Model(_) => EXIT_DATA,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Model(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Model(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "hidden-causes", version, about = "Infer hidden causes of binary data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset bundle.
    Generate(GenerateArgs),
    /// Run a sampler on a dataset.
    Fit(FitArgs),
    /// Score a fit summary against a ground-truth bundle.
    Eval(EvalArgs),
    /// Run one of the synthetic experiments and tabulate the results.
    Replicate(ReplicateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SamplerArg {
    Gibbs,
    Rjmcmc,
}

impl From<SamplerArg> for SamplerKind {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Gibbs => SamplerKind::Gibbs,
            SamplerArg::Rjmcmc => SamplerKind::Rjmcmc,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    Empty,
    Random10,
}

impl From<InitArg> for InitMode {
    fn from(i: InitArg) -> Self {
        match i {
            InitArg::Empty => InitMode::Empty,
            InitArg::Random10 => InitMode::Random10,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Figure {
    Fig3,
    Fig4,
}

/// Model parameter overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

impl ParamArgs {
    fn apply(&self, params: &mut ModelParams) {
        if let Some(v) = self.epsilon {
            params.epsilon = v;
        }
        if let Some(v) = self.lambda {
            params.lambda = v;
        }
        if let Some(v) = self.p {
            params.p = v;
        }
        if let Some(v) = self.alpha {
            params.alpha = v;
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Canonical structure: degree1, disconnected, undercomplete, overcomplete.
    #[arg(long)]
    pub structure: Option<String>,
    /// Observed variables, when drawing Z from the IBP.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of causes to condition the IBP draw on.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub max_tries: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// A bundle directory or a single X csv file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub sampler: Option<SamplerArg>,
    #[arg(long)]
    pub init: Option<InitArg>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub infer_hypers: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Add wall-clock milliseconds to trace records.
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// `summary.json` written by `fit`.
    #[arg(long)]
    pub summary: PathBuf,
    /// Bundle directory containing `Z.csv`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    #[arg(value_enum)]
    pub figure: Figure,
    #[arg(long)]
    pub datasets: Option<usize>,
    /// Iterations per run (fig3).
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Comma-separated iteration checkpoints (fig4).
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<usize>>,
    /// Comma-separated numbers of causes (fig3).
    #[arg(long, value_delimiter = ',')]
    pub k_values: Option<Vec<usize>>,
    /// Observed variables (fig3).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated structure names (fig4).
    #[arg(long, value_delimiter = ',')]
    pub structures: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub sampler: Option<Vec<SamplerArg>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub params: ParamArgs,
}

/// Resolved settings of `generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub structure: Option<Structure>,
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub max_tries: usize,
    pub seed: u64,
    pub params: ModelParams,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            structure: None,
            n: 6,
            k: 3,
            trials: 500,
            max_tries: 1_000_000,
            seed: 0,
            params: ModelParams::default(),
        }
    }
}

/// Resolved settings of `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub data: Option<PathBuf>,
    pub seed: u64,
    pub chains: usize,
    pub chain: ChainConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            data: None,
            seed: 0,
            chains: 1,
            chain: ChainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "figure", rename_all = "snake_case")]
pub enum ReplicateConfig {
    Fig3(Fig3Options),
    Fig4(Fig4Options),
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest<T> {
    command: String,
    version: String,
    config: T,
}

/// Reads a config file: either the bare config or a manifest holding one.
fn load_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)?;
    let inner = match value {
        Value::Object(ref map) if map.contains_key("command") && map.contains_key("config") => map["config"].clone(),
        other => other,
    };
    Ok(serde_json::from_value(inner)?)
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn write_manifest<T: Serialize>(dir: &Path, command: &str, config: &T) -> CliResult<()> {
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
        },
    )
}

fn thread_pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be >= 1".into()));
        }
        builder = builder.num_threads(j);
    }
    builder.build().map_err(|e| CliError::Usage(e.to_string()))
}

pub fn resolve_generate(args: &GenerateArgs) -> CliResult<GenerateConfig> {
    let mut cfg: GenerateConfig = match &args.config {
        Some(p) => load_config(p)?,
        None => GenerateConfig::default(),
    };
    if let Some(s) = &args.structure {
        cfg.structure = Some(s.parse()?);
    }
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.max_tries {
        cfg.max_tries = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    args.params.apply(&mut cfg.params);
    cfg.params.validate()?;
    Ok(cfg)
}

pub fn cmd_generate(args: &GenerateArgs) -> CliResult<()> {
    let cfg = resolve_generate(args)?;
    let mut rng = stream_rng(cfg.seed, 0);
    let z = match cfg.structure {
        Some(s) => s.matrix(),
        None => rejection_sample_z(cfg.n, cfg.k, cfg.params.alpha, &mut rng, cfg.max_tries)?,
    };
    let ds = generate_dataset(&z, cfg.trials, &cfg.params, &mut rng)?;
    write_bundle(&args.out, &ds)?;
    write_manifest(&args.out, "generate", &cfg)
}

pub fn resolve_fit(args: &FitArgs) -> CliResult<FitConfig> {
    let mut cfg: FitConfig = match &args.config {
        Some(p) => load_config(p)?,
        None => FitConfig::default(),
    };
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    if let Some(v) = args.sampler {
        cfg.chain.sampler = v.into();
    }
    if let Some(v) = args.init {
        cfg.chain.init = v.into();
    }
    if let Some(v) = args.iterations {
        cfg.chain.iterations = v;
    }
    if let Some(v) = args.burn_in {
        cfg.chain.burn_in = v;
    }
    if args.infer_hypers {
        cfg.chain.infer_hypers = true;
    }
    if args.timing {
        cfg.chain.timing = true;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.chains {
        cfg.chains = v;
    }
    args.params.apply(&mut cfg.chain.params);
    cfg.chain.params.validate()?;
    if cfg.chains == 0 {
        return Err(CliError::Usage("--chains must be >= 1".into()));
    }
    if cfg.data.is_none() {
        return Err(CliError::Usage("fit needs --data (or `data` in the config)".into()));
    }
    Ok(cfg)
}

fn load_x(path: &Path) -> CliResult<BinaryMatrix> {
    if path.is_dir() {
        Ok(read_bundle(path)?.x)
    } else {
        Ok(read_csv(path)?)
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub seed: u64,
    pub chains: usize,
    pub n: usize,
    pub mean_k_plus: f64,
    pub mean_k: f64,
    pub sample_count: usize,
    pub mean_zzt: Vec<Vec<f64>>,
    /// Final state of each chain.
    pub final_states: Vec<StateSnapshot>,
    pub moves: Vec<MoveCounts>,
    pub metropolis_accepts: Vec<AcceptCounts>,
    pub config: FitConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MoveCounts {
    pub births_proposed: usize,
    pub births_accepted: usize,
    pub deaths_proposed: usize,
    pub deaths_accepted: usize,
}

impl From<MoveStats> for MoveCounts {
    fn from(m: MoveStats) -> Self {
        Self {
            births_proposed: m.births_proposed,
            births_accepted: m.births_accepted,
            deaths_proposed: m.deaths_proposed,
            deaths_accepted: m.deaths_accepted,
        }
    }
}

impl FitSummary {
    pub fn posterior(&self) -> PosteriorSummary {
        PosteriorSummary {
            n: self.n,
            mean_zzt: self.mean_zzt.iter().flatten().copied().collect(),
            mean_k_plus: self.mean_k_plus,
            mean_k: self.mean_k,
            sample_count: self.sample_count,
        }
    }
}

fn zzt_rows(s: &PosteriorSummary) -> Vec<Vec<f64>> {
    (0..s.n).map(|i| (0..s.n).map(|j| s.zzt(i, j)).collect()).collect()
}

fn format_zzt_csv(s: &PosteriorSummary) -> String {
    zzt_rows(s)
        .iter()
        .map(|r| r.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",") + "\n")
        .collect()
}

struct ChainRun {
    accumulator: SummaryAccumulator,
    final_state: StateSnapshot,
    moves: MoveStats,
    accepts: AcceptCounts,
}

fn run_one_chain(x: &BinaryMatrix, cfg: &FitConfig, index: usize, trace_path: &Path) -> CliResult<ChainRun> {
    let mut rng = stream_rng(cfg.seed, index as u64);
    let mut writer = BufWriter::new(fs::File::create(trace_path)?);
    let mut io_error: Option<io::Error> = None;
    let out = run_chain(x, &cfg.chain, &mut rng, |record: &TraceRecord, _| {
        if io_error.is_none() {
            let line = serde_json::to_string(record).expect("trace records serialize");
            if let Err(e) = writeln!(writer, "{line}") {
                io_error = Some(e);
            }
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    writer.flush()?;
    Ok(ChainRun {
        accumulator: out.accumulator,
        final_state: out.final_state,
        moves: out.moves,
        accepts: out.accepts,
    })
}

pub fn cmd_fit(args: &FitArgs) -> CliResult<FitSummary> {
    let cfg = resolve_fit(args)?;
    let data = cfg.data.clone().expect("checked in resolve_fit");
    let x = load_x(&data)?;
    fs::create_dir_all(&args.out)?;
    let trace_path = |c: usize| {
        if cfg.chains == 1 {
            args.out.join("trace.jsonl")
        } else {
            args.out.join(format!("trace-{c}.jsonl"))
        }
    };
    let pool = thread_pool(args.jobs)?;
    let runs: Vec<CliResult<ChainRun>> = pool.install(|| {
        (0..cfg.chains)
            .into_par_iter()
            .map(|c| run_one_chain(&x, &cfg, c, &trace_path(c)))
            .collect()
    });
    let runs = runs.into_iter().collect::<CliResult<Vec<_>>>()?;

    let mut pooled = SummaryAccumulator::new(x.rows());
    for r in &runs {
        pooled.merge(&r.accumulator)?;
    }
    let posterior = pooled.finish()?;
    fs::write(args.out.join("zzt.csv"), format_zzt_csv(&posterior))?;
    let summary = FitSummary {
        seed: cfg.seed,
        chains: cfg.chains,
        n: posterior.n,
        mean_k_plus: posterior.mean_k_plus,
        mean_k: posterior.mean_k,
        sample_count: posterior.sample_count,
        mean_zzt: zzt_rows(&posterior),
        final_states: runs.iter().map(|r| r.final_state.clone()).collect(),
        moves: runs.iter().map(|r| r.moves.into()).collect(),
        metropolis_accepts: runs.iter().map(|r| r.accepts).collect(),
        config: cfg.clone(),
    };
    write_json(&args.out.join("summary.json"), &summary)?;
    write_manifest(&args.out, "fit", &cfg)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub in_degree_error: f64,
    pub structure_error: f64,
    pub mean_k_plus: f64,
    pub k_true: usize,
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<EvalReport> {
    let summary: FitSummary = serde_json::from_str(&fs::read_to_string(&args.summary)?)?;
    let truth = read_bundle(&args.truth)?
        .truth
        .ok_or_else(|| Error::Precondition(format!("{} has no Z.csv", args.truth.display())))?;
    let posterior = summary.posterior();
    if posterior.mean_zzt.len() != posterior.n * posterior.n {
        return Err(Error::DimensionMismatch("E[ZZ^T] in the summary is not square".into()).into());
    }
    let report = EvalReport {
        in_degree_error: in_degree_error(&posterior, &truth.z)?,
        structure_error: structure_error(&posterior, &truth.z)?,
        mean_k_plus: posterior.mean_k_plus,
        k_true: truth.z.cols(),
    };
    let text = serde_json::to_string_pretty(&report)? + "\n";
    print!("{text}");
    if let Some(out) = &args.out {
        fs::write(out, text)?;
    }
    Ok(report)
}

pub fn resolve_replicate(args: &ReplicateArgs) -> CliResult<ReplicateConfig> {
    let mut cfg = match (&args.config, args.figure) {
        (Some(p), _) => load_config(p)?,
        (None, Figure::Fig3) => ReplicateConfig::Fig3(Fig3Options::default()),
        (None, Figure::Fig4) => ReplicateConfig::Fig4(Fig4Options::default()),
    };
    let samplers: Option<Vec<SamplerKind>> = args.sampler.as_ref().map(|v| v.iter().map(|&s| s.into()).collect());
    match (&mut cfg, args.figure) {
        (ReplicateConfig::Fig3(o), Figure::Fig3) => {
            if let Some(v) = args.datasets {
                o.datasets = v;
            }
            if let Some(v) = args.iterations {
                o.iterations = v;
            }
            if let Some(v) = &args.k_values {
                o.k_values = v.clone();
            }
            if let Some(v) = args.n {
                o.n = v;
            }
            if let Some(v) = args.trials {
                o.trials = v;
            }
            if let Some(v) = samplers {
                o.samplers = v;
            }
            if let Some(v) = args.seed {
                o.seed = v;
            }
            if args.checkpoints.is_some() || args.structures.is_some() {
                return Err(CliError::Usage("--checkpoints and --structures apply to fig4".into()));
            }
            args.params.apply(&mut o.params);
            o.params.validate()?;
        }
        (ReplicateConfig::Fig4(o), Figure::Fig4) => {
            if let Some(v) = args.datasets {
                o.datasets = v;
            }
            if let Some(v) = &args.checkpoints {
                o.checkpoints = v.clone();
            }
            if let Some(v) = args.trials {
                o.trials = v;
            }
            if let Some(v) = &args.structures {
                o.structures = v.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
            }
            if let Some(v) = samplers {
                o.samplers = v;
            }
            if let Some(v) = args.seed {
                o.seed = v;
            }
            if args.iterations.is_some() || args.k_values.is_some() || args.n.is_some() {
                return Err(CliError::Usage("--iterations, --k-values and --n apply to fig3".into()));
            }
            args.params.apply(&mut o.params);
            o.params.validate()?;
        }
        _ => return Err(CliError::Usage("config file is for the other figure".into())),
    }
    Ok(cfg)
}

fn sampler_name(s: SamplerKind) -> &'static str {
    match s {
        SamplerKind::Gibbs => "gibbs",
        SamplerKind::Rjmcmc => "rjmcmc",
    }
}

fn init_name(i: InitMode) -> &'static str {
    match i {
        InitMode::Empty => "empty",
        InitMode::Random10 => "random10",
    }
}

fn fmt_stat(m: &MeanSd) -> String {
    format!("{},{},{}", m.mean, m.sd, m.count)
}

/// Failures are tabulated per job instead of aborting the batch.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicateReport {
    pub table: PathBuf,
    pub runs: usize,
    pub failures: Vec<String>,
}

fn replicate_fig3(o: &Fig3Options, out: &Path, pool: &rayon::ThreadPool) -> CliResult<ReplicateReport> {
    let jobs = o.jobs();
    let results: Vec<_> = pool.install(|| jobs.par_iter().map(|j| (*j, o.run(j))).collect());
    let mut runs = String::from("k_true,sampler,init,dataset,expected_dim,mean_k_plus,mean_k\n");
    let mut runtime = String::from("k_true,sampler,init,dataset,runtime_ms\n");
    let mut failures = Vec::new();
    let mut ok = Vec::new();
    for (job, res) in &results {
        let tag = format!("{},{},{},{}", job.k_true, sampler_name(job.sampler), init_name(job.init), job.dataset);
        match res {
            Ok(r) => {
                runs.push_str(&format!("{tag},{},{},{}\n", r.expected_dim, r.mean_k_plus, r.mean_k));
                runtime.push_str(&format!("{tag},{:.3}\n", r.runtime_ms));
                ok.push(r.clone());
            }
            Err(e) => failures.push(format!("{tag}: {e}")),
        }
    }
    let table_rows = aggregate(
        ok.iter()
            .map(|r| ((r.job.k_true, r.job.sampler, r.job.init), r.expected_dim)),
    );
    let mut table = String::from("k_true,sampler,init,expected_dim_mean,expected_dim_sd,datasets,failed\n");
    for ((k, s, i), stat) in &table_rows {
        let failed = results
            .iter()
            .filter(|(j, r)| r.is_err() && j.k_true == *k && j.sampler == *s && j.init == *i)
            .count();
        table.push_str(&format!("{k},{},{},{},{failed}\n", sampler_name(*s), init_name(*i), fmt_stat(stat)));
    }
    fs::write(out.join("runs.csv"), runs)?;
    fs::write(out.join("runtime.csv"), runtime)?;
    let table_path = out.join("table.csv");
    fs::write(&table_path, table)?;
    Ok(ReplicateReport {
        table: table_path,
        runs: ok.len(),
        failures,
    })
}

fn replicate_fig4(o: &Fig4Options, out: &Path, pool: &rayon::ThreadPool) -> CliResult<ReplicateReport> {
    let jobs = o.jobs();
    let results: Vec<_> = pool.install(|| jobs.par_iter().map(|j| (*j, o.run(j))).collect());
    let mut runs = String::from("structure,sampler,dataset,iteration,in_degree_error,structure_error\n");
    let mut runtime = String::from("structure,sampler,dataset,iteration,runtime_ms\n");
    let mut failures = Vec::new();
    let mut points = Vec::new();
    for (job, res) in &results {
        let tag = format!("{},{},{}", job.structure, sampler_name(job.sampler), job.dataset);
        match res {
            Ok(ps) => {
                for p in ps {
                    runs.push_str(&format!("{tag},{},{},{}\n", p.iteration, p.in_degree_error, p.structure_error));
                    runtime.push_str(&format!("{tag},{},{:.3}\n", p.iteration, p.runtime_ms));
                }
                points.extend(ps.iter().cloned());
            }
            Err(e) => failures.push(format!("{tag}: {e}")),
        }
    }
    let key = |p: &hidden_causes::harness::replicate::Fig4Point| (p.job.structure, p.job.sampler, p.iteration);
    let indeg = aggregate(points.iter().map(|p| (key(p), p.in_degree_error)));
    let structure = aggregate(points.iter().map(|p| (key(p), p.structure_error)));
    let mut table = String::from(
        "structure,sampler,iteration,in_degree_mean,in_degree_sd,in_degree_n,structure_mean,structure_sd,structure_n\n",
    );
    for (((st, s, it), a), (_, b)) in indeg.iter().zip(&structure) {
        table.push_str(&format!("{st},{},{it},{},{}\n", sampler_name(*s), fmt_stat(a), fmt_stat(b)));
    }
    fs::write(out.join("runs.csv"), runs)?;
    fs::write(out.join("runtime.csv"), runtime)?;
    let table_path = out.join("table.csv");
    fs::write(&table_path, table)?;
    Ok(ReplicateReport {
        table: table_path,
        runs: points.len(),
        failures,
    })
}

pub fn cmd_replicate(args: &ReplicateArgs) -> CliResult<ReplicateReport> {
    let cfg = resolve_replicate(args)?;
    let pool = thread_pool(args.jobs)?;
    fs::create_dir_all(&args.out)?;
    let report = match &cfg {
        ReplicateConfig::Fig3(o) => replicate_fig3(o, &args.out, &pool)?,
        ReplicateConfig::Fig4(o) => replicate_fig4(o, &args.out, &pool)?,
    };
    write_manifest(&args.out, "replicate", &cfg)?;
    if !report.failures.is_empty() {
        write_json(&args.out.join("failures.json"), &json!(report.failures))?;
        for f in &report.failures {
            eprintln!("failed: {f}");
        }
    }
    Ok(report)
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Fit(a) => cmd_fit(a).map(|_| ()),
        Command::Eval(a) => cmd_eval(a).map(|_| ()),
        Command::Replicate(a) => cmd_replicate(a).map(|_| ()),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
