use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use duocover::clustering::{kcn_candidates, sample_candidates, SamplingConfig};
use duocover::instance::DEFAULT_ROUTING_FACTOR;
use duocover::io::{read_candidates, read_params, read_sites, write_candidates, write_sites, InstanceParams};
use duocover::milp::{build_model, export_lp, Linking};
use duocover::pipeline::{
    downsample, generate_master, parse_methods, run_kcn_sweep, run_table, seeded_rng, write_sweep, write_table,
    mix_seed, BenchParams, SpatialProfile, DEFAULT_SEED,
};
use duocover::solver::{solve_exact, solve_restricted, SolveOptions, SolveStatus};
use duocover::{Error, Instance, Result};

#[derive(Parser)]
#[command(name = "duocover", version, about = "Dual-parented metro-node placement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve exactly, or restricted to a candidate map; writes JSON.
    Solve(SolveArgs),
    /// Generate a candidate map (CSV).
    Sample(SampleArgs),
    /// Write the integer program in LP format.
    ExportLp(ExportArgs),
    /// Generate a synthetic master instance (CSV).
    Gen(GenArgs),
    /// Aggregate an instance into fewer sites by weighted k-means.
    Downsample(DownsampleArgs),
    /// Benchmark tables and the k-closest-neighbour sweep (CSV).
    Bench(BenchArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Site CSV with header `id,x,y,load,alpha`.
    #[arg(long, short)]
    input: PathBuf,
    /// Sidecar JSON with `k` and/or `routing_factor`; flags take precedence.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, short)]
    k: Option<usize>,
    #[arg(long)]
    routing_factor: Option<f64>,
}

impl InstanceArgs {
    fn load(&self) -> Result<Instance> {
        let side = match &self.params {
            Some(p) => read_params(p)?,
            None => InstanceParams::default(),
        };
        let k = self
            .k
            .or(side.k)
            .ok_or_else(|| Error::Parameter("k is required (--k or a params file)".into()))?;
        let rf = self.routing_factor.or(side.routing_factor).unwrap_or(DEFAULT_ROUTING_FACTOR);
        Instance::new(read_sites(&self.input)?, k, rf)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Candidate map CSV (`site_id,candidate_id`); omitted means all sites.
    #[arg(long)]
    candidates: Option<PathBuf>,
    /// Seconds before returning the best solution found.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Include the wall time in the JSON.
    #[arg(long)]
    record_times: bool,
    /// Output path; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SampleMethod {
    Cbs,
    Kcn,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum)]
    method: SampleMethod,
    /// Clustering runs (cbs only).
    #[arg(long, default_value_t = 30)]
    nbruns: usize,
    /// Neighbours per site (kcn only, required).
    #[arg(long)]
    neighbors: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LinkingArg {
    Strong,
    Weak,
}

impl From<LinkingArg> for Linking {
    fn from(l: LinkingArg) -> Self {
        match l {
            LinkingArg::Strong => Linking::Strong,
            LinkingArg::Weak => Linking::Weak,
        }
    }
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    candidates: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "strong")]
    linking: LinkingArg,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProfileArg {
    Uniform,
    Towns,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, short)]
    n: usize,
    #[arg(long, value_enum, default_value = "towns")]
    profile: ProfileArg,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DownsampleArgs {
    #[arg(long, short)]
    input: PathBuf,
    /// Number of sites to keep.
    #[arg(long, short)]
    m: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Master instance CSV.
    #[arg(long, short)]
    input: PathBuf,
    /// Comma-separated instance sizes for the results table.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, short)]
    k: usize,
    /// Comma-separated subset of exact, cbs, kcn, lp.
    #[arg(long, default_value = "exact,cbs")]
    methods: String,
    #[arg(long, default_value_t = 30)]
    nbruns: usize,
    #[arg(long, default_value_t = 10)]
    neighbors: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, value_enum, default_value = "strong")]
    linking: LinkingArg,
    #[arg(long)]
    routing_factor: Option<f64>,
    /// Directory for LP files of the `lp` method.
    #[arg(long)]
    lp_dir: Option<PathBuf>,
    /// Results table CSV; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Neighbour values `start:end:step` for the sweep.
    #[arg(long, requires = "sweep_output")]
    sweep: Option<String>,
    /// Instance size for the sweep; the master itself when omitted.
    #[arg(long, requires = "sweep")]
    sweep_size: Option<usize>,
    #[arg(long, requires = "sweep")]
    sweep_output: Option<PathBuf>,
    /// Fill the time_s columns (makes output run-dependent).
    #[arg(long)]
    record_times: bool,
}

fn seed_or_default(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("DUOCOVER_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Parameter(format!("DUOCOVER_SEED is not an integer: {v:?}"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn time_limit(secs: Option<f64>) -> Result<Option<Duration>> {
    secs.map(|s| Duration::try_from_secs_f64(s).map_err(|_| Error::Parameter(format!("invalid time limit {s}"))))
        .transpose()
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_range(range: &str) -> Result<Vec<usize>> {
    let bad = || Error::Parameter(format!("sweep range must be start:end[:step], got {range:?}"));
    let parts: Vec<usize> = range
        .split(':')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, end, step) = match parts[..] {
        [a, b] => (a, b, 1),
        [a, b, s] if s > 0 => (a, b, s),
        _ => return Err(bad()),
    };
    Ok((start..=end).step_by(step).collect())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve(a) => {
            let inst = a.instance.load()?;
            let opts = SolveOptions {
                time_limit: time_limit(a.time_limit)?,
                threads: a.threads.max(1),
                ..SolveOptions::default()
            };
            let res = match &a.candidates {
                Some(p) => solve_restricted(&inst, &read_candidates(p, inst.n())?, &opts)?,
                None => solve_exact(&inst, &opts)?,
            };
            let mut out = sink(a.output.as_deref())?;
            serde_json::to_writer_pretty(&mut out, &res.report(a.record_times))?;
            writeln!(out)?;
            out.flush()?;
            Ok(if res.status == SolveStatus::Infeasible {
                eprintln!("infeasible");
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Sample(a) => {
            let inst = a.instance.load()?;
            let cm = match (a.method, a.neighbors) {
                (SampleMethod::Kcn, Some(nb)) => kcn_candidates(&inst, nb)?,
                (SampleMethod::Kcn, None) => return Err(Error::Parameter("--method kcn needs --neighbors".into())),
                (SampleMethod::Cbs, Some(_)) => {
                    return Err(Error::Parameter("--neighbors applies to --method kcn only".into()))
                }
                (SampleMethod::Cbs, None) => {
                    let config = SamplingConfig {
                        threads: a.threads.max(1),
                        ..SamplingConfig::new(a.nbruns, inst.k(), seed_or_default(a.seed)?)
                    };
                    sample_candidates(&inst, &config)?
                }
            };
            write_candidates(&cm, sink(a.output.as_deref())?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportLp(a) => {
            let inst = a.instance.load()?;
            let cm = a.candidates.as_ref().map(|p| read_candidates(p, inst.n())).transpose()?;
            let model = build_model(&inst, cm.as_ref(), a.linking.into())?;
            let mut out = sink(a.output.as_deref())?;
            export_lp(&model, &mut out)?;
            out.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen(a) => {
            let profile = match a.profile {
                ProfileArg::Uniform => SpatialProfile::Uniform,
                ProfileArg::Towns => SpatialProfile::ClusteredTowns,
            };
            let inst = generate_master(a.n, profile, &mut seeded_rng(seed_or_default(a.seed)?))?;
            write_sites(inst.sites(), sink(a.output.as_deref())?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Downsample(a) => {
            let inst = Instance::new(read_sites(&a.input)?, 1, DEFAULT_ROUTING_FACTOR)?;
            let out = downsample(&inst, a.m, &mut seeded_rng(seed_or_default(a.seed)?))?;
            write_sites(out.sites(), sink(a.output.as_deref())?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench(a) => {
            let rf = a.routing_factor.unwrap_or(DEFAULT_ROUTING_FACTOR);
            let master = Instance::new(read_sites(&a.input)?, 1, rf)?;
            let params = BenchParams {
                nbruns: a.nbruns,
                neighbors: a.neighbors,
                seed: seed_or_default(a.seed)?,
                time_limit: time_limit(a.time_limit)?,
                threads: a.threads.max(1),
                linking: a.linking.into(),
                lp_dir: a.lp_dir.clone(),
            };
            if a.sizes.is_empty() && a.sweep.is_none() {
                return Err(Error::Parameter("bench needs --sizes and/or --sweep".into()));
            }
            if !a.sizes.is_empty() {
                let methods = parse_methods(&a.methods)?;
                let records = run_table(&master, &a.sizes, a.k, &methods, &params);
                write_table(&records, sink(a.output.as_deref())?, a.record_times)?;
            }
            if let (Some(range), Some(path)) = (&a.sweep, &a.sweep_output) {
                let values = parse_range(range)?;
                let inst = match a.sweep_size {
                    Some(m) => downsample(&master, m, &mut seeded_rng(mix_seed(params.seed, &[m as u64])))?,
                    None => master,
                }
                .with_k(a.k)?;
                let values: Vec<usize> = values.into_iter().filter(|&v| v >= 1 && v <= inst.n()).collect();
                let records = run_kcn_sweep(&inst, &values, None, &params);
                write_sweep(&records, sink(Some(path))?, a.record_times)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
