use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use crate::clustering::{kcn_candidates, sample_candidates, SamplingConfig};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::milp::{build_model, export_lp, Linking};
use crate::solver::{solve_exact, solve_restricted, SolveOptions, SolveResult, SolveStatus};

use super::{downsample, mix_seed, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Exact,
    RestrictedCbs,
    RestrictedKcn,
    LpExportOnly,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Exact => "Exact",
            Method::RestrictedCbs => "RestrictedCBS",
            Method::RestrictedKcn => "RestrictedKCN",
            Method::LpExportOnly => "LPExportOnly",
        }
    }

    fn tag(self) -> u64 {
        self as u64
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Method::Exact),
            "cbs" | "restrictedcbs" => Ok(Method::RestrictedCbs),
            "kcn" | "restrictedkcn" => Ok(Method::RestrictedKcn),
            "lp" | "lpexportonly" => Ok(Method::LpExportOnly),
            _ => Err(Error::param(format!("unknown method {s:?}"))),
        }
    }
}

/// Comma-separated method list, e.g. `exact,cbs`.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    list.split(',').map(|m| m.trim().parse()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowStatus {
    Optimal,
    TimedOut,
    Infeasible,
    Exported,
    Failed(String),
}

impl RowStatus {
    fn label(&self) -> String {
        match self {
            RowStatus::Optimal => "Optimal".into(),
            RowStatus::TimedOut => "TimedOut".into(),
            RowStatus::Infeasible => "Infeasible".into(),
            RowStatus::Exported => "Exported".into(),
            RowStatus::Failed(msg) => format!("Failed({})", msg.replace([',', ';', '\n'], " ")),
        }
    }
}

impl From<SolveStatus> for RowStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => RowStatus::Optimal,
            SolveStatus::TimedOut => RowStatus::TimedOut,
            SolveStatus::Infeasible => RowStatus::Infeasible,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchParams {
    pub nbruns: usize,
    pub neighbors: usize,
    pub seed: u64,
    pub time_limit: Option<Duration>,
    pub threads: usize,
    pub linking: Linking,
    /// Where `LpExportOnly` writes its files; `None` only counts bytes.
    pub lp_dir: Option<PathBuf>,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams {
            nbruns: 30,
            neighbors: 10,
            seed: super::DEFAULT_SEED,
            time_limit: None,
            threads: 1,
            linking: Linking::Strong,
            lp_dir: None,
        }
    }
}

impl BenchParams {
    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            time_limit: self.time_limit,
            threads: self.threads.max(1),
            ..SolveOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub n: usize,
    pub k: usize,
    pub method: Method,
    pub status: RowStatus,
    pub value: Option<f64>,
    /// Relative excess over the exact optimum of the same instance, in percent.
    pub gap_percent: Option<f64>,
    pub wall_time: Duration,
    pub nbruns: Option<usize>,
    pub neighbors: Option<usize>,
    pub seed: Option<u64>,
    pub detail: Option<String>,
}

impl BenchRecord {
    fn new(n: usize, k: usize, method: Method) -> Self {
        BenchRecord {
            n,
            k,
            method,
            status: RowStatus::Failed("not run".into()),
            value: None,
            gap_percent: None,
            wall_time: Duration::ZERO,
            nbruns: None,
            neighbors: None,
            seed: None,
            detail: None,
        }
    }

    fn with_result(mut self, res: Result<SolveResult>, started: Instant) -> Self {
        self.wall_time = started.elapsed();
        match res {
            Ok(r) => {
                self.status = r.status.into();
                self.value = r.total_cost();
            }
            Err(e) => self.status = RowStatus::Failed(e.to_string()),
        }
        self
    }

    fn fill_gap(&mut self, exact: Option<f64>) {
        if let (Some(v), Some(e)) = (self.value, exact) {
            self.gap_percent = Some(gap_percent(v, e));
        }
    }

    pub fn params(&self) -> String {
        let mut s = format!("status={}", self.status.label());
        if let Some(b) = self.nbruns {
            let _ = write!(s, ";nbruns={b}");
        }
        if let Some(nb) = self.neighbors {
            let _ = write!(s, ";neighbors={nb}");
        }
        if let Some(seed) = self.seed {
            let _ = write!(s, ";seed={seed}");
        }
        if let Some(d) = &self.detail {
            let _ = write!(s, ";{d}");
        }
        s
    }
}

pub fn gap_percent(value: f64, exact: f64) -> f64 {
    if value == exact {
        0.0
    } else {
        100.0 * (value - exact) / exact.abs()
    }
}

/// Downsamples `master` to every size in `sizes` and runs each method at
/// budget `k`. Gaps refer to the exact optimum of the same instance, which
/// is computed whenever a method other than LP export is requested.
pub fn run_table(master: &Instance, sizes: &[usize], k: usize, methods: &[Method], params: &BenchParams) -> Vec<BenchRecord> {
    let mut out = Vec::new();
    for &size in sizes {
        let inst = downsample(master, size, &mut seeded_rng(mix_seed(params.seed, &[size as u64])))
            .and_then(|d| d.with_k(k));
        let inst = match inst {
            Ok(i) => i,
            Err(e) => {
                for &m in methods {
                    let mut r = BenchRecord::new(size, k, m);
                    r.status = RowStatus::Failed(e.to_string());
                    out.push(r);
                }
                continue;
            }
        };

        let needs_exact = methods.iter().any(|m| *m != Method::LpExportOnly);
        let exact = needs_exact.then(|| {
            let started = Instant::now();
            BenchRecord::new(size, k, Method::Exact).with_result(solve_exact(&inst, &params.solve_options()), started)
        });
        let exact_value = exact
            .as_ref()
            .filter(|r| r.status == RowStatus::Optimal)
            .and_then(|r| r.value);

        for &m in methods {
            let mut rec = match m {
                Method::Exact => exact.clone().expect("computed above"),
                Method::RestrictedCbs => run_cbs(&inst, params, mix_seed(params.seed, &[size as u64, m.tag()])),
                Method::RestrictedKcn => run_kcn(&inst, params.neighbors, params),
                Method::LpExportOnly => run_lp(&inst, params),
            };
            rec.fill_gap(exact_value);
            out.push(rec);
        }
    }
    out
}

fn run_cbs(inst: &Instance, params: &BenchParams, seed: u64) -> BenchRecord {
    let started = Instant::now();
    let mut rec = BenchRecord::new(inst.n(), inst.k(), Method::RestrictedCbs);
    rec.nbruns = Some(params.nbruns);
    rec.seed = Some(seed);
    let config = SamplingConfig {
        threads: params.threads.max(1),
        ..SamplingConfig::new(params.nbruns, inst.k(), seed)
    };
    let res = sample_candidates(inst, &config).and_then(|cm| {
        // the time limit covers sampling and solving together
        let mut opts = params.solve_options();
        opts.time_limit = opts.time_limit.map(|t| t.saturating_sub(started.elapsed()));
        solve_restricted(inst, &cm, &opts)
    });
    rec.with_result(res, started)
}

fn run_kcn(inst: &Instance, neighbors: usize, params: &BenchParams) -> BenchRecord {
    let started = Instant::now();
    let mut rec = BenchRecord::new(inst.n(), inst.k(), Method::RestrictedKcn);
    rec.neighbors = Some(neighbors);
    let res = kcn_candidates(inst, neighbors.min(inst.n()))
        .and_then(|cm| solve_restricted(inst, &cm, &params.solve_options()));
    rec.with_result(res, started)
}

fn run_lp(inst: &Instance, params: &BenchParams) -> BenchRecord {
    let started = Instant::now();
    let mut rec = BenchRecord::new(inst.n(), inst.k(), Method::LpExportOnly);
    let linking = match params.linking {
        Linking::Strong => "strong",
        Linking::Weak => "weak",
    };
    let res = build_model(inst, None, params.linking).and_then(|model| {
        let detail = format!("linking={linking};vars={};rows={}", model.n_vars(), model.n_rows());
        match &params.lp_dir {
            Some(dir) => {
                let path = dir.join(format!("n{}_k{}_{linking}.lp", inst.n(), inst.k()));
                let file = std::io::BufWriter::new(std::fs::File::create(path)?);
                export_lp(&model, file)?;
            }
            None => export_lp(&model, std::io::sink())?,
        }
        Ok(detail)
    });
    rec.wall_time = started.elapsed();
    match res {
        Ok(detail) => {
            rec.status = RowStatus::Exported;
            rec.detail = Some(detail);
        }
        Err(e) => rec.status = RowStatus::Failed(e.to_string()),
    }
    rec
}

/// Restricted solves with k-closest-neighbour maps for every value in
/// `neighbor_values`. `exact` is the optimum used for gaps; it is computed
/// when not supplied.
pub fn run_kcn_sweep(
    instance: &Instance,
    neighbor_values: &[usize],
    exact: Option<f64>,
    params: &BenchParams,
) -> Vec<BenchRecord> {
    let exact = exact.or_else(|| {
        solve_exact(instance, &params.solve_options())
            .ok()
            .filter(|r| r.status == SolveStatus::Optimal)
            .and_then(|r| r.total_cost())
    });
    neighbor_values
        .iter()
        .map(|&nb| {
            let mut rec = run_kcn(instance, nb, params);
            rec.fill_gap(exact);
            rec
        })
        .collect()
}

fn fmt_opt(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
    v.map(f).unwrap_or_default()
}

/// Results table as CSV. Times are left empty unless `with_times`, so
/// that repeated runs produce identical files.
pub fn write_table<W: Write>(records: &[BenchRecord], sink: W, with_times: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["n", "k", "method", "value", "gap_percent", "time_s", "params"])
        .map_err(std::io::Error::from)?;
    for r in records {
        w.write_record([
            r.n.to_string(),
            r.k.to_string(),
            r.method.label().to_string(),
            fmt_opt(r.value, |v| v.to_string()),
            fmt_opt(r.gap_percent, |g| format!("{g:.3}")),
            fmt_opt(with_times.then_some(r.wall_time.as_secs_f64()), |t| format!("{t:.3}")),
            r.params(),
        ])
        .map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

/// Sweep rows as plot data: `neighbors,status,value,gap_percent,time_s`.
pub fn write_sweep<W: Write>(records: &[BenchRecord], sink: W, with_times: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["neighbors", "status", "value", "gap_percent", "time_s"])
        .map_err(std::io::Error::from)?;
    for r in records {
        w.write_record([
            r.neighbors.map(|n| n.to_string()).unwrap_or_default(),
            r.status.label(),
            fmt_opt(r.value, |v| v.to_string()),
            fmt_opt(r.gap_percent, |g| format!("{g:.3}")),
            fmt_opt(with_times.then_some(r.wall_time.as_secs_f64()), |t| format!("{t:.3}")),
        ])
        .map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}
