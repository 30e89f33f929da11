//! Benchmark grids and data profiles over "relative Hessians seen".
//!
//! For a run on problem `p`, `N_p(τ)` is the budget spent until the first
//! iterate with `f(xₖ) ≤ f* + τ(f(x₀) − f*)`, or `∞` if that never happens
//! within [`PROFILE_MAX_ITER`] iterations. The data profile of a solver is
//! `π(α) = |{p : N_p(τ) ≤ α}| / |P|`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problems::{ObjectiveProblem, ProblemSelector};
use crate::scalar::{lit, to_f64, Scalar};
use crate::solver::{self, write_trace_csv, IterationTrace, SolverConfig, SolverMode};

/// Iteration cap applied when reading budgets off a trace.
pub const PROFILE_MAX_ITER: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetMetric {
    /// Cumulative `Σ (lₖ/d)²`.
    RelHessians,
    /// Elapsed seconds in the solver loop.
    Runtime,
}

/// `N_p(τ)` read off a trace; `f64::INFINITY` if the target is never met.
pub fn solved_budget(trace: &[IterationTrace], f0: f64, f_star: f64, tau: f64, metric: BudgetMetric) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidInput(format!("tau must lie in (0, 1), got {tau}")));
    }
    if !(f0 > f_star) {
        return Err(Error::InvalidProblem(format!("f(x0) = {f0} does not exceed f* = {f_star}")));
    }
    let bar = f_star + tau * (f0 - f_star);
    Ok(trace
        .iter()
        .take_while(|t| t.k <= PROFILE_MAX_ITER)
        .find(|t| t.f <= bar)
        .map_or(f64::INFINITY, |t| match metric {
            BudgetMetric::RelHessians => t.cum_rel_hessians,
            BudgetMetric::Runtime => t.wall_time_s,
        }))
}

/// A solver configuration with a stable identifier.
///
/// The fixed sketch size of R-ARC may be given as a fraction of the problem
/// dimension, resolved per problem.
#[derive(Debug, Clone)]
pub struct SolverSpec<T: Scalar> {
    pub id: String,
    pub config: SolverConfig<T>,
    pub sketch_fraction: Option<f64>,
}

impl<T: Scalar> SolverSpec<T> {
    pub fn new(id: impl Into<String>, config: SolverConfig<T>) -> Self {
        Self { id: id.into(), config, sketch_fraction: None }
    }

    pub fn arc() -> Self {
        Self::new("arc", SolverConfig::arc())
    }

    pub fn rarc_d(l0: usize) -> Self {
        Self::new(format!("rarc-d-l0_{l0}"), SolverConfig::rarc_d(l0))
    }

    pub fn rarc(l: usize) -> Self {
        Self::new(format!("rarc-l{l}"), SolverConfig::rarc(l))
    }

    /// R-ARC with `l = max(1, round(fraction·d))`.
    pub fn rarc_fraction(fraction: f64) -> Self {
        let pct = fraction * 100.0;
        Self {
            id: format!("rarc-{pct}pct").replace('.', "p"),
            config: SolverConfig::rarc(1),
            sketch_fraction: Some(fraction),
        }
    }

    pub fn with_base(mut self, base: &SolverConfig<T>) -> Self {
        let mode = self.config.mode;
        let l0 = self.config.l0;
        self.config = SolverConfig { mode, l0, ..*base };
        self
    }

    /// Configuration for a problem of dimension `d`.
    pub fn resolve(&self, d: usize) -> SolverConfig<T> {
        let mut cfg = self.config;
        if let Some(frac) = self.sketch_fraction {
            let l = ((frac * d as f64).round() as usize).clamp(1, d);
            cfg.mode = SolverMode::RarcFixed { l };
        }
        cfg
    }
}

impl<T: Scalar> FromStr for SolverSpec<T> {
    type Err = Error;

    /// `arc`, `rarc-d`, `rarc-d:l0=<n>`, `rarc:l=<n>`, `rarc:frac=<x>` or
    /// `rarc:<pct>%`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = s.split_once(':').map_or((s, None), |(h, a)| (h, Some(a)));
        let bad = || Error::InvalidConfig(format!("bad solver spec `{s}`"));
        match (head.to_lowercase().as_str(), arg) {
            ("arc", None) => Ok(Self::arc()),
            ("rarc-d", None) => Ok(Self::rarc_d(2)),
            ("rarc-d", Some(a)) => {
                let v = a.strip_prefix("l0=").ok_or_else(bad)?;
                Ok(Self::rarc_d(v.parse().map_err(|_| bad())?))
            }
            ("rarc", Some(a)) => {
                if let Some(v) = a.strip_prefix("l=") {
                    Ok(Self::rarc(v.parse().map_err(|_| bad())?))
                } else if let Some(v) = a.strip_prefix("frac=") {
                    let f: f64 = v.parse().map_err(|_| bad())?;
                    if !(f > 0.0 && f <= 1.0) {
                        return Err(bad());
                    }
                    Ok(Self::rarc_fraction(f))
                } else if let Some(v) = a.strip_suffix('%') {
                    let p: f64 = v.parse().map_err(|_| bad())?;
                    if !(p > 0.0 && p <= 100.0) {
                        return Err(bad());
                    }
                    Ok(Self::rarc_fraction(p / 100.0))
                } else {
                    Err(bad())
                }
            }
            _ => Err(bad()),
        }
    }
}

/// Outcome of one (problem, solver, repeat) cell of a grid.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    /// Full selector including the embedding seed.
    pub problem_id: String,
    pub solver_id: String,
    pub repeat: usize,
    pub problem_seed: u64,
    pub solver_seed: u64,
    pub status: String,
    pub f0: f64,
    pub f_star: f64,
    /// `(τ, N_p(τ))` in relative Hessians.
    pub budgets: Vec<(f64, f64)>,
    /// `(τ, N_p(τ))` in seconds.
    pub runtime_budgets: Vec<(f64, f64)>,
    pub trace: Vec<IterationTrace>,
    pub trace_path: Option<PathBuf>,
}

impl BenchmarkRun {
    pub fn budget(&self, tau: f64, metric: BudgetMetric) -> Option<f64> {
        let list = match metric {
            BudgetMetric::RelHessians => &self.budgets,
            BudgetMetric::Runtime => &self.runtime_budgets,
        };
        list.iter().find(|(t, _)| *t == tau).map(|&(_, b)| b)
    }
}

#[derive(Debug, Clone)]
pub struct GridOptions {
    pub taus: Vec<f64>,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    /// Directory for per-run trace CSVs.
    pub trace_dir: Option<PathBuf>,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { taus: vec![1e-2, 1e-5], threads: None, trace_dir: None }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Solver seed for grid cell `index`.
pub fn derive_run_seed(seed_base: u64, index: usize) -> u64 {
    splitmix64(seed_base ^ splitmix64(index as u64))
}

/// Optimal value used as `f*`: the registry value when known, otherwise the
/// value ARC reaches on the base (un-augmented) problem.
pub fn reference_optimum<T: Scalar>(problem: &ObjectiveProblem<T>) -> Result<f64> {
    if let Some(f) = problem.f_star() {
        return Ok(to_f64(f));
    }
    let target = problem.base().unwrap_or(problem);
    let cfg = SolverConfig::<T>::arc().with_epsilon(lit(1e-10)).with_max_iter(10_000);
    let res = solver::run(target, &cfg)?;
    Ok(to_f64(res.f_final))
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

/// Runs every (problem, solver, repeat) combination.
///
/// Repeat `i` embeds each problem with seed `seed_base + i`; solver seeds are
/// derived from `(seed_base, cell index)`. Cells run in parallel and the
/// result order is the grid order, so the output is independent of
/// scheduling. A failing cell is recorded as unsolved.
pub fn run_grid<T: Scalar>(
    problems: &[ProblemSelector],
    solvers: &[SolverSpec<T>],
    repeats: usize,
    seed_base: u64,
    opts: &GridOptions,
) -> Result<Vec<BenchmarkRun>> {
    if repeats == 0 {
        return Err(Error::InvalidInput("repeats must be at least 1".into()));
    }
    for &tau in &opts.taus {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidInput(format!("tau must lie in (0, 1), got {tau}")));
        }
    }
    if let Some(dir) = &opts.trace_dir {
        fs::create_dir_all(dir)?;
    }

    // f* depends only on the base function, so resolve it once per problem.
    let references: Vec<Result<f64>> = problems
        .iter()
        .map(|sel| {
            let sel = if sel.augmented { sel.with_seed(seed_base) } else { sel.clone() };
            let p: ObjectiveProblem<T> = sel.build()?;
            reference_optimum(&p)
        })
        .collect();

    let mut cells = Vec::new();
    for (pi, sel) in problems.iter().enumerate() {
        for (si, spec) in solvers.iter().enumerate() {
            for rep in 0..repeats {
                cells.push((pi, sel, si, spec, rep));
            }
        }
    }

    let work = |idx: usize, &(pi, sel, _si, spec, rep): &(usize, &ProblemSelector, usize, &SolverSpec<T>, usize)| {
        let problem_seed = seed_base.wrapping_add(rep as u64);
        let solver_seed = derive_run_seed(seed_base, idx);
        let selector = if sel.augmented { sel.with_seed(problem_seed) } else { sel.clone() };
        let problem_id = selector.to_string();
        let mut run = BenchmarkRun {
            problem_id: problem_id.clone(),
            solver_id: spec.id.clone(),
            repeat: rep,
            problem_seed,
            solver_seed,
            status: String::new(),
            f0: f64::NAN,
            f_star: f64::NAN,
            budgets: opts.taus.iter().map(|&t| (t, f64::INFINITY)).collect(),
            runtime_budgets: opts.taus.iter().map(|&t| (t, f64::INFINITY)).collect(),
            trace: Vec::new(),
            trace_path: None,
        };
        let f_star = match &references[pi] {
            Ok(f) => *f,
            Err(e) => {
                run.status = format!("Error: {e}");
                return run;
            }
        };
        run.f_star = f_star;
        let problem: ObjectiveProblem<T> = match selector.build() {
            Ok(p) => p,
            Err(e) => {
                run.status = format!("Error: {e}");
                return run;
            }
        };
        let cfg = SolverConfig { seed: solver_seed, ..spec.resolve(problem.dim()) };
        let result = match solver::run(&problem, &cfg) {
            Ok(r) => r,
            Err(e) => {
                run.status = format!("Error: {e}");
                return run;
            }
        };
        run.status = result.status.to_string();
        run.f0 = result.trace.first().map_or(f64::NAN, |t| t.f);
        for (slot, metric) in [(&mut run.budgets, BudgetMetric::RelHessians), (&mut run.runtime_budgets, BudgetMetric::Runtime)] {
            for entry in slot.iter_mut() {
                entry.1 = solved_budget(&result.trace, run.f0, f_star, entry.0, metric).unwrap_or(f64::INFINITY);
            }
        }
        if let Some(dir) = &opts.trace_dir {
            let path = dir.join(format!("{}__{}__r{}.csv", sanitize(&problem_id), sanitize(&spec.id), rep));
            let written = File::create(&path)
                .map_err(Error::from)
                .and_then(|f| write_trace_csv(BufWriter::new(f), &result.trace));
            if written.is_ok() {
                run.trace_path = Some(path);
            }
        }
        run.trace = result.trace;
        run
    };

    let execute = || cells.par_iter().enumerate().map(|(i, c)| work(i, c)).collect::<Vec<_>>();
    let runs = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(execute),
        None => execute(),
    };
    Ok(runs)
}

/// Fraction of problems solved within budget `α`, on a grid of `α` values.
#[derive(Debug, Clone, PartialEq)]
pub struct DataProfile {
    pub solver_id: String,
    pub tau: f64,
    pub alpha: Vec<f64>,
    pub pi: Vec<f64>,
}

impl DataProfile {
    pub fn at(&self, alpha: f64) -> f64 {
        self.alpha.iter().zip(&self.pi).take_while(|(a, _)| **a <= alpha).last().map_or(0.0, |(_, p)| *p)
    }
}

/// `α = 0` followed by 400 log-spaced points on `[1e-3, 100]`.
pub fn default_alpha_grid() -> Vec<f64> {
    let n = 400;
    std::iter::once(0.0)
        .chain((0..n).map(|i| 10f64.powf(-3.0 + 5.0 * i as f64 / (n - 1) as f64)))
        .collect()
}

/// Profile from a list of budgets, one per problem.
pub fn profile_from_budgets(solver_id: &str, tau: f64, budgets: &[f64], alpha_grid: &[f64]) -> Result<DataProfile> {
    if budgets.is_empty() {
        return Err(Error::InvalidInput(format!("no runs for solver `{solver_id}`")));
    }
    if alpha_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("alpha grid must be strictly increasing".into()));
    }
    let total = budgets.len() as f64;
    let pi = alpha_grid.iter().map(|&a| budgets.iter().filter(|&&b| b <= a).count() as f64 / total).collect();
    Ok(DataProfile { solver_id: solver_id.to_string(), tau, alpha: alpha_grid.to_vec(), pi })
}

/// Data profile of a single solver; every run counts as a separate problem.
pub fn data_profile(runs: &[BenchmarkRun], tau: f64, alpha_grid: &[f64]) -> Result<DataProfile> {
    let first = runs.first().ok_or_else(|| Error::InvalidInput("empty run list".into()))?;
    if runs.iter().any(|r| r.solver_id != first.solver_id) {
        return Err(Error::InvalidInput("data_profile expects runs of a single solver".into()));
    }
    let budgets = runs
        .iter()
        .map(|r| r.budget(tau, BudgetMetric::RelHessians).ok_or_else(|| Error::InvalidInput(format!("no budget recorded for tau {tau}"))))
        .collect::<Result<Vec<_>>>()?;
    profile_from_budgets(&first.solver_id, tau, &budgets, alpha_grid)
}

/// One row of `runs.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub problem_id: String,
    pub solver_id: String,
    pub repeat: usize,
    pub seed: u64,
    pub tau: f64,
    pub n_p: f64,
    pub status: String,
}

pub const RUNS_HEADER: [&str; 7] = ["problem_id", "solver_id", "repeat", "seed", "tau", "N_p", "status"];

pub fn run_records(runs: &[BenchmarkRun], metric: BudgetMetric) -> Vec<RunRecord> {
    runs.iter()
        .flat_map(|r| {
            let list = match metric {
                BudgetMetric::RelHessians => &r.budgets,
                BudgetMetric::Runtime => &r.runtime_budgets,
            };
            list.iter().map(move |&(tau, n_p)| RunRecord {
                problem_id: r.problem_id.clone(),
                solver_id: r.solver_id.clone(),
                repeat: r.repeat,
                seed: r.solver_seed,
                tau,
                n_p,
                status: r.status.clone(),
            })
        })
        .collect()
}

pub fn write_runs_csv<W: Write>(writer: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RUNS_HEADER)?;
    for r in records {
        w.write_record([
            r.problem_id.clone(),
            r.solver_id.clone(),
            r.repeat.to_string(),
            r.seed.to_string(),
            r.tau.to_string(),
            r.n_p.to_string(),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runs_csv<R: Read>(reader: R) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RUNS_HEADER {
        return Err(Error::InvalidInput(format!("unexpected runs header {header:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let get = |i: usize| rec.get(i).unwrap_or_default();
            let bad = |i: usize| Error::InvalidInput(format!("bad `{}` value `{}`", RUNS_HEADER[i], get(i)));
            Ok(RunRecord {
                problem_id: get(0).to_string(),
                solver_id: get(1).to_string(),
                repeat: get(2).parse().map_err(|_| bad(2))?,
                seed: get(3).parse().map_err(|_| bad(3))?,
                tau: get(4).parse().map_err(|_| bad(4))?,
                n_p: get(5).parse().map_err(|_| bad(5))?,
                status: get(6).to_string(),
            })
        })
        .collect()
}

/// One profile per solver (sorted by id) for the given tolerance.
pub fn profiles_from_records(records: &[RunRecord], tau: f64, alpha_grid: &[f64]) -> Result<Vec<DataProfile>> {
    let mut by_solver: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.tau == tau) {
        by_solver.entry(&r.solver_id).or_default().push(r.n_p);
    }
    if by_solver.is_empty() {
        return Err(Error::InvalidInput(format!("no runs recorded for tau {tau}")));
    }
    by_solver.into_iter().map(|(id, budgets)| profile_from_budgets(id, tau, &budgets, alpha_grid)).collect()
}

pub fn write_profile_csv<W: Write>(writer: W, profile: &DataProfile) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["alpha", "pi"])?;
    for (a, p) in profile.alpha.iter().zip(&profile.pi) {
        w.write_record([a.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `profile_<solver>_<tau>.csv`, with `τ` in exponent form (`1e-2`).
pub fn profile_file_name(solver_id: &str, tau: f64) -> String {
    format!("profile_{}_{:e}.csv", sanitize(solver_id), tau)
}

/// Writes every profile under `dir` and returns the paths.
pub fn write_profiles(dir: &Path, profiles: &[DataProfile]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    profiles
        .iter()
        .map(|p| {
            let path = dir.join(profile_file_name(&p.solver_id, p.tau));
            write_profile_csv(BufWriter::new(File::create(&path)?), p)?;
            Ok(path)
        })
        .collect()
}

/// Files written by [`write_grid_outputs`].
#[derive(Debug, Clone)]
pub struct GridOutputs {
    pub runs_csv: PathBuf,
    pub runtime_csv: PathBuf,
    pub profiles: Vec<PathBuf>,
}

/// Writes `runs.csv` (relative Hessians), `runs_runtime.csv` (seconds) and
/// one relative-Hessians profile per (solver, τ) under `dir`.
///
/// Everything except `runs_runtime.csv` is a pure function of the runs'
/// budgets, so reruns with the same seeds reproduce it byte for byte.
pub fn write_grid_outputs(dir: &Path, runs: &[BenchmarkRun], taus: &[f64], alpha_grid: &[f64]) -> Result<GridOutputs> {
    fs::create_dir_all(dir)?;
    let records = run_records(runs, BudgetMetric::RelHessians);
    let runs_csv = dir.join("runs.csv");
    write_runs_csv(BufWriter::new(File::create(&runs_csv)?), &records)?;
    let runtime_csv = dir.join("runs_runtime.csv");
    write_runs_csv(BufWriter::new(File::create(&runtime_csv)?), &run_records(runs, BudgetMetric::Runtime))?;
    let mut profiles = Vec::new();
    for &tau in taus {
        profiles.extend(profiles_from_records(&records, tau, alpha_grid)?);
    }
    let profiles = write_profiles(dir, &profiles)?;
    Ok(GridOutputs { runs_csv, runtime_csv, profiles })
}

/// Median of budgets, `∞` counting as larger than every finite value.
pub fn median_budget(budgets: &[f64]) -> f64 {
    if budgets.is_empty() {
        return f64::NAN;
    }
    let mut v = budgets.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        let (a, b) = (v[n / 2 - 1], v[n / 2]);
        if a.is_infinite() || b.is_infinite() {
            b
        } else {
            0.5 * (a + b)
        }
    }
}

/// Groups runs by `(problem family, solver)`, where the family is the problem
/// id without its embedding seed.
pub fn group_by_family(runs: &[BenchmarkRun]) -> HashMap<(String, String), Vec<&BenchmarkRun>> {
    let mut out: HashMap<(String, String), Vec<&BenchmarkRun>> = HashMap::new();
    for r in runs {
        let family = r
            .problem_id
            .parse::<ProblemSelector>()
            .map_or_else(|_| r.problem_id.clone(), |s| s.without_seed().to_string());
        out.entry((family, r.solver_id.clone())).or_default().push(r);
    }
    out
}

impl fmt::Display for BudgetMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BudgetMetric::RelHessians => "rel-hessians",
            BudgetMetric::Runtime => "runtime",
        })
    }
}
