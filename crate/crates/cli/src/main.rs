//! `rarcd`: single solves, benchmark grids, data profiles and the
//! subspace-embedding checker.
//!
//! Exit codes: 0 on success (or a solve reaching the gradient tolerance),
//! 1 on usage or input errors, 2 when a solve hits the iteration cap, 3 when
//! the cubic subproblem solver fails.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rarcd::bench::{self, derive_run_seed, GridOptions, SolverSpec};
use rarcd::problems::make_orthogonal_embedding;
use rarcd::sketch::check_subspace_embedding;
use rarcd::solver::{self, write_trace_csv};
use rarcd::{ProblemSelector, SketchDistribution, SketchMatrix, SolveStatus, SolverConfig, SolverMode};

#[derive(Parser)]
#[command(name = "rarcd", version, about = "Random-subspace adaptive cubic regularization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write trace.csv and summary.json.
    Solve(SolveArgs),
    /// Run a (problem × solver × repeat) grid and write runs, traces and profiles.
    Bench(BenchArgs),
    /// Compute data profiles from a runs.csv file.
    Profile(ProfileArgs),
    /// Monte-Carlo check that Gaussian sketches embed a random subspace.
    EmbedCheck(EmbedArgs),
}

/// Solver settings shared by `solve` and `bench`. Flags override values from
/// `--config`, which override the defaults.
#[derive(Args, Default)]
struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` setting; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Initial sketch dimension for rarc-d.
    #[arg(long)]
    l0: Option<usize>,
    /// Sketch growth constant of the rank rule.
    #[arg(long = "C")]
    c: Option<usize>,
    /// Gradient-norm tolerance.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    sigma0: Option<f64>,
    /// Success threshold on the decrease ratio.
    #[arg(long)]
    theta: Option<f64>,
    /// `on-success` or `every-iteration`.
    #[arg(long)]
    redraw_policy: Option<String>,
    /// `scaled-gaussian` or `identity`.
    #[arg(long)]
    distribution: Option<String>,
}

impl ConfigArgs {
    fn apply(&self, cfg: &mut SolverConfig<f64>) -> Result<()> {
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            cfg.apply_text(&text)?;
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
            cfg.set(k.trim(), v)?;
        }
        let mut set = |key: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set(key, &v));
        set("l0", self.l0.map(|v| v.to_string()))?;
        set("C", self.c.map(|v| v.to_string()))?;
        set("epsilon", self.eps.map(|v| v.to_string()))?;
        set("max_iter", self.max_iter.map(|v| v.to_string()))?;
        set("sigma0", self.sigma0.map(|v| v.to_string()))?;
        set("theta", self.theta.map(|v| v.to_string()))?;
        set("redraw_policy", self.redraw_policy.clone())?;
        set("distribution", self.distribution.clone())?;
        Ok(())
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Problem selector, e.g. `l-ARWHEAD:N=100:d=1000:seed=1` or `QUADRANK:d=10:rank=10`.
    #[arg(long)]
    problem: String,
    /// `arc`, `rarc-d` or `rarc:l=<n>`.
    #[arg(long)]
    mode: Option<String>,
    /// Fixed sketch dimension (selects `rarc`).
    #[arg(long)]
    l: Option<usize>,
    /// Solver RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Named problem suite; `lowrank` is l-ARWHEAD, l-COSINE, l-ENGVAL1 and l-POWER.
    #[arg(long)]
    suite: Option<String>,
    /// Additional problem selector; may be repeated.
    #[arg(long = "problem")]
    problems: Vec<String>,
    /// Ambient dimension for the suite.
    #[arg(long, default_value_t = 1000)]
    d: usize,
    /// Base-function dimension (rank) for the suite.
    #[arg(long, default_value_t = 100)]
    rank: usize,
    /// Solver spec (`arc`, `rarc-d`, `rarc-d:l0=<n>`, `rarc:l=<n>`, `rarc:<pct>%`); may be repeated.
    #[arg(long = "solver")]
    solvers: Vec<String>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Base seed for embeddings and solver streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Profile tolerance; may be repeated. Defaults to 1e-2 and 1e-5.
    #[arg(long = "tau")]
    taus: Vec<f64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Rerun the grid recorded in a manifest.json.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProfileArgs {
    /// runs.csv written by `bench`.
    #[arg(long)]
    runs: PathBuf,
    /// Tolerance; may be repeated. Defaults to every tolerance in the file.
    #[arg(long = "tau")]
    taus: Vec<f64>,
    /// Output directory (defaults to the directory holding runs.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Sketch rows.
    #[arg(long)]
    l: usize,
    /// Ambient dimension.
    #[arg(long)]
    d: usize,
    /// Dimension of the random subspace.
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Independent sketch draws.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Sampled vectors per draw.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn solve(args: &SolveArgs) -> Result<ExitCode> {
    let selector: ProblemSelector = args.problem.parse()?;
    let problem = selector.build::<f64>()?;
    let mut cfg = SolverConfig::<f64>::default();
    args.config.apply(&mut cfg)?;
    if let Some(mode) = &args.mode {
        cfg.set("mode", mode)?;
    }
    if let Some(l) = args.l {
        cfg.mode = SolverMode::RarcFixed { l };
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate(problem.dim())?;

    let result = solver::run(&problem, &cfg)?;
    fs::create_dir_all(&args.out)?;
    write_trace_csv(BufWriter::new(File::create(args.out.join("trace.csv"))?), &result.trace)?;
    let mut summary = result.summary_json(&problem, &cfg);
    summary["selector"] = json!(selector.to_string());
    summary["seeds"]["problem"] = json!(selector.seed);
    fs::write(args.out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    println!(
        "{}: {} after {} iterations, f = {:e}, |g| = {:e}, l = {}",
        selector,
        result.status,
        result.iterations(),
        result.f_final,
        result.grad_norm_final,
        result.final_sketch_size()
    );
    Ok(match result.status {
        SolveStatus::GradientTolReached => ExitCode::SUCCESS,
        SolveStatus::MaxIter => ExitCode::from(2),
        SolveStatus::InnerFailure => ExitCode::from(3),
    })
}

const LOWRANK_SUITE: [&str; 4] = ["ARWHEAD", "COSINE", "ENGVAL1", "POWER"];

fn bench_cmd(args: &BenchArgs) -> Result<ExitCode> {
    let manifest = match &args.manifest {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?
        }
        None => manifest_from_args(args)?,
    };

    let problems = manifest["problems"]
        .as_array()
        .context("manifest: `problems` must be a list")?
        .iter()
        .map(|p| p.as_str().context("manifest: problem must be a string")?.parse::<ProblemSelector>().map_err(Into::into))
        .collect::<Result<Vec<_>>>()?;
    let repeats = manifest["repeats"].as_u64().context("manifest: `repeats` missing")? as usize;
    let seed = manifest["seed"].as_u64().context("manifest: `seed` missing")?;
    let taus = manifest["taus"]
        .as_array()
        .context("manifest: `taus` must be a list")?
        .iter()
        .map(|t| t.as_f64().context("manifest: tau must be a number"))
        .collect::<Result<Vec<_>>>()?;
    let mut base = SolverConfig::<f64>::default();
    base.apply_text(manifest["config"].as_str().context("manifest: `config` missing")?)?;
    let solvers = manifest["solvers"]
        .as_array()
        .context("manifest: `solvers` must be a list")?
        .iter()
        .map(|s| {
            let spec: SolverSpec<f64> = s.as_str().context("manifest: solver must be a string")?.parse()?;
            Ok(spec.with_base(&base))
        })
        .collect::<Result<Vec<_>>>()?;
    if problems.is_empty() || solvers.is_empty() {
        bail!("bench needs at least one problem and one solver");
    }

    fs::create_dir_all(&args.out)?;
    let opts = GridOptions { taus: taus.clone(), threads: args.threads, trace_dir: Some(args.out.join("traces")) };
    let runs = bench::run_grid(&problems, &solvers, repeats, seed, &opts)?;
    let outputs = bench::write_grid_outputs(&args.out, &runs, &taus, &bench::default_alpha_grid())?;
    fs::write(args.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;

    let solved = runs.iter().filter(|r| r.budgets.iter().any(|(_, b)| b.is_finite())).count();
    println!(
        "{} runs ({} solved at some tolerance); wrote {} and {} profiles",
        runs.len(),
        solved,
        outputs.runs_csv.display(),
        outputs.profiles.len()
    );
    Ok(ExitCode::SUCCESS)
}

/// Everything that determines a grid's outputs.
fn manifest_from_args(args: &BenchArgs) -> Result<serde_json::Value> {
    let mut problems: Vec<String> = Vec::new();
    match args.suite.as_deref() {
        None => {}
        Some("lowrank") => {
            for name in LOWRANK_SUITE {
                problems.push(ProblemSelector::low_rank(name, args.rank, args.d, 0).without_seed().to_string());
            }
        }
        Some(other) => bail!("unknown suite `{other}` (expected `lowrank`)"),
    }
    for p in &args.problems {
        problems.push(p.parse::<ProblemSelector>()?.to_string());
    }
    if problems.is_empty() {
        bail!("no problems given; use --suite or --problem");
    }
    let solvers = if args.solvers.is_empty() { vec!["arc".to_string(), "rarc-d".to_string()] } else { args.solvers.clone() };
    for s in &solvers {
        s.parse::<SolverSpec<f64>>()?;
    }
    let taus = if args.taus.is_empty() { vec![1e-2, 1e-5] } else { args.taus.clone() };

    let mut cfg = SolverConfig::<f64>::default();
    args.config.apply(&mut cfg)?;
    Ok(json!({
        "problems": problems,
        "solvers": solvers,
        "repeats": args.repeats,
        "seed": args.seed,
        "taus": taus,
        "config": config_text(&cfg),
    }))
}

/// Flat `key = value` rendering of the fields a solver spec does not fix.
fn config_text(cfg: &SolverConfig<f64>) -> String {
    let echo = cfg.to_json();
    let keys = [
        "theta", "sigma0", "sigma_min", "gamma_inc", "gamma_dec", "epsilon", "max_iter", "C", "kappa_T", "kappa_S", "rank_tol",
        "redraw_policy", "inner_tol", "max_inner",
    ];
    let mut out = String::new();
    for k in keys {
        let v = &echo[k];
        let v = v.as_str().map_or_else(|| v.to_string(), str::to_string);
        out.push_str(&format!("{k} = {v}\n"));
    }
    let dist = match cfg.distribution {
        SketchDistribution::Identity => "identity",
        _ => "scaled-gaussian",
    };
    out.push_str(&format!("distribution = {dist}\n"));
    out
}

fn profile_cmd(args: &ProfileArgs) -> Result<ExitCode> {
    let file = File::open(&args.runs).with_context(|| format!("opening {}", args.runs.display()))?;
    let records = bench::read_runs_csv(file)?;
    let mut taus = args.taus.clone();
    if taus.is_empty() {
        for r in &records {
            if !taus.contains(&r.tau) {
                taus.push(r.tau);
            }
        }
    }
    let out = match &args.out {
        Some(o) => o.clone(),
        None => args.runs.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf),
    };
    let alpha = bench::default_alpha_grid();
    let mut written = 0;
    for tau in taus {
        let profiles = bench::profiles_from_records(&records, tau, &alpha)?;
        written += bench::write_profiles(&out, &profiles)?.len();
    }
    println!("wrote {written} profiles to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn embed_check(args: &EmbedArgs) -> Result<ExitCode> {
    if args.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let basis = make_orthogonal_embedding::<f64>(args.d, args.rank, args.seed)?;
    let mut passes = 0;
    let mut worst: f64 = 0.0;
    for t in 0..args.trials {
        let s = SketchMatrix::<f64>::draw(SketchDistribution::ScaledGaussian, args.l, args.d, derive_run_seed(args.seed, 2 * t))?;
        let check = check_subspace_embedding(&s, &basis, args.eps, args.samples, derive_run_seed(args.seed, 2 * t + 1))?;
        passes += usize::from(check.passed);
        worst = worst.max(check.worst_distortion);
    }
    let rate = passes as f64 / args.trials as f64;
    println!(
        "{}",
        json!({
            "l": args.l, "d": args.d, "rank": args.rank, "eps": args.eps,
            "trials": args.trials, "passed": passes, "pass_rate": rate, "worst_distortion": worst,
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Profile(a) => profile_cmd(a),
        Command::EmbedCheck(a) => embed_check(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    })
}
