use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use robust_lds::harness::config::{ExperimentConfig, Seeds};
use robust_lds::harness::episode::{Arm, EpisodeRecord};
use robust_lds::harness::montecarlo::{aggregate, run_monte_carlo_pairs};
use robust_lds::rifs::{self, RifsSpec};
use robust_lds::{average_contractivity, preset, score, stationary_distribution, FilterBank};

/// Online prediction of partially observed linear dynamical systems with
/// anomaly rejection.
#[derive(Parser, Debug)]
#[command(name = "robust-lds", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run episodes and write per-step traces plus aggregates.
    Run(RunArgs),
    /// Simulate a random iterated function system.
    Rifs(RifsArgs),
    /// Build (or load) a wave-filter bank cache.
    Filters(FiltersArgs),
    /// Score the decisions stored in an episode CSV.
    Score(ScoreArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment config file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset: hazan-siso or time-varying-sinusoid.
    #[arg(long)]
    preset: Option<String>,
    /// Run this single seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Run seeds 0..N.
    #[arg(long)]
    seeds: Option<usize>,
    /// Also write baseline_<seed>.csv traces.
    #[arg(long)]
    baseline: bool,
    /// Output directory (overrides the config; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RifsArgs {
    /// RIFS spec file (TOML).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the sample path here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FiltersArgs {
    #[arg(long)]
    horizon: usize,
    #[arg(long)]
    k: usize,
    /// Cache file; reused when it matches, rewritten otherwise.
    #[arg(long)]
    cache: PathBuf,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    episode: PathBuf,
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
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Rifs(args) => cmd_rifs(args),
        Command::Filters(args) => cmd_filters(args),
        Command::Score(args) => cmd_score(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 1 for configuration problems, 2 for runtime aborts.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<robust_lds::Error>() {
        Some(e) if e.is_configuration() => 1,
        Some(_) => 2,
        None if err.downcast_ref::<UsageError>().is_some() => 1,
        None => 2,
    }
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), None) => {
            ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?
        }
        (None, Some(name)) => preset(name)?,
        _ => return Err(UsageError("give exactly one of --config or --preset".into()).into()),
    };
    if let Some(seed) = args.seed {
        config.seeds = Seeds::List(vec![seed]);
    } else if let Some(n) = args.seeds {
        if n == 0 {
            return Err(UsageError("--seeds must be >= 1".into()).into());
        }
        config.seeds = Seeds::Count(n);
    }
    let out = args.out.or_else(|| config.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let seeds = config.seeds.resolve();
    let pairs = run_monte_carlo_pairs(&config, &seeds)?;
    for pair in &pairs {
        let seed = pair.method.seed;
        pair.method.save(&out.join(format!("episode_{seed}.csv")))?;
        if args.baseline {
            pair.baseline.save(&out.join(format!("baseline_{seed}.csv")))?;
        }
    }
    let report = aggregate(&pairs)?;
    report.save(&out)?;

    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "episodes: {}  output: {}", seeds.len(), out.display())?;
    for arm in [Arm::Method, Arm::Baseline] {
        let s = report.arm(arm);
        writeln!(
            stdout,
            "{:<8}  f1 {:.4}  precision {:.4}  recall {:.4}  final p_hat {:.4}",
            arm.name(),
            s.mean_f1,
            s.mean_precision,
            s.mean_recall,
            s.mean_final_p_hat
        )?;
    }
    Ok(())
}

fn cmd_rifs(args: RifsArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let spec = RifsSpec::from_toml(&text)?;
    let path = rifs::simulate(&spec, args.steps, args.seed)?;
    let stationary = stationary_distribution(&spec.transition)?;
    let contractivity = average_contractivity(&spec)?;
    match &args.out {
        Some(file) => {
            rifs::write_path_csv(&path, std::io::BufWriter::new(std::fs::File::create(file)?))?;
            println!("stationary distribution: {stationary:?}");
            println!("average contractivity: {contractivity}");
        }
        None => {
            eprintln!("stationary distribution: {stationary:?}");
            eprintln!("average contractivity: {contractivity}");
            rifs::write_path_csv(&path, std::io::stdout().lock())?;
        }
    }
    Ok(())
}

fn cmd_filters(args: FiltersArgs) -> anyhow::Result<()> {
    if args.horizon == 0 || args.k == 0 || args.k > args.horizon {
        bail!(UsageError(format!("need 1 <= k <= horizon, got k={} horizon={}", args.k, args.horizon)));
    }
    let bank = FilterBank::load_or_build(&args.cache, args.horizon, args.k)?;
    println!("filters: horizon {} k {} cache {}", bank.horizon(), bank.k(), args.cache.display());
    for (j, s) in bank.sigma().iter().enumerate() {
        println!("sigma_{} = {s:e}", j + 1);
    }
    Ok(())
}

fn seed_from_name(path: &Path) -> (u64, Arm) {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let (arm, rest) = match stem.strip_prefix("baseline_") {
        Some(rest) => (Arm::Baseline, rest),
        None => (Arm::Method, stem.strip_prefix("episode_").unwrap_or(stem)),
    };
    (rest.parse().unwrap_or(0), arm)
}

fn cmd_score(args: ScoreArgs) -> anyhow::Result<()> {
    let (seed, arm) = seed_from_name(&args.episode);
    let rec = EpisodeRecord::load(&args.episode, seed, arm)
        .with_context(|| format!("reading {}", args.episode.display()))?;
    let m = score(&rec.flags(), &rec.trajectory.mask)?;
    println!("tp,fp,fn,tn,precision,recall,f1");
    println!("{},{},{},{},{},{},{}", m.tp, m.fp, m.fn_, m.tn, m.precision, m.recall, m.f1);
    Ok(())
}
