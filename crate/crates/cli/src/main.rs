use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use brox_core::experiment::{export_csv, run_experiment, Experiment, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "brox",
    version,
    about = "Monte Carlo experiments for diffusions in drifted Brownian potentials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its rows as CSV.
    Run(Box<RunArgs>),
    /// List the experiment names.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment name; may be omitted when the config file names one.
    experiment: Option<String>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Level `r`, or time horizon `t` for the time-average experiments.
    #[arg(long = "r", alias = "t")]
    r_or_t: Option<f64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    env_step: Option<f64>,
    #[arg(long)]
    space_step: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Share one environment across all replicas.
    #[arg(long)]
    quenched: bool,
    /// JSON config; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    delta1: Option<f64>,
    #[arg(long)]
    c6: Option<f64>,
    /// Skip writing `<out>.summary.json`.
    #[arg(long)]
    no_summary: bool,
}

fn resolve(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    match (&args.experiment, &args.config) {
        (Some(name), _) => cfg.experiment = name.parse::<Experiment>()?,
        (None, Some(_)) => {}
        (None, None) => anyhow::bail!("no experiment given"),
    }
    macro_rules! set {
        ($($field:ident <- $arg:ident),*) => {
            $(if let Some(v) = args.$arg { cfg.$field = v; })*
        };
    }
    set!(kappa <- kappa, r_or_t <- r_or_t, replicas <- replicas, seed <- seed,
         env_step <- env_step, space_step <- space_step, dt <- dt, delta1 <- delta1, c6 <- c6);
    if let Some(out) = &args.out {
        cfg.out_path = out.to_string_lossy().into_owned();
    }
    cfg.quenched |= args.quenched;
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> anyhow::Result<bool> {
    let cfg = resolve(&args)?;
    let res = run_experiment(&cfg)?;
    export_csv(&res.rows, &cfg.out_path).with_context(|| format!("writing {}", cfg.out_path))?;
    if !args.no_summary {
        let path = format!("{}.summary.json", cfg.out_path);
        let json = serde_json::to_string_pretty(&res.summary)?;
        std::fs::write(&path, json + "\n").with_context(|| format!("writing {path}"))?;
    }
    let s = &res.summary;
    eprintln!("{}: {} replicas, {} truncated", s.experiment, s.replicas, s.truncated);
    for (k, v) in &s.estimates {
        eprintln!("  {k} = {v:.6}");
    }
    for c in &s.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        eprintln!("  {tag} {}: {:.6} (threshold {:.6})", c.name, c.statistic, c.threshold);
    }
    Ok(s.all_passed())
}

fn main() -> ExitCode {
    // Usage errors share exit status 1 with runtime errors; 2 means a failed check.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::List => {
            for e in Experiment::ALL {
                println!("{e}");
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(*args) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(2),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
