use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use oreps_opix::harness::{
    emit_outputs, read_trace, run_experiment, sweep, write_summary, write_sweep, ExperimentConfig, OutputPaths,
};
use oreps_opix::learner::{Algorithm, Feedback};
use oreps_opix::predictors::PredictorKind;
use oreps_opix::{Error, Result};

#[derive(Parser)]
#[command(name = "oreps", version, about = "Run policy-search experiments on layered adversarial MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Experiment file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of episodes T.
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Keep only variants running this algorithm.
    #[arg(long, value_parser = parse_algorithm)]
    algorithm: Option<Algorithm>,
    /// Keep only variants using this predictor (`zero`, `perfect`, `latest` or `latest:<period>`).
    #[arg(long, value_parser = parse_predictor)]
    predictor: Option<PredictorKind>,
    /// Keep only variants with this feedback (`full` or `bandit`).
    #[arg(long, value_parser = parse_feedback)]
    feedback: Option<Feedback>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every variant of an experiment and write traces and plots.
    Run(Overrides),
    /// Run each variant over a grid of step sizes and exploration values.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_delimiter = ',', required = true)]
        eta: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        gamma: Vec<f64>,
    },
    /// Recompute aggregates and plots from a trace file.
    Report {
        trace: PathBuf,
        /// Defaults to the directory holding the trace.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    [
        Algorithm::Oreps,
        Algorithm::OrepsIx,
        Algorithm::OrepsOpix,
        Algorithm::OrepsOpixAnytime,
        Algorithm::OrepsOpixUnknownTransition,
    ]
    .into_iter()
    .find(|a| a.name() == s)
    .ok_or_else(|| format!("unknown algorithm `{s}`"))
}

fn parse_feedback(s: &str) -> std::result::Result<Feedback, String> {
    match s {
        "full" => Ok(Feedback::Full),
        "bandit" => Ok(Feedback::Bandit),
        _ => Err(format!("unknown feedback `{s}`")),
    }
}

fn parse_predictor(s: &str) -> std::result::Result<PredictorKind, String> {
    match s.split_once(':') {
        None => match s {
            "zero" => Ok(PredictorKind::Zero),
            "perfect" => Ok(PredictorKind::Perfect),
            "latest" => Ok(PredictorKind::Latest { reset_period: None }),
            _ => Err(format!("unknown predictor `{s}`")),
        },
        Some(("latest", p)) => p
            .parse()
            .map(|p| PredictorKind::Latest { reset_period: Some(p) })
            .map_err(|e| format!("bad reset period `{p}`: {e}")),
        Some(_) => Err(format!("unknown predictor `{s}`")),
    }
}

fn load(o: &Overrides) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&o.config)?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(t) = o.episodes {
        cfg.episodes = t;
    }
    if let Some(r) = o.repetitions {
        cfg.repetitions = r;
    }
    cfg.variants.retain(|v| {
        o.algorithm.is_none_or(|a| v.algorithm == a)
            && o.predictor.is_none_or(|p| v.predictor == p)
            && o.feedback.is_none_or(|f| v.feedback == f)
    });
    cfg.check()?;
    let dir = o
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, dir))
}

fn announce(paths: &OutputPaths) {
    for p in [&paths.trace, &paths.aggregate, &paths.regret_plot, &paths.error_plot] {
        println!("wrote {}", p.display());
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(o) => {
            let (cfg, dir) = load(&o)?;
            info!("running {} variants x {} repetitions", cfg.variants.len(), cfg.repetitions);
            let report = run_experiment(&cfg)?;
            for v in &report.variants {
                let aborted = v.repetitions.iter().filter(|r| r.aborted.is_some()).count();
                println!(
                    "{}: mean final average regret {:?}, aborted {aborted}/{}",
                    v.label,
                    v.mean_final_average_regret(report.episodes),
                    v.repetitions.len()
                );
            }
            announce(&emit_outputs(&report, &dir)?);
        }
        Command::Sweep { overrides, eta, gamma } => {
            let (cfg, dir) = load(&overrides)?;
            let (report, rows) = sweep(&cfg, &eta, &gamma)?;
            for r in &rows {
                println!("{}: {:?}", r.variant, r.mean_final_average_regret);
            }
            announce(&emit_outputs(&report, &dir)?);
            let path = dir.join("sweep.csv");
            write_sweep(&path, &rows)?;
            println!("wrote {}", path.display());
        }
        Command::Report { trace, output_dir } => {
            let records = read_trace(&trace)?;
            let dir = output_dir.unwrap_or_else(|| trace.parent().unwrap_or(Path::new(".")).to_path_buf());
            std::fs::create_dir_all(&dir).map_err(Error::from)?;
            let paths = OutputPaths {
                trace,
                aggregate: dir.join("aggregate.csv"),
                regret_plot: dir.join("regret.svg"),
                error_plot: dir.join("predictor_error.svg"),
            };
            write_summary(&records, &paths)?;
            announce(&paths);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
