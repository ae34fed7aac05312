use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use yieldcast::dataset::SynthParams;
use yieldcast::pipeline::{self, PipelineError, RunConfig};

/// District crop-yield forecasting from gridded Earth-observation data.
#[derive(Parser)]
#[command(name = "yieldcast", version, about)]
struct Cli {
    /// Log filter, e.g. `info` or `yieldcast=debug`. Overridden by RUST_LOG.
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and a config that runs on it.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 250)]
        districts: usize,
        #[arg(long, default_value_t = 2001)]
        first_year: i32,
        #[arg(long, default_value_t = 2020)]
        last_year: i32,
        /// Standard deviation of the yield noise term.
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
    },
    /// Run the full pipeline.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ingest and match district names only; writes match.csv.
    Match {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG figures for one experiment of a finished run.
    Plot {
        /// Run output directory.
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value = "all_features")]
        experiment: String,
        /// Defaults to `<run>/<experiment>/plots`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "t2m_aug")]
        dependence_feature: String,
        #[arg(long, default_value = "lai_aug")]
        color_feature: String,
    },
    /// Rebuild dashboard.json from a finished run without retraining.
    ExportDashboard {
        #[arg(long)]
        config: PathBuf,
        /// Run output directory; defaults to the config's output path.
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long, default_value = "all_features")]
        experiment: String,
        /// Output file or directory; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn load(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.paths.output = absolute(o);
    }
    Ok(cfg)
}

fn execute(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Synth { out, seed, districts, first_year, last_year, noise } => {
            let params = SynthParams { seed, n_districts: districts, first_year, last_year, noise_sigma: noise };
            let path = pipeline::cmd_synth(&params, &out)?;
            println!("{}", path.display());
        }
        Command::Run { config, seed, out } => {
            let cfg = load(&config, seed, out.as_deref())?;
            let summary = pipeline::cmd_run(&cfg)?;
            for exp in &summary.experiments {
                if let Some(best) = exp.leaderboard.first() {
                    let m = best.metrics.as_ref();
                    info!(
                        "{}: best {} r2={:.4} mape={}",
                        exp.name,
                        best.name,
                        m.map_or(f64::NAN, |m| m.r2),
                        m.and_then(|m| m.mape).map_or("n/a".into(), |v| format!("{v:.4}"))
                    );
                }
            }
            println!("{}", summary.output.display());
        }
        Command::Match { config, out } => {
            let cfg = load(&config, None, None)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir());
            let path = pipeline::cmd_match(&cfg, &dir)?;
            println!("{}", path.display());
        }
        Command::Plot { run, experiment, out, dependence_feature, color_feature } => {
            let dir = run.join(&experiment);
            let out = out.unwrap_or_else(|| dir.join("plots"));
            let files = pipeline::plot::cmd_plot(&dir, &out, (&dependence_feature, &color_feature)).map_err(|e| PipelineError::stage("plot", e))?;
            for f in files {
                println!("{}", f.display());
            }
        }
        Command::ExportDashboard { config, run, experiment, out } => {
            let cfg = load(&config, None, None)?;
            let run = run.unwrap_or_else(|| cfg.output_dir());
            let out = out.unwrap_or_else(|| run.clone());
            let path = pipeline::export_dashboard(&cfg, &run, &experiment, &out)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).parse_default_env().format_timestamp_millis().init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
