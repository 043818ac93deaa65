//! `byzsim` — configuration-driven experiment runner for the decentralized
//! SGD simulator.

mod plot;
mod summary;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use byzsim_core::aggregate::certify_contraction;
use byzsim_core::config::RunConfig;
use byzsim_core::engine::Experiment;

/// Exit code 2: configuration rejected. Exit code 3: runtime failure.
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn exit(self) -> ExitCode {
        match self {
            CliError::Config(msg) => {
                eprintln!("config error: {msg}");
                ExitCode::from(2)
            }
            CliError::Runtime(msg) => {
                eprintln!("runtime error: {msg}");
                ExitCode::from(3)
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn config_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "byzsim",
    about = "Deterministic simulator for attack-free and Byzantine-resilient decentralized SGD"
)]
struct Cli {
    /// Worker threads (results are identical for any value).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run and write trace.csv + summary.json.
    Run {
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out/run")]
        out: PathBuf,
        /// Enforce alpha_0 <= 1/(2L) and the empirical contraction
        /// condition rho_hat < lambda/(8 sqrt(N)) before running.
        #[arg(long)]
        strict_theory: bool,
    },
    /// Execute a sweep plan and write an aggregate sweep.csv.
    Sweep {
        plan: PathBuf,
    },
    /// Coupled-run stability estimate; writes stability.csv.
    Stability {
        config: PathBuf,
        /// Number of sampled perturbation pairs.
        #[arg(long, default_value_t = 32)]
        pairs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out/stability")]
        out: PathBuf,
    },
    /// Empirically certify the configured aggregation rule.
    Certify {
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// Message dimension for certification trials.
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate the closed-form bound expressions on a k-grid.
    Bounds {
        config: PathBuf,
        /// Comma-separated k values; defaults to a log-spaced grid.
        #[arg(long)]
        k_grid: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render trace CSVs to a self-contained SVG line chart.
    Plot {
        /// Input CSV files (first column is the x axis).
        csv: Vec<PathBuf>,
        #[arg(long, default_value = "out/plot.svg")]
        out: PathBuf,
        /// Column to plot on the y axis.
        #[arg(long, default_value = "gap")]
        metric: String,
        #[arg(long)]
        logx: bool,
        #[arg(long)]
        logy: bool,
    },
    /// Emit the partition report (per-agent class histograms) as JSON.
    PartitionReport {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_toml(&text).map_err(config_err)?;
    if let Some(seed) = seed {
        cfg.run.master_seed = seed;
    }
    Ok(cfg)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn cmd_run(config: &Path, seed: Option<u64>, out: &Path, strict: bool) -> CliResult<()> {
    let started = std::time::Instant::now();
    let cfg = load_config(config, seed)?;
    let exp = Experiment::prepare(&cfg).map_err(config_err)?;

    if strict {
        let alpha0 = exp.schedule.alpha(0);
        let cap = 1.0 / (2.0 * exp.profile.l_smooth);
        if alpha0 > cap * (1.0 + 1e-12) {
            return Err(CliError::Config(format!(
                "strict-theory: initial step size alpha_0 = {alpha0} violates alpha_0 <= 1/(2L) = {cap}"
            )));
        }
    }
    let certificate = summary::maybe_certify(&exp).map_err(runtime_err)?;
    if strict {
        if let Some(cert) = &certificate {
            if !cert.passes() {
                return Err(CliError::Config(format!(
                    "strict-theory: empirical contraction constant rho_hat = {} violates \
                     rho < lambda/(8*sqrt(N)) = {} (w_margin = {})",
                    cert.rho_hat, cert.rho_star, cert.w_margin
                )));
            }
        }
    }

    let trace = exp.run_trace().map_err(runtime_err)?;
    write_file(&out.join("trace.csv"), &trace.to_csv())?;
    write_file(&out.join("config.toml"), &cfg.to_toml())?;
    let summary = summary::build(&exp, &trace, certificate, started.elapsed().as_secs_f64())
        .map_err(runtime_err)?;
    write_file(
        &out.join("summary.json"),
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    println!(
        "run complete: {} steps, final gap {}",
        cfg.run.steps,
        trace.final_record().gap
    );
    Ok(())
}

fn cmd_stability(
    config: &Path,
    pairs: usize,
    seed: Option<u64>,
    out: &Path,
) -> CliResult<()> {
    let cfg = load_config(config, seed)?;
    let exp = Experiment::prepare(&cfg).map_err(config_err)?;
    let est = exp.run_coupled_stability(pairs).map_err(runtime_err)?;
    write_file(&out.join("stability.csv"), &est.to_csv())?;
    write_file(&out.join("config.toml"), &cfg.to_toml())?;
    let meta = serde_json::json!({
        "pairs": est.pairs,
        "final_mean_sq_dist": est.final_value(),
    });
    write_file(
        &out.join("stability.json"),
        &serde_json::to_string_pretty(&meta).unwrap(),
    )?;
    println!(
        "stability complete: {} pairs, final estimate {}",
        est.pairs,
        est.final_value()
    );
    Ok(())
}

fn cmd_certify(
    config: &Path,
    trials: usize,
    radius: f64,
    dim: usize,
    seed: Option<u64>,
) -> CliResult<()> {
    let cfg = load_config(config, seed)?;
    let exp = Experiment::prepare(&cfg).map_err(config_err)?;
    let reference = exp
        .virtual_matrix
        .as_ref()
        .unwrap_or(&exp.full_matrix)
        .clone();
    let cert = certify_contraction(
        &exp.aggregator,
        &exp.topology,
        &reference,
        trials,
        radius,
        dim,
        cfg.run.master_seed,
    )
    .map_err(runtime_err)?;
    println!("{}", serde_json::to_string_pretty(&cert).unwrap());
    Ok(())
}

fn cmd_bounds(config: &Path, k_grid: Option<&str>, seed: Option<u64>) -> CliResult<()> {
    let cfg = load_config(config, seed)?;
    let grid: Vec<u64> = match k_grid {
        Some(text) => text
            .split(',')
            .map(|t| t.trim().parse::<u64>().map_err(config_err))
            .collect::<CliResult<_>>()?,
        None => vec![1, 10, 100, 1_000, 10_000, 100_000],
    };
    let report = summary::bounds_report(&cfg, &grid).map_err(runtime_err)?;
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}

fn cmd_partition_report(config: &Path, seed: Option<u64>) -> CliResult<()> {
    let cfg = load_config(config, seed)?;
    let exp = Experiment::prepare(&cfg).map_err(config_err)?;
    let report = serde_json::json!({
        "beta": exp.dataset.beta,
        "seed": exp.dataset.seed,
        "n_agents": exp.dataset.n_agents(),
        "z_per_agent": exp.dataset.z_per_agent(),
        "n_classes": exp.dataset.n_classes,
        "class_histograms": exp.dataset.class_histograms(),
        "surplus_sizes": exp.dataset.surplus.iter().map(Vec::len).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(runtime_err)?;
    }
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            strict_theory,
        } => cmd_run(&config, seed, &out, strict_theory),
        Command::Sweep { plan } => sweep::cmd_sweep(&plan),
        Command::Stability {
            config,
            pairs,
            seed,
            out,
        } => cmd_stability(&config, pairs, seed, &out),
        Command::Certify {
            config,
            trials,
            radius,
            dim,
            seed,
        } => cmd_certify(&config, trials, radius, dim, seed),
        Command::Bounds {
            config,
            k_grid,
            seed,
        } => cmd_bounds(&config, k_grid.as_deref(), seed),
        Command::Plot {
            csv,
            out,
            metric,
            logx,
            logy,
        } => plot::cmd_plot(&csv, &out, &metric, logx, logy),
        Command::PartitionReport { config, seed } => cmd_partition_report(&config, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.exit(),
    }
}
