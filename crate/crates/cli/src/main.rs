//! `onebit-doa`: Monte-Carlo sweeps, bounds and analytic curves from TOML configs.
//!
//! Angles are degrees on the command line and in every output file.
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 finished but some sweep point had more than 10% failed trials.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use onebit_doa::geometry::{build_geometry, parse_geometry_spec};
use onebit_doa::harness::{
    analytic_sweep, resolution_experiment, run_experiment, to_csv_string, to_json_string, ExperimentConfig,
    GeometrySpec, MonteCarloSummary, OutputFormat, Overlay, Placement, SnrSpec, Sweep, SweepVariable,
};
use onebit_doa::moments::SigmaMode;
use onebit_doa::DoaError;

#[derive(Parser)]
#[command(name = "onebit-doa", version, about = "One-bit sparse-array DoA experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo RMSE sweep.
    Simulate(RunArgs),
    /// Resolution-probability study over a two-source separation sweep.
    Resolve(RunArgs),
    /// One-bit (worst-case) and unquantised CRBs, no simulation.
    Bounds(AnalyticArgs),
    /// Asymptotic MSE and resolution-bound curves, no simulation.
    Analyze(AnalyticArgs),
    /// Difference co-array summary of an array as JSON.
    Geometry {
        /// Preset (nested, coprime, mra, ula) or comma-separated positions.
        #[arg(long)]
        geometry: String,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent. CSV output also gets a `.config.toml` echo.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Overrides the config's array.
    #[arg(long)]
    geometry: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_sigma_mode)]
    sigma_mode: Option<SigmaMode>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; all cores when absent. Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct AnalyticArgs {
    #[command(flatten)]
    common: Common,
    /// DoAs in degrees, used when no config is given.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    doas: Option<Vec<f64>>,
    /// Common SNR in dB, used when no config is given.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<f64>,
    /// Snapshot count, used when no config is given.
    #[arg(long)]
    n: Option<usize>,
}

fn parse_sigma_mode(s: &str) -> Result<SigmaMode, String> {
    match s.replace('-', "_").as_str() {
        "analytic" => Ok(SigmaMode::Analytic),
        "monte_carlo" => Ok(SigmaMode::MonteCarlo),
        _ => Err(format!("unknown sigma mode '{s}' (expected analytic or monte-carlo)")),
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, DoaError> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| DoaError::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_file(path)?;
    apply_overrides(&mut cfg, common);
    cfg.validate()?;
    Ok(cfg)
}

fn apply_overrides(cfg: &mut ExperimentConfig, common: &Common) {
    if let Some(g) = &common.geometry {
        cfg.geometry = GeometrySpec::Named(g.clone());
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(m) = common.sigma_mode {
        cfg.sigma.mode = m;
    }
}

/// Config from `--config`, or a single-point scene from `--geometry/--doas/--snr-db/--n`.
fn analytic_config(args: &AnalyticArgs, overlays: Vec<Overlay>) -> Result<ExperimentConfig, DoaError> {
    let mut cfg = if args.common.config.is_some() {
        load_config(&args.common)?
    } else {
        let missing = |what: &str| DoaError::Config(format!("--{what} is required without --config"));
        let doas = args.doas.clone().ok_or_else(|| missing("doas"))?;
        let n = args.n.ok_or_else(|| missing("n"))?;
        let mut cfg = ExperimentConfig {
            name: "cli".into(),
            geometry: GeometrySpec::Named(args.common.geometry.clone().ok_or_else(|| missing("geometry"))?),
            k: Some(doas.len()),
            placement: Placement::Explicit { degrees: doas },
            snr_db: Some(SnrSpec::Common(args.snr_db.ok_or_else(|| missing("snr-db"))?)),
            snr_scale: None,
            n: Some(n),
            trials: 1,
            seed: 0,
            estimators: vec![onebit_doa::estimators::Estimator::Eocab, onebit_doa::estimators::Estimator::Ocab],
            overlays: Vec::new(),
            music_grid_deg: 0.005,
            error_form: onebit_doa::analysis::ErrorForm::Theorem,
            sigma: Default::default(),
            sweep: Sweep { variable: SweepVariable::N, values: vec![n as f64] },
        };
        apply_overrides(&mut cfg, &args.common);
        cfg
    };
    // Keep only the overlays this subcommand produces; all of them if none remain.
    cfg.overlays.retain(|o| overlays.contains(o));
    if cfg.overlays.is_empty() {
        cfg.overlays = overlays;
    }
    let two = cfg.point(cfg.sweep.values[0])?.thetas.len() == 2;
    if !two {
        cfg.overlays.retain(|o| *o != Overlay::ResolutionBound);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_output(summary: &MonteCarloSummary, format: OutputFormat, out: Option<&Path>) -> anyhow::Result<()> {
    let text = match format {
        OutputFormat::Csv => to_csv_string(summary),
        OutputFormat::Json => to_json_string(summary)?,
    };
    match out {
        Some(path) => {
            std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            if format == OutputFormat::Csv {
                let echo = sidecar_path(path);
                std::fs::write(&echo, summary.config.to_toml_string()?)
                    .with_context(|| format!("writing {}", echo.display()))?;
            }
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".config.toml");
    PathBuf::from(s)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let summary = match cli.command {
        Command::Geometry { geometry } => {
            let g = build_geometry(&parse_geometry_spec(&geometry)?)?;
            let json = serde_json::json!({
                "sensors": g.sensors,
                "m": g.m(),
                "difference_set": g.diffs,
                "d": g.d_count,
                "v": g.v,
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
            return Ok(ExitCode::SUCCESS);
        }
        Command::Simulate(args) => {
            let cfg = run_config(&args)?;
            let s = run_experiment(&cfg, args.workers)?;
            (s, args.common)
        }
        Command::Resolve(args) => {
            let cfg = run_config(&args)?;
            let s = resolution_experiment(&cfg, args.workers)?;
            (s, args.common)
        }
        Command::Bounds(args) => {
            let cfg = analytic_config(&args, vec![Overlay::CrbW, Overlay::CrbI])?;
            (analytic_sweep(&cfg)?, args.common)
        }
        Command::Analyze(args) => {
            let cfg = analytic_config(&args, vec![Overlay::CrbW, Overlay::CrbI, Overlay::Thm6Mse, Overlay::ResolutionBound])?;
            (analytic_sweep(&cfg)?, args.common)
        }
    };
    let (summary, common) = summary;
    write_output(&summary, common.format, common.out.as_deref())?;
    if summary.unreliable() {
        log::warn!("some sweep points had more than 10% failed trials");
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_config(args: &RunArgs) -> Result<ExperimentConfig, DoaError> {
    let mut cfg = load_config(&args.common)?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn is_config_error(e: &DoaError) -> bool {
    matches!(
        e,
        DoaError::Config(_)
            | DoaError::InvalidGeometry(_)
            | DoaError::UnknownPreset(_)
            | DoaError::InvalidScene(_)
            | DoaError::Identifiability { .. }
    ) || matches!(e, DoaError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<DoaError>() {
                Some(d) if is_config_error(d) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
