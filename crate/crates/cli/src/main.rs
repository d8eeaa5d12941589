mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use typicality::eigen::{diagonalize, load_eigenvalues, load_spectrum, read_header, save_spectrum, verify_spectrum};
use typicality::experiment::{bath_spectrum, beta_curve, run_sweep, spectral_stats, Cache};
use typicality::model::{build_hamiltonian, enumerate_basis, ModelParams};
use typicality::output::{
    write_beta_curve, write_dos, write_gap_ratio_histogram, write_json, write_report, write_spacing_histogram,
    write_staircase, write_state_dump, write_sweep, write_verdicts,
};
use typicality::rdm::{analyze_state, analyze_states};
use typicality::Error;

use crate::config::RunConfig;

const RESOLVED_CONFIG: &str = "resolved_config.toml";
const INCOMPLETE_MARKER: &str = "INCOMPLETE";

#[derive(Parser)]
#[command(name = "typicality", version, about = "Impurity-in-bath exact diagonalization, chaos diagnostics and canonical-typicality analysis")]
struct Cli {
    /// Worker threads for per-state analysis.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Memory budget for dense diagonalization, in GiB.
    #[arg(long, global = true, value_name = "GIB")]
    mem_budget: Option<f64>,
    /// Directory for cached spectra and verdicts.
    #[arg(long, global = true, value_name = "DIR")]
    cache: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build and diagonalize the Hamiltonian of `[model]`; write the spectrum file.
    Spectrum {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also check orthonormality and trace identities (cubic cost).
        #[arg(long)]
        verify: bool,
    },
    /// Level statistics of a spectrum file.
    Stats {
        spectrum: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Microcanonical and canonical inverse temperature curves.
    Thermo {
        spectrum: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Per-state impurity reductions and Boltzmann fits.
    Rdm {
        spectrum: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// States to dump in full (RDM, Gibbs state, orbitals, correlations).
        #[arg(long, value_delimiter = ',')]
        dump: Vec<usize>,
    },
    /// Run the `[sweep]` grid and write a result tree.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Turn a sweep result tree into plot-ready CSV files.
    Report {
        results: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

impl Command {
    fn config_path(&self) -> Option<&Path> {
        match self {
            Command::Spectrum { config, .. }
            | Command::Stats { config, .. }
            | Command::Thermo { config, .. }
            | Command::Rdm { config, .. }
            | Command::Sweep { config, .. } => config.config.as_deref(),
            Command::Report { .. } => None,
        }
    }

    /// Output directory, or for `spectrum` the directory holding the file.
    fn out_dir(&self) -> PathBuf {
        match self {
            Command::Spectrum { out, .. } => out.parent().map(Path::to_path_buf).unwrap_or_default(),
            Command::Stats { out, .. }
            | Command::Thermo { out, .. }
            | Command::Rdm { out, .. }
            | Command::Sweep { out, .. }
            | Command::Report { out, .. } => out.clone(),
        }
    }
}

fn resolve_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match cli.command.config_path() {
        Some(path) => RunConfig::load(path).with_context(|| format!("reading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    if cli.threads.is_some() {
        config.run.threads = cli.threads;
    }
    if cli.mem_budget.is_some() {
        config.run.memory_budget_gib = cli.mem_budget;
    }
    if cli.cache.is_some() {
        config.run.cache = cli.cache.clone();
    }
    config.validate()?;
    Ok(config)
}

fn echo_config(dir: &Path, name: &str, config: &RunConfig) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), config.to_toml())?;
    Ok(())
}

/// Parameters stored in a spectrum file, checked against `[model]` when the
/// config has one.
fn spectrum_params(path: &Path, config: &RunConfig) -> anyhow::Result<ModelParams> {
    let (_, params) = read_header(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(model) = &config.model {
        if *model != params {
            return Err(Error::ParamsMismatch.into());
        }
    }
    Ok(params)
}

fn cmd_spectrum(config: &RunConfig, out: &Path, verify: bool) -> anyhow::Result<()> {
    let params = config.require_model()?;
    let budget = config.budget();
    let basis = enumerate_basis(&params, budget)?;
    let h = build_hamiltonian(&basis, &params)?;
    drop(basis);
    log::info!("diagonalizing d_H = {}", h.dimension());
    let spectrum = diagonalize(&h, budget)?;
    if verify {
        let report = verify_spectrum(&h, &spectrum)?;
        log::info!("{report:?}");
    }
    let tmp = out.with_extension("partial");
    if let Some(dir) = out.parent() {
        fs::create_dir_all(dir)?;
    }
    save_spectrum(&spectrum, &tmp)?;
    fs::rename(&tmp, out)?;
    let echo = format!(
        "{}.config.toml",
        out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    );
    echo_config(&out.parent().map(Path::to_path_buf).unwrap_or_default(), &echo, config)
}

fn cmd_stats(config: &RunConfig, spectrum: &Path, out: &Path) -> anyhow::Result<()> {
    spectrum_params(spectrum, config)?;
    let (_, eigenvalues) = load_eigenvalues(spectrum)?;
    let stats = spectral_stats(&eigenvalues, &config.analysis)?;
    write_dos(&out.join("dos.csv"), &stats.dos)?;
    write_staircase(&out.join("staircase.csv"), &eigenvalues, &stats.staircase)?;
    write_spacing_histogram(&out.join("spacing_hist.csv"), &stats.spacings, &stats.brody)?;
    write_gap_ratio_histogram(&out.join("gap_ratio_hist.csv"), &stats.ratios)?;
    write_json(
        &out.join("stats.json"),
        &json!({
            "window": stats.window,
            "unfold_window": stats.unfold_window,
            "brody": stats.brody,
            "mean_r": stats.ratios.mean_r,
            "ratio_degeneracies": stats.ratios.degeneracies,
            "levels": eigenvalues.len(),
        }),
    )?;
    Ok(())
}

fn cmd_thermo(config: &RunConfig, spectrum: &Path, out: &Path) -> anyhow::Result<()> {
    let params = spectrum_params(spectrum, config)?;
    let (_, eigenvalues) = load_eigenvalues(spectrum)?;
    let stats = spectral_stats(&eigenvalues, &config.analysis)?;
    let bath = bath_spectrum(&params)?;
    let curve = beta_curve(&eigenvalues, &bath, stats.window, config.analysis.beta_grid_points)?;
    write_beta_curve(&out.join("beta_curve.csv"), &curve)?;
    let (rms, max_abs, points) = curve.ensemble_discrepancy();
    write_json(
        &out.join("thermo.json"),
        &json!({
            "window": stats.window,
            "rms_discrepancy": (points > 0).then_some(rms),
            "max_abs_beta": (points > 0).then_some(max_abs),
            "points": points,
        }),
    )?;
    Ok(())
}

fn cmd_rdm(config: &RunConfig, spectrum_path: &Path, out: &Path, dump: &[usize]) -> anyhow::Result<()> {
    spectrum_params(spectrum_path, config)?;
    let spectrum = load_spectrum(spectrum_path)?;
    let stats = spectral_stats(spectrum.eigenvalues(), &config.analysis)?;
    let options = config.analysis.rdm();
    let verdicts = analyze_states(&spectrum, 0..spectrum.dimension(), &options)?;
    write_verdicts(&out.join("verdicts.csv"), &verdicts, stats.window)?;
    for &alpha in dump {
        let analysis = analyze_state(&spectrum, alpha, &options)?;
        write_state_dump(&out.join("states").join(format!("alpha_{alpha}")), &analysis)?;
    }
    Ok(())
}

fn cmd_sweep(config: &RunConfig, out: &Path) -> anyhow::Result<()> {
    let sweep = config.sweep_config()?;
    let cache = config.run.cache.as_ref().map(Cache::new);
    let result = run_sweep(&sweep, config.budget(), cache.as_ref())?;
    write_sweep(out, &result)?;
    Ok(())
}

fn cmd_report(results: &Path, out: &Path) -> anyhow::Result<()> {
    for path in write_report(results, out)? {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli, config: &RunConfig) -> anyhow::Result<()> {
    if let Some(n) = config.run.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Spectrum { out, verify, .. } => cmd_spectrum(config, out, *verify)?,
        Command::Stats { spectrum, out, .. } => cmd_stats(config, spectrum, out)?,
        Command::Thermo { spectrum, out, .. } => cmd_thermo(config, spectrum, out)?,
        Command::Rdm { spectrum, out, dump, .. } => cmd_rdm(config, spectrum, out, dump)?,
        Command::Sweep { out, .. } => cmd_sweep(config, out)?,
        Command::Report { results, out } => cmd_report(results, out)?,
    }
    if !matches!(cli.command, Command::Spectrum { .. }) {
        echo_config(&cli.command.out_dir(), RESOLVED_CONFIG, config)?;
    }
    Ok(())
}

/// `(exit code, kind)` for an error chain.
fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::InvalidParams(_) | Error::InvalidConfig(_) | Error::Toml(_)) => (2, "validation"),
        Some(Error::Capacity { .. }) => (3, "capacity"),
        Some(
            Error::SpectrumFormat { .. } | Error::UnsupportedVersion(_) | Error::ParamsMismatch | Error::Io(_),
        ) => (4, "input"),
        _ => (1, "runtime"),
    }
}

fn report_error(err: &anyhow::Error) -> ExitCode {
    let (code, kind) = classify(err);
    let message = format!("{err:#}");
    eprintln!("{}", json!({ "error": kind, "exit_code": code, "message": message }));
    ExitCode::from(code)
}

/// OpenBLAS reads `OPENBLAS_CORETYPE` once, when the library loads, so the
/// pin has to be in the environment before the process starts. Returns the
/// child's exit code when the command was re-run.
fn pin_blas_kernel() -> Option<ExitCode> {
    if std::env::var_os("OPENBLAS_CORETYPE").is_some() {
        return None;
    }
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx2") {
        let exe = std::env::current_exe().ok()?;
        let status = std::process::Command::new(exe)
            .args(std::env::args_os().skip(1))
            .env("OPENBLAS_CORETYPE", "Haswell")
            .status()
            .ok()?;
        return Some(ExitCode::from(status.code().unwrap_or(1) as u8));
    }
    None
}

fn main() -> ExitCode {
    if let Some(code) = pin_blas_kernel() {
        return code;
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let config = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => return report_error(&e),
    };
    let out_dir = cli.command.out_dir();
    let marker = out_dir.join(INCOMPLETE_MARKER);
    let _ = fs::remove_file(&marker);
    match run(&cli, &config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if out_dir.is_dir() {
                let _ = fs::write(&marker, format!("{e:#}\n"));
            }
            report_error(&e)
        }
    }
}
