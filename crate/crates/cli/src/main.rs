use std::path::PathBuf;
use std::process::ExitCode;

use blockade_lab::config::{Method, Mode, RunConfig, SweepAxis};
use blockade_lab::{exit, run, UsageError};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "blockade-lab", version, about = "Spectra and photon correlations of an optomechanical cavity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Excitation spectrum over the laser detuning.
    Spectrum(Flags),
    /// Equal-time second-order correlation over the laser detuning.
    G2(Flags),
    /// Minimum correlation over the detuning on a (g0, kappa) grid.
    G2Map(Flags),
    /// Analytic results against the master-equation oracle.
    OracleCompare(Flags),
}

/// Frequencies accept Hz, kHz, MHz, GHz, rad/s, or `w` (multiples of
/// omega_m); bare numbers are rad/s. Temperatures accept K, mK, uK, nK, or
/// `nbar`.
#[derive(Args)]
struct Flags {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    g0: Option<String>,
    #[arg(long = "omega-m")]
    omega_m: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    /// Mechanical quality factor, or `inf`.
    #[arg(long = "Q")]
    q: Option<String>,
    #[arg(long = "T")]
    temperature: Option<String>,
    /// Drive amplitude; the oracle extrapolates from it and twice it.
    #[arg(long)]
    drive: Option<String>,
    /// Comma-separated drive amplitudes for the oracle extrapolation.
    #[arg(long, value_delimiter = ',')]
    drives: Vec<String>,
    /// Laser detuning from the bare cavity; defaults to -Delta_g.
    #[arg(long, allow_hyphen_values = true)]
    delta0: Option<String>,
    /// var:start:stop:points[:log], var one of delta0, g0, kappa, T, Q.
    #[arg(long, allow_hyphen_values = true)]
    sweep: Vec<String>,
    #[arg(long)]
    method: Option<String>,
    /// Search the minimum over several sidebands (g2-map).
    #[arg(long)]
    full_range: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_timestamp: bool,
    #[arg(long, env = "BLOCKADE_LAB_WORKERS")]
    workers: Option<usize>,
}

impl Flags {
    fn to_config(&self, mode: Mode) -> Result<RunConfig, UsageError> {
        let q = |s: &Option<String>| s.as_deref().map(Into::into);
        Ok(RunConfig {
            mode: Some(mode),
            g0: q(&self.g0),
            omega_m: q(&self.omega_m),
            kappa: q(&self.kappa),
            q: q(&self.q),
            temperature: q(&self.temperature),
            drive: q(&self.drive),
            delta0: q(&self.delta0),
            sweep: self.sweep.iter().map(|s| s.parse::<SweepAxis>()).collect::<Result<_, _>>()?,
            method: self.method.as_deref().map(str::parse::<Method>).transpose()?,
            full_range: self.full_range.then_some(true),
            out: self.out.clone(),
            no_timestamp: self.no_timestamp.then_some(true),
            workers: self.workers,
            quadrature: None,
            truncation: None,
            drives: (!self.drives.is_empty()).then(|| self.drives.iter().map(|s| s.as_str().into()).collect()),
        })
    }
}

fn effective_config(flags: &Flags, mode: Mode) -> Result<RunConfig, UsageError> {
    let file = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| UsageError(format!("config: {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if file.mode.is_some_and(|m| m != mode) {
        return Err(UsageError(format!("config: mode {} does not match subcommand {mode}", file.mode.unwrap())));
    }
    Ok(file.merge(flags.to_config(mode)?))
}

fn run(flags: &Flags, mode: Mode) -> Result<u8, UsageError> {
    let config = effective_config(flags, mode)?;
    let resolved = config.resolve()?;
    let report = run::execute(&resolved)?;
    let csv = report.to_csv(&config.to_json(), !resolved.no_timestamp);
    match &resolved.out {
        Some(path) => {
            std::fs::write(path, csv).map_err(|e| UsageError(format!("out: {}: {e}", path.display())))?;
            for line in &report.summary {
                println!("{line}");
            }
        }
        None => {
            print!("{csv}");
            for line in &report.summary {
                println!("# {line}");
            }
        }
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (flags, mode) = match &cli.command {
        Command::Spectrum(f) => (f, Mode::Spectrum),
        Command::G2(f) => (f, Mode::G2),
        Command::G2Map(f) => (f, Mode::G2Map),
        Command::OracleCompare(f) => (f, Mode::OracleCompare),
    };
    match run(flags, mode) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::USAGE)
        }
    }
}
