//! `ptcl`: Pt catalyst-layer degradation runs, sweeps, and reports.

mod figures;
mod manifest;
mod run;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ptcl", version, about = "Pt catalyst degradation in a PEM fuel-cell cathode")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a simulation and write CSVs, a JSON summary, and a manifest.
    Run(RunArgs),
    /// Run the reaction-diffusion model (same as `run` without `--ode`).
    RunPde(RunArgs),
    /// Run the space-free point model.
    RunOde(RunArgs),
    /// Sweep a parameter axis: simulations for `alpha`/`vmax`, rate tables
    /// for `T`/`d_Pt`.
    Sweep(sweep::SweepArgs),
    /// Emit the rate-sweep CSV tables for diameter and temperature lists.
    RateSweep(sweep::RateSweepArgs),
    /// Emit gnuplot scripts that render the standard figures from run CSVs.
    Figures(figures::FigArgs),
    #[command(hide = true)]
    /// CI check: integrator against the frozen-coefficient reference.
    OracleCheck(OracleArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolName {
    Lambda,
    Pi,
    Angle,
    Constant,
}

#[derive(Args)]
pub struct RunArgs {
    /// Parameter file (flat `key = value` lines, `#` comments).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "lambda")]
    pub protocol: ProtocolName,
    /// Number of protocol cycles.
    #[arg(long, default_value_t = 10)]
    pub cycles: u32,
    /// Time step in seconds (default depends on the protocol shape).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of mesh intervals.
    #[arg(long, default_value_t = 10)]
    pub nx: usize,
    /// Operating temperature in K (overrides the config file).
    #[arg(long)]
    pub temp: Option<f64>,
    /// Protocol overrides.
    #[arg(long)]
    pub vmin: Option<f64>,
    #[arg(long)]
    pub vmax: Option<f64>,
    #[arg(long)]
    pub period: Option<f64>,
    /// Potential of the constant protocol.
    #[arg(long)]
    pub vconst: Option<f64>,
    /// Output directory (default `out/<protocol>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the JSON summary (default `<out>/summary.json`).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Mean-series sampling stride in steps (0 = auto).
    #[arg(long, default_value_t = 0)]
    pub stride: usize,
    /// Integrate the space-free point model instead of the PDE.
    #[arg(long, default_value_t = false)]
    pub ode: bool,
}

#[derive(Args)]
pub struct OracleArgs {
    /// Comparison time, s.
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    /// Acceptance threshold on the relative disagreement.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(mut args) => run::cmd_run(&mut args),
        Cmd::RunPde(mut args) => {
            args.ode = false;
            run::cmd_run(&mut args)
        }
        Cmd::RunOde(mut args) => {
            args.ode = true;
            run::cmd_run(&mut args)
        }
        Cmd::Sweep(args) => sweep::cmd_sweep(&args),
        Cmd::RateSweep(args) => sweep::cmd_rate_sweep(&args),
        Cmd::Figures(args) => figures::cmd_figures(&args),
        Cmd::OracleCheck(args) => run::cmd_oracle_check(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Three-significant-digit formatting for the human-readable tables.
pub fn sig3(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-3..4).contains(&exp) {
        let decimals = (2 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.2e}")
    }
}

/// Build the protocol from the CLI selection and overrides.
pub fn build_protocol(args: &RunArgs) -> ptcl::Result<ptcl::Protocol64> {
    use ptcl::voltage::VoltageProtocol;
    let proto = match args.protocol {
        ProtocolName::Lambda => VoltageProtocol::lambda(
            args.vmin.unwrap_or(0.6),
            args.vmax.unwrap_or(1.0),
            args.period.unwrap_or(16.0),
        )?,
        ProtocolName::Pi => VoltageProtocol::pi(
            args.vmin.unwrap_or(0.6),
            args.vmax.unwrap_or(0.9),
            args.period.unwrap_or(10.0),
        )?,
        ProtocolName::Angle => VoltageProtocol::angle(
            args.vmin.unwrap_or(0.6),
            args.vmax.unwrap_or(0.95),
            args.period.unwrap_or(10.0),
        )?,
        ProtocolName::Constant => {
            let v = args.vconst.unwrap_or(0.65);
            match args.period {
                Some(p) => VoltageProtocol::constant_with_period(v, p)?,
                None => VoltageProtocol::constant(v),
            }
        }
    };
    Ok(proto)
}

/// Load parameters from the optional config file and apply the temperature
/// override.
pub fn load_params(
    config: &Option<PathBuf>,
    temp: Option<f64>,
) -> ptcl::Result<ptcl::ModelParams64> {
    let mut params = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                ptcl::Error::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            ptcl::params::ModelParams::from_config_str(&text)?
        }
        None => ptcl::params::ModelParams::table_defaults(),
    };
    if let Some(t) = temp {
        params.temperature = t;
        params.validate()?;
    }
    Ok(params)
}
