//! Parameter sweeps: stress-test severity versus ramp slope or upper
//! potential (simulation sweeps), and the kinetic rate tables versus
//! temperature or particle diameter.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};

use ptcl::analysis::{fit_slope, prognosis};
use ptcl::output::{self, VGrid};
use ptcl::pde::{run_simulation, Mesh, SolverConfig};
use ptcl::voltage::VoltageProtocol;
use ptcl::{Error, Result};

use crate::run::write_to;
use crate::{load_params, sig3};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    /// Ramp slope in V/s at fixed V_max; `inf` selects the square wave.
    Alpha,
    /// Upper potential at fixed ramp slope.
    Vmax,
    /// Temperature rate tables.
    T,
    /// Particle-diameter rate tables.
    DPt,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Comma-separated values; defaults depend on the axis.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub temp: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub cycles: u32,
    #[arg(long, default_value_t = 10)]
    pub nx: usize,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Lower potential of the swept ramps.
    #[arg(long, default_value_t = 0.6)]
    pub vmin: f64,
    /// Fixed V_max for the alpha axis.
    #[arg(long, default_value_t = 0.9)]
    pub vmax: f64,
    /// Fixed ramp slope in V/s for the vmax axis.
    #[arg(long, default_value_t = 0.03)]
    pub alpha: f64,
    #[arg(long, default_value = "out/sweep")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RateSweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub temp: Option<f64>,
    /// Particle diameters in cm.
    #[arg(long, value_delimiter = ',',
          default_value = "2e-7,2.5e-7,3e-7,3.5e-7,4e-7")]
    pub d_list: Vec<f64>,
    /// Temperatures in K.
    #[arg(long, value_delimiter = ',',
          default_value = "323.15,333.15,343.15,353.15,363.15")]
    pub t_list: Vec<f64>,
    /// Potential grid `lo:hi:n`.
    #[arg(long, default_value = "0.9:1.2:61")]
    pub vgrid: String,
    #[arg(long, default_value = "out/rates")]
    pub out: PathBuf,
}

fn parse_values(raw: &[String], default: &[&str]) -> Result<Vec<f64>> {
    let source: Vec<String> = if raw.is_empty() {
        default.iter().map(|s| s.to_string()).collect()
    } else {
        raw.to_vec()
    };
    if source.is_empty() {
        return Err(Error::Config("empty sweep value list".to_string()));
    }
    source
        .iter()
        .map(|s| {
            let t = s.trim();
            if t.eq_ignore_ascii_case("inf") {
                Ok(f64::INFINITY)
            } else {
                t.parse::<f64>()
                    .map_err(|_| Error::Config(format!("non-numeric sweep value `{t}`")))
            }
        })
        .collect()
}

fn parse_vgrid(raw: &str) -> Result<VGrid> {
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("vgrid must be lo:hi:n, got `{raw}`")));
    }
    let lo: f64 = parts[0].parse().map_err(|_| Error::Config("bad vgrid lo".into()))?;
    let hi: f64 = parts[1].parse().map_err(|_| Error::Config("bad vgrid hi".into()))?;
    let n: usize = parts[2].parse().map_err(|_| Error::Config("bad vgrid n".into()))?;
    if !(hi > lo) || n < 2 {
        return Err(Error::Config(format!("degenerate vgrid `{raw}`")));
    }
    Ok(VGrid { lo, hi, n })
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    match args.axis {
        SweepAxis::Alpha => {
            let values = parse_values(&args.values, &["0.03", "0.06", "inf"])?;
            simulation_sweep(args, "alpha", &values, |v| {
                if v.is_infinite() {
                    VoltageProtocol::pi(args.vmin, args.vmax, 10.0)
                } else {
                    VoltageProtocol::angle_from_slope(args.vmin, args.vmax, v)
                }
            })
        }
        SweepAxis::Vmax => {
            let values = parse_values(&args.values, &["0.9", "0.95", "1.0"])?;
            simulation_sweep(args, "vmax", &values, |v| {
                VoltageProtocol::angle_from_slope(args.vmin, v, args.alpha)
            })
        }
        SweepAxis::T => {
            let values = parse_values(
                &args.values,
                &["323.15", "333.15", "343.15", "353.15", "363.15"],
            )?;
            let params = load_params(&args.config, args.temp)?;
            std::fs::create_dir_all(&args.out)?;
            write_to(args.out.join("rates_vs_T.csv"), |w| {
                output::write_rates_vs_temperature_csv(w, &params, &values, &VGrid::default())
                    .map_err(|e| std::io::Error::other(e.to_string()))
            })?;
            println!("wrote {}", args.out.join("rates_vs_T.csv").display());
            Ok(())
        }
        SweepAxis::DPt => {
            let values =
                parse_values(&args.values, &["2e-7", "2.5e-7", "3e-7", "3.5e-7", "4e-7"])?;
            let params = load_params(&args.config, args.temp)?;
            std::fs::create_dir_all(&args.out)?;
            write_to(args.out.join("rates_vs_d.csv"), |w| {
                output::write_rates_vs_diameter_csv(w, &params, &values, &VGrid::default())
                    .map_err(|e| std::io::Error::other(e.to_string()))
            })?;
            println!("wrote {}", args.out.join("rates_vs_d.csv").display());
            Ok(())
        }
    }
}

fn simulation_sweep<F>(args: &SweepArgs, axis: &str, values: &[f64], protocol_of: F) -> Result<()>
where
    F: Fn(f64) -> Result<VoltageProtocol<f64>> + Sync,
{
    let params = load_params(&args.config, args.temp)?;
    std::fs::create_dir_all(&args.out)?;
    let mesh = Mesh::uniform(params.l, args.nx)?;

    // One worker per value; runs are independent.
    let results: Vec<Result<(f64, f64, f64, f64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = values
            .iter()
            .map(|&v| {
                let params = &params;
                let mesh = &mesh;
                let protocol_of = &protocol_of;
                scope.spawn(move || -> Result<(f64, f64, f64, f64)> {
                    let proto = protocol_of(v)?;
                    let mut config =
                        SolverConfig::for_protocol(&proto).with_cycles(args.cycles);
                    if let Some(dt) = args.dt {
                        config.tau = dt;
                    }
                    let res = run_simulation(&proto, &config, params, mesh)?;
                    let series = res.mass_series(params)?;
                    let fit = fit_slope(&series, None)?;
                    let prog = prognosis(fit.slope, proto.period(), 1.0);
                    Ok((
                        v,
                        fit.slope,
                        prog.cycles_to_failure.unwrap_or(f64::INFINITY),
                        prog.hours_to_failure.unwrap_or(f64::INFINITY),
                    ))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });

    let mut rows = Vec::new();
    for r in results {
        rows.push(r?);
    }

    let path = args.out.join("slopes.csv");
    write_to(path.clone(), |w| {
        writeln!(w, "{axis},slope_per_cycle,cycles_to_failure,hours_to_failure")?;
        for (v, slope, cyc, hrs) in &rows {
            writeln!(
                w,
                "{},{},{},{}",
                output::fmt_cell(*v),
                output::fmt_cell(*slope),
                output::fmt_cell(*cyc),
                output::fmt_cell(*hrs)
            )?;
        }
        Ok(())
    })?;

    println!("{axis:<10} slope/cycle   cycles-to-failure   hours");
    for (v, slope, cyc, hrs) in &rows {
        println!("{:<10} {:<13} {:<19} {}", sig3(*v), sig3(*slope), sig3(*cyc), sig3(*hrs));
    }
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_rate_sweep(args: &RateSweepArgs) -> Result<()> {
    if args.d_list.is_empty() || args.t_list.is_empty() {
        return Err(Error::Config("empty diameter or temperature list".to_string()));
    }
    let params = load_params(&args.config, args.temp)?;
    let grid = parse_vgrid(&args.vgrid)?;
    std::fs::create_dir_all(&args.out)?;
    write_to(args.out.join("rates_vs_d.csv"), |w| {
        output::write_rates_vs_diameter_csv(w, &params, &args.d_list, &grid)
            .map_err(|e| std::io::Error::other(e.to_string()))
    })?;
    write_to(args.out.join("rates_vs_T.csv"), |w| {
        output::write_rates_vs_temperature_csv(w, &params, &args.t_list, &grid)
            .map_err(|e| std::io::Error::other(e.to_string()))
    })?;
    println!("wrote {} and rates_vs_T.csv", args.out.join("rates_vs_d.csv").display());
    Ok(())
}
