//! The `run` / `run-pde` / `run-ode` subcommands and the hidden
//! `oracle-check`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use ptcl::analysis::{fit_slope, prognosis, MassSeries, PrognosisReport, SlopeFit};
use ptcl::nondiffusive::PointState;
use ptcl::oracle::{analytic_c, FrozenCoefficients, Quadrature};
use ptcl::output;
use ptcl::params::ModelParams;
use ptcl::pde::{default_tau, run_simulation, Mesh, SolverConfig};
use ptcl::voltage::default_protocols;
use ptcl::{Error, ModelParams64, Protocol64, Result};

use crate::manifest::{now_unix, Manifest, ParamsDump, ProtocolDump, SolverDump};
use crate::{build_protocol, load_params, sig3, OracleArgs, RunArgs};

#[derive(Serialize)]
struct Summary {
    protocol: String,
    mode: String,
    n_cycles: u32,
    tau_effective: f64,
    slope_per_cycle: Option<f64>,
    fit_r_squared: Option<f64>,
    fit_window: Option<(u32, u32)>,
    cycles_to_failure: Option<f64>,
    hours_to_failure: Option<f64>,
    theta_min_post_transient: Option<f64>,
    theta_max_post_transient: Option<f64>,
    peak_mean_c: Option<f64>,
    final_mean_mass: Option<f64>,
    first_integral_drift: Option<f64>,
    clamp_events: u64,
}

pub fn cmd_run(args: &mut RunArgs) -> Result<()> {
    let params = load_params(&args.config, args.temp)?;
    let protocol = build_protocol(args)?;
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(protocol.name()));
    std::fs::create_dir_all(&out_dir)?;
    let summary_path = args.summary.clone().unwrap_or_else(|| out_dir.join("summary.json"));

    let shape_tau = default_tau(protocol.shape());
    let tau = args.dt.unwrap_or(shape_tau);
    if protocol.has_jump() && tau > shape_tau * 1.0000001 {
        eprintln!(
            "warning: dt = {tau:.1e} s is above the recommended {shape_tau:.1e} s for the \
             {} protocol; its switching transients need the smaller step",
            protocol.name()
        );
    }

    let started = Instant::now();
    if args.ode {
        run_ode(args, &params, &protocol, tau, &out_dir, &summary_path, started)
    } else {
        run_pde(args, &params, &protocol, tau, &out_dir, &summary_path, started)
    }
}

#[allow(clippy::too_many_arguments)]
fn run_pde(
    args: &RunArgs,
    params: &ModelParams64,
    protocol: &Protocol64,
    tau: f64,
    out_dir: &Path,
    summary_path: &Path,
    started: Instant,
) -> Result<()> {
    let mesh = Mesh::uniform(params.l, args.nx)?;
    let mut config = SolverConfig::for_protocol(protocol).with_cycles(args.cycles);
    config.tau = tau;
    config.stride = args.stride;

    let res = run_simulation(protocol, &config, params, &mesh)?;
    let series = res.mass_series(params)?;

    let fit = fit_slope(&series, None).ok();
    let prog = fit.map(|f| prognosis(f.slope, protocol.period(), 1.0));

    write_to(out_dir.join("means.csv"), |w| output::write_means_csv(w, &res))?;
    write_to(out_dir.join("fields.csv"), |w| output::write_fields_csv(w, &res))?;
    write_to(out_dir.join("mass_cycles.csv"), |w| output::write_mass_cycles_csv(w, &series))?;
    write_to(out_dir.join("mass_profile.csv"), |w| {
        output::write_mass_profile_csv(w, &series, &res.nodes, &[])
    })?;

    let theta_range = res.theta_range_after(2.0 * protocol.period());
    let summary = Summary {
        protocol: protocol.name().to_string(),
        mode: "pde".to_string(),
        n_cycles: args.cycles,
        tau_effective: res.tau_effective,
        slope_per_cycle: fit.map(|f| f.slope),
        fit_r_squared: fit.map(|f| f.r_squared),
        fit_window: fit.map(|f| f.window),
        cycles_to_failure: prog.as_ref().and_then(|p| p.cycles_to_failure),
        hours_to_failure: prog.as_ref().and_then(|p| p.hours_to_failure),
        theta_min_post_transient: theta_range.map(|r| r.0),
        theta_max_post_transient: theta_range.map(|r| r.1),
        peak_mean_c: Some(res.peak_mean_c()),
        final_mean_mass: series.entries.last().map(|e| e.mean),
        first_integral_drift: None,
        clamp_events: res.clamps.total(),
    };
    write_summary(summary_path, &summary)?;

    let manifest = Manifest {
        tool: "ptcl",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: "run-pde".to_string(),
        params: ParamsDump::new(params),
        protocol: ProtocolDump::new(protocol),
        solver: SolverDump {
            tau_requested: tau,
            tau_effective: res.tau_effective,
            steps_per_cycle: res.steps_per_cycle,
            n_cycles: args.cycles,
            stride: args.stride,
            nx: args.nx,
            mode: "pde".to_string(),
        },
        outputs: ["means.csv", "fields.csv", "mass_cycles.csv", "mass_profile.csv"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        created_unix: now_unix(),
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    crate::manifest::write_manifest(&out_dir.join("manifest.json"), &manifest)?;

    print_prognosis_table(protocol, &fit, &prog);
    println!("wrote {}", out_dir.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_ode(
    args: &RunArgs,
    params: &ModelParams64,
    protocol: &Protocol64,
    tau: f64,
    out_dir: &Path,
    summary_path: &Path,
    started: Instant,
) -> Result<()> {
    use ptcl::nondiffusive::first_integral;

    // Integrate cycle by cycle so cycle-end masses are exact states.
    let mut state = PointState::initial(params);
    let mut all = Vec::new();
    let mut cycle_means = vec![(0u32, 1.0f64)];
    let mut clamps = ptcl::nondiffusive::ClampStats::default();
    let mut tau_eff = tau;
    let mut steps_per_cycle = 0;
    let derived = params.derive()?;
    let store_stride = ((protocol.period() / tau) as usize / 256).max(1);
    for cycle in 0..args.cycles {
        let run = ptcl::nondiffusive::run_point_with(
            &state,
            protocol,
            protocol.period(),
            tau,
            params,
            Default::default(),
            store_stride,
        )?;
        state = *run.states.last().unwrap();
        tau_eff = run.dt_effective;
        steps_per_cycle = run.steps_per_cycle;
        clamps.merge(&run.clamps);
        for (i, s) in run.states.iter().enumerate() {
            if (cycle == 0 && i == 0) || i > 0 {
                all.push(*s);
            }
        }
        cycle_means
            .push((cycle + 1, ptcl::analysis::mass_fraction(state.d, derived.v_pt)));
    }

    let run_all = ptcl::nondiffusive::PointRun {
        states: all,
        clamps,
        dt_effective: tau_eff,
        steps_per_cycle,
        total_steps: steps_per_cycle * args.cycles as u64,
    };
    write_to(out_dir.join("ode.csv"), |w| {
        output::write_ode_csv(w, &run_all, protocol, params).map_err(io_shim)
    })?;

    let series = MassSeries::from_means(&cycle_means);
    let fit = fit_slope(&series, None).ok();
    let prog = fit.map(|f| prognosis(f.slope, protocol.period(), 1.0));

    let fi0 = first_integral(&PointState::initial(params), params)?;
    let drift = run_all
        .states
        .iter()
        .map(|s| (first_integral(s, params).unwrap() - fi0).abs() / fi0)
        .fold(0.0f64, f64::max);

    let summary = Summary {
        protocol: protocol.name().to_string(),
        mode: "ode".to_string(),
        n_cycles: args.cycles,
        tau_effective: tau_eff,
        slope_per_cycle: fit.map(|f| f.slope),
        fit_r_squared: fit.map(|f| f.r_squared),
        fit_window: fit.map(|f| f.window),
        cycles_to_failure: prog.as_ref().and_then(|p| p.cycles_to_failure),
        hours_to_failure: prog.as_ref().and_then(|p| p.hours_to_failure),
        theta_min_post_transient: None,
        theta_max_post_transient: None,
        peak_mean_c: Some(run_all.states.iter().map(|s| s.c).fold(0.0, f64::max)),
        final_mean_mass: cycle_means.last().map(|e| e.1),
        first_integral_drift: Some(drift),
        clamp_events: run_all.clamps.total(),
    };
    write_summary(summary_path, &summary)?;

    let manifest = Manifest {
        tool: "ptcl",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: "run-ode".to_string(),
        params: ParamsDump::new(params),
        protocol: ProtocolDump::new(protocol),
        solver: SolverDump {
            tau_requested: tau,
            tau_effective: tau_eff,
            steps_per_cycle,
            n_cycles: args.cycles,
            stride: args.stride,
            nx: 0,
            mode: "ode".to_string(),
        },
        outputs: vec!["ode.csv".to_string()],
        created_unix: now_unix(),
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    crate::manifest::write_manifest(&out_dir.join("manifest.json"), &manifest)?;

    print_prognosis_table(protocol, &fit, &prog);
    println!("first-integral drift: {}", sig3(drift));
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn io_shim(e: Error) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

fn print_prognosis_table(
    protocol: &Protocol64,
    fit: &Option<SlopeFit<f64>>,
    prog: &Option<PrognosisReport<f64>>,
) {
    println!("protocol   slope/cycle   R^2     cycles-to-failure   time-to-failure");
    let (slope, r2) = match fit {
        Some(f) => (sig3(f.slope), sig3(f.r_squared)),
        None => ("-".to_string(), "-".to_string()),
    };
    let (cyc, hrs) = match prog {
        Some(p) => (
            p.cycles_to_failure.map_or("no loss".to_string(), sig3),
            p.hours_to_failure.map_or("-".to_string(), |h| format!("{} h", sig3(h))),
        ),
        None => ("-".to_string(), "-".to_string()),
    };
    println!("{:<10} {:<13} {:<7} {:<19} {}", protocol.name(), slope, r2, cyc, hrs);
}

fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let file = File::create(path)?;
    serde_json::to_writer_pretty(BufWriter::new(file), summary)
        .map_err(|e| Error::Config(format!("summary serialization: {e}")))?;
    Ok(())
}

pub fn write_to<F>(path: PathBuf, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(&path)?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn cmd_oracle_check(args: &OracleArgs) -> Result<()> {
    let params = ModelParams::table_defaults();
    let frozen = FrozenCoefficients::new(params.d_pt, 0.0, &params)?;
    let quad = Quadrature::default();
    let opts =
        ptcl::nondiffusive::ReactionOptions { freeze_particles: true, oxide_enabled: true };
    let mut worst: f64 = 0.0;
    for proto in default_protocols::<f64>() {
        let init = PointState::initial(&params);
        let run = ptcl::nondiffusive::run_point_with(
            &init,
            &proto,
            args.t_end,
            args.dt,
            &params,
            opts,
            usize::MAX,
        )?;
        let end = run.states.last().unwrap();
        let reference = analytic_c(&proto, end.t, &frozen, &quad)?;
        let rel = (end.c - reference).abs() / reference.abs().max(end.c.abs());
        worst = worst.max(rel);
        println!(
            "{:<9} rk4 = {:.9e}  reference = {:.9e}  rel = {:.3e}  [{}]",
            proto.name(),
            end.c,
            reference,
            rel,
            if rel < args.tol { "ok" } else { "FAIL" }
        );
    }
    if worst < args.tol {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "integrator disagrees with the frozen-coefficient reference: {worst:.3e} >= {:.1e}",
            args.tol
        )))
    }
}
