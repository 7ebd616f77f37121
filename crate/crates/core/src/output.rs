//! Deterministic CSV emission.
//!
//! Every numeric cell is printed with 17 significant digits
//! (`{:.16e}`), which round-trips `f64` exactly: identical runs produce
//! byte-identical files, and downstream comparisons against stored output
//! are exact. No timestamps appear in data files.

use std::io::{self, Write};

use crate::analysis::MassSeries;
use crate::kinetics::{KineticState, Kinetics};
use crate::nondiffusive::{first_integral, PointRun};
use crate::params::ModelParams;
use crate::pde::SimulationResult;
use crate::scalar::Scalar;
use crate::voltage::VoltageProtocol;
use crate::Result;

/// Full-precision cell formatting: 17 significant digits.
pub fn fmt_cell<T: Scalar>(x: T) -> String {
    format!("{x:.16e}")
}

/// Per-sample CL means: `t,V,mean_c,mean_d,mean_theta,mean_r_dissol_x100,
/// mean_r_oxide`.
pub fn write_means_csv<T: Scalar, W: Write>(w: &mut W, res: &SimulationResult<T>) -> io::Result<()> {
    writeln!(w, "t,V,mean_c,mean_d,mean_theta,mean_r_dissol_x100,mean_r_oxide")?;
    let hundred = T::from_f64(100.0).unwrap();
    for s in &res.samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt_cell(s.t),
            fmt_cell(s.v),
            fmt_cell(s.c),
            fmt_cell(s.d),
            fmt_cell(s.theta),
            fmt_cell(s.r_dissol * hundred),
            fmt_cell(s.r_oxide)
        )?;
    }
    Ok(())
}

/// Long-format fields at stored snapshots: `t,x,c,d,theta`.
pub fn write_fields_csv<T: Scalar, W: Write>(
    w: &mut W,
    res: &SimulationResult<T>,
) -> io::Result<()> {
    writeln!(w, "t,x,c,d,theta")?;
    for snap in &res.snapshots {
        for (i, &x) in res.nodes.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_cell(snap.t),
                fmt_cell(x),
                fmt_cell(snap.c[i]),
                fmt_cell(snap.d[i]),
                fmt_cell(snap.theta[i])
            )?;
        }
    }
    Ok(())
}

/// Point-model trajectory: `t,c,d,theta,first_integral,V`.
pub fn write_ode_csv<T: Scalar, W: Write>(
    w: &mut W,
    run: &PointRun<T>,
    protocol: &VoltageProtocol<T>,
    params: &ModelParams<T>,
) -> Result<()> {
    writeln!(w, "t,c,d,theta,first_integral,V")?;
    for s in &run.states {
        let fi = first_integral(s, params)?;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_cell(s.t),
            fmt_cell(s.c),
            fmt_cell(s.d),
            fmt_cell(s.theta),
            fmt_cell(fi),
            fmt_cell(protocol.evaluate(s.t))
        )?;
    }
    Ok(())
}

/// Mean mass fraction at cycle boundaries: `cycle,t,m_pt`.
pub fn write_mass_cycles_csv<T: Scalar, W: Write>(
    w: &mut W,
    series: &MassSeries<T>,
) -> io::Result<()> {
    writeln!(w, "cycle,t,m_pt")?;
    for e in &series.entries {
        writeln!(w, "{},{},{}", e.cycle, fmt_cell(e.t), fmt_cell(e.mean))?;
    }
    Ok(())
}

/// Nodewise mass fraction at cycle boundaries, long format:
/// `cycle,x,m_pt`.
pub fn write_mass_profile_csv<T: Scalar, W: Write>(
    w: &mut W,
    series: &MassSeries<T>,
    nodes: &[T],
    cycles: &[u32],
) -> io::Result<()> {
    writeln!(w, "cycle,x,m_pt")?;
    for e in &series.entries {
        if !cycles.is_empty() && !cycles.contains(&e.cycle) {
            continue;
        }
        for (i, &x) in nodes.iter().enumerate() {
            if i < e.nodewise.len() {
                writeln!(w, "{},{},{}", e.cycle, fmt_cell(x), fmt_cell(e.nodewise[i]))?;
            }
        }
    }
    Ok(())
}

/// Uniform potential grid for rate sweeps.
#[derive(Debug, Clone, Copy)]
pub struct VGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for VGrid {
    fn default() -> Self {
        VGrid { lo: 0.9, hi: 1.2, n: 61 }
    }
}

impl VGrid {
    pub fn values<T: Scalar>(&self) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                T::from_f64(self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64)
                    .unwrap()
            })
            .collect()
    }
}

/// Dissolution-rate sweep over the potential grid for a list of particle
/// diameters (fixed `c = 3e-10` mol/cm³, bare surface). Wide format:
/// one `r_dissol` column per diameter and one shared `r_oxide` column
/// (the oxide rate does not depend on the diameter).
pub fn write_rates_vs_diameter_csv<T: Scalar, W: Write>(
    w: &mut W,
    params: &ModelParams<T>,
    d_list: &[T],
    grid: &VGrid,
) -> Result<()> {
    let kin = Kinetics::new(params);
    let c_fix = T::from_f64(3e-10).unwrap();
    let mut header = String::from("V");
    for &d in d_list {
        header.push_str(&format!(",r_dissol_d_{}", fmt_cell(d)));
    }
    header.push_str(",r_oxide");
    writeln!(w, "{header}")?;
    for v in grid.values::<T>() {
        let mut row = fmt_cell(v);
        for &d in d_list {
            let r = kin.r_dissol(&KineticState { c: c_fix, d, theta: T::zero(), v })?;
            row.push(',');
            row.push_str(&fmt_cell(r));
        }
        let ro = kin.r_oxide(T::zero(), v)?;
        row.push(',');
        row.push_str(&fmt_cell(ro));
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Rate sweep over the potential grid for a list of temperatures at the
/// reference diameter: per-temperature `r_dissol` and `r_oxide` columns.
pub fn write_rates_vs_temperature_csv<T: Scalar, W: Write>(
    w: &mut W,
    params: &ModelParams<T>,
    t_list: &[T],
    grid: &VGrid,
) -> Result<()> {
    let c_fix = T::from_f64(3e-10).unwrap();
    let mut header = String::from("V");
    for &tk in t_list {
        header.push_str(&format!(",r_dissol_T_{}", fmt_cell(tk)));
    }
    for &tk in t_list {
        header.push_str(&format!(",r_oxide_T_{}", fmt_cell(tk)));
    }
    writeln!(w, "{header}")?;
    let param_sets: Vec<ModelParams<T>> =
        t_list.iter().map(|&tk| params.clone().with_temperature(tk)).collect();
    for v in grid.values::<T>() {
        let mut row = fmt_cell(v);
        for ps in &param_sets {
            let kin = Kinetics::new(ps);
            let r =
                kin.r_dissol(&KineticState { c: c_fix, d: params.d_pt, theta: T::zero(), v })?;
            row.push(',');
            row.push_str(&fmt_cell(r));
        }
        for ps in &param_sets {
            let kin = Kinetics::new(ps);
            row.push(',');
            row.push_str(&fmt_cell(kin.r_oxide(T::zero(), v)?));
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nondiffusive::{run_point, PointState};
    use crate::pde::{run_simulation, Mesh, SolverConfig};

    #[test]
    fn cell_format_round_trips() {
        for &x in &[0.1_f64, 3e-7, 1.0 / 3.0, 2.5701840142758075e-9, 1e-300] {
            let s = fmt_cell(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn csv_emission_is_deterministic() {
        let p = ModelParams::table_defaults();
        let proto = VoltageProtocol::constant(0.65);
        let mesh = Mesh::uniform(p.l, 10).unwrap();
        let config = SolverConfig::for_protocol(&proto).with_cycles(1);
        let res = run_simulation(&proto, &config, &p, &mesh).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_means_csv(&mut a, &res).unwrap();
        write_means_csv(&mut b, &res).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with(b"t,V,mean_c"));
    }

    #[test]
    fn ode_csv_has_expected_columns() {
        let p = ModelParams::table_defaults();
        let proto = VoltageProtocol::constant(0.65);
        let run = run_point(&PointState::initial(&p), &proto, 0.1, 1e-3, &p).unwrap();
        let mut buf = Vec::new();
        write_ode_csv(&mut buf, &run, &proto, &p).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,c,d,theta,first_integral,V");
        assert_eq!(lines.next().unwrap().split(',').count(), 6);
    }

    #[test]
    fn rate_sweep_files_have_monotone_dissolution_columns() {
        let p = ModelParams::table_defaults();
        let mut buf = Vec::new();
        let ds: Vec<f64> = vec![2e-7, 2.5e-7, 3e-7, 3.5e-7, 4e-7];
        write_rates_vs_diameter_csv(&mut buf, &p, &ds, &VGrid::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<Vec<f64>> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        // Increasing in V down each column, decreasing in d across columns.
        for pair in rows.windows(2) {
            for col in 1..=ds.len() {
                assert!(pair[1][col] > pair[0][col]);
            }
        }
        for row in &rows {
            for col in 1..ds.len() {
                assert!(row[col + 1] < row[col]);
            }
        }
    }
}
