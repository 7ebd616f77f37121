//! Run manifest: everything needed to reproduce a run, plus wall-clock
//! metadata. Timestamps live only here, never in data files, so data output
//! stays byte-identical across reruns.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use ptcl::{ModelParams64, Protocol64};

#[derive(Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub params: ParamsDump,
    pub protocol: ProtocolDump,
    pub solver: SolverDump,
    pub outputs: Vec<String>,
    pub created_unix: u64,
    pub duration_seconds: f64,
}

#[derive(Serialize)]
pub struct ProtocolDump {
    pub shape: String,
    pub v_min: f64,
    pub v_max: f64,
    pub period: f64,
}

#[derive(Serialize)]
pub struct SolverDump {
    pub tau_requested: f64,
    pub tau_effective: f64,
    pub steps_per_cycle: u64,
    pub n_cycles: u32,
    pub stride: usize,
    pub nx: usize,
    pub mode: String,
}

/// Flat parameter dump using the config-file key names.
#[derive(Serialize)]
pub struct ParamsDump {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "d_Pt")]
    pub d_pt: f64,
    #[serde(rename = "p_Pt")]
    pub p_pt: f64,
    #[serde(rename = "rho_Pt")]
    pub rho_pt: f64,
    pub eps: f64,
    #[serde(rename = "R")]
    pub r_gas: f64,
    #[serde(rename = "F")]
    pub faraday: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub beta1: f64,
    pub n: f64,
    #[serde(rename = "U_eq")]
    pub u_eq: f64,
    #[serde(rename = "Omega")]
    pub omega: f64,
    pub gamma: f64,
    pub c_ref: f64,
    #[serde(rename = "H1_fit")]
    pub h1_fit: f64,
    #[serde(rename = "D_Pt")]
    pub diff_pt: f64,
    #[serde(rename = "pH")]
    pub ph: f64,
    pub nu1_star: f64,
    pub nu2_star: f64,
    #[serde(rename = "Gamma")]
    pub gamma_site: f64,
    pub beta2: f64,
    pub n2: f64,
    #[serde(rename = "U_fit")]
    pub u_fit: f64,
    pub lambda: f64,
    pub omega_int: f64,
    #[serde(rename = "H2_fit")]
    pub h2_fit: f64,
    #[serde(rename = "T")]
    pub temperature: f64,
}

impl ParamsDump {
    pub fn new(p: &ModelParams64) -> Self {
        ParamsDump {
            l: p.l,
            d_pt: p.d_pt,
            p_pt: p.p_pt,
            rho_pt: p.rho_pt,
            eps: p.eps,
            r_gas: p.r_gas,
            faraday: p.faraday,
            nu1: p.nu1,
            nu2: p.nu2,
            beta1: p.beta1,
            n: p.n,
            u_eq: p.u_eq,
            omega: p.omega,
            gamma: p.gamma,
            c_ref: p.c_ref,
            h1_fit: p.h1_fit,
            diff_pt: p.diff_pt,
            ph: p.ph,
            nu1_star: p.nu1_star,
            nu2_star: p.nu2_star,
            gamma_site: p.gamma_site,
            beta2: p.beta2,
            n2: p.n2,
            u_fit: p.u_fit,
            lambda: p.lambda,
            omega_int: p.omega_int,
            h2_fit: p.h2_fit,
            temperature: p.temperature,
        }
    }
}

impl ProtocolDump {
    pub fn new(p: &Protocol64) -> Self {
        ProtocolDump {
            shape: p.name().to_string(),
            v_min: p.v_min(),
            v_max: p.v_max(),
            period: p.period(),
        }
    }
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> ptcl::Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), manifest)
        .map_err(|e| ptcl::Error::Config(format!("manifest serialization: {e}")))?;
    Ok(())
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}
