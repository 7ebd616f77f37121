//! Model parameters and derived geometric quantities.
//!
//! All quantities use the CGS-based unit mix of the source data: lengths in
//! cm, concentrations in mol/cm³, energies in J, times in s, potentials in V,
//! temperatures in K. There is no unit-conversion layer.
//!
//! Parameters load from a flat `key = value` text file (`#` comments allowed);
//! keys use the conventional symbol names (`d_Pt`, `Gamma`, `omega_int`, ...)
//! and unknown keys are rejected. Missing keys fall back to the built-in
//! defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Diameter floor in cm. A particle at or below this size is treated as fully
/// dissolved: its diameter is pinned and its rates are zeroed. The rate laws
/// have a 1/d singularity, so evaluation below the floor is rejected.
pub const D_MIN_CM: f64 = 1e-9;

/// Physical constants and model parameters.
///
/// Field names are snake_case forms of the conventional symbols; the
/// config-file keys (`ModelParams::KEYS`) keep the exact symbol spelling,
/// which distinguishes `d_Pt` (particle diameter) from `D_Pt` (diffusivity)
/// and `gamma` (surface tension) from `Gamma` (site density).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    /// CL thickness, cm (`L`).
    pub l: T,
    /// Initial Pt nanoparticle diameter, cm (`d_Pt`).
    pub d_pt: T,
    /// Pt loading, g/cm² (`p_Pt`).
    pub p_pt: T,
    /// Pt density, g/cm³ (`rho_Pt`).
    pub rho_pt: T,
    /// Ionomer volume fraction in the cathode (`eps`).
    pub eps: T,
    /// Gas constant, J/(mol·K) (`R`).
    pub r_gas: T,
    /// Faraday constant, C/mol (`F`).
    pub faraday: T,
    /// Dissolution attempt frequency, Hz (`nu1`).
    pub nu1: T,
    /// Backward dissolution rate factor, Hz (`nu2`).
    pub nu2: T,
    /// Transfer coefficient for Pt dissolution (`beta1`).
    pub beta1: T,
    /// Electrons transferred during Pt dissolution (`n`).
    pub n: T,
    /// Pt dissolution bulk equilibrium voltage, V (`U_eq`).
    pub u_eq: T,
    /// Molar volume of Pt, cm³/mol (`Omega`).
    pub omega: T,
    /// Pt [1 1 1] surface tension, J/cm² (`gamma`).
    pub gamma: T,
    /// Reference Pt²⁺ concentration, mol/cm³ (`c_ref`).
    pub c_ref: T,
    /// Fit Pt dissolution activation enthalpy, J/mol (`H1_fit`).
    pub h1_fit: T,
    /// Diffusion coefficient of Pt²⁺ in the membrane, cm²/s (`D_Pt`).
    pub diff_pt: T,
    /// Potential of hydrogen ions (`pH`).
    pub ph: T,
    /// Forward Pt oxide formation rate constant, Hz (`nu1_star`).
    pub nu1_star: T,
    /// Backward Pt oxide formation rate constant, Hz (`nu2_star`).
    pub nu2_star: T,
    /// Pt surface site density, mol/cm² (`Gamma`).
    pub gamma_site: T,
    /// Transfer coefficient for PtO formation (`beta2`).
    pub beta2: T,
    /// Electrons transferred during Pt oxide formation (`n2`).
    pub n2: T,
    /// Pt oxide formation bulk equilibrium voltage, V (`U_fit`).
    pub u_fit: T,
    /// PtO-dependent kinetic barrier constant, J/mol (`lambda`).
    pub lambda: T,
    /// Pt oxide-oxide interaction energy, J/mol (`omega_int`).
    pub omega_int: T,
    /// Fit partial molar oxide formation activation enthalpy, J/mol (`H2_fit`).
    pub h2_fit: T,
    /// Operating temperature, K (`T`).
    pub temperature: T,
}

/// Quantities derived from the loading geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams<T> {
    /// Pt volume fraction across the CL: `(p_Pt/rho_Pt)/L`.
    pub eps_pt: T,
    /// Volume of a single spherical particle: `(4/3)π(d_Pt/2)³`, cm³.
    pub v_pt: T,
    /// Pt particle number concentration: `eps_Pt/V_Pt`, 1/cm³.
    pub n_pt: T,
    /// Reaction prefactor of the concentration equation:
    /// `π·N_Pt/(2·eps)`, 1/cm³.
    pub b3: T,
}

impl<T: Scalar> Default for ModelParams<T> {
    fn default() -> Self {
        Self::table_defaults()
    }
}

impl<T: Scalar> ModelParams<T> {
    /// Reference parameter set (80 °C operating point).
    pub fn table_defaults() -> Self {
        ModelParams {
            l: lit(1e-3),
            d_pt: lit(3e-7),
            p_pt: lit(4e-4),
            rho_pt: lit(21.45),
            eps: lit(0.2),
            r_gas: lit(8.31445985),
            faraday: lit(96485.3329),
            nu1: lit(1e4),
            nu2: lit(8e5),
            beta1: lit(0.5),
            n: lit(2.0),
            u_eq: lit(1.18),
            omega: lit(9.09),
            gamma: lit(2.4e-4),
            c_ref: lit(1.0),
            h1_fit: lit(4e4),
            diff_pt: lit(1e-6),
            ph: lit(0.0),
            nu1_star: lit(1e4),
            nu2_star: lit(2e-2),
            gamma_site: lit(2.2e-9),
            beta2: lit(0.5),
            n2: lit(2.0),
            u_fit: lit(0.8),
            lambda: lit(2e4),
            omega_int: lit(5e4),
            h2_fit: lit(1.2e4),
            temperature: lit(353.15),
        }
    }

    /// `R·T`, J/mol.
    pub fn rt(&self) -> T {
        self.r_gas * self.temperature
    }

    pub fn with_temperature(mut self, t_kelvin: T) -> Self {
        self.temperature = t_kelvin;
        self
    }

    /// Check the parameter invariants, naming the offending key on failure.
    pub fn validate(&self) -> Result<()> {
        fn pos<T: Scalar>(key: &str, v: T) -> Result<()> {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParam {
                    key: key.to_string(),
                    reason: format!("must be strictly positive and finite, got {v}"),
                })
            }
        }
        fn unit_open<T: Scalar>(key: &str, v: T) -> Result<()> {
            if v > T::zero() && v < T::one() {
                Ok(())
            } else {
                Err(Error::InvalidParam {
                    key: key.to_string(),
                    reason: format!("must lie strictly inside (0, 1), got {v}"),
                })
            }
        }

        pos("L", self.l)?;
        pos("d_Pt", self.d_pt)?;
        pos("p_Pt", self.p_pt)?;
        pos("rho_Pt", self.rho_pt)?;
        unit_open("eps", self.eps)?;
        pos("R", self.r_gas)?;
        pos("F", self.faraday)?;
        pos("nu1", self.nu1)?;
        pos("nu2", self.nu2)?;
        unit_open("beta1", self.beta1)?;
        pos("n", self.n)?;
        pos("U_eq", self.u_eq)?;
        pos("Omega", self.omega)?;
        pos("gamma", self.gamma)?;
        pos("c_ref", self.c_ref)?;
        pos("H1_fit", self.h1_fit)?;
        if !(self.diff_pt >= T::zero() && self.diff_pt.is_finite()) {
            return Err(Error::InvalidParam {
                key: "D_Pt".to_string(),
                reason: format!("must be non-negative and finite, got {}", self.diff_pt),
            });
        }
        if !(self.ph >= T::zero() && self.ph.is_finite()) {
            return Err(Error::InvalidParam {
                key: "pH".to_string(),
                reason: format!("must be non-negative and finite, got {}", self.ph),
            });
        }
        pos("nu1_star", self.nu1_star)?;
        pos("nu2_star", self.nu2_star)?;
        pos("Gamma", self.gamma_site)?;
        unit_open("beta2", self.beta2)?;
        pos("n2", self.n2)?;
        pos("U_fit", self.u_fit)?;
        pos("lambda", self.lambda)?;
        pos("omega_int", self.omega_int)?;
        pos("H2_fit", self.h2_fit)?;
        pos("T", self.temperature)?;
        Ok(())
    }

    /// Compute the derived loading geometry.
    ///
    /// Rejects a loading that would imply a Pt volume fraction of one or
    /// more.
    pub fn derive(&self) -> Result<DerivedParams<T>> {
        let eps_pt = (self.p_pt / self.rho_pt) / self.l;
        if eps_pt >= T::one() {
            return Err(Error::Domain {
                what: "derived Pt volume fraction",
                detail: format!("eps_Pt = {eps_pt} >= 1; loading p_Pt is unphysically large"),
            });
        }
        let half = self.d_pt / lit(2.0);
        let v_pt = lit::<T>(4.0 / 3.0) * T::from_f64(std::f64::consts::PI).unwrap()
            * half
            * half
            * half;
        let n_pt = eps_pt / v_pt;
        let b3 = T::from_f64(std::f64::consts::PI).unwrap() * n_pt / (lit::<T>(2.0) * self.eps);
        Ok(DerivedParams { eps_pt, v_pt, n_pt, b3 })
    }

    /// Parse a flat `key = value` document, starting from the defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let patch: Patch =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let mut p = Self::table_defaults();
        patch.apply(&mut p);
        p.validate()?;
        Ok(p)
    }

    /// Serialize in the same flat format accepted by [`from_config_str`];
    /// values round-trip bit-identically.
    ///
    /// [`from_config_str`]: ModelParams::from_config_str
    pub fn to_config_string(&self) -> String {
        toml::to_string(&Patch::from_params(self)).expect("flat float table serializes")
    }
}

/// Partial parameter set as read from a config file. All keys optional.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Patch {
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    l: Option<f64>,
    #[serde(rename = "d_Pt", skip_serializing_if = "Option::is_none")]
    d_pt: Option<f64>,
    #[serde(rename = "p_Pt", skip_serializing_if = "Option::is_none")]
    p_pt: Option<f64>,
    #[serde(rename = "rho_Pt", skip_serializing_if = "Option::is_none")]
    rho_pt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    r_gas: Option<f64>,
    #[serde(rename = "F", skip_serializing_if = "Option::is_none")]
    faraday: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<f64>,
    #[serde(rename = "U_eq", skip_serializing_if = "Option::is_none")]
    u_eq: Option<f64>,
    #[serde(rename = "Omega", skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_ref: Option<f64>,
    #[serde(rename = "H1_fit", skip_serializing_if = "Option::is_none")]
    h1_fit: Option<f64>,
    #[serde(rename = "D_Pt", skip_serializing_if = "Option::is_none")]
    diff_pt: Option<f64>,
    #[serde(rename = "pH", skip_serializing_if = "Option::is_none")]
    ph: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu1_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu2_star: Option<f64>,
    #[serde(rename = "Gamma", skip_serializing_if = "Option::is_none")]
    gamma_site: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n2: Option<f64>,
    #[serde(rename = "U_fit", skip_serializing_if = "Option::is_none")]
    u_fit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_int: Option<f64>,
    #[serde(rename = "H2_fit", skip_serializing_if = "Option::is_none")]
    h2_fit: Option<f64>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

macro_rules! for_each_param {
    ($m:ident) => {
        $m!(l);
        $m!(d_pt);
        $m!(p_pt);
        $m!(rho_pt);
        $m!(eps);
        $m!(r_gas);
        $m!(faraday);
        $m!(nu1);
        $m!(nu2);
        $m!(beta1);
        $m!(n);
        $m!(u_eq);
        $m!(omega);
        $m!(gamma);
        $m!(c_ref);
        $m!(h1_fit);
        $m!(diff_pt);
        $m!(ph);
        $m!(nu1_star);
        $m!(nu2_star);
        $m!(gamma_site);
        $m!(beta2);
        $m!(n2);
        $m!(u_fit);
        $m!(lambda);
        $m!(omega_int);
        $m!(h2_fit);
        $m!(temperature);
    };
}

impl Patch {
    fn apply<T: Scalar>(&self, p: &mut ModelParams<T>) {
        macro_rules! set {
            ($f:ident) => {
                if let Some(v) = self.$f {
                    p.$f = lit(v);
                }
            };
        }
        for_each_param!(set);
    }

    fn from_params<T: Scalar>(p: &ModelParams<T>) -> Patch {
        let mut patch = Patch::default();
        macro_rules! get {
            ($f:ident) => {
                patch.$f = Some(p.$f.to_f64().expect("scalar converts to f64"));
            };
        }
        for_each_param!(get);
        patch
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> ModelParams<f64> {
        ModelParams::table_defaults()
    }

    #[test]
    fn derived_quantities_match_exact_arithmetic() {
        let d = defaults().derive().unwrap();
        // Independently evaluated from the defining formulas at 40-digit
        // precision.
        assert!((d.eps_pt - 0.018648018648018648).abs() < 1e-17);
        assert!((d.v_pt - 1.413716694115407e-20).abs() / 1.413716694115407e-20 < 1e-14);
        assert!((d.n_pt - 1.319077487423116e18).abs() / 1.319077487423116e18 < 1e-14);
        assert!((d.b3 - 1.036001036001036e19).abs() / 1.036001036001036e19 < 1e-14);
    }

    #[test]
    fn derived_quantities_match_quoted_roundings_within_7_percent() {
        let d = defaults().derive().unwrap();
        assert!((d.eps_pt - 0.02).abs() / 0.02 < 0.07);
        assert!((d.v_pt - 1.5e-20).abs() / 1.5e-20 < 0.07);
        assert!((d.n_pt - 1.32e18).abs() / 1.32e18 < 0.07);
        assert!((d.b3 - 1.04e19).abs() / 1.04e19 < 0.07);
    }

    #[test]
    fn derive_rejects_unphysical_loading() {
        let mut p = defaults();
        p.p_pt = 1.0; // eps_Pt would be ~46
        assert!(p.validate().is_ok());
        assert!(p.derive().is_err());
    }

    #[test]
    fn doubling_loading_doubles_derived_quantities_exactly() {
        let p = defaults();
        let d1 = p.derive().unwrap();
        let mut p2 = p.clone();
        p2.p_pt *= 2.0;
        let d2 = p2.derive().unwrap();
        assert_eq!(d2.eps_pt.to_bits(), (2.0 * d1.eps_pt).to_bits());
        assert_eq!(d2.n_pt.to_bits(), (2.0 * d1.n_pt).to_bits());
        assert_eq!(d2.b3.to_bits(), (2.0 * d1.b3).to_bits());
        assert_eq!(d2.v_pt.to_bits(), d1.v_pt.to_bits());
    }

    #[test]
    fn empty_config_yields_defaults() {
        let p = ModelParams::<f64>::from_config_str("").unwrap();
        assert_eq!(p, defaults());
    }

    #[test]
    fn comments_and_single_override() {
        let p = ModelParams::<f64>::from_config_str("# cooler operating point\nT = 323.15\n")
            .unwrap();
        assert_eq!(p.temperature, 323.15);
        let mut want = defaults();
        want.temperature = 323.15;
        assert_eq!(p, want);
    }

    #[test]
    fn invariant_violation_names_the_key() {
        let err = ModelParams::<f64>::from_config_str("beta1 = 1.5").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("beta1"), "message should name beta1: {msg}");
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let err = ModelParams::<f64>::from_config_str("betamax = 0.5").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("betamax"), "message should name the key: {msg}");
    }

    #[test]
    fn non_numeric_value_is_rejected() {
        let err = ModelParams::<f64>::from_config_str("T = \"hot\"").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("invalid type") || msg.contains("expected"), "{msg}");
    }

    #[test]
    fn integer_values_are_accepted_for_float_keys() {
        let p = ModelParams::<f64>::from_config_str("n = 2\nnu1 = 10000").unwrap();
        assert_eq!(p.n, 2.0);
        assert_eq!(p.nu1, 1e4);
    }

    #[test]
    fn config_round_trip_is_bit_identical() {
        let mut p = defaults();
        p.temperature = 331.0 + 0.1234567890123;
        p.d_pt = 2.7e-7;
        let text = p.to_config_string();
        let q = ModelParams::<f64>::from_config_str(&text).unwrap();
        macro_rules! same {
            ($f:ident) => {
                assert_eq!(p.$f.to_bits(), q.$f.to_bits(), stringify!($f));
            };
        }
        for_each_param!(same);
    }

    #[test]
    fn f32_instantiation_matches_f64_coarsely() {
        let p32 = ModelParams::<f32>::table_defaults();
        let d32 = p32.derive().unwrap();
        let d64 = defaults().derive().unwrap();
        assert!((d32.eps_pt as f64 - d64.eps_pt).abs() / d64.eps_pt < 1e-6);
        assert!((d32.b3 as f64 - d64.b3).abs() / d64.b3 < 1e-6);
    }
}
