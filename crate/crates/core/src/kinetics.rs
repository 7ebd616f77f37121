//! Modified Butler–Volmer rate laws for Pt dissolution and PtO coverage.
//!
//! Dissolution (per unit particle surface, mol/(cm²·s)):
//!
//! ```text
//! r_dissol(c, d, theta, V) = B1(d, theta) e^{(1-beta1) B4(d, theta) V}
//!                          - c B2(d, theta) e^{-beta1 B4(d, theta) V}
//! ```
//!
//! with the effective equilibrium voltage shifted by the size-dependent
//! Gibbs–Thomson term `4 Omega gamma0(theta) / (n F d)`. The effective
//! surface tension `gamma0` carries the coverage dependence, including the
//! configurational-entropy terms `theta ln(theta/2)` and
//! `(2-theta) ln(1-theta/2)`; the first is continued by its limit 0 at
//! `theta = 0`.
//!
//! Oxide formation (independent of `c` and `d`):
//!
//! ```text
//! r_oxide(theta, V) = Gamma e^{-(H2_fit + lambda theta)/(R T)}
//!     ( nu1* (1-theta/2) e^{ (1-beta2) (n2 F/R T) (V - U_ox(theta))}
//!     - nu2* 10^{-2 pH}  e^{-beta2    (n2 F/R T) (V - U_ox(theta))} )
//! ```
//!
//! with `U_ox = U_fit + omega_int theta/(n2 F)`.
//!
//! Exponential arguments are assembled fully in units of (J/mol)/(R T)
//! before a single `exp`, which keeps them within roughly ±60 for the
//! reference parameters; no clamping is applied.

use crate::error::{Error, Result};
use crate::params::{ModelParams, D_MIN_CM};
use crate::scalar::{lit, Scalar};

/// Point state entering the dissolution rate law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticState<T> {
    /// Pt²⁺ concentration, mol/cm³.
    pub c: T,
    /// Particle diameter, cm.
    pub d: T,
    /// PtO coverage ratio.
    pub theta: T,
    /// Applied potential, V.
    pub v: T,
}

/// Coefficients of the dissolution rate law at fixed `(d, theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCoefficients<T> {
    /// Forward prefactor, mol/(cm²·s). Zero at full coverage.
    pub b1: T,
    /// Backward prefactor, cm/s. Zero at full coverage.
    pub b2: T,
    /// Exponential slope, C/J.
    pub b4: T,
    /// Effective surface tension, J/cm².
    pub gamma0: T,
}

/// Rate-law evaluator carrying the parameter set and its cached `R T`.
#[derive(Debug, Clone, Copy)]
pub struct Kinetics<'p, T> {
    p: &'p ModelParams<T>,
    rt: T,
}

impl<'p, T: Scalar> Kinetics<'p, T> {
    pub fn new(params: &'p ModelParams<T>) -> Self {
        Kinetics { p: params, rt: params.rt() }
    }

    pub fn params(&self) -> &ModelParams<T> {
        self.p
    }

    fn check_theta(theta: T) -> Result<()> {
        if theta >= T::zero() && theta <= T::one() {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "coverage ratio",
                detail: format!("theta = {theta} outside [0, 1]"),
            })
        }
    }

    fn check_diameter(d: T) -> Result<()> {
        if d > lit(D_MIN_CM) {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "particle diameter",
                detail: format!("d = {d} cm at or below the dissolution floor {D_MIN_CM:e} cm"),
            })
        }
    }

    /// Effective surface tension `gamma0(theta)`, J/cm², on `theta` in
    /// `[0, 1]`.
    pub fn gamma0(&self, theta: T) -> T {
        debug_assert!(theta >= T::zero() && theta <= T::one());
        let p = self.p;
        let two = lit::<T>(2.0);
        let ten_ph = lit::<T>(10.0).powf(-two * p.ph);
        let ln_ratio = (p.nu2_star / p.nu1_star * ten_ph).ln();
        let interaction = (two * p.n2 * p.faraday * p.u_fit + p.omega_int * theta)
            / (two * self.rt);
        let entropy_occupied = if theta > T::zero() {
            theta * (theta / two).ln()
        } else {
            T::zero()
        };
        let entropy_free = (two - theta) * (T::one() - theta / two).ln();
        let bracket = theta * ln_ratio + theta * interaction + entropy_occupied + entropy_free;
        p.gamma + p.gamma_site * self.rt * bracket
    }

    /// Gibbs–Thomson shift of the equilibrium voltage,
    /// `4 Omega gamma0/(n F d)`, V.
    pub fn gibbs_thomson_shift(&self, d: T, theta: T) -> Result<T> {
        Self::check_theta(theta)?;
        Self::check_diameter(d)?;
        let p = self.p;
        Ok(lit::<T>(4.0) * p.omega * self.gamma0(theta) / (p.n * p.faraday * d))
    }

    /// Dissolution rate coefficients at `(d, theta)`.
    pub fn coefficients(&self, d: T, theta: T) -> Result<RateCoefficients<T>> {
        Self::check_theta(theta)?;
        Self::check_diameter(d)?;
        let p = self.p;
        let g0 = self.gamma0(theta);
        let u_eff = p.u_eq - lit::<T>(4.0) * p.omega * g0 / (p.n * p.faraday * d);
        let blocked = T::one() - theta;
        let b1 = p.nu1
            * p.gamma_site
            * blocked
            * ((-p.h1_fit - p.n * p.faraday * (T::one() - p.beta1) * u_eff) / self.rt).exp();
        let b2 = p.nu2 * p.gamma_site / p.c_ref
            * blocked
            * ((-p.h1_fit + p.n * p.faraday * p.beta1 * u_eff) / self.rt).exp();
        let b4 = p.faraday / self.rt
            * (p.n - lit::<T>(4.0) * p.omega * p.gamma_site * p.n2 * theta / d);
        Ok(RateCoefficients { b1, b2, b4, gamma0: g0 })
    }

    /// Dissolution rate, mol/(cm²·s). Affine in `c`; positive means net
    /// dissolution, negative net redeposition.
    pub fn r_dissol(&self, state: &KineticState<T>) -> Result<T> {
        Self::check_theta(state.theta)?;
        Self::check_diameter(state.d)?;
        let p = self.p;
        let g0 = self.gamma0(state.theta);
        let u_eff = p.u_eq - lit::<T>(4.0) * p.omega * g0 / (p.n * p.faraday * state.d);
        let b4 = p.faraday / self.rt
            * (p.n - lit::<T>(4.0) * p.omega * p.gamma_site * p.n2 * state.theta / state.d);
        let blocked = T::one() - state.theta;
        let arg_fwd = (-p.h1_fit - p.n * p.faraday * (T::one() - p.beta1) * u_eff) / self.rt
            + (T::one() - p.beta1) * b4 * state.v;
        let arg_bwd = (-p.h1_fit + p.n * p.faraday * p.beta1 * u_eff) / self.rt
            - p.beta1 * b4 * state.v;
        Ok(p.nu1 * p.gamma_site * blocked * arg_fwd.exp()
            - state.c * p.nu2 * p.gamma_site / p.c_ref * blocked * arg_bwd.exp())
    }

    /// Oxide formation rate, mol/(cm²·s). Depends only on `theta` and `V`.
    pub fn r_oxide(&self, theta: T, v: T) -> Result<T> {
        Self::check_theta(theta)?;
        let p = self.p;
        let two = lit::<T>(2.0);
        let pre = p.gamma_site * ((-(p.h2_fit + p.lambda * theta)) / self.rt).exp();
        let u_ox = p.u_fit + p.omega_int * theta / (p.n2 * p.faraday);
        let nf_rt = p.n2 * p.faraday / self.rt;
        let ten_ph = lit::<T>(10.0).powf(-two * p.ph);
        let fwd = p.nu1_star
            * (T::one() - theta / two)
            * ((T::one() - p.beta2) * nf_rt * (v - u_ox)).exp();
        let bwd = p.nu2_star * ten_ph * (-p.beta2 * nf_rt * (v - u_ox)).exp();
        Ok(pre * (fwd - bwd))
    }

    /// Concentration at which the dissolution rate vanishes for the given
    /// `(d, theta, V)`. For `theta < 1` this zero is unique and the rate is
    /// positive below it, negative above it.
    pub fn equilibrium_c(&self, d: T, theta: T, v: T) -> Result<T> {
        let co = self.coefficients(d, theta)?;
        let p = self.p;
        let g0 = co.gamma0;
        let u_eff = p.u_eq - lit::<T>(4.0) * p.omega * g0 / (p.n * p.faraday * d);
        Ok(p.nu1 / p.nu2
            * p.c_ref
            * (co.b4 * v - p.n * p.faraday * u_eff / self.rt).exp())
    }
}
