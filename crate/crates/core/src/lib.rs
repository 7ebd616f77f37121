//! Degradation of a platinum catalyst layer (CL) in a PEM fuel-cell cathode
//! under cyclic applied potential.
//!
//! The model tracks three fields across the CL thickness: the dissolved
//! Pt²⁺ concentration `c` (mol/cm³), the Pt nanoparticle diameter `d` (cm),
//! and the PtO surface coverage ratio `θ` (dimensionless). Dissolution and
//! oxide formation follow modified Butler–Volmer rate laws with a
//! Gibbs–Thomson size correction; Pt²⁺ diffuses through the ionomer toward
//! the membrane, which acts as a perfect sink.
//!
//! Module layout:
//!
//! - [`params`]: physical constants, model parameters, derived geometry
//! - [`voltage`]: cyclic potential waveforms used in accelerated stress tests
//! - [`kinetics`]: the dissolution and oxide-formation rate laws
//! - [`nondiffusive`]: the space-free reaction ODE system with RK4 stepping
//! - [`pde`]: the reaction-diffusion solver (implicit-explicit two-stage
//!   scheme with a tridiagonal direct solve)
//! - [`oracle`]: integrating-factor reference solution for frozen particle
//!   state, used to verify the integrators
//! - [`analysis`]: mass-loss series, slope fits, failure prognosis
//! - [`output`]: deterministic CSV emission
//!
//! The numerical core is generic over the scalar type (see [`Scalar`]);
//! `f64` aliases for the main entry points are exported at the crate root.

pub mod analysis;
pub mod error;
pub mod kinetics;
pub mod nondiffusive;
pub mod oracle;
pub mod output;
pub mod params;
pub mod pde;
mod scalar;
pub mod voltage;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` instantiations of the main types, as used by the CLI.
pub type ModelParams64 = params::ModelParams<f64>;
pub type DerivedParams64 = params::DerivedParams<f64>;
pub type Protocol64 = voltage::VoltageProtocol<f64>;
pub type PointState64 = nondiffusive::PointState<f64>;
pub type PointRun64 = nondiffusive::PointRun<f64>;
pub type Mesh64 = pde::Mesh<f64>;
pub type SolverConfig64 = pde::SolverConfig<f64>;
pub type SimulationResult64 = pde::SimulationResult<f64>;
