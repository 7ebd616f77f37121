//! Reaction-diffusion solver on the 1-D catalyst-layer mesh.
//!
//! The concentration field obeys
//!
//! ```text
//! dc/dt - sqrt(eps) D_Pt d²c/dx² = B3 d² r_dissol(c, d, theta, V(t))
//! ```
//!
//! on `(0, L)` with a no-flux condition at the gas-diffusion-layer side
//! (`x = 0`) and a perfect-sink condition at the membrane (`c(L) = 0`),
//! while `d` and `theta` evolve pointwise by the reaction subsystem.
//!
//! Time stepping is a two-stage implicit-explicit scheme. Each step first
//! advances `d` and `theta` at every node by one RK4 step of the reaction
//! subsystem with `c` frozen at its previous value. A half-step backward
//! solve then treats diffusion implicitly (weight `w`, tridiagonal direct
//! solve) with the reaction source taken explicitly at the old
//! concentration, and a full-step explicit correction evaluates both
//! diffusion and reaction at the half-step field. The correction's reaction
//! source is sampled at the midpoint voltage, which keeps the scheme second
//! order in time for smooth `V`.
//!
//! The no-flux condition is imposed by mirroring, `c_0 = c_1`; the interior
//! stencil stays second order. Steps are phase-locked to the protocol so
//! that voltage jumps coincide with step boundaries.
//!
//! With zero diffusivity the boundary conditions are dropped and every node
//! integrates the plain reaction system: the run degenerates to the
//! non-diffusive model at each node.

use crate::analysis;
use crate::error::{Error, Result};
use crate::kinetics::{KineticState, Kinetics};
use crate::nondiffusive::{ClampStats, ReactionOptions, ReactionSystem, CLAMP_ABORT_THRESHOLD};
use crate::params::{DerivedParams, ModelParams, D_MIN_CM};
use crate::scalar::{lit, Scalar};
use crate::voltage::{StageSampler, VoltageProtocol, Waveform};

/// 1-D mesh over the catalyst layer `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    nodes: Vec<T>,
}

impl<T: Scalar> Mesh<T> {
    /// Uniform mesh with `n` intervals; the last node lands on `l` exactly.
    pub fn uniform(l: T, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("mesh needs at least 2 intervals, got {n}")));
        }
        if !(l > T::zero() && l.is_finite()) {
            return Err(Error::Config(format!("mesh length must be positive, got {l}")));
        }
        let nodes = (0..=n).map(|i| l * lit::<T>(i as f64 / n as f64)).collect();
        Ok(Mesh { nodes })
    }

    /// Mesh from explicit node positions: strictly increasing, starting at 0.
    pub fn from_nodes(nodes: Vec<T>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::Config("mesh needs at least 3 nodes".to_string()));
        }
        if nodes[0] != T::zero() {
            return Err(Error::Config("mesh must start at x = 0".to_string()));
        }
        if !nodes.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Config("mesh nodes must be strictly increasing".to_string()));
        }
        Ok(Mesh { nodes })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Number of intervals `N`.
    pub fn n_intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn length(&self) -> T {
        *self.nodes.last().unwrap()
    }
}

/// Discrete fields on the mesh at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState<T> {
    pub c: Vec<T>,
    pub d: Vec<T>,
    pub theta: Vec<T>,
    /// Time, s.
    pub t: T,
    /// Step index.
    pub step: u64,
}

impl<T: Scalar> CellState<T> {
    /// Initial data: `c = 0`, `d = d_Pt`, `theta = 0` at all nodes.
    pub fn initial(params: &ModelParams<T>, mesh: &Mesh<T>) -> Self {
        let n = mesh.nodes().len();
        CellState {
            c: vec![T::zero(); n],
            d: vec![params.d_pt; n],
            theta: vec![T::zero(); n],
            t: T::zero(),
            step: 0,
        }
    }
}

/// Time-stepping configuration.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig<T> {
    /// Requested time step, s. Nudged so the protocol period divides into an
    /// even number of steps.
    pub tau: T,
    /// Implicit weight of the half-step diffusion solve.
    pub w: T,
    /// Number of protocol cycles to run.
    pub n_cycles: u32,
    /// Mean-series sampling stride in steps; 0 selects roughly 256 samples
    /// per cycle.
    pub stride: usize,
    /// Accepted `tau` range; `None` disables the check (diagnostics only).
    pub tau_bounds: Option<(T, T)>,
    /// Reaction switches (diagnostics only, not exposed on the CLI).
    pub options: ReactionOptions,
}

impl<T: Scalar> SolverConfig<T> {
    /// Defaults for the given protocol: `w = 0.5` and the default time step
    /// for its shape.
    pub fn for_protocol(protocol: &VoltageProtocol<T>) -> Self {
        SolverConfig {
            tau: lit(default_tau(protocol.shape())),
            w: lit(0.5),
            n_cycles: 10,
            stride: 0,
            tau_bounds: Some((lit(1e-4), lit(1e-2))),
            options: ReactionOptions::default(),
        }
    }

    pub fn with_cycles(mut self, n: u32) -> Self {
        self.n_cycles = n;
        self
    }

    pub fn with_tau(mut self, tau: T) -> Self {
        self.tau = tau;
        self
    }

    pub(crate) fn resolve(&self, protocol: &VoltageProtocol<T>) -> Result<ResolvedSteps<T>> {
        if !(self.w > T::zero() && self.w <= T::one()) {
            return Err(Error::Config(format!(
                "IMEX weight w must be in (0, 1], got {}",
                self.w
            )));
        }
        if !(self.tau > T::zero() && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if let Some((lo, hi)) = self.tau_bounds {
            if self.tau < lo || self.tau > hi {
                return Err(Error::Config(format!(
                    "tau = {} outside the accepted range [{lo}, {hi}]",
                    self.tau
                )));
            }
        }
        if self.n_cycles == 0 {
            return Err(Error::Config("n_cycles must be at least 1".to_string()));
        }
        let ratio = (protocol.period() / self.tau).to_f64().unwrap_or(f64::NAN);
        if !ratio.is_finite() || ratio > 1e12 {
            return Err(Error::Config(format!(
                "tau = {} is too small for period {}",
                self.tau,
                protocol.period()
            )));
        }
        let steps_per_cycle = (((ratio / 2.0).round() as u64) * 2).max(2);
        let tau_eff = protocol.period() / lit(steps_per_cycle as f64);
        let stride = if self.stride == 0 {
            ((steps_per_cycle / 256).max(1)) as usize
        } else {
            self.stride
        };
        Ok(ResolvedSteps { steps_per_cycle, tau_eff, stride })
    }
}

/// Default time step per waveform, s. The square wave needs the smallest
/// step: its hard switching drives the fastest reaction transients (the low
/// dwell relaxes dissolved Pt at ~2.7e3/s over bare particles). The ramped
/// shapes pass through the same regime only briefly near the cycle minimum,
/// where the positivity clamp holds the near-zero concentration, and run
/// stably at 1e-3.
pub fn default_tau(shape: Waveform) -> f64 {
    match shape {
        Waveform::Pi => 1e-4,
        Waveform::Lambda | Waveform::Angle | Waveform::Constant => 1e-3,
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ResolvedSteps<T> {
    pub steps_per_cycle: u64,
    pub tau_eff: T,
    pub stride: usize,
}

/// Reusable LU factorization of a tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TdmaFactors<T> {
    /// Elimination multipliers, one per row below the first.
    mult: Vec<T>,
    /// Modified diagonal (the pivots).
    diag: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> TdmaFactors<T> {
    /// Factorize a tridiagonal matrix given by its three diagonals, all of
    /// length `n` (`lower[0]` and `upper[n-1]` are ignored).
    pub fn factorize(lower: &[T], diag: &[T], upper: &[T]) -> Result<Self> {
        let n = diag.len();
        assert_eq!(lower.len(), n);
        assert_eq!(upper.len(), n);
        let mut mult = vec![T::zero(); n];
        let mut dmod = vec![T::zero(); n];
        if diag[0] == T::zero() {
            return Err(Error::ZeroPivot { index: 0 });
        }
        dmod[0] = diag[0];
        for i in 1..n {
            let m = lower[i] / dmod[i - 1];
            mult[i] = m;
            let piv = diag[i] - m * upper[i - 1];
            if piv == T::zero() {
                return Err(Error::ZeroPivot { index: i });
            }
            dmod[i] = piv;
        }
        Ok(TdmaFactors { mult, diag: dmod, upper: upper.to_vec() })
    }

    /// Solve into `out` (same length as the system).
    pub fn solve_into(&self, rhs: &[T], out: &mut [T]) {
        let n = self.diag.len();
        assert_eq!(rhs.len(), n);
        assert_eq!(out.len(), n);
        out[0] = rhs[0];
        for i in 1..n {
            out[i] = rhs[i] - self.mult[i] * out[i - 1];
        }
        out[n - 1] = out[n - 1] / self.diag[n - 1];
        for i in (0..n - 1).rev() {
            out[i] = (out[i] - self.upper[i] * out[i + 1]) / self.diag[i];
        }
    }
}

/// Direct solve of a tridiagonal system by the Thomas algorithm.
///
/// All slices have the length of the system; `lower[0]` and `upper[n-1]`
/// are ignored. Fails with the row index on a vanishing pivot.
pub fn tdma_solve<T: Scalar>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let f = TdmaFactors::factorize(lower, diag, upper)?;
    let mut out = vec![T::zero(); rhs.len()];
    f.solve_into(rhs, &mut out);
    Ok(out)
}

/// Per-sample CL means stored along a run.
#[derive(Debug, Clone, Copy)]
pub struct MeanSample<T> {
    pub step: u64,
    pub t: T,
    /// Applied potential at the sample time (post-jump value on jumps).
    pub v: T,
    pub c: T,
    pub d: T,
    pub theta: T,
    pub r_dissol: T,
    pub r_oxide: T,
    /// Mean remaining mass fraction over nodes.
    pub mass: T,
}

/// Full fields at a cycle boundary.
#[derive(Debug, Clone)]
pub struct FieldSnapshot<T> {
    /// Number of completed cycles (0 is the initial state).
    pub cycle: u32,
    pub t: T,
    pub c: Vec<T>,
    pub d: Vec<T>,
    pub theta: Vec<T>,
}

/// Output of a reaction-diffusion run.
#[derive(Debug, Clone)]
pub struct SimulationResult<T> {
    pub protocol: VoltageProtocol<T>,
    pub nodes: Vec<T>,
    pub samples: Vec<MeanSample<T>>,
    pub snapshots: Vec<FieldSnapshot<T>>,
    pub clamps: ClampStats,
    pub tau_effective: T,
    pub steps_per_cycle: u64,
    pub n_cycles: u32,
}

impl<T: Scalar> SimulationResult<T> {
    /// Mass-ratio series at cycle boundaries.
    pub fn mass_series(&self, params: &ModelParams<T>) -> Result<analysis::MassSeries<T>> {
        let derived = params.derive()?;
        let entries = self
            .snapshots
            .iter()
            .map(|s| {
                let (mean, nodewise) = analysis::mass_ratio_derived(&s.d, &derived);
                analysis::CycleMass { cycle: s.cycle, t: s.t, mean, nodewise }
            })
            .collect();
        Ok(analysis::MassSeries { entries })
    }

    /// Extremes of the mean coverage over samples with `t >= t_from`.
    pub fn theta_range_after(&self, t_from: T) -> Option<(T, T)> {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        let mut seen = false;
        for s in &self.samples {
            if s.t >= t_from {
                lo = lo.min(s.theta);
                hi = hi.max(s.theta);
                seen = true;
            }
        }
        seen.then_some((lo, hi))
    }

    /// Largest mean concentration over all samples.
    pub fn peak_mean_c(&self) -> T {
        self.samples.iter().fold(T::zero(), |m, s| m.max(s.c))
    }
}

struct Workspace<T> {
    d_new: Vec<T>,
    theta_new: Vec<T>,
    source: Vec<T>,
    rhs: Vec<T>,
    c_mid: Vec<T>,
    lap_mid: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    fn new(n: usize) -> Self {
        Workspace {
            d_new: vec![T::zero(); n],
            theta_new: vec![T::zero(); n],
            source: vec![T::zero(); n],
            rhs: vec![T::zero(); n],
            c_mid: vec![T::zero(); n],
            lap_mid: vec![T::zero(); n],
        }
    }
}

/// The time stepper bound to one run's mesh, parameters, and protocol.
struct Stepper<'p, T> {
    sys: ReactionSystem<'p, T>,
    kin: Kinetics<'p, T>,
    mesh: &'p Mesh<T>,
    sampler: StageSampler<T>,
    steps_per_cycle: u64,
    tau: T,
    w: T,
    /// Effective diffusivity `sqrt(eps) * D_Pt`.
    kappa: T,
    opts: ReactionOptions,
    factors: Option<TdmaFactors<T>>,
    ws: Workspace<T>,
    clamps: ClampStats,
}

impl<'p, T: Scalar> Stepper<'p, T> {
    fn new(
        params: &'p ModelParams<T>,
        mesh: &'p Mesh<T>,
        protocol: &VoltageProtocol<T>,
        resolved: &ResolvedSteps<T>,
        w: T,
        opts: ReactionOptions,
    ) -> Result<Self> {
        let sys = ReactionSystem::new(params, opts)?;
        let kappa = params.eps.sqrt() * params.diff_pt;
        let n = mesh.nodes().len();
        let tau = resolved.tau_eff;
        let factors = if kappa > T::zero() {
            let mut lower = vec![T::zero(); n];
            let mut diag = vec![T::one(); n];
            let mut upper = vec![T::zero(); n];
            let x = mesh.nodes();
            for i in 1..n - 1 {
                let h_minus = x[i] - x[i - 1];
                let h_plus = x[i + 1] - x[i];
                let a = w * tau * kappa / h_minus;
                lower[i] = -a / h_minus;
                diag[i] = T::one() + a / h_minus + a / h_plus;
                upper[i] = -a / h_plus;
            }
            // Mirror row c_0 - c_1 = 0 and sink row c_N = 0.
            diag[0] = T::one();
            upper[0] = -T::one();
            diag[n - 1] = T::one();
            lower[n - 1] = T::zero();
            Some(TdmaFactors::factorize(&lower, &diag, &upper)?)
        } else {
            None
        };
        Ok(Stepper {
            sys,
            kin: Kinetics::new(params),
            mesh,
            sampler: StageSampler::new(protocol, resolved.steps_per_cycle),
            steps_per_cycle: resolved.steps_per_cycle,
            tau,
            w,
            kappa,
            opts,
            factors,
            ws: Workspace::new(n),
            clamps: ClampStats::default(),
        })
    }

    fn laplacian(&self, c: &[T], i: usize) -> T {
        let x = self.mesh.nodes();
        let h_minus = x[i] - x[i - 1];
        let h_plus = x[i + 1] - x[i];
        ((c[i + 1] - c[i]) / h_plus - (c[i] - c[i - 1]) / h_minus) / h_minus
    }

    /// Reaction substep: advance `(d, theta)` at one node by RK4 with the
    /// concentration frozen.
    #[allow(clippy::too_many_arguments)]
    fn advance_particle(
        &self,
        c: T,
        d0: T,
        th0: T,
        v0: T,
        vm: T,
        v1: T,
        step: u64,
        t: T,
        events: &mut ClampStats,
    ) -> Result<(T, T)> {
        if self.opts.freeze_particles {
            return Ok((d0, th0));
        }
        let half = self.tau * lit(0.5);
        let sixth = self.tau / lit(6.0);
        let two = lit::<T>(2.0);

        let f = |d: T, th: T, v: T| -> (T, T) {
            let (_, dd, dth) = self.sys.derivatives(c, d, th, v);
            (dd, dth)
        };
        let (k1d, k1t) = f(d0, th0, v0);
        let (k2d, k2t) = f(d0 + half * k1d, th0 + half * k1t, vm);
        let (k3d, k3t) = f(d0 + half * k2d, th0 + half * k2t, vm);
        let (k4d, k4t) = f(d0 + self.tau * k3d, th0 + self.tau * k3t, v1);

        let mut d = d0 + sixth * (k1d + two * k2d + two * k3d + k4d);
        let mut theta = th0 + sixth * (k1t + two * k2t + two * k3t + k4t);

        let d_min = lit::<T>(D_MIN_CM);
        let mut worst = T::zero();
        if d < d_min {
            worst = worst.max(d_min - d);
            events.d += 1;
            d = d_min;
        }
        if theta < T::zero() {
            worst = worst.max(-theta);
            events.theta += 1;
            theta = T::zero();
        } else if theta > T::one() {
            worst = worst.max(theta - T::one());
            events.theta += 1;
            theta = T::one();
        }
        let worst = worst.to_f64().unwrap_or(f64::INFINITY);
        events.max_violation = events.max_violation.max(worst);
        if worst > CLAMP_ABORT_THRESHOLD {
            return Err(Error::Instability {
                step,
                t: t.to_f64().unwrap_or(f64::NAN),
                detail: format!("particle state left the physical range by {worst:.3e}"),
            });
        }
        Ok((d, theta))
    }

    /// Concentration source `B3 d² r_dissol` with the dead-particle policy.
    fn dissolution_source(&self, c: T, d: T, theta: T, v: T) -> T {
        if d <= lit(D_MIN_CM) {
            return T::zero();
        }
        let theta = theta.max(T::zero()).min(T::one());
        let r = self
            .kin
            .r_dissol(&KineticState { c, d, theta, v })
            .expect("projected state is in the rate-law domain");
        self.sys.b3() * d * d * r
    }

    /// Advance the state by one step in place.
    fn step(&mut self, state: &mut CellState<T>) -> Result<()> {
        let n = self.mesh.nodes().len();
        let k = state.step % self.steps_per_cycle;
        let v0 = self.sampler.at(2 * k, false);
        let vm = self.sampler.at(2 * k + 1, false);
        let v1 = self.sampler.at(2 * k + 2, true);
        let tau = self.tau;

        // (1) Reaction update of d and theta at every node.
        let mut events = ClampStats::default();
        for i in 0..n {
            let (d_new, th_new) = self.advance_particle(
                state.c[i],
                state.d[i],
                state.theta[i],
                v0,
                vm,
                v1,
                state.step,
                state.t,
                &mut events,
            )?;
            self.ws.d_new[i] = d_new;
            self.ws.theta_new[i] = th_new;
        }
        self.clamps.merge(&events);

        // (2) Half-step implicit diffusion with the explicit source at the
        // old concentration.
        for i in 0..n {
            self.ws.source[i] =
                self.dissolution_source(state.c[i], self.ws.d_new[i], self.ws.theta_new[i], v0);
        }
        if let Some(factors) = &self.factors {
            self.ws.rhs[0] = T::zero();
            self.ws.rhs[n - 1] = T::zero();
            for i in 1..n - 1 {
                self.ws.rhs[i] = state.c[i] + self.w * tau * self.ws.source[i];
            }
            factors.solve_into(&self.ws.rhs, &mut self.ws.c_mid);

            // (3) Full-step explicit correction at the half-step field.
            for i in 1..n - 1 {
                self.ws.lap_mid[i] = self.laplacian(&self.ws.c_mid, i);
            }
            for i in 1..n - 1 {
                let src = self.dissolution_source(
                    self.ws.c_mid[i],
                    self.ws.d_new[i],
                    self.ws.theta_new[i],
                    vm,
                );
                state.c[i] = state.c[i] + tau * (self.kappa * self.ws.lap_mid[i] + src);
            }
            // (4) Boundary enforcement: mirror and sink.
            state.c[0] = state.c[1];
            state.c[n - 1] = T::zero();
        } else {
            // Zero diffusivity: no boundary conditions, every node runs the
            // plain reaction update.
            for i in 0..n {
                self.ws.c_mid[i] = state.c[i] + self.w * tau * self.ws.source[i];
            }
            for i in 0..n {
                let src = self.dissolution_source(
                    self.ws.c_mid[i],
                    self.ws.d_new[i],
                    self.ws.theta_new[i],
                    vm,
                );
                state.c[i] = state.c[i] + tau * src;
            }
        }

        // Positivity: clamp fp-level undershoots, abort on real excursions.
        for i in 0..n {
            let ci = state.c[i];
            if ci < T::zero() {
                let viol = (-ci).to_f64().unwrap_or(f64::INFINITY);
                if viol > CLAMP_ABORT_THRESHOLD {
                    return Err(Error::Instability {
                        step: state.step,
                        t: state.t.to_f64().unwrap_or(f64::NAN),
                        detail: format!("concentration went negative by {viol:.3e} at node {i}"),
                    });
                }
                self.clamps.c += 1;
                self.clamps.max_violation = self.clamps.max_violation.max(viol);
                state.c[i] = T::zero();
            }
        }

        state.d.copy_from_slice(&self.ws.d_new);
        state.theta.copy_from_slice(&self.ws.theta_new);
        state.step += 1;
        state.t = state.t + tau;
        Ok(())
    }

    fn sample(&self, state: &CellState<T>, derived: &DerivedParams<T>) -> MeanSample<T> {
        let n = state.c.len();
        let inv_n = lit::<T>(1.0 / n as f64);
        let k = state.step % self.steps_per_cycle;
        let v = self.sampler.at(2 * k, false);
        let mut mc = T::zero();
        let mut md = T::zero();
        let mut mth = T::zero();
        let mut mrd = T::zero();
        let mut mro = T::zero();
        let mut mmass = T::zero();
        for i in 0..n {
            mc = mc + state.c[i];
            md = md + state.d[i];
            mth = mth + state.theta[i];
            let theta = state.theta[i].max(T::zero()).min(T::one());
            if state.d[i] > lit(D_MIN_CM) {
                mrd = mrd
                    + self
                        .kin
                        .r_dissol(&KineticState { c: state.c[i], d: state.d[i], theta, v })
                        .expect("state in domain");
            }
            mro = mro + self.kin.r_oxide(theta, v).expect("theta in [0, 1]");
            mmass = mmass + analysis::mass_fraction(state.d[i], derived.v_pt);
        }
        MeanSample {
            step: state.step,
            t: state.t,
            v,
            c: mc * inv_n,
            d: md * inv_n,
            theta: mth * inv_n,
            r_dissol: mrd * inv_n,
            r_oxide: mro * inv_n,
            mass: mmass * inv_n,
        }
    }
}

/// One scheme step from the given state. Convenience wrapper around the run
/// loop's stepper; allocates per call.
pub fn imex_step<T: Scalar>(
    state: &CellState<T>,
    protocol: &VoltageProtocol<T>,
    config: &SolverConfig<T>,
    params: &ModelParams<T>,
    mesh: &Mesh<T>,
) -> Result<CellState<T>> {
    let resolved = config.resolve(protocol)?;
    let mut stepper = Stepper::new(params, mesh, protocol, &resolved, config.w, config.options)?;
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

/// Run `config.n_cycles` protocol cycles from the standard initial data.
pub fn run_simulation<T: Scalar>(
    protocol: &VoltageProtocol<T>,
    config: &SolverConfig<T>,
    params: &ModelParams<T>,
    mesh: &Mesh<T>,
) -> Result<SimulationResult<T>> {
    params.validate()?;
    let derived = params.derive()?;
    let resolved = config.resolve(protocol)?;
    let mut stepper = Stepper::new(params, mesh, protocol, &resolved, config.w, config.options)?;

    let mut state = CellState::initial(params, mesh);
    let mut samples = Vec::new();
    let mut snapshots = Vec::new();
    samples.push(stepper.sample(&state, &derived));
    snapshots.push(FieldSnapshot {
        cycle: 0,
        t: state.t,
        c: state.c.clone(),
        d: state.d.clone(),
        theta: state.theta.clone(),
    });

    for cycle in 0..config.n_cycles {
        for k in 0..resolved.steps_per_cycle {
            stepper.step(&mut state)?;
            let last = cycle + 1 == config.n_cycles && k + 1 == resolved.steps_per_cycle;
            if state.step % resolved.stride as u64 == 0 || last {
                samples.push(stepper.sample(&state, &derived));
            }
        }
        snapshots.push(FieldSnapshot {
            cycle: cycle + 1,
            t: state.t,
            c: state.c.clone(),
            d: state.d.clone(),
            theta: state.theta.clone(),
        });
    }

    Ok(SimulationResult {
        protocol: *protocol,
        nodes: mesh.nodes().to_vec(),
        samples,
        snapshots,
        clamps: stepper.clamps,
        tau_effective: resolved.tau_eff,
        steps_per_cycle: resolved.steps_per_cycle,
        n_cycles: config.n_cycles,
    })
}
