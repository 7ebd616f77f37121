//! The space-free reaction system: at a single material point,
//!
//! ```text
//! dc/dt     =  B3 d^2 r_dissol(c, d, theta, V(t))
//! dd/dt     = -Omega  r_dissol(c, d, theta, V(t))
//! dtheta/dt =  r_oxide(theta, V(t))/Gamma - (2 theta/d) dd/dt
//! ```
//!
//! integrated by the classical fourth-order Runge–Kutta method with fixed
//! step. The combination `c + B3 d^3/(3 Omega)` is conserved along exact
//! trajectories and serves as a running consistency check.
//!
//! This module doubles as the reaction substep of the full
//! reaction-diffusion solver: [`ReactionSystem`] exposes the per-point rate
//! evaluation with the clamping and dead-particle policy shared by both
//! integrators.

use crate::error::{Error, Result};
use crate::kinetics::{KineticState, Kinetics};
use crate::params::{ModelParams, D_MIN_CM};
use crate::scalar::{lit, Scalar};
use crate::voltage::{StageSampler, VoltageProtocol};

/// Absolute excursion beyond the physical range that aborts the run instead
/// of being clamped. Past this point the step size is unstable; excursions
/// grow without bound rather than hovering near the bounds.
pub const CLAMP_ABORT_THRESHOLD: f64 = 1e-3;

/// State of the point model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState<T> {
    /// Pt²⁺ concentration, mol/cm³.
    pub c: T,
    /// Particle diameter, cm.
    pub d: T,
    /// PtO coverage ratio.
    pub theta: T,
    /// Time, s.
    pub t: T,
}

impl<T: Scalar> PointState<T> {
    /// The standard initial data: no dissolved Pt, pristine particles.
    pub fn initial(params: &ModelParams<T>) -> Self {
        PointState { c: T::zero(), d: params.d_pt, theta: T::zero(), t: T::zero() }
    }
}

/// Diagnostic switches for the reaction system. Not exposed on the CLI.
#[derive(Debug, Clone, Copy)]
pub struct ReactionOptions {
    /// Hold `d` and `theta` fixed, integrating only the concentration.
    pub freeze_particles: bool,
    /// Force `r_oxide = 0` (the oxide-equilibrium special case).
    pub oxide_enabled: bool,
}

impl Default for ReactionOptions {
    fn default() -> Self {
        ReactionOptions { freeze_particles: false, oxide_enabled: true }
    }
}

/// Counts of post-step projections back into the physical range.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClampStats {
    pub c: u64,
    pub d: u64,
    pub theta: u64,
    /// Largest excursion that was clamped, absolute.
    pub max_violation: f64,
}

impl ClampStats {
    pub fn total(&self) -> u64 {
        self.c + self.d + self.theta
    }

    pub fn merge(&mut self, other: &ClampStats) {
        self.c += other.c;
        self.d += other.d;
        self.theta += other.theta;
        self.max_violation = self.max_violation.max(other.max_violation);
    }
}

/// Per-point rate evaluation shared by the ODE and PDE integrators.
#[derive(Debug, Clone, Copy)]
pub struct ReactionSystem<'p, T> {
    kin: Kinetics<'p, T>,
    b3: T,
    d_min: T,
    opts: ReactionOptions,
}

impl<'p, T: Scalar> ReactionSystem<'p, T> {
    pub fn new(params: &'p ModelParams<T>, opts: ReactionOptions) -> Result<Self> {
        params.validate()?;
        let derived = params.derive()?;
        Ok(ReactionSystem {
            kin: Kinetics::new(params),
            b3: derived.b3,
            d_min: lit(D_MIN_CM),
            opts,
        })
    }

    pub fn params(&self) -> &ModelParams<T> {
        self.kin.params()
    }

    pub fn b3(&self) -> T {
        self.b3
    }

    /// Both rates with stage inputs projected into the rate-law domain.
    /// A particle at or below the diameter floor is fully dissolved: both
    /// rates are zero and the point no longer evolves.
    fn rates_projected(&self, c: T, d: T, theta: T, v: T) -> (T, T) {
        if d <= self.d_min {
            return (T::zero(), T::zero());
        }
        let theta = theta.max(T::zero()).min(T::one());
        let r_dis = self
            .kin
            .r_dissol(&KineticState { c, d, theta, v })
            .expect("projected stage state is in the rate-law domain");
        let r_ox = if self.opts.oxide_enabled {
            self.kin.r_oxide(theta, v).expect("projected theta is in [0, 1]")
        } else {
            T::zero()
        };
        (r_dis, r_ox)
    }

    /// Right-hand side `(dc/dt, dd/dt, dtheta/dt)` with domain projection.
    pub fn derivatives(&self, c: T, d: T, theta: T, v: T) -> (T, T, T) {
        let (r_dis, r_ox) = self.rates_projected(c, d, theta, v);
        if self.opts.freeze_particles {
            let dc = self.b3 * d * d * r_dis;
            return (dc, T::zero(), T::zero());
        }
        if d <= self.d_min {
            return (T::zero(), T::zero(), T::zero());
        }
        let dc = self.b3 * d * d * r_dis;
        let dd = -self.kin.params().omega * r_dis;
        let theta_cl = theta.max(T::zero()).min(T::one());
        let dtheta = r_ox / self.kin.params().gamma_site
            - lit::<T>(2.0) * theta_cl / d * dd;
        (dc, dd, dtheta)
    }
}

/// Right-hand side of the point model at the given state and potential.
///
/// Rejects states outside the rate-law domain; the integrators instead
/// project their internal stage states.
pub fn rhs<T: Scalar>(
    state: &PointState<T>,
    v: T,
    params: &ModelParams<T>,
) -> Result<(T, T, T)> {
    let derived = params.derive()?;
    let kin = Kinetics::new(params);
    let r_dis = kin.r_dissol(&KineticState { c: state.c, d: state.d, theta: state.theta, v })?;
    let r_ox = kin.r_oxide(state.theta, v)?;
    let dc = derived.b3 * state.d * state.d * r_dis;
    let dd = -params.omega * r_dis;
    let dtheta = r_ox / params.gamma_site - lit::<T>(2.0) * state.theta / state.d * dd;
    Ok((dc, dd, dtheta))
}

/// First integral of the point model: `c + B3 d^3/(3 Omega)`, mol/cm³.
pub fn first_integral<T: Scalar>(state: &PointState<T>, params: &ModelParams<T>) -> Result<T> {
    let derived = params.derive()?;
    Ok(state.c + derived.b3 / (lit::<T>(3.0) * params.omega) * state.d * state.d * state.d)
}

/// Outcome of one step: the clamps applied after it.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepEvents {
    pub c_clamped: bool,
    pub d_clamped: bool,
    pub theta_clamped: bool,
    pub violation: f64,
}

/// One classical RK4 step with the three stage voltages supplied by the
/// caller. Post-step values are projected back into the physical range;
/// an excursion beyond [`CLAMP_ABORT_THRESHOLD`] is an instability error.
fn rk4_kernel<T: Scalar>(
    sys: &ReactionSystem<'_, T>,
    state: &PointState<T>,
    dt: T,
    v_start: T,
    v_mid: T,
    v_end: T,
    step: u64,
) -> Result<(PointState<T>, StepEvents)> {
    let half = dt * lit(0.5);
    let sixth = dt / lit(6.0);
    let two = lit::<T>(2.0);

    let (k1c, k1d, k1t) = sys.derivatives(state.c, state.d, state.theta, v_start);
    let (k2c, k2d, k2t) = sys.derivatives(
        state.c + half * k1c,
        state.d + half * k1d,
        state.theta + half * k1t,
        v_mid,
    );
    let (k3c, k3d, k3t) = sys.derivatives(
        state.c + half * k2c,
        state.d + half * k2d,
        state.theta + half * k2t,
        v_mid,
    );
    let (k4c, k4d, k4t) = sys.derivatives(
        state.c + dt * k3c,
        state.d + dt * k3d,
        state.theta + dt * k3t,
        v_end,
    );

    let mut c = state.c + sixth * (k1c + two * k2c + two * k3c + k4c);
    let mut d = state.d + sixth * (k1d + two * k2d + two * k3d + k4d);
    let mut theta = state.theta + sixth * (k1t + two * k2t + two * k3t + k4t);

    let d_min = lit::<T>(D_MIN_CM);
    let mut ev = StepEvents::default();
    let mut worst = T::zero();
    if c < T::zero() {
        worst = worst.max(-c);
        ev.c_clamped = true;
        c = T::zero();
    }
    if d < d_min {
        worst = worst.max(d_min - d);
        ev.d_clamped = true;
        d = d_min;
    }
    if theta < T::zero() {
        worst = worst.max(-theta);
        ev.theta_clamped = true;
        theta = T::zero();
    } else if theta > T::one() {
        worst = worst.max(theta - T::one());
        ev.theta_clamped = true;
        theta = T::one();
    }
    ev.violation = worst.to_f64().unwrap_or(f64::INFINITY);
    if ev.violation > CLAMP_ABORT_THRESHOLD {
        return Err(Error::Instability {
            step,
            t: state.t.to_f64().unwrap_or(f64::NAN),
            detail: format!(
                "state left the physical range by {:.3e} before clamping",
                ev.violation
            ),
        });
    }
    Ok((PointState { c, d, theta, t: state.t + dt }, ev))
}

/// One RK4 step sampling `V` at `t`, `t + dt/2`, and `t + dt`; the terminal
/// stage takes the limit of `V` from below so that a step ending exactly on
/// a protocol jump integrates the elapsing branch.
pub fn rk4_step<T: Scalar>(
    state: &PointState<T>,
    protocol: &VoltageProtocol<T>,
    dt: T,
    params: &ModelParams<T>,
) -> Result<(PointState<T>, StepEvents)> {
    rk4_step_with(state, protocol, dt, params, ReactionOptions::default())
}

pub fn rk4_step_with<T: Scalar>(
    state: &PointState<T>,
    protocol: &VoltageProtocol<T>,
    dt: T,
    params: &ModelParams<T>,
    opts: ReactionOptions,
) -> Result<(PointState<T>, StepEvents)> {
    if !(dt > T::zero()) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let sys = ReactionSystem::new(params, opts)?;
    let v0 = protocol.evaluate(state.t);
    let vm = protocol.evaluate(state.t + dt * lit(0.5));
    let v1 = protocol.evaluate_left(state.t + dt);
    rk4_kernel(&sys, state, dt, v0, vm, v1, 0)
}

/// A fixed-step trajectory of the point model.
#[derive(Debug, Clone)]
pub struct PointRun<T> {
    /// States at the stored steps (always includes the initial and final
    /// states).
    pub states: Vec<PointState<T>>,
    pub clamps: ClampStats,
    /// Step actually used: the period divided into an even number of steps
    /// nearest to the request, so protocol jumps land on step boundaries.
    pub dt_effective: T,
    pub steps_per_cycle: u64,
    pub total_steps: u64,
}

/// Integrate the point model from `initial` to `t_end` with steps of
/// (approximately) `dt`, phase-locked to the protocol cycle.
pub fn run_point<T: Scalar>(
    initial: &PointState<T>,
    protocol: &VoltageProtocol<T>,
    t_end: T,
    dt: T,
    params: &ModelParams<T>,
) -> Result<PointRun<T>> {
    run_point_with(initial, protocol, t_end, dt, params, ReactionOptions::default(), 1)
}

pub fn run_point_with<T: Scalar>(
    initial: &PointState<T>,
    protocol: &VoltageProtocol<T>,
    t_end: T,
    dt: T,
    params: &ModelParams<T>,
    opts: ReactionOptions,
    stride: usize,
) -> Result<PointRun<T>> {
    if !(dt > T::zero() && t_end > T::zero()) {
        return Err(Error::Config(format!(
            "t_end and dt must be positive, got t_end = {t_end}, dt = {dt}"
        )));
    }
    let stride = stride.max(1) as u64;
    let sys = ReactionSystem::new(params, opts)?;

    let period = protocol.period();
    let ratio = (period / dt).to_f64().unwrap_or(f64::NAN);
    if !ratio.is_finite() || ratio > 1e12 {
        return Err(Error::Config(format!("dt = {dt} is too small for period {period}")));
    }
    // Even step count per cycle so half-period breakpoints land on
    // boundaries.
    let steps_per_cycle = (((ratio / 2.0).round() as u64) * 2).max(2);
    let dt_eff = period / lit(steps_per_cycle as f64);
    let sampler = StageSampler::new(protocol, steps_per_cycle);
    let total_steps =
        ((t_end / dt_eff).to_f64().unwrap_or(f64::NAN).round() as u64).max(1);

    let mut state = *initial;
    let mut clamps = ClampStats::default();
    let mut states = Vec::with_capacity((total_steps / stride + 2) as usize);
    states.push(state);

    for step in 0..total_steps {
        let k = step % steps_per_cycle;
        let v0 = sampler.at(2 * k, false);
        let vm = sampler.at(2 * k + 1, false);
        let v1 = sampler.at(2 * k + 2, true);
        let (next, ev) = rk4_kernel(&sys, &state, dt_eff, v0, vm, v1, step)?;
        state = next;
        if ev.c_clamped {
            clamps.c += 1;
        }
        if ev.d_clamped {
            clamps.d += 1;
        }
        if ev.theta_clamped {
            clamps.theta += 1;
        }
        clamps.max_violation = clamps.max_violation.max(ev.violation);
        if (step + 1) % stride == 0 || step + 1 == total_steps {
            states.push(state);
        }
    }

    Ok(PointRun { states, clamps, dt_effective: dt_eff, steps_per_cycle, total_steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voltage::default_protocols;

    fn params() -> ModelParams<f64> {
        ModelParams::table_defaults()
    }

    #[test]
    fn initial_state_oxide_rate_dominates_theta_derivative() {
        let p = params();
        let s = PointState::initial(&p);
        let (_, _, dtheta) = rhs(&s, 0.65, &p).unwrap();
        let kin = Kinetics::new(&p);
        let want = kin.r_oxide(0.0, 0.65).unwrap() / p.gamma_site;
        // The coverage coupling term vanishes identically at theta = 0.
        assert_eq!(dtheta, want);
    }

    #[test]
    fn full_coverage_freezes_concentration_and_diameter() {
        let p = params();
        let s = PointState { c: 0.0, d: p.d_pt, theta: 1.0, t: 0.0 };
        let (dc, dd, _) = rhs(&s, 0.8, &p).unwrap();
        assert_eq!(dc, 0.0);
        assert_eq!(dd, 0.0);
    }

    #[test]
    fn concentration_and_volume_derivatives_balance() {
        let p = params();
        let derived = p.derive().unwrap();
        for &(c, d, theta, v) in &[
            (0.0, 3e-7, 0.0, 0.8),
            (1e-10, 2.5e-7, 0.3, 1.0),
            (5e-10, 3.5e-7, 0.7, 0.65),
        ] {
            let s = PointState { c, d, theta, t: 0.0 };
            let (dc, dd, _) = rhs(&s, v, &p).unwrap();
            let lhs = p.omega * dc;
            let rhs_ = -derived.b3 * d * d * dd;
            let scale = lhs.abs().max(rhs_.abs()).max(1e-300);
            assert!((lhs - rhs_).abs() / scale < 1e-14);
        }
    }

    #[test]
    fn tiny_step_changes_state_by_continuity() {
        let p = params();
        let proto = VoltageProtocol::constant(0.65);
        let s = PointState { c: 1e-12, d: 3e-7, theta: 0.2, t: 0.0 };
        let (next, _) = rk4_step(&s, &proto, 1e-12, &p).unwrap();
        assert!((next.c - s.c).abs() / s.c < 1e-9);
        assert!((next.d - s.d).abs() / s.d < 1e-9);
        assert!((next.theta - s.theta).abs() / s.theta < 1e-9);
    }

    #[test]
    fn frozen_concentration_matches_closed_form() {
        // With d and theta held fixed the concentration obeys a linear ODE
        // whose constant-voltage solution is
        // (B1/B2) e^{B4 V} (1 - e^{-B2 B3 d^2 e^{-beta1 B4 V} t}).
        let p = params();
        let derived = p.derive().unwrap();
        let kin = Kinetics::new(&p);
        let v = 0.65;
        let proto = VoltageProtocol::constant(v);
        let opts = ReactionOptions { freeze_particles: true, oxide_enabled: true };
        let init = PointState::initial(&p);
        let run = run_point_with(&init, &proto, 10.0, 1e-4, &p, opts, 1000).unwrap();
        let end = run.states.last().unwrap();
        let t = end.t;

        let co = kin.coefficients(p.d_pt, 0.0).unwrap();
        let decay = co.b2 * derived.b3 * p.d_pt * p.d_pt * (-p.beta1 * co.b4 * v).exp();
        let want = co.b1 / co.b2 * (co.b4 * v).exp() * (1.0 - (-decay * t).exp());
        assert!(
            (end.c - want).abs() / want < 1e-6,
            "c = {}, closed form = {want}",
            end.c
        );
    }

    #[test]
    fn rk4_observed_order_is_at_least_3_9() {
        let p = params();
        let proto = VoltageProtocol::constant(0.8);
        let start = PointState { c: 0.0, d: 2.9e-7, theta: 0.3, t: 0.0 };
        let run_at = |dt: f64| {
            run_point_with(&start, &proto, 0.1, dt, &p, ReactionOptions::default(), 1_000_000)
                .unwrap()
                .states
                .last()
                .cloned()
                .unwrap()
        };
        let a = run_at(5e-3);
        let b = run_at(2.5e-3);
        let c = run_at(1.25e-3);
        let diff = |x: &PointState<f64>, y: &PointState<f64>| {
            let dc = (x.c - y.c) / y.c.abs().max(1e-300);
            let dd = (x.d - y.d) / y.d;
            let dt_ = (x.theta - y.theta) / y.theta;
            (dc * dc + dd * dd + dt_ * dt_).sqrt()
        };
        let e1 = diff(&a, &c);
        let e2 = diff(&b, &c);
        // Richardson: with errors ~ C dt^q, e1/e2 = (2^q - 1) ... cancel the
        // shared reference: e1 ≈ C(dt^q - (dt/4)^q), e2 ≈ C((dt/2)^q - (dt/4)^q).
        let q = ((e1 / e2 - 1.0).max(1e-9)).log2();
        assert!(q >= 3.9, "observed order {q} (e1 = {e1:.3e}, e2 = {e2:.3e})");
    }

    #[test]
    fn first_integral_initial_value_and_zero_case() {
        let p = params();
        let fi0 = first_integral(&PointState::initial(&p), &p).unwrap();
        // B3 d_Pt^3/(3 Omega), evaluated independently at 40-digit precision.
        assert!((fi0 - 1.0257436000010257e-2).abs() / 1.0257436000010257e-2 < 1e-14);
        let z = PointState { c: 0.0, d: 0.0, theta: 0.0, t: 0.0 };
        assert_eq!(first_integral(&z, &p).unwrap(), 0.0);
    }

    #[test]
    fn first_integral_is_conserved_along_rk4_trajectories() {
        let p = params();
        let proto = VoltageProtocol::constant(0.65);
        let init = PointState::initial(&p);
        let run =
            run_point_with(&init, &proto, 100.0, 1e-3, &p, ReactionOptions::default(), 100)
                .unwrap();
        let fi0 = first_integral(&init, &p).unwrap();
        for s in &run.states {
            let fi = first_integral(s, &p).unwrap();
            assert!((fi - fi0).abs() / fi0 < 1e-6, "drift at t = {}", s.t);
        }
    }

    #[test]
    fn reconstructing_c_from_the_first_integral_matches_integration() {
        let p = params();
        let derived = p.derive().unwrap();
        let proto = VoltageProtocol::lambda(0.6, 1.0, 16.0).unwrap();
        let init = PointState::initial(&p);
        let run =
            run_point_with(&init, &proto, 32.0, 2e-4, &p, ReactionOptions::default(), 200)
                .unwrap();
        let fi0 = first_integral(&init, &p).unwrap();
        for s in &run.states {
            let c_rec = fi0 - derived.b3 / (3.0 * p.omega) * s.d * s.d * s.d;
            // The reconstruction error scales with the conserved quantity,
            // not with c itself.
            assert!((c_rec - s.c).abs() / fi0 < 1e-6);
        }
    }

    #[test]
    fn oxide_switch_keeps_theta_at_zero() {
        let p = params();
        let proto = VoltageProtocol::lambda(0.6, 1.0, 16.0).unwrap();
        let opts = ReactionOptions { freeze_particles: false, oxide_enabled: false };
        let init = PointState::initial(&p);
        let run = run_point_with(&init, &proto, 16.0, 1e-3, &p, opts, 500).unwrap();
        for s in &run.states {
            assert_eq!(s.theta, 0.0);
        }
    }

    #[test]
    fn full_coverage_with_oxide_switch_is_stationary() {
        // theta == 1 makes both dissolution prefactors vanish; with the
        // oxide rate switched off the coverage cannot leave 1, so the whole
        // state is constant.
        let p = params();
        let proto = VoltageProtocol::lambda(0.6, 1.0, 16.0).unwrap();
        let opts = ReactionOptions { freeze_particles: false, oxide_enabled: false };
        let init = PointState { c: 0.0, d: p.d_pt, theta: 1.0, t: 0.0 };
        let run = run_point_with(&init, &proto, 16.0, 1e-3, &p, opts, 1000).unwrap();
        for s in &run.states {
            assert_eq!(s.c, 0.0);
            assert_eq!(s.d, p.d_pt);
            assert_eq!(s.theta, 1.0);
        }
    }

    #[test]
    fn log_form_of_the_coverage_equation_holds_along_trajectories() {
        // Where theta > 0, d/dt ln(theta d^2) = r_oxide/(Gamma theta).
        let p = params();
        let kin = Kinetics::new(&p);
        let proto = VoltageProtocol::constant(0.75);
        let init = PointState { c: 0.0, d: 3e-7, theta: 0.05, t: 0.0 };
        let run =
            run_point_with(&init, &proto, 0.2, 1e-5, &p, ReactionOptions::default(), 5)
                .unwrap();
        let states = &run.states;
        for w in states.windows(3) {
            let (a, b, c) = (&w[0], &w[1], &w[2]);
            if b.theta < 1e-6 {
                continue;
            }
            let h = c.t - a.t;
            let lhs = ((c.theta * c.d * c.d).ln() - (a.theta * a.d * a.d).ln()) / h;
            let want = kin.r_oxide(b.theta, 0.75).unwrap() / (p.gamma_site * b.theta);
            assert!(
                (lhs - want).abs() / want.abs() < 1e-3,
                "t = {}: {lhs} vs {want}",
                b.t
            );
        }
    }

    #[test]
    fn physical_bounds_hold_at_every_output_state() {
        let p = params();
        for proto in default_protocols::<f64>() {
            let dt = if proto.has_jump() { 1e-4 } else { 1e-3 };
            let init = PointState::initial(&p);
            let run = run_point_with(
                &init,
                &proto,
                2.0 * proto.period(),
                dt,
                &p,
                ReactionOptions::default(),
                50,
            )
            .unwrap();
            for s in &run.states {
                assert!(s.c >= 0.0, "{}", proto.name());
                assert!(s.d >= D_MIN_CM, "{}", proto.name());
                assert!((0.0..=1.0).contains(&s.theta), "{}", proto.name());
            }
        }
    }
}
