//! Reference solution for the concentration equation with frozen particle
//! state.
//!
//! With `d` and `theta` held constant the concentration obeys a single
//! linear inhomogeneous ODE,
//!
//! ```text
//! dc/dt = B1 B3 d² e^{(1-beta1) B4 V(t)} - c B2 B3 d² e^{-beta1 B4 V(t)},
//! ```
//!
//! solved in closed form by an integrating factor `K(t)` with
//! `K'(t) = B2 B3 d² e^{-beta1 B4 V(t)} K(t)`:
//!
//! ```text
//! c(t) = e^{-Λ(t)} ( c(0) + B1 B3 d² ∫_0^t e^{a(τ) + Λ(τ)} dτ ),
//! Λ(t) = B2 B3 d² ∫_0^t e^{-beta1 B4 V(s)} ds,   a(τ) = (1-beta1) B4 V(τ).
//! ```
//!
//! The exponent `Λ` can reach tens of thousands over low-potential dwells,
//! so the outer integrand is evaluated with the shifted exponent
//! `a(τ) + Λ(τ) - Λ(t)`, which is mathematically identical and never
//! overflows. `K(0)` is a free positive normalization that cancels; it
//! defaults to 1 and is carried through the evaluation so the cancellation
//! is exercised, not assumed.
//!
//! Integrals use composite Simpson panels split at every protocol
//! breakpoint, refined by doubling until the result is converged to the
//! requested relative tolerance. The running inner integral is accumulated
//! in one forward sweep (sliding quadratic rule), so the nested integral
//! costs O(n), not O(n²).

use crate::error::{Error, Result};
use crate::kinetics::Kinetics;
use crate::params::ModelParams;
use crate::scalar::{lit, Scalar};
use crate::voltage::VoltageProtocol;

/// Dissolution-law coefficients frozen at a fixed `(d, theta)`.
#[derive(Debug, Clone, Copy)]
pub struct FrozenCoefficients<T> {
    pub b1: T,
    pub b2: T,
    pub b4: T,
    pub beta1: T,
    /// `B3 d²`, 1/cm.
    pub b3_d_sq: T,
    /// Normalization of the integrating factor, `K(0) > 0`.
    pub k0: T,
}

impl<T: Scalar> FrozenCoefficients<T> {
    /// Freeze the coefficients of the dissolution law at `(d, theta)`.
    pub fn new(d: T, theta: T, params: &ModelParams<T>) -> Result<Self> {
        let co = Kinetics::new(params).coefficients(d, theta)?;
        let derived = params.derive()?;
        Ok(FrozenCoefficients {
            b1: co.b1,
            b2: co.b2,
            b4: co.b4,
            beta1: params.beta1,
            b3_d_sq: derived.b3 * d * d,
            k0: T::one(),
        })
    }

    pub fn with_k0(mut self, k0: T) -> Result<Self> {
        if !(k0 > T::zero() && k0.is_finite()) {
            return Err(Error::Config(format!("K(0) must be positive, got {k0}")));
        }
        self.k0 = k0;
        Ok(self)
    }
}

/// Quadrature control.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    /// Relative convergence target on the final value.
    pub rel_tol: f64,
    /// Initial Simpson sub-intervals per panel (rounded up to even).
    pub base_subdivisions: usize,
    /// Refinement doublings before giving up.
    pub max_doublings: u32,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature { rel_tol: 1e-8, base_subdivisions: 32, max_doublings: 16 }
    }
}

/// Panel boundaries: protocol breakpoints (and cycle starts) within
/// `[0, t_end]`, then `t_end` itself. Long smooth panels are split so no
/// panel exceeds half a period.
fn panel_grid<T: Scalar>(protocol: &VoltageProtocol<T>, t_end: T) -> Vec<T> {
    let p = protocol.period();
    let mut cuts: Vec<T> = vec![T::zero()];
    let offsets = protocol.breakpoints();
    let max_len = p * lit(0.5);
    let mut cycle_start = T::zero();
    'outer: loop {
        for &off in offsets.iter().chain([p * lit(0.5)].iter().take(
            if offsets.len() < 2 && protocol.period() > T::zero() { 1 } else { 0 },
        )) {
            let cut = cycle_start + off;
            if cut > T::zero() && cut < t_end {
                cuts.push(cut);
            }
            if cut >= t_end {
                break 'outer;
            }
        }
        cycle_start = cycle_start + p;
        if cycle_start >= t_end {
            break;
        }
        cuts.push(cycle_start.min(t_end));
    }
    cuts.push(t_end);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    // Split panels longer than max_len.
    let mut grid = vec![cuts[0]];
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b - a;
        if len > max_len {
            let parts = (len / max_len).ceil().to_f64().unwrap() as usize;
            for j in 1..parts {
                grid.push(a + len * lit(j as f64 / parts as f64));
            }
        }
        grid.push(b);
    }
    grid
}

/// Evaluate the inner exponent `-beta1 B4 V` and outer exponent
/// `(1-beta1) B4 V` at a node, taking the left limit at panel right edges.
#[inline]
fn exponents<T: Scalar>(
    frozen: &FrozenCoefficients<T>,
    protocol: &VoltageProtocol<T>,
    t: T,
    right_edge: bool,
) -> (T, T) {
    let v = if right_edge { protocol.evaluate_left(t) } else { protocol.evaluate(t) };
    (-frozen.beta1 * frozen.b4 * v, (T::one() - frozen.beta1) * frozen.b4 * v)
}

struct Sweep<T> {
    /// Λ at every node of the concatenated panel grids.
    lambda: Vec<T>,
    /// Outer exponent `a` at every node.
    outer: Vec<T>,
    /// Start index of each panel in the node arrays.
    panel_starts: Vec<usize>,
    /// Sub-intervals per panel.
    m: usize,
}

/// One forward sweep on `m` sub-intervals per panel: node times, exponent
/// samples, and the cumulative inner integral Λ by the sliding-quadratic
/// rule (O(h⁴) locally on the uniform panel grid).
fn forward_sweep<T: Scalar>(
    frozen: &FrozenCoefficients<T>,
    protocol: &VoltageProtocol<T>,
    grid: &[T],
    m: usize,
) -> Sweep<T> {
    let mut f_inner = Vec::new();
    let mut outer = Vec::new();
    let mut panel_starts = Vec::new();

    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        panel_starts.push(f_inner.len());
        let len = b - a;
        for j in 0..=m {
            let frac = lit::<T>(j as f64 / m as f64);
            let t = if j == m { b } else { a + len * frac };
            let (e_in, e_out) = exponents(frozen, protocol, t, j == m);
            f_inner.push(e_in.exp());
            outer.push(e_out);
        }
    }

    // Cumulative Λ: within each panel integrate f_inner with the quadratic
    // through three consecutive nodes; panels chain continuously.
    let scale = frozen.b2 * frozen.b3_d_sq;
    let mut lambda = vec![T::zero(); f_inner.len()];
    let twelve = lit::<T>(12.0);
    let mut running = T::zero();
    for (p, &start) in panel_starts.iter().enumerate() {
        let end = start + m;
        let h = (grid[p + 1] - grid[p]) / lit(m as f64);
        lambda[start] = running;
        for j in start..end {
            let (f0, f1, f2) = if j == start {
                (f_inner[j], f_inner[j + 1], f_inner[j + 2])
            } else {
                (f_inner[j - 1], f_inner[j], f_inner[j + 1])
            };
            let inc = if j == start {
                // First interval: ∫ over [t0, t1] of the quadratic through
                // (t0, t1, t2).
                h / twelve * (lit::<T>(5.0) * f0 + lit::<T>(8.0) * f1 - f2)
            } else {
                // Interior: ∫ over [tj, tj+1] of the quadratic through
                // (tj-1, tj, tj+1).
                h / twelve * (-f0 + lit::<T>(8.0) * f1 + lit::<T>(5.0) * f2)
            };
            running = running + scale * inc;
            lambda[j + 1] = running;
        }
    }
    Sweep { lambda, outer, panel_starts, m }
}

/// Outer composite Simpson with the overflow-shifted integrand.
fn outer_integral<T: Scalar>(frozen: &FrozenCoefficients<T>, sweep: &Sweep<T>, grid: &[T]) -> T {
    let lambda_end = *sweep.lambda.last().unwrap();
    let k0 = frozen.k0;
    let mut total = T::zero();
    let three = lit::<T>(3.0);
    let four = lit::<T>(4.0);
    let two = lit::<T>(2.0);
    for (p, &start) in sweep.panel_starts.iter().enumerate() {
        let m = sweep.m;
        let h = (grid[p + 1] - grid[p]) / lit(m as f64);
        let g = |j: usize| -> T {
            k0 * (sweep.outer[start + j] + sweep.lambda[start + j] - lambda_end).exp()
        };
        let mut acc = g(0) + g(m);
        let mut j = 1;
        while j < m {
            acc = acc + four * g(j);
            if j + 1 < m {
                acc = acc + two * g(j + 1);
            }
            j += 2;
        }
        total = total + h / three * acc;
    }
    total
}

/// Concentration of the frozen-coefficient model at time `t` with
/// `c(0) = 0`, by adaptive panelwise quadrature of the integrating-factor
/// solution.
pub fn analytic_c<T: Scalar>(
    protocol: &VoltageProtocol<T>,
    t: T,
    frozen: &FrozenCoefficients<T>,
    quad: &Quadrature,
) -> Result<T> {
    if t < T::zero() {
        return Err(Error::Config(format!("time must be non-negative, got {t}")));
    }
    if t == T::zero() {
        return Ok(T::zero());
    }
    let grid = panel_grid(protocol, t);
    let mut m = quad.base_subdivisions.max(4);
    if m % 2 == 1 {
        m += 1;
    }
    let mut prev: Option<T> = None;
    let mut achieved = f64::INFINITY;
    for _ in 0..=quad.max_doublings {
        let sweep = forward_sweep(frozen, protocol, &grid, m);
        let integral = outer_integral(frozen, &sweep, &grid);
        let c = frozen.b1 * frozen.b3_d_sq * integral / frozen.k0;
        if let Some(p) = prev {
            let scale = c.abs().max(T::min_positive_value());
            achieved = ((c - p).abs() / scale).to_f64().unwrap_or(f64::INFINITY);
            if achieved <= quad.rel_tol {
                return Ok(c);
            }
        }
        prev = Some(c);
        m *= 2;
    }
    Err(Error::Quadrature { target: quad.rel_tol, achieved })
}

/// `ln K(t)` (including `ln K(0)`), by the same quadrature machinery.
pub fn log_integrating_factor<T: Scalar>(
    protocol: &VoltageProtocol<T>,
    t: T,
    frozen: &FrozenCoefficients<T>,
    quad: &Quadrature,
) -> Result<T> {
    if t < T::zero() {
        return Err(Error::Config(format!("time must be non-negative, got {t}")));
    }
    if t == T::zero() {
        return Ok(frozen.k0.ln());
    }
    let grid = panel_grid(protocol, t);
    let mut m = quad.base_subdivisions.max(4);
    if m % 2 == 1 {
        m += 1;
    }
    let mut prev: Option<T> = None;
    let mut achieved = f64::INFINITY;
    for _ in 0..=quad.max_doublings {
        let sweep = forward_sweep(frozen, protocol, &grid, m);
        let lam = *sweep.lambda.last().unwrap();
        if let Some(p) = prev {
            let scale = lam.abs().max(T::min_positive_value());
            achieved = ((lam - p).abs() / scale).to_f64().unwrap_or(f64::INFINITY);
            if achieved <= quad.rel_tol {
                return Ok(frozen.k0.ln() + lam);
            }
        }
        prev = Some(lam);
        m *= 2;
    }
    Err(Error::Quadrature { target: quad.rel_tol, achieved })
}

/// Closed form at constant voltage:
/// `(B1/B2) e^{B4 V} (1 - e^{-B2 B3 d² e^{-beta1 B4 V} t})`.
pub fn closed_form_constant_v<T: Scalar>(v: T, t: T, frozen: &FrozenCoefficients<T>) -> T {
    let decay = frozen.b2 * frozen.b3_d_sq * (-frozen.beta1 * frozen.b4 * v).exp();
    frozen.b1 / frozen.b2 * (frozen.b4 * v).exp() * (T::one() - (-decay * t).exp())
}

/// Residual of a sampled concentration series against the frozen-coefficient
/// ODE.
#[derive(Debug, Clone, Copy)]
pub struct ResidualReport<T> {
    /// Largest |dc/dt - rhs| over admissible samples.
    pub max_abs: T,
    /// Largest |rhs| over the same samples.
    pub rhs_scale: T,
    /// `max_abs / rhs_scale`.
    pub normalized: T,
    /// Interior samples actually checked.
    pub n_checked: usize,
}

/// Check `dc/dt = rhs` by centered differences on uniformly spaced samples.
/// Samples whose difference stencil straddles a protocol breakpoint are
/// skipped; centered differencing is invalid across kinks.
pub fn verify_ode_residual<T: Scalar>(
    times: &[T],
    values: &[T],
    protocol: &VoltageProtocol<T>,
    frozen: &FrozenCoefficients<T>,
) -> Result<ResidualReport<T>> {
    if times.len() != values.len() || times.len() < 3 {
        return Err(Error::Config("need at least 3 equally spaced samples".to_string()));
    }
    let h = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - h).abs() > h * lit(1e-9) {
            return Err(Error::Config("samples must be uniformly spaced".to_string()));
        }
    }

    // Breakpoint times within the sampled range.
    let p = protocol.period();
    let t_last = *times.last().unwrap();
    let mut breaks: Vec<T> = Vec::new();
    let mut cycle_start = T::zero();
    while cycle_start <= t_last + p {
        for &off in &protocol.breakpoints() {
            breaks.push(cycle_start + off);
        }
        cycle_start = cycle_start + p;
    }

    let rhs = |t: T, c: T| -> T {
        let v = protocol.evaluate(t);
        frozen.b3_d_sq
            * (frozen.b1 * ((T::one() - frozen.beta1) * frozen.b4 * v).exp()
                - c * frozen.b2 * (-frozen.beta1 * frozen.b4 * v).exp())
    };

    let mut max_abs = T::zero();
    let mut scale = T::zero();
    let mut n_checked = 0usize;
    for i in 1..times.len() - 1 {
        let t = times[i];
        let near_break = breaks
            .iter()
            .any(|&b| (b - t).abs() < h * lit(1.5));
        if near_break {
            continue;
        }
        let dc = (values[i + 1] - values[i - 1]) / (lit::<T>(2.0) * h);
        let f = rhs(t, values[i]);
        max_abs = max_abs.max((dc - f).abs());
        scale = scale.max(f.abs());
        n_checked += 1;
    }
    if n_checked == 0 {
        return Err(Error::Config("every sample straddles a breakpoint".to_string()));
    }
    let normalized = if scale > T::zero() { max_abs / scale } else { max_abs };
    Ok(ResidualReport { max_abs, rhs_scale: scale, normalized, n_checked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nondiffusive::{run_point_with, PointState, ReactionOptions};
    use crate::voltage::default_protocols;

    fn params() -> ModelParams<f64> {
        ModelParams::table_defaults()
    }

    fn frozen_bare(p: &ModelParams<f64>) -> FrozenCoefficients<f64> {
        FrozenCoefficients::new(p.d_pt, 0.0, p).unwrap()
    }

    #[test]
    fn zero_time_gives_zero_concentration() {
        let p = params();
        let f = frozen_bare(&p);
        let proto = VoltageProtocol::lambda(0.6, 1.0, 16.0).unwrap();
        assert_eq!(analytic_c(&proto, 0.0, &f, &Quadrature::default()).unwrap(), 0.0);
    }

    #[test]
    fn constant_voltage_matches_the_closed_form() {
        let p = params();
        let f = frozen_bare(&p);
        let proto = VoltageProtocol::constant(0.65);
        for &t in &[0.01, 0.1, 1.0, 10.0] {
            let c_quad = analytic_c(&proto, t, &f, &Quadrature::default()).unwrap();
            let c_closed = closed_form_constant_v(0.65, t, &f);
            assert!(
                (c_quad - c_closed).abs() / c_closed < 1e-8,
                "t = {t}: {c_quad} vs {c_closed}"
            );
        }
    }

    #[test]
    fn long_time_limit_is_the_equilibrium_concentration() {
        let p = params();
        let kin = Kinetics::new(&p);
        let f = frozen_bare(&p);
        let proto = VoltageProtocol::constant(0.65);
        let c = analytic_c(&proto, 0.1, &f, &Quadrature::default()).unwrap();
        let css = f.b1 / f.b2 * (f.b4 * 0.65f64).exp();
        assert!((c - css).abs() / css < 1e-8);
        let css_kin = kin.equilibrium_c(p.d_pt, 0.0, 0.65).unwrap();
        assert!((css - css_kin).abs() / css_kin < 1e-12);
    }

    #[test]
    fn quadrature_failure_reports_achieved_error() {
        let p = params();
        let f = frozen_bare(&p);
        let proto = VoltageProtocol::lambda(0.6, 1.0, 16.0).unwrap();
        let quad = Quadrature { rel_tol: 1e-30, base_subdivisions: 4, max_doublings: 2 };
        match analytic_c(&proto, 5.0, &f, &quad) {
            Err(Error::Quadrature { achieved, target }) => {
                assert!(achieved > target);
            }
            other => panic!("expected quadrature error, got {other:?}"),
        }
    }

    #[test]
    fn log_integrating_factor_is_strictly_increasing() {
        let p = params();
        let f = frozen_bare(&p);
        let proto = VoltageProtocol::pi(0.6, 0.9, 10.0).unwrap();
        let quad = Quadrature::default();
        let mut prev = log_integrating_factor(&proto, 0.0, &f, &quad).unwrap();
        for k in 1..=20 {
            let t = k as f64 * 0.5;
            let lk = log_integrating_factor(&proto, t, &f, &quad).unwrap();
            assert!(lk > prev, "t = {t}");
            prev = lk;
        }
    }

    #[test]
    fn normalization_cancels_exactly_for_binary_scalings() {
        let p = params();
        let proto = VoltageProtocol::lambda(0.6, 1.0, 16.0).unwrap();
        let quad = Quadrature::default();
        let base = frozen_bare(&p);
        let c1 = analytic_c(&proto, 2.0, &base, &quad).unwrap();
        for &k0 in &[2.0, 0.25, 1024.0] {
            let f = frozen_bare(&p).with_k0(k0).unwrap();
            let ck = analytic_c(&proto, 2.0, &f, &quad).unwrap();
            assert_eq!(c1.to_bits(), ck.to_bits(), "K(0) = {k0}");
        }
        let f = frozen_bare(&p).with_k0(3.7).unwrap();
        let ck = analytic_c(&proto, 2.0, &f, &quad).unwrap();
        assert!((ck - c1).abs() / c1 < 1e-13);
    }

    #[test]
    fn residual_of_the_analytic_solution_is_small() {
        let p = params();
        let f = frozen_bare(&p);
        let proto = VoltageProtocol::lambda(0.6, 1.0, 16.0).unwrap();
        let quad = Quadrature::default();
        // Sample after the initial relaxation layer (width ~1/2700 s at the
        // low potential), which centered differencing cannot resolve.
        let n = 1000;
        let (t0, t1) = (0.5, 2.5);
        let times: Vec<f64> = (0..=n).map(|i| t0 + (t1 - t0) * i as f64 / n as f64).collect();
        let values: Vec<f64> =
            times.iter().map(|&t| analytic_c(&proto, t, &f, &quad).unwrap()).collect();
        let rep = verify_ode_residual(&times, &values, &proto, &f).unwrap();
        assert!(rep.normalized < 1e-5, "normalized residual {}", rep.normalized);
        assert!(rep.n_checked > 900);
    }

    #[test]
    fn residual_flags_the_zero_function() {
        let p = params();
        let f = frozen_bare(&p);
        let v = 0.8;
        let proto = VoltageProtocol::constant(v);
        let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        let values = vec![0.0; times.len()];
        let rep = verify_ode_residual(&times, &values, &proto, &f).unwrap();
        let forward = f.b1 * f.b3_d_sq * ((1.0 - f.beta1) * f.b4 * v).exp();
        assert!((rep.max_abs - forward).abs() / forward < 1e-12);
        assert!((rep.normalized - 1.0).abs() < 1e-12);
    }

    #[test]
    fn residual_of_an_rk4_trajectory_is_small() {
        let p = params();
        let f = frozen_bare(&p);
        let proto = VoltageProtocol::lambda(0.6, 1.0, 16.0).unwrap();
        let opts = ReactionOptions { freeze_particles: true, oxide_enabled: true };
        let init = PointState::initial(&p);
        let run = run_point_with(&init, &proto, 2.5, 1e-4, &p, opts, 20).unwrap();
        // Drop the initial relaxation layer; it is far below the sampling
        // resolution.
        let tail: Vec<_> = run.states.iter().filter(|s| s.t >= 0.5).collect();
        let times: Vec<f64> = tail.iter().map(|s| s.t).collect();
        let values: Vec<f64> = tail.iter().map(|s| s.c).collect();
        let rep = verify_ode_residual(&times, &values, &proto, &f).unwrap();
        assert!(rep.normalized < 1e-5, "normalized residual {}", rep.normalized);
    }

    #[test]
    fn rk4_agrees_with_the_quadrature_solution_for_all_default_protocols() {
        let p = params();
        let f = frozen_bare(&p);
        let quad = Quadrature::default();
        let opts = ReactionOptions { freeze_particles: true, oxide_enabled: true };
        for proto in default_protocols::<f64>() {
            let init = PointState::initial(&p);
            let run = run_point_with(&init, &proto, 10.0, 1e-4, &p, opts, 1_000_000).unwrap();
            let end = run.states.last().unwrap();
            let c_ref = analytic_c(&proto, end.t, &f, &quad).unwrap();
            let err = (end.c - c_ref).abs() / c_ref.abs().max(end.c.abs());
            assert!(err < 1e-6, "{}: rk4 {} vs quadrature {c_ref}", proto.name(), end.c);
        }
    }
}
