//! Post-processing: mass-loss series, linear slope fits, and failure
//! prognosis.
//!
//! The remaining mass fraction of a particle of diameter `d` is its volume
//! relative to the pristine particle, `(4/3)π(d/2)³ / V_Pt = (d/d_Pt)³`,
//! clipped to `[0, 1]`. Mass loss under cycling is close to linear per
//! cycle; extrapolating the fitted slope to zero remaining mass gives the
//! cycles-to-failure prognosis.

use crate::error::{Error, Result};
use crate::params::{DerivedParams, ModelParams};
use crate::scalar::{lit, Scalar};

/// Remaining mass fraction for one diameter, clipped to `[0, 1]`.
pub fn mass_fraction<T: Scalar>(d: T, v_pt: T) -> T {
    let half = d / lit(2.0);
    let v = lit::<T>(4.0 / 3.0) * T::from_f64(std::f64::consts::PI).unwrap() * half * half * half;
    (v / v_pt).max(T::zero()).min(T::one())
}

/// Nodewise and mean mass fraction for a diameter field.
pub fn mass_ratio<T: Scalar>(d_field: &[T], params: &ModelParams<T>) -> Result<(T, Vec<T>)> {
    let derived = params.derive()?;
    Ok(mass_ratio_derived(d_field, &derived))
}

pub(crate) fn mass_ratio_derived<T: Scalar>(
    d_field: &[T],
    derived: &DerivedParams<T>,
) -> (T, Vec<T>) {
    let nodewise: Vec<T> = d_field.iter().map(|&d| mass_fraction(d, derived.v_pt)).collect();
    let mean = nodewise.iter().copied().sum::<T>() / lit(nodewise.len() as f64);
    (mean, nodewise)
}

/// Mass fractions at cycle boundaries.
#[derive(Debug, Clone)]
pub struct MassSeries<T> {
    pub entries: Vec<CycleMass<T>>,
}

#[derive(Debug, Clone)]
pub struct CycleMass<T> {
    /// Completed cycles (0 is the initial state).
    pub cycle: u32,
    pub t: T,
    /// Mean mass fraction over nodes.
    pub mean: T,
    /// Per-node mass fraction.
    pub nodewise: Vec<T>,
}

impl<T: Scalar> MassSeries<T> {
    /// Build directly from (cycle, mean) pairs with no nodewise data.
    pub fn from_means(means: &[(u32, T)]) -> Self {
        MassSeries {
            entries: means
                .iter()
                .map(|&(cycle, mean)| CycleMass {
                    cycle,
                    t: T::zero(),
                    mean,
                    nodewise: Vec::new(),
                })
                .collect(),
        }
    }
}

/// Least-squares fit of the per-cycle mass loss.
#[derive(Debug, Clone, Copy)]
pub struct SlopeFit<T> {
    /// Mass fraction lost per cycle (positive for decaying mass).
    pub slope: T,
    pub r_squared: T,
    /// Fitted cycle range, inclusive.
    pub window: (u32, u32),
    pub n_points: usize,
}

/// Fit the mean mass fraction against the cycle index over `window`
/// (inclusive); `None` discards the first cycle's transient and fits
/// cycles `2..=end`. Needs at least three samples in the window.
pub fn fit_slope<T: Scalar>(
    series: &MassSeries<T>,
    window: Option<(u32, u32)>,
) -> Result<SlopeFit<T>> {
    let last = series
        .entries
        .iter()
        .map(|e| e.cycle)
        .max()
        .ok_or_else(|| Error::Config("empty mass series".to_string()))?;
    let (lo, hi) = window.unwrap_or((2.min(last), last));
    let pts: Vec<(T, T)> = series
        .entries
        .iter()
        .filter(|e| e.cycle >= lo && e.cycle <= hi)
        .map(|e| (lit::<T>(e.cycle as f64), e.mean))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Config(format!(
            "slope fit window [{lo}, {hi}] holds {} samples; at least 3 needed",
            pts.len()
        )));
    }
    let n = lit::<T>(pts.len() as f64);
    let sx = pts.iter().map(|p| p.0).sum::<T>();
    let sy = pts.iter().map(|p| p.1).sum::<T>();
    let mx = sx / n;
    let my = sy / n;
    let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<T>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<T>();
    let syy = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum::<T>();
    let b = sxy / sxx;
    let r_squared = if syy > T::zero() { (sxy * sxy) / (sxx * syy) } else { T::one() };
    Ok(SlopeFit { slope: -b, r_squared, window: (lo, hi), n_points: pts.len() })
}

/// Failure prognosis from a fitted loss slope.
#[derive(Debug, Clone, Copy)]
pub struct PrognosisReport<T> {
    /// Mass fraction lost per cycle.
    pub slope: T,
    /// Cycle length used to convert cycles to wall time, s.
    pub period: T,
    /// `None` when the slope predicts no loss.
    pub cycles_to_failure: Option<T>,
    pub hours_to_failure: Option<T>,
}

/// Extrapolate the linear loss to zero remaining mass.
pub fn prognosis<T: Scalar>(slope: T, period: T, start_mass: T) -> PrognosisReport<T> {
    if slope > T::zero() {
        let cycles = start_mass / slope;
        let hours = cycles * period / lit(3600.0);
        PrognosisReport {
            slope,
            period,
            cycles_to_failure: Some(cycles),
            hours_to_failure: Some(hours),
        }
    } else {
        PrognosisReport { slope, period, cycles_to_failure: None, hours_to_failure: None }
    }
}

/// Nodewise mass profiles at the requested cycle boundaries.
///
/// Fails if a requested cycle has no stored snapshot.
pub fn spatial_profile<'s, T: Scalar>(
    series: &'s MassSeries<T>,
    cycles: &[u32],
) -> Result<Vec<(u32, &'s [T])>> {
    cycles
        .iter()
        .map(|&c| {
            series
                .entries
                .iter()
                .find(|e| e.cycle == c)
                .map(|e| (c, e.nodewise.as_slice()))
                .ok_or_else(|| Error::Config(format!("no snapshot stored for cycle {c}")))
        })
        .collect()
}
