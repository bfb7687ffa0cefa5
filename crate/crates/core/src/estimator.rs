//! Decoy-state lower bounds on the vacuum, single- and two-photon
//! contributions of the signal source under bounded source errors.
//!
//! Everything here works in rate form: the count identities are divided by
//! the number of trains, so `D_k` bounds become bounds on per-train yields
//! and the observed inputs are the gains `Q_x = N_x / (P_x M)`.
//!
//! The chain is sequential: `D_0^L` feeds `D_1^L`, and both feed `D_2^L`.
//! Every bound is clamped below at zero. A nonpositive denominator means the
//! photon-bound conditions do not hold, which is a hard error.

use crate::channel::ObservedStats;
use crate::error::{Error, Result};
use crate::source::EnsembleBounds;

/// Cross terms of the decoy bounds that recur across `D_1` and `D_2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub s1: f64,
    pub s2: f64,
}

impl CoefficientSet {
    pub fn compute(b: &EnsembleBounds) -> Self {
        let (n1, n2, n3) = (&b.nu1, &b.nu2, &b.nu3);
        CoefficientSet {
            q1: n2.lower(0) * n1.upper(2) - n1.upper(0) * n2.lower(2),
            q2: n3.upper(0) * n2.lower(1) - n2.lower(0) * n3.upper(1),
            q3: n2.lower(0) * n1.upper(1) - n1.upper(0) * n2.lower(1),
            s1: n2.lower(0) * n1.upper(3) - n1.upper(0) * n2.lower(3),
            s2: n3.upper(0) * n2.lower(3) - n2.lower(0) * n3.upper(3),
        }
    }

    /// `q1` with its sign flipped. Produces an unsound estimator; only useful
    /// as a negative control for the soundness oracle.
    pub fn with_q1_negated(self) -> Self {
        CoefficientSet { q1: -self.q1, ..self }
    }
}

/// Lower bounds on the aggregate weights `D_k` (rate form: per train).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DBounds {
    pub d0_lower: f64,
    pub d1_lower: f64,
    pub d2_lower: f64,
}

/// Lower bounds on the signal's `k`-photon gains `Q_{k,mu}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct YieldBounds {
    pub q0_lower: f64,
    pub q1_lower: f64,
    pub q2_lower: f64,
}

impl YieldBounds {
    pub fn as_array(&self) -> [f64; 3] {
        [self.q0_lower, self.q1_lower, self.q2_lower]
    }
}

fn checked_ratio(bound: &'static str, numerator: f64, denominator: f64) -> Result<f64> {
    if !(denominator > 0.0) {
        return Err(Error::DegenerateDenominator { bound, value: denominator });
    }
    Ok((numerator / denominator).max(0.0))
}

/// `D_0^L = max{(p_1^L(nu1) Q_nu2 - p_1^U(nu2) Q_nu1) / (p_1^L(nu1) p_0^U(nu2) - p_1^U(nu2) p_0^L(nu1)), 0}`.
pub fn d0_lower(obs: &ObservedStats, bounds: &EnsembleBounds) -> Result<f64> {
    let (n1, n2) = (&bounds.nu1, &bounds.nu2);
    let g = &obs.gain;
    let numerator = n1.lower(1) * g.nu2 - n2.upper(1) * g.nu1;
    let denominator = n1.lower(1) * n2.upper(0) - n2.upper(1) * n1.lower(0);
    checked_ratio("D0", numerator, denominator)
}

/// Single-photon bound `D_1^L`, consuming the clamped `D_0^L`.
pub fn d1_lower(obs: &ObservedStats, bounds: &EnsembleBounds, coeffs: &CoefficientSet, d0: f64) -> Result<f64> {
    let (mu, n1, n2) = (&bounds.mu, &bounds.nu1, &bounds.nu2);
    let g = &obs.gain;
    let decoy_diff = n2.lower(0) * g.nu1 - n1.upper(0) * g.nu2;
    let numerator = decoy_diff * mu.lower(2) - coeffs.q1 * (g.mu - mu.lower(0) * d0);
    let denominator = coeffs.q3 * mu.lower(2) - coeffs.q1 * mu.lower(1);
    checked_ratio("D1", numerator, denominator)
}

fn q2_cross(bounds: &EnsembleBounds) -> f64 {
    let (n2, n3) = (&bounds.nu2, &bounds.nu3);
    n3.upper(0) * n2.lower(2) - n2.lower(0) * n3.upper(2)
}

/// Two-photon bound `D_2^L`, consuming the clamped `D_0^L` and `D_1^L`.
pub fn d2_lower(
    obs: &ObservedStats,
    bounds: &EnsembleBounds,
    coeffs: &CoefficientSet,
    d0: f64,
    d1: f64,
) -> Result<f64> {
    let (mu, n1, n2, n3) = (&bounds.mu, &bounds.nu1, &bounds.nu2, &bounds.nu3);
    let g = &obs.gain;
    let CoefficientSet { q1, q2, q3, s1, s2 } = *coeffs;
    let s_mix = s1 * q2 - s2 * q3;
    let diff12 = n2.lower(0) * g.nu1 - n1.upper(0) * g.nu2;
    let diff23 = n3.upper(0) * g.nu2 - n2.lower(0) * g.nu3;
    let residual = g.mu - mu.lower(0) * d0 - mu.lower(1) * d1;
    let numerator = (diff12 * q2 - diff23 * q3) * mu.lower(3) - s_mix * residual;
    let denominator = (q1 * q2 - q2_cross(bounds) * q3) * mu.lower(3) - s_mix * mu.lower(2);
    checked_ratio("D2", numerator, denominator)
}

/// Runs the `D_0 -> D_1 -> D_2` chain.
pub fn d_bounds(obs: &ObservedStats, bounds: &EnsembleBounds, coeffs: &CoefficientSet) -> Result<DBounds> {
    let d0 = d0_lower(obs, bounds)?;
    let d1 = d1_lower(obs, bounds, coeffs, d0)?;
    let d2 = d2_lower(obs, bounds, coeffs, d0, d1)?;
    Ok(DBounds { d0_lower: d0, d1_lower: d1, d2_lower: d2 })
}

/// `Q_{k,mu}^L = p_k^L(mu) D_k^L`, clamped to `[0, 1]`.
pub fn yield_bounds(bounds: &EnsembleBounds, d: &DBounds) -> YieldBounds {
    let mu = &bounds.mu;
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    YieldBounds {
        q0_lower: clamp(mu.lower(0) * d.d0_lower),
        q1_lower: clamp(mu.lower(1) * d.d1_lower),
        q2_lower: clamp(mu.lower(2) * d.d2_lower),
    }
}

/// The same bounds evaluated directly in gain form, with the signal's
/// lower-bound photon probabilities folded into each numerator and the
/// previous gain bounds fed forward in place of `p_k^L D_k^L`.
pub fn yield_bounds_closed_form(
    obs: &ObservedStats,
    bounds: &EnsembleBounds,
    coeffs: &CoefficientSet,
) -> Result<YieldBounds> {
    let (mu, n1, n2, n3) = (&bounds.mu, &bounds.nu1, &bounds.nu2, &bounds.nu3);
    let g = &obs.gain;
    let CoefficientSet { q1, q2, q3, s1, s2 } = *coeffs;

    let den0 = n1.lower(1) * n2.upper(0) - n2.upper(1) * n1.lower(0);
    let q0 = checked_ratio("Q0", mu.lower(0) * (n1.lower(1) * g.nu2 - n2.upper(1) * g.nu1), den0)?;

    let diff12 = n2.lower(0) * g.nu1 - n1.upper(0) * g.nu2;
    let den1 = q3 * mu.lower(2) - q1 * mu.lower(1);
    let q1_bound = checked_ratio("Q1", mu.lower(1) * (diff12 * mu.lower(2) - q1 * (g.mu - q0)), den1)?;

    let diff23 = n3.upper(0) * g.nu2 - n2.lower(0) * g.nu3;
    let s_mix = s1 * q2 - s2 * q3;
    let den2 = (q1 * q2 - q2_cross(bounds) * q3) * mu.lower(3) - s_mix * mu.lower(2);
    let num2 = (diff12 * q2 - diff23 * q3) * mu.lower(3) - s_mix * (g.mu - q0 - q1_bound);
    let q2_bound = checked_ratio("Q2", mu.lower(2) * num2, den2)?;

    Ok(YieldBounds {
        q0_lower: q0.min(1.0),
        q1_lower: q1_bound.min(1.0),
        q2_lower: q2_bound.min(1.0),
    })
}

/// Full estimator output for one set of observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub coeffs: CoefficientSet,
    pub d: DBounds,
    pub yields: YieldBounds,
}

/// Coefficients, `D_k` chain and gain bounds in one call.
pub fn estimate(obs: &ObservedStats, bounds: &EnsembleBounds) -> Result<Estimate> {
    estimate_with(obs, bounds, CoefficientSet::compute(bounds))
}

/// As [`estimate`] but with caller-supplied coefficients.
pub fn estimate_with(obs: &ObservedStats, bounds: &EnsembleBounds, coeffs: CoefficientSet) -> Result<Estimate> {
    let d = d_bounds(obs, bounds, &coeffs)?;
    Ok(Estimate { coeffs, d, yields: yield_bounds(bounds, &d) })
}
