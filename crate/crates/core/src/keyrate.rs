//! Secure key rate per pulse from the signal gain bounds.

use std::fmt;
use std::str::FromStr;

use crate::channel::{ChannelParams, ObservedStats};
use crate::error::{Error, Result};
use crate::estimator::{estimate, Estimate, YieldBounds};
use crate::math::h2;
use crate::source::{validate_decoy_conditions, EnsembleBounds, SourceEnsemble, ValidationReport, MIN_K_MAX};

/// Where the `1/L` factor applies in the rate formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateScope {
    /// `R = (1/L) [sum_k Q_k^L (1 - H2(e_ph^k)) - Q_mu f H2(E_mu)]`.
    #[default]
    WholeBracket,
    /// `R = (1/L) sum_k Q_k^L (1 - H2(e_ph^k)) - Q_mu f H2(E_mu)`.
    PrivacyOnly,
}

impl FromStr for RateScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq1" => Ok(RateScope::WholeBracket),
            "eq2" => Ok(RateScope::PrivacyOnly),
            other => Err(Error::Domain(format!("unknown rate scope '{other}' (expected eq1 or eq2)"))),
        }
    }
}

impl fmt::Display for RateScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateScope::WholeBracket => "eq1",
            RateScope::PrivacyOnly => "eq2",
        })
    }
}

/// Phase error rate bound of a `k`-photon train, `min(k / (L - 1), 1/2)`.
pub fn phase_error_bound(k: u32, train_len: u32) -> Result<f64> {
    if train_len < 2 {
        return Err(Error::Domain(format!("train length {train_len} must be >= 2")));
    }
    if k > 2 {
        return Err(Error::Domain(format!("phase error bound defined for k <= 2, got {k}")));
    }
    Ok((k as f64 / (train_len - 1) as f64).min(0.5))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateResult {
    /// `max(raw_rate, 0)`.
    pub rate: f64,
    /// Rate before clamping; negative when error correction costs more
    /// than privacy amplification leaves.
    pub raw_rate: f64,
    pub q_bounds: YieldBounds,
    pub phase_errors: [f64; 3],
    /// `Q_mu f H2(E_mu)`, before any `1/L` scaling.
    pub ec_cost: f64,
    pub feasible: bool,
    pub diagnostics: Option<ValidationReport>,
}

/// Combines gain bounds with the observed signal QBER.
pub fn secure_key_rate(
    q_bounds: &YieldBounds,
    obs: &ObservedStats,
    params: &ChannelParams,
    scope: RateScope,
) -> Result<KeyRateResult> {
    if !(obs.gain.mu > 0.0) {
        return Err(Error::UndefinedQber);
    }
    let l = params.train_len;
    let phase_errors = [phase_error_bound(0, l)?, phase_error_bound(1, l)?, phase_error_bound(2, l)?];
    let privacy: f64 = q_bounds
        .as_array()
        .iter()
        .zip(phase_errors)
        .map(|(q, e)| q * (1.0 - h2(e)))
        .sum();
    let ec_cost = obs.gain.mu * params.corr_eff * h2(obs.qber.mu);
    let inv_l = 1.0 / l as f64;
    let raw_rate = match scope {
        RateScope::WholeBracket => inv_l * (privacy - ec_cost),
        RateScope::PrivacyOnly => inv_l * privacy - ec_cost,
    };
    Ok(KeyRateResult {
        rate: raw_rate.max(0.0),
        raw_rate,
        q_bounds: *q_bounds,
        phase_errors,
        ec_cost,
        feasible: raw_rate > 0.0,
        diagnostics: None,
    })
}

/// Everything computed for one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub observed: ObservedStats,
    pub estimate: Estimate,
    pub key_rate: KeyRateResult,
}

/// Simulated observations, photon bounds, estimator and key rate for an
/// ensemble on a channel. Fails if the ensemble does not satisfy the decoy
/// conditions or the estimator hits a degenerate denominator.
pub fn evaluate(ensemble: &SourceEnsemble, params: &ChannelParams, scope: RateScope) -> Result<Evaluation> {
    params.validate()?;
    ensemble.check_worst_case_ordering()?;
    let k_max = ensemble.default_k_max();
    let bounds = EnsembleBounds::compute(ensemble, k_max)?;
    let report = validate_decoy_conditions(ensemble, &bounds, k_max);
    if let Some(v) = &report.violation {
        return Err(Error::InvalidEnsemble(v.to_string()));
    }
    let observed = ObservedStats::simulate(ensemble, params)?;
    let estimate = estimate(&observed, &bounds)?;
    let mut key_rate = secure_key_rate(&estimate.yields, &observed, params, scope)?;
    key_rate.diagnostics = Some(report);
    Ok(Evaluation { observed, estimate, key_rate })
}

/// Rate-only fast path for the optimizer: the estimator needs photon bounds
/// up to `k = 3` only, and condition validation is done by the caller.
pub(crate) fn raw_rate_unvalidated(ensemble: &SourceEnsemble, params: &ChannelParams, scope: RateScope) -> Result<f64> {
    let bounds = EnsembleBounds::compute(ensemble, MIN_K_MAX)?;
    let observed = ObservedStats::simulate(ensemble, params)?;
    let est = estimate(&observed, &bounds)?;
    Ok(secure_key_rate(&est.yields, &observed, params, scope)?.raw_rate)
}
