//! Four-intensity source ensemble with bounded per-train intensity errors.
//!
//! Each source `x` emits pulse-trains whose realized intensity lies in
//! `[x(1 - delta), x(1 + delta)]`. The photon-number probabilities of any
//! train are then bracketed by [`PhotonBounds`], which is all the decoy
//! estimator needs to know about the error pattern.

use std::fmt;

use crate::error::{Error, Result};
use crate::math::{pmf, poisson_cutoff, DEFAULT_TAIL_EPSILON};

/// Smallest photon number the estimator consumes (`k = 0..=3`).
pub const MIN_K_MAX: u32 = 3;

/// One of the four sources, in signal-then-decoy order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Signal,
    Decoy1,
    Decoy2,
    Decoy3,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Signal, Source::Decoy1, Source::Decoy2, Source::Decoy3];

    pub fn symbol(self) -> &'static str {
        match self {
            Source::Signal => "mu",
            Source::Decoy1 => "nu1",
            Source::Decoy2 => "nu2",
            Source::Decoy3 => "nu3",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A value attached to each of the four sources.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerSource<T> {
    pub mu: T,
    pub nu1: T,
    pub nu2: T,
    pub nu3: T,
}

impl<T> PerSource<T> {
    pub fn new(mu: T, nu1: T, nu2: T, nu3: T) -> Self {
        PerSource { mu, nu1, nu2, nu3 }
    }

    pub fn from_fn(mut f: impl FnMut(Source) -> T) -> Self {
        PerSource {
            mu: f(Source::Signal),
            nu1: f(Source::Decoy1),
            nu2: f(Source::Decoy2),
            nu3: f(Source::Decoy3),
        }
    }

    pub fn get(&self, source: Source) -> &T {
        match source {
            Source::Signal => &self.mu,
            Source::Decoy1 => &self.nu1,
            Source::Decoy2 => &self.nu2,
            Source::Decoy3 => &self.nu3,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PerSource<U> {
        PerSource {
            mu: f(&self.mu),
            nu1: f(&self.nu1),
            nu2: f(&self.nu2),
            nu3: f(&self.nu3),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Source, &T)> {
        Source::ALL.into_iter().map(move |s| (s, self.get(s)))
    }
}

/// A single weak coherent source with relative intensity error radius `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    /// Mean photon number per pulse-train.
    pub intensity: f64,
    /// Maximum relative deviation of the per-train intensity.
    pub delta: f64,
    /// Probability that a train is prepared in this source.
    pub select_prob: f64,
}

impl SourceSpec {
    pub fn new(intensity: f64, delta: f64, select_prob: f64) -> Result<Self> {
        let spec = SourceSpec { intensity, delta, select_prob };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) {
            return Err(Error::Domain(format!("intensity {} must be >= 0", self.intensity)));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::Domain(format!("delta {} outside [0, 1)", self.delta)));
        }
        if !(self.select_prob > 0.0 && self.select_prob < 1.0) {
            return Err(Error::Domain(format!(
                "selection probability {} outside (0, 1)",
                self.select_prob
            )));
        }
        Ok(())
    }

    /// Smallest admissible realized intensity.
    pub fn low(&self) -> f64 {
        self.intensity * (1.0 - self.delta)
    }

    /// Largest admissible realized intensity.
    pub fn high(&self) -> f64 {
        self.intensity * (1.0 + self.delta)
    }
}

/// Signal `mu` and decoys `nu1 >= nu2 >= nu3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceEnsemble {
    pub signal: SourceSpec,
    pub decoy1: SourceSpec,
    pub decoy2: SourceSpec,
    pub decoy3: SourceSpec,
}

impl SourceEnsemble {
    /// Builds an ensemble sharing one `delta` and equal selection probabilities.
    pub fn uniform(intensities: [f64; 4], delta: f64) -> Result<Self> {
        Self::with_probs(intensities, [delta; 4], [0.25; 4])
    }

    pub fn with_probs(intensities: [f64; 4], deltas: [f64; 4], probs: [f64; 4]) -> Result<Self> {
        let spec = |i: usize| SourceSpec::new(intensities[i], deltas[i], probs[i]);
        let ensemble = SourceEnsemble {
            signal: spec(0)?,
            decoy1: spec(1)?,
            decoy2: spec(2)?,
            decoy3: spec(3)?,
        };
        ensemble.check_probabilities()?;
        Ok(ensemble)
    }

    pub fn spec(&self, source: Source) -> &SourceSpec {
        match source {
            Source::Signal => &self.signal,
            Source::Decoy1 => &self.decoy1,
            Source::Decoy2 => &self.decoy2,
            Source::Decoy3 => &self.decoy3,
        }
    }

    pub fn intensities(&self) -> [f64; 4] {
        [
            self.signal.intensity,
            self.decoy1.intensity,
            self.decoy2.intensity,
            self.decoy3.intensity,
        ]
    }

    pub fn max_high(&self) -> f64 {
        Source::ALL.iter().map(|&s| self.spec(s).high()).fold(0.0, f64::max)
    }

    fn check_probabilities(&self) -> Result<()> {
        let total: f64 = Source::ALL.iter().map(|&s| self.spec(s).select_prob).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidEnsemble(format!(
                "selection probabilities sum to {total}, expected 1"
            )));
        }
        Ok(())
    }

    /// Worst-case ordering over interval endpoints. Guarantees
    /// `nu1_i >= nu2_i >= nu3_i >= 0` and `nu1_i + nu2_i + nu3_i < mu_i < 1`
    /// for every admissible error pattern.
    pub fn check_worst_case_ordering(&self) -> Result<()> {
        for s in Source::ALL {
            self.spec(s).validate()?;
        }
        self.check_probabilities()?;
        let (mu, n1, n2, n3) = (&self.signal, &self.decoy1, &self.decoy2, &self.decoy3);
        if !(mu.high() < 1.0) {
            return Err(Error::InvalidEnsemble(format!(
                "mu(1+delta) = {} must be < 1",
                mu.high()
            )));
        }
        if !(n1.low() >= n2.high()) {
            return Err(Error::InvalidEnsemble(format!(
                "nu1(1-delta) = {} must be >= nu2(1+delta) = {}",
                n1.low(),
                n2.high()
            )));
        }
        if !(n2.low() >= n3.high()) {
            return Err(Error::InvalidEnsemble(format!(
                "nu2(1-delta) = {} must be >= nu3(1+delta) = {}",
                n2.low(),
                n3.high()
            )));
        }
        let decoy_sum = n1.high() + n2.high() + n3.high();
        if !(decoy_sum < mu.low()) {
            return Err(Error::InvalidEnsemble(format!(
                "sum of decoy upper intensities {} must be < mu(1-delta) = {}",
                decoy_sum,
                mu.low()
            )));
        }
        Ok(())
    }

    /// Truncation point used for condition validation: the Poisson cutoff of
    /// the largest realized intensity.
    pub fn default_k_max(&self) -> u32 {
        poisson_cutoff(self.max_high(), DEFAULT_TAIL_EPSILON)
            .unwrap_or(MIN_K_MAX)
            .max(MIN_K_MAX)
    }
}

/// Interval `[lower, upper]` bracketing `p_k` of any admissible train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonInterval {
    pub lower: f64,
    pub upper: f64,
}

/// Photon-number probability intervals of one source for `k = 0..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonBounds {
    intervals: Vec<PhotonInterval>,
}

impl PhotonBounds {
    pub fn k_max(&self) -> u32 {
        (self.intervals.len() - 1) as u32
    }

    pub fn interval(&self, k: u32) -> PhotonInterval {
        self.intervals[k as usize]
    }

    #[inline]
    pub fn lower(&self, k: u32) -> f64 {
        self.intervals[k as usize].lower
    }

    #[inline]
    pub fn upper(&self, k: u32) -> f64 {
        self.intervals[k as usize].upper
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, PhotonInterval)> + '_ {
        self.intervals.iter().enumerate().map(|(k, &iv)| (k as u32, iv))
    }

    /// Bounds from explicit intervals; used by callers that bring their own
    /// source statistics.
    pub fn from_intervals(intervals: Vec<PhotonInterval>) -> Result<Self> {
        if intervals.len() < (MIN_K_MAX + 1) as usize {
            return Err(Error::Domain(format!(
                "need photon bounds up to k = {MIN_K_MAX}, got {}",
                intervals.len()
            )));
        }
        for (k, iv) in intervals.iter().enumerate() {
            if !(0.0 <= iv.lower && iv.lower <= iv.upper && iv.upper <= 1.0) {
                return Err(Error::Domain(format!(
                    "photon interval k = {k} [{}, {}] is not a sub-interval of [0, 1]",
                    iv.lower, iv.upper
                )));
            }
        }
        Ok(PhotonBounds { intervals })
    }
}

/// Poisson photon-number bounds for a source whose intensity varies within
/// `[x(1 - delta), x(1 + delta)]`.
///
/// `pmf(k, .)` is unimodal with its peak at intensity `k`, so the minimum over
/// the interval sits at an endpoint and the maximum is either an endpoint or
/// `pmf(k, k)` when `k` lies inside the interval.
pub fn photon_bounds(spec: &SourceSpec, k_max: u32) -> Result<PhotonBounds> {
    spec.validate()?;
    if k_max < MIN_K_MAX {
        return Err(Error::Domain(format!("k_max {k_max} must be >= {MIN_K_MAX}")));
    }
    let (lo, hi) = (spec.low(), spec.high());
    let intervals = (0..=k_max)
        .map(|k| {
            let (a, b) = (pmf(k, lo), pmf(k, hi));
            let mut upper = a.max(b);
            let peak = k as f64;
            if k > 0 && lo <= peak && peak <= hi {
                upper = upper.max(pmf(k, peak));
            }
            PhotonInterval { lower: a.min(b), upper }
        })
        .collect();
    Ok(PhotonBounds { intervals })
}

/// Photon bounds for all four sources, evaluated to a common `k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleBounds {
    pub mu: PhotonBounds,
    pub nu1: PhotonBounds,
    pub nu2: PhotonBounds,
    pub nu3: PhotonBounds,
}

impl EnsembleBounds {
    pub fn compute(ensemble: &SourceEnsemble, k_max: u32) -> Result<Self> {
        Ok(EnsembleBounds {
            mu: photon_bounds(&ensemble.signal, k_max)?,
            nu1: photon_bounds(&ensemble.decoy1, k_max)?,
            nu2: photon_bounds(&ensemble.decoy2, k_max)?,
            nu3: photon_bounds(&ensemble.decoy3, k_max)?,
        })
    }

    pub fn get(&self, source: Source) -> &PhotonBounds {
        match source {
            Source::Signal => &self.mu,
            Source::Decoy1 => &self.nu1,
            Source::Decoy2 => &self.nu2,
            Source::Decoy3 => &self.nu3,
        }
    }

    pub fn k_max(&self) -> u32 {
        Source::ALL.iter().map(|&s| self.get(s).k_max()).min().unwrap_or(0)
    }
}

/// Which decoy-condition check failed first.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// The ensemble breaks the worst-case ordering constraints.
    Ordering(String),
    /// A ratio chain `p_k^L(hi)/p_k^U(lo) >= ...` is broken.
    Chain {
        pair: (Source, Source),
        /// Photon number on the left of the broken inequality (`k >= 2` for
        /// the tail link, or 2 / 1 for the fixed links).
        left_k: u32,
        right_k: u32,
        left: f64,
        right: f64,
    },
    /// An upper bound in a ratio denominator is zero.
    ZeroUpper { source: Source, k: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Ordering(msg) => write!(f, "ordering: {msg}"),
            Violation::Chain { pair, left_k, right_k, left, right } => write!(
                f,
                "chain ({}, {}): ratio at k={left_k} ({left:e}) < ratio at k={right_k} ({right:e})",
                pair.0, pair.1
            ),
            Violation::ZeroUpper { source, k } => {
                write!(f, "zero upper bound p_{k},{source}^U in ratio denominator")
            }
        }
    }
}

/// Outcome of [`validate_decoy_conditions`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub k_max: u32,
    /// Number of individual inequalities evaluated.
    pub checked: usize,
    pub violation: Option<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.violation {
            None => write!(f, "pass ({} inequalities, k_max = {})", self.checked, self.k_max),
            Some(v) => write!(f, "fail: {v}"),
        }
    }
}

/// Checks the decoy ratio chains for the pairs (mu, nu1), (nu1, nu2), (nu2, nu3):
///
/// `p_k^L(a)/p_k^U(b) >= p_2^L(a)/p_2^U(b) >= p_1^L(a)/p_1^U(b) >= p_0^L(a)/p_0^U(b)`
/// for every `2 <= k <= k_max`.
///
/// The worst-case ordering of the ensemble is checked first.
pub fn validate_decoy_conditions(
    ensemble: &SourceEnsemble,
    bounds: &EnsembleBounds,
    k_max: u32,
) -> ValidationReport {
    let mut report = ValidationReport { k_max, checked: 0, violation: None };
    if let Err(e) = ensemble.check_worst_case_ordering() {
        report.violation = Some(Violation::Ordering(e.to_string()));
        return report;
    }
    let k_max = k_max.min(bounds.k_max());
    report.k_max = k_max;
    if k_max < 2 {
        report.violation = Some(Violation::Ordering(format!("k_max {k_max} too small")));
        return report;
    }
    let pairs = [
        (Source::Signal, Source::Decoy1),
        (Source::Decoy1, Source::Decoy2),
        (Source::Decoy2, Source::Decoy3),
    ];
    for (a, b) in pairs {
        let (ba, bb) = (bounds.get(a), bounds.get(b));
        let mut ratios = Vec::with_capacity(k_max as usize + 1);
        for k in 0..=k_max {
            let denom = bb.upper(k);
            if denom <= 0.0 {
                // Beyond the numerical support of both sources the chain is
                // vacuous; a zero upper bound at k <= 2 is a real violation.
                if k <= 2 || ba.lower(k) > 0.0 {
                    report.violation = Some(Violation::ZeroUpper { source: b, k });
                    return report;
                }
                ratios.push(None);
            } else {
                ratios.push(Some(ba.lower(k) / denom));
            }
        }
        let r = |k: u32| ratios[k as usize].unwrap_or(f64::INFINITY);
        let fail = |left_k: u32, right_k: u32, report: &mut ValidationReport| {
            report.checked += 1;
            let (left, right) = (r(left_k), r(right_k));
            if left < right {
                report.violation = Some(Violation::Chain { pair: (a, b), left_k, right_k, left, right });
                true
            } else {
                false
            }
        };
        if fail(1, 0, &mut report) || fail(2, 1, &mut report) {
            return report;
        }
        for k in 3..=k_max {
            if ratios[k as usize].is_none() {
                continue;
            }
            if fail(k, 2, &mut report) {
                return report;
            }
        }
    }
    report
}
