//! Expectation-level ground truth under explicit intensity error patterns.
//!
//! A pattern assigns each train index `i` a multiplier `m_i` so that the
//! realized intensity of source `x` is `x * m_i`. Taking expectations of the
//! count identities gives, in rate form,
//!
//! * `Q_x = mean_i sum_k pmf(k, x m_i) Y_k`
//! * `Q_{k,mu} = Y_k * mean_i pmf(k, mu m_i)`
//!
//! and the aggregate `D_k / M = Y_k` exactly. The estimator, fed the exact
//! `Q_x`, must never exceed these.

use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{yield_k, ChannelParams, ChannelTemplate, ObservedStats};
use crate::error::{Error, Result};
use crate::estimator::{estimate_with, CoefficientSet, YieldBounds};
use crate::math::{pmf, poisson_cutoff, DEFAULT_TAIL_EPSILON};
use crate::source::{EnsembleBounds, PerSource, Source, SourceEnsemble, MIN_K_MAX};

/// Slack allowed on `Q_k^L <= Q_k^true` for floating-point rounding.
pub const SOUNDNESS_TOLERANCE: f64 = 1e-12;

/// Default period of generated patterns.
pub const DEFAULT_PERIOD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    ConstantLow,
    ConstantHigh,
    Constant,
    Alternating,
    Sinusoidal,
    SeededRandom,
}

impl PatternKind {
    pub fn tag(self) -> &'static str {
        match self {
            PatternKind::ConstantLow => "constant-low",
            PatternKind::ConstantHigh => "constant-high",
            PatternKind::Constant => "constant",
            PatternKind::Alternating => "alternating",
            PatternKind::Sinusoidal => "sinusoidal",
            PatternKind::SeededRandom => "seeded-random",
        }
    }
}

/// Per-train intensity multipliers, repeated with period `multipliers.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorPattern {
    pub multipliers: Vec<f64>,
    pub kind: PatternKind,
}

impl ErrorPattern {
    pub fn new(multipliers: Vec<f64>, kind: PatternKind) -> Result<Self> {
        if multipliers.is_empty() {
            return Err(Error::InadmissiblePattern("pattern needs at least one multiplier".into()));
        }
        if multipliers.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InadmissiblePattern("multipliers must be finite and >= 0".into()));
        }
        Ok(ErrorPattern { multipliers, kind })
    }

    pub fn constant(multiplier: f64) -> Self {
        ErrorPattern { multipliers: vec![multiplier], kind: PatternKind::Constant }
    }

    pub fn constant_low(delta: f64) -> Self {
        ErrorPattern { multipliers: vec![1.0 - delta], kind: PatternKind::ConstantLow }
    }

    pub fn constant_high(delta: f64) -> Self {
        ErrorPattern { multipliers: vec![1.0 + delta], kind: PatternKind::ConstantHigh }
    }

    pub fn alternating(delta: f64) -> Self {
        ErrorPattern { multipliers: vec![1.0 - delta, 1.0 + delta], kind: PatternKind::Alternating }
    }

    pub fn sinusoidal(delta: f64, period: usize) -> Self {
        let period = period.max(1);
        let multipliers = (0..period)
            .map(|i| {
                let phase = 2.0 * std::f64::consts::PI * i as f64 / period as f64;
                (1.0 + delta * phase.sin()).clamp(1.0 - delta, 1.0 + delta)
            })
            .collect();
        ErrorPattern { multipliers, kind: PatternKind::Sinusoidal }
    }

    pub fn seeded_random(delta: f64, period: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let multipliers = (0..period.max(1))
            .map(|_| if delta > 0.0 { rng.gen_range(1.0 - delta..=1.0 + delta) } else { 1.0 })
            .collect();
        ErrorPattern { multipliers, kind: PatternKind::SeededRandom }
    }

    pub fn len(&self) -> usize {
        self.multipliers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multipliers.is_empty()
    }

    /// Whether every multiplier lies in `[1 - delta, 1 + delta]`.
    pub fn within(&self, delta: f64) -> bool {
        self.multipliers.iter().all(|&m| m >= 1.0 - delta && m <= 1.0 + delta)
    }
}

/// One pattern per source. Sources may fluctuate independently.
pub type SourcePatterns = PerSource<ErrorPattern>;

impl SourcePatterns {
    pub fn shared(pattern: ErrorPattern) -> Self {
        PerSource::new(pattern.clone(), pattern.clone(), pattern.clone(), pattern)
    }
}

/// Expected counts of a pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTally {
    /// `Q_x^true` per source.
    pub gain: PerSource<f64>,
    /// `Q_{k,mu}^true` for `k = 0..=cutoff`.
    pub signal_yields: Vec<f64>,
    /// `Y_k` for `k = 0..=cutoff`; equals `D_k / M`.
    pub yields: Vec<f64>,
    pub cutoff: u32,
    /// Realized intensities per source and train index over one period of
    /// the longest pattern.
    realized: PerSource<Vec<f64>>,
}

impl OracleTally {
    /// `d_ki = 1 / sum_x P_x p_{ki,x}` at train index `i` (mod the period).
    pub fn d_ki(&self, ensemble: &SourceEnsemble, k: u32, i: usize) -> f64 {
        let mix: f64 = Source::ALL
            .iter()
            .map(|&s| {
                let xs = self.realized.get(s);
                ensemble.spec(s).select_prob * pmf(k, xs[i % xs.len()])
            })
            .sum();
        1.0 / mix
    }

    /// Expected `N_x` over `trains` trains.
    pub fn count(&self, ensemble: &SourceEnsemble, source: Source, trains: f64) -> f64 {
        ensemble.spec(source).select_prob * trains * self.gain.get(source)
    }

    /// Expected `n_{k,mu}` over `trains` trains.
    pub fn signal_count(&self, ensemble: &SourceEnsemble, k: u32, trains: f64) -> f64 {
        ensemble.signal.select_prob * trains * self.signal_yields[k as usize]
    }

    /// Observations a perfect experiment would report.
    pub fn observed(&self) -> ObservedStats {
        ObservedStats::from_gains(self.gain, 0.0)
    }

    pub fn true_signal_bounds(&self) -> [f64; 3] {
        [self.signal_yields[0], self.signal_yields[1], self.signal_yields[2]]
    }
}

/// Default truncation: the Poisson cutoff of the largest realized intensity.
pub fn default_cutoff(ensemble: &SourceEnsemble) -> u32 {
    poisson_cutoff(ensemble.max_high(), DEFAULT_TAIL_EPSILON)
        .unwrap_or(MIN_K_MAX)
        .max(MIN_K_MAX)
}

const MAX_JOINT_PERIOD: usize = 1 << 20;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn realized_intensities(patterns: &SourcePatterns, ensemble: &SourceEnsemble) -> Result<PerSource<Vec<f64>>> {
    // The joint sequence repeats with the lcm of the individual periods.
    let mut period = 1usize;
    for s in Source::ALL {
        let n = patterns.get(s).len();
        period = period / gcd(period, n) * n;
        if period > MAX_JOINT_PERIOD {
            return Err(Error::InadmissiblePattern(format!("joint pattern period exceeds {MAX_JOINT_PERIOD}")));
        }
    }
    let realized = PerSource::from_fn(|s| {
        let p = patterns.get(s);
        let x = ensemble.spec(s).intensity;
        (0..period).map(|i| x * p.multipliers[i % p.len()]).collect::<Vec<f64>>()
    });
    for (s, pattern) in patterns.iter() {
        let delta = ensemble.spec(s).delta;
        if !pattern.within(delta + 1e-15) {
            return Err(Error::InadmissiblePattern(format!("{s} multipliers leave [1 - {delta}, 1 + {delta}]")));
        }
    }
    for i in 0..period {
        let (mu, n1, n2, n3) = (realized.mu[i], realized.nu1[i], realized.nu2[i], realized.nu3[i]);
        if !(n1 >= n2 && n2 >= n3 && n3 >= 0.0 && n1 + n2 + n3 < mu && mu < 1.0) {
            return Err(Error::InadmissiblePattern(format!(
                "train {i}: realized intensities ({mu}, {n1}, {n2}, {n3}) break the ordering"
            )));
        }
    }
    Ok(realized)
}

/// Exact expected gains and signal photon-number yields under `patterns`.
pub fn expected_tally(
    patterns: &SourcePatterns,
    ensemble: &SourceEnsemble,
    params: &ChannelParams,
    cutoff: u32,
) -> Result<OracleTally> {
    params.validate()?;
    let cutoff = cutoff.max(MIN_K_MAX);
    let realized = realized_intensities(patterns, ensemble)?;
    let yields: Vec<f64> = (0..=cutoff).map(|k| yield_k(k, params)).collect();
    let mean_pmf = |xs: &[f64], k: u32| xs.iter().map(|&x| pmf(k, x)).sum::<f64>() / xs.len() as f64;
    let gain = realized.map(|xs| (0..=cutoff).map(|k| mean_pmf(xs, k) * yields[k as usize]).sum());
    let signal_yields = (0..=cutoff).map(|k| yields[k as usize] * mean_pmf(&realized.mu, k)).collect();
    Ok(OracleTally { gain, signal_yields, yields, cutoff, realized })
}

/// Deliberate estimator corruptions for negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Flip the sign of the `q1` coefficient.
    NegateQ1,
}

/// Outcome of [`verify_bounds`] for one pattern set.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    /// `Q_k^true - Q_k^L` for `k = 0, 1, 2`.
    pub margins: [f64; 3],
    pub estimated: YieldBounds,
    pub truth: [f64; 3],
    /// Smallest slack of `p^L <= pmf(k, x m_i) <= p^U` over all sources,
    /// trains and `k <= 3`.
    pub containment_margin: f64,
    /// Estimator failure, if any.
    pub failure: Option<Error>,
}

impl VerificationReport {
    pub fn worst_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn passed(&self) -> bool {
        self.failure.is_none()
            && self.worst_margin() >= -SOUNDNESS_TOLERANCE
            && self.containment_margin >= -SOUNDNESS_TOLERANCE
    }
}

/// Runs the estimator on exact expected gains and compares with the truth.
pub fn verify_bounds(
    patterns: &SourcePatterns,
    ensemble: &SourceEnsemble,
    params: &ChannelParams,
    cutoff: u32,
    mutation: Mutation,
) -> Result<VerificationReport> {
    let tally = expected_tally(patterns, ensemble, params, cutoff)?;
    let bounds = EnsembleBounds::compute(ensemble, MIN_K_MAX)?;

    let mut containment_margin = f64::INFINITY;
    for (s, xs) in tally.realized.iter() {
        let b = bounds.get(s);
        for &x in xs {
            for k in 0..=MIN_K_MAX {
                let p = pmf(k, x);
                containment_margin = containment_margin.min(p - b.lower(k)).min(b.upper(k) - p);
            }
        }
    }

    let mut coeffs = CoefficientSet::compute(&bounds);
    if mutation == Mutation::NegateQ1 {
        coeffs = coeffs.with_q1_negated();
    }
    let truth = tally.true_signal_bounds();
    let (estimated, failure) = match estimate_with(&tally.observed(), &bounds, coeffs) {
        Ok(est) => (est.yields, None),
        Err(e) => (YieldBounds::default(), Some(e)),
    };
    let est = estimated.as_array();
    let margins = [truth[0] - est[0], truth[1] - est[1], truth[2] - est[2]];
    Ok(VerificationReport { margins, estimated, truth, containment_margin, failure })
}

/// Randomized soundness suite configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub intensities: [f64; 4],
    pub select_probs: [f64; 4],
    pub deltas: Vec<f64>,
    pub distances: Vec<f64>,
    pub train_len: u32,
    /// Seeded-random pattern sets per `(delta, z)`.
    pub random_patterns: usize,
    pub period: usize,
    pub root_seed: u64,
    pub mutation: Mutation,
    pub channel: ChannelTemplate,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            intensities: [0.5, 0.1, 0.05, 0.01],
            select_probs: [0.25; 4],
            deltas: vec![0.05],
            distances: vec![0.0, 15.0, 30.0, 60.0],
            train_len: 16,
            random_patterns: 100,
            period: DEFAULT_PERIOD,
            root_seed: 20190101,
            mutation: Mutation::None,
            channel: ChannelTemplate::STANDARD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub delta: f64,
    pub distance: f64,
    /// Pattern tags of (mu, nu1, nu2, nu3).
    pub label: String,
    pub seed: Option<u64>,
    pub report: VerificationReport,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuiteReport {
    pub cases: Vec<CaseResult>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.report.passed())
    }

    pub fn failures(&self) -> usize {
        self.cases.iter().filter(|c| !c.report.passed()).count()
    }

    pub fn worst_margin(&self) -> f64 {
        self.cases.iter().map(|c| c.report.worst_margin()).fold(f64::INFINITY, f64::min)
    }

    pub fn worst_containment(&self) -> f64 {
        self.cases.iter().map(|c| c.report.containment_margin).fold(f64::INFINITY, f64::min)
    }
}

/// Seed of the `index`-th random case under `root` (SplitMix64 step).
pub fn case_seed(root: u64, index: u64) -> u64 {
    let mut z = root.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn deterministic_pattern_sets(delta: f64, period: usize) -> Vec<(String, SourcePatterns)> {
    let mut sets = Vec::new();
    // Every low/high corner assignment across the four sources.
    for mask in 0u32..16 {
        let pick = |bit: u32| {
            if mask & (1 << bit) != 0 {
                ErrorPattern::constant_high(delta)
            } else {
                ErrorPattern::constant_low(delta)
            }
        };
        let set = PerSource::new(pick(0), pick(1), pick(2), pick(3));
        sets.push((label(&set), set));
    }
    for p in [ErrorPattern::alternating(delta), ErrorPattern::sinusoidal(delta, period)] {
        let set = SourcePatterns::shared(p);
        sets.push((label(&set), set));
    }
    sets
}

fn label(set: &SourcePatterns) -> String {
    let tags: Vec<&str> = Source::ALL.iter().map(|&s| set.get(s).kind.tag()).collect();
    tags.join("/")
}

/// Runs deterministic corner patterns and `random_patterns` seeded-random
/// pattern sets for every `(delta, z)` in the configuration.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    let mut cases = Vec::new();
    let mut random_index = 0u64;
    for &delta in &config.deltas {
        let ensemble = SourceEnsemble::with_probs(config.intensities, [delta; 4], config.select_probs)?;
        ensemble.check_worst_case_ordering()?;
        let cutoff = default_cutoff(&ensemble);
        for &z in &config.distances {
            let params = config.channel.params(config.train_len, z)?;
            let mut push = |label: String, seed: Option<u64>, set: &SourcePatterns| -> Result<()> {
                let report = verify_bounds(set, &ensemble, &params, cutoff, config.mutation)?;
                cases.push(CaseResult { delta, distance: z, label, seed, report });
                Ok(())
            };
            for (label, set) in deterministic_pattern_sets(delta, config.period) {
                push(label, None, &set)?;
            }
            for _ in 0..config.random_patterns {
                let seed = case_seed(config.root_seed, random_index);
                random_index += 1;
                let set = PerSource::new(
                    ErrorPattern::seeded_random(delta, config.period, case_seed(seed, 0)),
                    ErrorPattern::seeded_random(delta, config.period, case_seed(seed, 1)),
                    ErrorPattern::seeded_random(delta, config.period, case_seed(seed, 2)),
                    ErrorPattern::seeded_random(delta, config.period, case_seed(seed, 3)),
                );
                push(label(&set), Some(seed), &set)?;
            }
        }
    }
    Ok(SuiteReport { cases })
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.cases.iter().enumerate() {
            let r = &c.report;
            let mut line = format!(
                "case {:05} delta={} z={} patterns={}",
                i + 1,
                crate::csv::format_sig(c.delta),
                crate::csv::format_sig(c.distance),
                c.label
            );
            if let Some(seed) = c.seed {
                let _ = write!(line, " seed={seed:#018x}");
            }
            let _ = write!(
                line,
                " margins={:.6e},{:.6e},{:.6e} containment={:.6e}",
                r.margins[0], r.margins[1], r.margins[2], r.containment_margin
            );
            if let Some(e) = &r.failure {
                let _ = write!(line, " error=\"{e}\"");
            }
            writeln!(f, "{line} {}", if r.passed() { "PASS" } else { "FAIL" })?;
        }
        writeln!(
            f,
            "summary cases={} failures={} worst_margin={:.6e} worst_containment={:.6e} result={}",
            self.cases.len(),
            self.failures(),
            self.worst_margin(),
            self.worst_containment(),
            if self.all_passed() { "PASS" } else { "FAIL" }
        )
    }
}
