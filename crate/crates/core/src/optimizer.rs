//! Intensity optimization and parameter sweeps.
//!
//! The search runs coordinate descent over log-intensities: each coordinate
//! is scanned on a grid of `resolution` points around the incumbent, the best
//! admissible value is kept, and the scan window halves every round. Several
//! deterministic starts are refined independently and the best result wins.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{ChannelParams, ChannelTemplate, ObservedStats};
use crate::error::{Error, Result};
use crate::estimator::YieldBounds;
use crate::keyrate::{evaluate, raw_rate_unvalidated, Evaluation, RateScope};
use crate::source::SourceEnsemble;

/// Intensities every search includes as a starting point when admissible.
pub const REFERENCE_INTENSITIES: [f64; 4] = [0.5, 0.1, 0.05, 0.01];

/// Axis-aligned search box. `nu2` and `nu3` are additionally capped by the
/// incumbent `nu1` and `nu2` so the worst-case ordering can hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub mu: (f64, f64),
    pub nu1: (f64, f64),
    pub nu2_min: f64,
    pub nu3_min: f64,
}

impl Default for SearchBox {
    fn default() -> Self {
        SearchBox { mu: (0.05, 0.95), nu1: (0.01, 0.5), nu2_min: 0.002, nu3_min: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Grid points per coordinate scan.
    pub resolution: usize,
    /// Window-halving rounds.
    pub rounds: usize,
    pub bounds: SearchBox,
    /// Number of starting points (the first is the reference ensemble when
    /// it lies in the box).
    pub multistart: usize,
    pub seed: u64,
    pub scope: RateScope,
    /// Selection probabilities of (mu, nu1, nu2, nu3).
    pub select_probs: [f64; 4],
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            resolution: 9,
            rounds: 36,
            bounds: SearchBox::default(),
            multistart: 4,
            seed: 0x5eed,
            scope: RateScope::WholeBracket,
            select_probs: [0.25; 4],
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 4 {
            return Err(Error::Domain(format!("resolution {} must be >= 4", self.resolution)));
        }
        if self.rounds < 1 {
            return Err(Error::Domain("refinement rounds must be >= 1".into()));
        }
        if self.multistart < 1 {
            return Err(Error::Domain("multistart count must be >= 1".into()));
        }
        let b = &self.bounds;
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(in_unit(b.mu.0) && in_unit(b.mu.1) && b.mu.0 <= b.mu.1) {
            return Err(Error::Domain(format!("mu bounds {:?} must lie in (0, 1)", b.mu)));
        }
        if !(in_unit(b.nu1.0) && in_unit(b.nu1.1) && b.nu1.0 <= b.nu1.1) {
            return Err(Error::Domain(format!("nu1 bounds {:?} must lie in (0, 1)", b.nu1)));
        }
        if !(in_unit(b.nu2_min) && in_unit(b.nu3_min)) {
            return Err(Error::Domain("nu2/nu3 lower bounds must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Rounds `x` to 12 significant digits, the precision of the CSV output.
pub(crate) fn snap(x: f64) -> f64 {
    format!("{x:.11e}").parse().unwrap_or(x)
}

struct Objective<'a> {
    params: &'a ChannelParams,
    delta: f64,
    config: &'a SearchConfig,
}

impl Objective<'_> {
    fn ensemble(&self, x: [f64; 4]) -> Option<SourceEnsemble> {
        let ens = SourceEnsemble::with_probs(x, [self.delta; 4], self.config.select_probs).ok()?;
        ens.check_worst_case_ordering().ok()?;
        Some(ens)
    }

    /// Raw (unclamped) rate, or `None` when the point is inadmissible.
    fn value(&self, x: [f64; 4]) -> Option<f64> {
        let ens = self.ensemble(x)?;
        raw_rate_unvalidated(&ens, self.params, self.config.scope).ok().filter(|r| r.is_finite())
    }

    fn in_box(&self, x: [f64; 4]) -> bool {
        let b = &self.config.bounds;
        (b.mu.0..=b.mu.1).contains(&x[0])
            && (b.nu1.0..=b.nu1.1).contains(&x[1])
            && x[2] >= b.nu2_min
            && x[3] >= b.nu3_min
    }

    /// Admissible interval of coordinate `j` with the others held fixed.
    fn coordinate_range(&self, x: &[f64; 4], j: usize) -> (f64, f64) {
        let b = &self.config.bounds;
        let shrink = (1.0 - self.delta) / (1.0 + self.delta);
        match j {
            0 => (b.mu.0, b.mu.1.min(0.999_999 / (1.0 + self.delta))),
            1 => (b.nu1.0.max(x[2] / shrink), b.nu1.1),
            2 => (b.nu2_min.max(x[3] / shrink), x[1] * shrink),
            _ => (b.nu3_min, x[2] * shrink),
        }
    }
}

fn sample_start(obj: &Objective<'_>, rng: &mut ChaCha8Rng) -> Option<[f64; 4]> {
    let b = obj.config.bounds;
    let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> f64 {
        if hi <= lo {
            lo
        } else {
            (rng.gen_range(lo.ln()..=hi.ln())).exp()
        }
    };
    for _ in 0..256 {
        let mut x = [0.0; 4];
        x[0] = log_uniform(rng, b.mu.0, b.mu.1);
        x[1] = log_uniform(rng, b.nu1.0, b.nu1.1);
        let shrink = (1.0 - obj.delta) / (1.0 + obj.delta);
        x[2] = log_uniform(rng, b.nu2_min, x[1] * shrink);
        x[3] = log_uniform(rng, b.nu3_min, x[2] * shrink);
        let x = x.map(snap);
        if obj.value(x).is_some() {
            return Some(x);
        }
    }
    None
}

/// Refines `start` with a fixed window schedule; round `r` always scans the
/// same relative window, so more rounds can only add improvements.
fn refine(obj: &Objective<'_>, start: [f64; 4], start_value: f64) -> ([f64; 4], f64) {
    let n = obj.config.resolution;
    let mut x = start;
    let mut best = start_value;
    for round in 0..obj.config.rounds {
        let half_width = 0.5f64.powi(round as i32);
        for _pass in 0..4 {
            let mut improved = false;
            for j in 0..4 {
                let (lo, hi) = obj.coordinate_range(&x, j);
                if !(lo > 0.0 && hi >= lo) {
                    continue;
                }
                let (lo_ln, hi_ln) = (lo.ln(), hi.ln());
                let span = (hi_ln - lo_ln).max(1e-3) * half_width;
                let centre = x[j].ln();
                let a = (centre - span).max(lo_ln);
                let b = (centre + span).min(hi_ln);
                for i in 0..n {
                    let t = a + (b - a) * i as f64 / (n - 1) as f64;
                    let mut cand = x;
                    cand[j] = snap(t.exp());
                    if cand[j] == x[j] {
                        continue;
                    }
                    if let Some(v) = obj.value(cand) {
                        if v > best {
                            best = v;
                            x = cand;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
    (x, best)
}

/// Result of [`optimize_intensities`].
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub ensemble: SourceEnsemble,
    pub evaluation: Evaluation,
}

/// Maximizes the key rate over intensities at a fixed channel and `delta`.
///
/// Returns the best admissible ensemble found even when its rate is zero
/// (`feasible == false`); errors only when no admissible starting point
/// exists in the search box.
pub fn optimize_intensities(params: &ChannelParams, delta: f64, config: &SearchConfig) -> Result<Optimum> {
    config.validate()?;
    params.validate()?;
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Domain(format!("delta {delta} outside [0, 1)")));
    }
    let obj = Objective { params, delta, config };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts = Vec::with_capacity(config.multistart);
    if obj.in_box(REFERENCE_INTENSITIES) {
        if let Some(v) = obj.value(REFERENCE_INTENSITIES) {
            starts.push((REFERENCE_INTENSITIES, v));
        }
    }
    while starts.len() < config.multistart {
        match sample_start(&obj, &mut rng) {
            Some(x) => starts.push((x, obj.value(x).unwrap_or(f64::NEG_INFINITY))),
            None => break,
        }
    }
    let mut winner: Option<([f64; 4], f64)> = None;
    for (x0, v0) in starts {
        let (x, v) = refine(&obj, x0, v0);
        if winner.is_none_or(|(_, best)| v > best) {
            winner = Some((x, v));
        }
    }
    let (x, _) = winner.ok_or(Error::NoFeasiblePoint)?;
    let ensemble = obj.ensemble(x).ok_or(Error::NoFeasiblePoint)?;
    let evaluation = evaluate(&ensemble, params, config.scope)?;
    Ok(Optimum { ensemble, evaluation })
}

/// How a sweep chooses intensities at each point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntensityMode {
    Optimize,
    /// Fixed `(mu, nu1, nu2, nu3)`.
    Fixed([f64; 4]),
}

/// One optimized operating point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub distance: f64,
    pub train_len: u32,
    pub delta: f64,
    /// `None` when the search box contains no admissible ensemble.
    pub intensities: Option<[f64; 4]>,
    pub observed: Option<ObservedStats>,
    pub yields: YieldBounds,
    pub rate: f64,
    pub feasible: bool,
    /// `R(delta) / R(0)` at the same `(L, z)`; absent when `R(0) = 0`.
    pub rate_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    /// Ordered by `(L, delta, z)`.
    pub records: Vec<SweepRecord>,
    /// Fixed-intensity points whose ensemble failed validation, with the
    /// reason; these never appear in `records`.
    pub excluded: Vec<(u32, f64, f64, String)>,
}

impl SweepResult {
    pub fn series(&self, train_len: u32, delta: f64) -> impl Iterator<Item = &SweepRecord> {
        self.records.iter().filter(move |r| r.train_len == train_len && r.delta == delta)
    }
}

/// Inclusive arithmetic range `start, start + step, ..` up to `stop`.
pub fn distance_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && start.is_finite() && stop.is_finite()) {
        return Err(Error::Domain(format!("invalid distance range {start}:{stop}:{step}")));
    }
    if stop < start {
        return Err(Error::Domain(format!("empty distance range {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| snap(start + step * i as f64)).collect())
}

enum PointOutcome {
    Record(SweepRecord),
    Excluded(String),
}

fn point(
    template: &ChannelTemplate,
    train_len: u32,
    delta: f64,
    distance: f64,
    mode: IntensityMode,
    config: &SearchConfig,
) -> Result<PointOutcome> {
    let params = template.params(train_len, distance)?;
    let mut record = SweepRecord {
        distance,
        train_len,
        delta,
        intensities: None,
        observed: None,
        yields: YieldBounds::default(),
        rate: 0.0,
        feasible: false,
        rate_ratio: None,
    };
    let outcome = match mode {
        IntensityMode::Optimize => optimize_intensities(&params, delta, config).map(|o| (o.ensemble, o.evaluation)),
        IntensityMode::Fixed(x) => {
            let ensemble = match SourceEnsemble::with_probs(x, [delta; 4], config.select_probs) {
                Ok(e) => e,
                Err(e) => return Ok(PointOutcome::Excluded(e.to_string())),
            };
            match evaluate(&ensemble, &params, config.scope) {
                Ok(eval) => Ok((ensemble, eval)),
                Err(e) => return Ok(PointOutcome::Excluded(e.to_string())),
            }
        }
    };
    match outcome {
        Ok((ensemble, eval)) => {
            record.intensities = Some(ensemble.intensities());
            record.observed = Some(eval.observed);
            record.yields = eval.key_rate.q_bounds;
            record.rate = eval.key_rate.rate;
            record.feasible = eval.key_rate.feasible;
        }
        Err(Error::NoFeasiblePoint) => {}
        Err(e) => return Err(e),
    }
    Ok(PointOutcome::Record(record))
}

/// Optimizes every `(L, delta, z)` combination; the `delta = 0` baseline is
/// always computed so each record carries `R(delta) / R(0)`. Only the
/// requested deltas appear in the output.
pub fn sweep_grid(
    template: &ChannelTemplate,
    train_lens: &[u32],
    deltas: &[f64],
    distances: &[f64],
    config: &SearchConfig,
) -> Result<SweepResult> {
    sweep_grid_with(template, train_lens, deltas, distances, IntensityMode::Optimize, config)
}

/// [`sweep_grid`] with a choice of intensity mode. In fixed mode, points whose
/// ensemble fails validation are listed in `excluded` instead of `records`.
pub fn sweep_grid_with(
    template: &ChannelTemplate,
    train_lens: &[u32],
    deltas: &[f64],
    distances: &[f64],
    mode: IntensityMode,
    config: &SearchConfig,
) -> Result<SweepResult> {
    if train_lens.is_empty() || deltas.is_empty() || distances.is_empty() {
        return Err(Error::Domain("sweep lists must be non-empty".into()));
    }
    config.validate()?;
    let mut all_deltas: Vec<f64> = deltas.to_vec();
    all_deltas.push(0.0);
    all_deltas.sort_by(f64::total_cmp);
    all_deltas.dedup();
    let mut lens = train_lens.to_vec();
    lens.sort_unstable();
    lens.dedup();
    let mut zs = distances.to_vec();
    zs.sort_by(f64::total_cmp);
    zs.dedup();

    let mut jobs: Vec<(u32, f64, f64)> = Vec::with_capacity(lens.len() * all_deltas.len() * zs.len());
    for &l in &lens {
        for &d in &all_deltas {
            jobs.extend(zs.iter().map(|&z| (l, d, z)));
        }
    }
    // Each point is independent; collect preserves job order.
    let outcomes: Vec<PointOutcome> = jobs
        .par_iter()
        .map(|&(l, d, z)| point(template, l, d, z, mode, config))
        .collect::<Result<_>>()?;
    let mut computed = Vec::with_capacity(outcomes.len());
    let mut excluded = Vec::new();
    for (&(l, d, z), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            PointOutcome::Record(r) => computed.push(r),
            PointOutcome::Excluded(reason) => {
                if deltas.contains(&d) {
                    excluded.push((l, d, z, reason));
                }
            }
        }
    }

    let baseline = |l: u32, z: f64| {
        computed
            .iter()
            .find(|r| r.train_len == l && r.delta == 0.0 && r.distance == z)
            .map(|r| r.rate)
            .unwrap_or(0.0)
    };
    let mut records: Vec<SweepRecord> = computed
        .iter()
        .filter(|r| deltas.contains(&r.delta))
        .cloned()
        .map(|mut r| {
            let r0 = baseline(r.train_len, r.distance);
            r.rate_ratio = (r0 > 0.0).then(|| r.rate / r0);
            r
        })
        .collect();
    records.sort_by(|a, b| {
        a.train_len
            .cmp(&b.train_len)
            .then(a.delta.total_cmp(&b.delta))
            .then(a.distance.total_cmp(&b.distance))
    });
    Ok(SweepResult { records, excluded })
}

/// Rates versus distance for each train length, with and without source
/// errors.
pub fn sweep_distance(
    template: &ChannelTemplate,
    train_lens: &[u32],
    delta: f64,
    distances: &[f64],
    config: &SearchConfig,
) -> Result<SweepResult> {
    sweep_grid(template, train_lens, &[0.0, delta], distances, config)
}

/// Rates and `R(delta)/R(0)` ratios over a list of deltas at one train length.
pub fn sweep_delta(
    template: &ChannelTemplate,
    train_len: u32,
    deltas: &[f64],
    distances: &[f64],
    config: &SearchConfig,
) -> Result<SweepResult> {
    sweep_grid(template, &[train_len], deltas, distances, config)
}
