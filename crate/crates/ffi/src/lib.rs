//! C ABI over `rrdps-core`.
//!
//! Every fallible function returns an [`RrdpsStatus`] and writes results
//! through out-pointers. On failure the message is kept per thread and can
//! be read with [`rrdps_last_error_message`]. Channels, ensembles and
//! evaluations are opaque handles released with the matching `*_free`;
//! freeing `NULL` is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rrdps_core::channel::{self, ChannelParams, ChannelTemplate};
use rrdps_core::keyrate::{evaluate, Evaluation, RateScope};
use rrdps_core::math::{binary_entropy, poisson_pmf, Probability};
use rrdps_core::optimizer::{optimize_intensities, SearchConfig};
use rrdps_core::oracle::{run_suite, Mutation, SuiteConfig};
use rrdps_core::source::SourceEnsemble;
use rrdps_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrdpsStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    InvalidEnsemble = 3,
    DegenerateDenominator = 4,
    UndefinedQber = 5,
    InadmissiblePattern = 6,
    NoFeasiblePoint = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

/// Values accepted by the `scope` arguments.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RrdpsRateScope {
    /// `1/L` multiplies privacy amplification and error correction.
    WholeBracket = 0,
    /// `1/L` multiplies privacy amplification only.
    PrivacyOnly = 1,
}

/// Optimizer settings; obtain defaults from [`rrdps_search_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RrdpsSearchOptions {
    pub resolution: u32,
    pub rounds: u32,
    pub multistart: u32,
    pub seed: u64,
    /// An [`RrdpsRateScope`] value.
    pub scope: u32,
}

/// Channel parameters at one train length and distance.
pub struct RrdpsChannel(ChannelParams);

/// Four-intensity source ensemble.
pub struct RrdpsEnsemble(SourceEnsemble);

/// Key-rate evaluation of one operating point.
pub struct RrdpsEvaluation(Evaluation);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(err: &Error) -> RrdpsStatus {
    match err {
        Error::Domain(_) => RrdpsStatus::Domain,
        Error::InvalidEnsemble(_) => RrdpsStatus::InvalidEnsemble,
        Error::DegenerateDenominator { .. } => RrdpsStatus::DegenerateDenominator,
        Error::UndefinedQber => RrdpsStatus::UndefinedQber,
        Error::InadmissiblePattern(_) => RrdpsStatus::InadmissiblePattern,
        Error::NoFeasiblePoint => RrdpsStatus::NoFeasiblePoint,
    }
}

enum Failure {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> RrdpsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => RrdpsStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer passed for '{name}'"));
            RrdpsStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            RrdpsStatus::Internal
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn put<T>(out: *mut T, name: &'static str, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn read4(p: *const f64, name: &'static str) -> Result<[f64; 4], Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok([*p, *p.add(1), *p.add(2), *p.add(3)])
}

fn scope_of(raw: u32) -> Result<RateScope, Failure> {
    match raw {
        0 => Ok(RateScope::WholeBracket),
        1 => Ok(RateScope::PrivacyOnly),
        other => Err(Error::Domain(format!("unknown rate scope {other}")).into()),
    }
}

/// Static description of an [`RrdpsStatus`] value.
#[no_mangle]
pub extern "C" fn rrdps_status_string(status: u32) -> *const c_char {
    let s: &'static CStr = match status {
        0 => c"ok",
        1 => c"null pointer argument",
        2 => c"argument outside its domain",
        3 => c"invalid source ensemble",
        4 => c"degenerate estimator denominator",
        5 => c"QBER undefined at zero gain",
        6 => c"inadmissible error pattern",
        7 => c"no feasible intensity point",
        8 => c"internal error",
        _ => c"unknown status",
    };
    s.as_ptr()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len - 1` bytes) and returns the full message
/// length excluding the terminator.
///
/// # Safety
/// `buf` must be valid for `len` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn rrdps_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Default channel parameters at train length `train_len` and `distance_km`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn rrdps_channel_standard(
    train_len: u32,
    distance_km: f64,
    out: *mut *mut RrdpsChannel,
) -> RrdpsStatus {
    guard(|| {
        let params = ChannelParams::standard(train_len, distance_km)?;
        put(out, "out", Box::into_raw(Box::new(RrdpsChannel(params))))
    })
}

/// Explicit channel parameters. `base_dark` is the dark count probability
/// per pulse; the per-train value is `base_dark * train_len`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn rrdps_channel_new(
    base_dark: f64,
    misalignment: f64,
    background_error: f64,
    detector_eff: f64,
    loss_db_per_km: f64,
    corr_eff: f64,
    train_len: u32,
    distance_km: f64,
    out: *mut *mut RrdpsChannel,
) -> RrdpsStatus {
    guard(|| {
        let template = ChannelTemplate {
            base_dark,
            misalignment,
            background_error,
            detector_eff,
            loss_coeff: loss_db_per_km,
            corr_eff,
        };
        let params = template.params(train_len, distance_km)?;
        put(out, "out", Box::into_raw(Box::new(RrdpsChannel(params))))
    })
}

/// # Safety
/// `channel` must come from an `rrdps_channel_*` constructor and not have
/// been freed, or be null.
#[no_mangle]
pub unsafe extern "C" fn rrdps_channel_free(channel: *mut RrdpsChannel) {
    if !channel.is_null() {
        drop(Box::from_raw(channel));
    }
}

/// Fiber transmittance of `channel`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rrdps_transmittance(channel: *const RrdpsChannel, out: *mut f64) -> RrdpsStatus {
    guard(|| put(out, "out", channel::transmittance(&get(channel, "channel")?.0)))
}

/// Overall gain at mean photon number `intensity`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rrdps_gain(channel: *const RrdpsChannel, intensity: f64, out: *mut f64) -> RrdpsStatus {
    guard(|| put(out, "out", channel::gain(intensity, &get(channel, "channel")?.0)?))
}

/// Overall QBER at mean photon number `intensity`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rrdps_qber(channel: *const RrdpsChannel, intensity: f64, out: *mut f64) -> RrdpsStatus {
    guard(|| put(out, "out", channel::qber(intensity, &get(channel, "channel")?.0)?))
}

/// Binary entropy in bits.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rrdps_binary_entropy(p: f64, out: *mut f64) -> RrdpsStatus {
    guard(|| put(out, "out", binary_entropy(Probability::new(p)?)))
}

/// Poisson probability of `k` photons at mean `x`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rrdps_poisson_pmf(k: u32, x: f64, out: *mut f64) -> RrdpsStatus {
    guard(|| put(out, "out", poisson_pmf(k, x)?.value()))
}

/// Ensemble with intensities `(mu, nu1, nu2, nu3)`, common relative error
/// `delta` and equal selection probabilities.
///
/// # Safety
/// `intensities` must point to four doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rrdps_ensemble_new(
    intensities: *const f64,
    delta: f64,
    out: *mut *mut RrdpsEnsemble,
) -> RrdpsStatus {
    guard(|| {
        let ens = SourceEnsemble::uniform(read4(intensities, "intensities")?, delta)?;
        put(out, "out", Box::into_raw(Box::new(RrdpsEnsemble(ens))))
    })
}

/// As [`rrdps_ensemble_new`] with per-source deltas and selection
/// probabilities (four doubles each).
///
/// # Safety
/// Array arguments must point to four doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rrdps_ensemble_new_full(
    intensities: *const f64,
    deltas: *const f64,
    select_probs: *const f64,
    out: *mut *mut RrdpsEnsemble,
) -> RrdpsStatus {
    guard(|| {
        let ens = SourceEnsemble::with_probs(
            read4(intensities, "intensities")?,
            read4(deltas, "deltas")?,
            read4(select_probs, "select_probs")?,
        )?;
        put(out, "out", Box::into_raw(Box::new(RrdpsEnsemble(ens))))
    })
}

/// Writes `(mu, nu1, nu2, nu3)` to `out[0..4]`.
///
/// # Safety
/// `ensemble` must be a live handle; `out` must hold four doubles.
#[no_mangle]
pub unsafe extern "C" fn rrdps_ensemble_intensities(ensemble: *const RrdpsEnsemble, out: *mut f64) -> RrdpsStatus {
    guard(|| {
        let x = get(ensemble, "ensemble")?.0.intensities();
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        ptr::copy_nonoverlapping(x.as_ptr(), out, 4);
        Ok(())
    })
}

/// # Safety
/// `ensemble` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rrdps_ensemble_free(ensemble: *mut RrdpsEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Validates the ensemble and computes bounds and key rate.
///
/// # Safety
/// Handles must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rrdps_evaluate(
    ensemble: *const RrdpsEnsemble,
    channel: *const RrdpsChannel,
    scope: u32,
    out: *mut *mut RrdpsEvaluation,
) -> RrdpsStatus {
    guard(|| {
        let eval = evaluate(&get(ensemble, "ensemble")?.0, &get(channel, "channel")?.0, scope_of(scope)?)?;
        put(out, "out", Box::into_raw(Box::new(RrdpsEvaluation(eval))))
    })
}

/// Reported key rate per pulse, clamped at zero.
///
/// # Safety
/// `evaluation` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rrdps_evaluation_rate(evaluation: *const RrdpsEvaluation) -> f64 {
    evaluation.as_ref().map_or(f64::NAN, |e| e.0.key_rate.rate)
}

/// Key rate before clamping.
///
/// # Safety
/// `evaluation` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rrdps_evaluation_raw_rate(evaluation: *const RrdpsEvaluation) -> f64 {
    evaluation.as_ref().map_or(f64::NAN, |e| e.0.key_rate.raw_rate)
}

/// Whether the raw rate is positive.
///
/// # Safety
/// `evaluation` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rrdps_evaluation_feasible(evaluation: *const RrdpsEvaluation) -> bool {
    evaluation.as_ref().is_some_and(|e| e.0.key_rate.feasible)
}

/// Writes the lower bounds on the signal's 0-, 1- and 2-photon gains to
/// `out[0..3]`.
///
/// # Safety
/// `evaluation` must be a live handle; `out` must hold three doubles.
#[no_mangle]
pub unsafe extern "C" fn rrdps_evaluation_gain_bounds(evaluation: *const RrdpsEvaluation, out: *mut f64) -> RrdpsStatus {
    guard(|| {
        let q = get(evaluation, "evaluation")?.0.key_rate.q_bounds.as_array();
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        ptr::copy_nonoverlapping(q.as_ptr(), out, 3);
        Ok(())
    })
}

/// Observed signal gain and QBER.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rrdps_evaluation_signal_stats(
    evaluation: *const RrdpsEvaluation,
    gain: *mut f64,
    qber: *mut f64,
) -> RrdpsStatus {
    guard(|| {
        let obs = &get(evaluation, "evaluation")?.0.observed;
        put(gain, "gain", obs.gain.mu)?;
        put(qber, "qber", obs.qber.mu)
    })
}

/// # Safety
/// `evaluation` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rrdps_evaluation_free(evaluation: *mut RrdpsEvaluation) {
    if !evaluation.is_null() {
        drop(Box::from_raw(evaluation));
    }
}

#[no_mangle]
pub extern "C" fn rrdps_search_options_default() -> RrdpsSearchOptions {
    let d = SearchConfig::default();
    RrdpsSearchOptions {
        resolution: d.resolution as u32,
        rounds: d.rounds as u32,
        multistart: d.multistart as u32,
        seed: d.seed,
        scope: RrdpsRateScope::WholeBracket as u32,
    }
}

/// Maximizes the key rate over intensities. `options` may be null for the
/// defaults. Both outputs are written on success.
///
/// # Safety
/// `channel` must be live; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rrdps_optimize(
    channel: *const RrdpsChannel,
    delta: f64,
    options: *const RrdpsSearchOptions,
    out_ensemble: *mut *mut RrdpsEnsemble,
    out_evaluation: *mut *mut RrdpsEvaluation,
) -> RrdpsStatus {
    guard(|| {
        let params = &get(channel, "channel")?.0;
        let mut config = SearchConfig::default();
        if let Some(o) = options.as_ref() {
            config.resolution = o.resolution as usize;
            config.rounds = o.rounds as usize;
            config.multistart = o.multistart as usize;
            config.seed = o.seed;
            config.scope = scope_of(o.scope)?;
        }
        if out_ensemble.is_null() {
            return Err(Failure::Null("out_ensemble"));
        }
        if out_evaluation.is_null() {
            return Err(Failure::Null("out_evaluation"));
        }
        let opt = optimize_intensities(params, delta, &config)?;
        put(out_ensemble, "out_ensemble", Box::into_raw(Box::new(RrdpsEnsemble(opt.ensemble))))?;
        put(out_evaluation, "out_evaluation", Box::into_raw(Box::new(RrdpsEvaluation(opt.evaluation))))
    })
}

/// Runs the randomized soundness suite for one `delta` over the default
/// distances at the default channel, with `patterns` random pattern sets
/// per distance. `negate_q1` enables the corrupted-estimator control.
///
/// # Safety
/// Output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rrdps_verify(
    train_len: u32,
    delta: f64,
    patterns: u32,
    seed: u64,
    negate_q1: bool,
    out_passed: *mut bool,
    out_worst_margin: *mut f64,
) -> RrdpsStatus {
    guard(|| {
        let config = SuiteConfig {
            deltas: vec![delta],
            train_len,
            random_patterns: patterns as usize,
            root_seed: seed,
            mutation: if negate_q1 { Mutation::NegateQ1 } else { Mutation::None },
            ..SuiteConfig::default()
        };
        let report = run_suite(&config)?;
        put(out_passed, "out_passed", report.all_passed())?;
        put(out_worst_margin, "out_worst_margin", report.worst_margin())
    })
}
