//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{collapsed_q_lower, golden, rel_err, rrdps_bin};
use rrdps_core::channel::{error_yield_k, gain, qber, transmittance, yield_k, ChannelParams, ChannelTemplate};
use rrdps_core::keyrate::{evaluate, phase_error_bound, RateScope};
use rrdps_core::math::{binary_entropy, poisson_cutoff, poisson_pmf, Probability};
use rrdps_core::optimizer::{distance_range, sweep_delta, sweep_distance, SearchConfig, SweepResult};
use rrdps_core::oracle::{run_suite, SuiteConfig, SOUNDNESS_TOLERANCE};
use rrdps_core::source::SourceEnsemble;

const REDUCTION_TOL: f64 = 1e-12;
const SERIES_TOL: f64 = 1e-10;
const GOLDEN_TOL: f64 = 1e-12;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome { passed, detail: detail.into() }
    }
}

fn within_budget(outcome: Outcome, elapsed: Duration, budget: Option<Duration>) -> Outcome {
    match budget {
        Some(b) if elapsed > b => Outcome::new(false, format!("{} (over budget {:?})", outcome.detail, b)),
        _ => outcome,
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut configs = 0;
    while configs < 50 {
        let mu = rng.gen_range(0.3..0.8);
        let n1 = rng.gen_range(0.08..0.25);
        let n2 = n1 * rng.gen_range(0.3..0.7);
        let n3 = n2 * rng.gen_range(0.1..0.6);
        if n1 + n2 + n3 >= mu {
            continue;
        }
        let train_len = rng.gen_range(4..=40);
        let z = rng.gen_range(0.0..80.0);
        let params = ChannelParams::standard(train_len, z).unwrap();
        let ens = SourceEnsemble::uniform([mu, n1, n2, n3], 0.0).unwrap();
        let eval = evaluate(&ens, &params, RateScope::WholeBracket).unwrap();
        let got = eval.key_rate.q_bounds.as_array();
        let want = collapsed_q_lower([mu, n1, n2, n3], &params);
        for k in 0..3 {
            worst = worst.max(rel_err(got[k], want[k]));
        }
        configs += 1;
    }
    Outcome::new(worst <= REDUCTION_TOL, format!("50 configs, worst relative difference {worst:.3e} (tol {REDUCTION_TOL:e})"))
}

fn criterion_2() -> Outcome {
    let config = SuiteConfig {
        deltas: vec![0.02, 0.05, 0.08],
        distances: vec![0.0, 15.0, 30.0, 60.0],
        train_len: 16,
        random_patterns: 100,
        ..SuiteConfig::default()
    };
    let report = run_suite(&config).unwrap();
    let worst = report.worst_margin();
    let passed = report.all_passed() && worst >= -SOUNDNESS_TOLERANCE;
    Outcome::new(
        passed,
        format!(
            "{} cases, {} failures, worst margin {worst:.3e}, worst containment {:.3e}",
            report.cases.len(),
            report.failures(),
            report.worst_containment()
        ),
    )
}

fn series(result: &SweepResult, l: u32, delta: f64) -> Vec<(f64, f64, Option<f64>)> {
    result.series(l, delta).map(|r| (r.distance, r.rate, r.rate_ratio)).collect()
}

fn non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}

fn criterion_3() -> Outcome {
    let zs = distance_range(0.0, 100.0, 5.0).unwrap();
    let lens = [8, 12, 16, 20];
    let result = sweep_distance(&ChannelTemplate::STANDARD, &lens, 0.05, &zs, &SearchConfig::default()).unwrap();
    let mut problems = Vec::new();

    for l in lens {
        for delta in [0.0, 0.05] {
            let positive: Vec<f64> = series(&result, l, delta).iter().map(|p| p.1).filter(|&r| r > 0.0).collect();
            if !non_increasing(&positive) {
                problems.push(format!("(a) L={l} delta={delta} not non-increasing"));
            }
        }
        for ((z, r0, _), (_, r5, _)) in series(&result, l, 0.0).into_iter().zip(series(&result, l, 0.05)) {
            if r5 > r0 {
                problems.push(format!("(b) L={l} z={z}: R(0.05)={r5:e} > R(0)={r0:e}"));
            }
        }
    }

    let l8 = series(&result, 8, 0.05);
    let edge = l8.iter().filter(|p| p.1 > 0.0).map(|p| p.0).fold(f64::NAN, f64::max);
    let rate_at = |l: u32| series(&result, l, 0.05).into_iter().find(|p| p.0 == edge).map(|p| p.1).unwrap_or(0.0);
    let (r8, r16, r20) = (rate_at(8), rate_at(16), rate_at(20));
    if edge.is_nan() || r16 < r8 || r20 < r8 {
        problems.push(format!("(c) at z={edge}: L8={r8:e} L16={r16:e} L20={r20:e}"));
    }

    let detail = if problems.is_empty() {
        format!("L=8 edge {edge} km: R8={r8:.3e} R16={r16:.3e} R20={r20:.3e}")
    } else {
        problems.join("; ")
    };
    Outcome::new(problems.is_empty(), detail)
}

fn criterion_4() -> Outcome {
    let zs = distance_range(0.0, 100.0, 5.0).unwrap();
    let deltas = [0.02, 0.05, 0.08];
    let result = sweep_delta(&ChannelTemplate::STANDARD, 16, &deltas, &zs, &SearchConfig::default()).unwrap();
    let mut problems = Vec::new();
    let ratio_series: Vec<Vec<(f64, Option<f64>)>> =
        deltas.iter().map(|&d| series(&result, 16, d).into_iter().map(|p| (p.0, p.2)).collect()).collect();

    for (i, &z) in zs.iter().enumerate() {
        let ratios: Vec<Option<f64>> = ratio_series.iter().map(|s| s[i].1).collect();
        if ratios.iter().all(Option::is_none) {
            continue;
        }
        let Some(r) = ratios.into_iter().collect::<Option<Vec<f64>>>() else {
            problems.push(format!("z={z}: ratio missing for some delta"));
            continue;
        };
        if !(r[0] >= r[1] && r[1] >= r[2]) {
            problems.push(format!("z={z}: ratios {r:?} not ordered by delta"));
        }
        if r.iter().any(|&v| v > 1.0) {
            problems.push(format!("z={z}: ratio above 1"));
        }
    }
    for (d, s) in deltas.iter().zip(&ratio_series) {
        let defined: Vec<f64> = s.iter().filter_map(|p| p.1).collect();
        if !non_increasing(&defined) {
            problems.push(format!("delta={d}: ratio not non-increasing in z"));
        }
    }
    let last = zs.iter().zip(&ratio_series[0]).filter(|(_, p)| p.1.is_some()).map(|(z, _)| *z).fold(0.0, f64::max);
    let detail = if problems.is_empty() {
        format!("ratios ordered and decreasing over 0..={last} km")
    } else {
        problems.join("; ")
    };
    Outcome::new(problems.is_empty(), detail)
}

fn criterion_5() -> Outcome {
    let zs = [15.0, 30.0, 60.0];
    let deltas: Vec<f64> = (0..=10).map(|i| i as f64 / 100.0).collect();
    let result = sweep_delta(&ChannelTemplate::STANDARD, 16, &deltas, &zs, &SearchConfig::default()).unwrap();
    let mut problems = Vec::new();
    let ratio = |d: f64, z: f64| {
        result
            .series(16, d)
            .find(|r| r.distance == z)
            .and_then(|r| r.rate_ratio)
            .unwrap_or(f64::NAN)
    };
    for &z in &zs {
        let curve: Vec<f64> = deltas.iter().map(|&d| ratio(d, z)).collect();
        if curve.iter().any(|v| v.is_nan()) || !non_increasing(&curve) {
            problems.push(format!("z={z}: ratio not non-increasing in delta {curve:?}"));
        }
    }
    for &d in deltas.iter().filter(|&&d| d > 0.0) {
        let (r15, r30, r60) = (ratio(d, 15.0), ratio(d, 30.0), ratio(d, 60.0));
        if !(r60 <= r30 && r30 <= r15) {
            problems.push(format!("delta={d}: ratios 15/30/60 km = {r15:e}/{r30:e}/{r60:e}"));
        }
    }
    let detail = if problems.is_empty() {
        format!(
            "ratio at delta=0.1: 15 km {:.4}, 30 km {:.4}, 60 km {:.4}",
            ratio(0.1, 15.0),
            ratio(0.1, 30.0),
            ratio(0.1, 60.0)
        )
    } else {
        problems.join("; ")
    };
    Outcome::new(problems.is_empty(), detail)
}

fn criterion_6() -> Outcome {
    let mut worst_gain = 0.0f64;
    let mut worst_error = 0.0f64;
    for i in 0..20 {
        let x = 1e-3 + (0.95 - 1e-3) * i as f64 / 19.0;
        let cutoff = poisson_cutoff(x, 1e-16).unwrap();
        for j in 0..20 {
            let z = 150.0 * j as f64 / 19.0;
            let params = ChannelParams::standard(16, z).unwrap();
            let mut series_gain = 0.0;
            let mut series_error = 0.0;
            for k in 0..=cutoff {
                let p = poisson_pmf(k, x).unwrap().value();
                series_gain += p * yield_k(k, &params);
                series_error += p * error_yield_k(k, &params);
            }
            let q = gain(x, &params).unwrap();
            worst_gain = worst_gain.max((series_gain - q).abs());
            worst_error = worst_error.max((series_error - q * qber(x, &params).unwrap()).abs());
        }
    }
    Outcome::new(
        worst_gain < SERIES_TOL && worst_error < SERIES_TOL,
        format!("20x20 grid: gain residual {worst_gain:.3e}, error residual {worst_error:.3e} (tol {SERIES_TOL:e})"),
    )
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0f64;
    let mut problems = Vec::new();
    let mut check = |name: String, got: f64, want: f64| {
        let e = rel_err(got, want);
        worst = worst.max(e);
        if e > GOLDEN_TOL {
            problems.push(format!("{name}: {got:e} vs {want:e}"));
        }
    };
    for &(p, h) in golden::H2 {
        check(format!("H2({p})"), binary_entropy(Probability::new(p).unwrap()), h);
    }
    for &(k, x, v) in golden::PMF {
        check(format!("pmf({k},{x})"), poisson_pmf(k, x).unwrap().value(), v);
    }
    for &(z, t) in golden::TRANSMITTANCE {
        check(format!("eta({z})"), transmittance(&ChannelParams::standard(16, z).unwrap()), t);
    }
    for &(k, l, e) in golden::PHASE_ERROR {
        check(format!("e_ph({k},{l})"), phase_error_bound(k, l).unwrap(), e);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut symmetry = 0.0f64;
    let mut normalization = 0.0f64;
    for _ in 0..1000 {
        let p: f64 = rng.gen_range(0.0..=1.0);
        let h = |v: f64| binary_entropy(Probability::new(v).unwrap());
        symmetry = symmetry.max((h(p) - h(1.0 - p)).abs());
        let x: f64 = rng.gen_range(0.0..30.0);
        let cutoff = poisson_cutoff(x, 1e-15).unwrap();
        let total: f64 = (0..=cutoff).map(|k| poisson_pmf(k, x).unwrap().value()).sum();
        normalization = normalization.max((total - 1.0).abs());
    }
    if symmetry > 1e-12 {
        problems.push(format!("H2 symmetry residual {symmetry:e}"));
    }
    if normalization > 1e-12 {
        problems.push(format!("Poisson normalization residual {normalization:e}"));
    }
    let detail = if problems.is_empty() {
        format!("worst relative error {worst:.3e}; symmetry {symmetry:.1e}; normalization {normalization:.1e}")
    } else {
        problems.join("; ")
    };
    Outcome::new(problems.is_empty(), detail)
}

fn run_twice(args: &[&str]) -> (Vec<u8>, Vec<u8>) {
    let run = || {
        let out = rrdps_bin().args(args).output().expect("run rrdps");
        assert!(out.status.code().is_some());
        out.stdout
    };
    (run(), run())
}

fn criterion_8() -> Outcome {
    let (s1, s2) = run_twice(&["sweep", "--L", "8,16", "--delta", "0.02,0.05", "--z-range", "0:80:20", "--seed", "11"]);
    let (v1, v2) = run_twice(&["verify", "--patterns", "20", "--seed", "99"]);
    let passed = s1 == s2 && v1 == v2 && !s1.is_empty() && !v1.is_empty();
    Outcome::new(
        passed,
        format!("sweep {} bytes identical={}, verify {} bytes identical={}", s1.len(), s1 == s2, v1.len(), v1 == v2),
    )
}

fn main() -> ExitCode {
    type Criterion = (u32, &'static str, fn() -> Outcome, Option<Duration>);
    let criteria: [Criterion; 8] = [
        (1, "delta=0 reduction to the standard decoy formulas", criterion_1, Some(Duration::from_secs(10))),
        (2, "bound soundness over random error patterns", criterion_2, Some(Duration::from_secs(60))),
        (3, "rate versus distance for L in {8,12,16,20}", criterion_3, Some(Duration::from_secs(300))),
        (4, "ratio ordering in delta and decay in z, L=16", criterion_4, None),
        (5, "ratio decay in delta and ordering in z, L=16", criterion_5, None),
        (6, "series and closed-form gain/QBER agree", criterion_6, None),
        (7, "unit goldens and property suites", criterion_7, None),
        (8, "deterministic sweep and verify output", criterion_8, None),
    ];
    let mut failures = 0;
    for (id, name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run)
            .unwrap_or_else(|_| Outcome::new(false, "panicked"));
        let elapsed = start.elapsed();
        let outcome = within_budget(outcome, elapsed, budget);
        if !outcome.passed {
            failures += 1;
        }
        println!(
            "criterion {id} {}: {name} [{:.1}s] {}",
            if outcome.passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            outcome.detail
        );
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
