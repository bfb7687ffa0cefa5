use rrdps_core::channel::{gain, yield_k, ChannelParams};
use rrdps_core::math::poisson_pmf;
use rrdps_core::oracle::{
    default_cutoff, expected_tally, run_suite, verify_bounds, ErrorPattern, Mutation, SourcePatterns, SuiteConfig,
};
use rrdps_core::source::{Source, SourceEnsemble};
use rrdps_core::Error;

const REF: [f64; 4] = [0.5, 0.1, 0.05, 0.01];

fn setup(delta: f64, z: f64) -> (SourceEnsemble, ChannelParams) {
    (SourceEnsemble::uniform(REF, delta).unwrap(), ChannelParams::standard(16, z).unwrap())
}

#[test]
fn unit_pattern_reproduces_closed_form_gain() {
    let (ens, p) = setup(0.0, 30.0);
    let tally = expected_tally(&SourcePatterns::shared(ErrorPattern::constant(1.0)), &ens, &p, default_cutoff(&ens)).unwrap();
    for (s, g) in tally.gain.iter() {
        assert!((g - gain(ens.spec(s).intensity, &p).unwrap()).abs() < 1e-10);
    }
    let total: f64 = tally.signal_yields.iter().sum();
    assert!((total - tally.gain.mu).abs() < 1e-10);
}

#[test]
fn high_corner_pattern_reproduces_shifted_gain() {
    let delta = 0.05;
    let (ens, p) = setup(delta, 15.0);
    let patterns = SourcePatterns::shared(ErrorPattern::constant_high(delta));
    let tally = expected_tally(&patterns, &ens, &p, default_cutoff(&ens)).unwrap();
    for (s, g) in tally.gain.iter() {
        let want = gain(ens.spec(s).intensity * (1.0 + delta), &p).unwrap();
        assert!((g - want).abs() < 1e-10, "{s}");
    }
    for (k, &y) in tally.signal_yields.iter().enumerate() {
        let want = poisson_pmf(k as u32, 0.5 * (1.0 + delta)).unwrap().value() * yield_k(k as u32, &p);
        assert_eq!(y, want);
    }
}

#[test]
fn alternating_pattern_is_a_two_point_average() {
    let delta = 0.08;
    let (ens, p) = setup(delta, 60.0);
    let tally =
        expected_tally(&SourcePatterns::shared(ErrorPattern::alternating(delta)), &ens, &p, default_cutoff(&ens)).unwrap();
    for (s, g) in tally.gain.iter() {
        let x = ens.spec(s).intensity;
        let want = (gain(x * (1.0 - delta), &p).unwrap() + gain(x * (1.0 + delta), &p).unwrap()) / 2.0;
        assert!((g - want).abs() < 1e-10, "{s}");
    }
}

#[test]
fn counts_scale_with_trains() {
    let (ens, p) = setup(0.05, 30.0);
    let tally =
        expected_tally(&SourcePatterns::shared(ErrorPattern::sinusoidal(0.05, 16)), &ens, &p, default_cutoff(&ens)).unwrap();
    let m = 1e9;
    let n_mu = tally.count(&ens, Source::Signal, m);
    let by_k: f64 = (0..=tally.cutoff).map(|k| tally.signal_count(&ens, k, m)).sum();
    assert!((n_mu - by_k).abs() / n_mu < 1e-10);
    assert!(tally.d_ki(&ens, 1, 3) > 1.0);
}

#[test]
fn zero_delta_verification_passes() {
    let (ens, p) = setup(0.0, 30.0);
    let report = verify_bounds(&SourcePatterns::shared(ErrorPattern::constant(1.0)), &ens, &p, default_cutoff(&ens), Mutation::None)
        .unwrap();
    assert!(report.passed());
    assert!(report.worst_margin() >= 0.0);
}

#[test]
fn independent_patterns_pass() {
    let delta = 0.05;
    let (ens, p) = setup(delta, 30.0);
    let patterns = SourcePatterns::new(
        ErrorPattern::constant_high(delta),
        ErrorPattern::constant_low(delta),
        ErrorPattern::alternating(delta),
        ErrorPattern::seeded_random(delta, 7, 3),
    );
    assert!(verify_bounds(&patterns, &ens, &p, default_cutoff(&ens), Mutation::None).unwrap().passed());
}

#[test]
fn out_of_range_pattern_rejected() {
    let (ens, p) = setup(0.02, 30.0);
    let patterns = SourcePatterns::shared(ErrorPattern::constant_high(0.05));
    assert!(matches!(expected_tally(&patterns, &ens, &p, 12), Err(Error::InadmissiblePattern(_))));
}

#[test]
fn random_suite_passes() {
    let report = run_suite(&SuiteConfig::default()).unwrap();
    assert!(report.all_passed(), "{} failures", report.failures());
    assert!(report.cases.len() >= 400);
    assert!(report.worst_margin() >= -1e-12);
}

#[test]
fn corrupted_estimator_is_caught() {
    let config = SuiteConfig { random_patterns: 10, mutation: Mutation::NegateQ1, ..SuiteConfig::default() };
    let report = run_suite(&config).unwrap();
    assert!(!report.all_passed());
    assert_eq!(report.failures(), report.cases.len());
}

#[test]
fn suite_report_is_reproducible() {
    let config = SuiteConfig { random_patterns: 5, ..SuiteConfig::default() };
    let a = run_suite(&config).unwrap().to_string();
    let b = run_suite(&config).unwrap().to_string();
    assert_eq!(a, b);
    let other = run_suite(&SuiteConfig { root_seed: 7, ..config }).unwrap().to_string();
    assert_ne!(a, other);
}
