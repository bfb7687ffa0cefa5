//! Shared fixtures for the integration tests: high-precision constants and an
//! independent δ = 0 decoy estimator written directly in Poisson form.
#![allow(dead_code, clippy::excessive_precision)]

use rrdps_core::channel::{gain, ChannelParams};

/// Constants evaluated at 50 significant digits with mpmath.
pub mod golden {
    pub const H2: &[(f64, f64)] = &[
        (0.11, 0.49991595816452799564),
        (0.033, 0.20922047786915264672),
        (0.25, 0.81127812445913286391),
        (1e-6, 0.000021374262888865376601),
        (1.0 / 15.0, 0.35335933502142136238),
    ];

    pub const PMF: &[(u32, f64, f64)] = &[
        (0, 0.5, 0.6065306597126334236),
        (1, 1.0, 0.3678794411714423216),
        (1, 0.475, 0.2953954018208845356),
        (1, 0.525, 0.31056656629257791797),
        (2, 0.5, 0.07581633246407917795),
        (3, 0.1, 0.00015080623633932659553),
        (30, 20.0, 0.0083435362456351087775),
        (100, 80.0, 0.003939458159199259677),
        (5, 1e-3, 8.3250041652781249306e-18),
    ];

    /// `(x, epsilon, K)`, K found by summing the head mass exactly.
    pub const CUTOFF: &[(f64, f64, u32)] = &[(0.5, 1e-12, 11), (0.525, 1e-12, 11), (5.0, 1e-12, 27), (0.01, 1e-10, 4)];

    /// Fiber transmittance at 0.2 dB/km.
    pub const TRANSMITTANCE: &[(f64, f64)] = &[
        (0.0, 1.0),
        (15.0, 0.501187233627272285),
        (30.0, 0.25118864315095801111),
        (60.0, 0.063095734448019324943),
        (100.0, 0.01),
    ];

    /// `(x, z, gain, qber)` at the default parameters with L = 16.
    pub const GAIN_QBER_L16: &[(f64, f64, f64, f64)] = &[
        (0.5, 30.0, 0.0056628501150036750992, 0.035243110755544296504),
        (0.01, 30.0, 0.0001402254268402840327, 0.12358556843950963106),
        (0.5, 0.0, 0.02227535764031529482, 0.033570244491922788489),
        (0.1, 60.0, 0.0003110827786581121115, 0.073832861448625096609),
    ];

    /// `(k, L, e_ph)`.
    pub const PHASE_ERROR: &[(u32, u32, f64)] = &[
        (0, 16, 0.0),
        (1, 16, 0.066666666666666666667),
        (2, 16, 0.13333333333333333333),
        (1, 8, 0.14285714285714285714),
        (2, 3, 0.5),
        (1, 2, 0.5),
    ];

    /// Reference ensemble (0.5, 0.1, 0.05, 0.01), δ = 0, L = 16, z = 30 km.
    pub const REF_Q_LOWER: [f64; 3] = [0.0, 0.0032570150103251554581, 0.0015847575011052398098];
    pub const REF_RATE: f64 = 0.000084229688969975553307;

    /// Optimizer output for δ = 0, L = 16, z = 30 km, re-evaluated independently.
    pub const OPT_Z30_INTENSITIES: [f64; 4] = [0.798378236959, 0.01, 0.002, 0.000100000000008];
    pub const OPT_Z30_Q_LOWER: [f64; 3] =
        [0.000012139689342791569264, 0.0040455174622939942467, 0.0032213586844062580313];
    pub const OPT_Z30_RATE: f64 = 0.00011039612909520875076;

    /// Small fixed intensities (0.01, 0.003, 0.002, 0.001), δ = 0, L = 16, z = 0.
    pub const TINY_Z0_Q_LOWER: [f64; 3] =
        [0.000026667343323810333396, 0.00044550432639961867031, 3.5502193472630397182e-6];
    pub const TINY_Z0_RATE: f64 = 8.4936132343530938417e-6;
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Four-intensity decoy bounds for exact Poisson sources, eliminating the
/// higher photon numbers one decoy pair at a time.
pub fn collapsed_q_lower(x: [f64; 4], params: &ChannelParams) -> [f64; 3] {
    let [mu, n1, n2, n3] = x;
    let q = |v: f64| gain(v, params).unwrap();
    let (qm, q1, q2, q3) = (q(mu), q(n1), q(n2), q(n3));
    let (e1, e2, e3, em) = (n1.exp() * q1, n2.exp() * q2, n3.exp() * q3, mu.exp() * qm);

    let y0 = ((n1 * e2 - n2 * e1) / (n1 - n2)).max(0.0);
    let y1 = ((mu * mu * (e1 - e2) - (n1 * n1 - n2 * n2) * (em - y0)) / (mu * (n1 - n2) * (mu - n1 - n2))).max(0.0);
    let a = (n1 - n2) * (n1 - n3) * (n2 - n3) * (n1 + n2 + n3);
    let y2 = (2.0
        * (mu.powi(3) * (e1 * (n2 - n3) - e2 * (n1 - n3) + e3 * (n1 - n2)) - a * (em - y0 - mu * y1))
        / (mu * mu * (n1 - n2) * (n1 - n3) * (n2 - n3) * (mu - n1 - n2 - n3)))
        .max(0.0);
    let p = |k: i32| (-mu).exp() * mu.powi(k) / [1.0, 1.0, 2.0][k as usize];
    [p(0) * y0, p(1) * y1, p(2) * y2]
}

pub fn rrdps_bin() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_rrdps"))
}
