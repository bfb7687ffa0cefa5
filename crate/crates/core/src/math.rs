//! Numeric primitives: binary entropy, Poisson probabilities and series truncation.

use crate::error::{Error, Result};

/// Default tail mass tolerated when truncating photon-number series.
pub const DEFAULT_TAIL_EPSILON: f64 = 1e-12;

/// A real number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::Domain(format!("probability {value} outside [0, 1]")))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Shannon entropy of a Bernoulli(x) variable in bits, with `0 log 0 = 0`.
pub fn binary_entropy(x: Probability) -> f64 {
    let x = x.value();
    let p = if x <= 0.5 { x } else { 1.0 - x };
    if p <= 0.0 {
        return 0.0;
    }
    let nats = -(p * p.ln() + (1.0 - p) * (-p).ln_1p());
    (nats / std::f64::consts::LN_2).clamp(0.0, 1.0)
}

/// Unchecked `binary_entropy` for values already known to lie in `[0, 1]`.
pub(crate) fn h2(x: f64) -> f64 {
    binary_entropy(Probability(x.clamp(0.0, 1.0)))
}

fn ln_factorial(k: u32) -> f64 {
    // Exact summation is fine for the photon numbers reachable here; beyond
    // that Stirling's series is accurate well past double precision.
    if k < 64 {
        (2..=k).map(|i| (i as f64).ln()).sum()
    } else {
        let n = k as f64;
        n * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI * n).ln() + 1.0 / (12.0 * n)
            - 1.0 / (360.0 * n.powi(3))
            + 1.0 / (1260.0 * n.powi(5))
    }
}

/// Poisson probability `e^{-x} x^k / k!`.
pub fn poisson_pmf(k: u32, x: f64) -> Result<Probability> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Poisson mean {x} must be finite and >= 0")));
    }
    Ok(Probability(pmf(k, x)))
}

/// Unchecked Poisson pmf; `x` must be finite and non-negative.
pub(crate) fn pmf(k: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k <= 20 {
        let mut term = (-x).exp();
        for i in 1..=k {
            term *= x / i as f64;
        }
        term
    } else {
        (k as f64 * x.ln() - x - ln_factorial(k)).exp()
    }
}

/// Smallest `K` whose Poisson tail mass `P(n > K)` is below `epsilon`.
pub fn poisson_cutoff(x: f64, epsilon: f64) -> Result<u32> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Poisson mean {x} must be finite and >= 0")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("tail epsilon {epsilon} outside (0, 1)")));
    }
    if x == 0.0 {
        return Ok(0);
    }
    // Accumulate the head mass directly; the tail is 1 - head. Past the mode
    // the remaining tail is also bounded by term * x / (k + 2 - x), which
    // stays accurate once 1 - head drops near rounding level.
    let mut k = 0u32;
    let mut term = (-x).exp();
    let mut head = term;
    loop {
        let next = term * x / (k + 1) as f64;
        let tail_by_sum = 1.0 - head;
        let tail = if (k + 2) as f64 > x {
            let geometric = next / (1.0 - x / (k + 2) as f64);
            tail_by_sum.min(geometric)
        } else {
            tail_by_sum
        };
        if tail < epsilon {
            return Ok(k);
        }
        k += 1;
        term = next;
        head += term;
    }
}
