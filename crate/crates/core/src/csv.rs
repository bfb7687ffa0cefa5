//! Sweep CSV output.

use std::io::{self, Write};

use crate::optimizer::{SweepRecord, SweepResult};

pub const HEADER: &str = "z_km,L,delta,mu,nu1,nu2,nu3,Q_mu,E_mu,Q0L,Q1L,Q2L,rate,rate_ratio,feasible";

/// Formats like C's `%.12g`: 12 significant digits, trailing zeros removed,
/// exponent notation outside `[1e-4, 1e12)`.
pub fn format_sig(x: f64) -> String {
    const PRECISION: i32 = 12;
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent formatting");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PRECISION).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn row(r: &SweepRecord) -> String {
    let f = format_sig;
    let (intens, q_mu, e_mu) = match (&r.intensities, &r.observed) {
        (Some(x), Some(obs)) => (
            x.iter().map(|&v| f(v)).collect::<Vec<_>>().join(","),
            f(obs.gain.mu),
            f(obs.qber.mu),
        ),
        _ => (",,,".to_string(), String::new(), String::new()),
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        f(r.distance),
        r.train_len,
        f(r.delta),
        intens,
        q_mu,
        e_mu,
        f(r.yields.q0_lower),
        f(r.yields.q1_lower),
        f(r.yields.q2_lower),
        f(r.rate),
        r.rate_ratio.map(f).unwrap_or_default(),
        r.feasible,
    )
}

/// Writes the header and one line per record, in record order.
pub fn write_sweep<W: Write>(mut out: W, result: &SweepResult) -> io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for r in &result.records {
        writeln!(out, "{}", row(r))?;
    }
    out.flush()
}
