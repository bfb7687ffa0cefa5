//! Fiber channel and detector model: observed gains and QBERs, and the
//! photon-number-resolved yields consistent with them.

use crate::error::{Error, Result};
use crate::math::Probability;
use crate::source::{PerSource, SourceEnsemble};

/// Per-pulse dark count probability of the default detector.
pub const STANDARD_BASE_DARK: f64 = 1.7e-6;

/// Detector and fiber parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Dark count probability per pulse-train, `p_d`.
    pub dark_rate: f64,
    /// Misalignment error probability, `e_d`.
    pub misalignment: f64,
    /// Error probability of background counts, `e_0`.
    pub background_error: f64,
    /// Bob's detector efficiency, `eta_B`.
    pub detector_eff: f64,
    /// Fiber loss in dB/km.
    pub loss_coeff: f64,
    /// Fiber length in km.
    pub distance: f64,
    /// Pulses per train, `L`.
    pub train_len: u32,
    /// Error-correction inefficiency, `f`.
    pub corr_eff: f64,
}

/// Channel parameters with the train length and distance left open. The
/// dark count probability per train is `base_dark * L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTemplate {
    pub base_dark: f64,
    pub misalignment: f64,
    pub background_error: f64,
    pub detector_eff: f64,
    pub loss_coeff: f64,
    pub corr_eff: f64,
}

impl ChannelTemplate {
    pub const STANDARD: ChannelTemplate = ChannelTemplate {
        base_dark: STANDARD_BASE_DARK,
        misalignment: 0.033,
        background_error: 0.5,
        detector_eff: 0.045,
        loss_coeff: 0.2,
        corr_eff: 1.16,
    };

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "table1" => Ok(Self::STANDARD),
            other => Err(Error::Domain(format!("unknown channel preset '{other}'"))),
        }
    }

    pub fn params(&self, train_len: u32, distance: f64) -> Result<ChannelParams> {
        let params = ChannelParams {
            dark_rate: self.base_dark * train_len as f64,
            misalignment: self.misalignment,
            background_error: self.background_error,
            detector_eff: self.detector_eff,
            loss_coeff: self.loss_coeff,
            distance,
            train_len,
            corr_eff: self.corr_eff,
        };
        params.validate()?;
        Ok(params)
    }
}

impl ChannelParams {
    /// Default simulation parameters: `p_d = 1.7e-6 L`,
    /// `e_d = 3.3%`, `e_0 = 50%`, `eta_B = 4.5%`, 0.2 dB/km, `f = 1.16`.
    pub fn standard(train_len: u32, distance: f64) -> Result<Self> {
        ChannelTemplate::STANDARD.params(train_len, distance)
    }

    /// Looks up a named parameter preset.
    pub fn preset(name: &str, train_len: u32, distance: f64) -> Result<Self> {
        ChannelTemplate::preset(name)?.params(train_len, distance)
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("dark_rate", self.dark_rate),
            ("misalignment", self.misalignment),
            ("background_error", self.background_error),
            ("detector_eff", self.detector_eff),
        ];
        for (name, v) in probs {
            Probability::new(v).map_err(|_| Error::Domain(format!("{name} = {v} outside [0, 1]")))?;
        }
        if !(self.loss_coeff >= 0.0 && self.loss_coeff.is_finite()) {
            return Err(Error::Domain(format!("loss coefficient {} must be >= 0", self.loss_coeff)));
        }
        if !(self.distance >= 0.0 && self.distance.is_finite()) {
            return Err(Error::Domain(format!("distance {} must be >= 0", self.distance)));
        }
        if self.train_len < 2 {
            return Err(Error::Domain(format!("train length {} must be >= 2", self.train_len)));
        }
        if !(self.corr_eff >= 1.0 && self.corr_eff.is_finite()) {
            return Err(Error::Domain(format!("error-correction efficiency {} must be >= 1", self.corr_eff)));
        }
        Ok(())
    }

    pub fn at_distance(&self, distance: f64) -> Self {
        ChannelParams { distance, ..*self }
    }

    /// Overall detection efficiency `eta_t * eta_B`.
    pub fn total_efficiency(&self) -> f64 {
        transmittance(self) * self.detector_eff
    }
}

/// Fiber transmittance `10^(-alpha z / 10)`.
pub fn transmittance(params: &ChannelParams) -> f64 {
    10f64.powf(-params.loss_coeff * params.distance / 10.0)
}

fn check_intensity(x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("intensity {x} must be finite and >= 0")))
    }
}

/// Overall gain `1 - (1 - p_d) exp(-x eta)`.
pub fn gain(intensity: f64, params: &ChannelParams) -> Result<f64> {
    check_intensity(intensity)?;
    Ok(gain_unchecked(intensity, params.dark_rate, params.total_efficiency()))
}

pub(crate) fn gain_unchecked(x: f64, dark: f64, eta: f64) -> f64 {
    // 1 - (1 - pd) e^{-x eta} = pd + (1 - pd)(1 - e^{-x eta})
    dark + (1.0 - dark) * -(-x * eta).exp_m1()
}

fn error_gain(x: f64, params: &ChannelParams, eta: f64) -> f64 {
    let pd = params.dark_rate;
    params.misalignment * (1.0 - pd) * -(-x * eta).exp_m1() + params.background_error * pd
}

/// Overall QBER `[e_d (1 - p_d)(1 - exp(-x eta)) + e_0 p_d] / Q_x`.
pub fn qber(intensity: f64, params: &ChannelParams) -> Result<f64> {
    check_intensity(intensity)?;
    let eta = params.total_efficiency();
    let q = gain_unchecked(intensity, params.dark_rate, eta);
    if q <= 0.0 {
        return Err(Error::UndefinedQber);
    }
    Ok(error_gain(intensity, params, eta) / q)
}

/// Yield of a `k`-photon train, `1 - (1 - p_d)(1 - eta)^k`.
pub fn yield_k(k: u32, params: &ChannelParams) -> f64 {
    let eta = params.total_efficiency();
    let survive = (1.0 - params.dark_rate) * (1.0 - eta).powi(k as i32);
    1.0 - survive
}

/// Error-weighted yield `e_k Y_k = e_d (1 - p_d)(1 - (1 - eta)^k) + e_0 p_d`.
///
/// Its Poisson average reproduces the numerator of the overall QBER.
pub fn error_yield_k(k: u32, params: &ChannelParams) -> f64 {
    let eta = params.total_efficiency();
    let pd = params.dark_rate;
    params.misalignment * (1.0 - pd) * (1.0 - (1.0 - eta).powi(k as i32)) + params.background_error * pd
}

/// Gains and QBERs of the four sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedStats {
    pub gain: PerSource<f64>,
    pub qber: PerSource<f64>,
}

impl ObservedStats {
    /// Observables of a channel driven at the nominal intensities.
    pub fn simulate(ensemble: &SourceEnsemble, params: &ChannelParams) -> Result<Self> {
        let [mu, nu1, nu2, nu3] = ensemble.intensities();
        let intens = PerSource::new(mu, nu1, nu2, nu3);
        let eta = params.total_efficiency();
        let gain = intens.map(|&x| gain_unchecked(x, params.dark_rate, eta));
        let qber = PerSource::from_fn(|s| {
            let q = *gain.get(s);
            if q > 0.0 {
                error_gain(*intens.get(s), params, eta) / q
            } else {
                0.0
            }
        });
        Ok(ObservedStats { gain, qber })
    }

    /// Observations carrying only gains (QBER of the signal set explicitly).
    pub fn from_gains(gain: PerSource<f64>, signal_qber: f64) -> Self {
        ObservedStats {
            gain,
            qber: PerSource { mu: signal_qber, ..PerSource::default() },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard_16(z: f64) -> ChannelParams {
        ChannelParams::standard(16, z).unwrap()
    }

    #[test]
    fn standard_values() {
        let p = standard_16(30.0);
        assert_eq!(p.dark_rate, 1.7e-6 * 16.0);
        assert_eq!(p.misalignment, 0.033);
        assert_eq!(p.background_error, 0.5);
        assert_eq!(p.detector_eff, 0.045);
        assert_eq!(p.loss_coeff, 0.2);
        assert_eq!(p.corr_eff, 1.16);
        assert!(ChannelParams::preset("nope", 16, 0.0).is_err());
    }

    #[test]
    fn rejects_short_trains() {
        assert!(ChannelParams::standard(1, 0.0).is_err());
    }

    #[test]
    fn zero_length_fiber() {
        assert_eq!(transmittance(&standard_16(0.0)), 1.0);
    }

    #[test]
    fn fifty_km_is_ten_db() {
        assert!((transmittance(&standard_16(50.0)) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn no_light_no_darks() {
        let p = ChannelParams { dark_rate: 0.0, ..standard_16(10.0) };
        assert_eq!(gain(0.0, &p).unwrap(), 0.0);
        assert_eq!(qber(0.0, &p), Err(Error::UndefinedQber));
    }

    #[test]
    fn darks_only() {
        let p = standard_16(10.0);
        assert_eq!(gain(0.0, &p).unwrap(), p.dark_rate);
        assert!((qber(0.0, &p).unwrap() - p.background_error).abs() < 1e-15);
    }

    #[test]
    fn qber_without_darks_is_misalignment() {
        let p = ChannelParams { dark_rate: 0.0, ..standard_16(25.0) };
        for x in [1e-3, 0.1, 0.5, 0.9] {
            assert!((qber(x, &p).unwrap() - p.misalignment).abs() < 1e-15);
        }
    }

    #[test]
    fn yields() {
        let p = standard_16(20.0);
        assert!((yield_k(0, &p) / p.dark_rate - 1.0).abs() < 1e-12);
        let perfect = ChannelParams { dark_rate: 0.0, detector_eff: 1.0, ..standard_16(0.0) };
        for k in 1..6 {
            assert_eq!(yield_k(k, &perfect), 1.0);
        }
    }

    #[test]
    fn negative_intensity_rejected() {
        assert!(gain(-0.1, &standard_16(0.0)).is_err());
        assert!(qber(-0.1, &standard_16(0.0)).is_err());
    }
}
