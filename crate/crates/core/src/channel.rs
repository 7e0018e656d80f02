//! Weak-coherent-source link model: Poisson source, lossy fiber, threshold
//! detectors with dark counts.

use crate::error::{check_probability, check_range, Error, Result};

/// Tolerance when `p_dark` is given both directly and via `p_detector`.
pub const DARK_COUNT_AGREEMENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Fiber loss in dB/km.
    pub alpha: f64,
    pub length_km: f64,
    pub eta_bob: f64,
    pub e_detector: f64,
    /// System dark-count probability (either detector fires spuriously).
    pub p_dark: f64,
    pub mu: f64,
    /// Error-correction inefficiency.
    pub f_ec: f64,
}

/// α = 0.21 dB/km, η_Bob = 0.08, e_detector = 0, p_dark = 1e-7, f = 1.16,
/// μ = 8e-4, at zero distance.
impl Default for SystemParams {
    fn default() -> Self {
        Self {
            alpha: 0.21,
            length_km: 0.0,
            eta_bob: 0.08,
            e_detector: 0.0,
            p_dark: 1e-7,
            mu: 8e-4,
            f_ec: 1.16,
        }
    }
}

impl SystemParams {
    pub fn at_length(mut self, length_km: f64) -> Self {
        self.length_km = length_km;
        self
    }

    pub fn validate(&self) -> Result<Self> {
        check_range("alpha", self.alpha, 0.0, f64::INFINITY, ">= 0")?;
        check_range("length_km", self.length_km, 0.0, f64::INFINITY, ">= 0")?;
        check_probability("eta_bob", self.eta_bob)?;
        check_probability("e_detector", self.e_detector)?;
        check_probability("p_dark", self.p_dark)?;
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::OutOfRange {
                name: "mu",
                value: self.mu,
                expected: "> 0",
            });
        }
        check_range("f_ec", self.f_ec, 1.0, f64::INFINITY, ">= 1")?;
        Ok(*self)
    }
}

/// System dark-count probability from the per-detector one: exactly one of
/// the two detectors fires, `2p(1 − p)`.
pub fn dark_from_detector(p_detector: f64) -> Result<f64> {
    check_probability("p_detector", p_detector)?;
    Ok(2.0 * p_detector * (1.0 - p_detector))
}

/// Settle `p_dark` from whichever of the two inputs were supplied.
pub fn resolve_dark_count(p_dark: Option<f64>, p_detector: Option<f64>) -> Result<Option<f64>> {
    match (p_dark, p_detector) {
        (None, None) => Ok(None),
        (Some(p), None) => check_probability("p_dark", p).map(Some),
        (None, Some(d)) => dark_from_detector(d).map(Some),
        (Some(p), Some(d)) => {
            let derived = dark_from_detector(d)?;
            if (p - derived).abs() > DARK_COUNT_AGREEMENT {
                Err(Error::DarkCountMismatch { p_dark: p, derived })
            } else {
                Ok(Some(p))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkObservables {
    /// Overall gain.
    pub q_signal: f64,
    /// Overall QBER.
    pub e_signal: f64,
}

/// `10^(−α l / 10) · η_Bob`.
pub fn overall_eta(p: &SystemParams) -> f64 {
    10f64.powf(-p.alpha * p.length_km / 10.0) * p.eta_bob
}

/// Probability that at least one of `n` photons survives: `1 − (1 − η)^n`.
pub fn eta_n(eta: f64, n: u32) -> f64 {
    1.0 - (1.0 - eta).powi(n as i32)
}

/// Yield `Y_n` and error rate `e_n` of an `n`-photon pulse without Eve.
pub fn normal_yield_error(p: &SystemParams, n: u32) -> (f64, f64) {
    let en = eta_n(overall_eta(p), n);
    let y = p.p_dark * (1.0 - en) + en;
    let e = (0.5 * p.p_dark * (1.0 - en) + en * p.e_detector) / y;
    (y, e)
}

/// Gain and QBER averaged over the Poisson photon-number distribution.
pub fn normal_observables(p: &SystemParams) -> LinkObservables {
    let x = p.mu * overall_eta(p);
    let survive = (-x).exp();
    let detected = -(-x).exp_m1();
    let q = p.p_dark * survive + detected;
    let eq = 0.5 * p.p_dark * survive + detected * p.e_detector;
    LinkObservables {
        q_signal: q,
        e_signal: eq / q,
    }
}
