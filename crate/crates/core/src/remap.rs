//! How Eve induces the phase step δ in the two bidirectional architectures.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{check_range, Error, Result};

/// Speed of light in vacuum, m/s.
pub const LIGHT_SPEED: f64 = 2.997_924_58e8;

/// Sagnac loop with an asymmetrically placed acousto-optic modulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SagnacParams {
    pub refractive_index: f64,
    /// `L2 - L1` in meters.
    pub fiber_length_diff: f64,
    /// AOM driving frequency in Hz.
    pub aom_freq: f64,
}

impl SagnacParams {
    pub fn new(refractive_index: f64, fiber_length_diff: f64, aom_freq: f64) -> Result<Self> {
        check_range(
            "refractive_index",
            refractive_index,
            1.0,
            f64::INFINITY,
            ">= 1",
        )?;
        check_range(
            "fiber_length_diff",
            fiber_length_diff,
            0.0,
            f64::INFINITY,
            ">= 0",
        )?;
        if !(aom_freq.is_finite() && aom_freq > 0.0) {
            return Err(Error::OutOfRange {
                name: "aom_freq",
                value: aom_freq,
                expected: "> 0",
            });
        }
        Ok(Self {
            refractive_index,
            fiber_length_diff,
            aom_freq,
        })
    }
}

/// Relative phase between the two counter-propagating pulses, `2π n ΔL f / C`.
pub fn sagnac_phase(p: &SagnacParams) -> f64 {
    2.0 * PI * p.refractive_index * p.fiber_length_diff * p.aom_freq / LIGHT_SPEED
}

/// One edge of the plug & play phase modulator drive, modelled as an ideal
/// linear ramp from zero to `nominal_phase` over `rise_time`.
///
/// `time_shift` is the pulse arrival time measured from the start of the
/// ramp; pulses are points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulatorEdge {
    pub rise_time: f64,
    pub nominal_phase: f64,
    pub time_shift: f64,
}

impl ModulatorEdge {
    pub fn new(rise_time: f64, nominal_phase: f64, time_shift: f64) -> Result<Self> {
        if !(rise_time.is_finite() && rise_time > 0.0) {
            return Err(Error::OutOfRange {
                name: "rise_time",
                value: rise_time,
                expected: "> 0",
            });
        }
        let k = nominal_phase / FRAC_PI_2;
        if !(0.0..=3.0).contains(&k) || (k - k.round()).abs() > 1e-9 {
            return Err(Error::OutOfRange {
                name: "nominal_phase",
                value: nominal_phase,
                expected: "one of 0, π/2, π, 3π/2",
            });
        }
        if !time_shift.is_finite() {
            return Err(Error::OutOfRange {
                name: "time_shift",
                value: time_shift,
                expected: "finite",
            });
        }
        Ok(Self {
            rise_time,
            nominal_phase,
            time_shift,
        })
    }

    /// Fraction of the ramp completed when the pulse passes, clamped to `[0, 1]`.
    pub fn ramp_fraction(&self) -> f64 {
        (self.time_shift / self.rise_time).clamp(0.0, 1.0)
    }
}

pub fn plugplay_phase(e: &ModulatorEdge) -> f64 {
    e.nominal_phase * e.ramp_fraction()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sagnac_examples() {
        let zero = SagnacParams::new(1.5, 0.0, 1e8).unwrap();
        assert_eq!(sagnac_phase(&zero), 0.0);

        let p = SagnacParams::new(1.5, 1.0, 1e8).unwrap();
        let phase = sagnac_phase(&p);
        assert!((phase - 3.143_767_532_927_522_5).abs() < 1e-12);
        assert!((phase / PI - 1.000_692_285_594_456_2).abs() < 1e-12);

        let doubled = SagnacParams::new(1.5, 1.0, 2e8).unwrap();
        assert!((sagnac_phase(&doubled) - 2.0 * phase).abs() < 1e-12);
    }

    #[test]
    fn sagnac_rejects_bad_params() {
        assert!(SagnacParams::new(0.9, 1.0, 1e8).is_err());
        assert!(SagnacParams::new(1.5, -1.0, 1e8).is_err());
        assert!(SagnacParams::new(1.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn plugplay_examples() {
        let rise = 1e-9;
        let past = ModulatorEdge::new(rise, FRAC_PI_2, 3e-9).unwrap();
        assert_eq!(plugplay_phase(&past), FRAC_PI_2);

        let mid = ModulatorEdge::new(rise, FRAC_PI_2, 0.5 * rise).unwrap();
        assert!((plugplay_phase(&mid) - PI / 4.0).abs() < 1e-15);

        let tenth = ModulatorEdge::new(rise, FRAC_PI_2, 0.1 * rise).unwrap();
        assert!((plugplay_phase(&tenth) - PI / 20.0).abs() < 1e-15);

        let early = ModulatorEdge::new(rise, PI, -1e-9).unwrap();
        assert_eq!(plugplay_phase(&early), 0.0);
    }

    #[test]
    fn plugplay_rejects_bad_edges() {
        assert!(ModulatorEdge::new(0.0, FRAC_PI_2, 0.0).is_err());
        assert!(ModulatorEdge::new(1e-9, 1.0, 0.0).is_err());
        assert!(ModulatorEdge::new(1e-9, 2.0 * PI, 0.0).is_err());
        assert!(ModulatorEdge::new(1e-9, 1.5 * PI, 0.0).is_ok());
    }

    proptest! {
        #[test]
        fn sagnac_is_linear(n in 1.0f64..2.0, dl in 0.0f64..10.0, f in 1e6f64..1e9, k in 0.1f64..10.0) {
            let base = sagnac_phase(&SagnacParams::new(n, dl, f).unwrap());
            let sn = sagnac_phase(&SagnacParams::new(n * k.max(1.0), dl, f).unwrap());
            let sl = sagnac_phase(&SagnacParams::new(n, dl * k, f).unwrap());
            let sf = sagnac_phase(&SagnacParams::new(n, dl, f * k).unwrap());
            let tol = 1e-12 * (1.0 + base.abs() * k);
            prop_assert!((sn - base * k.max(1.0)).abs() < tol);
            prop_assert!((sl - base * k).abs() < tol);
            prop_assert!((sf - base * k).abs() < tol);
        }

        #[test]
        fn plugplay_bounded_and_monotone(k in 0usize..4, t1 in -2.0f64..3.0, dt in 0.0f64..2.0) {
            let nominal = k as f64 * FRAC_PI_2;
            let a = plugplay_phase(&ModulatorEdge::new(1.0, nominal, t1).unwrap());
            let b = plugplay_phase(&ModulatorEdge::new(1.0, nominal, t1 + dt).unwrap());
            prop_assert!(a >= 0.0 && a <= nominal);
            prop_assert!(b >= a);
        }
    }
}
