//! GLLP key rate with worst-case single-photon bounds, optionally after
//! two-way B-step post-processing.

use crate::channel::LinkObservables;
use crate::error::{Error, Result};
use crate::qmath::h2;

/// Quantities tracked through post-processing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostProcState {
    /// Fraction of detections that came from single-photon pulses.
    pub omega: f64,
    pub e_signal: f64,
    /// Single-photon bit error rate.
    pub e1: f64,
    /// Single-photon phase error rate.
    pub ep: f64,
    /// Fraction of bits kept by the B steps so far.
    pub r_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRate {
    /// Formula value, possibly negative.
    pub raw: f64,
    /// `max(raw, 0)`.
    pub rate: f64,
}

impl KeyRate {
    fn from_raw(raw: f64) -> Self {
        Self {
            raw,
            rate: raw.max(0.0),
        }
    }

    pub const ZERO: Self = Self {
        raw: 0.0,
        rate: 0.0,
    };
}

/// Probability that a Poisson source of mean `mu` emits two or more photons.
pub fn p_multi(mu: f64) -> f64 {
    -(-mu).exp_m1() - mu * (-mu).exp()
}

/// Pessimistic split: every multi-photon pulse is detected and every error
/// sits on a single-photon detection.
pub fn worst_case_bounds(obs: &LinkObservables, mu: f64) -> Result<PostProcState> {
    let pm = p_multi(mu);
    let q1 = obs.q_signal - pm;
    if q1.is_nan() || q1 <= 0.0 {
        return Err(Error::NoSinglePhotonContribution {
            q_signal: obs.q_signal,
            p_multi: pm,
        });
    }
    let e1 = (obs.e_signal * obs.q_signal / q1).min(0.5);
    Ok(PostProcState {
        omega: q1 / obs.q_signal,
        e_signal: obs.e_signal,
        e1,
        ep: e1,
        r_b: 1.0,
    })
}

fn agreement(e: f64) -> f64 {
    e * e + (1.0 - e) * (1.0 - e)
}

/// One round of parity sifting; all fields update from the old values.
pub fn bstep(s: &PostProcState) -> PostProcState {
    let d1 = agreement(s.e1);
    let ds = agreement(s.e_signal);
    PostProcState {
        omega: s.omega * s.omega * d1 / ds,
        e_signal: s.e_signal * s.e_signal / ds,
        e1: s.e1 * s.e1 / d1,
        ep: 2.0 * s.ep * (1.0 - s.e1 - s.ep) / d1,
        r_b: s.r_b * ds / 2.0,
    }
}

/// `½ r_B Q [−f H2(E) + Ω (1 − H2(e_p))]`.
///
/// `q_signal` is the gain before any B step.
pub fn gllp_rate(q_signal: f64, s: &PostProcState, f_ec: f64) -> Result<KeyRate> {
    let ec = f_ec * h2(s.e_signal.clamp(0.0, 1.0))?;
    let pa = s.omega * (1.0 - h2(s.ep.clamp(0.0, 1.0))?);
    Ok(KeyRate::from_raw(0.5 * s.r_b * q_signal * (pa - ec)))
}

/// Bounds, `n_bsteps` B steps, then the GLLP rate. No provable single-photon
/// contribution means zero key.
pub fn run_post(obs: &LinkObservables, mu: f64, f_ec: f64, n_bsteps: usize) -> Result<KeyRate> {
    let mut s = match worst_case_bounds(obs, mu) {
        Ok(s) => s,
        Err(Error::NoSinglePhotonContribution { .. }) => return Ok(KeyRate::ZERO),
        Err(e) => return Err(e),
    };
    for _ in 0..n_bsteps {
        s = bstep(&s);
    }
    gllp_rate(obs.q_signal, &s, f_ec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(omega: f64, e: f64, e1: f64, ep: f64, r_b: f64) -> PostProcState {
        PostProcState {
            omega,
            e_signal: e,
            e1,
            ep,
            r_b,
        }
    }

    #[test]
    fn multi_photon_probability() {
        let mu: f64 = 8e-4;
        let direct = 1.0 - (-mu).exp() - mu * (-mu).exp();
        assert!((p_multi(mu) - direct).abs() < 1e-15);
        let series = mu * mu / 2.0 - mu.powi(3) / 3.0 + mu.powi(4) / 8.0;
        assert!((p_multi(mu) - series).abs() < 1e-16);
        assert!((p_multi(mu) - 3.198e-7).abs() < 1e-10);
    }

    #[test]
    fn bounds() {
        let obs = LinkObservables {
            q_signal: 1e-3,
            e_signal: 0.03,
        };
        let s = worst_case_bounds(&obs, 1e-12).unwrap();
        assert!((s.omega - 1.0).abs() < 1e-9);
        assert!((s.e1 - 0.03).abs() < 1e-9);
        assert_eq!(s.ep, s.e1);
        assert_eq!(s.r_b, 1.0);

        let edge = LinkObservables {
            q_signal: p_multi(8e-4),
            e_signal: 0.1,
        };
        assert!(matches!(
            worst_case_bounds(&edge, 8e-4),
            Err(Error::NoSinglePhotonContribution { .. })
        ));
        assert_eq!(run_post(&edge, 8e-4, 1.16, 0).unwrap(), KeyRate::ZERO);
    }

    #[test]
    fn bstep_examples() {
        let s = bstep(&state(0.7, 0.0, 0.0, 0.0, 1.0));
        assert_eq!(s.omega, 0.7 * 0.7);
        assert_eq!((s.e_signal, s.e1, s.ep, s.r_b), (0.0, 0.0, 0.0, 0.5));

        let s = bstep(&state(1.0, 0.2, 0.5, 0.5, 1.0));
        assert_eq!(s.e1, 0.5);
        assert_eq!(s.ep, 0.0);

        let s = bstep(&state(0.9, 0.1, 0.1, 0.1, 1.0));
        // 0.1² + 0.9² = 0.82 for every denominator.
        assert!((s.omega - 0.81).abs() < 1e-15);
        assert!((s.e_signal - 0.01 / 0.82).abs() < 1e-15);
        assert!((s.e1 - 0.01 / 0.82).abs() < 1e-15);
        assert!((s.ep - 0.16 / 0.82).abs() < 1e-15);
        assert!((s.r_b - 0.41).abs() < 1e-15);
    }

    #[test]
    fn rate_examples() {
        let s = state(1.0, 0.0, 0.0, 0.0, 1.0);
        assert_eq!(gllp_rate(2e-3, &s, 1.0).unwrap().raw, 1e-3);
        let bad = state(1.0, 0.2, 0.2, 0.2, 1.0);
        let r = gllp_rate(1.0, &bad, 1.0).unwrap();
        assert!(r.raw < 0.0);
        assert_eq!(r.rate, 0.0);
    }

    #[test]
    fn single_photon_threshold_near_eleven_percent() {
        let rate = |e: f64| gllp_rate(1.0, &state(1.0, e, e, e, 1.0), 1.0).unwrap().raw;
        let (mut lo, mut hi) = (0.05, 0.2);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if rate(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 0.110).abs() < 1e-3, "{lo}");
    }

    #[test]
    fn zero_bsteps_is_plain_gllp() {
        let obs = LinkObservables {
            q_signal: 1e-5,
            e_signal: 0.04,
        };
        let s = worst_case_bounds(&obs, 8e-4).unwrap();
        assert_eq!(
            run_post(&obs, 8e-4, 1.16, 0).unwrap(),
            gllp_rate(obs.q_signal, &s, 1.16).unwrap()
        );
    }

    #[test]
    fn rate_monotone_on_grid() {
        for i in 0..=20 {
            for j in 0..20 {
                let e = 0.025 * i as f64;
                let ep = 0.025 * j as f64;
                let base = gllp_rate(1e-4, &state(0.8, e, 0.1, ep, 1.0), 1.16)
                    .unwrap()
                    .raw;
                let more_ep = gllp_rate(1e-4, &state(0.8, e, 0.1, ep + 0.025, 1.0), 1.16)
                    .unwrap()
                    .raw;
                assert!(more_ep <= base + 1e-18);
                if i < 20 {
                    let more_e = gllp_rate(1e-4, &state(0.8, e + 0.025, 0.1, ep, 1.0), 1.16)
                        .unwrap()
                        .raw;
                    assert!(more_e <= base + 1e-18);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn bstep_stays_in_unit_box(
            omega in 0.0f64..=1.0,
            e_multi in 0.0f64..=0.5,
            e1 in 0.0f64..=0.5,
            ep in 0.0f64..=0.5,
            r_b in 0.0f64..=1.0,
        ) {
            // The overall error rate mixes single- and multi-photon errors.
            let e = omega * e1 + (1.0 - omega) * e_multi;
            let s = bstep(&state(omega, e, e1, ep, r_b));
            for v in [s.omega, s.e_signal, s.e1, s.ep, s.r_b] {
                prop_assert!((0.0..=1.0 + 1e-15).contains(&v), "{v}");
            }
            prop_assert!(s.e_signal <= e);
            prop_assert!(s.r_b <= 0.5 * r_b);
        }

        #[test]
        fn retained_fraction_after_k_steps(e in 0.0f64..=0.5, e1 in 0.0f64..=0.5, k in 1usize..6) {
            let mut s = state(0.9, e, e1, e1, 1.0);
            let mut product = 1.0;
            for _ in 0..k {
                product *= agreement(s.e_signal) / 2.0;
                s = bstep(&s);
            }
            prop_assert!((s.r_b - product).abs() <= 1e-15);
            prop_assert!(s.r_b <= 0.5f64.powi(k as i32) + 1e-15);
        }
    }
}
