use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qmath::PlaneState;

use super::ensemble::{EfficiencyProfile, RemappedEnsemble, Resend, ResendSpec};
use super::penalty::{build_penalty_bb84, build_penalty_sarg04, PenaltyPair};
use super::solver::{min_qber, pair_optimum, AttackSolution};

/// Points of the coarse resend-angle grid over `[0, 2π)`.
pub const RESEND_GRID: usize = 720;
/// Width at which the golden-section refinement stops.
pub const RESEND_REFINE_TOL: f64 = 1e-6;
/// Smallest δ on the default grid; stands in for the δ → 0⁺ limit.
pub const DELTA_MIN: f64 = 1e-3;
pub const DEFAULT_GRID_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Bb84,
    Sarg04,
}

impl Protocol {
    pub fn penalty(
        &self,
        ens: &RemappedEnsemble,
        resend: PlaneState,
        prof: EfficiencyProfile,
    ) -> PenaltyPair {
        match self {
            Protocol::Bb84 => build_penalty_bb84(ens, resend, prof),
            Protocol::Sarg04 => build_penalty_sarg04(ens, resend, prof),
        }
    }

    /// Fake-signal resend for outcome 0 when the detectors are mismatched.
    ///
    /// BB84: `|−⟩` timed for the bit-0 detector. SARG04: `|0_x⟩` timed for the
    /// bit-0 detector. Outcome 3 uses the mirror image.
    pub fn fake_signal_template(&self, mismatch: f64) -> Result<Resend> {
        let prof = EfficiencyProfile::favor_zero(mismatch)?;
        let state = match self {
            Protocol::Bb84 => PlaneState::one_x(),
            Protocol::Sarg04 => PlaneState::zero_x(),
        };
        Ok(Resend::new(state, prof))
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Bb84 => "bb84",
            Protocol::Sarg04 => "sarg04",
        })
    }
}

impl FromStr for Protocol {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bb84" => Ok(Protocol::Bb84),
            "sarg04" => Ok(Protocol::Sarg04),
            other => Err(format!(
                "unknown protocol `{other}` (expected bb84 or sarg04)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResendMode {
    /// Nominal protocol states (or the fake-signal template under mismatch).
    Fixed,
    /// Resend state and arrival time optimised too.
    Optimized,
}

impl FromStr for ResendMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fixed" => Ok(ResendMode::Fixed),
            "optimized" => Ok(ResendMode::Optimized),
            other => Err(format!(
                "unknown mode `{other}` (expected fixed or optimized)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub delta: f64,
    pub qber: f64,
    pub conclusive_prob: f64,
    pub transmittance: f64,
}

/// `n` uniform points on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// 200 uniform points on `[1e-3, π/2]`.
pub fn default_delta_grid() -> Vec<f64> {
    uniform_grid(DELTA_MIN, FRAC_PI_2, DEFAULT_GRID_POINTS)
}

fn check_mismatch(mismatch: f64) -> Result<f64> {
    if mismatch.is_finite() && mismatch > 0.0 && mismatch <= 1.0 {
        Ok(mismatch)
    } else {
        Err(Error::OutOfRange {
            name: "mismatch",
            value: mismatch,
            expected: "in (0, 1]",
        })
    }
}

/// Resend plan for the fixed-state curves.
pub fn fixed_resend_spec(protocol: Protocol, mismatch: f64) -> Result<ResendSpec> {
    check_mismatch(mismatch)?;
    if mismatch == 1.0 {
        Ok(ResendSpec::nominal())
    } else {
        Ok(ResendSpec::mirrored_pair(
            protocol.fake_signal_template(mismatch)?,
        ))
    }
}

/// Best single resend found by the angle search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResendSearch {
    pub resend: Resend,
    pub ratio: f64,
}

fn resend_ratio(
    protocol: Protocol,
    ens: &RemappedEnsemble,
    theta: f64,
    prof: EfficiencyProfile,
) -> f64 {
    let pair = protocol.penalty(ens, PlaneState::new(theta), prof);
    match pair_optimum(&pair) {
        Ok(Some((r, _))) => r,
        _ => f64::INFINITY,
    }
}

/// Minimise the per-outcome QBER over the resent state for one arrival-time
/// profile: a uniform grid of [`RESEND_GRID`] angles, then golden-section
/// refinement inside the neighbouring grid cells. Ties keep the smaller angle.
pub fn best_resend(
    protocol: Protocol,
    ens: &RemappedEnsemble,
    prof: EfficiencyProfile,
) -> ResendSearch {
    let step = TAU / RESEND_GRID as f64;
    let mut best_theta = 0.0;
    let mut best = f64::INFINITY;
    for i in 0..RESEND_GRID {
        let theta = i as f64 * step;
        let r = resend_ratio(protocol, ens, theta, prof);
        if r < best {
            best = r;
            best_theta = theta;
        }
    }

    let f = |t: f64| resend_ratio(protocol, ens, t, prof);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (best_theta - step, best_theta + step);
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > RESEND_REFINE_TOL {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = f(x2);
        }
    }
    let refined = 0.5 * (lo + hi);
    let refined_ratio = f(refined);
    if refined_ratio < best {
        best = refined_ratio;
        best_theta = refined;
    }
    ResendSearch {
        resend: Resend::new(PlaneState::new(best_theta), prof),
        ratio: best,
    }
}

/// Best resend over every arrival-time profile allowed for `mismatch`.
pub fn best_resend_any_profile(
    protocol: Protocol,
    ens: &RemappedEnsemble,
    mismatch: f64,
) -> Result<ResendSearch> {
    let mut best: Option<ResendSearch> = None;
    for prof in EfficiencyProfile::search_set(check_mismatch(mismatch)?)? {
        let cand = best_resend(protocol, ens, prof);
        if best.is_none_or(|b| cand.ratio < b.ratio) {
            best = Some(cand);
        }
    }
    best.ok_or(Error::Empty("profile search set"))
}

/// Build the penalty pairs for a resend plan and solve. POVM element
/// outcomes are reported with the plan's outcome labels.
pub fn solve(
    protocol: Protocol,
    ens: &RemappedEnsemble,
    spec: &ResendSpec,
) -> Result<AttackSolution> {
    let (labels, pairs): (Vec<usize>, Vec<PenaltyPair>) = spec
        .active()
        .map(|(i, r)| (i, protocol.penalty(ens, r.state, r.profile)))
        .unzip();
    let mut sol = min_qber(ens, &pairs)?;
    for m in &mut sol.povm {
        m.outcome = labels[m.outcome];
    }
    for (i, _) in &mut sol.outcome_ratios {
        *i = labels[*i];
    }
    Ok(sol)
}

/// Resend plan used by one point of a curve.
pub fn curve_resend_spec(
    protocol: Protocol,
    mode: ResendMode,
    mismatch: f64,
    ens: &RemappedEnsemble,
) -> Result<ResendSpec> {
    match mode {
        ResendMode::Fixed => fixed_resend_spec(protocol, mismatch),
        ResendMode::Optimized => {
            let best = best_resend_any_profile(protocol, ens, mismatch)?;
            Ok(ResendSpec::mirrored_pair(best.resend))
        }
    }
}

pub fn solve_point(
    protocol: Protocol,
    mode: ResendMode,
    mismatch: f64,
    delta: f64,
) -> Result<AttackSolution> {
    let ens = RemappedEnsemble::new(delta)?;
    let spec = curve_resend_spec(protocol, mode, mismatch, &ens)?;
    solve(protocol, &ens, &spec)
}

/// Minimum QBER (with conclusive probability and transmittance) along a δ grid.
pub fn optimal_curve(
    protocol: Protocol,
    mode: ResendMode,
    mismatch: f64,
    grid: &[f64],
) -> Result<Vec<CurvePoint>> {
    if grid.is_empty() {
        return Err(Error::Empty("delta grid"));
    }
    check_mismatch(mismatch)?;
    grid.par_iter()
        .map(|&delta| {
            let sol = solve_point(protocol, mode, mismatch, delta)?;
            Ok(CurvePoint {
                delta,
                qber: sol.qber,
                conclusive_prob: sol.conclusive_prob,
                transmittance: sol.transmittance,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = default_delta_grid();
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 1e-3);
        assert_eq!(*g.last().unwrap(), FRAC_PI_2);
        assert!(uniform_grid(0.0, 1.0, 0).is_empty());
    }

    #[test]
    fn empty_grid_rejected() {
        assert_eq!(
            optimal_curve(Protocol::Bb84, ResendMode::Fixed, 1.0, &[]).unwrap_err(),
            Error::Empty("delta grid")
        );
        assert!(optimal_curve(Protocol::Bb84, ResendMode::Fixed, 0.0, &[0.5]).is_err());
    }

    #[test]
    fn fixed_curve_prefers_zero_z_and_one_x() {
        let ens = RemappedEnsemble::new(0.6).unwrap();
        let sol = solve(Protocol::Bb84, &ens, &ResendSpec::nominal()).unwrap();
        let outcomes: Vec<_> = sol.povm.iter().map(|m| m.outcome).collect();
        assert_eq!(outcomes, vec![0, 3]);
    }

    #[test]
    fn optimized_never_worse_than_fixed() {
        for protocol in [Protocol::Bb84, Protocol::Sarg04] {
            for m in [1.0, 0.08] {
                for d in [1e-3, 0.3, 1.0, FRAC_PI_2] {
                    let fixed = solve_point(protocol, ResendMode::Fixed, m, d).unwrap().qber;
                    let opt = solve_point(protocol, ResendMode::Optimized, m, d)
                        .unwrap()
                        .qber;
                    assert!(
                        opt <= fixed + 1e-12,
                        "{protocol} m={m} d={d}: {opt} > {fixed}"
                    );
                }
            }
        }
    }

    #[test]
    fn mismatch_never_hurts_optimized() {
        for protocol in [Protocol::Bb84, Protocol::Sarg04] {
            for d in [1e-3, 0.5, 1.2, FRAC_PI_2] {
                let none = solve_point(protocol, ResendMode::Optimized, 1.0, d)
                    .unwrap()
                    .qber;
                let some = solve_point(protocol, ResendMode::Optimized, 0.08, d)
                    .unwrap()
                    .qber;
                assert!(some <= none + 1e-12);
            }
        }
    }

    #[test]
    fn bb84_endpoints() {
        let cases = [
            (ResendMode::Fixed, 1.0, 1e-3, 0.155),
            (ResendMode::Optimized, 1.0, 1e-3, 0.146),
            (ResendMode::Fixed, 0.08, 1e-3, 0.101),
            (ResendMode::Optimized, 0.08, 1e-3, 0.0579),
            (ResendMode::Fixed, 0.08, FRAC_PI_2, 0.123),
            (ResendMode::Optimized, 0.08, FRAC_PI_2, 0.0982),
        ];
        for (mode, m, d, want) in cases {
            let got = solve_point(Protocol::Bb84, mode, m, d).unwrap().qber;
            assert!((got - want).abs() < 0.002, "{mode:?} m={m} d={d}: {got}");
        }
    }

    #[test]
    fn sarg04_symmetric_point_is_one_third() {
        let ens = RemappedEnsemble::new(FRAC_PI_2).unwrap();
        let pair = Protocol::Sarg04.penalty(&ens, PlaneState::bb84(0), EfficiencyProfile::normal());
        let (ratio, _) = pair_optimum(&pair).unwrap().unwrap();
        assert!((ratio - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn parse_names() {
        assert_eq!("bb84".parse::<Protocol>().unwrap(), Protocol::Bb84);
        assert_eq!("sarg04".parse::<Protocol>().unwrap(), Protocol::Sarg04);
        assert!("e91".parse::<Protocol>().is_err());
        assert_eq!(
            "optimized".parse::<ResendMode>().unwrap(),
            ResendMode::Optimized
        );
    }
}
