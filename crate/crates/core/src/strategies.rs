//! Attack strategies against a weak-coherent-source link.
//!
//! Eve intercepts every non-vacuum pulse, measures it with the optimal POVM
//! for the remapped ensemble, resends a single photon only for outcomes 0
//! and 3, and controls Bob's detectors (dark counts included). Every channel
//! built here is intercept-and-resend, so any positive GLLP rate computed from
//! its observables is a key Eve fully knows.
//!
//! The gain and QBER formulas carry no fiber-loss term, so strategy one and
//! two results do not depend on the link length.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::attack::{
    best_resend, fold_detector_error, solve, EfficiencyProfile, Protocol, RemappedEnsemble,
    ResendSpec,
};
use crate::channel::{normal_observables, LinkObservables, SystemParams};
use crate::error::{check_probability, Error, Result};
use crate::keyrate::{run_post, KeyRate};

pub const SECURITY_LABEL: &str = "INSECURE (entanglement-breaking channel)";

/// B steps Alice and Bob run against strategy one.
pub const STRATEGY_ONE_BSTEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyParams {
    pub delta: f64,
    /// `η_1(t_0) / η_0(t_0)`; 1 means no mismatch.
    pub mismatch: f64,
    /// Dark-count probability Eve imposes on Bob.
    pub y0: f64,
    /// Probability of resending after a conclusive result.
    pub gamma: f64,
}

impl StrategyParams {
    pub fn validate(&self) -> Result<Self> {
        RemappedEnsemble::new(self.delta)?;
        EfficiencyProfile::favor_zero(self.mismatch)?;
        check_probability("y0", self.y0)?;
        check_probability("gamma", self.gamma)?;
        Ok(*self)
    }
}

/// Single-photon attack summary plus the observables Bob sees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyOutcome {
    /// QBER of the resent photons.
    pub e1: f64,
    /// Probability that an intercepted pulse produces a click at Bob.
    pub c1: f64,
    pub observables: LinkObservables,
}

/// Gain and QBER when Eve resends with probability `resend_prob` per
/// non-vacuum pulse and Bob's dark-count probability is `y0`.
pub fn eve_observables(y0: f64, resend_prob: f64, e1: f64, mu: f64) -> LinkObservables {
    let vacuum = (-mu).exp();
    let nonvacuum = -(-mu).exp_m1();
    let c = resend_prob;
    let q = y0 * vacuum + (c + (1.0 - c) * y0) * nonvacuum;
    let eq = 0.5 * y0 * vacuum + (c * e1 + 0.5 * (1.0 - c) * y0) * nonvacuum;
    LinkObservables {
        q_signal: q,
        e_signal: eq / q,
    }
}

/// Nominal states `|0_z⟩` and `|1_x⟩` resent for outcomes 0 and 3 at the
/// normal arrival time. Eve's strong pulses make Bob's efficiency irrelevant,
/// so `C_1` is her conclusive probability.
pub fn strategy_one(p: &SystemParams, delta: f64) -> Result<StrategyOutcome> {
    let ens = RemappedEnsemble::new(delta)?;
    let spec = ResendSpec::nominal().restricted(&[0, 3])?;
    let sol = solve(Protocol::Bb84, &ens, &spec)?;
    let e1 = fold_detector_error(sol.qber, p.e_detector);
    let c1 = sol.conclusive_prob;
    Ok(StrategyOutcome {
        e1,
        c1,
        observables: eve_observables(p.p_dark, c1, e1, p.mu),
    })
}

/// Resend plan for strategies two and three: the best state time-shifted to
/// `t_0` for outcome 0, its mirror at `t_1` for outcome 3.
pub fn fake_signal_spec(ens: &RemappedEnsemble, mismatch: f64) -> Result<ResendSpec> {
    let prof = EfficiencyProfile::favor_zero(mismatch)?;
    Ok(ResendSpec::mirrored_pair(
        best_resend(Protocol::Bb84, ens, prof).resend,
    ))
}

/// Single-photon part of strategies two and three: `(e_1, C_1)` with
/// `C_1 = η_Bob Tr(M_0 B_0 + M_3 B_3) / 4`.
pub fn fake_signal_attack(p: &SystemParams, delta: f64, mismatch: f64) -> Result<(f64, f64)> {
    let ens = RemappedEnsemble::new(delta)?;
    let sol = solve(Protocol::Bb84, &ens, &fake_signal_spec(&ens, mismatch)?)?;
    Ok((
        fold_detector_error(sol.qber, p.e_detector),
        p.eta_bob * sol.click_prob,
    ))
}

/// Phase remapping combined with time-shifted fake signals.
pub fn strategy_two(p: &SystemParams, delta: f64, mismatch: f64) -> Result<StrategyOutcome> {
    let (e1, c1) = fake_signal_attack(p, delta, mismatch)?;
    Ok(StrategyOutcome {
        e1,
        c1,
        observables: eve_observables(p.p_dark, c1, e1, p.mu),
    })
}

/// Strategy two with Eve's own dark-count level and a thinned resend rate.
pub fn strategy_three(p: &SystemParams, sp: &StrategyParams) -> Result<StrategyOutcome> {
    sp.validate()?;
    let (e1, c1) = fake_signal_attack(p, sp.delta, sp.mismatch)?;
    Ok(strategy_three_from(p, sp, e1, c1))
}

fn strategy_three_from(p: &SystemParams, sp: &StrategyParams, e1: f64, c1: f64) -> StrategyOutcome {
    StrategyOutcome {
        e1,
        c1,
        observables: eve_observables(sp.y0, sp.gamma * c1, e1, p.mu),
    }
}

/// GLLP rate Alice and Bob would compute from `obs`.
pub fn apparent_rate(p: &SystemParams, obs: &LinkObservables, bsteps: usize) -> Result<KeyRate> {
    run_post(obs, p.mu, p.f_ec, bsteps)
}

pub fn strategy_one_rate(p: &SystemParams, delta: f64, bsteps: usize) -> Result<KeyRate> {
    apparent_rate(p, &strategy_one(p, delta)?.observables, bsteps)
}

fn relative_gap(x: f64, target: f64) -> f64 {
    ((x - target) / target).abs()
}

/// Both observables within `tol` relative error of `target`.
pub fn observables_match(obs: &LinkObservables, target: &LinkObservables, tol: f64) -> bool {
    relative_gap(obs.q_signal, target.q_signal) <= tol
        && relative_gap(obs.e_signal, target.e_signal) <= tol
}

pub const MATCH_DELTA_POINTS: usize = 150;
pub const MATCH_Y0_POINTS: usize = 81;
pub const MATCH_GAMMA_POINTS: usize = 101;
pub const MATCH_Y0_RANGE: (f64, f64) = (1e-10, 1e-6);

/// δ = kπ/300 for k = 1..=150.
pub fn match_delta_grid() -> Vec<f64> {
    (1..=MATCH_DELTA_POINTS)
        .map(|k| {
            if k == MATCH_DELTA_POINTS {
                FRAC_PI_2
            } else {
                k as f64 * PI / (2 * MATCH_DELTA_POINTS) as f64
            }
        })
        .collect()
}

pub fn match_y0_grid() -> Vec<f64> {
    let (lo, hi) = (MATCH_Y0_RANGE.0.log10(), MATCH_Y0_RANGE.1.log10());
    let n = MATCH_Y0_POINTS - 1;
    (0..=n)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / n as f64))
        .collect()
}

pub fn match_gamma_grid() -> Vec<f64> {
    let n = MATCH_GAMMA_POINTS - 1;
    (0..=n).map(|j| j as f64 / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub params: StrategyParams,
    pub outcome: StrategyOutcome,
    pub normal: LinkObservables,
    pub rate: KeyRate,
}

/// Search strategy-three parameters whose observables sit within `tol` of
/// the normal ones at `p.length_km`, keeping the one with the largest
/// apparent key rate (no B step). Ties go to the earliest grid point in
/// (δ, Y0, γ) order.
pub fn match_normal(p: &SystemParams, mismatch: f64, tol: f64) -> Result<MatchResult> {
    if !(tol.is_finite() && (0.0..1.0).contains(&tol)) {
        return Err(Error::OutOfRange {
            name: "tol",
            value: tol,
            expected: "in [0, 1)",
        });
    }
    EfficiencyProfile::favor_zero(mismatch)?;
    let normal = normal_observables(p);
    let y0s = match_y0_grid();
    let gammas = match_gamma_grid();

    let per_delta: Vec<Result<Option<MatchResult>>> = match_delta_grid()
        .into_par_iter()
        .map(|delta| {
            let (e1, c1) = fake_signal_attack(p, delta, mismatch)?;
            let mut best: Option<MatchResult> = None;
            for &y0 in &y0s {
                for &gamma in &gammas {
                    let params = StrategyParams {
                        delta,
                        mismatch,
                        y0,
                        gamma,
                    };
                    let outcome = strategy_three_from(p, &params, e1, c1);
                    if !observables_match(&outcome.observables, &normal, tol) {
                        continue;
                    }
                    let rate = apparent_rate(p, &outcome.observables, 0)?;
                    if best.is_none_or(|b| rate.raw > b.rate.raw) {
                        best = Some(MatchResult {
                            params,
                            outcome,
                            normal,
                            rate,
                        });
                    }
                }
            }
            Ok(best)
        })
        .collect();

    let mut best: Option<MatchResult> = None;
    for cand in per_delta {
        if let Some(c) = cand? {
            if best.is_none_or(|b| c.rate.raw > b.rate.raw) {
                best = Some(c);
            }
        }
    }
    best.ok_or(Error::Infeasible { tol })
}

/// Interval of δ on which `rate(δ)` is positive, located on `grid` and
/// refined by bisection. Assumes a single positive window.
pub fn positive_window<F>(grid: &[f64], rate: F) -> Result<Option<(f64, f64)>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let values: Vec<f64> = grid.par_iter().map(|&d| rate(d)).collect::<Result<_>>()?;
    let first = match values.iter().position(|&r| r > 0.0) {
        Some(i) => i,
        None => return Ok(None),
    };
    let last = values.iter().rposition(|&r| r > 0.0).unwrap_or(first);

    let bisect = |mut inside: f64, mut outside: f64| -> Result<f64> {
        for _ in 0..60 {
            let mid = 0.5 * (inside + outside);
            if rate(mid)? > 0.0 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(0.5 * (inside + outside))
    };
    let lo = if first == 0 {
        grid[0]
    } else {
        bisect(grid[first], grid[first - 1])?
    };
    let hi = if last + 1 == grid.len() {
        grid[last]
    } else {
        bisect(grid[last], grid[last + 1])?
    };
    Ok(Some((lo, hi)))
}

/// Window of δ where strategy one yields a positive apparent rate.
pub fn strategy_one_window(
    p: &SystemParams,
    grid: &[f64],
    bsteps: usize,
) -> Result<Option<(f64, f64)>> {
    positive_window(grid, |d| Ok(strategy_one_rate(p, d, bsteps)?.raw))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FakeSignalRow {
    pub mismatch: f64,
    pub delta: f64,
    pub rate: KeyRate,
    /// Rate of the same attack without phase remapping (δ = π/2).
    pub baseline: KeyRate,
}

/// Strategy-two rows: `(mismatch, δ)` pairs evaluated without B steps.
pub const FAKE_SIGNAL_ROWS: [(f64, f64); 3] = [(0.0667, 1.02), (0.04, 1.31), (0.03, 1.41)];

pub fn fake_signal_row(p: &SystemParams, mismatch: f64, delta: f64) -> Result<FakeSignalRow> {
    let rate = apparent_rate(p, &strategy_two(p, delta, mismatch)?.observables, 0)?;
    let baseline = apparent_rate(p, &strategy_two(p, FRAC_PI_2, mismatch)?.observables, 0)?;
    Ok(FakeSignalRow {
        mismatch,
        delta,
        rate,
        baseline,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedRow {
    pub length_km: f64,
    pub params: StrategyParams,
    pub outcome: StrategyOutcome,
    pub normal: LinkObservables,
    pub rate: KeyRate,
}

/// Strategy-three rows: `(length, mismatch, δ, Y0, γ)`.
pub const MATCHED_ROWS: [(f64, f64, f64, f64, f64); 2] = [
    (88.0, 0.04, 1.31, 1e-9, 0.096),
    (87.0, 0.03, 1.41, 1.8e-8, 0.1),
];

pub fn matched_row(p: &SystemParams, length_km: f64, params: StrategyParams) -> Result<MatchedRow> {
    let p = p.at_length(length_km);
    let outcome = strategy_three(&p, &params)?;
    Ok(MatchedRow {
        length_km,
        params,
        outcome,
        normal: normal_observables(&p),
        rate: apparent_rate(&p, &outcome.observables, 0)?,
    })
}
