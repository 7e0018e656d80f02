use crate::error::{Error, Result};
use crate::qmath::{eig_sym2, normalize, pinv_sqrt, trace_prod, SymOp2, Vec2, PINV_CUTOFF};

use super::ensemble::{EfficiencyProfile, RemappedEnsemble};
use super::penalty::{build_penalty_bb84, PenaltyPair};

/// Outcomes whose optimal ratio is within this distance of the global minimum
/// share the POVM.
pub const TIE_TOL: f64 = 1e-10;

/// One rank-one POVM element `weight · |direction⟩⟨direction|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PovmElement {
    pub outcome: usize,
    pub direction: Vec2,
    pub weight: f64,
}

impl PovmElement {
    pub fn operator(&self) -> SymOp2 {
        SymOp2::outer(self.direction).scale(self.weight)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSolution {
    /// Minimum QBER `e_1` of the intercept-and-resend attack.
    pub qber: f64,
    /// Conclusive elements; the vacuum element is `I − Σ M_i`.
    pub povm: Vec<PovmElement>,
    /// Probability that Eve resends, `Σ_i Tr(M_i Σ_k |φ̃_k⟩⟨φ̃_k|) / 4`.
    pub conclusive_prob: f64,
    /// Probability that a resent photon clicks at Bob, `Σ_i Tr(M_i B_i) / 4`.
    pub click_prob: f64,
    pub transmittance: f64,
    /// Best achievable ratio for every outcome that was offered, `(index, ratio)`.
    pub outcome_ratios: Vec<(usize, f64)>,
}

/// Minimum of `Tr(M L) / Tr(M B)` over rank-one `M`, and the minimising
/// direction. `None` when `B` vanishes.
///
/// With `|c⟩ = B^{1/2}|u⟩` the ratio is the Rayleigh quotient of
/// `B^{-1/2} L B^{-1/2}` on the range of `B`; its lowest eigenvector, mapped
/// back through `B^{-1/2}`, is the optimal direction.
pub fn pair_optimum(pair: &PenaltyPair) -> Result<Option<(f64, Vec2)>> {
    let eb = eig_sym2(pair.b);
    if eb.max <= PINV_CUTOFF {
        return Ok(None);
    }
    let direction = if eb.min > PINV_CUTOFF {
        let s = pinv_sqrt(pair.b, PINV_CUTOFF)?;
        let reduced = pair.l.sandwich(&s);
        normalize(s.apply(eig_sym2(reduced).v_min))
    } else {
        if eb.min < -crate::qmath::PSD_TOL {
            return Err(Error::NotPsd {
                min_eigenvalue: eb.min,
            });
        }
        // Rank one: the range of B is a single ray.
        eb.v_max
    };
    let ratio = pair.l.quad(direction) / pair.b.quad(direction);
    Ok(Some((ratio.max(0.0), direction)))
}

/// Minimise the QBER over POVMs whose element `i` triggers the resend
/// described by `pairs[i]`.
///
/// The global QBER is a mediant of per-element ratios, so it is minimised by
/// putting all weight on the element(s) with the smallest ratio. Tied
/// outcomes share a common scale, the largest one keeping `Σ M_i ≤ I`.
pub fn min_qber(ens: &RemappedEnsemble, pairs: &[PenaltyPair]) -> Result<AttackSolution> {
    if pairs.is_empty() {
        return Err(Error::Empty("no penalty pairs"));
    }
    let mut optima = Vec::with_capacity(pairs.len());
    for (i, pair) in pairs.iter().enumerate() {
        if let Some((ratio, dir)) = pair_optimum(pair)? {
            optima.push((i, ratio, dir));
        }
    }
    let qber = optima
        .iter()
        .map(|&(_, r, _)| r)
        .fold(f64::INFINITY, f64::min);
    if !qber.is_finite() {
        return Err(Error::ZeroGain);
    }
    let winners: Vec<_> = optima
        .iter()
        .filter(|&&(_, r, _)| r - qber <= TIE_TOL)
        .collect();
    let weight = max_common_scale(winners.iter().map(|&&(_, _, d)| d));
    let povm: Vec<PovmElement> = winners
        .iter()
        .map(|&&(outcome, _, direction)| PovmElement {
            outcome,
            direction,
            weight,
        })
        .collect();

    let uniform = ens.uniform_gain();
    let conclusive_prob = povm
        .iter()
        .map(|m| trace_prod(m.operator(), uniform))
        .sum::<f64>()
        / 4.0;
    let click_prob = povm
        .iter()
        .map(|m| trace_prod(m.operator(), pairs[m.outcome].b))
        .sum::<f64>()
        / 4.0;

    Ok(AttackSolution {
        qber: qber.min(1.0),
        povm,
        conclusive_prob,
        click_prob,
        transmittance: conclusive_prob,
        outcome_ratios: optima.iter().map(|&(i, r, _)| (i, r)).collect(),
    })
}

/// Largest `c` with `c Σ |d_i⟩⟨d_i| ≤ I`.
fn max_common_scale(directions: impl Iterator<Item = Vec2>) -> f64 {
    let total: SymOp2 = directions.map(SymOp2::outer).sum();
    let top = eig_sym2(total).max;
    if top > 0.0 {
        1.0 / top
    } else {
        0.0
    }
}

/// Conclusive probability of `solution`'s POVM directions rescaled to the
/// largest admissible common weight.
pub fn transmittance_at(ens: &RemappedEnsemble, solution: &AttackSolution) -> f64 {
    let weight = max_common_scale(solution.povm.iter().map(|m| m.direction));
    let uniform = ens.uniform_gain();
    solution
        .povm
        .iter()
        .map(|m| weight * uniform.quad(m.direction))
        .sum::<f64>()
        / 4.0
}

/// QBER of the explicit strategy `M_0 = |Ψ⟩⟨Ψ|` with `Ψ ⊥ |φ̃_2⟩`, all other
/// conclusive elements zero, and `|φ_0⟩` resent.
pub fn suboptimal_qber(delta: f64) -> Result<f64> {
    let ens = RemappedEnsemble::new(delta)?;
    let pair = build_penalty_bb84(
        &ens,
        crate::qmath::PlaneState::bb84(0),
        EfficiencyProfile::normal(),
    );
    let psi = crate::qmath::projector(ens.state(2).orthogonal());
    Ok(trace_prod(psi, pair.l) / trace_prod(psi, pair.b))
}

/// Fold an independent detector bit-flip probability into Eve's QBER.
pub fn fold_detector_error(e1: f64, e_detector: f64) -> f64 {
    e1 + (1.0 - 2.0 * e1) * e_detector
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::PlaneState;
    use std::f64::consts::FRAC_PI_2;

    fn nominal_pairs(ens: &RemappedEnsemble) -> Vec<PenaltyPair> {
        (0..4)
            .map(|i| build_penalty_bb84(ens, PlaneState::bb84(i), EfficiencyProfile::normal()))
            .collect()
    }

    #[test]
    fn symmetric_point_is_quarter() {
        let ens = RemappedEnsemble::new(FRAC_PI_2).unwrap();
        let sol = min_qber(&ens, &nominal_pairs(&ens)).unwrap();
        assert!((sol.qber - 0.25).abs() < 1e-12);
        // All four outcomes tie; their projectors add up to 2I, so each gets ½.
        assert_eq!(sol.povm.len(), 4);
        assert!((sol.povm[0].weight - 0.5).abs() < 1e-12);
        assert!((sol.transmittance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_outcome_transmittance_at_symmetric_point_is_half() {
        let ens = RemappedEnsemble::new(FRAC_PI_2).unwrap();
        let pairs = nominal_pairs(&ens);
        let sol = min_qber(&ens, &pairs[..1]).unwrap();
        assert_eq!(sol.povm.len(), 1);
        assert!((sol.transmittance - 0.5).abs() < 1e-12);
        assert!((transmittance_at(&ens, &sol) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn small_delta_limit() {
        let ens = RemappedEnsemble::new(1e-3).unwrap();
        let sol = min_qber(&ens, &nominal_pairs(&ens)).unwrap();
        assert!((sol.qber - 0.155).abs() < 0.003, "{}", sol.qber);
    }

    #[test]
    fn zero_error_operator_gives_zero_qber() {
        let ens = RemappedEnsemble::new(0.7).unwrap();
        let b = ens.uniform_gain();
        let sol = min_qber(
            &ens,
            &[PenaltyPair {
                l: SymOp2::zero(),
                b,
            }],
        )
        .unwrap();
        assert_eq!(sol.qber, 0.0);
        assert!(b.quad(sol.povm[0].direction) > 0.0);
    }

    #[test]
    fn rank_one_gain_uses_its_range() {
        let ens = RemappedEnsemble::new(0.7).unwrap();
        let p = crate::qmath::projector(PlaneState::new(0.4));
        let sol = min_qber(
            &ens,
            &[PenaltyPair {
                l: p.scale(0.3),
                b: p,
            }],
        )
        .unwrap();
        assert!((sol.qber - 0.3).abs() < 1e-12);
    }

    #[test]
    fn error_paths() {
        let ens = RemappedEnsemble::new(0.7).unwrap();
        assert_eq!(
            min_qber(&ens, &[]).unwrap_err(),
            Error::Empty("no penalty pairs")
        );
        let zero = PenaltyPair {
            l: SymOp2::zero(),
            b: SymOp2::zero(),
        };
        assert_eq!(min_qber(&ens, &[zero]).unwrap_err(), Error::ZeroGain);
    }

    #[test]
    fn povm_is_sub_normalised() {
        for d in [0.05, 0.4, 1.0, FRAC_PI_2] {
            let ens = RemappedEnsemble::new(d).unwrap();
            let sol = min_qber(&ens, &nominal_pairs(&ens)).unwrap();
            let total: SymOp2 = sol.povm.iter().map(|m| m.operator()).sum();
            assert!(eig_sym2(SymOp2::identity() - total).min >= -1e-12);
            assert!((0.0..=1.0).contains(&sol.conclusive_prob));
        }
    }

    #[test]
    fn zero_povm_has_zero_transmittance() {
        let ens = RemappedEnsemble::new(0.5).unwrap();
        let sol = AttackSolution {
            qber: 0.0,
            povm: vec![],
            conclusive_prob: 0.0,
            click_prob: 0.0,
            transmittance: 0.0,
            outcome_ratios: vec![],
        };
        assert_eq!(transmittance_at(&ens, &sol), 0.0);
    }

    #[test]
    fn suboptimal_examples() {
        assert!((suboptimal_qber(1e-4).unwrap() - 1.0 / 6.0).abs() < 1e-6);
        assert!(suboptimal_qber(FRAC_PI_2).unwrap() >= 0.25 - 1e-12);
        // Direct evaluation with explicit probabilities sin²(2δ'), sin²(δ'), 0, sin²(δ').
        let d: f64 = 0.1;
        let h = d / 2.0;
        let p = [
            (2.0 * h).sin().powi(2),
            h.sin().powi(2),
            0.0,
            h.sin().powi(2),
        ];
        let expect = (0.5 * p[1] + p[2] + 0.5 * p[3]) / p.iter().sum::<f64>();
        assert!((suboptimal_qber(d).unwrap() - expect).abs() < 1e-14);
        assert!((expect - 0.166_944_676_003_008).abs() < 1e-12);
    }

    #[test]
    fn detector_error_folding() {
        assert_eq!(fold_detector_error(0.1, 0.0), 0.1);
        assert!((fold_detector_error(0.0, 0.03) - 0.03).abs() < 1e-15);
        assert!((fold_detector_error(0.5, 0.2) - 0.5).abs() < 1e-15);
        assert!((fold_detector_error(0.1, 0.01) - 0.108).abs() < 1e-15);
    }
}
