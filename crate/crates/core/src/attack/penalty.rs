use crate::qmath::{eig_sym2, projector, PlaneState, SymOp2, PSD_TOL};

use super::ensemble::{EfficiencyProfile, RemappedEnsemble};

/// Orthogonality threshold on `|⟨a|b⟩|²` used by the SARG04 sifting rule.
const ORTHO_TOL: f64 = 1e-12;

/// Error operator `L` and click operator `B` for one resend outcome: for a
/// POVM element `M`, `Tr(M L)` is the (unnormalised) error weight and
/// `Tr(M B)` the click weight it contributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyPair {
    pub l: SymOp2,
    pub b: SymOp2,
}

impl PenaltyPair {
    /// Assemble `Σ_j w_j |φ̃_j⟩⟨φ̃_j|` for both operators.
    pub fn from_weights(ens: &RemappedEnsemble, err: [f64; 4], click: [f64; 4]) -> Self {
        let mut l = SymOp2::zero();
        let mut b = SymOp2::zero();
        for (k, state) in ens.states().into_iter().enumerate() {
            let p = projector(state);
            l = l + p.scale(err[k]);
            b = b + p.scale(click[k]);
        }
        Self { l, b }
    }

    /// Both operators PSD and `L ≤ B`.
    pub fn is_valid(&self) -> bool {
        eig_sym2(self.l).min >= -PSD_TOL
            && eig_sym2(self.b).min >= -PSD_TOL
            && eig_sym2(self.b - self.l).min >= -PSD_TOL
    }
}

/// Per-state error and click weights for a BB84 resend.
///
/// Alice's state `j` carries bit `j / 2` in basis `j % 2`; Bob measures in the
/// matching nominal basis, so the click probability is
/// `η_0|⟨bit0|ψ⟩|² + η_1|⟨bit1|ψ⟩|²` and the error probability is the term
/// for the wrong bit.
pub fn bb84_weights(resend: PlaneState, prof: EfficiencyProfile) -> ([f64; 4], [f64; 4]) {
    let mut err = [0.0; 4];
    let mut click = [0.0; 4];
    for j in 0..4 {
        let bit = j / 2;
        let basis = j % 2;
        let outcome_prob = [
            PlaneState::bb84(basis).fidelity(&resend),
            PlaneState::bb84(basis + 2).fidelity(&resend),
        ];
        err[j] = prof.eta(1 - bit) * outcome_prob[1 - bit];
        click[j] = prof.eta(0) * outcome_prob[0] + prof.eta(1) * outcome_prob[1];
    }
    (err, click)
}

pub fn build_penalty_bb84(
    ens: &RemappedEnsemble,
    resend: PlaneState,
    prof: EfficiencyProfile,
) -> PenaltyPair {
    let (err, click) = bb84_weights(resend, prof);
    PenaltyPair::from_weights(ens, err, click)
}

/// Per-state weights for a SARG04 resend, by enumeration of the sifting tree.
///
/// For nominal state `j`, Alice announces `{φ_j, φ_{j+1}}` or `{φ_{j-1}, φ_j}`
/// with probability ½ each. Bob picks Z or X with probability ½; his outcome
/// `|φ_k⟩` is registered by detector `k / 2`. The event is conclusive when
/// that outcome is orthogonal to exactly one announced state, and Bob infers
/// the other one.
pub fn sarg04_weights(resend: PlaneState, prof: EfficiencyProfile) -> ([f64; 4], [f64; 4]) {
    let mut err = [0.0; 4];
    let mut click = [0.0; 4];
    for j in 0..4 {
        let pairings = [(j, (j + 1) % 4), ((j + 3) % 4, j)];
        for (first, second) in pairings {
            let announced = [PlaneState::bb84(first), PlaneState::bb84(second)];
            for basis in 0..2 {
                for bit in 0..2 {
                    let k = basis + 2 * bit;
                    let outcome = PlaneState::bb84(k);
                    let prob = 0.25 * prof.eta(bit) * outcome.fidelity(&resend);
                    let ortho_first = outcome.fidelity(&announced[0]) < ORTHO_TOL;
                    let ortho_second = outcome.fidelity(&announced[1]) < ORTHO_TOL;
                    let inferred = match (ortho_first, ortho_second) {
                        (true, false) => second,
                        (false, true) => first,
                        _ => continue,
                    };
                    click[j] += prob;
                    if inferred != j {
                        err[j] += prob;
                    }
                }
            }
        }
    }
    (err, click)
}

pub fn build_penalty_sarg04(
    ens: &RemappedEnsemble,
    resend: PlaneState,
    prof: EfficiencyProfile,
) -> PenaltyPair {
    let (err, click) = sarg04_weights(resend, prof);
    PenaltyPair::from_weights(ens, err, click)
}
