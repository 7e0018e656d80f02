use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::qmath::{projector, PlaneState, SymOp2};

/// Slack allowed above π/2 so that a grid endpoint computed in floating point
/// is still accepted.
const DELTA_SLACK: f64 = 1e-12;

/// Alice's four states after Eve remaps the phase step to δ: state `k` has
/// angle `k·δ` (so `|φ̃_k⟩ = cos(kδ/2)|0_z⟩ + sin(kδ/2)|1_z⟩`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemappedEnsemble {
    delta: f64,
}

impl RemappedEnsemble {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0 && delta <= FRAC_PI_2 + DELTA_SLACK) {
            return Err(Error::OutOfRange {
                name: "delta",
                value: delta,
                expected: "in (0, π/2]",
            });
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `|φ̃_k⟩`, index taken mod 4.
    pub fn state(&self, k: usize) -> PlaneState {
        PlaneState::new((k % 4) as f64 * self.delta)
    }

    pub fn states(&self) -> [PlaneState; 4] {
        [0, 1, 2, 3].map(|k| self.state(k))
    }

    /// `Σ_k |φ̃_k⟩⟨φ̃_k|`, four times the density matrix Eve receives.
    pub fn uniform_gain(&self) -> SymOp2 {
        self.states().into_iter().map(projector).sum()
    }
}

/// Relative detector efficiencies at the arrival time Eve chooses for a
/// resent pulse. The larger efficiency is normalised to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyProfile {
    pub eta0: f64,
    pub eta1: f64,
}

impl EfficiencyProfile {
    pub fn new(eta0: f64, eta1: f64) -> Result<Self> {
        for (name, v) in [("eta0", eta0), ("eta1", eta1)] {
            if !(v.is_finite() && v > 0.0 && v <= 1.0) {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    expected: "in (0, 1]",
                });
            }
        }
        Ok(Self { eta0, eta1 })
    }

    /// Normal arrival time: both detectors equally efficient.
    pub const fn normal() -> Self {
        Self {
            eta0: 1.0,
            eta1: 1.0,
        }
    }

    /// Arrival at `t_0`: detector "0" fully efficient, detector "1" at `mismatch`.
    pub fn favor_zero(mismatch: f64) -> Result<Self> {
        Self::new(1.0, mismatch)
    }

    /// Arrival at `t_1`: the mirror of [`EfficiencyProfile::favor_zero`].
    pub fn favor_one(mismatch: f64) -> Result<Self> {
        Self::new(mismatch, 1.0)
    }

    pub fn swapped(&self) -> Self {
        Self {
            eta0: self.eta1,
            eta1: self.eta0,
        }
    }

    /// Efficiency of the detector that reports `bit`.
    pub fn eta(&self, bit: usize) -> f64 {
        if bit == 0 {
            self.eta0
        } else {
            self.eta1
        }
    }

    /// Candidate arrival times for a mismatch `m`; `m = 1` leaves only the
    /// normal arrival time.
    pub fn search_set(mismatch: f64) -> Result<Vec<Self>> {
        if mismatch == 1.0 {
            Ok(vec![Self::normal()])
        } else {
            Ok(vec![
                Self::normal(),
                Self::favor_zero(mismatch)?,
                Self::favor_one(mismatch)?,
            ])
        }
    }
}

/// What Eve sends to Bob for one measurement outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resend {
    pub state: PlaneState,
    pub profile: EfficiencyProfile,
}

impl Resend {
    pub fn new(state: PlaneState, profile: EfficiencyProfile) -> Self {
        Self { state, profile }
    }

    /// Image under the detector-swap symmetry that exchanges `|φ̃_0⟩ ↔ |φ̃_3⟩`
    /// and `|φ̃_1⟩ ↔ |φ̃_2⟩`: Bob's nominal state `|φ_k⟩` maps to `|φ_{3-k}⟩`
    /// (reflection θ → 3π/2 − θ) and the two detectors trade efficiencies.
    pub fn mirrored(&self) -> Self {
        Self {
            state: PlaneState::new(1.5 * PI - self.state.theta()),
            profile: self.profile.swapped(),
        }
    }
}

/// Per-outcome resend plan; `None` means Eve sends vacuum for that outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResendSpec {
    outcomes: [Option<Resend>; 4],
}

impl ResendSpec {
    pub fn new(outcomes: [Option<Resend>; 4]) -> Result<Self> {
        if outcomes.iter().all(Option::is_none) {
            return Err(Error::Empty("resend spec has no outcome"));
        }
        Ok(Self { outcomes })
    }

    /// Outcome `i` resends the nominal state `|φ_i⟩` at the normal arrival time.
    pub fn nominal() -> Self {
        let outcomes = [0, 1, 2, 3].map(|i| {
            Some(Resend::new(
                PlaneState::bb84(i),
                EfficiencyProfile::normal(),
            ))
        });
        Self { outcomes }
    }

    /// Outcome 0 resends `first`, outcome 3 its mirror image, 1 and 2 are vacuum.
    pub fn mirrored_pair(first: Resend) -> Self {
        Self {
            outcomes: [Some(first), None, None, Some(first.mirrored())],
        }
    }

    /// Keep only the listed outcomes.
    pub fn restricted(&self, keep: &[usize]) -> Result<Self> {
        let mut outcomes = [None; 4];
        for &i in keep {
            if i < 4 {
                outcomes[i] = self.outcomes[i];
            }
        }
        Self::new(outcomes)
    }

    pub fn outcome(&self, i: usize) -> Option<Resend> {
        self.outcomes.get(i).copied().flatten()
    }

    /// `(outcome index, resend)` for every non-vacuum outcome.
    pub fn active(&self) -> impl Iterator<Item = (usize, Resend)> + '_ {
        self.outcomes
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.map(|r| (i, r)))
    }
}
