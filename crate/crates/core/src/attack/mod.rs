//! Intercept-and-resend attacks on the phase-remapped ensemble.
//!
//! For each measurement outcome Eve resends some state to Bob, possibly time
//! shifted to exploit detector-efficiency mismatch. Each outcome contributes
//! an error operator `L_i` and a click operator `B_i`, and the QBER of a POVM
//! `{M_i}` is `Σ Tr(M_i L_i) / Σ Tr(M_i B_i)`. That ratio is minimised exactly
//! by a per-outcome generalized eigenvalue problem (see [`min_qber`]); the
//! resend state itself is searched on a grid (see [`best_resend`]).

mod curve;
mod ensemble;
mod penalty;
mod solver;

pub use curve::{
    best_resend, best_resend_any_profile, curve_resend_spec, default_delta_grid, fixed_resend_spec,
    optimal_curve, solve, solve_point, uniform_grid, CurvePoint, Protocol, ResendMode,
    ResendSearch, DEFAULT_GRID_POINTS, DELTA_MIN, RESEND_GRID, RESEND_REFINE_TOL,
};
pub use ensemble::{EfficiencyProfile, RemappedEnsemble, Resend, ResendSpec};
pub use penalty::{
    bb84_weights, build_penalty_bb84, build_penalty_sarg04, sarg04_weights, PenaltyPair,
};
pub use solver::{
    fold_detector_error, min_qber, pair_optimum, suboptimal_qber, transmittance_at, AttackSolution,
    PovmElement, TIE_TOL,
};
