//! Quantitative analysis of the phase-remapping Trojan-horse attack on
//! bidirectional ("plug & play" and Sagnac) QKD systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`qmath`] closed-form 2x2 real symmetric algebra and qubit states in the X-Z plane.
//! * [`remap`] formula-level models of how Eve induces the phase step δ.
//! * [`attack`] the QBER ratio objective for intercept-and-resend attacks on the
//!   remapped ensemble, and its exact minimisation by a generalized eigenvalue problem.
//! * [`channel`] the weak-coherent-source link model (yields, gains, normal observables).
//! * [`keyrate`] GLLP key rate with worst-case single-photon bounds and B steps.
//! * [`strategies`] the three coherent-source attack strategies.
//! * [`cli`] experiment runner behind the `qkdlab` binary.

pub mod attack;
pub mod channel;
pub mod cli;
pub mod error;
pub mod keyrate;
pub mod qmath;
pub mod remap;
pub mod strategies;

pub use error::{Error, Result};
