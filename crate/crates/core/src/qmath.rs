//! Closed-form algebra for real symmetric 2x2 operators and pure qubit states
//! confined to the X-Z plane of the Bloch sphere.
//!
//! Every state that appears in the attack analysis has real amplitudes, so a
//! state is a single angle and every operator is a real symmetric 2x2 matrix.
//! Eigen-decompositions are exact (no iteration).

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Eigenvalues below `-PSD_TOL` reject an operator as not positive semidefinite.
pub const PSD_TOL: f64 = 1e-9;
/// Eigenvalues at or below this cutoff are treated as zero by [`pinv_sqrt`].
pub const PINV_CUTOFF: f64 = 1e-12;
/// Tolerance on `ac - b^2` for the PSD predicate on [`SymOp2`].
pub const PSD_DET_TOL: f64 = 1e-12;

/// Real unit vector in the computational basis.
pub type Vec2 = [f64; 2];

/// Pure state `cos(θ/2)|0_z⟩ + sin(θ/2)|1_z⟩`.
///
/// θ is stored reduced to `[0, 2π)`. The reduction flips the global sign of
/// the amplitudes when θ crosses a multiple of 2π, which is physically
/// irrelevant: compare states with [`PlaneState::same_ray`] or through their
/// projectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneState {
    theta: f64,
}

impl PlaneState {
    pub fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(TAU);
        if t >= TAU {
            t = 0.0;
        }
        Self { theta: t }
    }

    /// `|0_z⟩`
    pub fn zero_z() -> Self {
        Self::new(0.0)
    }

    /// `|1_z⟩`
    pub fn one_z() -> Self {
        Self::new(PI)
    }

    /// `|0_x⟩ = |+⟩`
    pub fn zero_x() -> Self {
        Self::new(PI / 2.0)
    }

    /// `|1_x⟩ = |−⟩`
    pub fn one_x() -> Self {
        Self::new(1.5 * PI)
    }

    /// Nominal BB84 state `|φ_k⟩` (phase `kπ/2`), index taken mod 4.
    pub fn bb84(k: usize) -> Self {
        Self::new((k % 4) as f64 * PI / 2.0)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn amplitudes(&self) -> Vec2 {
        let h = 0.5 * self.theta;
        [h.cos(), h.sin()]
    }

    /// `⟨self|other⟩`
    pub fn overlap(&self, other: &PlaneState) -> f64 {
        (0.5 * (self.theta - other.theta)).cos()
    }

    /// `|⟨self|other⟩|²`
    pub fn fidelity(&self, other: &PlaneState) -> f64 {
        let o = self.overlap(other);
        o * o
    }

    /// The state orthogonal to this one.
    pub fn orthogonal(&self) -> Self {
        Self::new(self.theta + PI)
    }

    /// True when both states span the same ray (equal projectors).
    pub fn same_ray(&self, other: &PlaneState, tol: f64) -> bool {
        1.0 - self.fidelity(other) <= tol
    }

    pub fn projector(&self) -> SymOp2 {
        projector(*self)
    }
}

/// Real symmetric operator `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymOp2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SymOp2 {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    /// `v vᵀ`
    pub fn outer(v: Vec2) -> Self {
        Self::new(v[0] * v[0], v[0] * v[1], v[1] * v[1])
    }

    pub fn trace(&self) -> f64 {
        self.a + self.c
    }

    pub fn det(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(s * self.a, s * self.b, s * self.c)
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        [self.a * v[0] + self.b * v[1], self.b * v[0] + self.c * v[1]]
    }

    /// `vᵀ A v`
    pub fn quad(&self, v: Vec2) -> f64 {
        v[0] * (self.a * v[0] + self.b * v[1]) + v[1] * (self.b * v[0] + self.c * v[1])
    }

    /// `S A S` for symmetric `S`; the result is symmetric.
    pub fn sandwich(&self, s: &SymOp2) -> SymOp2 {
        let m = |x: &SymOp2, y: &SymOp2| {
            [
                [x.a * y.a + x.b * y.b, x.a * y.b + x.b * y.c],
                [x.b * y.a + x.c * y.b, x.b * y.b + x.c * y.c],
            ]
        };
        let sa = m(s, self);
        // (S A) S, keeping the upper triangle and symmetrising the off-diagonal.
        let a = sa[0][0] * s.a + sa[0][1] * s.b;
        let b1 = sa[0][0] * s.b + sa[0][1] * s.c;
        let b2 = sa[1][0] * s.a + sa[1][1] * s.b;
        let c = sa[1][0] * s.b + sa[1][1] * s.c;
        SymOp2::new(a, 0.5 * (b1 + b2), c)
    }

    /// PSD test with the tolerances from the operator invariants.
    pub fn is_psd(&self) -> bool {
        self.a >= -PSD_DET_TOL && self.c >= -PSD_DET_TOL && self.det() >= -PSD_DET_TOL
    }

    pub fn max_abs_diff(&self, other: &SymOp2) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
    }
}

impl Add for SymOp2 {
    type Output = SymOp2;
    fn add(self, rhs: SymOp2) -> SymOp2 {
        SymOp2::new(self.a + rhs.a, self.b + rhs.b, self.c + rhs.c)
    }
}

impl Sub for SymOp2 {
    type Output = SymOp2;
    fn sub(self, rhs: SymOp2) -> SymOp2 {
        SymOp2::new(self.a - rhs.a, self.b - rhs.b, self.c - rhs.c)
    }
}

impl Mul<SymOp2> for f64 {
    type Output = SymOp2;
    fn mul(self, rhs: SymOp2) -> SymOp2 {
        rhs.scale(self)
    }
}

impl std::iter::Sum for SymOp2 {
    fn sum<I: Iterator<Item = SymOp2>>(iter: I) -> SymOp2 {
        iter.fold(SymOp2::zero(), |acc, x| acc + x)
    }
}

/// Eigen-decomposition of a [`SymOp2`], smallest eigenvalue first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen2 {
    pub min: f64,
    pub v_min: Vec2,
    pub max: f64,
    pub v_max: Vec2,
}

pub fn projector(s: PlaneState) -> SymOp2 {
    SymOp2::outer(s.amplitudes())
}

/// Closed-form eigenpairs. A degenerate spectrum returns `(1,0)` for the
/// minimum and `(0,1)` for the maximum.
pub fn eig_sym2(op: SymOp2) -> Eigen2 {
    let mean = 0.5 * (op.a + op.c);
    let half_diff = 0.5 * (op.a - op.c);
    let radius = half_diff.hypot(op.b);
    let scale = op.a.abs().max(op.c.abs()).max(op.b.abs());
    if radius <= f64::EPSILON * scale || radius == 0.0 {
        return Eigen2 {
            min: mean,
            v_min: [1.0, 0.0],
            max: mean,
            v_max: [0.0, 1.0],
        };
    }
    // Rotation angle of the major axis.
    let phi = 0.5 * op.b.atan2(half_diff);
    let (s, c) = phi.sin_cos();
    Eigen2 {
        min: mean - radius,
        v_min: [-s + 0.0, c],
        max: mean + radius,
        v_max: [c, s],
    }
}

/// Pseudo-inverse square root: `op^{-1/2}` on the span of eigenvalues above
/// `cutoff`, zero elsewhere.
pub fn pinv_sqrt(op: SymOp2, cutoff: f64) -> Result<SymOp2> {
    let e = eig_sym2(op);
    if e.min < -PSD_TOL {
        return Err(Error::NotPsd {
            min_eigenvalue: e.min,
        });
    }
    let mut out = SymOp2::zero();
    for (lambda, v) in [(e.min, e.v_min), (e.max, e.v_max)] {
        if lambda > cutoff {
            out = out + SymOp2::outer(v).scale(1.0 / lambda.sqrt());
        }
    }
    Ok(out)
}

/// Orthogonal projector onto the span of eigenvalues above `cutoff`.
pub fn range_projector(op: SymOp2, cutoff: f64) -> SymOp2 {
    let e = eig_sym2(op);
    [(e.min, e.v_min), (e.max, e.v_max)]
        .into_iter()
        .filter(|(l, _)| *l > cutoff)
        .map(|(_, v)| SymOp2::outer(v))
        .sum()
}

/// `Tr(x y)`
pub fn trace_prod(x: SymOp2, y: SymOp2) -> f64 {
    x.a * y.a + 2.0 * x.b * y.b + x.c * y.c
}

/// Binary entropy in bits, with `h2(0) = h2(1) = 0`.
pub fn h2(p: f64) -> Result<f64> {
    crate::error::check_probability("p", p)?;
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

pub fn normalize(v: Vec2) -> Vec2 {
    let n = v[0].hypot(v[1]);
    if n == 0.0 {
        v
    } else {
        [v[0] / n, v[1] / n]
    }
}
