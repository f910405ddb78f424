//! The planar system for the profile of a rotational Hopf soliton.
//!
//! State is `(u, v)` with `v = u'`. The phase domain is the half disk
//! `D = {u > 0, u^2 + v^2 < 1}`; its boundary circle is invariant.

use num_complex::Complex64;
use thiserror::Error;

/// Slack allowed outside the closed unit disk before a point is rejected.
pub const TOL_DOMAIN: f64 = 1e-9;

/// Radius below which the polar angle around the equilibrium is undefined.
pub const TOL_R: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("n must be at least 1, got {0}")]
    InvalidDimension(u32),
    #[error("point ({u}, {v}) lies outside the phase domain")]
    Domain { u: f64, v: f64 },
    #[error("polar angle undefined: point is {r:e} from the equilibrium")]
    Degenerate { r: f64 },
}

/// Half the hypersurface dimension: the surface is `2n`-dimensional in `S^{2n+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolitonParams {
    n: u32,
}

impl SolitonParams {
    pub fn new(n: u32) -> Result<Self, PhaseError> {
        if n == 0 {
            return Err(PhaseError::InvalidDimension(n));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `2n - 1`, the multiplicity of the fiber principal curvature.
    pub fn m(&self) -> f64 {
        2.0 * self.n as f64 - 1.0
    }

    pub fn two_n(&self) -> f64 {
        2.0 * self.n as f64
    }

    /// u-coordinate of the equilibrium, `sqrt(1 - 1/2n)`.
    pub fn u_eq(&self) -> f64 {
        (1.0 - 1.0 / self.two_n()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub u: f64,
    pub v: f64,
}

impl PhasePoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// `1 - u^2 - v^2`, positive inside the disk.
    pub fn defect(&self) -> f64 {
        1.0 - self.u * self.u - self.v * self.v
    }

    pub fn check(&self) -> Result<(), PhaseError> {
        if !(self.u > 0.0) || !(self.defect() >= -TOL_DOMAIN) {
            return Err(PhaseError::Domain {
                u: self.u,
                v: self.v,
            });
        }
        Ok(())
    }

    pub fn dist(&self, other: &PhasePoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// `g = sqrt(max(0, 1 - u^2 - v^2))` together with the out-of-domain flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GValue {
    pub g: f64,
    pub out_of_domain: bool,
}

pub fn g_checked(p: &PhasePoint) -> GValue {
    let d = p.defect();
    GValue {
        g: d.max(0.0).sqrt(),
        out_of_domain: d < -TOL_DOMAIN,
    }
}

pub fn g_of(p: &PhasePoint) -> f64 {
    g_checked(p).g
}

/// Right-hand side `(P, Q)`.
///
/// `Q` is evaluated as `-2n w (2 u_n + w)/u - (2n-1) v^2/u - v g` with
/// `w = u - u_n`, which is algebraically the textbook form but keeps
/// relative accuracy close to the equilibrium.
pub fn vector_field(params: &SolitonParams, p: &PhasePoint) -> Result<(f64, f64), PhaseError> {
    p.check()?;
    let w = p.u - params.u_eq();
    Ok((p.v, centered_q(params, w, p.v)))
}

/// `Q` in equilibrium-centred coordinates `(w, v)`, no domain checks.
pub(crate) fn centered_q(params: &SolitonParams, w: f64, v: f64) -> f64 {
    let un = params.u_eq();
    let u = un + w;
    let g = (1.0 - u * u - v * v).max(0.0).sqrt();
    -params.two_n() * w * (2.0 * un + w) / u - params.m() * v * v / u - v * g
}

/// Field of the lifted system in `(u, v, a)`: `u' = v`,
/// `v' = (2n-1) a^2/u - v a - u`, `a' = v^2 - (2n-1) v a/u`.
///
/// It preserves `u^2 + v^2 + a^2` and on the sheet `a = g` reduces to the
/// planar system; unlike the planar field it is smooth where `g = 0`.
pub fn lifted_field(params: &SolitonParams, y: [f64; 3]) -> [f64; 3] {
    let m = params.m();
    [
        y[1],
        m * y[2] * y[2] / y[0] - y[1] * y[2] - y[0],
        y[1] * y[1] - m * y[1] * y[2] / y[0],
    ]
}

/// Monotone quantity `u^{2n-1} g`.
pub fn zeta(params: &SolitonParams, p: &PhasePoint) -> f64 {
    p.u.powi(2 * params.n as i32 - 1) * g_of(p)
}

/// Derivative of [`zeta`] along the flow, `u^{2n-1} v^2`.
pub fn zeta_rate(params: &SolitonParams, p: &PhasePoint) -> f64 {
    p.u.powi(2 * params.n as i32 - 1) * p.v * p.v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumInfo {
    pub point: PhasePoint,
    pub jacobian: [[f64; 2]; 2],
    /// `alpha + i beta` with `beta > 0`; the partner is its conjugate.
    pub eigenvalue: Complex64,
}

impl EquilibriumInfo {
    pub fn alpha(&self) -> f64 {
        self.eigenvalue.re
    }

    pub fn beta(&self) -> f64 {
        self.eigenvalue.im
    }

    pub fn eigenvalues(&self) -> [Complex64; 2] {
        [self.eigenvalue, self.eigenvalue.conj()]
    }
}

pub fn equilibrium(params: &SolitonParams) -> EquilibriumInfo {
    let two_n = params.two_n();
    let n = params.n as f64;
    let denom = 2.0 * two_n.sqrt();
    EquilibriumInfo {
        point: PhasePoint::new(params.u_eq(), 0.0),
        jacobian: [[0.0, 1.0], [-4.0 * n, -1.0 / two_n.sqrt()]],
        eigenvalue: Complex64::new(-1.0 / denom, (32.0 * n * n - 1.0).sqrt() / denom),
    }
}

/// Polar coordinates `(r, theta)` around the equilibrium, `theta = atan2(v, u - u_n)`.
pub fn polar(params: &SolitonParams, p: &PhasePoint) -> (f64, f64) {
    let w = p.u - params.u_eq();
    (w.hypot(p.v), p.v.atan2(w))
}

/// `theta'` along the flow in closed form.
pub fn polar_angle_rate(params: &SolitonParams, p: &PhasePoint) -> Result<f64, PhaseError> {
    p.check()?;
    let (r, theta) = polar(params, p);
    if r < TOL_R {
        return Err(PhaseError::Degenerate { r });
    }
    let g = g_of(p);
    let (s, c) = theta.sin_cos();
    Ok(-1.0 + params.m() * (g * g / p.u) * (c / r) - g * s * c - params.u_eq() * c / r)
}

/// Radii of the Clifford torus `S^{2n-1}(a) x S^1(b)` matching the equilibrium.
pub fn clifford_radii(params: &SolitonParams) -> (f64, f64) {
    (
        ((params.two_n() - 1.0) / params.two_n()).sqrt(),
        (1.0 / params.two_n()).sqrt(),
    )
}
