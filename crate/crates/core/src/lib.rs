//! Numerical construction and verification of rotationally symmetric Hopf
//! solitons of mean curvature flow in `S^{2n+1}`.

pub mod boundary;
pub mod identities;
pub mod integrator;
pub mod phase;
pub mod profile;
pub mod soliton;

pub use integrator::{
    integrate, integrate_backward, integrate_forward, tail_angle_rate_max, unwrap_angle, Direction,
    IntegratorConfig, IntegratorError, Sample, Termination, Trajectory,
};
pub use phase::{
    clifford_radii, equilibrium, g_of, polar_angle_rate, vector_field, zeta, EquilibriumInfo,
    PhaseError, PhasePoint, SolitonParams,
};
