//! Profile curve `gamma = (u, y, z)` in `S^2` and the geometry of the
//! rotational hypersurface `f(p, s) = (u(s) p; y(s), z(s))`.
//!
//! The curve is driven by the lifted state `(u, v, a)` with
//! `u^2 + v^2 + a^2 = 1`, where `a` is the signed drift `<xi, e_s>` for the
//! complex structure `J_sigma = (J; sigma J)`, `sigma = theta_sign`. On the
//! phase-plane branch `a = g`; across the glue of the doubled soliton `a`
//! changes sign together with `v`.

use thiserror::Error;

use crate::boundary::G_MIN;
use crate::integrator::Trajectory;
use crate::phase::{g_of, lifted_field, SolitonParams};

/// Tolerance of the trace check `|H + v|`.
pub const H_CROSS_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("empty profile")]
    Empty,
    #[error("sample at s = {s} has u = {u} >= 1 away from the start")]
    NotInterior { s: f64, u: f64 },
    #[error("profile curvature is singular at s = {s} (|a| = {a:e}) and the fallback is disabled")]
    Singular { s: f64, a: f64 },
    #[error("not a soliton profile: |H + v| = {gap:e} at s = {s}")]
    SolitonResidual { s: f64, gap: f64 },
    #[error("samples are not uniformly spaced (spacing {min:e}..{max:e})")]
    NonUniform { min: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvaturePolicy {
    /// Below `G_MIN` use `lambda_prof = -v - (2n-1) lambda_tan`.
    Fallback,
    Strict,
}

/// Lifted state at one arclength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematic {
    pub s: f64,
    pub u: f64,
    pub v: f64,
    pub a: f64,
}

impl Kinematic {
    /// `u''` from the lifted equations, `(2n-1) a^2/u - v a - u`.
    pub fn upp(&self, params: &SolitonParams) -> f64 {
        params.m() * self.a * self.a / self.u - self.v * self.a - self.u
    }

    /// `u'' + u = (2n-1) a^2/u - v a`, without the cancellation of forming `u''` first.
    pub fn upp_plus_u(&self, params: &SolitonParams) -> f64 {
        params.m() * self.a * self.a / self.u - self.v * self.a
    }

    /// `a'` from the lifted equations, `v^2 - (2n-1) v a / u`.
    pub fn ap(&self, params: &SolitonParams) -> f64 {
        self.v * self.v - params.m() * self.v * self.a / self.u
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    pub s: f64,
    pub u: f64,
    pub v: f64,
    pub g: f64,
    pub upp: f64,
    /// Signed: negative on the mirrored half of a doubled profile.
    pub r: f64,
    pub theta_amb: f64,
    pub y: f64,
    pub z: f64,
    pub yp: f64,
    pub zp: f64,
    pub lambda_tan: f64,
    pub lambda_prof: f64,
    pub h: f64,
    pub norm_a2: f64,
    pub traceless2: f64,
    pub drift_a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub params: SolitonParams,
    pub samples: Vec<ProfileSample>,
    pub theta_sign: i8,
    /// Rotation angle applied in the `(y, z)` plane after reconstruction.
    pub tau: f64,
}

impl ProfileCurve {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn map<F: Fn(&ProfileSample) -> f64>(&self, f: F) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }

    /// Common spacing of the samples, if uniform to a relative 1e-9.
    pub fn uniform_step(&self) -> Result<f64, ProfileError> {
        if self.samples.len() < 2 {
            return Err(ProfileError::Empty);
        }
        let n = self.samples.len();
        let h = (self.samples[n - 1].s - self.samples[0].s) / (n - 1) as f64;
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for w in self.samples.windows(2) {
            let d = w[1].s - w[0].s;
            min = min.min(d);
            max = max.max(d);
        }
        if !(h > 0.0) || (max - min) > 1e-9 * h.abs() {
            return Err(ProfileError::NonUniform { min, max });
        }
        Ok(h)
    }

    /// Every other sample, starting with the first.
    pub fn subsample(&self, stride: usize) -> ProfileCurve {
        ProfileCurve {
            samples: self
                .samples
                .iter()
                .step_by(stride.max(1))
                .copied()
                .collect(),
            ..self.clone()
        }
    }
}

/// `(lambda_tan, lambda_prof)` at a lifted state.
pub fn principal_curvatures(
    params: &SolitonParams,
    k: &Kinematic,
    policy: CurvaturePolicy,
) -> Result<(f64, f64), ProfileError> {
    let lt = -k.a / k.u;
    if k.a.abs() >= G_MIN {
        return Ok((lt, k.upp_plus_u(params) / k.a));
    }
    match policy {
        CurvaturePolicy::Fallback => Ok((lt, -k.v - params.m() * lt)),
        CurvaturePolicy::Strict => Err(ProfileError::Singular { s: k.s, a: k.a }),
    }
}

/// `(H, |A|^2, |A|^2 - H^2/2n)`, with the trace check against `-v`.
pub fn mean_and_norms(
    params: &SolitonParams,
    s: f64,
    lambda_tan: f64,
    lambda_prof: f64,
    v: f64,
) -> Result<(f64, f64, f64), ProfileError> {
    let h = params.m() * lambda_tan + lambda_prof;
    let gap = (h + v).abs();
    if !(gap < H_CROSS_TOL) {
        return Err(ProfileError::SolitonResidual { s, gap });
    }
    let a2 = params.m() * lambda_tan * lambda_tan + lambda_prof * lambda_prof;
    Ok((h, a2, a2 - h * h / params.two_n()))
}

/// `(y'z - yz', uz' - u'z, u'y - uy')`.
pub fn normal_vector(smp: &ProfileSample) -> [f64; 3] {
    [
        smp.yp * smp.z - smp.y * smp.zp,
        smp.u * smp.zp - smp.v * smp.z,
        smp.v * smp.y - smp.u * smp.yp,
    ]
}

/// `u u'' + (2n-1) u'^2 + 2n u^2 - (2n-1) + u u' a`.
pub fn soliton_residual(params: &SolitonParams, smp: &ProfileSample) -> f64 {
    smp.u * smp.upp + params.m() * smp.v * smp.v + params.two_n() * smp.u * smp.u - params.m()
        + smp.u * smp.v * smp.drift_a
}

fn theta_rate(params: &SolitonParams, k: &Kinematic, sigma: f64) -> (f64, f64) {
    let one_m_u2 = (1.0 - k.u) * (1.0 + k.u);
    if one_m_u2 <= 0.0 {
        // Only reachable at the glue point (1, 0, 0), where theta' ~ s/3.
        return (0.0, sigma / 3.0);
    }
    let f = sigma * k.a / one_m_u2;
    let fp = sigma * (k.ap(params) * one_m_u2 + 2.0 * k.a * k.u * k.v) / (one_m_u2 * one_m_u2);
    (f, fp)
}

/// Builds profile samples from lifted states.
///
/// `r = arccos u >= 0`, so the states must lie on one side of any glue
/// point. The angle starts at 0 on the first state and is accumulated
/// with the corrected trapezoid rule, which is exact for cubics.
pub fn profile_from_kinematics(
    params: &SolitonParams,
    kin: &[Kinematic],
    theta_sign: i8,
    tau: f64,
    policy: CurvaturePolicy,
) -> Result<ProfileCurve, ProfileError> {
    if kin.is_empty() {
        return Err(ProfileError::Empty);
    }
    let sigma = if theta_sign < 0 { -1.0 } else { 1.0 };
    let (st, ct) = tau.sin_cos();
    let mut samples = Vec::with_capacity(kin.len());
    let mut theta = 0.0;
    let mut prev: Option<(f64, f64, f64)> = None;
    for (i, k) in kin.iter().enumerate() {
        if i > 0 && k.u >= 1.0 {
            return Err(ProfileError::NotInterior { s: k.s, u: k.u });
        }
        let (f, fp) = theta_rate(params, k, sigma);
        if let Some((s0, f0, fp0)) = prev {
            let h = k.s - s0;
            theta += 0.5 * h * (f0 + f) + h * h / 12.0 * (fp0 - fp);
        }
        prev = Some((k.s, f, fp));

        let sr = (1.0 - k.u).max(0.0).sqrt() * (1.0 + k.u).sqrt();
        let r = k.u.min(1.0).acos();
        // r' = -v / sin r with sin^2 r = v^2 + a^2, which stays accurate as
        // u -> 1; the limit at the glue is 1.
        let sv = k.v.hypot(k.a);
        let rp = if sv > 0.0 { -k.v / sv } else { 1.0 };
        let (sth, cth) = theta.sin_cos();
        let y0 = sr * sth;
        let z0 = sr * cth;
        let yp0 = k.u * rp * sth + sr * cth * f;
        let zp0 = k.u * rp * cth - sr * sth * f;
        let (lt, lp) = principal_curvatures(params, k, policy)?;
        let (h, a2, tl) = mean_and_norms(params, k.s, lt, lp, k.v)?;
        samples.push(ProfileSample {
            s: k.s,
            u: k.u,
            v: k.v,
            g: k.a.abs(),
            upp: k.upp(params),
            r,
            theta_amb: theta,
            y: ct * y0 - st * z0,
            z: st * y0 + ct * z0,
            yp: ct * yp0 - st * zp0,
            zp: st * yp0 + ct * zp0,
            lambda_tan: lt,
            lambda_prof: lp,
            h,
            norm_a2: a2,
            traceless2: tl,
            drift_a: k.a,
        });
    }
    Ok(ProfileCurve {
        params: *params,
        samples,
        theta_sign: sigma as i8,
        tau,
    })
}

/// Profile of a phase-plane trajectory (`a = g`), angle zero at the first sample.
pub fn reconstruct_profile(
    params: &SolitonParams,
    traj: &Trajectory,
    theta_sign: i8,
) -> Result<ProfileCurve, ProfileError> {
    let mut kin: Vec<Kinematic> = traj
        .samples
        .iter()
        .map(|x| Kinematic {
            s: x.s,
            u: x.point.u,
            v: x.point.v,
            a: g_of(&x.point),
        })
        .collect();
    if traj.direction.sign() < 0.0 {
        // Keep s increasing so the quadrature runs forward.
        kin.reverse();
    }
    profile_from_kinematics(params, &kin, theta_sign, 0.0, CurvaturePolicy::Fallback)
}

/// Samples of the constant profile at the equilibrium (the Clifford torus).
pub fn clifford_profile(
    params: &SolitonParams,
    s0: f64,
    h: f64,
    count: usize,
    theta_sign: i8,
) -> ProfileCurve {
    let un = params.u_eq();
    let a = (1.0 / params.two_n()).sqrt();
    let kin: Vec<Kinematic> = (0..count)
        .map(|i| Kinematic {
            s: s0 + i as f64 * h,
            u: un,
            v: 0.0,
            a,
        })
        .collect();
    profile_from_kinematics(params, &kin, theta_sign, 0.0, CurvaturePolicy::Strict)
        .expect("the equilibrium is a soliton with a > 0")
}

/// Fixed-step classical RK4 on the lifted system `u' = v`,
/// `v' = (2n-1) a^2/u - v a - u`, `a' = v^2 - (2n-1) v a/u`.
///
/// The lifted system is regular at `(1, 0, 0)`, so it can be run through
/// the glue point. With a fixed step the global error is a smooth function
/// of `s`, which is what finite-difference checks on the output need.
/// `h` may be negative.
pub fn lifted_rk4(
    params: &SolitonParams,
    start: Kinematic,
    h: f64,
    steps: usize,
) -> Vec<Kinematic> {
    let f = |x: [f64; 3]| lifted_field(params, x);
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = [start.u, start.v, start.a];
    out.push(start);
    for k in 0..steps {
        let k1 = f(x);
        let k2 = f(std::array::from_fn(|i| x[i] + 0.5 * h * k1[i]));
        let k3 = f(std::array::from_fn(|i| x[i] + 0.5 * h * k2[i]));
        let k4 = f(std::array::from_fn(|i| x[i] + h * k3[i]));
        for i in 0..3 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(Kinematic {
            s: start.s + (k + 1) as f64 * h,
            u: x[0],
            v: x[1],
            a: x[2],
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletenessReport {
    pub inf_u: f64,
    pub inf_u_at: f64,
    /// `(s, u)` pairs, the warping function of `ds^2 + u^2 g_S`.
    pub warp: Vec<(f64, f64)>,
}

pub fn metric_completeness_report(
    curve: &ProfileCurve,
) -> Result<CompletenessReport, ProfileError> {
    let first = curve.samples.first().ok_or(ProfileError::Empty)?;
    let mut inf = (first.u, first.s);
    for smp in &curve.samples {
        if smp.u < inf.0 {
            inf = (smp.u, smp.s);
        }
    }
    Ok(CompletenessReport {
        inf_u: inf.0,
        inf_u_at: inf.1,
        warp: curve.samples.iter().map(|x| (x.s, x.u)).collect(),
    })
}

/// Geodesic curvature of the profile in `S^2` from second differences of the
/// ambient curve, `<gamma'', sigma nu>`; `None` at the two end samples.
/// Independent of the phase-plane formulas for `lambda_prof`.
pub fn ambient_profile_curvature(curve: &ProfileCurve) -> Result<Vec<Option<f64>>, ProfileError> {
    let h = curve.uniform_step()?;
    let sigma = curve.theta_sign as f64;
    let n = curve.samples.len();
    let mut out = vec![None; n];
    for i in 1..n - 1 {
        let (a, b, c) = (
            &curve.samples[i - 1],
            &curve.samples[i],
            &curve.samples[i + 1],
        );
        let dd = [
            (a.u - 2.0 * b.u + c.u) / (h * h),
            (a.y - 2.0 * b.y + c.y) / (h * h),
            (a.z - 2.0 * b.z + c.z) / (h * h),
        ];
        let nu = normal_vector(b);
        out[i] = Some(sigma * (dd[0] * nu[0] + dd[1] * nu[1] + dd[2] * nu[2]));
    }
    Ok(out)
}

/// Largest `|(2n-1) lambda_tan + kappa + v|` with `kappa` the ambient curvature.
///
/// This is the trace check with an independent `lambda_prof`; it exposes
/// curves that satisfy the profile ODE but are not solitons, such as the
/// great-circle branch where `lambda = 0` but `-v = sin s`.
pub fn ambient_trace_gap(curve: &ProfileCurve) -> Result<(f64, f64), ProfileError> {
    let kappa = ambient_profile_curvature(curve)?;
    let m = curve.params.m();
    let mut worst = (0.0, curve.samples[0].s);
    for (smp, k) in curve.samples.iter().zip(kappa) {
        if let Some(k) = k {
            let gap = (m * smp.lambda_tan + k + smp.v).abs();
            if gap > worst.0 {
                worst = (gap, smp.s);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_curvatures() {
        for n in 1..5 {
            let p = SolitonParams::new(n).unwrap();
            let k = Kinematic {
                s: 0.0,
                u: p.u_eq(),
                v: 0.0,
                a: (1.0 / p.two_n()).sqrt(),
            };
            let (lt, lp) = principal_curvatures(&p, &k, CurvaturePolicy::Strict).unwrap();
            let m = p.m();
            assert!((lt + 1.0 / m.sqrt()).abs() < 1e-12);
            assert!((lp - m.sqrt()).abs() < 1e-12);
            let (h, a2, _) = mean_and_norms(&p, 0.0, lt, lp, 0.0).unwrap();
            assert!(h.abs() < 1e-12 && (a2 - p.two_n()).abs() < 1e-12);
        }
    }

    #[test]
    fn strict_policy_rejects_zero_drift() {
        let p = SolitonParams::new(1).unwrap();
        let k = Kinematic {
            s: 0.0,
            u: 1.0,
            v: 0.0,
            a: 0.0,
        };
        assert!(principal_curvatures(&p, &k, CurvaturePolicy::Strict).is_err());
        let (lt, lp) = principal_curvatures(&p, &k, CurvaturePolicy::Fallback).unwrap();
        assert_eq!((lt, lp), (0.0, 0.0));
    }

    #[test]
    fn trace_mismatch_is_reported() {
        let p = SolitonParams::new(1).unwrap();
        let r = mean_and_norms(&p, 1.0, 0.0, 0.0, -0.5);
        assert!(matches!(r, Err(ProfileError::SolitonResidual { .. })));
    }

    #[test]
    fn clifford_profile_angle() {
        let p = SolitonParams::new(1).unwrap();
        for sign in [1i8, -1] {
            let c = clifford_profile(&p, 0.0, 0.01, 101, sign);
            let last = c.samples.last().unwrap();
            assert!((last.theta_amb - sign as f64 * 2f64.sqrt()).abs() < 1e-13);
            assert!((last.r - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
            assert!((last.y.hypot(last.z) - 0.5f64.sqrt()).abs() < 1e-15);
            assert_eq!(c.samples[0].theta_amb, 0.0);
        }
    }

    #[test]
    fn nonuniform_grid_detected() {
        let p = SolitonParams::new(1).unwrap();
        let mut c = clifford_profile(&p, 0.0, 0.01, 5, 1);
        c.samples[2].s += 1e-4;
        assert!(matches!(
            c.uniform_step(),
            Err(ProfileError::NonUniform { .. })
        ));
    }
}
