//! The doubled soliton: interior branch from `(1, 0)`, continued through
//! the totally geodesic slice `u = 1` by symmetry, and its diagnostics.

use std::f64::consts::{FRAC_PI_2, PI};

use thiserror::Error;

use crate::boundary::{
    boundary_start, series_g, series_state, BoundaryStart, StartMethod, BRANCH_TOL_FACTOR,
};
use crate::integrator::{
    integrate, Direction, IntegratorConfig, IntegratorError, Termination, Trajectory,
};
use crate::phase::{clifford_radii, equilibrium, g_of, PhasePoint, SolitonParams};
use crate::profile::{
    lifted_rk4, profile_from_kinematics, soliton_residual, CurvaturePolicy, Kinematic,
    ProfileCurve, ProfileError, ProfileSample,
};

/// Dead-band for counting sign changes of `H`.
pub const SIGN_DEAD_BAND: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolitonError {
    #[error("boundary start: {0}")]
    Start(IntegratorError),
    #[error("cross-validation start: {0}")]
    CrossValidation(IntegratorError),
    #[error("forward integration: {0}")]
    Integration(IntegratorError),
    #[error("forward integration ended with {0} before converging")]
    Terminated(&'static str),
    #[error("reconstruction: {0}")]
    Reconstruction(#[from] ProfileError),
    #[error("no convergence to the Clifford torus within {tol:e} (final distance {last:e})")]
    NotConverged { tol: f64, last: f64 },
}

impl SolitonError {
    /// Pipeline stage that failed.
    pub fn stage(&self) -> &'static str {
        match self {
            SolitonError::Start(_) => "boundary_start",
            SolitonError::CrossValidation(_) => "cross_validation",
            SolitonError::Integration(_) | SolitonError::Terminated(_) => "integrate_forward",
            SolitonError::Reconstruction(_) => "reconstruct_profile",
            SolitonError::NotConverged { .. } => "clifford_convergence",
        }
    }
}

/// How the profile is continued to `s < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlueMap {
    /// `(u, y, z)(-s) = (u, -y, -z)(s)`: the analytic continuation of the branch.
    HalfTurn,
    /// `(u, y, z)(-s) = (u, -y, z)(s)`: reflection across the slice.
    Reflection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuilderConfig {
    pub integrator: IntegratorConfig,
    /// Arclength at which the series start hands over to the integrator.
    pub handoff: f64,
    pub clifford_tol: f64,
    /// Pseudo-periods of tail kept after Clifford convergence.
    pub tail_periods: f64,
    /// Explicit half-range `S`, overriding the convergence-based default.
    pub half_range: Option<f64>,
    pub theta_sign: i8,
    pub glue: GlueMap,
    /// Samples of the series segment on `[0, handoff)`.
    pub series_samples: usize,
    pub cross_validate: bool,
    /// Upper end of the range over which sign changes of `H` are counted.
    pub sign_window: f64,
}

impl Default for BuilderConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            handoff: 0.1,
            clifford_tol: 1e-6,
            tail_periods: 5.0,
            half_range: None,
            theta_sign: 1,
            glue: GlueMap::HalfTurn,
            series_samples: 16,
            cross_validate: true,
            sign_window: 200.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CliffordConvergence {
    pub s_star: f64,
    pub index: usize,
    /// `(u, sqrt(1 - u^2))` at the last sample: radii of the limiting torus.
    pub terminal_radii: (f64, f64),
    pub clifford_radii: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonDiagnostics {
    pub clifford_s_star: f64,
    pub sign_changes: usize,
    pub winding: f64,
    pub symmetry_defect: f64,
    pub sup_norm_a2: f64,
    pub sup_norm_a2_at: f64,
    pub glue_curvature_norm: f64,
    pub half_range: f64,
    pub max_soliton_residual: f64,
    /// `|u - u_n|` at the two ends, `(s = -S, s = S)`.
    pub terminal_u_gap: (f64, f64),
    /// Distance between the series and perturbation starts at the handoff.
    pub series_perturbation_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolitonSurface {
    pub params: SolitonParams,
    pub profile: ProfileCurve,
    pub glue_index: usize,
    pub diagnostics: SolitonDiagnostics,
    /// Forward trajectory from the handoff, truncated at `S`.
    pub branch: Trajectory,
    pub start: BoundaryStart,
    pub config: BuilderConfig,
}

pub fn detect_clifford_convergence(
    traj: &Trajectory,
    tol: f64,
) -> Result<CliffordConvergence, SolitonError> {
    let d = traj.eq_distances();
    let last = *d.last().expect("non-empty trajectory");
    if !(last < tol) {
        return Err(SolitonError::NotConverged { tol, last });
    }
    let mut index = d.len() - 1;
    while index > 0 && d[index - 1] < tol {
        index -= 1;
    }
    let u = traj.last().point.u;
    Ok(CliffordConvergence {
        s_star: traj.samples[index].s,
        index,
        terminal_radii: (u, (1.0 - u * u).max(0.0).sqrt()),
        clifford_radii: clifford_radii(&traj.params),
    })
}

/// Sign changes with a dead-band: values within `SIGN_DEAD_BAND` of 0 are skipped.
pub fn count_sign_changes(values: &[f64]) -> usize {
    let mut last = 0i8;
    let mut count = 0;
    for &x in values {
        if x.abs() <= SIGN_DEAD_BAND {
            continue;
        }
        let sg = if x > 0.0 { 1 } else { -1 };
        if last != 0 && sg != last {
            count += 1;
        }
        last = sg;
    }
    count
}

/// Largest `|A|^2` and where it occurs.
pub fn sup_norm_a2(curve: &ProfileCurve) -> (f64, f64) {
    curve
        .samples
        .iter()
        .fold((f64::NEG_INFINITY, f64::NAN), |acc, x| {
            if x.norm_a2 > acc.0 {
                (x.norm_a2, x.s)
            } else {
                acc
            }
        })
}

/// Least-squares slope of `ln |p - p_n|` against `s` over samples with `s >= s_from`,
/// weighted by local spacing.
pub fn tail_contraction_rate(traj: &Trajectory, s_from: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|x| x.s >= s_from)
        .filter_map(|x| {
            let r = x.offset[0].hypot(x.offset[1]);
            (r > 0.0).then(|| (x.s, r.ln()))
        })
        .collect();
    weighted_slope(&pts)
}

/// Mean `theta'` over samples with `s >= s_from`.
pub fn tail_winding_rate(traj: &Trajectory, s_from: f64) -> Option<f64> {
    let i0 = traj.samples.iter().position(|x| x.s >= s_from)?;
    let i1 = traj.samples.len() - 1;
    let ds = traj.samples[i1].s - traj.samples[i0].s;
    (ds > 0.0).then(|| (traj.theta_unwrapped[i1] - traj.theta_unwrapped[i0]) / ds)
}

fn weighted_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len();
    let w: Vec<f64> = (0..n)
        .map(|i| {
            let lo = pts[i.saturating_sub(1)].0;
            let hi = pts[(i + 1).min(n - 1)].0;
            0.5 * (hi - lo)
        })
        .collect();
    let sw: f64 = w.iter().sum();
    let mx = pts.iter().zip(&w).map(|(p, w)| w * p.0).sum::<f64>() / sw;
    let my = pts.iter().zip(&w).map(|(p, w)| w * p.1).sum::<f64>() / sw;
    let sxy: f64 = pts
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.0 - mx) * (p.1 - my))
        .sum();
    let sxx: f64 = pts
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.0 - mx).powi(2))
        .sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Mirror image of a sample at `-s` under the glue map.
pub fn mirror_sample(smp: &ProfileSample, glue: GlueMap) -> ProfileSample {
    match glue {
        GlueMap::HalfTurn => ProfileSample {
            s: -smp.s,
            v: -smp.v,
            r: -smp.r,
            y: -smp.y,
            z: -smp.z,
            lambda_tan: -smp.lambda_tan,
            lambda_prof: -smp.lambda_prof,
            h: -smp.h,
            drift_a: -smp.drift_a,
            ..*smp
        },
        // The reflected half is congruent to the original, so its curvatures
        // and drift are even, while v = u' is odd; the trace identity H = -v
        // then fails there.
        GlueMap::Reflection => ProfileSample {
            s: -smp.s,
            v: -smp.v,
            theta_amb: -smp.theta_amb,
            y: -smp.y,
            zp: -smp.zp,
            ..*smp
        },
    }
}

/// Doubles a profile that starts at the glue point `s = 0`.
pub fn double_profile(half: &ProfileCurve, glue: GlueMap) -> (ProfileCurve, usize) {
    let mut samples: Vec<ProfileSample> = half
        .samples
        .iter()
        .skip(1)
        .rev()
        .map(|x| mirror_sample(x, glue))
        .collect();
    let glue_index = samples.len();
    samples.extend_from_slice(&half.samples);
    (
        ProfileCurve {
            samples,
            ..half.clone()
        },
        glue_index,
    )
}

/// Largest parity defect over mirrored sample pairs.
pub fn symmetry_defect(curve: &ProfileCurve, glue_index: usize, glue: GlueMap) -> f64 {
    let z_sign = match glue {
        GlueMap::HalfTurn => -1.0,
        GlueMap::Reflection => 1.0,
    };
    let s = &curve.samples;
    let mut worst: f64 = 0.0;
    for k in 1..=glue_index.min(s.len() - 1 - glue_index) {
        let (a, b) = (&s[glue_index - k], &s[glue_index + k]);
        let d = (a.s + b.s).abs()
            + (a.u - b.u).abs()
            + (a.v + b.v).abs()
            + (a.y + b.y).abs()
            + (a.z - z_sign * b.z).abs();
        worst = worst.max(d);
    }
    worst
}

fn pseudo_period(params: &SolitonParams) -> f64 {
    2.0 * PI / equilibrium(params).beta()
}

pub fn build_theorem_a(
    params: &SolitonParams,
    cfg: &BuilderConfig,
) -> Result<SolitonSurface, SolitonError> {
    let delta = cfg.handoff;
    let icfg = IntegratorConfig {
        abs_tol: cfg.integrator.abs_tol * BRANCH_TOL_FACTOR,
        rel_tol: cfg.integrator.rel_tol * BRANCH_TOL_FACTOR,
        ..cfg.integrator
    };
    let q = PhasePoint::new(1.0, 0.0);
    let start = boundary_start(params, q, StartMethod::Series, delta, &icfg)
        .map_err(SolitonError::Start)?;
    let series_perturbation_gap = if cfg.cross_validate {
        let pert = boundary_start(params, q, StartMethod::Perturbation, delta, &icfg)
            .map_err(SolitonError::CrossValidation)?;
        Some(pert.state.dist(&start.state))
    } else {
        None
    };

    let run_cfg = IntegratorConfig {
        eq_radius: 0.0,
        ..icfg
    };
    let target = match cfg.half_range {
        Some(s) => s,
        None => {
            // First pass: find s* with the equilibrium stop well below the tolerance.
            let probe_cfg = IntegratorConfig {
                eq_radius: cfg.clifford_tol * 1e-3,
                ..icfg
            };
            let probe = integrate(params, start.state, delta, Direction::Forward, &probe_cfg)
                .map_err(SolitonError::Integration)?;
            if probe.termination == Termination::StepFailure {
                return Err(SolitonError::Terminated(probe.termination.as_str()));
            }
            let conv = detect_clifford_convergence(&probe, cfg.clifford_tol)?;
            conv.s_star + cfg.tail_periods * pseudo_period(params)
        }
    };
    if target > icfg.horizon {
        return Err(SolitonError::NotConverged {
            tol: cfg.clifford_tol,
            last: f64::NAN,
        });
    }
    let full_cfg = IntegratorConfig {
        horizon: target - delta,
        ..run_cfg
    };
    let branch = integrate(params, start.state, delta, Direction::Forward, &full_cfg)
        .map_err(SolitonError::Integration)?;
    if branch.termination != Termination::HorizonReached {
        return Err(SolitonError::Terminated(branch.termination.as_str()));
    }
    let conv = detect_clifford_convergence(&branch, cfg.clifford_tol)?;

    let m = cfg.series_samples.max(1);
    let mut kin: Vec<Kinematic> = (0..m)
        .map(|j| {
            let s = delta * j as f64 / m as f64;
            let p = series_state(params, s);
            Kinematic {
                s,
                u: p.u,
                v: p.v,
                a: series_g(params, s),
            }
        })
        .collect();
    kin[0] = Kinematic {
        s: 0.0,
        u: 1.0,
        v: 0.0,
        a: 0.0,
    };
    kin.extend(branch.samples.iter().map(|x| Kinematic {
        s: x.s,
        u: x.point.u,
        v: x.point.v,
        a: g_of(&x.point),
    }));
    let half = profile_from_kinematics(
        params,
        &kin,
        cfg.theta_sign,
        -FRAC_PI_2,
        CurvaturePolicy::Fallback,
    )?;
    let (profile, glue_index) = double_profile(&half, cfg.glue);
    let diagnostics = diagnose(
        params,
        cfg,
        &profile,
        glue_index,
        &branch,
        conv,
        target,
        series_perturbation_gap,
    );
    Ok(SolitonSurface {
        params: *params,
        profile,
        glue_index,
        diagnostics,
        branch,
        start,
        config: *cfg,
    })
}

#[allow(clippy::too_many_arguments)]
fn diagnose(
    params: &SolitonParams,
    cfg: &BuilderConfig,
    profile: &ProfileCurve,
    glue_index: usize,
    branch: &Trajectory,
    conv: CliffordConvergence,
    half_range: f64,
    series_perturbation_gap: Option<f64>,
) -> SolitonDiagnostics {
    let positive: Vec<f64> = profile.samples[glue_index..]
        .iter()
        .filter(|x| x.s <= cfg.sign_window)
        .map(|x| x.h)
        .collect();
    let (sup, at) = sup_norm_a2(profile);
    let un = params.u_eq();
    let first = &profile.samples[0];
    let last = profile.samples.last().expect("non-empty");
    let winding = (branch.theta_unwrapped.last().unwrap() - branch.theta_unwrapped[0]) / (2.0 * PI);
    SolitonDiagnostics {
        clifford_s_star: conv.s_star,
        sign_changes: count_sign_changes(&positive),
        winding,
        symmetry_defect: symmetry_defect(profile, glue_index, cfg.glue),
        sup_norm_a2: sup,
        sup_norm_a2_at: at,
        glue_curvature_norm: profile.samples[glue_index].norm_a2.sqrt(),
        half_range,
        max_soliton_residual: profile
            .samples
            .iter()
            .map(|x| soliton_residual(params, x).abs())
            .fold(0.0, f64::max),
        terminal_u_gap: ((first.u - un).abs(), (last.u - un).abs()),
        series_perturbation_gap,
    }
}

impl SolitonSurface {
    /// The doubled profile on a uniform grid of spacing `h` over `[-S', S']`,
    /// `S'` the largest multiple of `h` not beyond the half-range.
    ///
    /// Produced by fixed-step RK4 on the lifted system, seeded with the series
    /// state at the handoff (which must be a multiple of `h`), so that grid
    /// values carry a smooth integration error rather than interpolation noise.
    pub fn uniform_profile(&self, h: f64) -> Result<ProfileCurve, ProfileError> {
        let p = &self.params;
        let delta = self.start.s_handoff;
        let k0 = (delta / h).round() as usize;
        let kmax = (self.diagnostics.half_range / h).floor() as usize;
        let st = self.start.state;
        let seed = Kinematic {
            s: k0 as f64 * h,
            u: st.u,
            v: st.v,
            a: series_g(p, delta),
        };
        let mut back = lifted_rk4(p, seed, -h, k0);
        back.reverse();
        back.pop();
        let fwd = lifted_rk4(p, seed, h, kmax.saturating_sub(k0));
        back.extend(fwd);
        for (i, k) in back.iter_mut().enumerate() {
            k.s = i as f64 * h;
        }
        // The integration lands within rounding of the glue point; use it exactly.
        back[0] = Kinematic {
            s: 0.0,
            u: 1.0,
            v: 0.0,
            a: 0.0,
        };
        let half = profile_from_kinematics(
            p,
            &back,
            self.profile.theta_sign,
            self.profile.tau,
            CurvaturePolicy::Fallback,
        )?;
        Ok(double_profile(&half, self.config.glue).0)
    }
}
