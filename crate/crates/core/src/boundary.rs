//! Starting the interior branch from a point of the boundary circle.
//!
//! Every circle point carries the great-circle solution `u = cos(s + s0)`
//! with `g = 0`, so an initial value on the circle does not determine a
//! solution. Two ways of selecting the interior branch are offered: a
//! power series at `(1, 0)`, and retraction into the disk followed by
//! extrapolation to zero retraction.

use crate::integrator::{
    integrate, unwrap_angle, Direction, IntegratorConfig, IntegratorError, Sample, Termination,
    Trajectory,
};
use crate::phase::{g_of, PhasePoint, SolitonParams, TOL_DOMAIN};

/// Below this `g` a sample is treated as lying on the circle.
pub const G_MIN: f64 = 1e-6;

const CIRCLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartMethod {
    Series,
    Perturbation,
}

/// Coefficients `(c6, c8, c10, c12)` of `u(s) = cos s + c6 s^6 + c8 s^8 + c10 s^10 + c12 s^12`.
pub fn series_coefficients(params: &SolitonParams) -> [f64; 4] {
    let n = params.n() as f64;
    [
        1.0 / 90.0,
        (8.0 * n - 7.0) / 1260.0,
        (544.0 * n * n - 528.0 * n + 81.0) / 226800.0,
        (10752.0 * n.powi(3) - 7712.0 * n * n - 5704.0 * n + 5573.0) / 14968800.0,
    ]
}

/// `(u, v)` of the interior branch at arclength `s >= 0` from `(1, 0)`, error `O(s^14)`.
pub fn series_state(params: &SolitonParams, s: f64) -> PhasePoint {
    let c = series_coefficients(params);
    let s2 = s * s;
    let s5 = s2 * s2 * s;
    let u = s.cos() + s5 * s * (c[0] + s2 * (c[1] + s2 * (c[2] + s2 * c[3])));
    let v =
        -s.sin() + s5 * (6.0 * c[0] + s2 * (8.0 * c[1] + s2 * (10.0 * c[2] + s2 * 12.0 * c[3])));
    PhasePoint::new(u, v)
}

/// `g` along the series branch, error `O(s^11)`; avoids the cancellation in `1 - u^2 - v^2`.
pub fn series_g(params: &SolitonParams, s: f64) -> f64 {
    let n = params.n() as f64;
    let s2 = s * s;
    let k5 = 2.0 * (n - 1.0) / 15.0;
    let k7 = (12.0 * n * n - 8.0 * n - 3.0) / 315.0;
    let k9 = 2.0 * (12.0 * n.powi(3) - 29.0 * n + 22.0) / 2835.0;
    s2 * s * (1.0 / 3.0 + s2 * (k5 + s2 * (k7 + s2 * k9)))
}

/// Neville table diagnostics of the perturbation start.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationReport {
    pub eps: Vec<f64>,
    /// Raw states at the handoff, one per `eps`.
    pub raw: Vec<PhasePoint>,
    /// Diagonal extrapolants, `diagonal[k]` uses `eps[0..=k]`.
    pub diagonal: Vec<PhasePoint>,
    /// `|diagonal[k] - diagonal[k-1]|`.
    pub diffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryStart {
    pub s_handoff: f64,
    pub state: PhasePoint,
    pub report: Option<ExtrapolationReport>,
}

/// Retractions `eps_k = 2^-k * 1e-3`, `k = 0..6`.
pub fn eps_schedule() -> Vec<f64> {
    (0..7).map(|k| 1e-3 / f64::powi(2.0, k)).collect()
}

/// Scale applied to the integrator tolerances on runs that leave the circle.
///
/// Solutions near the branch separate by a factor of about 2000 between
/// `s = 0.1` and `s = 1.3`; at the default tolerance of 1e-10 the global
/// error there reaches ~3e-6, and at 1e-13 still ~1e-7 for `n = 3`.
pub const BRANCH_TOL_FACTOR: f64 = 1e-4;

/// Agreement threshold between successive extrapolants.
pub const EXTRAPOLATION_TOL: f64 = 1e-8;

pub fn boundary_start(
    params: &SolitonParams,
    q: PhasePoint,
    method: StartMethod,
    s_handoff: f64,
    cfg: &IntegratorConfig,
) -> Result<BoundaryStart, IntegratorError> {
    if !(q.u > 0.0) || (q.u * q.u + q.v * q.v - 1.0).abs() > CIRCLE_TOL {
        return Err(IntegratorError::NotOnCircle { u: q.u, v: q.v });
    }
    if !(s_handoff > 0.0) {
        return Err(IntegratorError::Config(format!(
            "handoff must be positive, got {s_handoff}"
        )));
    }
    match method {
        StartMethod::Series => {
            if (q.u - 1.0).abs() > CIRCLE_TOL || q.v.abs() > CIRCLE_TOL {
                return Err(IntegratorError::SeriesOffAxis { u: q.u, v: q.v });
            }
            Ok(BoundaryStart {
                s_handoff,
                state: series_state(params, s_handoff),
                report: None,
            })
        }
        StartMethod::Perturbation => perturbation_start(params, q, s_handoff, cfg),
    }
}

fn perturbation_start(
    params: &SolitonParams,
    q: PhasePoint,
    s_handoff: f64,
    cfg: &IntegratorConfig,
) -> Result<BoundaryStart, IntegratorError> {
    let run_cfg = IntegratorConfig {
        abs_tol: cfg.abs_tol * BRANCH_TOL_FACTOR,
        rel_tol: cfg.rel_tol * BRANCH_TOL_FACTOR,
        horizon: s_handoff,
        eq_radius: 0.0,
        h_max: cfg.h_max.min(s_handoff),
        h_init: cfg.h_init.min(s_handoff),
        ..*cfg
    };
    let eps = eps_schedule();
    let mut raw = Vec::with_capacity(eps.len());
    for &e in &eps {
        let p0 = PhasePoint::new((1.0 - e) * q.u, (1.0 - e) * q.v);
        let t = integrate(params, p0, 0.0, Direction::Forward, &run_cfg)?;
        if t.termination != Termination::HorizonReached {
            return Err(IntegratorError::PerturbedRun(format!(
                "eps = {e:e} ended with {}",
                t.termination.as_str()
            )));
        }
        raw.push(t.last().point);
    }
    // The branch depends on sqrt(eps) to leading order, so extrapolate in t = sqrt(eps).
    let ts: Vec<f64> = eps.iter().map(|e| e.sqrt()).collect();
    let us: Vec<f64> = raw.iter().map(|p| p.u).collect();
    let vs: Vec<f64> = raw.iter().map(|p| p.v).collect();
    let du = neville_diagonal(&ts, &us);
    let dv = neville_diagonal(&ts, &vs);
    let diagonal: Vec<PhasePoint> = du
        .iter()
        .zip(&dv)
        .map(|(u, v)| PhasePoint::new(*u, *v))
        .collect();
    let diffs: Vec<f64> = diagonal.windows(2).map(|w| w[1].dist(&w[0])).collect();
    let state = *diagonal.last().expect("non-empty schedule");
    let report = ExtrapolationReport {
        eps,
        raw,
        diagonal,
        diffs: diffs.clone(),
    };
    if diffs.last().is_none_or(|d| !(*d < EXTRAPOLATION_TOL)) || !(g_of(&state) > 0.0) {
        return Err(IntegratorError::Extrapolation { diffs });
    }
    Ok(BoundaryStart {
        s_handoff,
        state,
        report: Some(report),
    })
}

/// Values at `t = 0` of the interpolating polynomials through the first `k + 1` points.
pub fn neville_diagonal(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    let m = ts.len();
    let mut table = ys.to_vec();
    let mut diag = vec![ys[0]];
    // After pass j, table[i] holds the extrapolant through points i-j..=i.
    for j in 1..m {
        for i in (j..m).rev() {
            let (ta, tb) = (ts[i - j], ts[i]);
            table[i] = (tb * table[i - 1] - ta * table[i]) / (tb - ta);
        }
        diag.push(table[j]);
    }
    // diag[j] uses points 0..=j.
    diag
}

/// Fixed-step classical RK4 in which `1 - u^2 - v^2` (and with it `g`) is
/// clamped to zero for the whole step when the step starts within
/// `TOL_DOMAIN` of the circle.
///
/// Started on the circle this follows the great-circle branch: this is the
/// "naive" on-circle integration that [`classify_branch`] must reject.
/// The middle RK4 stages sit `O(h^2)` inside the disk, so a per-stage clamp
/// would hand them `g ~ h` and the run would drift onto the interior branch.
pub fn integrate_naive(params: &SolitonParams, p0: PhasePoint, h: f64, length: f64) -> Trajectory {
    let m = params.m();
    let f = |x: [f64; 2], on_circle: bool| {
        let d = 1.0 - x[0] * x[0] - x[1] * x[1];
        let d = if on_circle { 0.0 } else { d.max(0.0) };
        [x[1], m * d / x[0] - x[1] * d.sqrt() - x[0]]
    };
    let steps = (length / h).round() as usize;
    let un = params.u_eq();
    let mk = |s: f64, x: [f64; 2]| Sample {
        s,
        point: PhasePoint::new(x[0], x[1]),
        offset: [x[0] - un, x[1]],
    };
    let mut x = [p0.u, p0.v];
    let mut samples = vec![mk(0.0, x)];
    for k in 0..steps {
        let c = 1.0 - x[0] * x[0] - x[1] * x[1] <= TOL_DOMAIN;
        let k1 = f(x, c);
        let k2 = f([x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]], c);
        let k3 = f([x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]], c);
        let k4 = f([x[0] + h * k3[0], x[1] + h * k3[1]], c);
        for i in 0..2 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        samples.push(mk((k + 1) as f64 * h, x));
    }
    let mut t = Trajectory {
        params: *params,
        samples,
        direction: Direction::Forward,
        termination: Termination::HorizonReached,
        boundary_point: None,
        theta_unwrapped: Vec::new(),
    };
    t.theta_unwrapped = unwrap_angle(&t).unwrap_or_default();
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Interior,
    Geodesic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchReport {
    pub branch: Branch,
    /// Largest `g` over samples after the first.
    pub max_g: f64,
    /// Largest `|1 - u^2 - v^2|`, which is tiny on the great-circle branch.
    pub max_circle_defect: f64,
}

/// Flags trajectories that never leave the circle (`g` identically 0).
pub fn classify_branch(traj: &Trajectory) -> BranchReport {
    let rest = &traj.samples[1.min(traj.samples.len() - 1)..];
    let max_g = rest.iter().map(|x| g_of(&x.point)).fold(0.0, f64::max);
    let max_circle_defect = rest
        .iter()
        .map(|x| x.point.defect().abs())
        .fold(0.0, f64::max);
    BranchReport {
        branch: if max_g < G_MIN {
            Branch::Geodesic
        } else {
            Branch::Interior
        },
        max_g,
        max_circle_defect,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neville_recovers_polynomial() {
        let ts = [0.5, 0.25, 0.125, 0.0625];
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 - 2.0 * t + 5.0 * t * t * t).collect();
        let d = neville_diagonal(&ts, &ys);
        assert!((d[3] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn series_matches_expected_correction() {
        let p = SolitonParams::new(1).unwrap();
        let st = series_state(&p, 0.1);
        let corr = st.u - 0.1f64.cos();
        assert!((corr - 1.1e-8).abs() < 0.05e-8);
        let g = series_g(&p, 0.1);
        assert!((g - g_of(&st)).abs() < 1e-9);
    }

    #[test]
    fn series_rejected_off_axis() {
        let p = SolitonParams::new(1).unwrap();
        let q = PhasePoint::new(0.5f64.cos(), -0.5f64.sin());
        let r = boundary_start(
            &p,
            q,
            StartMethod::Series,
            0.1,
            &IntegratorConfig::default(),
        );
        assert!(matches!(r, Err(IntegratorError::SeriesOffAxis { .. })));
        let r = boundary_start(
            &p,
            PhasePoint::new(0.5, 0.0),
            StartMethod::Perturbation,
            0.1,
            &IntegratorConfig::default(),
        );
        assert!(matches!(r, Err(IntegratorError::NotOnCircle { .. })));
    }
}
