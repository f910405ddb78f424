//! Adaptive Dormand-Prince 5(4) integration of the phase system.
//!
//! Steps are taken in coordinates centred at the equilibrium, `w = u - u_n`,
//! so trajectories can be followed far into the spiral without losing the
//! offset to cancellation.

use std::f64::consts::PI;

use thiserror::Error;

use crate::phase::{
    centered_q, lifted_field, polar_angle_rate, zeta, PhaseError, PhasePoint, SolitonParams,
    TOL_DOMAIN,
};

/// Largest admissible jump between consecutive raw polar angles.
pub const UNWRAP_LIMIT: f64 = 0.75 * PI;

/// Per-step cap on the change of polar angle; keeps unwrapping unambiguous.
const MAX_ANGLE_STEP: f64 = PI / 4.0;

/// Target half-width (in `s`) of the bracket when localizing the boundary event.
const EVENT_TOL_S: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error("invalid integrator configuration: {0}")]
    Config(String),
    #[error("consecutive polar angles at s = {s} differ by {jump:.3} rad; refine the step")]
    AngleAmbiguity { s: f64, jump: f64 },
    #[error("series start is only available at (1, 0), got ({u}, {v})")]
    SeriesOffAxis { u: f64, v: f64 },
    #[error("start point ({u}, {v}) is not on the boundary circle")]
    NotOnCircle { u: f64, v: f64 },
    #[error("extrapolation did not converge: successive differences {diffs:?}")]
    Extrapolation { diffs: Vec<f64> },
    #[error("integration from the perturbed start failed: {0}")]
    PerturbedRun(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    EquilibriumReached,
    HorizonReached,
    BoundaryHit,
    StepFailure,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::EquilibriumReached => "equilibrium_reached",
            Termination::HorizonReached => "horizon_reached",
            Termination::BoundaryHit => "boundary_hit",
            Termination::StepFailure => "step_failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Maximum arclength covered, measured from the start.
    pub horizon: f64,
    /// Distance to the equilibrium that ends the run; `0` disables the check.
    pub eq_radius: f64,
    /// Threshold on `1 - u^2 - v^2` that counts as reaching the circle.
    pub boundary_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            h_init: 1e-3,
            h_min: 1e-12,
            h_max: 0.05,
            horizon: 500.0,
            eq_radius: 1e-8,
            boundary_tol: 1e-9,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), IntegratorError> {
        let all = [
            self.abs_tol,
            self.rel_tol,
            self.h_init,
            self.h_min,
            self.h_max,
            self.horizon,
            self.boundary_tol,
        ];
        if all.iter().any(|x| !(*x > 0.0) || !x.is_finite()) || !(self.eq_radius >= 0.0) {
            return Err(IntegratorError::Config(format!("{self:?}")));
        }
        if !(self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return Err(IntegratorError::Config(
                "need h_min <= h_init <= h_max".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub s: f64,
    pub point: PhasePoint,
    /// `(u - u_n, v)`, kept separately for precision near the equilibrium.
    pub offset: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: SolitonParams,
    pub samples: Vec<Sample>,
    pub direction: Direction,
    pub termination: Termination,
    pub boundary_point: Option<PhasePoint>,
    pub theta_unwrapped: Vec<f64>,
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories are never empty")
    }

    /// Arclength covered, `|s_end - s_start|`.
    pub fn length(&self) -> f64 {
        (self.last().s - self.first().s).abs()
    }

    pub fn zetas(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|x| zeta(&self.params, &x.point))
            .collect()
    }

    /// Smallest increment of `zeta` between consecutive samples, with `s` increasing.
    pub fn min_zeta_increment(&self) -> f64 {
        let z = self.zetas();
        let sgn = self.direction.sign();
        z.windows(2)
            .map(|w| sgn * (w[1] - w[0]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance to the equilibrium at each sample.
    pub fn eq_distances(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|x| x.offset[0].hypot(x.offset[1]))
            .collect()
    }

    /// Cubic Hermite interpolation between samples; `s` must lie in the sampled range.
    pub fn interpolate(&self, s: f64) -> Option<PhasePoint> {
        let sgn = self.direction.sign();
        let key = sgn * s;
        let idx = self.samples.partition_point(|x| sgn * x.s <= key);
        if idx == 0 {
            return (self.samples[0].s == s).then_some(self.samples[0].point);
        }
        if idx == self.samples.len() {
            let l = self.last();
            return (l.s == s).then_some(l.point);
        }
        let a = &self.samples[idx - 1];
        let b = &self.samples[idx];
        let x = hermite(&self.params, a.s, a.offset, b.s, b.offset, s);
        Some(PhasePoint::new(self.params.u_eq() + x[0], x[1]))
    }
}

fn rhs(params: &SolitonParams, x: [f64; 2]) -> [f64; 2] {
    [x[1], centered_q(params, x[0], x[1])]
}

fn hermite(
    params: &SolitonParams,
    s0: f64,
    x0: [f64; 2],
    s1: f64,
    x1: [f64; 2],
    s: f64,
) -> [f64; 2] {
    let h = s1 - s0;
    let t = (s - s0) / h;
    let f0 = rhs(params, x0);
    let f1 = rhs(params, x1);
    let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
    let h10 = t * (1.0 - t) * (1.0 - t);
    let h01 = t * t * (3.0 - 2.0 * t);
    let h11 = t * t * (t - 1.0);
    [
        h00 * x0[0] + h10 * h * f0[0] + h01 * x1[0] + h11 * h * f1[0],
        h00 * x0[1] + h10 * h * f0[1] + h01 * x1[1] + h11 * h * f1[1],
    ]
}

// Dormand-Prince 5(4) coefficients; the system is autonomous so the nodes c_i are unused.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct StepResult {
    x: [f64; 2],
    err: [f64; 2],
    min_u: f64,
}

fn dp_step(params: &SolitonParams, x: [f64; 2], h: f64) -> StepResult {
    let un = params.u_eq();
    let f = |y: [f64; 2]| rhs(params, y);
    let add = |k: &[([f64; 2], f64)]| {
        let mut y = x;
        for (kk, c) in k {
            y[0] += h * c * kk[0];
            y[1] += h * c * kk[1];
        }
        y
    };
    let k1 = f(x);
    let y2 = add(&[(k1, A21)]);
    let k2 = f(y2);
    let y3 = add(&[(k1, A31), (k2, A32)]);
    let k3 = f(y3);
    let y4 = add(&[(k1, A41), (k2, A42), (k3, A43)]);
    let k4 = f(y4);
    let y5 = add(&[(k1, A51), (k2, A52), (k3, A53), (k4, A54)]);
    let k5 = f(y5);
    let y6 = add(&[(k1, A61), (k2, A62), (k3, A63), (k4, A64), (k5, A65)]);
    let k6 = f(y6);
    let xn = add(&[(k1, B1), (k3, B3), (k4, B4), (k5, B5), (k6, B6)]);
    let k7 = f(xn);
    let mut err = [0.0; 2];
    for i in 0..2 {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    let min_u = [y2, y3, y4, y5, y6, xn]
        .iter()
        .map(|y| un + y[0])
        .fold(f64::INFINITY, f64::min);
    StepResult { x: xn, err, min_u }
}

fn err_norm(err: [f64; 2], x0: [f64; 2], x1: [f64; 2], cfg: &IntegratorConfig) -> f64 {
    let mut acc = 0.0;
    for i in 0..2 {
        let sc = cfg.abs_tol + cfg.rel_tol * x0[i].abs().max(x1[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / 2.0).sqrt()
}

fn defect_of(params: &SolitonParams, x: [f64; 2]) -> f64 {
    let u = params.u_eq() + x[0];
    1.0 - u * u - x[1] * x[1]
}

fn sample_at(params: &SolitonParams, s: f64, x: [f64; 2]) -> Sample {
    Sample {
        s,
        point: PhasePoint::new(params.u_eq() + x[0], x[1]),
        offset: x,
    }
}

fn wrap(d: f64) -> f64 {
    let mut d = d % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

/// Integrates from `p0` (at arclength `s0`) in the given direction.
pub fn integrate(
    params: &SolitonParams,
    p0: PhasePoint,
    s0: f64,
    direction: Direction,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegratorError> {
    cfg.validate()?;
    p0.check()?;
    let sgn = direction.sign();
    let un = params.u_eq();
    let mut x = [p0.u - un, p0.v];
    let mut s = s0;
    let mut samples = vec![sample_at(params, s, x)];
    let finish = |samples: Vec<Sample>, termination, boundary_point| {
        let mut traj = Trajectory {
            params: *params,
            samples,
            direction,
            termination,
            boundary_point,
            theta_unwrapped: Vec::new(),
        };
        traj.theta_unwrapped = unwrap_angle(&traj)?;
        Ok(traj)
    };

    if x[0].hypot(x[1]) < cfg.eq_radius || (x[0] == 0.0 && x[1] == 0.0) {
        return finish(samples, Termination::EquilibriumReached, None);
    }

    let s_end = s0 + sgn * cfg.horizon;
    let mut h = cfg.h_init;
    let mut err_prev: f64 = 1e-4;
    loop {
        let remaining = (s_end - s) * sgn;
        let last_step = remaining <= h;
        let h_try = if last_step { remaining } else { h };
        let step = dp_step(params, x, sgn * h_try);
        let en = err_norm(step.err, x, step.x, cfg);
        let d_new = defect_of(params, step.x);
        let domain_ok = step.min_u > 0.0 && d_new >= -TOL_DOMAIN && en.is_finite();
        let angle_ok = {
            let a0 = x[1].atan2(x[0]);
            let a1 = step.x[1].atan2(step.x[0]);
            wrap(a1 - a0).abs() < MAX_ANGLE_STEP
        };

        if !domain_ok || !angle_ok || en > 1.0 {
            let shrink = if !domain_ok || !angle_ok {
                0.5
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, 0.9)
            };
            h = h_try * shrink;
            if h < cfg.h_min {
                if defect_of(params, x) < 1e-6 {
                    if let Some((sb, xb)) = lifted_crossing(params, s, x, sgn, cfg.h_init) {
                        samples.push(sample_at(params, sb, xb));
                        let bp = PhasePoint::new(un + xb[0], xb[1]);
                        return finish(samples, Termination::BoundaryHit, Some(bp));
                    }
                    let bp = PhasePoint::new(un + x[0], x[1]);
                    return finish(samples, Termination::BoundaryHit, Some(bp));
                }
                return finish(samples, Termination::StepFailure, None);
            }
            continue;
        }

        let s_new = if last_step { s_end } else { s + sgn * h_try };

        if d_new < cfg.boundary_tol {
            let (sb, xb) = lifted_crossing(params, s, x, sgn, h_try).unwrap_or_else(|| {
                localize_boundary(params, s, x, s_new, step.x, cfg.boundary_tol)
            });
            samples.push(sample_at(params, sb, xb));
            let bp = PhasePoint::new(un + xb[0], xb[1]);
            return finish(samples, Termination::BoundaryHit, Some(bp));
        }

        x = step.x;
        s = s_new;
        samples.push(sample_at(params, s, x));

        if cfg.eq_radius > 0.0 && x[0].hypot(x[1]) < cfg.eq_radius {
            return finish(samples, Termination::EquilibriumReached, None);
        }
        if last_step {
            return finish(samples, Termination::HorizonReached, None);
        }

        // PI controller (Hairer's constants).
        let en_c = en.max(1e-10);
        let fac = 0.9 * en_c.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
        h = (h_try * fac.clamp(0.2, 5.0)).min(cfg.h_max);
        err_prev = en_c;
    }
}

/// Where the solution through `x` meets the circle.
///
/// Close to the circle `1 - u^2 - v^2 = g^2` has a double root, but in the
/// lifted system `a = g` crosses zero with slope `v^2`. Continues `(u, v, g)`
/// in the lifted system and bisects on `a = 0`, searching up to `2^8 tau`.
fn lifted_crossing(
    params: &SolitonParams,
    s: f64,
    x: [f64; 2],
    sgn: f64,
    tau: f64,
) -> Option<(f64, [f64; 2])> {
    let un = params.u_eq();
    let p = PhasePoint::new(un + x[0], x[1]);
    let y0 = [p.u, p.v, p.defect().max(0.0).sqrt()];
    let run = |t: f64| {
        let h = sgn * t / 16.0;
        let mut y = y0;
        for _ in 0..16 {
            let k1 = lifted_field(params, y);
            let k2 = lifted_field(params, std::array::from_fn(|i| y[i] + 0.5 * h * k1[i]));
            let k3 = lifted_field(params, std::array::from_fn(|i| y[i] + 0.5 * h * k2[i]));
            let k4 = lifted_field(params, std::array::from_fn(|i| y[i] + h * k3[i]));
            for i in 0..3 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        y
    };
    let mut hi = tau;
    let mut expand = 0;
    loop {
        let y = run(hi);
        if !(y[0] > 0.0) {
            return None;
        }
        if y[2] <= 0.0 {
            break;
        }
        expand += 1;
        if expand > 8 {
            return None;
        }
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > EVENT_TOL_S {
        let mid = 0.5 * (lo + hi);
        if run(mid)[2] > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = run(hi);
    Some((s + sgn * hi, [y[0] - un, y[1]]))
}

/// Bisection on the Hermite interpolant for `1 - u^2 - v^2 = tol` inside one step.
fn localize_boundary(
    params: &SolitonParams,
    s0: f64,
    x0: [f64; 2],
    s1: f64,
    x1: [f64; 2],
    tol: f64,
) -> (f64, [f64; 2]) {
    let ev = |x: [f64; 2]| defect_of(params, x) - tol;
    let (mut a, mut b) = (s0, s1);
    let mut xb = x1;
    for _ in 0..200 {
        if (b - a).abs() <= EVENT_TOL_S {
            break;
        }
        let m = 0.5 * (a + b);
        let xm = hermite(params, s0, x0, s1, x1, m);
        if ev(xm) > 0.0 {
            a = m;
        } else {
            b = m;
            xb = xm;
        }
    }
    if (b - s1).abs() > 0.0 {
        return (b, xb);
    }
    (s1, x1)
}

pub fn integrate_forward(
    params: &SolitonParams,
    p0: PhasePoint,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegratorError> {
    integrate(params, p0, 0.0, Direction::Forward, cfg)
}

pub fn integrate_backward(
    params: &SolitonParams,
    p0: PhasePoint,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegratorError> {
    integrate(params, p0, 0.0, Direction::Backward, cfg)
}

/// Continuous polar angle around the equilibrium along the samples.
pub fn unwrap_angle(traj: &Trajectory) -> Result<Vec<f64>, IntegratorError> {
    let mut out = Vec::with_capacity(traj.samples.len());
    let mut prev_raw: Option<f64> = None;
    let mut acc = 0.0;
    for smp in &traj.samples {
        let [w, v] = smp.offset;
        if w == 0.0 && v == 0.0 {
            out.push(out.last().copied().unwrap_or(0.0));
            continue;
        }
        let raw = v.atan2(w);
        match prev_raw {
            None => acc = raw,
            Some(p) => {
                let d = wrap(raw - p);
                if d.abs() >= UNWRAP_LIMIT {
                    return Err(IntegratorError::AngleAmbiguity { s: smp.s, jump: d });
                }
                acc += d;
            }
        }
        prev_raw = Some(raw);
        out.push(acc);
    }
    Ok(out)
}

/// Winding number `(theta_end - theta_start) / 2 pi` over samples with `s` in `[a, b]`.
pub fn winding_between(traj: &Trajectory, a: f64, b: f64) -> Option<f64> {
    let idx: Vec<usize> = (0..traj.samples.len())
        .filter(|&i| {
            let s = traj.samples[i].s;
            s >= a.min(b) && s <= a.max(b)
        })
        .collect();
    let (&i0, &i1) = (idx.first()?, idx.last()?);
    Some((traj.theta_unwrapped[i1] - traj.theta_unwrapped[i0]) / (2.0 * PI))
}

/// Largest `theta'` (taken with `s` increasing) over the samples in the final
/// `fraction` of the run's arclength.
pub fn tail_angle_rate_max(traj: &Trajectory, fraction: f64) -> Option<f64> {
    let end = traj.last().s;
    let span = fraction * traj.length();
    traj.samples
        .iter()
        .filter(|x| (x.s - end).abs() <= span)
        .filter_map(|x| polar_angle_rate(&traj.params, &x.point).ok())
        .reduce(f64::max)
}

impl Sample {
    /// Polar coordinates `(r, theta)` around the equilibrium, from the centred offset.
    pub fn polar(&self) -> (f64, f64) {
        let [w, v] = self.offset;
        (w.hypot(v), v.atan2(w))
    }
}
