//! Finite-difference checks of the curvature identities of a soliton on
//! uniformly sampled profiles.
//!
//! For a radial function `phi(s)` the drifted Laplacian reduces to
//! `phi'' + (2n-1)(u'/u) phi' + a phi'`. Every check is evaluated on the
//! given grid (spacing `h/2`) and on its every-other-sample subgrid
//! (spacing `h`); the ratio of the two maxima is the refinement factor.

use thiserror::Error;

use crate::profile::{normal_vector, ProfileCurve, ProfileError, H_CROSS_TOL};

/// `tol_id(h) = C h^2`.
pub const TOL_ID_C: f64 = 10.0;

/// Pointwise tolerance of `a^2 + u^2 + H^2 = 1`.
pub const XITOP_TOL: f64 = 1e-7;

/// Residuals below `ROUNDOFF_C * eps / h_fine^2` on both grids are at the
/// rounding level of a second difference; the refinement factor is then
/// noise and is not required.
pub const ROUNDOFF_C: f64 = 64.0;

/// Rounding level of the stencils on a grid of spacing `h`.
pub fn roundoff_floor(h: f64) -> f64 {
    ROUNDOFF_C * f64::EPSILON / (h * h)
}

/// Accepted range of the two-grid refinement factor.
pub const REFINEMENT_RANGE: (f64, f64) = (3.0, 5.0);

/// Samples at each end left out of every stencil.
pub const EDGE: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdentityError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("profile has {0} samples; at least 11 are needed")]
    TooShort(usize),
    #[error("ambient check is only defined for n = 1")]
    NotSurface,
}

/// Which version of the identities to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentityForm {
    /// As commonly stated: `Delta H = -H|A|^2`,
    /// `Delta lambda_i = (2n - |A|^2) lambda_i - H`,
    /// `1/2 Delta |A|^2 = |grad A|^2 + (2n - |A|^2)|A|^2 - H^2`.
    Stated,
    /// With the terms that the Gauss equation of the round sphere and the
    /// Codazzi equations add for a rotational hypersurface:
    /// `Delta H = -(|A|^2 + 2n) H`,
    /// `Delta lambda_1 = (2n - |A|^2) lambda_1 - 2H - 2 (u'/u)^2 (lambda_2n - lambda_1)`,
    /// `Delta lambda_2n = (2n - |A|^2) lambda_2n - 2H + 2(2n-1)(u'/u)^2 (lambda_2n - lambda_1)`,
    /// `1/2 Delta |A|^2 = |grad A|^2 + (2n - |A|^2)|A|^2 - 2 H^2`.
    Corrected,
}

impl IdentityForm {
    pub fn as_str(self) -> &'static str {
        match self {
            IdentityForm::Stated => "stated",
            IdentityForm::Corrected => "corrected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub name: String,
    pub form: IdentityForm,
    /// Spacing of the coarse grid.
    pub h: f64,
    pub tolerance: f64,
    /// Largest residual on the coarse grid.
    pub max_residual: f64,
    pub max_residual_fine: Option<f64>,
    /// `(s, residual)` on the coarse grid.
    pub residual_grid: Vec<(f64, f64)>,
    pub refinement_factor: Option<f64>,
    /// Largest `|(4 r_fine - r_coarse)/3|` over shared nodes: the residual with
    /// the `h^2` truncation term removed.
    pub extrapolated_residual: Option<f64>,
    pub pass: bool,
}

/// A residual evaluated at the interior samples of one grid.
type ResidualFn = dyn Fn(&Grid) -> Vec<(f64, f64)>;

/// Column view of a uniform profile with its spacing.
pub struct Grid<'a> {
    pub curve: &'a ProfileCurve,
    pub h: f64,
}

impl<'a> Grid<'a> {
    pub fn new(curve: &'a ProfileCurve) -> Result<Self, IdentityError> {
        if curve.len() < 11 {
            return Err(IdentityError::TooShort(curve.len()));
        }
        Ok(Self {
            curve,
            h: curve.uniform_step()?,
        })
    }

    fn range(&self) -> std::ops::Range<usize> {
        EDGE..self.curve.len() - EDGE
    }

    fn d1(&self, phi: &[f64], i: usize) -> f64 {
        (phi[i + 1] - phi[i - 1]) / (2.0 * self.h)
    }

    fn d2(&self, phi: &[f64], i: usize) -> f64 {
        (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / (self.h * self.h)
    }
}

/// `phi'' + (2n-1)(u'/u) phi' + a phi'` at interior samples, `None` at the
/// excluded edges.
pub fn radial_drifted_laplacian(
    curve: &ProfileCurve,
    phi: &[f64],
) -> Result<Vec<Option<f64>>, IdentityError> {
    let grid = Grid::new(curve)?;
    let mut out = vec![None; curve.len()];
    for i in grid.range() {
        out[i] = Some(lap_at(&grid, phi, i));
    }
    Ok(out)
}

fn lap_at(grid: &Grid, phi: &[f64], i: usize) -> f64 {
    let smp = &grid.curve.samples[i];
    let m = grid.curve.params.m();
    grid.d2(phi, i) + (m * smp.v / smp.u + smp.drift_a) * grid.d1(phi, i)
}

fn col(curve: &ProfileCurve, f: impl Fn(&crate::profile::ProfileSample) -> f64) -> Vec<f64> {
    curve.map(f)
}

fn lap_h_residual(grid: &Grid, form: IdentityForm) -> Vec<(f64, f64)> {
    let c = grid.curve;
    let hh = col(c, |x| x.h);
    let two_n = c.params.two_n();
    grid.range()
        .map(|i| {
            let x = &c.samples[i];
            let extra = match form {
                IdentityForm::Stated => 0.0,
                IdentityForm::Corrected => two_n * x.h,
            };
            (x.s, lap_at(grid, &hh, i) + x.h * x.norm_a2 + extra)
        })
        .collect()
}

fn lap_lambda_residual(
    grid: &Grid,
    form: IdentityForm,
    profile_direction: bool,
) -> Vec<(f64, f64)> {
    let c = grid.curve;
    let lam = if profile_direction {
        col(c, |x| x.lambda_prof)
    } else {
        col(c, |x| x.lambda_tan)
    };
    let two_n = c.params.two_n();
    let m = c.params.m();
    grid.range()
        .map(|i| {
            let x = &c.samples[i];
            let base = lap_at(grid, &lam, i) - (two_n - x.norm_a2) * lam[i] + x.h;
            let extra = match form {
                IdentityForm::Stated => 0.0,
                IdentityForm::Corrected => {
                    let w = (x.v / x.u).powi(2) * (x.lambda_prof - x.lambda_tan);
                    x.h + if profile_direction {
                        -2.0 * m * w
                    } else {
                        2.0 * w
                    }
                }
            };
            (x.s, base + extra)
        })
        .collect()
}

/// `(G_full, G_traceless)` at interior samples.
fn grad_norms(grid: &Grid, form: IdentityForm) -> Vec<(f64, f64, f64)> {
    let c = grid.curve;
    let a2 = col(c, |x| x.norm_a2);
    let tl = col(c, |x| x.traceless2);
    let two_n = c.params.two_n();
    let k = match form {
        IdentityForm::Stated => 1.0,
        IdentityForm::Corrected => 2.0,
    };
    grid.range()
        .map(|i| {
            let x = &c.samples[i];
            let gf = 0.5 * lap_at(grid, &a2, i) - (two_n - x.norm_a2) * x.norm_a2 + k * x.h * x.h;
            let gt = 0.5 * lap_at(grid, &tl, i) - (two_n - x.norm_a2) * x.traceless2;
            (x.s, gf, gt)
        })
        .collect()
}

fn cross_relation_residual(grid: &Grid, form: IdentityForm) -> Vec<(f64, f64)> {
    let hh = col(grid.curve, |x| x.h);
    let two_n = grid.curve.params.two_n();
    grid.range()
        .zip(grad_norms(grid, form))
        .map(|(i, (s, gf, gt))| {
            let hp = grid.d1(&hh, i);
            (s, gf - gt - hp * hp / two_n)
        })
        .collect()
}

fn div_residual(grid: &Grid) -> Vec<(f64, f64)> {
    let c = grid.curve;
    let m = c.params.m();
    let psi = col(c, |x| x.u.powf(m) * x.drift_a);
    grid.range()
        .map(|i| {
            let x = &c.samples[i];
            (x.s, grid.d1(&psi, i) / x.u.powf(m) - x.h * x.h)
        })
        .collect()
}

/// `<J nu, e_s>` for the complex structure matching the curve orientation.
/// Both signs of `theta_sign` reduce to `c_y z' - c_z y'`.
pub fn j_nu_tangent(smp: &crate::profile::ProfileSample) -> f64 {
    let nu = normal_vector(smp);
    nu[1] * smp.zp - nu[2] * smp.yp
}

fn grad_h_residual(grid: &Grid) -> Vec<(f64, f64)> {
    let c = grid.curve;
    let hh = col(c, |x| x.h);
    grid.range()
        .map(|i| {
            let x = &c.samples[i];
            (
                x.s,
                grid.d1(&hh, i) - (j_nu_tangent(x) - x.lambda_prof * x.drift_a),
            )
        })
        .collect()
}

fn max_abs(r: &[(f64, f64)]) -> f64 {
    r.iter().map(|x| x.1.abs()).fold(0.0, f64::max)
}

fn two_grid(
    name: &str,
    form: IdentityForm,
    fine: &ProfileCurve,
    f: &ResidualFn,
) -> Result<IdentityReport, IdentityError> {
    let coarse_curve = fine.subsample(2);
    let gf = Grid::new(fine)?;
    let gc = Grid::new(&coarse_curve)?;
    let rf = f(&gf);
    let rc = f(&gc);
    let (mc, mf) = (max_abs(&rc), max_abs(&rf));
    let tolerance = TOL_ID_C * gc.h * gc.h;
    let floor = roundoff_floor(gf.h);
    let exact = mc < floor && mf < floor;
    let refinement_factor = if exact { None } else { Some(mc / mf) };
    // Coarse node k is fine node 2k; both vectors start at index EDGE.
    let extrapolated = rc
        .iter()
        .enumerate()
        .filter_map(|(j, c)| {
            rf.get(2 * (j + EDGE) - EDGE)
                .map(|f| ((4.0 * f.1 - c.1) / 3.0).abs())
        })
        .fold(0.0, f64::max);
    let converging =
        refinement_factor.is_none_or(|r| (REFINEMENT_RANGE.0..=REFINEMENT_RANGE.1).contains(&r));
    Ok(IdentityReport {
        name: name.to_string(),
        form,
        h: gc.h,
        tolerance,
        max_residual: mc,
        max_residual_fine: Some(mf),
        residual_grid: rc,
        refinement_factor,
        extrapolated_residual: Some(extrapolated),
        pass: mc < tolerance && converging,
    })
}

fn one_grid(
    name: &str,
    form: IdentityForm,
    h: f64,
    tolerance: f64,
    r: Vec<(f64, f64)>,
) -> IdentityReport {
    let m = max_abs(&r);
    IdentityReport {
        name: name.to_string(),
        form,
        h,
        tolerance,
        max_residual: m,
        max_residual_fine: None,
        residual_grid: r,
        refinement_factor: None,
        extrapolated_residual: None,
        pass: m < tolerance,
    }
}

/// `Delta H + H|A|^2` (stated) or `Delta H + H(|A|^2 + 2n)` (corrected).
pub fn check_lap_h(
    fine: &ProfileCurve,
    form: IdentityForm,
) -> Result<IdentityReport, IdentityError> {
    two_grid("lap_H", form, fine, &move |g| lap_h_residual(g, form))
}

/// Reports for `lambda_tan` and `lambda_prof`.
pub fn check_lap_lambda(
    fine: &ProfileCurve,
    form: IdentityForm,
) -> Result<[IdentityReport; 2], IdentityError> {
    Ok([
        two_grid("lap_lambda_tan", form, fine, &move |g| {
            lap_lambda_residual(g, form, false)
        })?,
        two_grid("lap_lambda_prof", form, fine, &move |g| {
            lap_lambda_residual(g, form, true)
        })?,
    ])
}

/// Cross relation `G_full - G_traceless = H'^2/2n` and nonnegativity of both.
pub fn extract_grad_norms(
    fine: &ProfileCurve,
    form: IdentityForm,
) -> Result<[IdentityReport; 3], IdentityError> {
    let cross = two_grid("grad_norms_cross", form, fine, &move |g| {
        cross_relation_residual(g, form)
    })?;
    let coarse = fine.subsample(2);
    let gc = Grid::new(&coarse)?;
    let tol = TOL_ID_C * gc.h * gc.h;
    let norms = grad_norms(&gc, form);
    let neg_full = norms.iter().map(|x| (x.0, (-x.1).max(0.0))).collect();
    let neg_tl = norms.iter().map(|x| (x.0, (-x.2).max(0.0))).collect();
    Ok([
        cross,
        one_grid("grad_norm_full_nonneg", form, gc.h, tol, neg_full),
        one_grid("grad_norm_traceless_nonneg", form, gc.h, tol, neg_tl),
    ])
}

/// `(u^{2n-1} a)'/u^{2n-1} - H^2`.
pub fn check_div_xitop(fine: &ProfileCurve) -> Result<IdentityReport, IdentityError> {
    two_grid("div_xitop", IdentityForm::Stated, fine, &div_residual)
}

/// `H' - (<J nu, e_s> - lambda_2n a)`.
pub fn check_grad_h_radial(fine: &ProfileCurve) -> Result<IdentityReport, IdentityError> {
    two_grid(
        "grad_H_radial",
        IdentityForm::Stated,
        fine,
        &grad_h_residual,
    )
}

/// `a^2 + u^2 + H^2 - 1` at every sample, together with `|H| <= 1`.
pub fn check_xitop_norm(curve: &ProfileCurve) -> IdentityReport {
    let r: Vec<(f64, f64)> = curve
        .samples
        .iter()
        .map(|x| {
            let over = (x.h.abs() - 1.0).max(0.0);
            (
                x.s,
                x.drift_a * x.drift_a + x.u * x.u + x.h * x.h - 1.0 + over,
            )
        })
        .collect();
    let h = curve.uniform_step().unwrap_or(f64::NAN);
    one_grid("xitop_norm", IdentityForm::Stated, h, XITOP_TOL, r)
}

/// `(2n-1) lambda_tan + lambda_prof + v` at every sample: the trace of `A` is `H = -u'`.
pub fn check_trace(curve: &ProfileCurve) -> IdentityReport {
    let m = curve.params.m();
    let r = curve
        .samples
        .iter()
        .map(|x| (x.s, m * x.lambda_tan + x.lambda_prof + x.v))
        .collect();
    let h = curve.uniform_step().unwrap_or(f64::NAN);
    one_grid("trace_H", IdentityForm::Stated, h, H_CROSS_TOL, r)
}

/// All checks on one profile.
pub fn verify_profile(
    fine: &ProfileCurve,
    form: IdentityForm,
) -> Result<Vec<IdentityReport>, IdentityError> {
    let mut out = vec![check_lap_h(fine, form)?];
    out.extend(check_lap_lambda(fine, form)?);
    out.extend(extract_grad_norms(fine, form)?);
    // These do not depend on the form; label them with the requested one.
    for mut r in [
        check_div_xitop(fine)?,
        check_grad_h_radial(fine)?,
        check_xitop_norm(fine),
        check_trace(fine),
    ] {
        r.form = form;
        out.push(r);
    }
    Ok(out)
}

/// One row of [`ambient_divergence_n1`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbientDivergence {
    pub s: f64,
    /// Divergence at fiber angle 0.
    pub div: f64,
    pub h2: f64,
    /// Largest deviation of the divergence across fiber angles.
    pub alpha_spread: f64,
}

/// Divergence of the tangential Hopf field computed directly on a mesh of the
/// surface `(u cos t, u sin t, y, z)` in `S^3` (`n = 1`).
///
/// Uses every `stride`-th profile sample in `[i0, i1]` and `n_alpha` fiber
/// angles.
pub fn ambient_divergence_n1(
    curve: &ProfileCurve,
    i0: usize,
    i1: usize,
    stride: usize,
    n_alpha: usize,
) -> Result<Vec<AmbientDivergence>, IdentityError> {
    if curve.params.n() != 1 {
        return Err(IdentityError::NotSurface);
    }
    let h = curve.uniform_step()? * stride as f64;
    let sigma = curve.theta_sign as f64;
    let rows: Vec<usize> = (i0..=i1).step_by(stride).collect();
    let da = 2.0 * std::f64::consts::PI / n_alpha as f64;
    // (u X^alpha, u X^s) at each node.
    let mut fa = vec![vec![0.0; n_alpha]; rows.len()];
    let mut fs = vec![vec![0.0; n_alpha]; rows.len()];
    for (r, &i) in rows.iter().enumerate() {
        let x = &curve.samples[i];
        let nu3 = normal_vector(x);
        for j in 0..n_alpha {
            let (sa, ca) = (j as f64 * da).sin_cos();
            let nu = [
                sigma * nu3[0] * ca,
                sigma * nu3[0] * sa,
                sigma * nu3[1],
                sigma * nu3[2],
            ];
            // xi = -J_sigma f with J(x1, x2) = (-x2, x1) and sigma J on (y, z).
            let xi = [x.u * sa, -x.u * ca, sigma * x.z, -sigma * x.y];
            let xn: f64 = (0..4).map(|k| xi[k] * nu[k]).sum();
            let xt: Vec<f64> = (0..4).map(|k| xi[k] - xn * nu[k]).collect();
            let f_alpha = [-x.u * sa, x.u * ca, 0.0, 0.0];
            let f_s = [x.v * ca, x.v * sa, x.yp, x.zp];
            let xa: f64 = (0..4).map(|k| xt[k] * f_alpha[k]).sum::<f64>() / (x.u * x.u);
            let xs: f64 = (0..4).map(|k| xt[k] * f_s[k]).sum();
            fa[r][j] = x.u * xa;
            fs[r][j] = x.u * xs;
        }
    }
    let mut out = Vec::new();
    for r in 1..rows.len() - 1 {
        let x = &curve.samples[rows[r]];
        let div: Vec<f64> = (0..n_alpha)
            .map(|j| {
                let jp = (j + 1) % n_alpha;
                let jm = (j + n_alpha - 1) % n_alpha;
                ((fa[r][jp] - fa[r][jm]) / (2.0 * da) + (fs[r + 1][j] - fs[r - 1][j]) / (2.0 * h))
                    / x.u
            })
            .collect();
        let alpha_spread = div.iter().map(|d| (d - div[0]).abs()).fold(0.0, f64::max);
        out.push(AmbientDivergence {
            s: x.s,
            div: div[0],
            h2: x.h * x.h,
            alpha_spread,
        });
    }
    Ok(out)
}
