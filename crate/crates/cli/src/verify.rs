use std::f64::consts::FRAC_PI_2;

use hopf_soliton::identities::{verify_profile, IdentityError, IdentityForm, IdentityReport};
use hopf_soliton::profile::{
    lifted_rk4, profile_from_kinematics, CurvaturePolicy, Kinematic, ProfileCurve,
};
use hopf_soliton::{g_of, PhasePoint, SolitonParams};

use crate::args::{GateArg, GlobalArgs, VerifyArgs};
use crate::commands::{open_session, params, FLOW_COLUMNS};
use crate::error::CliError;
use crate::io::{fmt_f64, profile_from_table, read_table, Table, PROFILE_COLUMNS};

pub fn verify(g: &GlobalArgs, a: &VerifyArgs, args: Vec<String>) -> Result<(), CliError> {
    let params = params(g)?;
    if !(a.grid > 0.0) {
        return Err(CliError::Usage(format!(
            "grid must be positive, got {}",
            a.grid
        )));
    }
    let table = read_table(&a.table)?;
    if table.rows.is_empty() {
        return Err(CliError::Data(format!("{}: no rows", a.table.display())));
    }
    let mut session = open_session(g, "verify", args)?;
    session.input(&a.table)?;
    let gate = match a.gate {
        GateArg::Stated => IdentityForm::Stated,
        GateArg::Corrected => IdentityForm::Corrected,
    };
    session.config("gate", gate.as_str());

    let curve = if table.has(&PROFILE_COLUMNS) {
        session.config("source", "profile");
        profile_from_table(&table, params, g.theta_sign)?
    } else if table.has(&FLOW_COLUMNS) {
        session.config("source", "trajectory");
        session.config("grid", fmt_f64(a.grid));
        reintegrate(&table, params, g.theta_sign, a.grid)?
    } else {
        let missing: Vec<&str> = PROFILE_COLUMNS
            .iter()
            .filter(|c| !table.has(&[c]))
            .copied()
            .collect();
        return Err(CliError::Data(format!(
            "not a profile or trajectory table; missing {}",
            missing.join(",")
        )));
    };

    let mut reports = Vec::new();
    for form in [IdentityForm::Stated, IdentityForm::Corrected] {
        reports.extend(verify_profile(&curve, form).map_err(identity_err)?);
    }
    session.write(&a.report, render(&reports).as_bytes())?;
    if a.residuals {
        session.write("residuals.csv", &residual_csv(&reports)?)?;
    }
    session.finish()?;

    let failed: Vec<String> = reports
        .iter()
        .filter(|r| r.form == gate && !r.pass)
        .map(|r| r.name.clone())
        .collect();
    for r in reports.iter().filter(|r| r.form == gate) {
        println!(
            "{} {} {:e}",
            if r.pass { "pass" } else { "FAIL" },
            r.name,
            r.max_residual
        );
    }
    if !failed.is_empty() {
        return Err(CliError::Invariant(format!(
            "{} identities fail: {}",
            gate.as_str(),
            failed.join(", ")
        )));
    }
    Ok(())
}

fn identity_err(e: IdentityError) -> CliError {
    CliError::Data(e.to_string())
}

/// A uniform lifted integration over the range of a trajectory table, from its first row.
fn reintegrate(
    t: &Table,
    params: SolitonParams,
    theta_sign: i8,
    h: f64,
) -> Result<ProfileCurve, CliError> {
    let s = t.column("s")?;
    let u = t.column("u")?;
    let v = t.column("v")?;
    let (s0, s1) = (s[0], s[s.len() - 1]);
    let p0 = PhasePoint::new(u[0], v[0]);
    p0.check()
        .map_err(|e| CliError::Data(format!("first row: {e}")))?;
    let steps = ((s1 - s0).abs() / h).floor() as usize;
    let sgn = if s1 >= s0 { 1.0 } else { -1.0 };
    let start = Kinematic {
        s: s0,
        u: p0.u,
        v: p0.v,
        a: g_of(&p0),
    };
    let mut kin = lifted_rk4(&params, start, sgn * h, steps);
    if sgn < 0.0 {
        kin.reverse();
    }
    profile_from_kinematics(
        &params,
        &kin,
        theta_sign,
        -FRAC_PI_2,
        CurvaturePolicy::Fallback,
    )
    .map_err(|e| CliError::numeric("reconstruct_profile", e))
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), fmt_f64)
}

/// One `[name.form]` block of key-value lines per report.
pub fn render(reports: &[IdentityReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&format!("[{}.{}]\n", r.name, r.form.as_str()));
        out.push_str(&format!("identity_name = {}\n", r.name));
        out.push_str(&format!("form = {}\n", r.form.as_str()));
        out.push_str(&format!("h = {}\n", fmt_f64(r.h)));
        out.push_str(&format!("tolerance = {}\n", fmt_f64(r.tolerance)));
        out.push_str(&format!("max_residual = {}\n", fmt_f64(r.max_residual)));
        out.push_str(&format!(
            "max_residual_fine = {}\n",
            opt(r.max_residual_fine)
        ));
        out.push_str(&format!(
            "refinement_factor = {}\n",
            opt(r.refinement_factor)
        ));
        out.push_str(&format!(
            "extrapolated_residual = {}\n",
            opt(r.extrapolated_residual)
        ));
        out.push_str(&format!("samples = {}\n", r.residual_grid.len()));
        out.push_str(&format!("pass = {}\n\n", r.pass));
    }
    out
}

fn residual_csv(reports: &[IdentityReport]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(["identity", "form", "s", "residual"])
        .map_err(err)?;
    for r in reports {
        for (s, x) in &r.residual_grid {
            w.write_record([r.name.as_str(), r.form.as_str(), &fmt_f64(*s), &fmt_f64(*x)])
                .map_err(err)?;
        }
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}
