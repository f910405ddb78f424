use std::f64::consts::PI;

use clap::Parser;

use hopf_soliton::boundary::{boundary_start, StartMethod};
use hopf_soliton::integrator::Direction;
use hopf_soliton::profile::{clifford_profile, soliton_residual};
use hopf_soliton::soliton::{build_theorem_a, BuilderConfig, GlueMap};
use hopf_soliton::{
    clifford_radii, equilibrium, g_of, integrate, zeta, IntegratorConfig, PhasePoint,
    SolitonParams, Termination, Trajectory,
};

use crate::args::{BuildArgs, Cli, FlowArgs, GlobalArgs, GlueArg, ReplayArgs, StartSpec};
use crate::error::CliError;
use crate::io::{fmt_f64, key_values, profile_table, read_manifest, sha256_hex, Session, Table};

/// Largest tolerated decrease of `zeta` between consecutive samples.
pub const ZETA_TOL: f64 = 1e-8;

/// Largest tolerated soliton residual on a written profile.
pub const RESIDUAL_TOL: f64 = 1e-7;

pub const FLOW_COLUMNS: [&str; 6] = ["s", "u", "v", "g", "zeta", "theta_unwrapped"];

const CIRCLE_TOL: f64 = 1e-12;

pub fn params(g: &GlobalArgs) -> Result<SolitonParams, CliError> {
    SolitonParams::new(g.n).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn integrator_config(g: &GlobalArgs) -> Result<IntegratorConfig, CliError> {
    let cfg = IntegratorConfig {
        abs_tol: g.abs_tol,
        rel_tol: g.rel_tol,
        horizon: g.horizon,
        ..IntegratorConfig::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

pub fn open_session(g: &GlobalArgs, command: &str, args: Vec<String>) -> Result<Session, CliError> {
    let mut s = Session::new(&g.out_dir, command, args)?;
    s.config("n", g.n);
    s.config("abs_tol", fmt_f64(g.abs_tol));
    s.config("rel_tol", fmt_f64(g.rel_tol));
    s.config("horizon", fmt_f64(g.horizon));
    s.config("theta_sign", g.theta_sign);
    s.config("seed", g.seed);
    Ok(s)
}

/// Rows `s, u, v, g, zeta, theta_unwrapped` of a trajectory.
pub fn flow_table(traj: &Trajectory) -> Table {
    let mut t = Table::new(&FLOW_COLUMNS);
    let p = traj.params;
    t.rows = traj
        .samples
        .iter()
        .zip(&traj.theta_unwrapped)
        .map(|(x, th)| {
            vec![
                x.s,
                x.point.u,
                x.point.v,
                g_of(&x.point),
                zeta(&p, &x.point),
                *th,
            ]
        })
        .collect();
    t
}

fn min_increment(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

pub fn flow(g: &GlobalArgs, a: &FlowArgs, args: Vec<String>) -> Result<(), CliError> {
    let params = params(g)?;
    let cfg = integrator_config(g)?;
    let direction = if a.forward {
        Direction::Forward
    } else {
        Direction::Backward
    };
    let p0 = match a.start {
        StartSpec::Equilibrium => equilibrium(&params).point,
        StartSpec::Point(u, v) => PhasePoint::new(u, v),
    };
    p0.check().map_err(|e| CliError::Usage(e.to_string()))?;
    let on_circle = (p0.u * p0.u + p0.v * p0.v - 1.0).abs() <= CIRCLE_TOL;

    let mut session = open_session(g, "flow", args)?;
    session.config("start", format!("{},{}", fmt_f64(p0.u), fmt_f64(p0.v)));
    session.config("direction", direction.as_str());

    let table = if on_circle {
        if direction == Direction::Backward {
            return Err(CliError::Usage(
                "backward runs must start inside the disk".into(),
            ));
        }
        if !(a.handoff > 0.0 && a.handoff < cfg.horizon) {
            return Err(CliError::Usage(format!(
                "handoff {} outside (0, horizon)",
                a.handoff
            )));
        }
        let axis = (p0.u - 1.0).abs() <= CIRCLE_TOL && p0.v.abs() <= CIRCLE_TOL;
        let method = if axis {
            StartMethod::Series
        } else {
            StartMethod::Perturbation
        };
        session.config(
            "boundary_method",
            if axis { "series" } else { "perturbation" },
        );
        session.config("handoff", fmt_f64(a.handoff));
        let st = boundary_start(&params, p0, method, a.handoff, &cfg)
            .map_err(|e| CliError::numeric("boundary_start", e))?;
        let run_cfg = IntegratorConfig {
            horizon: cfg.horizon - a.handoff,
            ..cfg
        };
        let traj = integrate(&params, st.state, a.handoff, direction, &run_cfg)
            .map_err(|e| CliError::numeric("integrate", e))?;
        let mut t = flow_table(&traj);
        // Keep the angle continuous across the handoff gap.
        let th0 = p0.v.atan2(p0.u - params.u_eq());
        let k = ((th0 - t.rows[0][5]) / (2.0 * PI)).round();
        for r in &mut t.rows {
            r[5] += 2.0 * PI * k;
        }
        t.rows.insert(0, vec![0.0, p0.u, p0.v, 0.0, 0.0, th0]);
        check_termination(&traj)?;
        t
    } else {
        let traj = integrate(&params, p0, 0.0, direction, &cfg)
            .map_err(|e| CliError::numeric("integrate", e))?;
        check_termination(&traj)?;
        flow_table(&traj)
    };
    // zeta is nondecreasing in s; backward tables run with s decreasing.
    let mut z: Vec<f64> = table.rows.iter().map(|r| r[4]).collect();
    if direction == Direction::Backward {
        z.reverse();
    }
    let dz = min_increment(&z);
    session.write_table(&a.output, &table)?;
    session.finish()?;
    if dz < -ZETA_TOL {
        return Err(CliError::Invariant(format!("zeta decreases by {:e}", -dz)));
    }
    Ok(())
}

fn check_termination(t: &Trajectory) -> Result<(), CliError> {
    if t.termination == Termination::StepFailure {
        return Err(CliError::numeric(
            "integrate",
            format!("step size underflow at s = {}", t.last().s),
        ));
    }
    Ok(())
}

pub fn build_soliton(g: &GlobalArgs, a: &BuildArgs, args: Vec<String>) -> Result<(), CliError> {
    let params = params(g)?;
    let icfg = integrator_config(g)?;
    if !(a.grid > 0.0) || !a.grid.is_finite() {
        return Err(CliError::Usage(format!(
            "grid must be positive, got {}",
            a.grid
        )));
    }
    let mut session = open_session(g, "build-soliton", args)?;
    session.config("grid", fmt_f64(a.grid));

    if a.clifford {
        let half = a.half_range.unwrap_or(10.0);
        let k = (half / a.grid).floor() as usize;
        let curve = clifford_profile(
            &params,
            -(k as f64) * a.grid,
            a.grid,
            2 * k + 1,
            g.theta_sign,
        );
        session.config("profile", "clifford");
        session.config("half_range", fmt_f64(half));
        session.write_table(&a.output, &profile_table(&curve))?;
        let diag = vec![
            ("profile".to_string(), "clifford".to_string()),
            ("rows".to_string(), curve.len().to_string()),
        ];
        session.write("diagnostics.txt", key_values(&diag).as_bytes())?;
        return session.finish();
    }

    let k0 = a.handoff / a.grid;
    if !(a.handoff > 0.0) || (k0 - k0.round()).abs() > 1e-9 * k0.max(1.0) {
        return Err(CliError::Usage(format!(
            "grid {} must divide the handoff {}",
            a.grid, a.handoff
        )));
    }
    let glue = match a.glue {
        GlueArg::HalfTurn => GlueMap::HalfTurn,
        GlueArg::Reflection => GlueMap::Reflection,
    };
    let cfg = BuilderConfig {
        integrator: icfg,
        handoff: a.handoff,
        half_range: a.half_range,
        theta_sign: g.theta_sign,
        glue,
        cross_validate: !a.no_cross_validate,
        ..BuilderConfig::default()
    };
    session.config("glue", format!("{:?}", a.glue).to_lowercase());
    session.config("handoff", fmt_f64(a.handoff));
    session.config("cross_validate", !a.no_cross_validate);

    let surface = build_theorem_a(&params, &cfg).map_err(|e| CliError::numeric(e.stage(), e))?;
    let profile = surface
        .uniform_profile(a.grid)
        .map_err(|e| CliError::numeric("uniform_profile", e))?;
    let residual = profile
        .samples
        .iter()
        .map(|x| soliton_residual(&params, x).abs())
        .fold(0.0, f64::max);
    let d = &surface.diagnostics;
    let mut kv: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| kv.push((k.to_string(), v));
    put("n", params.n().to_string());
    put("clifford_s_star", fmt_f64(d.clifford_s_star));
    put("sign_changes", d.sign_changes.to_string());
    put("winding", fmt_f64(d.winding));
    put("symmetry_defect", fmt_f64(d.symmetry_defect));
    put("sup_normA2", fmt_f64(d.sup_norm_a2));
    put("sup_normA2_at", fmt_f64(d.sup_norm_a2_at));
    put("glue_curvature_norm", fmt_f64(d.glue_curvature_norm));
    put("half_range", fmt_f64(d.half_range));
    put("max_soliton_residual", fmt_f64(d.max_soliton_residual));
    put("terminal_u_gap_negative", fmt_f64(d.terminal_u_gap.0));
    put("terminal_u_gap_positive", fmt_f64(d.terminal_u_gap.1));
    if let Some(gap) = d.series_perturbation_gap {
        put("series_perturbation_gap", fmt_f64(gap));
    }
    put("grid_rows", profile.len().to_string());
    put("grid_max_soliton_residual", fmt_f64(residual));
    session.write_table(&a.output, &profile_table(&profile))?;
    session.write("diagnostics.txt", key_values(&kv).as_bytes())?;
    session.finish()?;
    if !(residual < RESIDUAL_TOL) {
        return Err(CliError::Invariant(format!(
            "soliton residual {residual:e} on the written profile"
        )));
    }
    Ok(())
}

pub fn linearize(g: &GlobalArgs, args: Vec<String>) -> Result<(), CliError> {
    let params = params(g)?;
    let e = equilibrium(&params);
    let (ra, rb) = clifford_radii(&params);
    let [l1, l2] = e.eigenvalues();
    let kv: Vec<(String, String)> = [
        ("n", params.n().to_string()),
        ("u_eq", fmt_f64(e.point.u)),
        ("v_eq", fmt_f64(e.point.v)),
        ("jacobian_11", fmt_f64(e.jacobian[0][0])),
        ("jacobian_12", fmt_f64(e.jacobian[0][1])),
        ("jacobian_21", fmt_f64(e.jacobian[1][0])),
        ("jacobian_22", fmt_f64(e.jacobian[1][1])),
        ("alpha", fmt_f64(e.alpha())),
        ("beta", fmt_f64(e.beta())),
        (
            "eigenvalue_1",
            format!("{}{:+.16e}i", fmt_f64(l1.re), l1.im),
        ),
        (
            "eigenvalue_2",
            format!("{}{:+.16e}i", fmt_f64(l2.re), l2.im),
        ),
        ("clifford_radius_1", fmt_f64(ra)),
        ("clifford_radius_2", fmt_f64(rb)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let text = key_values(&kv);
    print!("{text}");
    let mut session = open_session(g, "linearize", args)?;
    session.write("linearize.txt", text.as_bytes())?;
    session.finish()
}

pub fn replay(g: &GlobalArgs, a: &ReplayArgs) -> Result<(), CliError> {
    let m = read_manifest(&a.manifest)?;
    if m.version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "warning: manifest written by version {}, running {}",
            m.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    for (path, digest) in &m.inputs {
        let bytes =
            std::fs::read(path).map_err(|e| CliError::Data(format!("input {path}: {e}")))?;
        if sha256_hex(&bytes) != *digest {
            return Err(CliError::Invariant(format!(
                "input {path} changed since the recorded run"
            )));
        }
    }
    let mut argv = vec!["hopf-soliton".to_string()];
    argv.extend(m.args.iter().cloned());
    argv.push("--out-dir".into());
    argv.push(g.out_dir.display().to_string());
    let cli = Cli::try_parse_from(&argv)
        .map_err(|e| CliError::Data(format!("manifest arguments: {e}")))?;
    if matches!(cli.command, crate::args::Command::Replay(_)) {
        return Err(CliError::Data("a manifest cannot replay a replay".into()));
    }
    match crate::dispatch(&cli, m.args.clone()) {
        Ok(()) | Err(CliError::Invariant(_)) => {}
        Err(e) => return Err(e),
    }
    let mut differ = 0;
    for (path, digest) in &m.outputs {
        let now = std::fs::read(g.out_dir.join(path))
            .map(|b| sha256_hex(&b))
            .unwrap_or_default();
        let same = now == *digest;
        println!("{} {path}", if same { "match" } else { "mismatch" });
        differ += usize::from(!same);
    }
    if differ > 0 {
        return Err(CliError::Invariant(format!(
            "{differ} of {} outputs differ",
            m.outputs.len()
        )));
    }
    Ok(())
}
