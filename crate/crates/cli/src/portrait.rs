use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use hopf_soliton::{
    g_of, integrate, tail_angle_rate_max, Direction, IntegratorError, PhasePoint, SolitonParams,
    Termination, Trajectory,
};

use crate::args::{Directions, GlobalArgs, PortraitArgs};
use crate::commands::{flow_table, integrator_config, open_session, params, ZETA_TOL};
use crate::error::CliError;
use crate::io::fmt_f64;

/// Fraction of a backward run's arclength over which tail statistics are taken.
pub const TAIL_FRACTION: f64 = 0.05;

/// Interior starts with `u` in `[0.05, 0.95]`, `g >= 0.05`, and at least 0.05
/// from the equilibrium, drawn from a seeded ChaCha8 stream.
pub fn random_starts(params: &SolitonParams, count: usize, seed: u64) -> Vec<PhasePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let un = params.u_eq();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = PhasePoint::new(rng.gen_range(0.05..=0.95), rng.gen_range(-1.0..1.0));
        if g_of(&p) >= 0.05 && (p.u - un).hypot(p.v) >= 0.05 {
            out.push(p);
        }
    }
    out
}

/// Cell-centred lattice: `nu` values of `u` in `[0.05, 0.95]`, and for each,
/// `nv` values of `v` spread over 90% of the admissible interval.
pub fn lattice_starts(nu: usize, nv: usize) -> Vec<PhasePoint> {
    let mut out = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 0.05 + 0.9 * (i as f64 + 0.5) / nu as f64;
        let vmax = 0.9 * (1.0 - u * u).sqrt();
        for j in 0..nv {
            let v = vmax * (2.0 * (j as f64 + 0.5) / nv as f64 - 1.0);
            out.push(PhasePoint::new(u, v));
        }
    }
    out
}

/// Per-run summary written to the index.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub termination: &'static str,
    pub length: f64,
    pub end: PhasePoint,
    /// `u^2 + v^2 - 1` at the end.
    pub circle_defect: f64,
    pub end_zeta: f64,
    pub min_dzeta: f64,
    /// Backward runs only.
    pub tail_theta_rate_max: Option<f64>,
    pub theta_range: f64,
}

pub fn summarize(t: &Trajectory) -> RunSummary {
    let end = t.last().point;
    let th = &t.theta_unwrapped;
    let lo = th.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = th.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    RunSummary {
        termination: t.termination.as_str(),
        length: t.length(),
        end,
        circle_defect: end.u * end.u + end.v * end.v - 1.0,
        end_zeta: *t.zetas().last().expect("non-empty"),
        min_dzeta: if t.samples.len() > 1 {
            t.min_zeta_increment()
        } else {
            0.0
        },
        tail_theta_rate_max: match t.direction {
            Direction::Backward => tail_angle_rate_max(t, TAIL_FRACTION),
            Direction::Forward => None,
        },
        theta_range: hi - lo,
    }
}

pub fn phase_portrait(g: &GlobalArgs, a: &PortraitArgs, args: Vec<String>) -> Result<(), CliError> {
    let params = params(g)?;
    let cfg = integrator_config(g)?;
    let mut starts = lattice_starts(a.lattice.0, a.lattice.1);
    starts.extend(random_starts(&params, a.random, g.seed));
    if starts.is_empty() {
        return Err(CliError::Usage(
            "no starts: lattice and random are both empty".into(),
        ));
    }
    let dirs: &[Direction] = match a.directions {
        Directions::Both => &[Direction::Forward, Direction::Backward],
        Directions::Forward => &[Direction::Forward],
        Directions::Backward => &[Direction::Backward],
    };
    let jobs: Vec<(usize, PhasePoint, Direction)> = starts
        .iter()
        .enumerate()
        .flat_map(|(i, p)| dirs.iter().map(move |d| (i, *p, *d)))
        .collect();
    let results: Vec<Result<Trajectory, IntegratorError>> = jobs
        .par_iter()
        .map(|(_, p, d)| integrate(&params, *p, 0.0, *d, &cfg))
        .collect();

    let mut session = open_session(g, "phase-portrait", args)?;
    session.config("lattice", format!("{}x{}", a.lattice.0, a.lattice.1));
    session.config("random", a.random);
    session.config("directions", format!("{:?}", a.directions).to_lowercase());

    let mut index = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(e.to_string());
    index
        .write_record([
            "id",
            "u0",
            "v0",
            "direction",
            "status",
            "termination",
            "length",
            "end_u",
            "end_v",
            "circle_defect",
            "end_zeta",
            "min_dzeta",
            "tail_theta_rate_max",
            "theta_range",
            "file",
        ])
        .map_err(err)?;
    let (mut failures, mut violations) = (0, 0);
    for ((id, p, d), res) in jobs.iter().zip(results) {
        let mut rec = vec![
            id.to_string(),
            fmt_f64(p.u),
            fmt_f64(p.v),
            d.as_str().to_string(),
        ];
        match res {
            Ok(t) => {
                let file = format!("runs/traj_{id:04}_{}.csv", d.as_str());
                session.write_table(&file, &flow_table(&t))?;
                let s = summarize(&t);
                let failed = t.termination == Termination::StepFailure;
                failures += usize::from(failed);
                violations += usize::from(s.min_dzeta < -ZETA_TOL);
                rec.push(if failed { "failed" } else { "ok" }.to_string());
                rec.push(s.termination.to_string());
                for x in [
                    s.length,
                    s.end.u,
                    s.end.v,
                    s.circle_defect,
                    s.end_zeta,
                    s.min_dzeta,
                ] {
                    rec.push(fmt_f64(x));
                }
                rec.push(s.tail_theta_rate_max.map_or_else(String::new, fmt_f64));
                rec.push(fmt_f64(s.theta_range));
                rec.push(file);
            }
            Err(e) => {
                failures += 1;
                rec.push(format!("error: {e}"));
                rec.extend(std::iter::repeat_n(String::new(), 10));
            }
        }
        index.write_record(&rec).map_err(err)?;
    }
    let bytes = index
        .into_inner()
        .map_err(|e| CliError::Io(e.into_error()))?;
    session.write("index.csv", &bytes)?;
    session.finish()?;
    if failures > 0 {
        return Err(CliError::numeric(
            "phase_portrait",
            format!("{failures} of {} runs failed", jobs.len()),
        ));
    }
    if violations > 0 {
        return Err(CliError::Invariant(format!(
            "zeta decreases in {violations} runs"
        )));
    }
    Ok(())
}
