//! OBJ export of the `n = 1` surface `(u cos a, u sin a, y, z)` in `S^3`.

use std::f64::consts::PI;

use crate::args::{GlobalArgs, MeshArgs};
use crate::commands::open_session;
use crate::error::CliError;
use crate::io::{fmt_f64, read_table};

/// Tolerance on `|x| = 1` for surface points.
pub const UNIT_TOL: f64 = 1e-8;

fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of the complement of a unit `pole`. For a coordinate
/// pole this is the remaining coordinate axes in order.
pub fn tangent_basis(pole: &[f64; 4]) -> [[f64; 4]; 3] {
    let skip = (0..4)
        .max_by(|&i, &j| pole[i].abs().total_cmp(&pole[j].abs()))
        .expect("four axes");
    let mut basis: Vec<[f64; 4]> = Vec::with_capacity(3);
    for k in (0..4).filter(|&k| k != skip) {
        let mut e = [0.0; 4];
        e[k] = 1.0;
        let c = dot(&e, pole);
        for i in 0..4 {
            e[i] -= c * pole[i];
        }
        for b in &basis {
            let c = dot(&e, b);
            for i in 0..4 {
                e[i] -= c * b[i];
            }
        }
        let norm = dot(&e, &e).sqrt();
        basis.push(e.map(|x| x / norm));
    }
    [basis[0], basis[1], basis[2]]
}

/// Stereographic projection of a unit `x` from `pole` onto the equatorial 3-space.
pub fn stereographic(x: &[f64; 4], pole: &[f64; 4], basis: &[[f64; 4]; 3]) -> [f64; 3] {
    let scale = 1.0 / (1.0 - dot(x, pole));
    basis.map(|b| dot(x, &b) * scale)
}

pub fn export_mesh(g: &GlobalArgs, a: &MeshArgs, args: Vec<String>) -> Result<(), CliError> {
    if g.n != 1 {
        return Err(CliError::Usage(format!(
            "mesh export needs n = 1, got {}",
            g.n
        )));
    }
    let pole = a.pole.0;
    if (dot(&pole, &pole).sqrt() - 1.0).abs() > 1e-12 {
        return Err(CliError::Usage("pole must be a unit vector".into()));
    }
    if a.alpha_resolution < 3 || a.s_stride == 0 || !(a.min_pole_distance > 0.0) {
        return Err(CliError::Usage(
            "need alpha-resolution >= 3, s-stride >= 1 and min-pole-distance > 0".into(),
        ));
    }
    let table = read_table(&a.table)?;
    if table.rows.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: empty profile",
            a.table.display()
        )));
    }
    let (s, u, y, z) = (
        table.column("s")?,
        table.column("u")?,
        table.column("y")?,
        table.column("z")?,
    );

    let mut rows: Vec<usize> = (0..s.len()).step_by(a.s_stride).collect();
    if rows.last() != Some(&(s.len() - 1)) {
        rows.push(s.len() - 1);
    }
    let basis = tangent_basis(&pole);
    let na = a.alpha_resolution;
    let mut obj = String::new();
    obj.push_str("# hopf-soliton surface, n = 1, stereographic projection\n");
    obj.push_str(&format!(
        "# pole {} {} {} {}\n",
        fmt_f64(pole[0]),
        fmt_f64(pole[1]),
        fmt_f64(pole[2]),
        fmt_f64(pole[3])
    ));
    for &i in &rows {
        for j in 0..na {
            let (sa, ca) = (2.0 * PI * j as f64 / na as f64).sin_cos();
            let x = [u[i] * ca, u[i] * sa, y[i], z[i]];
            let norm = dot(&x, &x).sqrt();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(CliError::Invariant(format!("|x| = {norm} at s = {}", s[i])));
            }
            let d: [f64; 4] = std::array::from_fn(|k| x[k] - pole[k]);
            let dist = dot(&d, &d).sqrt();
            if dist < a.min_pole_distance {
                return Err(CliError::Invariant(format!(
                    "distance {dist:e} to the pole at s = {}",
                    s[i]
                )));
            }
            let p = stereographic(&x, &pole, &basis);
            obj.push_str(&format!(
                "v {} {} {}\n",
                fmt_f64(p[0]),
                fmt_f64(p[1]),
                fmt_f64(p[2])
            ));
        }
    }
    for r in 0..rows.len().saturating_sub(1) {
        for j in 0..na {
            let jn = (j + 1) % na;
            let v = |rr: usize, jj: usize| rr * na + jj + 1;
            obj.push_str(&format!(
                "f {} {} {} {}\n",
                v(r, j),
                v(r, jn),
                v(r + 1, jn),
                v(r + 1, j)
            ));
        }
    }
    let mut session = open_session(g, "export-mesh", args)?;
    session.input(&a.table)?;
    session.config("alpha_resolution", na);
    session.config("s_stride", a.s_stride);
    session.config("min_pole_distance", fmt_f64(a.min_pole_distance));
    session.write(&a.output, obj.as_bytes())?;
    session.finish()
}
