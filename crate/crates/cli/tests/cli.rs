use std::fs;
use std::path::Path;
use std::process::Command;

use clap::Parser;
use hopf_soliton::integrator::{integrate, Direction};
use hopf_soliton::phase::{PhasePoint, SolitonParams};
use hopf_soliton_cli::args::Cli;
use hopf_soliton_cli::commands::{flow_table, integrator_config};
use hopf_soliton_cli::io::{fmt_f64, read_table, Table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn run(out: &Path, args: &[&str]) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_hopf-soliton"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs");
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
    )
}

fn last_row(t: &Table) -> &Vec<f64> {
    t.rows.last().unwrap()
}

#[test]
fn usage_errors_exit_64() {
    let d = TempDir::new().unwrap();
    assert_eq!(run(d.path(), &["--help"]).0, 0);
    assert_eq!(
        run(d.path(), &["flow", "--start", "abc", "--forward"]).0,
        64
    );
    assert_eq!(run(d.path(), &["flow", "--start", "0.3,0"]).0, 64);
    assert_eq!(
        run(
            d.path(),
            &["flow", "--start", "0.3,0", "--forward", "--backward"]
        )
        .0,
        64
    );
    assert_eq!(run(d.path(), &["--theta-sign", "2", "linearize"]).0, 64);
    assert_eq!(run(d.path(), &["--n", "0", "linearize"]).0, 64);
    assert_eq!(
        run(d.path(), &["flow", "--start", "1,0", "--backward"]).0,
        64
    );
    assert_eq!(run(d.path(), &["frobnicate"]).0, 64);
}

#[test]
fn flow_examples() {
    let d = TempDir::new().unwrap();
    let f = d.path().join("fwd");
    assert_eq!(
        run(&f, &["--n", "1", "flow", "--start", "0.3,0", "--forward"]).0,
        0
    );
    let t = read_table(&f.join("flow.csv")).unwrap();
    assert_eq!(t.columns, ["s", "u", "v", "g", "zeta", "theta_unwrapped"]);
    assert!((last_row(&t)[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    assert!(f.join("manifest.txt").exists());

    let b = d.path().join("bwd");
    assert_eq!(
        run(&b, &["--n", "1", "flow", "--start", "0.3,0", "--backward"]).0,
        0
    );
    let t = read_table(&b.join("flow.csv")).unwrap();
    let r = last_row(&t);
    assert!((r[1] * r[1] + r[2] * r[2] - 1.0).abs() < 1e-6);

    let e = d.path().join("eq");
    assert_eq!(
        run(
            &e,
            &["--n", "1", "flow", "--start", "equilibrium", "--forward"]
        )
        .0,
        0
    );
    assert_eq!(read_table(&e.join("flow.csv")).unwrap().rows.len(), 1);

    // A circle start goes through the boundary start and leaves the circle.
    let c = d.path().join("circle");
    assert_eq!(
        run(&c, &["--n", "2", "flow", "--start", "1,0", "--forward"]).0,
        0
    );
    let t = read_table(&c.join("flow.csv")).unwrap();
    assert_eq!(t.rows[0][..3], [0.0, 1.0, 0.0]);
    assert!(t.rows[1][3] > 0.0);
}

#[test]
fn flow_table_round_trips() {
    let d = TempDir::new().unwrap();
    let args = [
        "--n",
        "2",
        "--horizon",
        "40",
        "flow",
        "--start",
        "0.4,0.3",
        "--forward",
    ];
    assert_eq!(run(d.path(), &args).0, 0);
    let path = d.path().join("flow.csv");
    let loaded = read_table(&path).unwrap();
    assert_eq!(loaded.to_bytes().unwrap(), fs::read(&path).unwrap());

    let cli = Cli::try_parse_from(std::iter::once("hopf-soliton").chain(args)).unwrap();
    let cfg = integrator_config(&cli.global).unwrap();
    let p = SolitonParams::new(2).unwrap();
    let traj = integrate(&p, PhasePoint::new(0.4, 0.3), 0.0, Direction::Forward, &cfg).unwrap();
    let mem = flow_table(&traj);
    assert_eq!(mem.columns, loaded.columns);
    assert_eq!(mem.rows.len(), loaded.rows.len());
    for (a, b) in mem.rows.iter().zip(&loaded.rows) {
        for (x, y) in a.iter().zip(b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
    for x in [
        0.1,
        1.0 / 3.0,
        f64::MIN_POSITIVE,
        -2.5e-300,
        1e300,
        std::f64::consts::PI,
    ] {
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}

fn rewrite_column(src: &Path, dst: &Path, column: &str, f: impl Fn(f64) -> f64) {
    let mut t = read_table(src).unwrap();
    let k = t.index(column).unwrap();
    for r in &mut t.rows {
        r[k] = f(r[k]);
    }
    fs::write(dst, t.to_bytes().unwrap()).unwrap();
}

#[test]
fn verify_clifford_and_noisy_profiles() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    assert_eq!(run(p, &["build-soliton", "--clifford"]).0, 0);
    let prof = p.join("profile.csv");
    let (code, out) = run(
        &p.join("v"),
        &["verify", prof.to_str().unwrap(), "--residuals"],
    );
    assert_eq!(code, 0, "{out}");
    let report = fs::read_to_string(p.join("v/report.txt")).unwrap();
    for line in report.lines().filter(|l| l.starts_with("max_residual = ")) {
        let x: f64 = line["max_residual = ".len()..].parse().unwrap();
        assert!(x < 1e-12, "{line}");
    }
    assert!(report.contains("[trace_H.corrected]"));
    assert!(p.join("v/residuals.csv").exists());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise: Vec<f64> = (0..100_000).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
    let noisy = p.join("noisy.csv");
    let counter = std::cell::Cell::new(0usize);
    rewrite_column(&prof, &noisy, "v", |v| {
        let i = counter.get();
        counter.set(i + 1);
        v + noise[i % noise.len()]
    });
    for gate in ["stated", "corrected"] {
        let (code, _) = run(
            &p.join("n"),
            &["verify", noisy.to_str().unwrap(), "--gate", gate],
        );
        assert_eq!(code, 2, "gate {gate}");
    }
}

#[test]
fn malformed_tables_exit_65() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    let bad = p.join("bad.csv");
    fs::write(&bad, "s,u\n0,1\n").unwrap();
    assert_eq!(run(p, &["verify", bad.to_str().unwrap()]).0, 65);
    fs::write(&bad, "s,u,v,g,zeta,theta_unwrapped\n0,0.5,x,0,0,0\n").unwrap();
    assert_eq!(run(p, &["verify", bad.to_str().unwrap()]).0, 65);
    fs::write(&bad, "s,u,v,g,zeta,theta_unwrapped\n0,0.5,0\n").unwrap();
    assert_eq!(run(p, &["verify", bad.to_str().unwrap()]).0, 65);
}

#[test]
fn verify_accepts_a_trajectory_table() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    assert_eq!(
        run(
            p,
            &["--horizon", "30", "flow", "--start", "0.5,0.2", "--forward"]
        )
        .0,
        0
    );
    let (code, out) = run(
        &p.join("v"),
        &[
            "verify",
            p.join("flow.csv").to_str().unwrap(),
            "--gate",
            "corrected",
        ],
    );
    assert_eq!(code, 0, "{out}");
}

#[test]
fn build_soliton_outputs() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    assert_eq!(
        run(p, &["--n", "1", "build-soliton", "--grid", "1e-2"]).0,
        0
    );
    let diag = fs::read_to_string(p.join("diagnostics.txt")).unwrap();
    let get = |k: &str| -> f64 {
        let line = diag
            .lines()
            .find(|l| l.starts_with(&format!("{k} = ")))
            .unwrap_or_else(|| panic!("{k}"));
        line.split(" = ").nth(1).unwrap().parse().unwrap()
    };
    assert!(get("sign_changes") >= 20.0);
    assert!(get("glue_curvature_norm") < 1e-8);
    for k in [
        "clifford_s_star",
        "winding",
        "symmetry_defect",
        "sup_normA2",
    ] {
        assert!(get(k).is_finite());
    }
    let t = read_table(&p.join("profile.csv")).unwrap();
    for c in [
        "s",
        "u",
        "v",
        "g",
        "r",
        "theta_amb",
        "y",
        "z",
        "lambda_tan",
        "lambda_prof",
        "H",
        "normA2",
        "traceless2",
        "drift_a",
    ] {
        assert!(t.has(&[c]), "{c}");
    }

    let r = p.join("refl");
    assert_eq!(
        run(
            &r,
            &["build-soliton", "--grid", "1e-2", "--glue", "reflection"]
        )
        .0,
        2
    );

    let q = p.join("n3");
    assert_eq!(
        run(&q, &["--n", "3", "build-soliton", "--no-cross-validate"]).0,
        0
    );
    let diag = fs::read_to_string(q.join("diagnostics.txt")).unwrap();
    let line = diag
        .lines()
        .find(|l| l.starts_with("grid_max_soliton_residual = "))
        .unwrap();
    assert!(line.split(" = ").nth(1).unwrap().parse::<f64>().unwrap() < 1e-7);
}

fn obj_vertices(path: &Path) -> (Vec<[f64; 3]>, usize) {
    let text = fs::read_to_string(path).unwrap();
    let mut v = Vec::new();
    let mut faces = 0;
    for line in text.lines() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let x: Vec<f64> = it.map(|t| t.parse().unwrap()).collect();
                v.push([x[0], x[1], x[2]]);
            }
            Some("f") => faces += 1,
            _ => {}
        }
    }
    (v, faces)
}

#[test]
fn clifford_mesh_is_a_torus_of_revolution() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    assert_eq!(run(p, &["build-soliton", "--clifford"]).0, 0);
    let prof = p.join("profile.csv");
    let m = p.join("mesh");
    assert_eq!(
        run(
            &m,
            &[
                "export-mesh",
                prof.to_str().unwrap(),
                "--alpha-resolution",
                "32"
            ]
        )
        .0,
        0
    );
    let (verts, faces) = obj_vertices(&m.join("mesh.obj"));
    assert!(!verts.is_empty() && faces > 0);
    // The profile circle y^2 + z^2 = 1/2 projects to the meridian circle (rho - sqrt 2)^2 + Z^2 = 1.
    for x in &verts {
        let rho = x[0].hypot(x[1]);
        let gap = (rho - 2f64.sqrt()).powi(2) + x[2] * x[2] - 1.0;
        assert!(gap.abs() < 1e-9, "{x:?}");
    }

    let empty = p.join("empty.csv");
    let header = fs::read_to_string(&prof)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    fs::write(&empty, format!("{header}\n")).unwrap();
    assert_eq!(run(&m, &["export-mesh", empty.to_str().unwrap()]).0, 64);
    assert_eq!(
        run(&m, &["--n", "2", "export-mesh", prof.to_str().unwrap()]).0,
        64
    );
    // A pole on the surface itself is rejected.
    let on = format!("{},0,{},0", 0.5f64.sqrt(), 0.5f64.sqrt());
    assert_eq!(
        run(&m, &["export-mesh", prof.to_str().unwrap(), "--pole", &on]).0,
        2
    );
}

#[test]
fn soliton_mesh_avoids_the_default_pole() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    assert_eq!(
        run(
            p,
            &["build-soliton", "--grid", "1e-2", "--no-cross-validate"]
        )
        .0,
        0
    );
    let prof = p.join("profile.csv");
    assert_eq!(
        run(
            &p.join("mesh"),
            &["export-mesh", prof.to_str().unwrap(), "--s-stride", "50"]
        )
        .0,
        0
    );
}

#[test]
fn linearize_prints_the_equilibrium() {
    let d = TempDir::new().unwrap();
    let (code, out) = run(d.path(), &["--n", "1", "linearize"]);
    assert_eq!(code, 0);
    let val = |k: &str| -> f64 {
        let line = out
            .lines()
            .find(|l| l.starts_with(&format!("{k} = ")))
            .unwrap_or_else(|| panic!("{k}\n{out}"));
        line.split(" = ").nth(1).unwrap().parse().unwrap()
    };
    assert!((val("u_eq") - 0.5f64.sqrt()).abs() < 1e-15);
    assert!((val("alpha") + 1.0 / (2.0 * 2f64.sqrt())).abs() < 1e-15);
    assert!((val("beta") - 31f64.sqrt() / (2.0 * 2f64.sqrt())).abs() < 1e-15);
}

#[test]
fn small_phase_portrait() {
    let d = TempDir::new().unwrap();
    let p = d.path();
    assert_eq!(run(p, &["phase-portrait", "--lattice", "2x2"]).0, 0);
    let text = fs::read_to_string(p.join("index.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 8);
    assert_eq!(fs::read_dir(p.join("runs")).unwrap().count(), 8);
}

fn outputs(manifest: &Path) -> Vec<String> {
    fs::read_to_string(manifest)
        .unwrap()
        .lines()
        .filter_map(|l| l.strip_prefix("output = "))
        .map(|l| l.split_once(' ').unwrap().1.to_string())
        .collect()
}

#[test]
fn replay_reproduces_outputs() {
    let d = TempDir::new().unwrap();
    let a = d.path().join("a");
    assert_eq!(
        run(&a, &["--seed", "5", "phase-portrait", "--random", "6"]).0,
        0
    );
    let b = d.path().join("b");
    let (code, out) = run(&b, &["replay", a.join("manifest.txt").to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    let names = outputs(&a.join("manifest.txt"));
    assert!(names.len() > 1);
    for name in names {
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name}"
        );
    }
    // A tampered output is reported as a mismatch.
    let first = outputs(&a.join("manifest.txt")).remove(0);
    let c = d.path().join("c");
    fs::create_dir_all(&c).unwrap();
    let mut m = fs::read_to_string(a.join("manifest.txt")).unwrap();
    let digest_line = m
        .lines()
        .find(|l| l.ends_with(&format!(" {first}")))
        .unwrap()
        .to_string();
    m = m.replace(
        &digest_line,
        &format!("output = {} {first}", "0".repeat(64)),
    );
    fs::write(c.join("manifest.txt"), m).unwrap();
    assert_eq!(
        run(
            &d.path().join("d"),
            &["replay", c.join("manifest.txt").to_str().unwrap()]
        )
        .0,
        2
    );
}
