//! Tables, profile columns and the run manifest.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use hopf_soliton::profile::{ProfileCurve, ProfileSample};
use hopf_soliton::SolitonParams;

use crate::error::CliError;

/// Decimal text with 17 significant digits, which round-trips any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Header plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn index(&self, name: &str) -> Result<usize, CliError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::Data(format!("missing column '{name}'")))
    }

    pub fn has(&self, names: &[&str]) -> bool {
        names.iter().all(|n| self.columns.iter().any(|c| c == n))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let i = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|x| fmt_f64(*x)))
                .map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(e.to_string())
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    parse_table(&bytes).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_table(bytes: &[u8]) -> Result<Table, CliError> {
    let mut r = csv::Reader::from_reader(bytes);
    let columns: Vec<String> = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if columns.iter().all(|c| c.is_empty()) {
        return Err(CliError::Data("no header row".into()));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row: Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| CliError::Data(format!("row {}: {e}", line + 1)))?;
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

/// Columns of a written profile.
pub const PROFILE_COLUMNS: [&str; 17] = [
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
    "upp",
    "yp",
    "zp",
];

pub fn profile_table(curve: &ProfileCurve) -> Table {
    let mut t = Table::new(&PROFILE_COLUMNS);
    t.rows = curve
        .samples
        .iter()
        .map(|x| {
            vec![
                x.s,
                x.u,
                x.v,
                x.g,
                x.r,
                x.theta_amb,
                x.y,
                x.z,
                x.lambda_tan,
                x.lambda_prof,
                x.h,
                x.norm_a2,
                x.traceless2,
                x.drift_a,
                x.upp,
                x.yp,
                x.zp,
            ]
        })
        .collect();
    t
}

pub fn profile_from_table(
    t: &Table,
    params: SolitonParams,
    theta_sign: i8,
) -> Result<ProfileCurve, CliError> {
    let idx: Vec<usize> = PROFILE_COLUMNS
        .iter()
        .map(|c| t.index(c))
        .collect::<Result<_, _>>()?;
    let samples = t
        .rows
        .iter()
        .map(|r| {
            let c = |k: usize| r[idx[k]];
            ProfileSample {
                s: c(0),
                u: c(1),
                v: c(2),
                g: c(3),
                r: c(4),
                theta_amb: c(5),
                y: c(6),
                z: c(7),
                lambda_tan: c(8),
                lambda_prof: c(9),
                h: c(10),
                norm_a2: c(11),
                traceless2: c(12),
                drift_a: c(13),
                upp: c(14),
                yp: c(15),
                zp: c(16),
            }
        })
        .collect();
    Ok(ProfileCurve {
        params,
        samples,
        theta_sign,
        tau: -FRAC_PI_2,
    })
}

/// Collects outputs of one command run and writes its manifest.
pub struct Session {
    pub out_dir: PathBuf,
    command: String,
    args: Vec<String>,
    config: Vec<(String, String)>,
    inputs: Vec<(String, String)>,
    outputs: Vec<(String, String)>,
}

pub const MANIFEST_NAME: &str = "manifest.txt";

impl Session {
    pub fn new(out_dir: &Path, command: &str, args: Vec<String>) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir)?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            command: command.to_string(),
            args,
            config: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn config(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes =
            fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        self.inputs
            .push((path.display().to_string(), sha256_hex(&bytes)));
        Ok(())
    }

    /// Writes `bytes` to `name` under the output directory and records its digest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, bytes)?;
        self.outputs.push((name.to_string(), sha256_hex(bytes)));
        Ok(path)
    }

    pub fn write_table(&mut self, name: &str, t: &Table) -> Result<PathBuf, CliError> {
        let bytes = t.to_bytes()?;
        self.write(name, &bytes)
    }

    pub fn finish(self) -> Result<(), CliError> {
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut out = String::new();
        out.push_str("tool = hopf-soliton\n");
        out.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!("created_unix = {created}\n"));
        out.push_str(&format!("command = {}\n", self.command));
        for a in &self.args {
            out.push_str(&format!("arg = {}\n", escape(a)));
        }
        for (k, v) in &self.config {
            out.push_str(&format!("config.{k} = {v}\n"));
        }
        for (p, d) in &self.inputs {
            out.push_str(&format!("input = {d} {}\n", escape(p)));
        }
        for (p, d) in &self.outputs {
            out.push_str(&format!("output = {d} {}\n", escape(p)));
        }
        fs::write(self.out_dir.join(MANIFEST_NAME), out)?;
        Ok(())
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c == '\\' {
            match it.next() {
                Some('n') => out.push('\n'),
                Some(o) => out.push(o),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

/// The parts of a manifest needed to replay it.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    /// `(path, sha256)`.
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
}

pub fn read_manifest(path: &Path) -> Result<Manifest, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut m = Manifest {
        version: String::new(),
        command: String::new(),
        args: Vec::new(),
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    for line in text.lines() {
        let Some((k, v)) = line.split_once(" = ") else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(CliError::Data(format!("bad manifest line: {line}")));
        };
        let digest_path = |v: &str| -> Result<(String, String), CliError> {
            let (d, p) = v
                .split_once(' ')
                .ok_or_else(|| CliError::Data(format!("bad entry: {line}")))?;
            Ok((unescape(p), d.to_string()))
        };
        match k {
            "version" => m.version = v.to_string(),
            "command" => m.command = v.to_string(),
            "arg" => m.args.push(unescape(v)),
            "input" => m.inputs.push(digest_path(v)?),
            "output" => m.outputs.push(digest_path(v)?),
            _ => {}
        }
    }
    if m.command.is_empty() || m.args.is_empty() {
        return Err(CliError::Data("manifest has no command".into()));
    }
    Ok(m)
}

/// Key-value text, one `key = value` per line.
pub fn key_values(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}
