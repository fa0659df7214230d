//! Curve emission. A [`Table`] is written as CSV (metadata lines prefixed
//! `#`, then a header row, then data) or as a JSON mirror of the same
//! content. Every file gets a sibling `<file>.manifest.json`.
//!
//! Numbers are written in shortest round-trip scientific notation, so the
//! bytes depend only on the values.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::Format;
use crate::constants::CONSTANT_SET;
use crate::error::{Error, Result};
use crate::sensitivity::{FluxCurve, SensitivityCurve, DEAD_POINT};
use crate::validate::{McSpectrum, RegimeRow};

/// Directory for outputs given without an absolute path.
pub const OUT_DIR_ENV: &str = "TRAPSENSE_OUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:e}"),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(x) => json!(format!("{x}")),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    /// Unit of each column, same length as `columns`.
    pub units: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: Vec<(String, String)>,
}

impl Table {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.0.to_string()).collect(),
            units: columns.iter().map(|c| c.1.to_string()).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let units: Vec<String> = self.columns.iter().zip(&self.units).map(|(c, u)| format!("{c}[{u}]")).collect();
        out.push_str(&format!("# units: {}\n", units.join(" ")));
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
        out.push_str(std::str::from_utf8(&bytes).expect("csv of utf-8 input"));
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        let mut meta = Map::new();
        for (k, v) in &self.metadata {
            meta.insert(k.clone(), json!(v));
        }
        json!({
            "metadata": meta,
            "columns": self.columns,
            "units": self.units,
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => Ok(format!("{:#}\n", self.to_json())),
        }
    }
}

impl From<&SensitivityCurve> for Table {
    fn from(c: &SensitivityCurve) -> Self {
        let mut t = Table::new(&[("m_chi_GeV", "GeV/c^2"), ("q_min", "e")]);
        t.metadata = c.metadata.clone();
        for p in &c.points {
            let q = match p.q_min {
                Some(q) => Cell::Num(q),
                None => Cell::Text(DEAD_POINT.into()),
            };
            t.push(vec![Cell::Num(p.m_chi_gev), q]);
            if let Some(r) = &p.reason {
                t.meta(format!("dead m_chi_GeV={:e}", p.m_chi_gev), r);
            }
        }
        t
    }
}

impl From<&FluxCurve> for Table {
    fn from(c: &FluxCurve) -> Self {
        let mut t = Table::new(&[("E_eV", "eV"), ("flux_cm2_day", "1/cm^2/day")]);
        t.metadata = c.metadata.clone();
        for p in &c.points {
            t.push(vec![Cell::Num(p.e_ev), Cell::Num(p.flux_cm2_day)]);
        }
        t
    }
}

pub fn regime_table(rows: &[RegimeRow]) -> Table {
    let mut t = Table::new(&[("omega_tau", "1"), ("ratio", "1")]);
    for r in rows {
        t.push(vec![Cell::Num(r.omega_tau), Cell::Num(r.ratio)]);
    }
    t
}

/// Per-sensor kick spectrum; momenta in kg·m/s.
pub fn spectrum_table(s: &McSpectrum) -> Table {
    let mut t = Table::new(&[
        ("dp_bin_lo", "kg m/s"),
        ("dp_bin_hi", "kg m/s"),
        ("rate_density", "1/s/(kg m/s)"),
        ("stat_err", "1/s/(kg m/s)"),
    ]);
    for b in &s.bins {
        t.push(vec![
            Cell::Num(b.lo),
            Cell::Num(b.hi),
            Cell::Num(b.rate_density),
            Cell::Num(b.stat_err),
        ]);
    }
    t.meta("dp_th_kg_m_s", format!("{:e}", s.dp_th));
    t.meta("n_samples", s.n_samples);
    t.meta("seed", s.seed);
    t.meta("rate_above_per_s", format!("{:e}", s.rate_above));
    t.meta("rate_above_err_per_s", format!("{:e}", s.rate_above_err));
    t.meta("counts_above", s.counts_above);
    t.meta("vetoed", s.vetoed);
    t.meta("acceptance_axial", format!("{:e}", s.empirical_acceptance()));
    t.meta("acceptance_formula", format!("{:e}", s.formula_acceptance()));
    t
}

/// Where an output goes: relative paths (and the default name) are placed
/// under `$TRAPSENSE_OUT_DIR` when it is set, else under the working
/// directory.
pub fn resolve_output_path(explicit: Option<&Path>, default_stem: &str, format: Format) -> PathBuf {
    let p = explicit
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(format!("{default_stem}.{}", format.extension())));
    if p.is_absolute() {
        return p;
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(p),
        _ => p,
    }
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    Ok(())
}

/// Write `table` to `path` in `format`.
pub fn emit_curve(table: &Table, path: &Path, format: Format) -> Result<()> {
    write_file(path, &table.render(format)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    /// Subcommand path, e.g. `["validate", "mc"]`.
    pub command: Vec<String>,
    /// The fully resolved configuration; feeding it back through `--config`
    /// with the same command reproduces the output.
    pub config: Value,
    pub constants: &'static str,
    pub seed: u64,
    pub started_unix_s: f64,
    pub wall_clock_s: f64,
    pub output: String,
}

/// Clock started when a command begins.
#[derive(Debug, Clone, Copy)]
pub struct RunClock {
    started: SystemTime,
    t0: Instant,
}

impl RunClock {
    pub fn start() -> Self {
        Self {
            started: SystemTime::now(),
            t0: Instant::now(),
        }
    }

    pub fn manifest(&self, command: &[&str], config: Value, seed: u64, output: &Path) -> RunManifest {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.iter().map(|s| s.to_string()).collect(),
            config,
            constants: CONSTANT_SET,
            seed,
            started_unix_s: self.started.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
            wall_clock_s: self.t0.elapsed().as_secs_f64(),
            output: output.display().to_string(),
        }
    }
}

pub fn write_manifest(output: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let path = manifest_path(output);
    let text = serde_json::to_string_pretty(manifest).expect("manifest is plain data");
    write_file(&path, &(text + "\n"))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensitivity::{FluxPoint, SensitivityPoint};

    fn curve() -> SensitivityCurve {
        SensitivityCurve {
            points: vec![
                SensitivityPoint {
                    m_chi_gev: 0.1,
                    q_min: Some(2.5e-7),
                    reason: None,
                },
                SensitivityPoint {
                    m_chi_gev: 1e3,
                    q_min: None,
                    reason: Some("rate underflows".into()),
                },
            ],
            metadata: vec![("omega_rad_s".into(), "1000000000".into())],
        }
    }

    #[test]
    fn sensitivity_csv_layout() {
        let csv = Table::from(&curve()).to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# omega_rad_s: 1000000000");
        assert!(lines.iter().any(|l| l.starts_with("# dead m_chi_GeV=1e3")));
        let header = lines.iter().position(|l| !l.starts_with('#')).unwrap();
        assert_eq!(lines[header], "m_chi_GeV,q_min");
        assert_eq!(lines[header + 1], "1e-1,2.5e-7");
        assert_eq!(lines[header + 2], "1e3,no-sensitivity");
        assert_eq!(lines.len(), header + 3);
    }

    #[test]
    fn numbers_round_trip() {
        let x = 0.1 + 0.2;
        let mut t = Table::new(&[("x", "1")]);
        t.push(vec![Cell::Num(x)]);
        let csv = t.to_csv().unwrap();
        let last = csv.lines().last().unwrap();
        assert_eq!(last.parse::<f64>().unwrap(), x);
    }

    #[test]
    fn flux_columns_and_json_mirror() {
        let c = FluxCurve {
            points: vec![FluxPoint {
                e_ev: 1.0,
                flux_cm2_day: 3.0,
            }],
            metadata: vec![],
        };
        let t = Table::from(&c);
        assert!(t.to_csv().unwrap().contains("E_eV,flux_cm2_day\n1e0,3e0\n"));
        let j = t.to_json();
        assert_eq!(j["columns"], json!(["E_eV", "flux_cm2_day"]));
        assert_eq!(j["rows"][0], json!([1.0, 3.0]));
        let dead = Table::from(&curve()).to_json();
        assert_eq!(dead["rows"][1][1], json!("no-sensitivity"));
    }

    #[test]
    fn manifest_sits_beside_output() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("sub/curve.csv");
        emit_curve(&Table::from(&curve()), &out, Format::Csv).unwrap();
        let m = RunClock::start().manifest(&["sensitivity"], json!({"seed": 3}), 3, &out);
        let mp = write_manifest(&out, &m).unwrap();
        assert_eq!(mp, dir.path().join("sub/curve.csv.manifest.json"));
        let back: Value = serde_json::from_str(&fs::read_to_string(mp).unwrap()).unwrap();
        assert_eq!(back["constants"], "CODATA-2018");
        assert_eq!(back["seed"], 3);
        assert_eq!(back["config"]["seed"], 3);
    }

    #[test]
    fn absolute_paths_ignore_out_dir() {
        let p = resolve_output_path(Some(Path::new("/tmp/a.csv")), "x", Format::Csv);
        assert_eq!(p, PathBuf::from("/tmp/a.csv"));
    }
}
