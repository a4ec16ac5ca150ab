//! Trajectory CSV and JSON sidecar files.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use superphonon_core::lindblad::CutoffReport;
use superphonon_core::{ObservableRecord, PulseStats, Trajectory};

use crate::config::RunConfig;
use crate::CliError;

pub const CSV_HEADER: [&str; 11] = [
    "t", "sz", "phonons", "intensity", "b_re", "b_im", "szb_re", "szb_im", "spsm_re", "spsm_im", "trunc_diag",
];

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn cell(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn row(r: &ObservableRecord) -> [String; 11] {
    let spsm = r.spsm();
    [
        format_float(r.t),
        format_float(r.sz),
        cell(r.phonons),
        cell(r.intensity),
        cell(r.b_mean.map(|z| z.re)),
        cell(r.b_mean.map(|z| z.im)),
        cell(r.szb.map(|z| z.re)),
        cell(r.szb.map(|z| z.im)),
        cell(spsm.map(|z| z.re)),
        cell(spsm.map(|z| z.im)),
        cell(r.trunc_diag),
    ]
}

pub fn write_csv<W: Write>(traj: &Trajectory, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &traj.records {
        w.write_record(row(r))?;
    }
    w.flush()?;
    Ok(())
}

/// One parsed CSV row; empty cells are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow(pub [Option<f64>; 11]);

impl CsvRow {
    pub fn get(&self, column: &str) -> Option<f64> {
        let i = CSV_HEADER.iter().position(|c| *c == column)?;
        self.0[i]
    }
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(CliError::Io(format!("unexpected CSV header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut vals = [None; 11];
        for (slot, field) in vals.iter_mut().zip(rec.iter()) {
            if !field.is_empty() {
                *slot = Some(
                    field
                        .parse::<f64>()
                        .map_err(|e| CliError::Io(format!("bad number `{field}`: {e}")))?,
                );
            }
        }
        rows.push(CsvRow(vals));
    }
    Ok(rows)
}

/// Contents of `<run>.meta.json`.
#[derive(Debug, Serialize)]
pub struct Meta<'a> {
    pub tool_version: &'static str,
    pub csv: String,
    pub solver: String,
    pub scheme: &'a str,
    pub config: &'a RunConfig,
    pub diagnostics: &'a std::collections::BTreeMap<String, f64>,
    pub warnings: &'a [String],
    pub cutoff_search: Option<&'a CutoffReport>,
    pub peak: PulseStats,
}

/// `<dir>/<stem>.csv` and `<dir>/<stem>.meta.json`.
pub fn run_paths(dir: &Path, stem: &Path) -> (PathBuf, PathBuf) {
    let base = dir.join(stem);
    let name = base.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = name.strip_suffix(".csv").unwrap_or(&name).to_string();
    (base.with_file_name(format!("{name}.csv")), base.with_file_name(format!("{name}.meta.json")))
}

pub fn write_run(
    dir: &Path,
    cfg: &RunConfig,
    traj: &Trajectory,
    cutoff: Option<&CutoffReport>,
) -> Result<(PathBuf, PathBuf), CliError> {
    let (csv_path, meta_path) = run_paths(dir, &cfg.output);
    if let Some(parent) = csv_path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    let file = fs::File::create(&csv_path).map_err(|e| CliError::Io(format!("{}: {e}", csv_path.display())))?;
    write_csv(traj, std::io::BufWriter::new(file))?;
    let meta = Meta {
        tool_version: env!("CARGO_PKG_VERSION"),
        csv: csv_path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        solver: cfg.solver.to_string(),
        scheme: &traj.scheme,
        config: cfg,
        diagnostics: &traj.diagnostics,
        warnings: &traj.warnings,
        cutoff_search: cutoff,
        peak: traj.pulse_stats(),
    };
    write_json(&meta_path, &meta)?;
    Ok((csv_path, meta_path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 1e-300, -2.5e-7, 123456.789, 9.999999999999999e14, 1e20, f64::MIN_POSITIVE] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{x} -> {s}");
        }
        assert_eq!(format_float(0.25), "0.25");
        assert_eq!(format_float(1e-20), "1e-20");
    }

    #[test]
    fn stems_get_extensions() {
        let (c, m) = run_paths(Path::new("out"), Path::new("fig2/n1"));
        assert_eq!(c, PathBuf::from("out/fig2/n1.csv"));
        assert_eq!(m, PathBuf::from("out/fig2/n1.meta.json"));
        let (c, _) = run_paths(Path::new("."), Path::new("x.csv"));
        assert_eq!(c, PathBuf::from("./x.csv"));
    }
}
