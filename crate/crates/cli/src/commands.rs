//! Solver dispatch and the `run`, `compare` and `sweep` verbs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use superphonon_core::lindblad::{auto_cutoff_from, evolve, initial_cutoff, CutoffReport, HilbertSpec};
use superphonon_core::{analytic, simulate, PulseStats, Trajectory};
use toml::{Table, Value};

use crate::config::{apply_override, resolve, Cutoff, RunConfig, Solver, SweepParam};
use crate::output::{format_float, write_run};
use crate::CliError;

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub traj: Trajectory,
    pub cutoff: Option<CutoffReport>,
}

pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let p = &cfg.params;
    match cfg.solver {
        Solver::Analytic => Ok(RunOutcome {
            traj: analytic::trajectory(p, cfg.t_end, cfg.dt_out, cfg.phonons)?,
            cutoff: None,
        }),
        Solver::Moments => {
            let scheme = cfg.scheme.expect("resolved moment configs carry a scheme");
            Ok(RunOutcome {
                traj: simulate(p, scheme, cfg.t_end, cfg.dt_out, &cfg.integrator)?,
                cutoff: None,
            })
        }
        Solver::Lindblad => {
            let (n_max, report) = match cfg.cutoff.expect("resolved lindblad configs carry a cutoff") {
                Cutoff::Fixed { n_max } => (n_max, None),
                Cutoff::Auto { horizon } => {
                    let r = auto_cutoff_from(p, horizon, cfg.dt_out, &cfg.integrator, initial_cutoff(p), cfg.dim_cap)?;
                    (r.n_max, Some(r))
                }
            };
            let spec = HilbertSpec::with_cap(p.n_dots, n_max, cfg.dim_cap)?;
            Ok(RunOutcome {
                traj: evolve(&spec, p, cfg.t_end, cfg.dt_out, &cfg.integrator)?,
                cutoff: report,
            })
        }
    }
}

/// Resolves, runs and writes one document; returns the config and outcome.
pub fn run_document(doc: Table, out_dir: &Path) -> Result<(RunConfig, RunOutcome, PathBuf), CliError> {
    let cfg = resolve(doc)?;
    let outcome = execute(&cfg)?;
    let (csv, _) = write_run(out_dir, &cfg, &outcome.traj, outcome.cutoff.as_ref())?;
    Ok((cfg, outcome, csv))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Deviation {
    pub max_abs: f64,
    pub peak_a: f64,
    pub peak_b: f64,
    /// `|peak_a - peak_b| / |peak_b|`.
    pub peak_rel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub a: String,
    pub b: String,
    pub samples: usize,
    pub observables: BTreeMap<String, Deviation>,
    /// Observables present in only one run, or in neither.
    pub skipped: Vec<String>,
}

type Getter = fn(&superphonon_core::ObservableRecord) -> Option<f64>;

const OBSERVABLES: [(&str, Getter); 9] = [
    ("sz", |r| Some(r.sz)),
    ("phonons", |r| r.phonons),
    ("intensity", |r| r.intensity),
    ("b_re", |r| r.b_mean.map(|z| z.re)),
    ("b_im", |r| r.b_mean.map(|z| z.im)),
    ("szb_re", |r| r.szb.map(|z| z.re)),
    ("szb_im", |r| r.szb.map(|z| z.im)),
    ("spsm_re", |r| r.spsm().map(|z| z.re)),
    ("spsm_im", |r| r.spsm().map(|z| z.im)),
];

/// Same number of samples at the same times, to rounding.
pub fn check_grids(a: &[f64], b: &[f64]) -> Result<(), CliError> {
    if a.len() != b.len() {
        return Err(CliError::Config(format!(
            "output grids differ: {} vs {} samples",
            a.len(),
            b.len()
        )));
    }
    if let Some((x, y)) = a.iter().zip(b).find(|(x, y)| (*x - *y).abs() > 1e-12 * x.abs().max(1.0)) {
        return Err(CliError::Config(format!("output grids differ: t = {x} vs {y}")));
    }
    Ok(())
}

/// Per-observable max-abs and relative-peak deviations on a shared grid.
pub fn compare(a: &Trajectory, b: &Trajectory) -> Result<CompareReport, CliError> {
    check_grids(&a.times(), &b.times())?;
    let mut observables = BTreeMap::new();
    let mut skipped = Vec::new();
    for (name, get) in OBSERVABLES {
        let xa: Option<Vec<f64>> = a.records.iter().map(get).collect();
        let xb: Option<Vec<f64>> = b.records.iter().map(get).collect();
        let (Some(xa), Some(xb)) = (xa, xb) else {
            skipped.push(name.to_string());
            continue;
        };
        let max_abs = xa.iter().zip(&xb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let peak = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (peak_a, peak_b) = (peak(&xa), peak(&xb));
        let peak_rel = if peak_b == 0.0 && peak_a == 0.0 {
            0.0
        } else {
            (peak_a - peak_b).abs() / peak_b.abs()
        };
        observables.insert(
            name.to_string(),
            Deviation {
                max_abs,
                peak_a,
                peak_b,
                peak_rel,
            },
        );
    }
    Ok(CompareReport {
        a: a.scheme.clone(),
        b: b.scheme.clone(),
        samples: a.records.len(),
        observables,
        skipped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub stats: PulseStats,
    pub csv: PathBuf,
}

pub fn output_stem(doc: &Table) -> String {
    match doc.get("output") {
        Some(Value::String(s)) => s.strip_suffix(".csv").unwrap_or(s).to_string(),
        _ => "run".to_string(),
    }
}

/// Runs `base` once per value of `param`, writing one trajectory per point
/// and a summary `<stem>_sweep_<param>.csv`.
pub fn sweep(
    base: &Table,
    param: SweepParam,
    values: &[f64],
    out_dir: &Path,
    mut progress: impl FnMut(&Path),
) -> Result<(Vec<SweepPoint>, PathBuf), CliError> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let stem = output_stem(base);
    let mut points = Vec::new();
    for &v in values {
        let mut doc = base.clone();
        apply_override(&mut doc, &format!("params.{}", param.key()), param.value(v)?)?;
        let label = format!("{stem}_{}_{}", param.key(), format_float(v));
        doc.insert("output".into(), Value::String(label));
        let (_, outcome, csv) = run_document(doc, out_dir)?;
        progress(&csv);
        points.push(SweepPoint {
            value: v,
            stats: outcome.traj.pulse_stats(),
            csv,
        });
    }
    let summary = out_dir.join(format!("{stem}_sweep_{}.csv", param.key()));
    write_summary(&summary, param.key(), &points)?;
    Ok((points, summary))
}

pub const SUMMARY_COLUMNS: [&str; 6] = [
    "peak_phonons",
    "peak_time",
    "fwhm",
    "final_phonons",
    "peak_intensity",
    "peak_intensity_time",
];

pub fn write_summary(path: &Path, key: &str, points: &[SweepPoint]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![key];
    header.extend(SUMMARY_COLUMNS);
    w.write_record(&header)?;
    let cell = |x: Option<f64>| x.map(format_float).unwrap_or_default();
    for p in points {
        let s = &p.stats;
        w.write_record([
            format_float(p.value),
            cell(s.peak_phonons),
            cell(s.peak_phonons_time),
            cell(s.fwhm),
            cell(s.final_phonons),
            cell(s.peak_intensity),
            cell(s.peak_intensity_time),
        ])?;
    }
    w.flush()?;
    Ok(())
}
