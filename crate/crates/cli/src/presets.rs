//! Scenario documents behind `superphonon figure 2|3|4`.
//!
//! Figure 3 is the normalized N = 200 pulse. The inversion does not depend
//! on the resonator, so it reuses the figure 4 mode with κ = 5γ.

use std::path::{Path, PathBuf};

use superphonon_core::analytic::superradiance_scales;
use toml::Table;

use crate::commands::{run_document, write_summary, RunOutcome, SweepPoint};
use crate::config::apply_override;
use crate::output::format_float;
use crate::CliError;

pub const FIGURE4_KAPPAS: [f64; 3] = [1.0, 5.0, 20.0];

fn doc(text: &str) -> Table {
    text.parse().expect("preset documents are valid TOML")
}

fn figure2(n: u32) -> Table {
    let scheme = if n == 1 { "exact1" } else { "exact2" };
    doc(&format!(
        r#"
solver = "moments"
scheme = "{scheme}"
t_end = 10.0
output = "fig2_n{n}"
[params]
n_dots = {n}
omega = 15.0
eta = 5.0
kappa = 0.5
nbar = 10.0
"#
    ))
}

fn figure3() -> Table {
    let t_end = 4.0 * superradiance_scales(200, 1.0).t0;
    doc(&format!(
        r#"
solver = "moments"
scheme = "mean-field-a"
t_end = {t_end:?}
output = "fig3"
[params]
n_dots = 200
omega = 50.0
eta = 5.0
kappa = 5.0
nbar = 10.0
"#
    ))
}

fn figure4(kappa: f64) -> Table {
    doc(&format!(
        r#"
solver = "moments"
scheme = "mean-field-a"
t_end = 10.0
output = "fig4_kappa{}"
[params]
n_dots = 200
omega = 50.0
eta = 5.0
kappa = {kappa:?}
nbar = 10.0
"#,
        format_float(kappa)
    ))
}

/// Scenario documents of one figure; `None` for an unknown figure.
pub fn documents(figure: u32) -> Option<Vec<Table>> {
    match figure {
        2 => Some(vec![figure2(1), figure2(2)]),
        3 => Some(vec![figure3()]),
        4 => Some(FIGURE4_KAPPAS.iter().map(|&k| figure4(k)).collect()),
        _ => None,
    }
}

/// Runs every document of a figure with `overrides` applied and writes the
/// trajectories plus the figure's derived file (normalized pulse for
/// figure 3, damping summary for figure 4).
pub fn run_figure(
    figure: u32,
    overrides: &[(String, toml::Value)],
    out_dir: &Path,
    mut progress: impl FnMut(&Path),
) -> Result<Vec<(RunOutcome, PathBuf)>, CliError> {
    let docs = documents(figure).ok_or_else(|| CliError::Config(format!("no preset for figure {figure} (expected 2, 3 or 4)")))?;
    let mut runs = Vec::new();
    for mut d in docs {
        for (k, v) in overrides {
            apply_override(&mut d, k, v.clone())?;
        }
        let (_, outcome, csv) = run_document(d, out_dir)?;
        progress(&csv);
        runs.push((outcome, csv));
    }
    match figure {
        3 => {
            let path = out_dir.join("fig3_normalized.csv");
            write_normalized(&path, &runs[0].0)?;
            progress(&path);
        }
        4 => {
            let points: Vec<SweepPoint> = runs
                .iter()
                .map(|(o, csv)| SweepPoint {
                    value: o.traj.params.kappa,
                    stats: o.traj.pulse_stats(),
                    csv: csv.clone(),
                })
                .collect();
            let path = out_dir.join("fig4_summary.csv");
            write_summary(&path, "kappa", &points)?;
            progress(&path);
        }
        _ => {}
    }
    Ok(runs)
}

/// `t, <Sz>/j, I/j²` as plotted in the superradiant-pulse figure.
fn write_normalized(path: &Path, run: &RunOutcome) -> Result<(), CliError> {
    let j = run.traj.params.j();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "sz_over_j", "intensity_over_j2"])?;
    for r in &run.traj.records {
        w.write_record([
            format_float(r.t),
            format_float(r.sz / j),
            r.intensity.map(|i| format_float(i / (j * j))).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::resolve;
    use superphonon_core::ClosureScheme;

    #[test]
    fn presets_resolve() {
        let f2: Vec<_> = documents(2).unwrap().into_iter().map(|d| resolve(d).unwrap()).collect();
        assert_eq!(f2[0].scheme, Some(ClosureScheme::Exact1));
        assert_eq!(f2[1].scheme, Some(ClosureScheme::Exact2));
        assert!(f2.iter().all(|c| c.t_end == 10.0 && c.params.omega == 15.0 && c.params.nbar == 10.0));
        let f4: Vec<_> = documents(4).unwrap().into_iter().map(|d| resolve(d).unwrap()).collect();
        let kappas: Vec<f64> = f4.iter().map(|c| c.params.kappa).collect();
        assert_eq!(kappas, FIGURE4_KAPPAS);
        assert!(f4.iter().all(|c| c.params.n_dots == 200 && c.params.omega == 50.0));
        assert_eq!(resolve(documents(3).unwrap().remove(0)).unwrap().params.n_dots, 200);
        assert!(documents(5).is_none());
    }

    #[test]
    fn presets_are_pure() {
        for f in 2..=4 {
            assert_eq!(documents(f), documents(f));
        }
    }
}
