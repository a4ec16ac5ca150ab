//! Time-stamped observable records shared by every solver.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::SystemParams;

/// Key of `<S+S->` in [`ObservableRecord::extra`].
pub const SPSM: &str = "spsm";
/// Key of `<S+S- b>` in [`ObservableRecord::extra`].
pub const SPSM_B: &str = "spsm_b";

/// Observables at one instant. `<Sz b†>` is never stored, it is the
/// conjugate of `szb`. Fields a solver cannot produce are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    /// `<Sz>`
    pub sz: f64,
    /// `<b†b>`
    pub phonons: Option<f64>,
    /// `-d<Sz>/dt`
    pub intensity: Option<f64>,
    /// `<b>`
    pub b_mean: Option<Complex64>,
    /// `<Sz b>`
    pub szb: Option<Complex64>,
    /// Scheme-specific correlators such as [`SPSM`] and [`SPSM_B`].
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Complex64>,
    /// Population of the highest retained Fock level (density-matrix runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc_diag: Option<f64>,
}

impl ObservableRecord {
    pub fn new(t: f64, sz: f64) -> Self {
        ObservableRecord {
            t,
            sz,
            phonons: None,
            intensity: None,
            b_mean: None,
            szb: None,
            extra: BTreeMap::new(),
            trunc_diag: None,
        }
    }

    pub fn spsm(&self) -> Option<Complex64> {
        self.extra.get(SPSM).copied()
    }
}

/// Output of one solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: SystemParams,
    /// Identifier of the producing solver, e.g. `moments/exact1`.
    pub scheme: String,
    pub records: Vec<ObservableRecord>,
    /// Scalar run diagnostics (step counts, symmetry residuals, ...).
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
    /// Conditions that were flagged but did not abort the run.
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn new(params: SystemParams, scheme: impl Into<String>) -> Self {
        Trajectory {
            params,
            scheme: scheme.into(),
            records: Vec::new(),
            diagnostics: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn sz(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.sz).collect()
    }

    /// `<b†b>` series; `None` if any record lacks it.
    pub fn phonons(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.phonons).collect()
    }

    pub fn intensity(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.intensity).collect()
    }

    /// Checks the ordering invariant: first record at `t = 0`, times
    /// strictly increasing.
    pub fn check_times(&self) -> Result<()> {
        match self.records.first() {
            None => return Ok(()),
            Some(r) if r.t != 0.0 => {
                return Err(Error::InvalidArgument(format!(
                    "trajectory must start at t = 0, starts at {}",
                    r.t
                )))
            }
            _ => {}
        }
        if let Some(w) = self.records.windows(2).find(|w| !(w[1].t > w[0].t)) {
            return Err(Error::InvalidArgument(format!(
                "trajectory times not strictly increasing at t = {}",
                w[1].t
            )));
        }
        Ok(())
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        if !self.warnings.contains(&msg) {
            self.warnings.push(msg);
        }
    }

    pub fn pulse_stats(&self) -> PulseStats {
        PulseStats::of(self)
    }
}

/// Fills `intensity = -d<Sz>/dt` by second-order finite differences on the
/// sampled grid: centered in the interior, one-sided three-point at the
/// ends. Works on non-uniform grids.
pub fn intensity_from_inversion(trajectory: &Trajectory) -> Result<Trajectory> {
    let n = trajectory.records.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "intensity needs at least 3 records, got {n}"
        )));
    }
    trajectory.check_times()?;
    let t = trajectory.times();
    let s = trajectory.sz();
    let deriv = |i0: usize, i: usize| {
        // derivative at t[i] of the parabola through points i0, i0+1, i0+2
        let (x0, x1, x2) = (t[i0], t[i0 + 1], t[i0 + 2]);
        let (y0, y1, y2) = (s[i0], s[i0 + 1], s[i0 + 2]);
        let x = t[i];
        y0 * (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    let mut out = trajectory.clone();
    for (i, rec) in out.records.iter_mut().enumerate() {
        let i0 = i.saturating_sub(1).min(n - 3);
        rec.intensity = Some(-deriv(i0, i));
    }
    Ok(out)
}

/// Peak statistics of one run, as reported in sidecars and sweeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseStats {
    pub peak_phonons: Option<f64>,
    pub peak_phonons_time: Option<f64>,
    /// Full width at half maximum of `<b†b> - nbar`.
    pub fwhm: Option<f64>,
    pub final_phonons: Option<f64>,
    pub peak_intensity: Option<f64>,
    pub peak_intensity_time: Option<f64>,
}

impl PulseStats {
    pub fn of(traj: &Trajectory) -> PulseStats {
        let mut stats = PulseStats::default();
        let t = traj.times();
        if let Some(n) = traj.phonons() {
            if let Some(k) = argmax(&n) {
                stats.peak_phonons = Some(n[k]);
                stats.peak_phonons_time = Some(t[k]);
                stats.final_phonons = n.last().copied();
                let excess: Vec<f64> = n.iter().map(|x| x - traj.params.nbar).collect();
                stats.fwhm = fwhm(&t, &excess);
            }
        }
        if let Some(i) = traj.intensity() {
            if let Some(k) = argmax(&i) {
                stats.peak_intensity = Some(i[k]);
                stats.peak_intensity_time = Some(t[k]);
            }
        }
        stats
    }
}

/// Uniform grid `0, dt, 2dt, ...` up to and including `t_end` (within
/// rounding).
pub fn uniform_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("output step must be > 0, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be ≥ 0, got {t_end}")));
    }
    let n = (t_end / dt * (1.0 + 1e-12)).floor() as usize;
    Ok((0..=n).map(|k| k as f64 * dt).collect())
}

fn argmax(v: &[f64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| x.is_finite())
        .fold(None, |best: Option<(usize, f64)>, (i, &x)| match best {
            Some((_, b)) if b >= x => best,
            _ => Some((i, x)),
        })
        .map(|(i, _)| i)
}

/// Width of the outer envelope where `y >= max(y)/2`, with linear
/// interpolation at both crossings. `None` when there is no positive peak
/// or the signal is still above half maximum at either end of the record.
pub fn fwhm(t: &[f64], y: &[f64]) -> Option<f64> {
    let k = argmax(y)?;
    let peak = y[k];
    let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(peak > 1e-12 * scale.max(1.0)) {
        return None;
    }
    let half = 0.5 * peak;
    let first = y.iter().position(|&v| v >= half)?;
    let last = y.iter().rposition(|&v| v >= half)?;
    if first == 0 || last + 1 == y.len() {
        return None;
    }
    let cross = |i: usize, j: usize| t[i] + (half - y[i]) * (t[j] - t[i]) / (y[j] - y[i]);
    Some(cross(last, last + 1) - cross(first - 1, first))
}
