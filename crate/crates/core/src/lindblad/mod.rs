//! Density-matrix reference solver on the symmetric Dicke ladder times a
//! truncated phonon Fock space.

mod generator;
mod operators;
mod thermal;

use std::ops::ControlFlow;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use generator::{BlockLayout, Frame, Generator, HermitianGenerator};
pub use operators::{
    build_hamiltonian, build_operators, lindblad_rhs, lowering_amplitude, DensityMatrix, OperatorMatrix, Operators,
};
pub use thermal::{thermal_state, ThermalState};

use crate::error::{Error, Result};
use crate::integrate::{integrate_with, IntegratorConfig};
use crate::system::{validate, SystemParams};
use crate::trajectory::{uniform_grid, ObservableRecord, Trajectory, SPSM, SPSM_B};

type C = Complex64;

pub const DEFAULT_DIM_CAP: usize = 20_000;
/// Largest tolerated population of the top Fock level in [`evolve`].
pub const TRUNCATION_LIMIT: f64 = 1e-6;
/// Top-level population required by [`auto_cutoff`].
pub const CUTOFF_TAIL_LIMIT: f64 = 1e-8;
/// Relative peak change accepted between consecutive cutoffs.
pub const CUTOFF_PEAK_RTOL: f64 = 1e-5;
const POSITIVITY_LIMIT: f64 = -1e-8;
const EIGEN_SAMPLES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertSpec {
    pub n_dots: u32,
    /// Highest retained Fock level.
    pub n_max: u32,
    pub cap: usize,
}

impl HilbertSpec {
    pub fn new(n_dots: u32, n_max: u32) -> Result<Self> {
        Self::with_cap(n_dots, n_max, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(n_dots: u32, n_max: u32, cap: usize) -> Result<Self> {
        let spec = HilbertSpec { n_dots, n_max, cap };
        spec.check()?;
        Ok(spec)
    }

    pub fn j(&self) -> f64 {
        0.5 * self.n_dots as f64
    }

    pub fn dim(&self) -> usize {
        (self.n_dots as usize + 1) * (self.n_max as usize + 1)
    }

    pub fn check(&self) -> Result<()> {
        if self.n_dots < 1 {
            return Err(Error::InvalidArgument("n_dots must be ≥ 1".into()));
        }
        if self.n_max < 1 {
            return Err(Error::InvalidArgument("n_max must be ≥ 1".into()));
        }
        if self.dim() > self.cap {
            return Err(Error::DimensionCap {
                dim: self.dim(),
                cap: self.cap,
            });
        }
        Ok(())
    }
}

/// Expectation values of one packed state of the diagonal sector.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub trace: f64,
    pub sz: f64,
    pub phonons: f64,
    pub spsm: f64,
    /// `<b>` and friends in the frame of the packed state.
    pub b: C,
    pub szb: C,
    pub spsmb: C,
    pub top_level: f64,
}

fn moments_of(gen: &HermitianGenerator, y: &[C]) -> Moments {
    let k = gen.k();
    let j = 0.5 * (gen.n_blocks() - 1) as f64;
    let mut out = Moments::default();
    for d in 0..gen.n_blocks() {
        let blk = gen.block(y, d);
        let m = j - d as f64;
        let c2 = lowering_amplitude(j, m).powi(2);
        let mut tr = 0.0;
        let mut n = 0.0;
        let mut b = C::default();
        for p in 0..k {
            let pop = blk[gen.index(p, p)].re;
            tr += pop;
            n += p as f64 * pop;
            if p + 1 < k {
                b += blk[gen.index(p, p + 1)].conj() * ((p + 1) as f64).sqrt();
            }
        }
        out.trace += tr;
        out.sz += m * tr;
        out.phonons += n;
        out.spsm += c2 * tr;
        out.b += b;
        out.szb += b * m;
        out.spsmb += b * c2;
        out.top_level += blk[gen.index(k - 1, k - 1)].re;
    }
    out
}

/// Packed storage is Hermitian by construction; what can drift is the
/// imaginary part of the diagonal.
fn hermiticity_error(gen: &HermitianGenerator, y: &[C]) -> f64 {
    let k = gen.k();
    (0..gen.n_blocks())
        .flat_map(|d| {
            let blk = gen.block(y, d);
            (0..k).map(move |p| blk[gen.index(p, p)].im.abs())
        })
        .fold(0.0, f64::max)
}

fn min_eigenvalue(gen: &HermitianGenerator, y: &[C]) -> f64 {
    let k = gen.k();
    (0..gen.n_blocks())
        .map(|d| {
            let blk = gen.block(y, d);
            let m = DMatrix::from_fn(k, k, |p, q| gen.entry(blk, p, q));
            m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
}

fn packed_initial_state(gen: &HermitianGenerator, thermal: &ThermalState) -> Vec<C> {
    let mut y = vec![C::default(); gen.len()];
    for (p, &pop) in thermal.populations.iter().enumerate() {
        y[gen.index(p, p)] = C::new(pop, 0.0);
    }
    y
}

/// Initial `|j,j><j,j| ⊗ thermal(n̄)` packed on the diagonal sector.
pub fn initial_state(spec: &HilbertSpec, params: &SystemParams) -> Result<(BlockLayout, Vec<C>, ThermalState)> {
    let layout = BlockLayout::diagonal(spec);
    let thermal = thermal_state(params.nbar, spec.n_max)?;
    let mut y = vec![C::default(); layout.len()];
    let k = layout.k;
    let b0 = layout.block_index(0, 0).expect("diagonal layout stores (0, 0)");
    for (p, &pop) in thermal.populations.iter().enumerate() {
        y[b0 * k * k + p * k + p] = C::new(pop, 0.0);
    }
    Ok((layout, y, thermal))
}

struct RawRun {
    traj: Trajectory,
    top_level_max: f64,
}

fn run(spec: &HilbertSpec, params: &SystemParams, grid: &[f64], config: &IntegratorConfig, frame: Frame) -> Result<RawRun> {
    let params = validate(*params)?;
    spec.check()?;
    if params.n_dots != spec.n_dots {
        return Err(Error::InvalidArgument(format!(
            "params have n_dots = {}, Hilbert space has {}",
            params.n_dots, spec.n_dots
        )));
    }
    let thermal = thermal_state(params.nbar, spec.n_max)?;
    let gen = HermitianGenerator::new(spec, &params, frame)?;
    let y0 = packed_initial_state(&gen, &thermal);

    let mut traj = Trajectory::new(params, "lindblad");
    if let Some(w) = &thermal.warning {
        traj.warn(w.clone());
    }
    traj.records.reserve(grid.len());
    let stride = (grid.len() / EIGEN_SAMPLES).max(1);
    let mut trace_err = 0.0_f64;
    let mut herm_err = 0.0_f64;
    let mut min_eig = f64::INFINITY;
    let mut top_max = 0.0_f64;

    let stats = integrate_with(
        |t, y, dy| gen.apply(t, y, dy),
        &y0,
        0.0,
        grid,
        config,
        |i, t, y| {
            let mo = moments_of(&gen, y);
            // back to the lab frame: b carries e^{-iωt}
            let rot = gen.phase(t).conj();
            trace_err = trace_err.max((mo.trace - 1.0).abs());
            herm_err = herm_err.max(hermiticity_error(&gen, y));
            if i % stride == 0 || i + 1 == grid.len() {
                min_eig = min_eig.min(min_eigenvalue(&gen, y));
            }
            top_max = top_max.max(mo.top_level);
            let mut rec = ObservableRecord::new(t, mo.sz);
            rec.phonons = Some(mo.phonons);
            rec.intensity = Some(2.0 * params.gamma * mo.spsm);
            rec.b_mean = Some(mo.b * rot);
            rec.szb = Some(mo.szb * rot);
            rec.extra.insert(SPSM.to_string(), C::new(mo.spsm, 0.0));
            rec.extra.insert(SPSM_B.to_string(), mo.spsmb * rot);
            rec.trunc_diag = Some(mo.top_level);
            traj.records.push(rec);
            ControlFlow::Continue(())
        },
    )?;

    let dg = &mut traj.diagnostics;
    dg.insert("n_max".into(), spec.n_max as f64);
    dg.insert("dimension".into(), spec.dim() as f64);
    dg.insert("trace_error_max".into(), trace_err);
    dg.insert("hermiticity_error_max".into(), herm_err);
    dg.insert("min_eigenvalue".into(), min_eig);
    dg.insert("trunc_diag_max".into(), top_max);
    dg.insert("thermal_tail_mass".into(), thermal.tail_mass);
    dg.insert("thermal_mean_occupation".into(), thermal.mean_occupation);
    dg.insert("steps".into(), stats.steps as f64);
    dg.insert("rejected_steps".into(), stats.rejected as f64);
    dg.insert("rhs_evals".into(), stats.rhs_evals as f64);
    if min_eig < POSITIVITY_LIMIT {
        traj.warn(format!("density matrix eigenvalue {min_eig:.3e} below {POSITIVITY_LIMIT:e}"));
    }
    Ok(RawRun {
        traj,
        top_level_max: top_max,
    })
}

/// Evolves `|j,j><j,j| ⊗ thermal(n̄)` and samples `0, dt_out, ..., t_end`.
/// Fails if the top Fock level ever holds more than [`TRUNCATION_LIMIT`].
pub fn evolve(spec: &HilbertSpec, params: &SystemParams, t_end: f64, dt_out: f64, config: &IntegratorConfig) -> Result<Trajectory> {
    evolve_in(spec, params, t_end, dt_out, config, Frame::Rotating)
}

pub fn evolve_in(
    spec: &HilbertSpec,
    params: &SystemParams,
    t_end: f64,
    dt_out: f64,
    config: &IntegratorConfig,
    frame: Frame,
) -> Result<Trajectory> {
    if !(t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("t_end must be > 0, got {t_end}")));
    }
    let grid = uniform_grid(t_end, dt_out)?;
    let raw = run(spec, params, &grid, config, frame)?;
    if raw.top_level_max > TRUNCATION_LIMIT {
        let (t, v) = raw
            .traj
            .records
            .iter()
            .filter_map(|r| r.trunc_diag.map(|d| (r.t, d)))
            .find(|&(_, d)| d > TRUNCATION_LIMIT)
            .unwrap_or((f64::NAN, raw.top_level_max));
        return Err(Error::Truncation(format!(
            "population {v:.3e} on level n_max = {} at t = {t}; try n_max = {}",
            spec.n_max,
            2 * spec.n_max
        )));
    }
    Ok(raw.traj)
}

/// One probe of the cutoff search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffProbe {
    pub n_max: u32,
    pub peak_phonons: f64,
    pub trunc_diag_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffReport {
    pub n_max: u32,
    pub probes: Vec<CutoffProbe>,
}

/// First guess for the cutoff: the level where a thermal distribution
/// displaced by the largest coherent amplitude the dots can drive falls
/// below [`CUTOFF_TAIL_LIMIT`].
pub fn initial_cutoff(params: &SystemParams) -> u32 {
    if params.eta == 0.0 && params.nbar == 0.0 {
        return 1;
    }
    let alpha = 2.0 * params.eta * params.n_dots as f64 / params.kappa.hypot(params.omega);
    let (rate, pre) = if params.nbar > 0.0 {
        ((1.0 + 1.0 / params.nbar).ln(), 1.0 / (1.0 + params.nbar))
    } else {
        (1.0, 1.0)
    };
    let target = (pre / CUTOFF_TAIL_LIMIT).ln().max(0.0);
    let root = alpha + (target / rate).sqrt();
    (root * root).ceil().max(1.0) as u32
}

/// Horizon for the cutoff search when only the emission pulse matters:
/// the phonon peak of a few dots falls well inside `1/(2γ)`.
pub fn pilot_horizon(params: &SystemParams, t_end: f64) -> f64 {
    t_end.min(0.5 / params.gamma)
}

/// Doubling search for the smallest cutoff whose top-level population stays
/// below [`CUTOFF_TAIL_LIMIT`] and whose peak `<b†b>` moves by less than
/// [`CUTOFF_PEAK_RTOL`] relative when the cutoff is doubled.
pub fn auto_cutoff(params: &SystemParams, t_end: f64, dt_out: f64, config: &IntegratorConfig) -> Result<CutoffReport> {
    auto_cutoff_from(params, t_end, dt_out, config, initial_cutoff(params), DEFAULT_DIM_CAP)
}

pub fn auto_cutoff_from(
    params: &SystemParams,
    t_end: f64,
    dt_out: f64,
    config: &IntegratorConfig,
    start: u32,
    cap: usize,
) -> Result<CutoffReport> {
    let grid = uniform_grid(t_end, dt_out)?;
    let mut probes = Vec::new();
    let probe = |n_max: u32, probes: &mut Vec<CutoffProbe>| -> Result<Option<CutoffProbe>> {
        let spec = match HilbertSpec::with_cap(params.n_dots, n_max, cap) {
            Ok(s) => s,
            Err(Error::DimensionCap { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let p = match run(&spec, params, &grid, config, Frame::Rotating) {
            Ok(raw) => CutoffProbe {
                n_max,
                peak_phonons: raw.traj.pulse_stats().peak_phonons.unwrap_or(f64::NAN),
                trunc_diag_max: raw.top_level_max,
            },
            // thermal state itself too truncated: treat as an unconverged probe
            Err(Error::Truncation(_)) => CutoffProbe {
                n_max,
                peak_phonons: f64::NAN,
                trunc_diag_max: f64::INFINITY,
            },
            Err(e) => return Err(e),
        };
        probes.push(p);
        Ok(Some(p))
    };

    let not_converged = |probes: &[CutoffProbe]| {
        let last = probes.last().map_or("none".to_string(), |p| format!("{p:?}"));
        Error::CutoffNotConverged(format!("dimension cap {cap} reached; last probe {last}"))
    };
    let mut n = start.max(1);
    let Some(mut cur) = probe(n, &mut probes)? else {
        return Err(not_converged(&probes));
    };
    loop {
        let next_n = n.saturating_mul(2);
        let Some(next) = probe(next_n, &mut probes)? else {
            return Err(not_converged(&probes));
        };
        let change = (next.peak_phonons - cur.peak_phonons).abs();
        if cur.trunc_diag_max < CUTOFF_TAIL_LIMIT && change <= CUTOFF_PEAK_RTOL * next.peak_phonons.abs() {
            return Ok(CutoffReport { n_max: n, probes });
        }
        n = next_n;
        cur = next;
    }
}
