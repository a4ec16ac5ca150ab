//! Explicit Runge-Kutta integration of complex state vectors.
//!
//! Two methods are provided: classical RK4 with a fixed step that lands on
//! every output time, and the Dormand-Prince 5(4) embedded pair with
//! adaptive step control and its fourth-order continuous extension for
//! output between steps.

use std::ops::ControlFlow;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("non-finite derivative component in slot {slot} at t={t}")]
    NonFinite { slot: usize, t: f64 },
    #[error("step size {h:e} fell below h_min={h_min:e}: stiffness or discontinuity at t={t}")]
    StepUnderflow { t: f64, h: f64, h_min: f64 },
    #[error("maximum number of steps ({max_steps}) exceeded at t={t}")]
    MaxSteps { max_steps: u64, t: f64 },
    #[error("invalid integrator configuration: {0}")]
    Config(String),
    #[error("invalid output grid: {0}")]
    Grid(String),
}

type IResult<T> = std::result::Result<T, IntegrateError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Classical fourth-order Runge-Kutta; `h_init` is the step.
    #[serde(rename = "rk4")]
    Rk4Fixed,
    /// Dormand-Prince 5(4) with error control.
    #[serde(rename = "rk45")]
    Rk45Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: u64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk45Adaptive,
            rtol: 1e-9,
            atol: 1e-12,
            h_init: 1e-4,
            h_min: 1e-14,
            h_max: 0.1,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(h: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4Fixed,
            h_init: h,
            h_min: h.min(1e-14),
            h_max: h,
            ..Default::default()
        }
    }

    pub fn adaptive(rtol: f64, atol: f64) -> Self {
        IntegratorConfig {
            rtol,
            atol,
            ..Default::default()
        }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self.h_init = self.h_init.min(h_max);
        self.h_min = self.h_min.min(self.h_init);
        self
    }

    pub fn validate(&self) -> IResult<()> {
        let mut bad = Vec::new();
        if !(self.h_min > 0.0 && self.h_min <= self.h_init && self.h_init <= self.h_max) {
            bad.push(format!(
                "0 < h_min ≤ h_init ≤ h_max (got {}, {}, {})",
                self.h_min, self.h_init, self.h_max
            ));
        }
        if !(self.rtol > 0.0) {
            bad.push("rtol > 0".to_string());
        }
        if !(self.atol > 0.0) {
            bad.push("atol > 0".to_string());
        }
        if self.max_steps == 0 {
            bad.push("max_steps > 0".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(IntegrateError::Config(bad.join(", ")))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub steps: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
    pub h_min_used: f64,
    pub h_max_used: f64,
    /// True when the observer asked to stop before the last grid point.
    pub stopped_early: bool,
}

impl IntegrationStats {
    fn record_step(&mut self, h: f64) {
        self.steps += 1;
        if self.steps == 1 {
            self.h_min_used = h;
            self.h_max_used = h;
        } else {
            self.h_min_used = self.h_min_used.min(h);
            self.h_max_used = self.h_max_used.max(h);
        }
    }
}

/// Sampled states at the requested output times.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    pub stats: IntegrationStats,
}

fn first_non_finite(v: &[Complex64]) -> Option<usize> {
    v.iter().position(|z| !z.re.is_finite() || !z.im.is_finite())
}

/// One classical RK4 step of size `h` from `(t, y)`.
pub fn step_rk4<F>(rhs: &mut F, y: &[Complex64], t: f64, h: f64) -> IResult<Vec<Complex64>>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    if !(h > 0.0) {
        return Err(IntegrateError::Config(format!("step must be > 0, got {h}")));
    }
    let mut ws = Rk4Workspace::new(y.len());
    let mut out = y.to_vec();
    ws.step(rhs, &mut out, t, h, true)?;
    Ok(out)
}

struct Rk4Workspace {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Rk4Workspace {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::default(); n];
        Rk4Workspace {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    /// Advances `y` in place. With `check_stages` every stage derivative is
    /// screened; otherwise only the updated state is.
    fn step<F>(&mut self, rhs: &mut F, y: &mut [Complex64], t: f64, h: f64, check_stages: bool) -> IResult<()>
    where
        F: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let Rk4Workspace { k1, k2, k3, k4, tmp } = self;
        let check = |k: &[Complex64], t: f64| match first_non_finite(k) {
            Some(slot) if check_stages => Err(IntegrateError::NonFinite { slot, t }),
            _ => Ok(()),
        };
        rhs(t, y, k1);
        check(k1, t)?;
        for i in 0..y.len() {
            tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        rhs(t + 0.5 * h, tmp, k2);
        check(k2, t)?;
        for i in 0..y.len() {
            tmp[i] = y[i] + k2[i] * (0.5 * h);
        }
        rhs(t + 0.5 * h, tmp, k3);
        check(k3, t)?;
        for i in 0..y.len() {
            tmp[i] = y[i] + k3[i] * h;
        }
        rhs(t + h, tmp, k4);
        check(k4, t)?;
        let h6 = h / 6.0;
        for i in 0..y.len() {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * h6;
        }
        if let Some(slot) = first_non_finite(y) {
            return Err(IntegrateError::NonFinite { slot, t });
        }
        Ok(())
    }
}

/// Integrates from `(t0, y0)` and collects the state at every grid time.
pub fn integrate<F>(rhs: F, y0: &[Complex64], t0: f64, grid: &[f64], config: &IntegratorConfig) -> IResult<Solution>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let mut states = Vec::with_capacity(grid.len());
    let stats = integrate_with(rhs, y0, t0, grid, config, |_, _, y| {
        states.push(y.to_vec());
        ControlFlow::Continue(())
    })?;
    Ok(Solution {
        times: grid[..states.len()].to_vec(),
        states,
        stats,
    })
}

/// Integrates from `(t0, y0)` and hands each grid sample to `observer`
/// instead of storing it. The observer may stop the run early.
pub fn integrate_with<F, O>(
    mut rhs: F,
    y0: &[Complex64],
    t0: f64,
    grid: &[f64],
    config: &IntegratorConfig,
    mut observer: O,
) -> IResult<IntegrationStats>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    O: FnMut(usize, f64, &[Complex64]) -> ControlFlow<()>,
{
    config.validate()?;
    if grid.is_empty() {
        return Ok(IntegrationStats::default());
    }
    if grid[0] < t0 {
        return Err(IntegrateError::Grid(format!("first output time {} precedes t0 = {t0}", grid[0])));
    }
    if let Some(w) = grid.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(IntegrateError::Grid(format!("times not strictly increasing at {}", w[1])));
    }
    if let Some(slot) = first_non_finite(y0) {
        return Err(IntegrateError::NonFinite { slot, t: t0 });
    }
    match config.method {
        Method::Rk4Fixed => rk4_fixed(&mut rhs, y0, t0, grid, config, &mut observer),
        Method::Rk45Adaptive => dopri5(&mut rhs, y0, t0, grid, config, &mut observer),
    }
}

fn rk4_fixed<F, O>(rhs: &mut F, y0: &[Complex64], t0: f64, grid: &[f64], cfg: &IntegratorConfig, observer: &mut O) -> IResult<IntegrationStats>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    O: FnMut(usize, f64, &[Complex64]) -> ControlFlow<()>,
{
    let mut stats = IntegrationStats::default();
    let mut ws = Rk4Workspace::new(y0.len());
    let mut y = y0.to_vec();
    let mut t = t0;
    for (idx, &target) in grid.iter().enumerate() {
        let span = target - t;
        if span > 0.0 {
            // equal substeps no longer than h_init that land on the target
            let n = (span / cfg.h_init * (1.0 - 1e-12)).ceil().max(1.0) as u64;
            let h = span / n as f64;
            for k in 0..n {
                if stats.steps >= cfg.max_steps {
                    return Err(IntegrateError::MaxSteps { max_steps: cfg.max_steps, t });
                }
                let tk = t + k as f64 * h;
                ws.step(rhs, &mut y, tk, h, false)?;
                stats.record_step(h);
                stats.rhs_evals += 4;
            }
            t = target;
        }
        if observer(idx, target, &y).is_break() {
            stats.stopped_early = idx + 1 < grid.len();
            break;
        }
    }
    Ok(stats)
}

mod tableau {
    pub const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    pub const A2: [f64; 1] = [0.2];
    pub const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
    pub const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
    pub const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
    pub const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
    /// Fifth-order weights (k2 and k7 have weight zero).
    pub const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    /// Difference between fifth- and fourth-order weights.
    pub const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    /// Continuous extension.
    pub const D: [f64; 7] = [
        -12715105075.0 / 11282082432.0,
        0.0,
        87487479700.0 / 32700410799.0,
        -10690763975.0 / 1880347072.0,
        701980252875.0 / 199316789632.0,
        -1453857185.0 / 822651844.0,
        69997945.0 / 29380423.0,
    ];
}

/// `out = y + Σ c_j k_j`.
fn lincomb<const M: usize>(out: &mut [Complex64], y: &[Complex64], ks: [&[Complex64]; M], c: [f64; M]) {
    let n = out.len();
    let y = &y[..n];
    let ks = ks.map(|k| &k[..n]);
    for i in 0..n {
        let mut acc = y[i];
        for j in 0..M {
            acc += ks[j][i] * c[j];
        }
        out[i] = acc;
    }
}

fn dopri5<F, O>(rhs: &mut F, y0: &[Complex64], t0: f64, grid: &[f64], cfg: &IntegratorConfig, observer: &mut O) -> IResult<IntegrationStats>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    O: FnMut(usize, f64, &[Complex64]) -> ControlFlow<()>,
{
    use tableau::*;

    let n = y0.len();
    let zero = Complex64::default();
    let [mut k1, mut k2, mut k3, mut k4, mut k5, mut k6, mut k7]: [Vec<Complex64>; 7] =
        std::array::from_fn(|_| vec![zero; n]);
    let mut y = y0.to_vec();
    let mut y_new = vec![zero; n];
    let mut stage = vec![zero; n];
    let mut sample = vec![zero; n];
    let mut stats = IntegrationStats::default();

    let mut next = 0;
    // grid points at t0 are emitted before any stepping
    while next < grid.len() && grid[next] == t0 {
        if observer(next, t0, &y).is_break() {
            stats.stopped_early = next + 1 < grid.len();
            return Ok(stats);
        }
        next += 1;
    }
    if next == grid.len() {
        return Ok(stats);
    }
    let t_final = *grid.last().unwrap();

    let mut t = t0;
    let mut h = cfg.h_init.min(cfg.h_max);
    let mut last_rejected = false;
    let mut err_prev = 1e-4_f64;
    rhs(t, &y, &mut k1);
    stats.rhs_evals += 1;
    if let Some(slot) = first_non_finite(&k1) {
        return Err(IntegrateError::NonFinite { slot, t });
    }

    while next < grid.len() {
        if stats.steps + stats.rejected >= cfg.max_steps {
            return Err(IntegrateError::MaxSteps { max_steps: cfg.max_steps, t });
        }
        // never overshoot the final time by more than rounding
        if t + h > t_final {
            h = t_final - t;
        } else if h < cfg.h_min || t + h == t {
            return Err(IntegrateError::StepUnderflow { t, h, h_min: cfg.h_min });
        }

        lincomb(&mut stage, &y, [&k1], [h * A2[0]]);
        rhs(t + C[1] * h, &stage, &mut k2);
        lincomb(&mut stage, &y, [&k1, &k2], A3.map(|a| h * a));
        rhs(t + C[2] * h, &stage, &mut k3);
        lincomb(&mut stage, &y, [&k1, &k2, &k3], A4.map(|a| h * a));
        rhs(t + C[3] * h, &stage, &mut k4);
        lincomb(&mut stage, &y, [&k1, &k2, &k3, &k4], A5.map(|a| h * a));
        rhs(t + C[4] * h, &stage, &mut k5);
        lincomb(&mut stage, &y, [&k1, &k2, &k3, &k4, &k5], A6.map(|a| h * a));
        rhs(t + C[5] * h, &stage, &mut k6);
        lincomb(&mut y_new, &y, [&k1, &k3, &k4, &k5, &k6], [0, 2, 3, 4, 5].map(|j| h * B[j]));
        rhs(t + h, &y_new, &mut k7);
        stats.rhs_evals += 6;

        let e = [0, 2, 3, 4, 5, 6].map(|j| h * E[j]);
        let mut err = 0.0_f64;
        let mut finite = true;
        {
            let ks = [&k1[..n], &k3[..n], &k4[..n], &k5[..n], &k6[..n], &k7[..n]];
            let (yv, yn) = (&y[..n], &y_new[..n]);
            for i in 0..n {
                let mut d = Complex64::default();
                for j in 0..6 {
                    d += ks[j][i] * e[j];
                }
                let sr = cfg.atol + cfg.rtol * yv[i].re.abs().max(yn[i].re.abs());
                let si = cfg.atol + cfg.rtol * yv[i].im.abs().max(yn[i].im.abs());
                let x = (d.re / sr).abs().max((d.im / si).abs());
                finite &= x.is_finite() && yn[i].re.is_finite() && yn[i].im.is_finite();
                err = err.max(x);
            }
        }
        // overflow inside a trial step is treated as a rejection
        if !finite {
            err = f64::INFINITY;
        }

        if err <= 1.0 {
            let t_new = t + h;
            stats.record_step(h);
            // emit every grid point inside (t, t_new]
            while next < grid.len() && grid[next] <= t_new * (1.0 + 1e-15) {
                let target = grid[next];
                let out: &[Complex64] = if target >= t_new {
                    &y_new
                } else {
                    let theta = (target - t) / h;
                    let theta1 = 1.0 - theta;
                    let dd = [0, 2, 3, 4, 5, 6].map(|j| h * D[j]);
                    let ks = [&k1[..n], &k3[..n], &k4[..n], &k5[..n], &k6[..n], &k7[..n]];
                    let (yv, yn) = (&y[..n], &y_new[..n]);
                    for i in 0..n {
                        let dy = yn[i] - yv[i];
                        let bspl = ks[0][i] * h - dy;
                        let r4 = dy - ks[5][i] * h - bspl;
                        let mut r5 = Complex64::default();
                        for j in 0..6 {
                            r5 += ks[j][i] * dd[j];
                        }
                        sample[i] = yv[i] + (dy + (bspl + (r4 + r5 * theta1) * theta) * theta1) * theta;
                    }
                    &sample
                };
                if observer(next, target, out).is_break() {
                    stats.stopped_early = next + 1 < grid.len();
                    return Ok(stats);
                }
                next += 1;
            }
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            // PI control with Hairer's β = 0.04
            let e = err.max(1e-10);
            let fac = (0.9 * e.powf(-0.17) * err_prev.powf(0.04)).clamp(0.2, 5.0);
            err_prev = e.max(1e-4);
            let fac = if last_rejected { fac.min(1.0) } else { fac };
            h = (h * fac).min(cfg.h_max);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h *= if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 };
            if h < cfg.h_min {
                return Err(IntegrateError::StepUnderflow { t, h, h_min: cfg.h_min });
            }
        }
    }
    Ok(stats)
}
