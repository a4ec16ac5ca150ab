//! Closed moment hierarchies for the dot inversion and the phonon mode.
//!
//! Every scheme tracks `<Sz>`, `<b†b>`, `<Sz b>`, `<b>` and the conjugates
//! `<Sz b†>`, `<b†>` as separate slots. The conjugate slots are integrated
//! independently of their partners, so their mismatch measures integration
//! quality.

use std::ops::ControlFlow;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::superradiance_scales;
use crate::error::{Error, Result};
use crate::integrate::{integrate_with, IntegratorConfig};
use crate::system::{validate, ClosureScheme, SystemParams};
use crate::trajectory::{uniform_grid, ObservableRecord, Trajectory, SPSM, SPSM_B};

type C = Complex64;

const I: C = C::new(0.0, 1.0);

/// Slot layout shared by [`ClosureScheme::Exact1`] and the mean-field schemes.
pub mod slot6 {
    pub const SZ: usize = 0;
    pub const BDB: usize = 1;
    pub const SZB: usize = 2;
    pub const SZB_DAG: usize = 3;
    pub const B: usize = 4;
    pub const B_DAG: usize = 5;
    pub const LEN: usize = 6;
}

/// Slot layout of [`ClosureScheme::Exact2`].
pub mod slot9 {
    pub const SZ: usize = 0;
    pub const SPSM: usize = 1;
    pub const BDB: usize = 2;
    pub const SZB: usize = 3;
    pub const SPSMB: usize = 4;
    pub const B: usize = 5;
    pub const SZB_DAG: usize = 6;
    pub const SPSMB_DAG: usize = 7;
    pub const B_DAG: usize = 8;
    pub const LEN: usize = 9;
}

/// Tracked expectation values of one closure scheme in its fixed slot order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub scheme: ClosureScheme,
    pub values: Vec<Complex64>,
}

impl MomentState {
    pub fn len_for(scheme: ClosureScheme) -> usize {
        match scheme {
            ClosureScheme::Exact2 => slot9::LEN,
            _ => slot6::LEN,
        }
    }

    /// All dots excited, phonon mode thermal, every mixed correlator zero.
    pub fn initial(params: &SystemParams, scheme: ClosureScheme) -> Self {
        let mut values = vec![C::default(); Self::len_for(scheme)];
        match scheme {
            ClosureScheme::Exact2 => {
                values[slot9::SZ] = C::new(1.0, 0.0);
                values[slot9::SPSM] = C::new(2.0, 0.0);
                values[slot9::BDB] = C::new(params.nbar, 0.0);
            }
            _ => {
                values[slot6::SZ] = C::new(params.j(), 0.0);
                values[slot6::BDB] = C::new(params.nbar, 0.0);
            }
        }
        MomentState { scheme, values }
    }

    fn slots(&self) -> Slots {
        Slots::of(self.scheme)
    }

    pub fn sz(&self) -> Complex64 {
        self.values[self.slots().sz]
    }

    pub fn phonons(&self) -> Complex64 {
        self.values[self.slots().bdb]
    }

    pub fn b(&self) -> Complex64 {
        self.values[self.slots().b]
    }

    pub fn b_dag(&self) -> Complex64 {
        self.values[self.slots().b_dag]
    }

    pub fn szb(&self) -> Complex64 {
        self.values[self.slots().szb]
    }

    pub fn szb_dag(&self) -> Complex64 {
        self.values[self.slots().szb_dag]
    }

    /// Largest mismatch over all conjugate pairs.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let v = &self.values;
        let pairs: &[(usize, usize)] = match self.scheme {
            ClosureScheme::Exact2 => &[
                (slot9::SZB, slot9::SZB_DAG),
                (slot9::SPSMB, slot9::SPSMB_DAG),
                (slot9::B, slot9::B_DAG),
            ],
            _ => &[(slot6::SZB, slot6::SZB_DAG), (slot6::B, slot6::B_DAG)],
        };
        pairs
            .iter()
            .map(|&(a, b)| (v[b] - v[a].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Largest imaginary part among the slots that must stay real.
    pub fn imaginary_residual(&self) -> f64 {
        let s = self.slots();
        let mut r = self.values[s.sz].im.abs().max(self.values[s.bdb].im.abs());
        if self.scheme == ClosureScheme::Exact2 {
            r = r.max(self.values[slot9::SPSM].im.abs());
        }
        r
    }
}

#[derive(Clone, Copy)]
struct Slots {
    sz: usize,
    bdb: usize,
    szb: usize,
    szb_dag: usize,
    b: usize,
    b_dag: usize,
}

impl Slots {
    fn of(scheme: ClosureScheme) -> Slots {
        match scheme {
            ClosureScheme::Exact2 => Slots {
                sz: slot9::SZ,
                bdb: slot9::BDB,
                szb: slot9::SZB,
                szb_dag: slot9::SZB_DAG,
                b: slot9::B,
                b_dag: slot9::B_DAG,
            },
            _ => Slots {
                sz: slot6::SZ,
                bdb: slot6::BDB,
                szb: slot6::SZB,
                szb_dag: slot6::SZB_DAG,
                b: slot6::B,
                b_dag: slot6::B_DAG,
            },
        }
    }
}

fn phonon_rate(p: &SystemParams, j: f64, szb: C, szb_dag: C, b: C, b_dag: C, bdb: C) -> C {
    I * p.eta * (szb - szb_dag + (b - b_dag) * j) - 2.0 * p.kappa * bdb + 2.0 * p.kappa * p.nbar
}

fn derive_exact1(p: &SystemParams, y: &[C], dy: &mut [C]) {
    use slot6::*;
    let (g, k, w, eta) = (p.gamma, p.kappa, p.omega, p.eta);
    let sz = y[SZ];
    dy[SZ] = -2.0 * g * (sz + 0.5);
    dy[BDB] = phonon_rate(p, 0.5, y[SZB], y[SZB_DAG], y[B], y[B_DAG], y[BDB]);
    // <Sz^2 X> = <X>/4 and 2γ j(j+1) = 3γ/2
    let src = eta * (0.25 + 0.5 * sz);
    dy[SZB] = -C::new(k + 2.0 * g, w) * y[SZB] - g * y[B] - I * src;
    dy[SZB_DAG] = -C::new(k + 2.0 * g, -w) * y[SZB_DAG] - g * y[B_DAG] + I * src;
    let drive = eta * (sz + 0.5);
    dy[B] = -C::new(k, w) * y[B] - I * drive;
    dy[B_DAG] = -C::new(k, -w) * y[B_DAG] + I * drive;
}

fn derive_exact2(p: &SystemParams, y: &[C], dy: &mut [C]) {
    use slot9::*;
    let (g, k, w, eta) = (p.gamma, p.kappa, p.omega, p.eta);
    let (sz, spsm) = (y[SZ], y[SPSM]);
    dy[SZ] = -2.0 * g * spsm;
    dy[SPSM] = 8.0 * g * (1.0 + sz - spsm);
    dy[BDB] = phonon_rate(p, 1.0, y[SZB], y[SZB_DAG], y[B], y[B_DAG], y[BDB]);
    let src = eta * (2.0 + 2.0 * sz - spsm);
    dy[SZB] = -C::new(k, w) * y[SZB] - 2.0 * g * y[SPSMB] - I * src;
    dy[SZB_DAG] = -C::new(k, -w) * y[SZB_DAG] - 2.0 * g * y[SPSMB_DAG] + I * src;
    let drive = eta * (1.0 + sz);
    dy[SPSMB] = -C::new(k + 8.0 * g, w) * y[SPSMB] - 2.0 * I * drive + 8.0 * g * (y[B] + y[SZB]);
    dy[SPSMB_DAG] = -C::new(k + 8.0 * g, -w) * y[SPSMB_DAG] + 2.0 * I * drive + 8.0 * g * (y[B_DAG] + y[SZB_DAG]);
    dy[B] = -C::new(k, w) * y[B] - I * drive;
    dy[B_DAG] = -C::new(k, -w) * y[B_DAG] + I * drive;
}

fn derive_meanfield(p: &SystemParams, variant_a: bool, y: &[C], dy: &mut [C]) {
    use slot6::*;
    let (g, k, w, eta) = (p.gamma, p.kappa, p.omega, p.eta);
    let j = p.j();
    let jj1 = j * (j + 1.0);
    let sz = y[SZ];
    let sz2 = sz * sz;
    dy[SZ] = -2.0 * g * (sz - sz2 + jj1);
    dy[BDB] = phonon_rate(p, j, y[SZB], y[SZB_DAG], y[B], y[B_DAG], y[BDB]);
    let (sz2b, sz2b_dag) = if variant_a {
        (sz * y[SZB], sz * y[SZB_DAG])
    } else {
        (sz2 * y[B], sz2 * y[B_DAG])
    };
    let src = eta * (sz2 + j * sz);
    dy[SZB] = -C::new(k + 2.0 * g, w) * y[SZB] + 2.0 * g * sz2b - I * src - 2.0 * g * jj1 * y[B];
    dy[SZB_DAG] = -C::new(k + 2.0 * g, -w) * y[SZB_DAG] + 2.0 * g * sz2b_dag + I * src - 2.0 * g * jj1 * y[B_DAG];
    let drive = eta * (sz + j);
    dy[B] = -C::new(k, w) * y[B] - I * drive;
    dy[B_DAG] = -C::new(k, -w) * y[B_DAG] + I * drive;
}

fn derive(p: &SystemParams, scheme: ClosureScheme, y: &[C], dy: &mut [C]) {
    match scheme {
        ClosureScheme::Exact1 => derive_exact1(p, y, dy),
        ClosureScheme::Exact2 => derive_exact2(p, y, dy),
        ClosureScheme::MeanFieldA => derive_meanfield(p, true, y, dy),
        ClosureScheme::MeanFieldB => derive_meanfield(p, false, y, dy),
    }
}

fn checked_rhs(state: &MomentState, params: &SystemParams, expected: &[ClosureScheme]) -> Result<MomentState> {
    if !expected.contains(&state.scheme) {
        let names: Vec<_> = expected.iter().map(|s| s.name()).collect();
        return Err(Error::InvalidArgument(format!(
            "state has scheme {}, expected {}",
            state.scheme,
            names.join(" or ")
        )));
    }
    state.scheme.check(params.n_dots)?;
    let len = MomentState::len_for(state.scheme);
    if state.values.len() != len {
        return Err(Error::InvalidArgument(format!(
            "{} state needs {len} slots, got {}",
            state.scheme,
            state.values.len()
        )));
    }
    let mut values = vec![C::default(); len];
    derive(params, state.scheme, &state.values, &mut values);
    Ok(MomentState {
        scheme: state.scheme,
        values,
    })
}

/// Time derivative of the single-dot system, closed by `Sz^2 = 1/4`.
pub fn rhs_exact1(state: &MomentState, params: &SystemParams) -> Result<MomentState> {
    checked_rhs(state, params, &[ClosureScheme::Exact1])
}

/// Time derivative of the two-dot system on the symmetric subspace.
pub fn rhs_exact2(state: &MomentState, params: &SystemParams) -> Result<MomentState> {
    checked_rhs(state, params, &[ClosureScheme::Exact2])
}

/// Time derivative under the mean-field factorization selected by
/// `state.scheme`.
pub fn rhs_meanfield(state: &MomentState, params: &SystemParams) -> Result<MomentState> {
    checked_rhs(state, params, &[ClosureScheme::MeanFieldA, ClosureScheme::MeanFieldB])
}

/// `4/γ` for one or two dots; for mean-field runs `12 t0`, extended to
/// `6/κ` when the phonon mode relaxes more slowly than the pulse.
pub fn default_t_end(params: &SystemParams, scheme: ClosureScheme) -> f64 {
    if scheme.is_mean_field() {
        let s = superradiance_scales(params.n_dots, params.gamma);
        (12.0 * s.t0).max(6.0 / params.kappa)
    } else {
        4.0 / params.gamma
    }
}

/// `min(0.002, τ_R/10)`.
pub fn default_dt_out(params: &SystemParams) -> f64 {
    let s = superradiance_scales(params.n_dots, params.gamma);
    (0.002 / params.gamma).min(s.tau_r / 10.0)
}

/// Integrates the chosen closure from the fully excited initial state and
/// samples it on `0, dt_out, ..., t_end`.
pub fn simulate(
    params: &SystemParams,
    scheme: ClosureScheme,
    t_end: f64,
    dt_out: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    let params = validate(*params)?;
    scheme.check(params.n_dots)?;
    if !(t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("t_end must be > 0, got {t_end}")));
    }
    let grid = uniform_grid(t_end, dt_out)?;
    let y0 = MomentState::initial(&params, scheme);
    let slots = Slots::of(scheme);

    let mut traj = Trajectory::new(params, format!("moments/{}", scheme.name()));
    traj.records.reserve(grid.len());
    let mut dy = vec![C::default(); y0.values.len()];
    let mut conj_max = 0.0_f64;
    let mut imag_max = 0.0_f64;
    let mut first_negative = None;

    let stats = integrate_with(
        |_, y, out| derive(&params, scheme, y, out),
        &y0.values,
        0.0,
        &grid,
        config,
        |_, t, y| {
            derive(&params, scheme, y, &mut dy);
            let state = MomentState {
                scheme,
                values: y.to_vec(),
            };
            conj_max = conj_max.max(state.conjugate_asymmetry());
            imag_max = imag_max.max(state.imaginary_residual());
            let mut rec = ObservableRecord::new(t, y[slots.sz].re);
            let n = y[slots.bdb].re;
            if n < 0.0 && first_negative.is_none() {
                first_negative = Some(t);
            }
            rec.phonons = Some(n);
            rec.intensity = Some(-dy[slots.sz].re);
            rec.b_mean = Some(y[slots.b]);
            rec.szb = Some(y[slots.szb]);
            if scheme == ClosureScheme::Exact2 {
                rec.extra.insert(SPSM.to_string(), y[slot9::SPSM]);
                rec.extra.insert(SPSM_B.to_string(), y[slot9::SPSMB]);
            }
            traj.records.push(rec);
            ControlFlow::Continue(())
        },
    )?;

    traj.diagnostics.insert("conjugate_asymmetry_max".into(), conj_max);
    traj.diagnostics.insert("imaginary_residual_max".into(), imag_max);
    traj.diagnostics.insert("steps".into(), stats.steps as f64);
    traj.diagnostics.insert("rejected_steps".into(), stats.rejected as f64);
    traj.diagnostics.insert("rhs_evals".into(), stats.rhs_evals as f64);
    if let Some(t) = first_negative {
        traj.warn(format!("closure produced <b†b> < 0 (first at t = {t})"));
    }
    if scheme.is_mean_field() && params.n_dots < 10 {
        traj.warn("mean-field closure at small N is diagnostic only");
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn figure2(n: u32) -> SystemParams {
        SystemParams::new(n, 15.0, 5.0, 0.5, 10.0)
    }

    fn figure4(kappa: f64) -> SystemParams {
        SystemParams::new(200, 50.0, 5.0, kappa, 10.0)
    }

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn exact1_initial_derivatives() {
        let p = figure2(1);
        let d = rhs_exact1(&MomentState::initial(&p, ClosureScheme::Exact1), &p).unwrap();
        assert_eq!(d.values[slot6::SZ], c(-2.0, 0.0));
        assert_eq!(d.values[slot6::BDB], c(0.0, 0.0));
        assert_eq!(d.values[slot6::B], c(0.0, -5.0));
        assert_eq!(d.values[slot6::B_DAG], c(0.0, 5.0));
    }

    #[test]
    fn exact2_initial_derivatives() {
        let p = figure2(2);
        let d = rhs_exact2(&MomentState::initial(&p, ClosureScheme::Exact2), &p).unwrap();
        assert_eq!(d.values[slot9::SZ], c(-4.0, 0.0));
        assert_eq!(d.values[slot9::SPSM], c(0.0, 0.0));
        assert_eq!(d.values[slot9::SZB], c(0.0, -10.0));
    }

    #[test]
    fn meanfield_initial_inversion_rate() {
        for n in [2, 7, 200] {
            let p = figure4(20.0).with_n_dots(n);
            for s in [ClosureScheme::MeanFieldA, ClosureScheme::MeanFieldB] {
                let d = rhs_meanfield(&MomentState::initial(&p, s), &p).unwrap();
                assert_abs_diff_eq!(d.values[slot6::SZ].re, -4.0 * p.j(), epsilon = 1e-9 * p.j());
            }
        }
    }

    #[test]
    fn rhs_rejects_mismatched_scheme() {
        let p = figure2(3);
        let s = MomentState::initial(&p, ClosureScheme::Exact2);
        assert_eq!(
            rhs_exact2(&s, &p).unwrap_err().to_string(),
            "exact2 requires n_dots = 2, got 3"
        );
        assert!(rhs_exact1(&s, &figure2(1)).is_err());
        assert!(rhs_meanfield(&MomentState::initial(&p, ClosureScheme::Exact1), &p).is_err());
    }

    /// The general hierarchy with `<Sz^2>` and `<Sz^2 b>` supplied from
    /// outside.
    fn general(p: &SystemParams, sz: C, szb: C, b: C, sz2: C, sz2b: C) -> (C, C, C) {
        let j = p.j();
        let dsz = -2.0 * p.gamma * (sz - sz2 + j * (j + 1.0));
        let dszb = -(p.kappa + 2.0 * p.gamma + I * p.omega) * szb + 2.0 * p.gamma * sz2b
            - I * p.eta * (sz2 + j * sz)
            - 2.0 * p.gamma * j * (j + 1.0) * b;
        let db = -(p.kappa + I * p.omega) * b - I * p.eta * (sz + j);
        (dsz, dszb, db)
    }

    fn arb_c() -> impl Strategy<Value = C> {
        (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| C::new(a, b))
    }

    proptest! {
        #[test]
        fn exact2_agrees_with_general_hierarchy(
            sz in -1.0..1.0f64, spsm in 0.0..2.0f64, bdb in 0.0..20.0f64,
            szb in arb_c(), spsmb in arb_c(), b in arb_c(),
            eta in 0.0..10.0f64, kappa in 0.1..20.0f64, omega in 0.1..50.0f64,
        ) {
            let p = SystemParams::new(2, omega, eta, kappa, 3.0);
            let sz = C::new(sz, 0.0);
            let spsm = C::new(spsm, 0.0);
            let values = vec![sz, spsm, C::new(bdb, 0.0), szb, spsmb, b, szb.conj(), spsmb.conj(), b.conj()];
            let d = rhs_exact2(&MomentState { scheme: ClosureScheme::Exact2, values }, &p).unwrap();
            // symmetric subspace of two dots: Sz^2 = Sz - S+S- + 2
            let (dsz, dszb, db) = general(&p, sz, szb, b, sz - spsm + 2.0, szb - spsmb + 2.0 * b);
            let tol = 1e-10 * (1.0 + omega + eta + kappa) * 10.0;
            prop_assert!((d.values[slot9::SZ] - dsz).norm() < tol);
            prop_assert!((d.values[slot9::SZB] - dszb).norm() < tol);
            prop_assert!((d.values[slot9::B] - db).norm() < tol);
            prop_assert!((d.values[slot9::SZB_DAG] - dszb.conj()).norm() < tol);
        }

        #[test]
        fn exact1_agrees_with_general_hierarchy(
            sz in -0.5..0.5f64, szb in arb_c(), b in arb_c(),
            eta in 0.0..10.0f64, kappa in 0.1..20.0f64, omega in 0.1..50.0f64,
        ) {
            let p = SystemParams::new(1, omega, eta, kappa, 1.0);
            let sz = C::new(sz, 0.0);
            let values = vec![sz, C::new(1.0, 0.0), szb, szb.conj(), b, b.conj()];
            let d = rhs_exact1(&MomentState { scheme: ClosureScheme::Exact1, values }, &p).unwrap();
            let (dsz, dszb, db) = general(&p, sz, szb, b, C::new(0.25, 0.0), 0.25 * b);
            prop_assert!((d.values[slot6::SZ] - dsz).norm() < 1e-9);
            prop_assert!((d.values[slot6::SZB] - dszb).norm() < 1e-9);
            prop_assert!((d.values[slot6::B] - db).norm() < 1e-9);
        }
    }

    #[test]
    fn exact1_inversion_and_phonons_follow_closed_forms() {
        let p = figure2(1);
        let traj = simulate(&p, ClosureScheme::Exact1, 4.0, 0.01, &IntegratorConfig::default()).unwrap();
        for r in &traj.records {
            assert_abs_diff_eq!(r.sz, analytic::single_dot_inversion(r.t, 1.0), epsilon = 1e-8);
            let n = analytic::single_dot_phonons(r.t, &p).unwrap();
            assert_abs_diff_eq!(r.phonons.unwrap(), n, epsilon = 1e-6);
            assert_abs_diff_eq!(r.intensity.unwrap(), 2.0 * (-2.0 * r.t).exp(), epsilon = 1e-8);
        }
        assert!(traj.diagnostics["conjugate_asymmetry_max"] < 1e-8);
        assert!(traj.diagnostics["imaginary_residual_max"] < 1e-8);
    }

    #[test]
    fn phonons_at_t_point_one() {
        let p = figure2(1);
        let traj = simulate(&p, ClosureScheme::Exact1, 0.1, 0.1, &IntegratorConfig::default()).unwrap();
        let last = traj.records.last().unwrap();
        assert_abs_diff_eq!(last.t, 0.1);
        assert_abs_diff_eq!(
            last.phonons.unwrap(),
            analytic::single_dot_phonons(0.1, &p).unwrap(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn adaptive_matches_fixed_step() {
        let p = figure2(1);
        let a = simulate(&p, ClosureScheme::Exact1, 4.0, 0.01, &IntegratorConfig::default()).unwrap();
        let f = simulate(&p, ClosureScheme::Exact1, 4.0, 0.01, &IntegratorConfig::rk4(1e-4)).unwrap();
        for (x, y) in a.records.iter().zip(&f.records) {
            assert_abs_diff_eq!(x.sz, y.sz, epsilon = 1e-7);
            assert_abs_diff_eq!(x.phonons.unwrap(), y.phonons.unwrap(), epsilon = 1e-7);
            assert_abs_diff_eq!((x.b_mean.unwrap() - y.b_mean.unwrap()).norm(), 0.0, epsilon = 1e-7);
            assert_abs_diff_eq!((x.szb.unwrap() - y.szb.unwrap()).norm(), 0.0, epsilon = 1e-7);
        }
    }

    fn peak(traj: &Trajectory) -> f64 {
        traj.pulse_stats().peak_phonons.unwrap()
    }

    #[test]
    fn two_dots_enhance_phonons() {
        let cfg = IntegratorConfig::default();
        let one = simulate(&figure2(1), ClosureScheme::Exact1, 10.0, 0.01, &cfg).unwrap();
        let two = simulate(&figure2(2), ClosureScheme::Exact2, 10.0, 0.01, &cfg).unwrap();
        assert!(peak(&two) > peak(&one), "{} vs {}", peak(&two), peak(&one));
        for t in [&one, &two] {
            let last = t.records.last().unwrap();
            assert!((last.phonons.unwrap() - 10.0).abs() < 0.1);
            assert!(t.diagnostics["conjugate_asymmetry_max"] < 1e-8);
        }
        let last = two.records.last().unwrap();
        assert_abs_diff_eq!(last.sz, -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(last.spsm().unwrap().re, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn inversion_is_bounded_by_j() {
        let cfg = IntegratorConfig::default();
        for (p, s) in [
            (figure2(1), ClosureScheme::Exact1),
            (figure2(2), ClosureScheme::Exact2),
            (figure4(5.0), ClosureScheme::MeanFieldA),
        ] {
            let traj = simulate(&p, s, 1.0, 0.001, &cfg).unwrap();
            let j = p.j();
            assert!(traj.sz().iter().all(|&v| v >= -j - 1e-8 && v <= j + 1e-8), "{s}");
        }
    }

    #[test]
    fn inversion_ignores_phonon_coupling_bit_for_bit() {
        let cfg = IntegratorConfig::rk4(1e-4);
        for (p, s) in [
            (figure2(1), ClosureScheme::Exact1),
            (figure2(2), ClosureScheme::Exact2),
            (figure4(5.0), ClosureScheme::MeanFieldA),
            (figure4(5.0), ClosureScheme::MeanFieldB),
        ] {
            let a = simulate(&p, s, 0.5, 0.01, &cfg).unwrap();
            let b = simulate(&p.with_eta(0.0), s, 0.5, 0.01, &cfg).unwrap();
            assert_eq!(a.sz(), b.sz(), "{s}");
            assert!(b.phonons().unwrap().iter().all(|&n| n == 10.0));
        }
    }

    #[test]
    fn meanfield_relaxes_to_thermal_and_ground() {
        let p = figure4(20.0);
        let traj = simulate(&p, ClosureScheme::MeanFieldA, 5.0, 0.001, &IntegratorConfig::default()).unwrap();
        let last = traj.records.last().unwrap();
        assert!((last.phonons.unwrap() - 10.0).abs() < 0.1);
        assert_abs_diff_eq!(last.sz, -100.0, epsilon = 1e-6);
        assert!(last.b_mean.unwrap().norm() < 1e-6);
        assert!(last.szb.unwrap().norm() < 1e-4);
    }

    #[test]
    fn meanfield_variants_agree() {
        let p = figure4(1.0);
        let cfg = IntegratorConfig::default();
        let a = simulate(&p, ClosureScheme::MeanFieldA, 3.0, 0.001, &cfg).unwrap();
        let b = simulate(&p, ClosureScheme::MeanFieldB, 3.0, 0.001, &cfg).unwrap();
        let rel = (peak(&a) - peak(&b)).abs() / peak(&a);
        assert!(rel < 0.01, "{rel}");
    }

    #[test]
    fn meanfield_damping_ordering() {
        let cfg = IntegratorConfig::default();
        let peaks: Vec<f64> = [1.0, 5.0, 20.0]
            .iter()
            .map(|&k| peak(&simulate(&figure4(k), ClosureScheme::MeanFieldA, 4.0, 0.001, &cfg).unwrap()))
            .collect();
        assert!(peaks[0] > peaks[1] && peaks[1] > peaks[2], "{peaks:?}");
    }

    #[test]
    fn meanfield_inversion_tracks_logistic_law() {
        let p = figure4(5.0);
        let traj = simulate(&p, ClosureScheme::MeanFieldB, 0.1, 0.0002, &IntegratorConfig::default()).unwrap();
        for r in &traj.records {
            let exact = analytic::mean_field_inversion(r.t, 200, 1.0);
            assert_abs_diff_eq!(r.sz, exact, epsilon = 1e-9 * 100.0 * 50.0);
        }
    }

    #[test]
    fn meanfield_residual_against_tanh_law_shrinks_like_one_over_n() {
        let cfg = IntegratorConfig::default();
        let mut scaled = Vec::new();
        for n in [50u32, 100, 200, 400] {
            let p = figure4(5.0).with_n_dots(n);
            let s = superradiance_scales(n, 1.0);
            let traj = simulate(&p, ClosureScheme::MeanFieldA, 6.0 * s.t0, s.tau_r / 20.0, &cfg).unwrap();
            let j = p.j();
            let res = traj
                .records
                .iter()
                .map(|r| (r.sz - analytic::large_n_inversion(r.t, n, 1.0)).abs() / j)
                .fold(0.0, f64::max);
            scaled.push(res * n as f64);
        }
        for w in scaled.windows(2) {
            assert!((w[1] / w[0] - 1.0).abs() < 0.5, "{scaled:?}");
        }
        assert!(scaled.iter().all(|&c| (0.05..20.0).contains(&c)), "{scaled:?}");
    }

    #[test]
    fn conjugate_pairs_stay_conjugate() {
        let cfg = IntegratorConfig::default();
        let traj = simulate(&figure4(1.0), ClosureScheme::MeanFieldA, 2.0, 0.001, &cfg).unwrap();
        // slots reach O(100), so the bound is relative to that scale
        assert!(traj.diagnostics["conjugate_asymmetry_max"] < 10.0 * 1e-9 * 100.0);
    }

    #[test]
    fn simulate_rejects_bad_input() {
        let cfg = IntegratorConfig::default();
        assert!(simulate(&figure2(3), ClosureScheme::Exact2, 1.0, 0.01, &cfg).is_err());
        assert!(simulate(&figure2(1), ClosureScheme::Exact1, 0.0, 0.01, &cfg).is_err());
        assert!(simulate(&figure2(1).with_kappa(-1.0), ClosureScheme::Exact1, 1.0, 0.01, &cfg).is_err());
    }

    #[test]
    fn defaults() {
        assert_eq!(default_t_end(&figure2(1), ClosureScheme::Exact1), 4.0);
        assert_abs_diff_eq!(default_dt_out(&figure4(1.0)), 0.000_25, epsilon = 1e-18);
        assert_eq!(default_dt_out(&figure2(1)), 0.002);
        let s = superradiance_scales(200, 1.0);
        assert_eq!(default_t_end(&figure4(1.0), ClosureScheme::MeanFieldA), 6.0);
        assert_eq!(default_t_end(&figure4(1000.0), ClosureScheme::MeanFieldA), 12.0 * s.t0);
    }

    #[test]
    fn small_n_meanfield_is_flagged() {
        let p = figure2(2);
        let traj = simulate(&p, ClosureScheme::MeanFieldA, 1.0, 0.01, &IntegratorConfig::default()).unwrap();
        assert!(!traj.warnings.is_empty());
    }
}
