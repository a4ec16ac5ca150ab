//! Closed-form laws: single-dot inversion and phonon number, the large-N
//! superradiant inversion and intensity, and the characteristic times.
//!
//! These double as regression oracles for the moment-equation solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::SystemParams;
use crate::trajectory::{uniform_grid, ObservableRecord, Trajectory};

/// Coefficients of the single-dot phonon law
///
/// `<b†b>(t) = nbar + a e^{-2γt} - (a + b c) e^{-2κt}
///            + b e^{-(2γ+κ)t} (c cos ωt - d sin ωt)`
///
/// with `a = η²κ / ((κ-γ)(κ²+ω²))`, `b = 2η² / (c²+d²)`,
/// `c = 2γκ - κ² - ω²`, `d = 2γω`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleDotCoefficients {
    pub a_bar: f64,
    pub b_bar: f64,
    pub c_bar: f64,
    pub d_bar: f64,
}

impl SingleDotCoefficients {
    pub fn new(params: &SystemParams) -> Result<Self> {
        let SystemParams {
            omega: w,
            eta,
            kappa: k,
            gamma: g,
            ..
        } = *params;
        if (k - g).abs() <= 1e-12 * g {
            return Err(Error::Singular(
                "coefficient a_bar singular at kappa = gamma; use the moment-ODE solver".into(),
            ));
        }
        let c_bar = 2.0 * g * k - k * k - w * w;
        let d_bar = 2.0 * g * w;
        Ok(SingleDotCoefficients {
            a_bar: eta * eta * k / ((k - g) * (k * k + w * w)),
            b_bar: 2.0 * eta * eta / (c_bar * c_bar + d_bar * d_bar),
            c_bar,
            d_bar,
        })
    }
}

/// Characteristic superradiance time `τ_R = 1/(2γN)` and delay
/// `t0 = τ_R ln N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperradianceScales {
    pub tau_r: f64,
    pub t0: f64,
}

impl SuperradianceScales {
    pub fn new(n_dots: u32, gamma: f64) -> Self {
        let n = n_dots.max(1) as f64;
        let tau_r = 1.0 / (2.0 * gamma * n);
        SuperradianceScales {
            tau_r,
            t0: tau_r * n.ln(),
        }
    }
}

pub fn superradiance_scales(n_dots: u32, gamma: f64) -> SuperradianceScales {
    SuperradianceScales::new(n_dots, gamma)
}

/// `<Sz>(t) = -1/2 + e^{-2γt}` for one initially excited dot.
pub fn single_dot_inversion(t: f64, gamma: f64) -> f64 {
    -0.5 + (-2.0 * gamma * t).exp()
}

/// Mean phonon number of one initially excited dot on a thermal resonator.
pub fn single_dot_phonons(t: f64, params: &SystemParams) -> Result<f64> {
    if params.n_dots != 1 {
        return Err(Error::SchemeMismatch {
            scheme: "single-dot phonon law".into(),
            required: 1,
            actual: params.n_dots,
        });
    }
    let c = SingleDotCoefficients::new(params)?;
    Ok(single_dot_phonons_with(t, params, &c))
}

fn single_dot_phonons_with(t: f64, p: &SystemParams, c: &SingleDotCoefficients) -> f64 {
    let (g, k, w) = (p.gamma, p.kappa, p.omega);
    p.nbar + c.a_bar * (-2.0 * g * t).exp() - (c.a_bar + c.b_bar * c.c_bar) * (-2.0 * k * t).exp()
        + c.b_bar * (-(2.0 * g + k) * t).exp() * (c.c_bar * (w * t).cos() - c.d_bar * (w * t).sin())
}

/// Large-N inversion `-(N/2) tanh((t - t0) / (2τ_R))`.
pub fn large_n_inversion(t: f64, n_dots: u32, gamma: f64) -> f64 {
    let s = SuperradianceScales::new(n_dots, gamma);
    -0.5 * n_dots as f64 * ((t - s.t0) / (2.0 * s.tau_r)).tanh()
}

/// Exact time derivative of [`large_n_inversion`], negated:
/// `(γN²/2) sech²((t - t0) / (2τ_R))`.
pub fn large_n_intensity(t: f64, n_dots: u32, gamma: f64) -> f64 {
    let s = SuperradianceScales::new(n_dots, gamma);
    let sech = 1.0 / ((t - s.t0) / (2.0 * s.tau_r)).cosh();
    let n = n_dots as f64;
    0.5 * gamma * n * n * sech * sech
}

/// Exact solution of the closed mean-field inversion equation
/// `d<Sz>/dt = -2γ(<Sz> - <Sz>² + j(j+1))` from `<Sz>(0) = j`.
///
/// It is logistic with rate `2γ(N+1)` between the fixed points `j+1` and
/// `-j`; [`large_n_inversion`] approximates it to `O(1/N)`.
pub fn mean_field_inversion(t: f64, n_dots: u32, gamma: f64) -> f64 {
    let n = n_dots as f64;
    let j = 0.5 * n;
    // w = (Sz + j)/(j + 1 - Sz) decays as N e^{-2γ(N+1)t}
    let w = n * (-2.0 * gamma * (n + 1.0) * t).exp();
    ((j + 1.0) * w - j) / (1.0 + w)
}

/// Samples the closed-form laws on a uniform grid. For one dot the phonon
/// law is included when `with_phonons` is set; for `N ≥ 2` only the
/// inversion and intensity exist in closed form.
pub fn trajectory(params: &SystemParams, t_end: f64, dt_out: f64, with_phonons: bool) -> Result<Trajectory> {
    let params = params.validate()?;
    let single = params.n_dots == 1;
    if with_phonons && !single {
        return Err(Error::InvalidArgument(format!(
            "analytic phonon number requires n_dots = 1, got {}; only inversion and intensity are available",
            params.n_dots
        )));
    }
    let coeffs = if with_phonons {
        Some(SingleDotCoefficients::new(&params)?)
    } else {
        None
    };
    let g = params.gamma;
    let mut traj = Trajectory::new(params, if single { "analytic/single-dot" } else { "analytic/large-n" });
    for t in uniform_grid(t_end, dt_out)? {
        let mut rec = if single {
            let mut r = ObservableRecord::new(t, single_dot_inversion(t, g));
            r.intensity = Some(2.0 * g * (-2.0 * g * t).exp());
            r
        } else {
            let mut r = ObservableRecord::new(t, large_n_inversion(t, params.n_dots, g));
            r.intensity = Some(large_n_intensity(t, params.n_dots, g));
            r
        };
        if let Some(c) = &coeffs {
            rec.phonons = Some(single_dot_phonons_with(t, &params, c));
        }
        traj.records.push(rec);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn figure2() -> SystemParams {
        SystemParams::new(1, 15.0, 5.0, 0.5, 10.0)
    }

    #[test]
    fn inversion_values() {
        assert_eq!(single_dot_inversion(0.0, 1.0), 0.5);
        assert_abs_diff_eq!(single_dot_inversion(60.0, 1.0), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(single_dot_inversion(std::f64::consts::LN_2 / 2.0, 1.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn coefficient_signs() {
        let c = SingleDotCoefficients::new(&figure2()).unwrap();
        assert!(c.b_bar > 0.0 && c.d_bar > 0.0);
        assert_relative_eq!(c.c_bar, 1.0 - 0.25 - 225.0);
        assert_relative_eq!(c.d_bar, 30.0);
    }

    #[test]
    fn phonons_start_and_end_thermal() {
        let p = figure2();
        assert_abs_diff_eq!(single_dot_phonons(0.0, &p).unwrap(), 10.0, epsilon = 1e-14);
        assert_abs_diff_eq!(single_dot_phonons(100.0, &p).unwrap(), 10.0, epsilon = 1e-8);
    }

    #[test]
    fn phonons_reject_kappa_equal_gamma() {
        let err = single_dot_phonons(0.5, &figure2().with_kappa(1.0)).unwrap_err();
        assert!(err.to_string().contains("moment-ODE"), "{err}");
    }

    #[test]
    fn phonons_reject_many_dots() {
        assert!(single_dot_phonons(0.5, &figure2().with_n_dots(2)).is_err());
    }

    #[test]
    fn phonon_law_satisfies_its_rate_equation() {
        // d<b†b>/dt = -2η Im<S22 b> - 2κ(<b†b> - nbar) with
        // <S22 b> = -iη/(κ+iω) (e^{-2γt} - e^{-(κ+2γ+iω)t}); checked by
        // centered differences, independent of the coefficient algebra.
        let p = figure2();
        let (g, k, w, eta) = (p.gamma, p.kappa, p.omega, p.eta);
        let h = 1e-5;
        for i in 1..40 {
            let t = 0.1 * i as f64;
            let lhs = (single_dot_phonons(t + h, &p).unwrap() - single_dot_phonons(t - h, &p).unwrap()) / (2.0 * h);
            let z = num_complex::Complex64::new(-(2.0 * g * t), 0.0).exp()
                - num_complex::Complex64::new(-(k + 2.0 * g) * t, -w * t).exp();
            let s22b = num_complex::Complex64::new(0.0, -eta) / num_complex::Complex64::new(k, w) * z;
            let rhs = -2.0 * eta * s22b.im - 2.0 * k * (single_dot_phonons(t, &p).unwrap() - p.nbar);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-7);
        }
    }

    #[test]
    fn scales() {
        let s = superradiance_scales(200, 1.0);
        assert_relative_eq!(s.tau_r, 0.0025);
        let s = superradiance_scales(1, 1.0);
        assert_eq!((s.tau_r, s.t0), (0.5, 0.0));
        let s = superradiance_scales(2, 1.0);
        assert_relative_eq!(s.tau_r, 0.25);
        assert_abs_diff_eq!(s.t0, 0.173_286_795_139_986_3, epsilon = 1e-15);
    }

    #[test]
    fn large_n_inversion_values() {
        let s = superradiance_scales(200, 1.0);
        assert_abs_diff_eq!(large_n_inversion(s.t0, 200, 1.0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(s.t0, 200f64.ln() / 400.0);
        assert_abs_diff_eq!(s.t0, 0.013_246, epsilon = 5e-7);
        for n in [2u32, 7, 200, 1000] {
            let nf = n as f64;
            assert_relative_eq!(large_n_inversion(0.0, n, 1.0), 0.5 * nf * (nf - 1.0) / (nf + 1.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn large_n_intensity_peak() {
        let s = superradiance_scales(200, 1.0);
        let j = 100.0;
        assert_relative_eq!(large_n_intensity(s.t0, 200, 1.0) / (j * j), 2.0, epsilon = 1e-14);
        assert!(large_n_intensity(5.0, 200, 1.0) < 1e-300);
        let s4 = superradiance_scales(400, 1.0);
        let ratio = large_n_intensity(s4.t0, 400, 1.0) / large_n_intensity(s.t0, 200, 1.0);
        assert_relative_eq!(ratio, 4.0, epsilon = 1e-14);
    }

    #[test]
    fn large_n_intensity_is_negative_derivative() {
        let h = 1e-7;
        for n in [10u32, 200] {
            for i in 0..50 {
                let t = 0.001 * i as f64;
                let fd = -(large_n_inversion(t + h, n, 1.0) - large_n_inversion(t - h, n, 1.0)) / (2.0 * h);
                let exact = large_n_intensity(t, n, 1.0);
                assert_abs_diff_eq!(fd, exact, epsilon = 1e-6 * exact.max(1.0));
            }
        }
    }

    #[test]
    fn logistic_solution_obeys_closed_equation() {
        let (n, g) = (50u32, 1.0);
        let j = 25.0;
        assert_abs_diff_eq!(mean_field_inversion(0.0, n, g), j, epsilon = 1e-12);
        let h = 1e-7;
        for i in 0..40 {
            let t = 0.005 * i as f64;
            let u = mean_field_inversion(t, n, g);
            let du = (mean_field_inversion(t + h, n, g) - mean_field_inversion(t - h, n, g)) / (2.0 * h);
            assert_abs_diff_eq!(du, -2.0 * g * (u - u * u + j * (j + 1.0)), epsilon = 1e-4);
        }
        assert_abs_diff_eq!(mean_field_inversion(10.0, n, g), -j, epsilon = 1e-9);
    }

    #[test]
    fn trajectory_modes() {
        let t = trajectory(&figure2(), 1.0, 0.01, true).unwrap();
        assert_eq!(t.records.len(), 101);
        assert!(t.records.iter().all(|r| r.phonons.is_some()));
        let t = trajectory(&figure2().with_n_dots(200), 0.1, 0.001, false).unwrap();
        assert!(t.records.iter().all(|r| r.phonons.is_none() && r.intensity.is_some()));
        assert!(trajectory(&figure2().with_n_dots(200), 0.1, 0.001, true).is_err());
    }

    proptest! {
        #[test]
        fn phonons_thermal_at_origin(
            omega in 0.5..60.0f64, eta in 0.0..10.0f64, kappa in 0.05..30.0f64, nbar in 0.0..20.0f64,
        ) {
            prop_assume!((kappa - 1.0).abs() > 1e-3);
            let p = SystemParams::new(1, omega, eta, kappa, nbar);
            let v = single_dot_phonons(0.0, &p).unwrap();
            let c = SingleDotCoefficients::new(&p).unwrap();
            let scale = c.a_bar.abs() + (c.b_bar * c.c_bar).abs() + nbar;
            prop_assert!((v - nbar).abs() <= 4.0 * f64::EPSILON * scale.max(1.0));
            let late = 50.0 / kappa.min(1.0);
            prop_assert!((single_dot_phonons(late, &p).unwrap() - nbar).abs() < 1e-8);
        }

        #[test]
        fn large_n_inversion_decreasing_and_odd(n in 2u32..1000, a in 0.0..1.0f64, d in 1e-4..1.0f64) {
            let s = superradiance_scales(n, 1.0);
            let t = a * 2.0 * s.t0.max(s.tau_r);
            prop_assert!(large_n_inversion(t + d * s.tau_r, n, 1.0) < large_n_inversion(t, n, 1.0));
            let x = d * s.tau_r;
            let sum = large_n_inversion(s.t0 + x, n, 1.0) + large_n_inversion(s.t0 - x, n, 1.0);
            prop_assert!(sum.abs() < 1e-10 * n as f64);
        }

        #[test]
        fn peak_intensity_per_n_squared_is_half_gamma(n in 2u32..5000, gamma in 0.1..5.0f64) {
            let s = superradiance_scales(n, gamma);
            let nf = n as f64;
            prop_assert!((large_n_intensity(s.t0, n, gamma) / (nf * nf) - 0.5 * gamma).abs() < 1e-12 * gamma);
        }
    }
}
