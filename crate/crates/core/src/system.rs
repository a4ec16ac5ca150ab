//! Scenario parameters and the closure-scheme selector.
//!
//! All rates are expressed in units of the single-dot decay rate `gamma`
//! and all times in units of `1/gamma`. The only absolute-unit entry point
//! is [`thermal_occupation`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant over Boltzmann constant, in kelvin seconds.
const HBAR_OVER_KB: f64 = 7.638_232_577_577_646e-12;

/// Physical rates and counts defining one scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Number of quantum dots, `N`.
    pub n_dots: u32,
    /// Mechanical mode frequency.
    pub omega: f64,
    /// Dot-phonon coupling strength.
    pub eta: f64,
    /// Mechanical damping rate.
    pub kappa: f64,
    /// Single-dot spontaneous decay rate.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Mean thermal phonon occupation of the reservoir.
    pub nbar: f64,
    /// Dot transition frequency. None of the tracked observables depend on
    /// it; it only enters the density-matrix Hamiltonian.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_qd: Option<f64>,
}

fn default_gamma() -> f64 {
    1.0
}

impl SystemParams {
    pub fn new(n_dots: u32, omega: f64, eta: f64, kappa: f64, nbar: f64) -> Self {
        SystemParams {
            n_dots,
            omega,
            eta,
            kappa,
            gamma: 1.0,
            nbar,
            omega_qd: None,
        }
    }

    /// Cooperation number `j = N/2`.
    pub fn j(&self) -> f64 {
        0.5 * self.n_dots as f64
    }

    pub fn with_n_dots(mut self, n_dots: u32) -> Self {
        self.n_dots = n_dots;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_nbar(mut self, nbar: f64) -> Self {
        self.nbar = nbar;
        self
    }

    pub fn with_omega_qd(mut self, omega_qd: f64) -> Self {
        self.omega_qd = Some(omega_qd);
        self
    }

    pub fn omega_qd(&self) -> f64 {
        self.omega_qd.unwrap_or(0.0)
    }

    /// Checks every bound and returns the parameters unchanged if all hold.
    pub fn validate(self) -> Result<Self> {
        validate(self)
    }
}

/// Returns `params` unchanged if all invariants hold, otherwise an error
/// naming every violated bound.
pub fn validate(params: SystemParams) -> Result<SystemParams> {
    let mut violated = Vec::new();
    if params.n_dots < 1 {
        violated.push("n_dots ≥ 1".to_string());
    }
    // `!(x > 0)` also catches NaN.
    if !(params.omega > 0.0 && params.omega.is_finite()) {
        violated.push("omega > 0".to_string());
    }
    if !(params.eta >= 0.0 && params.eta.is_finite()) {
        violated.push("eta ≥ 0".to_string());
    }
    if !(params.kappa > 0.0 && params.kappa.is_finite()) {
        violated.push("kappa > 0".to_string());
    }
    if !(params.gamma > 0.0 && params.gamma.is_finite()) {
        violated.push("gamma > 0".to_string());
    }
    if !(params.nbar >= 0.0 && params.nbar.is_finite()) {
        violated.push("nbar ≥ 0".to_string());
    }
    if let Some(w) = params.omega_qd {
        if !w.is_finite() {
            violated.push("omega_qd finite".to_string());
        }
    }
    if violated.is_empty() {
        Ok(params)
    } else {
        Err(Error::InvalidParams(violated))
    }
}

/// Bose-Einstein occupation `1/(exp(ħω/k_B T) - 1)` of a mode with angular
/// frequency `omega_abs` (rad/s) at `temperature` (K).
///
/// The zero-temperature limit is not reachable here; pass `nbar = 0`
/// directly instead.
pub fn thermal_occupation(omega_abs: f64, temperature: f64) -> Result<f64> {
    if !(omega_abs > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "omega_abs must be > 0, got {omega_abs}"
        )));
    }
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be > 0 K, got {temperature}; use nbar = 0 for the frozen reservoir"
        )));
    }
    Ok(bose_einstein(HBAR_OVER_KB * omega_abs / temperature))
}

/// `1/(e^x - 1)` for the dimensionless ratio `x = ħω/k_B T`.
pub fn bose_einstein(x: f64) -> f64 {
    1.0 / x.exp_m1()
}

/// Moment-equation closure. The mean-field variants both use
/// `<Sz^2> ≈ <Sz>^2` and differ in how `<Sz^2 b>` is factorized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosureScheme {
    /// Single dot, closed exactly by `Sz^2 = 1/4`.
    #[serde(alias = "Exact1")]
    Exact1,
    /// Two collectively coupled dots on the symmetric subspace.
    #[serde(alias = "Exact2")]
    Exact2,
    /// `<Sz^2 b> ≈ <Sz><Sz b>`.
    #[serde(alias = "MeanFieldA")]
    MeanFieldA,
    /// `<Sz^2 b> ≈ <Sz>^2 <b>`.
    #[serde(alias = "MeanFieldB")]
    MeanFieldB,
}

impl ClosureScheme {
    pub const ALL: [ClosureScheme; 4] = [
        ClosureScheme::Exact1,
        ClosureScheme::Exact2,
        ClosureScheme::MeanFieldA,
        ClosureScheme::MeanFieldB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClosureScheme::Exact1 => "exact1",
            ClosureScheme::Exact2 => "exact2",
            ClosureScheme::MeanFieldA => "mean-field-a",
            ClosureScheme::MeanFieldB => "mean-field-b",
        }
    }

    /// The dot count the scheme is tied to, if any.
    pub fn required_n_dots(self) -> Option<u32> {
        match self {
            ClosureScheme::Exact1 => Some(1),
            ClosureScheme::Exact2 => Some(2),
            ClosureScheme::MeanFieldA | ClosureScheme::MeanFieldB => None,
        }
    }

    pub fn is_mean_field(self) -> bool {
        matches!(self, ClosureScheme::MeanFieldA | ClosureScheme::MeanFieldB)
    }

    /// Checks the scheme against a dot count.
    pub fn check(self, n_dots: u32) -> Result<()> {
        match self.required_n_dots() {
            Some(required) if required != n_dots => Err(Error::SchemeMismatch {
                scheme: self.name().to_string(),
                required,
                actual: n_dots,
            }),
            None if n_dots < 2 => Err(Error::InvalidArgument(format!(
                "{} requires n_dots ≥ 2, got {n_dots}",
                self.name()
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ClosureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClosureScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClosureScheme::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown closure scheme `{s}` (expected exact1, exact2, mean-field-a, mean-field-b)"
                ))
            })
    }
}
