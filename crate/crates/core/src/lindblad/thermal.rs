//! Gibbs state of the phonon mode on a truncated Fock space.

use num_complex::Complex64;

use super::operators::DensityMatrix;
use crate::error::{Error, Result};

const TAIL_WARN: f64 = 1e-6;
const TAIL_FAIL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct ThermalState {
    /// Renormalized populations `p_0 ..= p_{n_max}`.
    pub populations: Vec<f64>,
    /// Probability mass above `n_max` before renormalization.
    pub tail_mass: f64,
    /// Mean occupation of the renormalized state (at most `nbar`).
    pub mean_occupation: f64,
    pub warning: Option<String>,
}

impl ThermalState {
    pub fn density_matrix(&self) -> DensityMatrix {
        let k = self.populations.len();
        DensityMatrix::from_fn(k, k, |r, c| {
            if r == c {
                Complex64::new(self.populations[r], 0.0)
            } else {
                Complex64::default()
            }
        })
    }
}

/// `p_n = nbar^n / (1 + nbar)^(n+1)`, truncated at `n_max` and renormalized.
pub fn thermal_state(nbar: f64, n_max: u32) -> Result<ThermalState> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::InvalidArgument(format!("nbar must be ≥ 0, got {nbar}")));
    }
    let k = n_max as usize + 1;
    let ratio = nbar / (1.0 + nbar);
    let mut populations = Vec::with_capacity(k);
    let mut p = 1.0 / (1.0 + nbar);
    for _ in 0..k {
        populations.push(p);
        p *= ratio;
    }
    let tail_mass = ratio.powi(k as i32);
    if tail_mass > TAIL_FAIL {
        return Err(Error::Truncation(format!(
            "thermal tail above n_max = {n_max} is {tail_mass:.3e}; raise n_max"
        )));
    }
    let norm: f64 = populations.iter().sum();
    for p in &mut populations {
        *p /= norm;
    }
    let mean_occupation = populations.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    let warning = (tail_mass > TAIL_WARN)
        .then(|| format!("thermal state truncated at n_max = {n_max} discards mass {tail_mass:.3e}"));
    Ok(ThermalState {
        populations,
        tail_mass,
        mean_occupation,
        warning,
    })
}
