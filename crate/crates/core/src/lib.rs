//! Phonon emission driven by collective (Dicke) decay of quantum dots
//! coupled to a damped mechanical mode.
//!
//! Three solvers share one parameter set and one trajectory type:
//! closed-form laws in [`analytic`], truncated moment hierarchies in
//! [`moments`], and the full density-matrix master equation in
//! [`lindblad`], which serves as the reference for the others.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod integrate;
pub mod lindblad;
pub mod moments;
pub mod system;
pub mod trajectory;

pub use error::{Error, Result};
pub use moments::{simulate, MomentState};
pub use integrate::{IntegrateError, IntegrationStats, IntegratorConfig, Method};
pub use system::{thermal_occupation, validate, ClosureScheme, SystemParams};
pub use trajectory::{intensity_from_inversion, ObservableRecord, PulseStats, Trajectory};
