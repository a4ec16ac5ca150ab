//! Dense operators on the composite Dicke ⊗ Fock space and the reference
//! master-equation right-hand side built from matrix products.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::HilbertSpec;
use crate::error::{Error, Result};
use crate::system::SystemParams;

pub type OperatorMatrix = DMatrix<Complex64>;
pub type DensityMatrix = DMatrix<Complex64>;

/// Collective spin and phonon operators, identity-padded to the composite
/// space. Basis index is `d * (n_max + 1) + n` with `m = j - d`.
#[derive(Clone, Debug)]
pub struct Operators {
    pub b: OperatorMatrix,
    pub b_dag: OperatorMatrix,
    pub sz: OperatorMatrix,
    pub s_plus: OperatorMatrix,
    pub s_minus: OperatorMatrix,
    pub s22: OperatorMatrix,
}

/// `<j, m-1| S- |j, m>`.
pub fn lowering_amplitude(j: f64, m: f64) -> f64 {
    ((j + m) * (j - m + 1.0)).max(0.0).sqrt()
}

fn dicke_factors(n_dots: u32) -> (OperatorMatrix, OperatorMatrix) {
    let dd = n_dots as usize + 1;
    let j = 0.5 * n_dots as f64;
    let mut sz = OperatorMatrix::zeros(dd, dd);
    let mut sm = OperatorMatrix::zeros(dd, dd);
    for d in 0..dd {
        let m = j - d as f64;
        sz[(d, d)] = Complex64::new(m, 0.0);
        if d + 1 < dd {
            sm[(d + 1, d)] = Complex64::new(lowering_amplitude(j, m), 0.0);
        }
    }
    (sz, sm)
}

fn fock_lowering(n_max: u32) -> OperatorMatrix {
    let k = n_max as usize + 1;
    let mut b = OperatorMatrix::zeros(k, k);
    for n in 1..k {
        b[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    b
}

pub fn build_operators(spec: &HilbertSpec) -> Result<Operators> {
    spec.check()?;
    let (sz_d, sm_d) = dicke_factors(spec.n_dots);
    let b_f = fock_lowering(spec.n_max);
    let id_d = OperatorMatrix::identity(sz_d.nrows(), sz_d.nrows());
    let id_f = OperatorMatrix::identity(b_f.nrows(), b_f.nrows());
    let sz = sz_d.kronecker(&id_f);
    let s_minus = sm_d.kronecker(&id_f);
    let s_plus = s_minus.adjoint();
    let b = id_d.kronecker(&b_f);
    let b_dag = b.adjoint();
    let dim = spec.dim();
    let s22 = &sz + OperatorMatrix::identity(dim, dim) * Complex64::new(spec.j(), 0.0);
    Ok(Operators {
        b,
        b_dag,
        sz,
        s_plus,
        s_minus,
        s22,
    })
}

/// `H = ω b†b + ω_qd Sz + η S22 (b + b†)`, in units where `ħ = 1`.
pub fn build_hamiltonian(spec: &HilbertSpec, params: &SystemParams, ops: &Operators) -> Result<OperatorMatrix> {
    if ops.b.nrows() != spec.dim() {
        return Err(Error::InvalidArgument(format!(
            "operators have dimension {}, spec has {}",
            ops.b.nrows(),
            spec.dim()
        )));
    }
    let c = |x: f64| Complex64::new(x, 0.0);
    let mut h = &ops.b_dag * &ops.b * c(params.omega);
    if let Some(w) = params.omega_qd {
        h += &ops.sz * c(w);
    }
    h += &ops.s22 * (&ops.b + &ops.b_dag) * c(params.eta);
    Ok(h)
}

fn dissipator(o: &OperatorMatrix, rho: &DensityMatrix) -> DensityMatrix {
    let od = o.adjoint();
    let odo = &od * o;
    (o * rho * &od) * Complex64::new(2.0, 0.0) - &odo * rho - rho * &odo
}

/// `-i[H, ρ] + κ n̄ L(b†) + κ(1 + n̄) L(b) + γ L(S-)` with
/// `L(O) = 2OρO† - O†Oρ - ρO†O`.
pub fn lindblad_rhs(rho: &DensityMatrix, h: &OperatorMatrix, ops: &Operators, params: &SystemParams) -> Result<DensityMatrix> {
    if rho.shape() != h.shape() || h.shape() != ops.b.shape() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: rho {:?}, H {:?}, operators {:?}",
            rho.shape(),
            h.shape(),
            ops.b.shape()
        )));
    }
    let mi = Complex64::new(0.0, -1.0);
    let c = |x: f64| Complex64::new(x, 0.0);
    let mut out = (h * rho - rho * h) * mi;
    out += dissipator(&ops.b_dag, rho) * c(params.kappa * params.nbar);
    out += dissipator(&ops.b, rho) * c(params.kappa * (1.0 + params.nbar));
    out += dissipator(&ops.s_minus, rho) * c(params.gamma);
    Ok(out)
}
