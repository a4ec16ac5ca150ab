//! Matrix-free master-equation right-hand side on a block-packed density
//! matrix.
//!
//! `ρ` is split into Fock blocks `ρ[d, d']` indexed by Dicke rungs. The
//! Hamiltonian is diagonal in `d`, and `S-` lowers both sides of a block
//! together, so the coherence order `d - d'` is conserved and only the
//! blocks of the requested orders are stored.

use num_complex::Complex64;

use super::operators::{lowering_amplitude, DensityMatrix};
use super::HilbertSpec;
use crate::error::{Error, Result};
use crate::system::SystemParams;

type C = Complex64;

/// Picture in which the packed state is expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    /// Schrödinger picture.
    Lab,
    /// Interaction picture of `ω b†b + ω_qd Sz`. The dissipators are
    /// invariant under this rotation, so only the coupling picks up phases
    /// `e^{±iωt}`.
    Rotating,
}

/// Which blocks of `ρ` are stored and where.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockLayout {
    pub n_dots: u32,
    /// Fock dimension `n_max + 1`.
    pub k: usize,
    /// Stored `(d, d')` pairs in storage order.
    pub blocks: Vec<(usize, usize)>,
    index: Vec<Option<usize>>,
}

impl BlockLayout {
    /// Stores every block whose coherence order `d - d'` is in `orders`
    /// (negated orders are added so the layout is closed under `†`).
    pub fn new(spec: &HilbertSpec, orders: &[i64]) -> Self {
        let dd = spec.n_dots as usize + 1;
        let mut active: Vec<i64> = orders.iter().flat_map(|&o| [o, -o]).collect();
        active.sort_unstable();
        active.dedup();
        let mut blocks = Vec::new();
        let mut index = vec![None; dd * dd];
        for d in 0..dd {
            for e in 0..dd {
                if active.contains(&(d as i64 - e as i64)) {
                    index[d * dd + e] = Some(blocks.len());
                    blocks.push((d, e));
                }
            }
        }
        BlockLayout {
            n_dots: spec.n_dots,
            k: spec.n_max as usize + 1,
            blocks,
            index,
        }
    }

    /// Only the populations-of-rungs sector, reached from any Dicke state.
    pub fn diagonal(spec: &HilbertSpec) -> Self {
        Self::new(spec, &[0])
    }

    /// Every block.
    pub fn full(spec: &HilbertSpec) -> Self {
        let orders: Vec<i64> = (0..=spec.n_dots as i64).collect();
        Self::new(spec, &orders)
    }

    pub fn len(&self) -> usize {
        self.blocks.len() * self.k * self.k
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block_index(&self, d: usize, e: usize) -> Option<usize> {
        let dd = self.n_dots as usize + 1;
        if d < dd && e < dd {
            self.index[d * dd + e]
        } else {
            None
        }
    }

    pub fn block<'a>(&self, y: &'a [C], b: usize) -> &'a [C] {
        let kk = self.k * self.k;
        &y[b * kk..(b + 1) * kk]
    }

    /// Packs the stored blocks of a dense matrix; other entries are dropped.
    pub fn pack(&self, rho: &DensityMatrix) -> Vec<C> {
        let k = self.k;
        let mut out = Vec::with_capacity(self.len());
        for &(d, e) in &self.blocks {
            for p in 0..k {
                for q in 0..k {
                    out.push(rho[(d * k + p, e * k + q)]);
                }
            }
        }
        out
    }

    pub fn unpack(&self, y: &[C]) -> DensityMatrix {
        let k = self.k;
        let dim = (self.n_dots as usize + 1) * k;
        let mut rho = DensityMatrix::zeros(dim, dim);
        for (b, &(d, e)) in self.blocks.iter().enumerate() {
            let blk = self.block(y, b);
            for p in 0..k {
                for q in 0..k {
                    rho[(d * k + p, e * k + q)] = blk[p * k + q];
                }
            }
        }
        rho
    }
}

/// Right-hand side of the master equation on a [`BlockLayout`].
#[derive(Clone, Debug)]
pub struct Generator {
    pub layout: BlockLayout,
    pub frame: Frame,
    params: SystemParams,
    sqrt: Vec<f64>,
    /// `-κ(1+n̄) p - κ n̄ [b b†]_pp - iωp` (the `iω` part only in the lab frame).
    u: Vec<C>,
    /// Dicke rung data: `m`, `S22` eigenvalue, `|<d+1|S-|d>|`.
    m: Vec<f64>,
    exc: Vec<f64>,
    lower: Vec<f64>,
}

impl Generator {
    pub fn new(spec: &HilbertSpec, params: &SystemParams, layout: BlockLayout, frame: Frame) -> Result<Self> {
        spec.check()?;
        if layout.n_dots != spec.n_dots || layout.k != spec.n_max as usize + 1 {
            return Err(Error::InvalidArgument("block layout does not match Hilbert space".into()));
        }
        if params.n_dots != spec.n_dots {
            return Err(Error::InvalidArgument(format!(
                "params have n_dots = {}, Hilbert space has {}",
                params.n_dots, spec.n_dots
            )));
        }
        let k = layout.k;
        let (kap, nb) = (params.kappa, params.nbar);
        let sqrt: Vec<f64> = (0..=k).map(|n| (n as f64).sqrt()).collect();
        let u = (0..k)
            .map(|p| {
                // truncated b b† has no entry on the top level
                let bbd = if p + 1 < k { (p + 1) as f64 } else { 0.0 };
                let re = -kap * (1.0 + nb) * p as f64 - kap * nb * bbd;
                let im = if frame == Frame::Lab { -params.omega * p as f64 } else { 0.0 };
                C::new(re, im)
            })
            .collect();
        let j = spec.j();
        let dd = spec.n_dots as usize + 1;
        let m: Vec<f64> = (0..dd).map(|d| j - d as f64).collect();
        let exc = m.iter().map(|&m| m + j).collect();
        let lower = m.iter().map(|&m| lowering_amplitude(j, m)).collect();
        Ok(Generator {
            layout,
            frame,
            params: *params,
            sqrt,
            u,
            m,
            exc,
            lower,
        })
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    /// Phase `e^{iωt}` carried by `b†` in the current frame.
    pub fn phase(&self, t: f64) -> C {
        match self.frame {
            Frame::Lab => C::new(1.0, 0.0),
            Frame::Rotating => C::from_polar(1.0, self.params.omega * t),
        }
    }

    /// Writes `dρ/dt` for the packed state `y` into `dy`.
    pub fn apply(&self, t: f64, y: &[C], dy: &mut [C]) {
        let k = self.layout.k;
        let kk = k * k;
        let p = &self.params;
        let (eta, gam) = (p.eta, p.gamma);
        let up = 2.0 * p.kappa * (1.0 + p.nbar);
        let down = 2.0 * p.kappa * p.nbar;
        let ph = self.phase(t);
        let phc = ph.conj();
        let sq = &self.sqrt;
        let mi = C::new(0.0, -1.0);
        let uc: Vec<C> = self.u.iter().map(|u| u.conj()).collect();
        let mut col_l = vec![C::default(); k];
        let mut col_r = vec![C::default(); k];

        for (bi, &(d, e)) in self.layout.blocks.iter().enumerate() {
            let r = &y[bi * kk..(bi + 1) * kk];
            let out = &mut dy[bi * kk..(bi + 1) * kk];
            let mut konst = C::new(-gam * (self.lower[d].powi(2) + self.lower[e].powi(2)), 0.0);
            if self.frame == Frame::Lab {
                if let Some(w) = p.omega_qd {
                    konst += mi * (w * (self.m[d] - self.m[e]));
                }
            }
            // -iη(e_d X ρ - e_d' ρ X) with X = b φ* + b† φ
            let cl = mi * eta * self.exc[d];
            let cr = -mi * eta * self.exc[e];
            for q in 0..k {
                col_l[q] = cr * (sq[q] * phc);
                col_r[q] = cr * (sq[q + 1] * ph);
            }

            for pi in 0..k {
                let row = &r[pi * k..(pi + 1) * k];
                let o = &mut out[pi * k..(pi + 1) * k];
                let diag = self.u[pi] + konst;
                for ((o, &v), &u) in o.iter_mut().zip(row).zip(&uc) {
                    *o = (diag + u) * v;
                }
                // ρ X
                for q in 1..k {
                    o[q] += col_l[q] * row[q - 1];
                    o[q - 1] += col_r[q - 1] * row[q];
                }
                if pi + 1 < k {
                    let below = &r[(pi + 1) * k..(pi + 2) * k];
                    let a1 = cl * (sq[pi + 1] * phc);
                    for (o, &v) in o.iter_mut().zip(below) {
                        *o += a1 * v;
                    }
                    let w = up * sq[pi + 1];
                    for ((o, &v), &s) in o.iter_mut().zip(&below[1..]).zip(&sq[1..]) {
                        *o += v * (w * s);
                    }
                }
                if pi > 0 {
                    let above = &r[(pi - 1) * k..pi * k];
                    let a2 = cl * (sq[pi] * ph);
                    for (o, &v) in o.iter_mut().zip(above) {
                        *o += a2 * v;
                    }
                    let w = down * sq[pi];
                    for ((o, &v), &s) in o[1..].iter_mut().zip(above).zip(&sq[1..]) {
                        *o += v * (w * s);
                    }
                }
            }
            if d > 0 && e > 0 {
                if let Some(s) = self.layout.block_index(d - 1, e - 1) {
                    let w = 2.0 * gam * self.lower[d - 1] * self.lower[e - 1];
                    for (o, v) in out.iter_mut().zip(&y[s * kk..(s + 1) * kk]) {
                        *o += v * w;
                    }
                }
            }
        }
    }
}

/// Right-hand side on the diagonal sector with each Hermitian block stored
/// as its upper triangle, row by row (`q >= p`). Entries below the diagonal
/// are read as conjugates of their mirror images.
#[derive(Clone, Debug)]
pub struct HermitianGenerator {
    inner: Generator,
    offsets: Vec<usize>,
    tri: usize,
}

impl HermitianGenerator {
    pub fn new(spec: &HilbertSpec, params: &SystemParams, frame: Frame) -> Result<Self> {
        let inner = Generator::new(spec, params, BlockLayout::diagonal(spec), frame)?;
        let k = inner.layout.k;
        let offsets = (0..=k).map(|p| p * k - p * p.saturating_sub(1) / 2).collect();
        Ok(HermitianGenerator {
            inner,
            offsets,
            tri: k * (k + 1) / 2,
        })
    }

    pub fn k(&self) -> usize {
        self.inner.layout.k
    }

    pub fn n_blocks(&self) -> usize {
        self.inner.layout.blocks.len()
    }

    pub fn len(&self) -> usize {
        self.n_blocks() * self.tri
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn phase(&self, t: f64) -> C {
        self.inner.phase(t)
    }

    /// Packed block of Dicke rung `d`.
    pub fn block<'a>(&self, y: &'a [C], d: usize) -> &'a [C] {
        &y[d * self.tri..(d + 1) * self.tri]
    }

    /// Position of `(p, q)`, `p <= q`, inside a packed block.
    pub fn index(&self, p: usize, q: usize) -> usize {
        self.offsets[p] + (q - p)
    }

    /// Reads `(p, q)` of a packed block for any ordering of the indices.
    pub fn entry(&self, blk: &[C], p: usize, q: usize) -> C {
        if p <= q {
            blk[self.index(p, q)]
        } else {
            blk[self.index(q, p)].conj()
        }
    }

    pub fn pack(&self, rho: &DensityMatrix) -> Vec<C> {
        let k = self.k();
        let mut out = Vec::with_capacity(self.len());
        for d in 0..self.n_blocks() {
            for p in 0..k {
                for q in p..k {
                    out.push(rho[(d * k + p, d * k + q)]);
                }
            }
        }
        out
    }

    pub fn unpack(&self, y: &[C]) -> DensityMatrix {
        let k = self.k();
        let dim = self.n_blocks() * k;
        let mut rho = DensityMatrix::zeros(dim, dim);
        for d in 0..self.n_blocks() {
            let blk = self.block(y, d);
            for p in 0..k {
                for q in 0..k {
                    rho[(d * k + p, d * k + q)] = self.entry(blk, p, q);
                }
            }
        }
        rho
    }

    pub fn apply(&self, t: f64, y: &[C], dy: &mut [C]) {
        let g = &self.inner;
        let k = g.layout.k;
        let tri = self.tri;
        let off = &self.offsets;
        let p = &g.params;
        let up = 2.0 * p.kappa * (1.0 + p.nbar);
        let down = 2.0 * p.kappa * p.nbar;
        let ph = g.phase(t);
        let phc = ph.conj();
        let sq = &g.sqrt;
        let uc: Vec<C> = g.u.iter().map(|u| u.conj()).collect();
        let mut col_l = vec![C::default(); k];
        let mut col_r = vec![C::default(); k];

        for d in 0..self.n_blocks() {
            let r = &y[d * tri..(d + 1) * tri];
            let out = &mut dy[d * tri..(d + 1) * tri];
            let konst = -2.0 * p.gamma * g.lower[d].powi(2);
            let cl = C::new(0.0, -p.eta * g.exc[d]);
            let cr = -cl;
            for q in 0..k {
                col_l[q] = cr * (sq[q] * phc);
                col_r[q] = cr * (sq[q + 1] * ph);
            }
            let a1 = |pi: usize| cl * (sq[pi + 1] * phc);
            let a2 = |pi: usize| cl * (sq[pi] * ph);
            let at = |pi: usize, qi: usize| if pi <= qi { r[off[pi] + qi - pi] } else { r[off[qi] + pi - qi].conj() };
            // every term of one entry with explicit boundary checks
            let general = |pi: usize, qi: usize| {
                let mut v = (g.u[pi] + konst + uc[qi]) * at(pi, qi);
                if qi > 0 {
                    v += col_l[qi] * at(pi, qi - 1);
                }
                if qi + 1 < k {
                    v += col_r[qi] * at(pi, qi + 1);
                    if pi + 1 < k {
                        v += at(pi + 1, qi + 1) * (up * sq[pi + 1] * sq[qi + 1]);
                    }
                }
                if pi + 1 < k {
                    v += a1(pi) * at(pi + 1, qi);
                }
                if pi > 0 {
                    v += a2(pi) * at(pi - 1, qi) + at(pi - 1, qi - 1) * (down * sq[pi] * sq[qi]);
                }
                v
            };
            for pi in 0..k {
                let len = k - pi;
                let (start, end) = (off[pi], off[pi + 1]);
                if pi == 0 || pi + 1 == k || len < 3 {
                    for (j, o) in out[start..end].iter_mut().enumerate() {
                        *o = general(pi, pi + j);
                    }
                    continue;
                }
                out[start] = general(pi, pi);
                out[end - 1] = general(pi, k - 1);
                // interior: q = pi + 1 ..= k - 2, all neighbours stored upright
                let m = len - 2;
                let row = &r[start..end];
                let above = &r[off[pi - 1]..start];
                let below = &r[end..off[pi + 2]];
                let (cen, lef, rig) = (&row[1..1 + m], &row[..m], &row[2..2 + m]);
                let (ab_c, ab_l) = (&above[2..2 + m], &above[1..1 + m]);
                let (be_l, be_c) = (&below[..m], &below[1..1 + m]);
                let ucs = &uc[pi + 1..pi + 1 + m];
                let cls = &col_l[pi + 1..pi + 1 + m];
                let crs = &col_r[pi + 1..pi + 1 + m];
                let sqd = &sq[pi + 1..pi + 1 + m];
                let squ = &sq[pi + 2..pi + 2 + m];
                let o = &mut out[start + 1..start + 1 + m];
                let diag = g.u[pi] + konst;
                let (a1, a2) = (a1(pi), a2(pi));
                let (wu, wd) = (up * sq[pi + 1], down * sq[pi]);
                for j in 0..m {
                    o[j] = (diag + ucs[j]) * cen[j]
                        + cls[j] * lef[j]
                        + crs[j] * rig[j]
                        + a1 * be_l[j]
                        + be_c[j] * (wu * squ[j])
                        + a2 * ab_c[j]
                        + ab_l[j] * (wd * sqd[j]);
                }
            }
            if d > 0 {
                let w = 2.0 * p.gamma * g.lower[d - 1].powi(2);
                for (o, v) in out.iter_mut().zip(&y[(d - 1) * tri..d * tri]) {
                    *o += v * w;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::operators::{build_hamiltonian, build_operators, lindblad_rhs};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(dim: usize, seed: u64) -> DensityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DensityMatrix::from_fn(dim, dim, |_, _| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let rho = &a * a.adjoint();
        let tr = rho.trace();
        rho / tr
    }

    #[test]
    fn matches_dense_reference_in_lab_frame() {
        for (n, n_max) in [(1, 5), (2, 4), (3, 3)] {
            let spec = HilbertSpec::new(n, n_max).unwrap();
            let params = SystemParams::new(n, 15.0, 5.0, 0.5, 2.0).with_omega_qd(3.0);
            let ops = build_operators(&spec).unwrap();
            let h = build_hamiltonian(&spec, &params, &ops).unwrap();
            let rho = random_state(spec.dim(), n as u64);
            let dense = lindblad_rhs(&rho, &h, &ops, &params).unwrap();
            let gen = Generator::new(&spec, &params, BlockLayout::full(&spec), Frame::Lab).unwrap();
            let y = gen.layout.pack(&rho);
            let mut dy = vec![C::default(); y.len()];
            gen.apply(0.7, &y, &mut dy);
            let fast = gen.layout.unpack(&dy);
            let err = (fast - dense).iter().fold(0.0_f64, |m, z| m.max(z.norm()));
            assert!(err < 1e-12, "N={n}: {err}");
        }
    }

    #[test]
    fn diagonal_sector_is_closed() {
        let spec = HilbertSpec::new(2, 4).unwrap();
        let params = SystemParams::new(2, 15.0, 5.0, 0.5, 2.0);
        let full = BlockLayout::full(&spec);
        let diag = BlockLayout::diagonal(&spec);
        let rho = diag.unpack(&diag.pack(&random_state(spec.dim(), 9)));
        let gf = Generator::new(&spec, &params, full.clone(), Frame::Lab).unwrap();
        let gd = Generator::new(&spec, &params, diag.clone(), Frame::Lab).unwrap();
        let yf = full.pack(&rho);
        let mut dyf = vec![C::default(); yf.len()];
        gf.apply(0.0, &yf, &mut dyf);
        let yd = diag.pack(&rho);
        let mut dyd = vec![C::default(); yd.len()];
        gd.apply(0.0, &yd, &mut dyd);
        let a = full.unpack(&dyf);
        let b = diag.unpack(&dyd);
        assert!((a - b).iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn rotating_frame_is_conjugated_lab_frame() {
        // U(t)† L[U ρ U†] U = L_rot(t)[ρ] with U = exp(-i ω b†b t)
        let spec = HilbertSpec::new(1, 5).unwrap();
        let params = SystemParams::new(1, 15.0, 5.0, 0.5, 2.0);
        let layout = BlockLayout::full(&spec);
        let lab = Generator::new(&spec, &params, layout.clone(), Frame::Lab).unwrap();
        let rot = Generator::new(&spec, &params, layout.clone(), Frame::Rotating).unwrap();
        let t = 0.37;
        let k = spec.n_max as usize + 1;
        let u = DensityMatrix::from_fn(spec.dim(), spec.dim(), |r, c| {
            if r == c {
                C::from_polar(1.0, -params.omega * (r % k) as f64 * t)
            } else {
                C::default()
            }
        });
        let rho = random_state(spec.dim(), 4);
        let mut d_lab = vec![C::default(); layout.len()];
        lab.apply(t, &layout.pack(&(&u * &rho * u.adjoint())), &mut d_lab);
        let mut d_rot = vec![C::default(); layout.len()];
        rot.apply(t, &layout.pack(&rho), &mut d_rot);
        // the lab generator includes -iω[b†b, ·], which the frame removes
        let ops = build_operators(&spec).unwrap();
        let n_op = &ops.b_dag * &ops.b * C::new(params.omega, 0.0);
        let rot_lab = &u * &rho * u.adjoint();
        let free = (&n_op * &rot_lab - &rot_lab * &n_op) * C::new(0.0, -1.0);
        let back = u.adjoint() * (layout.unpack(&d_lab) - free) * &u;
        let err = (back - layout.unpack(&d_rot)).iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn hermitian_packing_matches_full_blocks() {
        for (n, n_max) in [(1, 6), (2, 5), (4, 3)] {
            let spec = HilbertSpec::new(n, n_max).unwrap();
            let params = SystemParams::new(n, 15.0, 5.0, 0.5, 2.0);
            for frame in [Frame::Lab, Frame::Rotating] {
                let full = Generator::new(&spec, &params, BlockLayout::diagonal(&spec), frame).unwrap();
                let herm = HermitianGenerator::new(&spec, &params, frame).unwrap();
                let rho = full.layout.unpack(&full.layout.pack(&random_state(spec.dim(), 17 + n as u64)));
                let mut a = vec![C::default(); full.len()];
                full.apply(0.3, &full.layout.pack(&rho), &mut a);
                let mut b = vec![C::default(); herm.len()];
                herm.apply(0.3, &herm.pack(&rho), &mut b);
                let err = (full.layout.unpack(&a) - herm.unpack(&b)).iter().fold(0.0_f64, |m, z| m.max(z.norm()));
                assert!(err < 1e-12, "N={n} {frame:?}: {err}");
            }
        }
    }

    #[test]
    fn trace_of_rhs_vanishes() {
        let spec = HilbertSpec::new(2, 6).unwrap();
        let params = SystemParams::new(2, 15.0, 5.0, 0.5, 10.0);
        let layout = BlockLayout::full(&spec);
        let gen = Generator::new(&spec, &params, layout.clone(), Frame::Lab).unwrap();
        for seed in 0..5 {
            let y = layout.pack(&random_state(spec.dim(), 100 + seed));
            let mut dy = vec![C::default(); y.len()];
            gen.apply(0.0, &y, &mut dy);
            assert!(layout.unpack(&dy).trace().norm() < 1e-12);
        }
    }
}
