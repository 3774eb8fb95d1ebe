//! Exact density-matrix treatment of the two-ensemble master equation for a
//! handful of atoms per ensemble.
//!
//! Atoms `0..n` form ensemble I and `n..2n` ensemble II. Atom `a` occupies bit
//! `2n − 1 − a` of a basis index, with bit value 0 for `|↑⟩`. The lowering
//! operator `σ = |↑⟩⟨↓|` annihilates the polarized state, so the collective
//! jumps `A = Σ(μσ_I + νσ†_II)/√n` and `B = Σ(μσ_II + νσ†_I)/√n` are the spin
//! versions of `μa + νb†` and `μb + νa†`.
//!
//! Every jump operator is a real matrix and the coherent initial state is
//! real, so the density matrix stays real throughout; it is stored as a flat
//! row-major `Vec<f64>`. Transverse spins are `J_y = (σ + σ†)/2` and
//! `J_z = i(σ − σ†)/2`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Result, SimError};
use crate::model_core::{EntanglementReport, SqueezingParams};
use crate::ode::{Dopri5, OdeOptions};
use crate::two_level::{xi_steady, NoiseRates, CHECK_GAMMA};

/// Largest supported number of atoms per ensemble.
pub const MAX_ATOMS_PER_ENSEMBLE: usize = 5;
/// Largest `n` for which the dense superoperator is materialised.
pub const MAX_SUPEROPERATOR_N: usize = 2;

const HERMITICITY_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-8;

/// Two ensembles of `n_per_ensemble` two-level atoms each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SmallSystem {
    pub n_per_ensemble: usize,
}

impl SmallSystem {
    pub fn new(n_per_ensemble: usize) -> Result<Self> {
        if n_per_ensemble == 0 || n_per_ensemble > MAX_ATOMS_PER_ENSEMBLE {
            return Err(SimError::Budget(format!(
                "atoms per ensemble must be in 1..={MAX_ATOMS_PER_ENSEMBLE} (got {n_per_ensemble})"
            )));
        }
        Ok(Self { n_per_ensemble })
    }

    pub fn n_atoms(&self) -> usize {
        2 * self.n_per_ensemble
    }

    pub fn dimension(&self) -> usize {
        1 << self.n_atoms()
    }

    fn bit(&self, atom: usize) -> usize {
        1 << (self.n_atoms() - 1 - atom)
    }

    fn ensemble(&self, second: bool) -> std::ops::Range<usize> {
        let n = self.n_per_ensemble;
        if second {
            n..2 * n
        } else {
            0..n
        }
    }
}

/// Sparse real matrix stored as row-sorted, merged triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl SparseOp {
    fn from_map(dim: usize, map: BTreeMap<(u32, u32), f64>) -> Self {
        let entries = map.into_iter().filter(|(_, v)| *v != 0.0).map(|((r, c), v)| (r, c, v)).collect();
        Self { dim, entries }
    }

    fn zero(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// `Σ coeff · op`, merging coincident entries.
    fn combine(dim: usize, terms: &[(f64, &SparseOp)]) -> Self {
        let mut map = BTreeMap::new();
        for (coeff, op) in terms {
            for &(r, c, v) in &op.entries {
                *map.entry((r, c)).or_insert(0.0) += coeff * v;
            }
        }
        Self::from_map(dim, map)
    }

    /// `self · other`.
    fn compose(&self, other: &SparseOp) -> Self {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); self.dim];
        for &(r, c, v) in &other.entries {
            rows[r as usize].push((c, v));
        }
        let mut map = BTreeMap::new();
        for &(r, k, v) in &self.entries {
            for &(c, w) in &rows[k as usize] {
                *map.entry((r, c)).or_insert(0.0) += v * w;
            }
        }
        Self::from_map(self.dim, map)
    }

    fn transpose(&self) -> Self {
        let mut map = BTreeMap::new();
        for &(r, c, v) in &self.entries {
            map.insert((c, r), v);
        }
        Self::from_map(self.dim, map)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r as usize, c as usize)] += v;
        }
        m
    }

    /// `out += s · self · m` for a row-major `m`.
    fn left_mul_acc(&self, m: &[f64], s: f64, out: &mut [f64]) {
        let n = self.dim;
        for &(r, c, v) in &self.entries {
            let (r, c) = (r as usize, c as usize);
            let sv = s * v;
            let src = &m[c * n..(c + 1) * n];
            let dst = &mut out[r * n..(r + 1) * n];
            for (o, x) in dst.iter_mut().zip(src) {
                *o += sv * x;
            }
        }
    }

    /// `out += s · m · selfᵀ` for a row-major `m`.
    fn right_mul_t_acc(&self, m: &[f64], s: f64, out: &mut [f64]) {
        let n = self.dim;
        for row in 0..n {
            let src = &m[row * n..(row + 1) * n];
            let dst = &mut out[row * n..(row + 1) * n];
            for &(c, k, v) in &self.entries {
                dst[c as usize] += s * v * src[k as usize];
            }
        }
    }

    /// `Tr(self · m)`.
    fn trace_with(&self, m: &[f64]) -> f64 {
        self.entries.iter().map(|&(r, c, v)| v * m[c as usize * self.dim + r as usize]).sum()
    }
}

fn lowering(sys: &SmallSystem, atom: usize) -> SparseOp {
    let b = sys.bit(atom);
    let mut map = BTreeMap::new();
    for idx in 0..sys.dimension() {
        if idx & b != 0 {
            map.insert(((idx & !b) as u32, idx as u32), 1.0);
        }
    }
    SparseOp::from_map(sys.dimension(), map)
}

fn projector(sys: &SmallSystem, atom: usize, down: bool) -> SparseOp {
    let b = sys.bit(atom);
    let mut map = BTreeMap::new();
    for idx in 0..sys.dimension() {
        if (idx & b != 0) == down {
            map.insert((idx as u32, idx as u32), 1.0);
        }
    }
    SparseOp::from_map(sys.dimension(), map)
}

/// Which channels enter the generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelFlags {
    /// Collective `A`, `B` at rate `d`.
    pub entangling: bool,
    /// Single-particle cooling, heating and dephasing.
    pub single_particle: bool,
    /// Collective `C`, `D` at rate `d Γ̌`.
    pub collective_cd: bool,
    pub check_gamma: f64,
}

impl Default for ChannelFlags {
    fn default() -> Self {
        Self { entangling: true, single_particle: true, collective_cd: false, check_gamma: CHECK_GAMMA }
    }
}

impl ChannelFlags {
    /// Only the collective dephasing channels.
    pub fn collective_cd_only() -> Self {
        Self { entangling: false, single_particle: false, collective_cd: true, check_gamma: CHECK_GAMMA }
    }
}

/// Lindblad generator `L(ρ) = Σ κ_k (L_k ρ L_kᵀ) − ½{K, ρ}` with
/// `K = Σ κ_k L_kᵀ L_k`.
#[derive(Debug, Clone)]
pub struct Generator {
    sys: SmallSystem,
    jumps: Vec<(f64, SparseOp)>,
    k: SparseOp,
    packed: PackedGenerator,
}

/// Builds the generator for the given channels and rates.
pub fn build_generator(
    sys: &SmallSystem,
    d: f64,
    params: &SqueezingParams,
    rates: &NoiseRates,
    flags: &ChannelFlags,
) -> Result<Generator> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(SimError::domain("optical depth must be finite and >= 0"));
    }
    for (name, r) in [("cooling", rates.cool), ("heating", rates.heat), ("dephasing", rates.dephase)] {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(SimError::domain(format!("{name} rate must be finite and >= 0")));
        }
    }
    let dim = sys.dimension();
    let n = sys.n_per_ensemble;
    let norm = 1.0 / (n as f64).sqrt();
    let (mu, nu) = (params.mu, params.nu);
    let low: Vec<SparseOp> = (0..sys.n_atoms()).map(|a| lowering(sys, a)).collect();
    let raise: Vec<SparseOp> = low.iter().map(SparseOp::transpose).collect();
    let mut jumps = Vec::new();

    if flags.entangling && d > 0.0 {
        for (own, other) in [(false, true), (true, false)] {
            let mut terms = Vec::new();
            for a in sys.ensemble(own) {
                terms.push((mu * norm, &low[a]));
            }
            for a in sys.ensemble(other) {
                terms.push((nu * norm, &raise[a]));
            }
            jumps.push((d, SparseOp::combine(dim, &terms)));
        }
    }
    if flags.collective_cd && d > 0.0 && flags.check_gamma > 0.0 {
        let down: Vec<SparseOp> = (0..sys.n_atoms()).map(|a| projector(sys, a, true)).collect();
        let up: Vec<SparseOp> = (0..sys.n_atoms()).map(|a| projector(sys, a, false)).collect();
        for (own, other) in [(false, true), (true, false)] {
            let mut terms = Vec::new();
            for a in sys.ensemble(own) {
                terms.push((mu * norm, &down[a]));
            }
            for a in sys.ensemble(other) {
                terms.push((nu * norm, &up[a]));
            }
            jumps.push((d * flags.check_gamma, SparseOp::combine(dim, &terms)));
        }
    }
    if flags.single_particle {
        for a in 0..sys.n_atoms() {
            if rates.cool > 0.0 {
                jumps.push((rates.cool, low[a].clone()));
            }
            if rates.heat > 0.0 {
                jumps.push((rates.heat, raise[a].clone()));
            }
            if rates.dephase > 0.0 {
                jumps.push((rates.dephase, projector(sys, a, true)));
            }
        }
    }

    let mut k = SparseOp::zero(dim);
    for (rate, op) in &jumps {
        let ltl = op.transpose().compose(op);
        k = SparseOp::combine(dim, &[(1.0, &k), (*rate, &ltl)]);
    }
    let packed = PackedGenerator::new(sys, &jumps, &k)?;
    Ok(Generator { sys: *sys, jumps, k, packed })
}

impl Generator {
    pub fn system(&self) -> SmallSystem {
        self.sys
    }

    pub fn dimension(&self) -> usize {
        self.sys.dimension()
    }

    /// Writes `L(ρ)` into `out` for a row-major `ρ` (not necessarily symmetric).
    pub fn apply(&self, rho: &[f64], out: &mut [f64]) {
        let n = self.dimension();
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut x = vec![0.0; n * n];
        for (rate, op) in &self.jumps {
            x.iter_mut().for_each(|v| *v = 0.0);
            op.left_mul_acc(rho, 1.0, &mut x);
            op.right_mul_t_acc(&x, *rate, out);
        }
        self.k.left_mul_acc(rho, -0.5, out);
        // K is symmetric, so ρK = ρKᵀ.
        self.k.right_mul_t_acc(rho, -0.5, out);
    }

    fn apply_alloc(&self, rho: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; rho.len()];
        self.apply(rho, &mut out);
        out
    }
}

/// Block layout by the imbalance `D = N↓_I − N↓_II`.
///
/// Each jump operator shifts `D` by a fixed amount and the coherent state has
/// `D = 0`, so `ρ` has non-zero entries only where row and column share `D`.
/// Only those blocks are stored and propagated.
#[derive(Debug, Clone)]
struct Blocks {
    block_of: Vec<usize>,
    local: Vec<usize>,
    size: Vec<usize>,
    offset: Vec<usize>,
    len: usize,
}

impl Blocks {
    fn new(sys: &SmallSystem) -> Self {
        let n = sys.n_per_ensemble;
        let nb = 2 * n + 1;
        let mut size = vec![0; nb];
        let mut block_of = Vec::with_capacity(sys.dimension());
        let mut local = Vec::with_capacity(sys.dimension());
        for idx in 0..sys.dimension() {
            let down = |second| sys.ensemble(second).filter(|&a| idx & sys.bit(a) != 0).count();
            let b = n + down(false) - down(true);
            block_of.push(b);
            local.push(size[b]);
            size[b] += 1;
        }
        let mut offset = vec![0; nb];
        let mut len = 0;
        for b in 0..nb {
            offset[b] = len;
            len += size[b] * size[b];
        }
        Self { block_of, local, size, offset, len }
    }

    fn row_start(&self, r: usize) -> usize {
        let b = self.block_of[r];
        self.offset[b] + self.local[r] * self.size[b]
    }

    fn pack(&self, full: &[f64]) -> Option<Vec<f64>> {
        let dim = self.block_of.len();
        let mut out = vec![0.0; self.len];
        for r in 0..dim {
            for c in 0..dim {
                let v = full[r * dim + c];
                if self.block_of[r] == self.block_of[c] {
                    out[self.row_start(r) + self.local[c]] = v;
                } else if v != 0.0 {
                    return None;
                }
            }
        }
        Some(out)
    }

    fn unpack(&self, packed: &[f64]) -> Vec<f64> {
        let dim = self.block_of.len();
        let mut out = vec![0.0; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                if self.block_of[r] == self.block_of[c] {
                    out[r * dim + c] = packed[self.row_start(r) + self.local[c]];
                }
            }
        }
        out
    }
}

/// Sparse operator that shifts the block index by `shift`, stored for the
/// packed products.
#[derive(Debug, Clone)]
struct PackedOp {
    shift: isize,
    /// `(r, c, v)` in natural indices.
    entries: Vec<(u32, u32, f64)>,
    /// Entries `(local c, local k, v)` grouped by the block of `k`.
    by_colblock: Vec<Vec<(u32, u32, f64)>>,
}

impl PackedOp {
    fn new(op: &SparseOp, blocks: &Blocks) -> Result<Self> {
        let mut shift = None;
        let mut by_colblock = vec![Vec::new(); blocks.size.len()];
        for &(r, c, v) in &op.entries {
            let (br, bc) = (blocks.block_of[r as usize], blocks.block_of[c as usize]);
            let s = br as isize - bc as isize;
            if *shift.get_or_insert(s) != s {
                return Err(SimError::Numerical("jump operator does not shift the imbalance uniformly".into()));
            }
            by_colblock[bc].push((blocks.local[r as usize] as u32, blocks.local[c as usize] as u32, v));
        }
        Ok(Self { shift: shift.unwrap_or(0), entries: op.entries.clone(), by_colblock })
    }
}

#[derive(Debug, Clone)]
struct PackedGenerator {
    blocks: Blocks,
    jumps: Vec<(f64, PackedOp)>,
    k: PackedOp,
}

impl PackedGenerator {
    fn new(sys: &SmallSystem, jumps: &[(f64, SparseOp)], k: &SparseOp) -> Result<Self> {
        let blocks = Blocks::new(sys);
        let jumps = jumps
            .iter()
            .map(|(rate, op)| Ok((*rate, PackedOp::new(op, &blocks)?)))
            .collect::<Result<Vec<_>>>()?;
        let k = PackedOp::new(k, &blocks)?;
        Ok(Self { blocks, jumps, k })
    }

    /// `L(ρ)` on packed storage; `scratch` must hold `dim · max block size`.
    fn apply(&self, rho: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let bl = &self.blocks;
        let dim = bl.block_of.len();
        let width = bl.size.iter().copied().max().unwrap_or(0);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (rate, op) in &self.jumps {
            // X = Lρ: row r of X lives in block(r) − shift; stored with stride `width`.
            let x = &mut scratch[..dim * width];
            x.iter_mut().for_each(|v| *v = 0.0);
            for &(r, c, v) in &op.entries {
                let (r, c) = (r as usize, c as usize);
                let bc = bl.block_of[c];
                let src = &rho[bl.row_start(c)..bl.row_start(c) + bl.size[bc]];
                let dst = &mut x[r * width..r * width + bl.size[bc]];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
            // out += rate · X Lᵀ
            for r in 0..dim {
                let bx = bl.block_of[r] as isize - op.shift;
                if bx < 0 || bx as usize >= bl.size.len() {
                    continue;
                }
                let xrow = &x[r * width..];
                let base = bl.row_start(r);
                for &(lc, lk, w) in &op.by_colblock[bx as usize] {
                    out[base + lc as usize] += rate * w * xrow[lk as usize];
                }
            }
        }
        // −½(Kρ + ρK)
        for &(r, c, v) in &self.k.entries {
            let (r, c) = (r as usize, c as usize);
            let n = bl.size[bl.block_of[r]];
            let (dr, sc) = (bl.row_start(r), bl.row_start(c));
            for j in 0..n {
                out[dr + j] -= 0.5 * v * rho[sc + j];
            }
        }
        for r in 0..dim {
            let b = bl.block_of[r];
            let base = bl.row_start(r);
            for &(lc, lk, w) in &self.k.by_colblock[b] {
                out[base + lc as usize] -= 0.5 * w * rho[base + lk as usize];
            }
        }
    }

    fn scratch_len(&self) -> usize {
        self.blocks.block_of.len() * self.blocks.size.iter().copied().max().unwrap_or(0)
    }
}

/// Right-hand side and storage conversions used by the propagators.
struct Propagator<'a> {
    gen: &'a Generator,
    packed: bool,
}

impl<'a> Propagator<'a> {
    fn new(gen: &'a Generator, rho0: &DensityOperator) -> (Self, Vec<f64>) {
        match gen.packed.blocks.pack(&rho0.data) {
            Some(y) => (Self { gen, packed: true }, y),
            None => (Self { gen, packed: false }, rho0.data.clone()),
        }
    }

    fn rhs(&self) -> impl FnMut(f64, &[f64], &mut [f64]) + 'a {
        let gen = self.gen;
        let packed = self.packed;
        let mut scratch = vec![0.0; if packed { gen.packed.scratch_len() } else { 0 }];
        move |_t, y, dy| {
            if packed {
                gen.packed.apply(y, dy, &mut scratch);
            } else {
                gen.apply(y, dy);
            }
        }
    }

    fn to_density(&self, y: &[f64]) -> Result<DensityOperator> {
        let data = if self.packed { self.gen.packed.blocks.unpack(y) } else { y.to_vec() };
        DensityOperator::symmetrized_normalized(&self.gen.sys, data)
    }
}

/// Dense Liouvillian acting on row-major vectorised density matrices.
pub fn build_liouvillian(
    sys: &SmallSystem,
    d: f64,
    params: &SqueezingParams,
    rates: &NoiseRates,
    flags: &ChannelFlags,
) -> Result<DMatrix<f64>> {
    let gen = build_generator(sys, d, params, rates, flags)?;
    superoperator(&gen)
}

/// Materialises the generator as a `dim² × dim²` matrix.
pub fn superoperator(gen: &Generator) -> Result<DMatrix<f64>> {
    if gen.sys.n_per_ensemble > MAX_SUPEROPERATOR_N {
        return Err(SimError::Budget(format!(
            "dense superoperator limited to n <= {MAX_SUPEROPERATOR_N} atoms per ensemble; use propagation"
        )));
    }
    let d2 = gen.dimension() * gen.dimension();
    let mut s = DMatrix::zeros(d2, d2);
    let mut e = vec![0.0; d2];
    let mut col = vec![0.0; d2];
    for j in 0..d2 {
        e[j] = 1.0;
        gen.apply(&e, &mut col);
        s.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    Ok(s)
}

/// Validated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    pub sys: SmallSystem,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl DensityOperator {
    /// All atoms in `|↑⟩`.
    pub fn coherent(sys: &SmallSystem) -> Self {
        let dim = sys.dimension();
        let mut data = vec![0.0; dim * dim];
        data[0] = 1.0;
        Self { sys: *sys, data }
    }

    pub fn maximally_mixed(sys: &SmallSystem) -> Self {
        let dim = sys.dimension();
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0 / dim as f64;
        }
        Self { sys: *sys, data }
    }

    /// Wraps raw data after checking symmetry, trace and positivity.
    pub fn new(sys: &SmallSystem, data: Vec<f64>) -> Result<Self> {
        let rho = Self { sys: *sys, data };
        rho.validate()?;
        Ok(rho)
    }

    pub fn dimension(&self) -> usize {
        self.sys.dimension()
    }

    pub fn trace(&self) -> f64 {
        let n = self.dimension();
        (0..n).map(|i| self.data[i * n + i]).sum()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.dimension();
        DMatrix::from_row_slice(n, n, &self.data)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.to_matrix().symmetric_eigenvalues().min()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dimension();
        if self.data.len() != n * n || self.data.iter().any(|v| !v.is_finite()) {
            return Err(SimError::domain("density matrix has the wrong size or non-finite entries"));
        }
        let mut asym: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                asym = asym.max((self.data[i * n + j] - self.data[j * n + i]).abs());
            }
        }
        if asym > HERMITICITY_TOL {
            return Err(SimError::domain(format!("density matrix not Hermitian (deviation {asym:.2e})")));
        }
        if (self.trace() - 1.0).abs() > TRACE_TOL {
            return Err(SimError::domain(format!("density matrix trace {} is not 1", self.trace())));
        }
        let m = self.min_eigenvalue();
        if m < -POSITIVITY_TOL {
            return Err(SimError::domain(format!("density matrix not positive (min eigenvalue {m:.2e})")));
        }
        Ok(())
    }

    fn symmetrized_normalized(sys: &SmallSystem, mut data: Vec<f64>) -> Result<Self> {
        let n = sys.dimension();
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (data[i * n + j] + data[j * n + i]);
                data[i * n + j] = m;
                data[j * n + i] = m;
            }
        }
        let tr: f64 = (0..n).map(|i| data[i * n + i]).sum();
        if tr.abs() < 1e-300 {
            return Err(SimError::Numerical("kernel vector has zero trace".into()));
        }
        data.iter_mut().for_each(|v| *v /= tr);
        Self::new(sys, data)
    }
}

/// `½ Σ |λ(ρ₁ − ρ₂)|`.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> f64 {
    let diff = a.to_matrix() - b.to_matrix();
    let diff = 0.5 * (&diff + diff.transpose());
    0.5 * diff.symmetric_eigenvalues().iter().map(|v| v.abs()).sum::<f64>()
}

/// Relative singular-value threshold below which a direction counts as kernel.
pub const KERNEL_TOL: f64 = 1e-9;

/// Steady state from the null space of the dense superoperator.
pub fn steady_state_kernel(gen: &Generator) -> Result<DensityOperator> {
    let s = superoperator(gen)?;
    let svd = s.svd(false, true);
    let v_t = svd.v_t.as_ref().ok_or_else(|| SimError::Numerical("SVD did not return V".into()))?;
    let sv = &svd.singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return Err(SimError::DegenerateKernel(sv.len()));
    }
    let zero: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] <= KERNEL_TOL * smax).collect();
    if zero.len() != 1 {
        return Err(SimError::DegenerateKernel(zero.len()));
    }
    let row = v_t.row(zero[0]);
    DensityOperator::symmetrized_normalized(&gen.sys, row.iter().copied().collect())
}

/// Options for time propagation of `ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    pub ode: OdeOptions,
    /// Stationarity threshold on the window-averaged drift of `ρ`.
    pub residual_tol: f64,
    pub t_max: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions { rtol: 1e-9, atol: 1e-13, ..OdeOptions::default() },
            residual_tol: 1e-12,
            t_max: 1e4,
        }
    }
}

/// Propagates `ρ₀` and records the state at each time of `t_grid`.
pub fn propagate(
    gen: &Generator,
    rho0: &DensityOperator,
    t_grid: &[f64],
    opts: &PropagationOptions,
) -> Result<Vec<DensityOperator>> {
    rho0.validate()?;
    let (prop, y0) = Propagator::new(gen, rho0);
    let mut f = prop.rhs();
    let mut solver = Dopri5::new(0.0, y0, opts.ode);
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        solver.advance_to(&mut f, t)?;
        out.push(prop.to_density(&solver.y)?);
    }
    Ok(out)
}

/// Long-time propagation from `ρ₀` until the mean drift over a window,
/// `max |ρ(t + w) − ρ(t)| / w`, falls below `residual_tol`.
///
/// The instantaneous `L(ρ)` is not used as the stopping test because the
/// explicit integrator keeps stiff components at the level of its absolute
/// tolerance, which the largest rates amplify.
pub fn steady_state_propagated(
    gen: &Generator,
    rho0: &DensityOperator,
    opts: &PropagationOptions,
) -> Result<DensityOperator> {
    rho0.validate()?;
    let (prop, y0) = Propagator::new(gen, rho0);
    let mut f = prop.rhs();
    let mut solver = Dopri5::new(0.0, y0, opts.ode);
    let mut window = 0.5;
    loop {
        let before = solver.y.clone();
        let t_next = (solver.t + window).min(opts.t_max);
        let t_prev = solver.t;
        solver.advance_to(&mut f, t_next)?;
        let change = before.iter().zip(&solver.y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let drift = change / (solver.t - t_prev).max(f64::MIN_POSITIVE);
        if drift <= opts.residual_tol {
            return prop.to_density(&solver.y);
        }
        if solver.t >= opts.t_max {
            return Err(SimError::Integrator {
                time: solver.t,
                reason: format!("no stationary state reached (drift {drift:.2e})"),
            });
        }
        window = (window * 1.5).min(20.0);
    }
}

/// Kernel extraction for `n ≤ 2`, long-time propagation from the coherent
/// state otherwise.
pub fn steady_state(gen: &Generator) -> Result<DensityOperator> {
    if gen.sys.n_per_ensemble <= MAX_SUPEROPERATOR_N {
        steady_state_kernel(gen)
    } else {
        steady_state_propagated(gen, &DensityOperator::coherent(&gen.sys), &PropagationOptions::default())
    }
}

/// Collective spin observables needed for the entanglement measure.
struct SpinOps {
    /// `Σ(σ + σ†)` over ensemble I, then II.
    sx_sum: [SparseOp; 2],
    /// `Σ(σ − σ†)` over ensemble I, then II.
    sa_sum: [SparseOp; 2],
    /// `Σ(σ↑↑ − σ↓↓)` over ensemble I, then II.
    pol: [SparseOp; 2],
}

fn spin_ops(sys: &SmallSystem) -> SpinOps {
    let dim = sys.dimension();
    let build = |second: bool, kind: u8| {
        let mut map = BTreeMap::new();
        for a in sys.ensemble(second) {
            let b = sys.bit(a);
            for idx in 0..dim {
                match kind {
                    0 | 1 => {
                        if idx & b != 0 {
                            let up = idx & !b;
                            // σ: (up, idx); σ†: (idx, up).
                            *map.entry((up as u32, idx as u32)).or_insert(0.0) += 1.0;
                            let s = if kind == 0 { 1.0 } else { -1.0 };
                            *map.entry((idx as u32, up as u32)).or_insert(0.0) += s;
                        }
                    }
                    _ => {
                        let v = if idx & b == 0 { 1.0 } else { -1.0 };
                        *map.entry((idx as u32, idx as u32)).or_insert(0.0) += v;
                    }
                }
            }
        }
        SparseOp::from_map(dim, map)
    };
    SpinOps {
        sx_sum: [build(false, 0), build(true, 0)],
        sa_sum: [build(false, 1), build(true, 1)],
        pol: [build(false, 2), build(true, 2)],
    }
}

/// Exact second moments in the normalisation of
/// [`crate::two_level::MomentState`]: variances of `(J_I ± J_II)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleMoments {
    /// `(|⟨J_{x,I}⟩| + |⟨J_{x,II}⟩|)/2`.
    pub mean_jx: f64,
    pub var_y_plus: f64,
    pub var_y_minus: f64,
    pub var_z_plus: f64,
    pub var_z_minus: f64,
}

impl OracleMoments {
    pub fn xi(&self) -> f64 {
        (self.var_y_plus + self.var_z_minus) / self.mean_jx
    }
}

fn moments_with(ops: &SpinOps, rho: &[f64]) -> OracleMoments {
    let dim = ops.pol[0].dim;
    let expect_sq = |op: &SparseOp| {
        // ⟨O²⟩ = Tr(O O ρ)
        let mut x = vec![0.0; dim * dim];
        op.left_mul_acc(rho, 1.0, &mut x);
        op.trace_with(&x)
    };
    let combo = |set: &[SparseOp; 2], sign: f64| SparseOp::combine(dim, &[(1.0, &set[0]), (sign, &set[1])]);
    // J_y = Σ(σ+σ†)/2 is real symmetric; J_z = iΣ(σ−σ†)/2, so J_z² = −(Σ(σ−σ†))²/4.
    let y = |sign: f64| {
        let op = combo(&ops.sx_sum, sign);
        let m = 0.5 * op.trace_with(rho);
        0.5 * (0.25 * expect_sq(&op) - m * m)
    };
    let z = |sign: f64| 0.5 * (-0.25 * expect_sq(&combo(&ops.sa_sum, sign)));
    let jx1 = 0.5 * ops.pol[0].trace_with(rho);
    let jx2 = 0.5 * ops.pol[1].trace_with(rho);
    OracleMoments {
        mean_jx: 0.5 * (jx1.abs() + jx2.abs()),
        var_y_plus: y(1.0),
        var_y_minus: y(-1.0),
        var_z_plus: z(1.0),
        var_z_minus: z(-1.0),
    }
}

/// Exact collective-spin moments of `ρ`.
pub fn oracle_moments(rho: &DensityOperator) -> OracleMoments {
    moments_with(&spin_ops(&rho.sys), &rho.data)
}

/// Exact entanglement measure of `ρ`.
pub fn xi_of_density(rho: &DensityOperator) -> Result<EntanglementReport> {
    rho.validate()?;
    let m = oracle_moments(rho);
    // var(J_{y,I}+J_{y,II}) + var(J_{z,I}−J_{z,II}) = 2(var J_{y,+} + var J_{z,−}).
    EntanglementReport::new(2.0 * (m.var_y_plus + m.var_z_minus), m.mean_jx)
}

/// Instantaneous `dξ/dt` of `ρ` under the generator `gen`.
pub fn xi_rate(gen: &Generator, rho: &DensityOperator) -> Result<f64> {
    let ops = spin_ops(&rho.sys);
    let m = moments_with(&ops, &rho.data);
    if m.mean_jx < 1e-12 {
        return Err(SimError::domain("longitudinal spin vanishes; the entanglement measure is undefined"));
    }
    let drho = gen.apply_alloc(&rho.data);
    // Means vanish for real symmetric states, so the variances are linear in ρ.
    let dm = moments_with(&ops, &drho);
    let jx1 = 0.5 * ops.pol[0].trace_with(&rho.data);
    let jx2 = 0.5 * ops.pol[1].trace_with(&rho.data);
    let djx = 0.5 * (jx1.signum() * 0.5 * ops.pol[0].trace_with(&drho) + jx2.signum() * 0.5 * ops.pol[1].trace_with(&drho));
    let num = m.var_y_plus + m.var_z_minus;
    let dnum = dm.var_y_plus + dm.var_z_minus;
    Ok(dnum / m.mean_jx - num * djx / (m.mean_jx * m.mean_jx))
}

/// `‖P ρ Pᵀ − ρ‖_max` for the swap of the first two atoms of an ensemble.
pub fn swap_asymmetry(rho: &DensityOperator, second_ensemble: bool) -> f64 {
    let sys = rho.sys;
    if sys.n_per_ensemble < 2 {
        return 0.0;
    }
    let first = sys.ensemble(second_ensemble).start;
    let (b1, b2) = (sys.bit(first), sys.bit(first + 1));
    let perm = |i: usize| {
        let (x, y) = (i & b1 != 0, i & b2 != 0);
        let mut j = i & !(b1 | b2);
        if x {
            j |= b2;
        }
        if y {
            j |= b1;
        }
        j
    };
    let n = sys.dimension();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((rho.data[perm(i) * n + perm(j)] - rho.data[i * n + j]).abs());
        }
    }
    worst
}

/// One row of a finite-size study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub xi_oracle: f64,
    pub xi_formula: f64,
    pub deviation: f64,
}

/// Oracle versus large-`N` formula for several ensemble sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Whether the deviations are non-increasing in `n`.
    pub monotone: bool,
}

pub fn finite_n_convergence_study(
    params: &SqueezingParams,
    rates: &NoiseRates,
    d: f64,
    n_list: &[usize],
) -> Result<ConvergenceStudy> {
    if n_list.iter().any(|&n| n == 0 || n > 4) {
        return Err(SimError::domain("convergence study supports 1..=4 atoms per ensemble"));
    }
    let xi_formula = xi_steady(d, params, rates)?;
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let sys = SmallSystem::new(n)?;
        let gen = build_generator(&sys, d, params, rates, &ChannelFlags::default())?;
        let rho = steady_state(&gen)?;
        let xi_oracle = xi_of_density(&rho)?.xi;
        rows.push(ConvergenceRow { n, xi_oracle, xi_formula, deviation: (xi_oracle - xi_formula).abs() });
    }
    let monotone = rows.windows(2).all(|w| w[1].deviation <= w[0].deviation);
    Ok(ConvergenceStudy { rows, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_core::squeezing_from_z;

    #[test]
    fn sparse_products_match_dense() {
        let sys = SmallSystem::new(1).unwrap();
        let a = lowering(&sys, 0);
        let b = lowering(&sys, 1).transpose();
        let ab = a.compose(&b).to_dense();
        assert!((ab - a.to_dense() * b.to_dense()).abs().max() < 1e-15);
    }

    #[test]
    fn packed_apply_matches_full() {
        let sys = SmallSystem::new(2).unwrap();
        let p = squeezing_from_z(1.7).unwrap();
        let rates = NoiseRates::new(0.8, 0.2, 0.5);
        let flags = ChannelFlags { collective_cd: true, ..ChannelFlags::default() };
        let gen = build_generator(&sys, 4.0, &p, &rates, &flags).unwrap();
        let dim = sys.dimension();
        // A block-diagonal (in D) test matrix with distinct entries.
        let bl = &gen.packed.blocks;
        let mut full = vec![0.0; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                if bl.block_of[r] == bl.block_of[c] {
                    full[r * dim + c] = 1.0 + (r * 7 + c * 3) as f64 * 0.01;
                }
            }
        }
        let mut want = vec![0.0; dim * dim];
        gen.apply(&full, &mut want);
        let packed = bl.pack(&full).unwrap();
        let mut got = vec![0.0; packed.len()];
        let mut scratch = vec![0.0; gen.packed.scratch_len()];
        gen.packed.apply(&packed, &mut got, &mut scratch);
        let got = bl.unpack(&got);
        let err = want.iter().zip(&got).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-12, "max deviation {err}");
    }

    #[test]
    fn generator_is_trace_preserving() {
        let sys = SmallSystem::new(1).unwrap();
        let p = squeezing_from_z(2.0).unwrap();
        let rates = NoiseRates::new(1.0, 0.3, 0.7);
        let flags = ChannelFlags { collective_cd: true, ..ChannelFlags::default() };
        let s = build_liouvillian(&sys, 3.0, &p, &rates, &flags).unwrap();
        let dim = sys.dimension();
        for col in 0..dim * dim {
            let tr: f64 = (0..dim).map(|i| s[(i * dim + i, col)]).sum();
            assert!(tr.abs() < 1e-12);
        }
    }

    #[test]
    fn coherent_state_has_unit_xi() {
        let sys = SmallSystem::new(2).unwrap();
        let r = xi_of_density(&DensityOperator::coherent(&sys)).unwrap();
        assert!((r.xi - 1.0).abs() < 1e-14);
    }
}
