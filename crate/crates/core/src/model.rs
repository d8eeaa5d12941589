//! Fock basis and Hamiltonian assembly for a single distinguishable impurity
//! hopping on an open chain that also hosts `N_B` spin-polarized bath fermions.
//!
//! The total Hamiltonian is `H = H_I + H_B + H_IB` with
//!
//! ```text
//! H_I  = -J_I Σ_j (a†_{j+1} a_j + h.c.) + Σ_j V(j) n_j
//! H_B  = -J_B Σ_j (b†_{j+1} b_j + h.c.) + W_BB Σ_j N_{j+1} N_j + Σ_j V(j) N_j
//! H_IB =  W_IB Σ_j n_j N_j
//! ```
//!
//! on `M_s` sites with Dirichlet boundaries. `V(j)` is a weak polynomial tilt
//! that lifts the reflection degeneracy.
//!
//! Basis states are ordered impurity-site-major, bath mask ascending as an
//! integer inside each site block, so that the amplitudes belonging to one
//! impurity site form a contiguous slice of length `C(M_s, N_B)`.
//!
//! Bath hops only ever move a fermion between neighbouring sites `j` and
//! `j+1`. No other occupied mode lies between them in the site ordering, so
//! the Jordan-Wigner string is empty and every hopping amplitude is exactly
//! `-J_B`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Largest chain supported by the `u32` occupation masks.
pub const MAX_SITES: usize = 31;

/// Byte length of [`ModelParams::to_le_bytes`].
pub const PARAMS_BYTES: usize = 52;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub m_sites: usize,
    pub n_bath: usize,
    #[serde(default = "unit")]
    pub j_imp: f64,
    #[serde(default = "unit")]
    pub j_bath: f64,
    pub w_bb: f64,
    pub w_ib: f64,
    #[serde(default = "default_tilt_exponent")]
    pub tilt_exponent: u32,
    #[serde(default = "default_tilt_amplitude")]
    pub tilt_amplitude: f64,
}

fn unit() -> f64 {
    1.0
}

fn default_tilt_exponent() -> u32 {
    2
}

fn default_tilt_amplitude() -> f64 {
    0.01
}

impl ModelParams {
    /// Unit hoppings, quadratic tilt of amplitude 0.01.
    pub fn new(m_sites: usize, n_bath: usize, w_bb: f64, w_ib: f64) -> Self {
        Self {
            m_sites,
            n_bath,
            j_imp: 1.0,
            j_bath: 1.0,
            w_bb,
            w_ib,
            tilt_exponent: default_tilt_exponent(),
            tilt_amplitude: default_tilt_amplitude(),
        }
    }

    pub fn with_tilt(mut self, exponent: u32, amplitude: f64) -> Self {
        self.tilt_exponent = exponent;
        self.tilt_amplitude = amplitude;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_sites < 2 {
            return Err(Error::InvalidParams(format!(
                "m_sites must be at least 2, got {}",
                self.m_sites
            )));
        }
        if self.m_sites > MAX_SITES {
            return Err(Error::InvalidParams(format!(
                "m_sites must be at most {MAX_SITES}, got {}",
                self.m_sites
            )));
        }
        if self.n_bath > self.m_sites {
            return Err(Error::InvalidParams(format!(
                "n_bath ({}) exceeds m_sites ({})",
                self.n_bath, self.m_sites
            )));
        }
        if !matches!(self.tilt_exponent, 1 | 2) {
            return Err(Error::InvalidParams(format!(
                "tilt_exponent must be 1 or 2, got {}",
                self.tilt_exponent
            )));
        }
        let reals = [
            ("j_imp", self.j_imp),
            ("j_bath", self.j_bath),
            ("w_bb", self.w_bb),
            ("w_ib", self.w_ib),
            ("tilt_amplitude", self.tilt_amplitude),
        ];
        for (name, value) in reals {
            if !value.is_finite() {
                return Err(Error::InvalidParams(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    /// Dimension of the bath space, `C(M_s, N_B)`.
    pub fn bath_dimension(&self) -> usize {
        binomial(self.m_sites, self.n_bath) as usize
    }

    /// Dimension of the full space, `M_s · C(M_s, N_B)`.
    pub fn dimension(&self) -> usize {
        self.m_sites * self.bath_dimension()
    }

    /// Fixed-order little-endian encoding used by the spectrum file header:
    /// m_sites u32, n_bath u32, j_imp, j_bath, w_bb, w_ib (f64),
    /// tilt_exponent u32, tilt_amplitude f64.
    pub fn to_le_bytes(&self) -> [u8; PARAMS_BYTES] {
        let mut out = [0u8; PARAMS_BYTES];
        let mut at = 0;
        let mut put = |bytes: &[u8]| {
            out[at..at + bytes.len()].copy_from_slice(bytes);
            at += bytes.len();
        };
        put(&(self.m_sites as u32).to_le_bytes());
        put(&(self.n_bath as u32).to_le_bytes());
        put(&self.j_imp.to_le_bytes());
        put(&self.j_bath.to_le_bytes());
        put(&self.w_bb.to_le_bytes());
        put(&self.w_ib.to_le_bytes());
        put(&self.tilt_exponent.to_le_bytes());
        put(&self.tilt_amplitude.to_le_bytes());
        out
    }

    pub fn from_le_bytes(bytes: &[u8; PARAMS_BYTES]) -> Self {
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        Self {
            m_sites: u32_at(0) as usize,
            n_bath: u32_at(4) as usize,
            j_imp: f64_at(8),
            j_bath: f64_at(16),
            w_bb: f64_at(24),
            w_ib: f64_at(32),
            tilt_exponent: u32_at(40),
            tilt_amplitude: f64_at(44),
        }
    }

    /// SHA-256 of the fixed-order encoding, hex encoded. Used as a cache key.
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_le_bytes()))
    }
}

/// Upper bound on the bytes needed to densify and diagonalize a matrix:
/// the dense input plus the eigenvector matrix.
pub fn dense_bytes(dimension: usize) -> u64 {
    2 * (dimension as u64) * (dimension as u64) * 8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryBudget {
    pub bytes: u64,
}

impl MemoryBudget {
    pub const DEFAULT_GIB: f64 = 8.0;

    pub fn from_gib(gib: f64) -> Self {
        Self {
            bytes: (gib * (1u64 << 30) as f64) as u64,
        }
    }

    pub fn check_dense(&self, dimension: usize) -> Result<()> {
        let required = dense_bytes(dimension);
        if required > self.bytes {
            return Err(Error::Capacity {
                dimension,
                required_bytes: required,
                budget_bytes: self.bytes,
            });
        }
        Ok(())
    }
}

impl Default for MemoryBudget {
    fn default() -> Self {
        Self::from_gib(Self::DEFAULT_GIB)
    }
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// Tilt potential `V(j) = A·[-1/2 + (j-1)^n / (M_s-1)^n]` for 1-based `site`.
pub fn external_potential(site: usize, params: &ModelParams) -> f64 {
    debug_assert!(site >= 1 && site <= params.m_sites);
    let n = params.tilt_exponent as i32;
    let x = (site - 1) as f64;
    let span = (params.m_sites - 1) as f64;
    params.tilt_amplitude * (-0.5 + x.powi(n) / span.powi(n))
}

/// Tilt values for all sites, 0-based.
fn potential_table(params: &ModelParams) -> Vec<f64> {
    (1..=params.m_sites)
        .map(|j| external_potential(j, params))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisState {
    /// 1-based impurity position.
    pub impurity_site: usize,
    /// Bit `j` set means bath fermion on site `j + 1`.
    pub bath_mask: u32,
}

/// All bath occupation masks with `n_bath` set bits out of `m_sites`,
/// ascending as integers.
pub fn bath_masks(m_sites: usize, n_bath: usize) -> Vec<u32> {
    let count = binomial(m_sites, n_bath) as usize;
    let mut masks = Vec::with_capacity(count);
    if n_bath == 0 {
        masks.push(0);
        return masks;
    }
    // Gosper's hack walks fixed-popcount integers in increasing order.
    let mut mask: u64 = (1u64 << n_bath) - 1;
    let limit = 1u64 << m_sites;
    while mask < limit {
        masks.push(mask as u32);
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    masks
}

/// Rank of a fixed-popcount mask among [`bath_masks`] via the combinatorial
/// number system.
#[derive(Debug, Clone)]
pub struct MaskRanker {
    table: Vec<Vec<u64>>,
}

impl MaskRanker {
    pub fn new(m_sites: usize) -> Self {
        let table = (0..=m_sites)
            .map(|n| (0..=m_sites).map(|k| binomial(n, k)).collect())
            .collect();
        Self { table }
    }

    pub fn rank(&self, mut mask: u32) -> usize {
        let mut rank = 0u64;
        let mut k = 1;
        while mask != 0 {
            let pos = mask.trailing_zeros() as usize;
            rank += self.table[pos][k];
            k += 1;
            mask &= mask - 1;
        }
        rank as usize
    }
}

#[derive(Debug, Clone)]
pub struct FockBasis {
    m_sites: usize,
    n_bath: usize,
    masks: Vec<u32>,
    ranker: MaskRanker,
}

impl FockBasis {
    pub fn m_sites(&self) -> usize {
        self.m_sites
    }

    pub fn n_bath(&self) -> usize {
        self.n_bath
    }

    pub fn dimension(&self) -> usize {
        self.m_sites * self.masks.len()
    }

    pub fn bath_dimension(&self) -> usize {
        self.masks.len()
    }

    pub fn bath_masks(&self) -> &[u32] {
        &self.masks
    }

    pub fn state(&self, index: usize) -> BasisState {
        let block = self.masks.len();
        BasisState {
            impurity_site: index / block + 1,
            bath_mask: self.masks[index % block],
        }
    }

    /// Inverse of [`FockBasis::state`]; `None` if the state is not in the basis.
    pub fn index_of(&self, state: BasisState) -> Option<usize> {
        if state.impurity_site == 0
            || state.impurity_site > self.m_sites
            || state.bath_mask.count_ones() as usize != self.n_bath
            || (state.bath_mask as u64) >> self.m_sites != 0
        {
            return None;
        }
        Some((state.impurity_site - 1) * self.masks.len() + self.ranker.rank(state.bath_mask))
    }

    pub fn states(&self) -> impl Iterator<Item = BasisState> + '_ {
        (0..self.dimension()).map(move |i| self.state(i))
    }
}

/// Enumerate the full basis, refusing dimensions whose dense decomposition
/// would not fit in `budget`.
pub fn enumerate_basis(params: &ModelParams, budget: MemoryBudget) -> Result<FockBasis> {
    params.validate()?;
    budget.check_dense(params.dimension())?;
    Ok(FockBasis {
        m_sites: params.m_sites,
        n_bath: params.n_bath,
        masks: bath_masks(params.m_sites, params.n_bath),
        ranker: MaskRanker::new(params.m_sites),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HamiltonianKind {
    /// Impurity plus bath plus coupling on the full space.
    Full,
    /// Bath alone on the `C(M_s, N_B)` space.
    Bath,
}

/// Real symmetric sparse matrix stored as the upper triangle (diagonal
/// included) in compressed-row form.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    dimension: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    pub params: ModelParams,
    pub kind: HamiltonianKind,
}

impl SparseHamiltonian {
    fn from_rows(
        rows: Vec<Vec<(usize, f64)>>,
        params: ModelParams,
        kind: HamiltonianKind,
    ) -> Self {
        let dimension = rows.len();
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(dimension + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                cols.push(c);
                values.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            dimension,
            row_ptr,
            cols,
            values,
            params,
            kind,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Stored (upper-triangle) entries.
    pub fn stored_entries(&self) -> usize {
        self.values.len()
    }

    /// Iterate the stored upper triangle as `(row, col, value)` with `col >= row`.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dimension).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.values[k]))
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dimension];
        for (r, c, v) in self.upper_entries() {
            if r == c {
                d[r] += v;
            }
        }
        d
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.upper_entries()
            .map(|(r, c, v)| if r == c { v * v } else { 2.0 * v * v })
            .sum()
    }

    /// Gershgorin bound on the spectral radius.
    pub fn spectral_radius_bound(&self) -> f64 {
        let mut row_sums = vec![0.0; self.dimension];
        for (r, c, v) in self.upper_entries() {
            row_sums[r] += v.abs();
            if r != c {
                row_sums[c] += v.abs();
            }
        }
        row_sums.into_iter().fold(0.0, f64::max)
    }

    /// Number of off-diagonal non-zeros in each full row.
    pub fn off_diagonal_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.dimension];
        for (r, c, v) in self.upper_entries() {
            if r != c && v != 0.0 {
                counts[r] += 1;
                counts[c] += 1;
            }
        }
        counts
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.dimension];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// `out = H v` without a length check.
    pub(crate) fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for r in 0..self.dimension {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                let h = self.values[k];
                acc += h * v[c];
                if c != r {
                    out[c] += h * v[r];
                }
            }
            out[r] += acc;
        }
    }

    /// Full symmetric dense copy, column-major.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dimension;
        let mut a = vec![0.0; n * n];
        for (r, c, v) in self.upper_entries() {
            a[c * n + r] = v;
            a[r * n + c] = v;
        }
        a
    }
}

fn bath_diagonal(mask: u32, potential: &[f64], params: &ModelParams) -> f64 {
    let mut e = params.w_bb * (mask & (mask >> 1)).count_ones() as f64;
    let mut m = mask;
    while m != 0 {
        e += potential[m.trailing_zeros() as usize];
        m &= m - 1;
    }
    e
}

/// Masks reachable by moving one bath fermion one site to the right.
fn right_hops(mask: u32, m_sites: usize) -> impl Iterator<Item = u32> {
    (0..m_sites - 1).filter_map(move |j| {
        let here = 1u32 << j;
        let there = 1u32 << (j + 1);
        (mask & here != 0 && mask & there == 0).then_some(mask ^ here ^ there)
    })
}

pub fn build_hamiltonian(basis: &FockBasis, params: &ModelParams) -> Result<SparseHamiltonian> {
    params.validate()?;
    if basis.m_sites != params.m_sites || basis.n_bath != params.n_bath {
        return Err(Error::DimensionMismatch {
            expected: params.dimension(),
            got: basis.dimension(),
        });
    }
    let m = params.m_sites;
    let block = basis.bath_dimension();
    let potential = potential_table(params);
    let bath_diag: Vec<f64> = basis
        .masks
        .iter()
        .map(|&mask| bath_diagonal(mask, &potential, params))
        .collect();

    let mut rows = Vec::with_capacity(basis.dimension());
    for site in 0..m {
        for (b, &mask) in basis.masks.iter().enumerate() {
            let i = site * block + b;
            let mut row = Vec::with_capacity(2 + m);
            let mut diag = potential[site] + bath_diag[b];
            if mask & (1 << site) != 0 {
                diag += params.w_ib;
            }
            row.push((i, diag));
            if site + 1 < m {
                row.push((i + block, -params.j_imp));
            }
            for target in right_hops(mask, m) {
                row.push((site * block + basis.ranker.rank(target), -params.j_bath));
            }
            rows.push(row);
        }
    }
    Ok(SparseHamiltonian::from_rows(rows, *params, HamiltonianKind::Full))
}

/// Bath-only Hamiltonian on the `C(M_s, N_B)` space, tilt included.
pub fn build_bath_hamiltonian(params: &ModelParams) -> Result<SparseHamiltonian> {
    params.validate()?;
    let m = params.m_sites;
    let masks = bath_masks(m, params.n_bath);
    let ranker = MaskRanker::new(m);
    let potential = potential_table(params);
    let rows = masks
        .iter()
        .enumerate()
        .map(|(b, &mask)| {
            let mut row = vec![(b, bath_diagonal(mask, &potential, params))];
            row.extend(right_hops(mask, m).map(|t| (ranker.rank(t), -params.j_bath)));
            row
        })
        .collect();
    Ok(SparseHamiltonian::from_rows(rows, *params, HamiltonianKind::Bath))
}

/// One-body impurity matrix `H_I` in the site basis: `-J_I` on the first
/// off-diagonals and the tilt on the diagonal.
pub fn impurity_hamiltonian(params: &ModelParams) -> DMatrix<f64> {
    let m = params.m_sites;
    DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            external_potential(r + 1, params)
        } else if r.abs_diff(c) == 1 {
            -params.j_imp
        } else {
            0.0
        }
    })
}
