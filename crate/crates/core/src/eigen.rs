//! Full dense symmetric eigendecomposition and the binary spectrum format.
//!
//! The decomposition calls LAPACK `dsyevr` (Householder tridiagonalization
//! followed by relatively robust representations), which needs roughly two
//! dense `d_H × d_H` buffers at peak.
//!
//! Spectrum file layout, all little-endian:
//!
//! ```text
//! "CTSP" | version u32 (=1) | d_H u64 | ModelParams (52 bytes)
//!        | eigenvalues d_H × f64 | eigenvectors d_H·d_H × f64, column-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{MemoryBudget, ModelParams, SparseHamiltonian, PARAMS_BYTES};

pub const MAGIC: &[u8; 4] = b"CTSP";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 4 + 4 + 8 + PARAMS_BYTES;

/// Relative residual target, scaled by the spectral radius.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    eigenvalues: Vec<f64>,
    /// Column-major `d × d`; column `α` belongs to `eigenvalues[α]`.
    eigenvectors: Vec<f64>,
    pub params: ModelParams,
    pub residual_bound: f64,
}

impl SpectrumResult {
    /// Assemble a spectrum from raw parts. Columns are reordered so the
    /// eigenvalues ascend.
    pub fn from_parts(
        eigenvalues: Vec<f64>,
        eigenvectors: Vec<f64>,
        params: ModelParams,
    ) -> Result<Self> {
        let d = eigenvalues.len();
        if eigenvectors.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: eigenvectors.len(),
            });
        }
        let sorted = eigenvalues.windows(2).all(|w| w[0] <= w[1]);
        let (eigenvalues, eigenvectors) = if sorted {
            (eigenvalues, eigenvectors)
        } else {
            let mut order: Vec<usize> = (0..d).collect();
            order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
            let vals = order.iter().map(|&i| eigenvalues[i]).collect();
            let mut vecs = Vec::with_capacity(d * d);
            for &i in &order {
                vecs.extend_from_slice(&eigenvectors[i * d..(i + 1) * d]);
            }
            (vals, vecs)
        };
        let residual_bound = residual_bound_for(&eigenvalues);
        Ok(Self {
            eigenvalues,
            eigenvectors,
            params,
            residual_bound,
        })
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &[f64] {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, alpha: usize) -> &[f64] {
        let d = self.dimension();
        &self.eigenvectors[alpha * d..(alpha + 1) * d]
    }

    /// Mutable access to the raw eigenvector storage.
    pub fn eigenvectors_mut(&mut self) -> &mut [f64] {
        &mut self.eigenvectors
    }

    pub fn eigenvalues_mut(&mut self) -> &mut [f64] {
        &mut self.eigenvalues
    }
}

fn residual_bound_for(eigenvalues: &[f64]) -> f64 {
    let radius = eigenvalues.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    RESIDUAL_TOLERANCE * radius.max(1.0)
}

fn solver_error(h: &SparseHamiltonian, reason: impl Into<String>) -> Error {
    Error::Eigensolver {
        dimension: h.dimension(),
        params: format!("{:?}", h.params),
        reason: reason.into(),
    }
}

/// Call `dsyevr` on a dense column-major matrix. Returns eigenvalues and,
/// when `vectors` is set, the eigenvector matrix.
fn dsyevr(n: usize, mut a: Vec<f64>, vectors: bool) -> std::result::Result<(Vec<f64>, Vec<f64>), String> {
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let ni = i32::try_from(n).map_err(|_| format!("dimension {n} exceeds LAPACK index range"))?;
    let jobz = if vectors { b'V' } else { b'N' } as std::os::raw::c_char;
    let range = b'A' as std::os::raw::c_char;
    let uplo = b'U' as std::os::raw::c_char;
    let zero = 0.0f64;
    let izero = 0i32;
    let mut found = 0i32;
    let mut w = vec![0.0f64; n];
    let mut z = if vectors { vec![0.0f64; n * n] } else { vec![0.0f64; 1] };
    let ldz = if vectors { ni } else { 1 };
    let mut isuppz = vec![0i32; 2 * n];
    let mut info = 0i32;

    let mut work_query = [0.0f64];
    let mut iwork_query = [0i32];
    // SAFETY: every pointer refers to a live buffer of the size LAPACK
    // documents for these arguments; the workspace query writes only to
    // the first element of work/iwork.
    unsafe {
        lapack_sys::dsyevr_(
            &jobz, &range, &uplo, &ni, a.as_mut_ptr(), &ni, &zero, &zero, &izero, &izero,
            &zero, &mut found, w.as_mut_ptr(), z.as_mut_ptr(), &ldz, isuppz.as_mut_ptr(),
            work_query.as_mut_ptr(), &-1, iwork_query.as_mut_ptr(), &-1, &mut info,
        );
    }
    if info != 0 {
        return Err(format!("dsyevr workspace query returned info={info}"));
    }
    let lwork = work_query[0] as i32;
    let liwork = iwork_query[0];
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    // SAFETY: as above, with workspaces sized by the query.
    unsafe {
        lapack_sys::dsyevr_(
            &jobz, &range, &uplo, &ni, a.as_mut_ptr(), &ni, &zero, &zero, &izero, &izero,
            &zero, &mut found, w.as_mut_ptr(), z.as_mut_ptr(), &ldz, isuppz.as_mut_ptr(),
            work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(format!("dsyevr returned info={info}"));
    }
    if found != ni {
        return Err(format!("dsyevr found {found} of {n} eigenvalues"));
    }
    Ok((w, if vectors { z } else { Vec::new() }))
}

/// Complete eigendecomposition. The residual of every eigenpair is checked
/// against [`SpectrumResult::residual_bound`] before returning.
pub fn diagonalize(h: &SparseHamiltonian, budget: MemoryBudget) -> Result<SpectrumResult> {
    let n = h.dimension();
    budget.check_dense(n)?;
    let (w, z) = dsyevr(n, h.to_dense(), true).map_err(|r| solver_error(h, r))?;
    let spectrum = SpectrumResult::from_parts(w, z, h.params)?;
    let residual = max_residual(h, &spectrum);
    if !(residual <= spectrum.residual_bound) {
        return Err(solver_error(
            h,
            format!(
                "max residual {residual:e} exceeds bound {:e}",
                spectrum.residual_bound
            ),
        ));
    }
    Ok(spectrum)
}

/// Eigenvalues only, ascending.
pub fn eigenvalues_only(h: &SparseHamiltonian, budget: MemoryBudget) -> Result<Vec<f64>> {
    budget.check_dense(h.dimension())?;
    let (w, _) = dsyevr(h.dimension(), h.to_dense(), false).map_err(|r| solver_error(h, r))?;
    Ok(w)
}

fn max_residual(h: &SparseHamiltonian, s: &SpectrumResult) -> f64 {
    let d = s.dimension();
    let mut hv = vec![0.0; d];
    let mut worst = 0.0f64;
    for alpha in 0..d {
        let v = s.eigenvector(alpha);
        h.apply_into(v, &mut hv);
        let e = s.eigenvalues[alpha];
        let r: f64 = hv.iter().zip(v).map(|(a, b)| (a - e * b).powi(2)).sum();
        worst = worst.max(r.sqrt());
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumReport {
    /// `max_α ‖H v_α − E_α v_α‖`.
    pub max_residual: f64,
    /// `max_{αβ} |⟨v_α|v_β⟩ − δ_{αβ}|`.
    pub orthonormality_defect: f64,
    /// `|Σ E_α − Tr H|`.
    pub trace_defect: f64,
    /// `|Σ E_α² − ‖H‖_F²|`.
    pub frobenius_defect: f64,
}

/// Check a decomposition against its Hamiltonian. Cost is `O(d³)`.
pub fn verify_spectrum(h: &SparseHamiltonian, s: &SpectrumResult) -> Result<SpectrumReport> {
    let d = h.dimension();
    if s.dimension() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: s.dimension(),
        });
    }
    let v = DMatrix::from_column_slice(d, d, &s.eigenvectors);
    let gram = v.tr_mul(&v);
    let mut ortho = 0.0f64;
    for c in 0..d {
        for r in 0..d {
            let target = if r == c { 1.0 } else { 0.0 };
            ortho = ortho.max((gram[(r, c)] - target).abs());
        }
    }
    let sum: f64 = s.eigenvalues.iter().sum();
    let sum_sq: f64 = s.eigenvalues.iter().map(|e| e * e).sum();
    Ok(SpectrumReport {
        max_residual: max_residual(h, s),
        orthonormality_defect: ortho,
        trace_defect: (sum - h.trace()).abs(),
        frobenius_defect: (sum_sq - h.frobenius_norm_sq()).abs(),
    })
}

pub fn save_spectrum(s: &SpectrumResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::with_capacity(1 << 20, File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(s.dimension() as u64).to_le_bytes())?;
    out.write_all(&s.params.to_le_bytes())?;
    write_f64s(&mut out, &s.eigenvalues)?;
    write_f64s(&mut out, &s.eigenvectors)?;
    out.flush()?;
    Ok(())
}

fn write_f64s(out: &mut impl Write, values: &[f64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(8 * 4096);
    for chunk in values.chunks(4096) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

fn read_f64s(input: &mut impl Read, count: usize, path: &Path) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(count);
    let mut buf = vec![0u8; 8 * 4096];
    let mut remaining = count;
    while remaining > 0 {
        let take = remaining.min(4096);
        input
            .read_exact(&mut buf[..8 * take])
            .map_err(|_| truncated(path))?;
        values.extend(
            buf[..8 * take]
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap())),
        );
        remaining -= take;
    }
    Ok(values)
}

fn truncated(path: &Path) -> Error {
    Error::SpectrumFormat {
        path: path.to_path_buf(),
        reason: "truncated file".into(),
    }
}

/// Read only the header of a spectrum file.
pub fn read_header(path: impl AsRef<Path>) -> Result<(usize, ModelParams)> {
    let path = path.as_ref();
    let mut input = BufReader::new(File::open(path)?);
    read_header_from(&mut input, path)
}

fn read_header_from(input: &mut impl Read, path: &Path) -> Result<(usize, ModelParams)> {
    let mut header = [0u8; HEADER_BYTES];
    input.read_exact(&mut header).map_err(|_| truncated(path))?;
    if &header[..4] != MAGIC {
        return Err(Error::SpectrumFormat {
            path: path.to_path_buf(),
            reason: "bad magic number".into(),
        });
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let d = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let params = ModelParams::from_le_bytes(header[16..].try_into().unwrap());
    params.validate()?;
    if params.dimension() != d {
        return Err(Error::SpectrumFormat {
            path: path.to_path_buf(),
            reason: format!("header dimension {d} disagrees with parameters ({})", params.dimension()),
        });
    }
    Ok((d, params))
}

fn open_checked(path: &Path) -> Result<(BufReader<File>, usize, ModelParams)> {
    let file = File::open(path)?;
    let len = file.metadata()?.len();
    let mut input = BufReader::with_capacity(1 << 20, file);
    let (d, params) = read_header_from(&mut input, path)?;
    let expected = HEADER_BYTES as u64 + 8 * (d as u64 + (d as u64) * (d as u64));
    if len < expected {
        return Err(truncated(path));
    }
    if len > expected {
        return Err(Error::SpectrumFormat {
            path: path.to_path_buf(),
            reason: format!("{} trailing bytes", len - expected),
        });
    }
    Ok((input, d, params))
}

pub fn load_spectrum(path: impl AsRef<Path>) -> Result<SpectrumResult> {
    let path = path.as_ref();
    let (mut input, d, params) = open_checked(path)?;
    let eigenvalues = read_f64s(&mut input, d, path)?;
    let eigenvectors = read_f64s(&mut input, d * d, path)?;
    let residual_bound = residual_bound_for(&eigenvalues);
    Ok(SpectrumResult {
        eigenvalues,
        eigenvectors,
        params,
        residual_bound,
    })
}

/// Read the parameters and eigenvalues without the eigenvector block.
pub fn load_eigenvalues(path: impl AsRef<Path>) -> Result<(ModelParams, Vec<f64>)> {
    let path = path.as_ref();
    let (mut input, d, params) = open_checked(path)?;
    Ok((params, read_f64s(&mut input, d, path)?))
}

/// Load and require the stored parameters to equal `expected`.
pub fn load_spectrum_expecting(path: impl AsRef<Path>, expected: &ModelParams) -> Result<SpectrumResult> {
    let (_, params) = read_header(path.as_ref())?;
    if params != *expected {
        return Err(Error::ParamsMismatch);
    }
    load_spectrum(path)
}
