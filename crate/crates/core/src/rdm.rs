//! Reduction of full-system eigenstates to the impurity and the per-state
//! canonical-typicality verdict.
//!
//! For eigenstate `α` the impurity RDM is diagonalized into natural
//! occupations `n_j` and orbitals `η_j`. Each orbital gets a mean-field
//! energy `ε̄_j = ⟨η_j|H_I + W_MF|η_j⟩` with `W_MF(m) = W_IB·⟨N̂_m⟩_α`, and a
//! weighted line fit of `ln n_j` against `ε̄_j` yields `β_α` (minus the
//! slope) together with its standard error `Δβ_α`. The state is then
//! compared with the Gibbs state of `H_I + W_MF` at `β_α` in trace norm.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::SpectrumResult;
use crate::error::{Error, Result};
use crate::fit::weighted_linear_fit;
use crate::model::{bath_masks, impurity_hamiltonian, ModelParams};

/// Occupations below this are treated as exact zeros.
pub const NUMERICAL_ZERO_OCCUPATION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ImpurityRdm {
    pub matrix: DMatrix<f64>,
    pub state_index: usize,
    pub parent_energy: f64,
}

impl ImpurityRdm {
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.component_mul(&self.matrix).sum()
    }
}

/// `D(m₁, m₂) = Σ_b ψ(m₁, b) ψ(m₂, b)` for a state stored impurity-site-major
/// with `psi.len() / m_sites` bath amplitudes per site.
pub fn impurity_reduction(psi: &[f64], m_sites: usize) -> DMatrix<f64> {
    let block = psi.len() / m_sites;
    let mut d = DMatrix::zeros(m_sites, m_sites);
    for a in 0..m_sites {
        let row_a = &psi[a * block..(a + 1) * block];
        for b in a..m_sites {
            let row_b = &psi[b * block..(b + 1) * block];
            let v: f64 = row_a.iter().zip(row_b).map(|(x, y)| x * y).sum();
            d[(a, b)] = v;
            d[(b, a)] = v;
        }
    }
    d
}

/// Bath-side reduction `D_B(b₁, b₂) = Σ_m ψ(m, b₁) ψ(m, b₂)`, only used to
/// cross-check the Schmidt spectrum on small systems.
pub fn bath_reduction(psi: &[f64], m_sites: usize) -> DMatrix<f64> {
    let block = psi.len() / m_sites;
    let mut d = DMatrix::zeros(block, block);
    for m in 0..m_sites {
        let row = &psi[m * block..(m + 1) * block];
        for b1 in 0..block {
            for b2 in 0..block {
                d[(b1, b2)] += row[b1] * row[b2];
            }
        }
    }
    d
}

pub fn partial_trace_bath(spectrum: &SpectrumResult, alpha: usize) -> Result<ImpurityRdm> {
    if alpha >= spectrum.dimension() {
        return Err(Error::OutOfRange {
            index: alpha,
            limit: spectrum.dimension(),
        });
    }
    Ok(ImpurityRdm {
        matrix: impurity_reduction(spectrum.eigenvector(alpha), spectrum.params.m_sites),
        state_index: alpha,
        parent_energy: spectrum.eigenvalues()[alpha],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaturalOrbitals {
    /// Descending.
    pub occupations: Vec<f64>,
    /// Column `j` is the orbital with occupation `occupations[j]`.
    pub orbitals: DMatrix<f64>,
}

pub fn natural_orbitals(d: &DMatrix<f64>) -> NaturalOrbitals {
    let eig = SymmetricEigen::new(d.clone());
    let mut order: Vec<usize> = (0..d.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let occupations = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let orbitals = DMatrix::from_columns(
        &order
            .iter()
            .map(|&j| eig.eigenvectors.column(j).into_owned())
            .collect::<Vec<_>>(),
    );
    NaturalOrbitals {
        occupations,
        orbitals,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldPotential {
    /// `ρ_B(m) = ⟨N̂_m⟩`, 0-based sites.
    pub bath_density: Vec<f64>,
    /// `W_IB · ρ_B(m)`.
    pub values: Vec<f64>,
}

/// Bath site densities of a state stored impurity-site-major over `masks`.
pub fn bath_density(psi: &[f64], m_sites: usize, masks: &[u32]) -> Vec<f64> {
    let block = masks.len();
    let mut weight = vec![0.0; block];
    for m in 0..m_sites {
        for (w, x) in weight.iter_mut().zip(&psi[m * block..(m + 1) * block]) {
            *w += x * x;
        }
    }
    let mut rho = vec![0.0; m_sites];
    for (&mask, w) in masks.iter().zip(&weight) {
        let mut bits = mask;
        while bits != 0 {
            rho[bits.trailing_zeros() as usize] += w;
            bits &= bits - 1;
        }
    }
    rho
}

pub fn mean_field_potential(spectrum: &SpectrumResult, alpha: usize) -> Result<MeanFieldPotential> {
    if alpha >= spectrum.dimension() {
        return Err(Error::OutOfRange {
            index: alpha,
            limit: spectrum.dimension(),
        });
    }
    let p = &spectrum.params;
    let masks = bath_masks(p.m_sites, p.n_bath);
    Ok(mean_field_from_density(
        bath_density(spectrum.eigenvector(alpha), p.m_sites, &masks),
        p,
    ))
}

pub fn mean_field_from_density(bath_density: Vec<f64>, params: &ModelParams) -> MeanFieldPotential {
    let values = bath_density.iter().map(|r| params.w_ib * r).collect();
    MeanFieldPotential {
        bath_density,
        values,
    }
}

/// `H_I + diag(W_MF)`.
pub fn effective_impurity_hamiltonian(params: &ModelParams, mf: &MeanFieldPotential) -> DMatrix<f64> {
    let mut h = impurity_hamiltonian(params);
    for (m, v) in mf.values.iter().enumerate() {
        h[(m, m)] += v;
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitalEnergies {
    pub energies: Vec<f64>,
    pub fluctuations: Vec<f64>,
}

/// Expectation and standard deviation of `h` in each orbital.
pub fn orbital_energies(orbitals: &DMatrix<f64>, h: &DMatrix<f64>) -> OrbitalEnergies {
    let mut energies = Vec::with_capacity(orbitals.ncols());
    let mut fluctuations = Vec::with_capacity(orbitals.ncols());
    for eta in orbitals.column_iter() {
        let h_eta = h * eta;
        let e = eta.dot(&h_eta);
        energies.push(e);
        fluctuations.push((h_eta.norm_squared() - e * e).max(0.0).sqrt());
    }
    OrbitalEnergies {
        energies,
        fluctuations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoltzmannFit {
    pub beta: f64,
    /// Standard error of the fitted exponent.
    pub beta_err: f64,
    /// Intercept of `ln n = −β ε + c`.
    pub intercept: f64,
    pub points: usize,
}

/// Weighted regression of `ln n_j` on `ε̄_j` over occupations at or above
/// `floor`, weights `n_j²`.
pub fn fit_boltzmann(occupations: &[f64], energies: &[f64], floor: f64) -> Result<BoltzmannFit> {
    let floor = floor.max(NUMERICAL_ZERO_OCCUPATION);
    let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for (&n, &e) in occupations.iter().zip(energies) {
        if n >= floor {
            x.push(e);
            y.push(n.ln());
            w.push(n * n);
        }
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} occupations above {floor:e}",
            x.len()
        )));
    }
    let line = weighted_linear_fit(&x, &y, &w)?;
    Ok(BoltzmannFit {
        beta: -line.slope,
        beta_err: line.slope_se,
        intercept: line.intercept,
        points: line.points,
    })
}

/// `exp(−β h) / Tr exp(−β h)` via the eigendecomposition of `h`.
pub fn gibbs_state(h: &DMatrix<f64>, beta: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(h.clone());
    let shift = eig
        .eigenvalues
        .iter()
        .map(|&e| beta * e)
        .fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&e| (-(beta * e - shift)).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    let diag = DVector::from_iterator(weights.len(), weights.iter().map(|w| w / z));
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&diag) * v.transpose()
}

/// Trace norm `Σ |λ(a − b)|`.
pub fn trace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    let diff = a - b;
    Ok(diff.symmetric_eigenvalues().iter().map(|l| l.abs()).sum())
}

/// `C(Δm) = Σ_{m=1}^{M_s−Δm} D(m, m+Δm)`.
pub fn site_correlation(d: &DMatrix<f64>, offset: usize) -> Result<f64> {
    let m = d.nrows();
    if offset >= m {
        return Err(Error::OutOfRange {
            index: offset,
            limit: m,
        });
    }
    Ok((0..m - offset).map(|i| d[(i, i + offset)]).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdmOptions {
    /// Natural occupations below this are left out of the Boltzmann fit.
    #[serde(default = "default_floor")]
    pub occupation_floor: f64,
}

fn default_floor() -> f64 {
    NUMERICAL_ZERO_OCCUPATION
}

impl Default for RdmOptions {
    fn default() -> Self {
        Self {
            occupation_floor: default_floor(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVerdict {
    pub alpha: usize,
    pub energy: f64,
    /// `None` when fewer than three occupations survive the floor.
    pub fit: Option<BoltzmannFit>,
    pub gibbs_distance: Option<f64>,
    pub rdm_trace: f64,
    pub rdm_min_eigenvalue: f64,
}

impl StateVerdict {
    pub fn beta(&self) -> Option<f64> {
        self.fit.map(|f| f.beta)
    }

    pub fn beta_err(&self) -> Option<f64> {
        self.fit.map(|f| f.beta_err)
    }

    pub fn n_orbitals_used(&self) -> usize {
        self.fit.map_or(0, |f| f.points)
    }

    pub fn spread(&self, kind: BetaSpread) -> Option<f64> {
        self.fit.map(|f| kind.of(&f))
    }

    /// `Δβ ≤ threshold` with `Δβ` the slope standard error. Unfittable
    /// states never count as canonical.
    pub fn is_canonical(&self, threshold: f64) -> bool {
        self.passes(threshold, BetaSpread::StdError)
    }

    pub fn passes(&self, threshold: f64, kind: BetaSpread) -> bool {
        self.spread(kind).is_some_and(|d| d <= threshold)
    }
}

/// Fit statistic compared against the canonical threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BetaSpread {
    /// Standard error of the fitted exponent.
    #[default]
    StdError,
    /// Its square, the variance of the fitted exponent.
    Variance,
}

impl BetaSpread {
    pub fn of(&self, fit: &BoltzmannFit) -> f64 {
        match self {
            BetaSpread::StdError => fit.beta_err,
            BetaSpread::Variance => fit.beta_err * fit.beta_err,
        }
    }
}

/// Everything derived from one eigenstate, for dumps and plots.
#[derive(Debug, Clone, PartialEq)]
pub struct StateAnalysis {
    pub rdm: ImpurityRdm,
    pub orbitals: NaturalOrbitals,
    pub mean_field: MeanFieldPotential,
    pub orbital_energies: OrbitalEnergies,
    pub gibbs: Option<DMatrix<f64>>,
    pub verdict: StateVerdict,
}

/// Per-spectrum data shared by all state analyses.
struct Shared {
    params: ModelParams,
    masks: Vec<u32>,
    h_imp: DMatrix<f64>,
}

impl Shared {
    fn new(params: &ModelParams) -> Self {
        Self {
            params: *params,
            masks: bath_masks(params.m_sites, params.n_bath),
            h_imp: impurity_hamiltonian(params),
        }
    }

    fn analyze(&self, spectrum: &SpectrumResult, alpha: usize, options: &RdmOptions) -> StateAnalysis {
        let m = self.params.m_sites;
        let psi = spectrum.eigenvector(alpha);
        let rdm = ImpurityRdm {
            matrix: impurity_reduction(psi, m),
            state_index: alpha,
            parent_energy: spectrum.eigenvalues()[alpha],
        };
        let orbitals = natural_orbitals(&rdm.matrix);
        let mean_field = mean_field_from_density(bath_density(psi, m, &self.masks), &self.params);
        let mut h = self.h_imp.clone();
        for (i, v) in mean_field.values.iter().enumerate() {
            h[(i, i)] += v;
        }
        let energies = orbital_energies(&orbitals.orbitals, &h);
        let fit = fit_boltzmann(&orbitals.occupations, &energies.energies, options.occupation_floor).ok();
        let gibbs = fit.map(|f| gibbs_state(&h, f.beta));
        let gibbs_distance = gibbs
            .as_ref()
            .map(|g| trace_distance(&rdm.matrix, g).expect("same shape"));
        let verdict = StateVerdict {
            alpha,
            energy: rdm.parent_energy,
            fit,
            gibbs_distance,
            rdm_trace: rdm.trace(),
            rdm_min_eigenvalue: *orbitals.occupations.last().unwrap(),
        };
        StateAnalysis {
            rdm,
            orbitals,
            mean_field,
            orbital_energies: energies,
            gibbs,
            verdict,
        }
    }
}

pub fn analyze_state(spectrum: &SpectrumResult, alpha: usize, options: &RdmOptions) -> Result<StateAnalysis> {
    if alpha >= spectrum.dimension() {
        return Err(Error::OutOfRange {
            index: alpha,
            limit: spectrum.dimension(),
        });
    }
    Ok(Shared::new(&spectrum.params).analyze(spectrum, alpha, options))
}

/// Verdicts for the given states, computed in parallel and returned sorted
/// by `α`.
pub fn analyze_states(
    spectrum: &SpectrumResult,
    states: impl IntoIterator<Item = usize>,
    options: &RdmOptions,
) -> Result<Vec<StateVerdict>> {
    let states: Vec<usize> = states.into_iter().collect();
    if let Some(&bad) = states.iter().find(|&&a| a >= spectrum.dimension()) {
        return Err(Error::OutOfRange {
            index: bad,
            limit: spectrum.dimension(),
        });
    }
    let shared = Shared::new(&spectrum.params);
    let mut verdicts: Vec<StateVerdict> = states
        .par_iter()
        .map(|&alpha| shared.analyze(spectrum, alpha, options).verdict)
        .collect();
    verdicts.sort_by_key(|v| v.alpha);
    Ok(verdicts)
}
