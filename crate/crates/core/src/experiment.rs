//! Parameter sweeps over bath-bath coupling and system size: spectral
//! statistics, ensemble curves and per-state canonical-typicality verdicts
//! for every point, plus the fits relating them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eigen::{diagonalize, eigenvalues_only, load_eigenvalues, load_spectrum_expecting, save_spectrum};
use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, spearman, LmOptions};
use crate::model::{build_bath_hamiltonian, build_hamiltonian, enumerate_basis, MemoryBudget, ModelParams};
use crate::rdm::{analyze_states, BetaSpread, RdmOptions, StateVerdict};
use crate::spectral::{
    binned_dos, dos_window, fit_brody, restricted_gap_ratios, spacing_histogram, unfold, BrodyFitResult,
    DosCurve, EnergyWindow, GapRatioStats, Polynomial, SpacingHistogram, UnfoldedSpectrum, DEFAULT_DOS_BIN,
    DEFAULT_RATIO_BIN, DEFAULT_SPACING_BIN,
};
use crate::thermo::{energy_grid, BetaCurve};

pub const DEFAULT_W_BB_GRID: [f64; 8] = [0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0];
pub const DEFAULT_THRESHOLDS: [f64; 5] = [5e-3, 7.5e-3, 1e-2, 1.25e-2, 1.5e-2];

/// How the analysis window is chosen from a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WindowRule {
    /// `[E_min, E_peak + FWHM/2]` of the binned DOS.
    #[default]
    DosPeak,
    Full,
    Explicit { lo: f64, hi: f64 },
}

impl WindowRule {
    pub fn resolve(&self, eigenvalues: &[f64], dos: &DosCurve) -> EnergyWindow {
        match *self {
            WindowRule::DosPeak => dos_window(eigenvalues, dos),
            WindowRule::Full => EnergyWindow::new(eigenvalues[0], eigenvalues[eigenvalues.len() - 1]),
            WindowRule::Explicit { lo, hi } => EnergyWindow::new(lo, hi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisOptions {
    #[serde(default = "default_dos_bin")]
    pub dos_bin_width: f64,
    #[serde(default = "default_spacing_bin")]
    pub spacing_bin_width: f64,
    #[serde(default = "default_ratio_bin")]
    pub ratio_bin_width: f64,
    #[serde(default)]
    pub window: WindowRule,
    #[serde(default = "default_beta_points")]
    pub beta_grid_points: usize,
    /// Natural occupations below this are left out of the Boltzmann fit.
    #[serde(default = "default_floor")]
    pub occupation_floor: f64,
    /// Statistic of the Boltzmann fit compared against the thresholds.
    #[serde(default)]
    pub beta_spread: BetaSpread,
}

fn default_floor() -> f64 {
    RdmOptions::default().occupation_floor
}

fn default_dos_bin() -> f64 {
    DEFAULT_DOS_BIN
}

fn default_spacing_bin() -> f64 {
    DEFAULT_SPACING_BIN
}

fn default_ratio_bin() -> f64 {
    DEFAULT_RATIO_BIN
}

fn default_beta_points() -> usize {
    200
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            dos_bin_width: DEFAULT_DOS_BIN,
            spacing_bin_width: DEFAULT_SPACING_BIN,
            ratio_bin_width: DEFAULT_RATIO_BIN,
            window: WindowRule::default(),
            beta_grid_points: default_beta_points(),
            occupation_floor: default_floor(),
            beta_spread: BetaSpread::default(),
        }
    }
}

impl AnalysisOptions {
    pub fn rdm(&self) -> RdmOptions {
        RdmOptions {
            occupation_floor: self.occupation_floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dos_bin_width", self.dos_bin_width),
            ("spacing_bin_width", self.spacing_bin_width),
            ("ratio_bin_width", self.ratio_bin_width),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.occupation_floor >= 0.0 && self.occupation_floor < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "occupation_floor must lie in [0, 1), got {}",
                self.occupation_floor
            )));
        }
        if let WindowRule::Explicit { lo, hi } = self.window {
            if !(lo < hi) {
                return Err(Error::InvalidConfig(format!("explicit window [{lo}, {hi}] is empty")));
            }
        }
        if self.beta_grid_points < 2 {
            return Err(Error::InvalidConfig("beta_grid_points must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSize {
    pub m_sites: usize,
    pub n_bath: usize,
}

/// The model parameter points of a sweep: every size crossed with every
/// bath-bath coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub sizes: Vec<SystemSize>,
    #[serde(default = "default_w_bb_grid")]
    pub w_bb_grid: Vec<f64>,
    #[serde(default = "unit")]
    pub w_ib: f64,
    #[serde(default = "unit")]
    pub j_imp: f64,
    #[serde(default = "unit")]
    pub j_bath: f64,
    #[serde(default = "default_tilt_exponent")]
    pub tilt_exponent: u32,
    #[serde(default = "default_tilt_amplitude")]
    pub tilt_amplitude: f64,
}

fn default_w_bb_grid() -> Vec<f64> {
    DEFAULT_W_BB_GRID.to_vec()
}

pub fn default_thresholds() -> Vec<f64> {
    DEFAULT_THRESHOLDS.to_vec()
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

impl SweepGrid {
    pub fn new(sizes: Vec<SystemSize>) -> Self {
        Self {
            sizes,
            w_bb_grid: default_w_bb_grid(),
            w_ib: 1.0,
            j_imp: 1.0,
            j_bath: 1.0,
            tilt_exponent: default_tilt_exponent(),
            tilt_amplitude: default_tilt_amplitude(),
        }
    }

    pub fn params(&self, size: SystemSize, w_bb: f64) -> ModelParams {
        ModelParams {
            m_sites: size.m_sites,
            n_bath: size.n_bath,
            j_imp: self.j_imp,
            j_bath: self.j_bath,
            w_bb,
            w_ib: self.w_ib,
            tilt_exponent: self.tilt_exponent,
            tilt_amplitude: self.tilt_amplitude,
        }
    }

    /// Every point of the sweep, size-major.
    pub fn points(&self) -> Vec<ModelParams> {
        self.sizes
            .iter()
            .flat_map(|&s| self.w_bb_grid.iter().map(move |&w| (s, w)))
            .map(|(s, w)| self.params(s, w))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::InvalidConfig("no system sizes given".into()));
        }
        if self.w_bb_grid.is_empty() {
            return Err(Error::InvalidConfig("empty W_BB grid".into()));
        }
        for p in self.points() {
            p.validate()?;
        }
        Ok(())
    }
}

pub fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() || thresholds.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidConfig(
            "thresholds must be a non-empty list of positive numbers".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub grid: SweepGrid,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub analysis: AnalysisOptions,
}

impl SweepConfig {
    pub fn new(sizes: Vec<SystemSize>) -> Self {
        Self {
            grid: SweepGrid::new(sizes),
            thresholds: default_thresholds(),
            analysis: AnalysisOptions::default(),
        }
    }

    pub fn points(&self) -> Vec<ModelParams> {
        self.grid.points()
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        validate_thresholds(&self.thresholds)?;
        self.analysis.validate()
    }
}

/// `G`: fraction of in-window states whose Boltzmann fit has
/// `Δβ ≤ threshold`, `Δβ` being the slope standard error. Unfittable states
/// count as failures.
pub fn gibbs_fraction(verdicts: &[StateVerdict], threshold: f64, window: EnergyWindow) -> Result<f64> {
    gibbs_fraction_by(verdicts, threshold, window, BetaSpread::StdError)
}

pub fn gibbs_fraction_by(
    verdicts: &[StateVerdict],
    threshold: f64,
    window: EnergyWindow,
    spread: BetaSpread,
) -> Result<f64> {
    let mut total = 0usize;
    let mut passed = 0usize;
    for v in verdicts.iter().filter(|v| window.contains(v.energy)) {
        total += 1;
        if v.passes(threshold, spread) {
            passed += 1;
        }
    }
    if total == 0 {
        return Err(Error::InsufficientData("no states inside the analysis window".into()));
    }
    Ok(passed as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TanhFit {
    pub gamma0: f64,
    pub w0: f64,
    pub residuals: Vec<f64>,
    pub rms_residual: f64,
}

/// Least-squares fit of `γ(W) = γ₀ tanh(W / W⁰)`.
pub fn fit_gamma_tanh(points: &[(f64, f64)]) -> Result<TanhFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("{} points for the tanh fit, need 3", points.len())));
    }
    let model = |p: &[f64], w: f64| p[0] * (w / p[1]).tanh();
    let residuals = |p: &[f64]| points.iter().map(|&(w, g)| model(p, w) - g).collect::<Vec<_>>();
    let gamma_max = points.iter().map(|p| p.1).fold(0.0f64, f64::max).max(0.1);
    let w_max = points.iter().map(|p| p.0.abs()).fold(0.0f64, f64::max).max(1e-3);
    let bounds = [(0.0, 10.0), (1e-6, 1e3)];
    let mut last = None;
    for w_start in [0.2 * w_max, 0.05 * w_max, w_max] {
        match levenberg_marquardt(residuals, &[gamma_max, w_start], &bounds, LmOptions::default()) {
            Ok(fit) => {
                let rms = (fit.cost / points.len() as f64).sqrt();
                return Ok(TanhFit {
                    gamma0: fit.params[0],
                    w0: fit.params[1],
                    residuals: fit.residuals,
                    rms_residual: rms,
                });
            }
            Err(e) => last = Some(e),
        }
    }
    Err(Error::FitFailed(format!("tanh fit: {}", last.unwrap())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tanh2Fit {
    pub gamma0_prime: f64,
    pub residuals: Vec<f64>,
    pub rms_residual: f64,
}

/// One-parameter least-squares fit of `G(γ) = tanh²(γ / γ₀′)`.
pub fn fit_g_tanh2(points: &[(f64, f64)]) -> Result<Tanh2Fit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("{} points for the tanh² fit, need 3", points.len())));
    }
    let residuals = |p: &[f64]| {
        points
            .iter()
            .map(|&(g, frac)| (g / p[0]).tanh().powi(2) - frac)
            .collect::<Vec<_>>()
    };
    let mut last = None;
    for start in [0.5, 0.2, 1.0] {
        match levenberg_marquardt(residuals, &[start], &[(1e-6, 1e3)], LmOptions::default()) {
            Ok(fit) => {
                let rms = (fit.cost / points.len() as f64).sqrt();
                return Ok(Tanh2Fit {
                    gamma0_prime: fit.params[0],
                    residuals: fit.residuals,
                    rms_residual: rms,
                });
            }
            Err(e) => last = Some(e),
        }
    }
    Err(Error::FitFailed(format!("tanh² fit: {}", last.unwrap())))
}

/// Unfold, shrinking the window away from any energy where the smoothed
/// staircase turns non-monotone.
fn unfold_shrinking(eigenvalues: &[f64], window: EnergyWindow) -> Result<UnfoldedSpectrum> {
    let mut w = window;
    for _ in 0..50 {
        match unfold(eigenvalues, w) {
            Err(Error::NonMonotone { energy }) => {
                let lo = w.lo.max(eigenvalues[0]);
                let hi = w.hi.min(eigenvalues[eigenvalues.len() - 1]);
                let step = 0.01 * (hi - lo);
                if energy < 0.5 * (lo + hi) {
                    w.lo = energy + step;
                } else {
                    w.hi = energy - step;
                }
                log::warn!("staircase not monotone at E={energy:.4}, shrinking window to [{:.4}, {:.4}]", w.lo, w.hi);
            }
            other => return other,
        }
    }
    unfold(eigenvalues, w)
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFraction {
    pub threshold: f64,
    pub fraction: f64,
    pub canonical_states: usize,
}

/// Worst-case reduced-density-matrix invariants over all analyzed states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdmInvariants {
    pub max_trace_defect: f64,
    pub min_eigenvalue: f64,
    pub min_gibbs_distance: Option<f64>,
    pub max_gibbs_distance: Option<f64>,
}

impl RdmInvariants {
    pub fn from_verdicts(verdicts: &[StateVerdict]) -> Self {
        let distances: Vec<f64> = verdicts.iter().filter_map(|v| v.gibbs_distance).collect();
        Self {
            max_trace_defect: verdicts.iter().map(|v| (v.rdm_trace - 1.0).abs()).fold(0.0, f64::max),
            min_eigenvalue: verdicts.iter().map(|v| v.rdm_min_eigenvalue).fold(f64::INFINITY, f64::min),
            min_gibbs_distance: distances.iter().copied().reduce(f64::min),
            max_gibbs_distance: distances.iter().copied().reduce(f64::max),
        }
    }
}

/// Scalar results for one `(size, W_BB)` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub m_sites: usize,
    pub n_bath: usize,
    pub w_bb: f64,
    pub w_ib: f64,
    pub dimension: usize,
    pub window: EnergyWindow,
    pub unfold_window: EnergyWindow,
    pub gamma: f64,
    pub gamma_err: f64,
    pub gamma_pdf: f64,
    pub gamma_cdf: f64,
    pub mean_r: f64,
    pub ratio_degeneracies: usize,
    pub states: usize,
    pub states_in_window: usize,
    pub fittable_in_window: usize,
    pub fractions: Vec<ThresholdFraction>,
    /// Mean of `G` over the threshold grid.
    pub g: f64,
    /// Sample standard deviation of `G` over the threshold grid.
    pub g_err: f64,
    pub median_gibbs_distance: Option<f64>,
    pub beta_rms_discrepancy: Option<f64>,
    pub beta_max_abs: Option<f64>,
    pub beta_points: usize,
    pub rdm: RdmInvariants,
}

/// Level statistics of one spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralStats {
    pub dos: DosCurve,
    pub window: EnergyWindow,
    pub staircase: Polynomial,
    /// Window actually used for unfolding; narrower than `window` when the
    /// smoothed staircase turned non-monotone near an edge.
    pub unfold_window: EnergyWindow,
    pub spacings: SpacingHistogram,
    pub brody: BrodyFitResult,
    pub ratios: GapRatioStats,
}

pub fn spectral_stats(eigenvalues: &[f64], options: &AnalysisOptions) -> Result<SpectralStats> {
    let dos = binned_dos(eigenvalues, options.dos_bin_width)?;
    let window = options.window.resolve(eigenvalues, &dos);
    let unfolded = unfold_shrinking(eigenvalues, window)?;
    let spacings = spacing_histogram(&unfolded, options.spacing_bin_width)?;
    let brody = fit_brody(&spacings)?;
    let ratios = restricted_gap_ratios(eigenvalues, window, options.ratio_bin_width)?;
    Ok(SpectralStats {
        dos,
        window,
        staircase: unfolded.smooth_staircase,
        unfold_window: unfolded.window,
        spacings,
        brody,
        ratios,
    })
}

/// Eigenvalues of the bath alone.
pub fn bath_spectrum(params: &ModelParams) -> Result<Vec<f64>> {
    let bath = build_bath_hamiltonian(params)?;
    eigenvalues_only(&bath, MemoryBudget::default())
}

/// `β(E)` on an even grid spanning the levels inside `window`.
pub fn beta_curve(
    eigenvalues: &[f64],
    bath_eigenvalues: &[f64],
    window: EnergyWindow,
    points: usize,
) -> Result<BetaCurve> {
    let range = window.range(eigenvalues);
    if range.is_empty() {
        return Err(Error::InsufficientData("no levels inside the analysis window".into()));
    }
    let (lo, hi) = (eigenvalues[range.start], eigenvalues[range.end - 1]);
    BetaCurve::compute(eigenvalues, bath_eigenvalues, energy_grid(lo, hi, points))
}

/// Everything computed for one sweep point, minus the eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PointAnalysis {
    pub params: ModelParams,
    pub eigenvalues: Vec<f64>,
    pub bath_eigenvalues: Vec<f64>,
    pub spectral: SpectralStats,
    pub beta: BetaCurve,
    pub verdicts: Vec<StateVerdict>,
    pub summary: PointSummary,
}

/// Spectral, thermal and typicality analysis of one point from its
/// eigenvalues and per-state verdicts.
pub fn analyze_point(
    params: &ModelParams,
    eigenvalues: Vec<f64>,
    verdicts: Vec<StateVerdict>,
    thresholds: &[f64],
    options: &AnalysisOptions,
) -> Result<PointAnalysis> {
    let spectral = spectral_stats(&eigenvalues, options)?;
    let window = spectral.window;
    let bath_eigenvalues = bath_spectrum(params)?;
    let beta = beta_curve(&eigenvalues, &bath_eigenvalues, window, options.beta_grid_points)?;
    let (rms, max_abs, beta_points) = beta.ensemble_discrepancy();

    let mut fractions = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let fraction = gibbs_fraction_by(&verdicts, t, window, options.beta_spread)?;
        let canonical_states = verdicts
            .iter()
            .filter(|v| window.contains(v.energy) && v.passes(t, options.beta_spread))
            .count();
        fractions.push(ThresholdFraction {
            threshold: t,
            fraction,
            canonical_states,
        });
    }
    let (g, g_err) = mean_and_std(&fractions.iter().map(|f| f.fraction).collect::<Vec<_>>());
    let in_window: Vec<&StateVerdict> = verdicts.iter().filter(|v| window.contains(v.energy)).collect();

    let summary = PointSummary {
        m_sites: params.m_sites,
        n_bath: params.n_bath,
        w_bb: params.w_bb,
        w_ib: params.w_ib,
        dimension: params.dimension(),
        window,
        unfold_window: spectral.unfold_window,
        gamma: spectral.brody.gamma,
        gamma_err: spectral.brody.gamma_err,
        gamma_pdf: spectral.brody.gamma_pdf,
        gamma_cdf: spectral.brody.gamma_cdf,
        mean_r: spectral.ratios.mean_r,
        ratio_degeneracies: spectral.ratios.degeneracies,
        states: verdicts.len(),
        states_in_window: in_window.len(),
        fittable_in_window: in_window.iter().filter(|v| v.fit.is_some()).count(),
        fractions,
        g,
        g_err,
        median_gibbs_distance: median(in_window.iter().filter_map(|v| v.gibbs_distance).collect()),
        beta_rms_discrepancy: (beta_points > 0).then_some(rms),
        beta_max_abs: (beta_points > 0).then_some(max_abs),
        beta_points,
        rdm: RdmInvariants::from_verdicts(&verdicts),
    };
    Ok(PointAnalysis {
        params: *params,
        eigenvalues,
        bath_eigenvalues,
        spectral,
        beta,
        verdicts,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct VerdictCache {
    params: ModelParams,
    options: RdmOptions,
    verdicts: Vec<StateVerdict>,
}

/// On-disk cache of spectra and per-state verdicts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn spectrum_path(&self, params: &ModelParams) -> PathBuf {
        self.root.join("spectra").join(format!("{}.ctsp", params.content_hash()))
    }

    pub fn verdict_path(&self, params: &ModelParams, options: &RdmOptions) -> PathBuf {
        let key = serde_json::to_vec(options).expect("options serialize");
        let hash = hex::encode(Sha256::digest(key));
        self.root
            .join("verdicts")
            .join(format!("{}-{}.json", params.content_hash(), &hash[..16]))
    }

    fn load_verdicts(&self, params: &ModelParams, options: &RdmOptions) -> Result<Option<Vec<StateVerdict>>> {
        let path = self.verdict_path(params, options);
        if !path.exists() {
            return Ok(None);
        }
        let cached: VerdictCache = serde_json::from_slice(&fs::read(&path)?)?;
        if cached.params != *params || cached.options != *options {
            return Ok(None);
        }
        Ok(Some(cached.verdicts))
    }

    fn store_verdicts(&self, params: &ModelParams, options: &RdmOptions, verdicts: &[StateVerdict]) -> Result<()> {
        let path = self.verdict_path(params, options);
        let entry = VerdictCache {
            params: *params,
            options: *options,
            verdicts: verdicts.to_vec(),
        };
        write_atomic(&path, &serde_json::to_vec(&entry)?)
    }
}

/// Write through a temporary sibling so readers never see partial files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Eigenvalues and verdicts for every state of one point, from the cache
/// where possible.
pub fn solve_point(
    params: &ModelParams,
    options: &RdmOptions,
    budget: MemoryBudget,
    cache: Option<&Cache>,
) -> Result<(Vec<f64>, Vec<StateVerdict>)> {
    params.validate()?;
    if let Some(cache) = cache {
        let path = cache.spectrum_path(params);
        if path.exists() {
            if let Some(verdicts) = cache.load_verdicts(params, options)? {
                let (stored, eigenvalues) = load_eigenvalues(&path)?;
                if stored == *params {
                    log::info!("verdicts for {} loaded from cache", describe(params));
                    return Ok((eigenvalues, verdicts));
                }
            }
            log::info!("spectrum for {} loaded from cache", describe(params));
            let spectrum = load_spectrum_expecting(&path, params)?;
            let verdicts = analyze_states(&spectrum, 0..spectrum.dimension(), options)?;
            cache.store_verdicts(params, options, &verdicts)?;
            return Ok((spectrum.eigenvalues().to_vec(), verdicts));
        }
    }
    budget.check_dense(params.dimension())?;
    log::info!("diagonalizing {} (d_H = {})", describe(params), params.dimension());
    let basis = enumerate_basis(params, budget)?;
    let h = build_hamiltonian(&basis, params)?;
    drop(basis);
    let spectrum = diagonalize(&h, budget)?;
    drop(h);
    let verdicts = analyze_states(&spectrum, 0..spectrum.dimension(), options)?;
    if let Some(cache) = cache {
        let path = cache.spectrum_path(params);
        fs::create_dir_all(path.parent().unwrap())?;
        let tmp = path.with_extension("partial");
        save_spectrum(&spectrum, &tmp)?;
        fs::rename(&tmp, &path)?;
        cache.store_verdicts(params, options, &verdicts)?;
    }
    Ok((spectrum.eigenvalues().to_vec(), verdicts))
}

fn describe(p: &ModelParams) -> String {
    format!("M_s={}, N_B={}, W_BB={}, W_IB={}", p.m_sites, p.n_bath, p.w_bb, p.w_ib)
}

fn with_context(params: &ModelParams) -> impl FnOnce(Error) -> Error + '_ {
    move |e| Error::Sweep {
        m_sites: params.m_sites,
        n_bath: params.n_bath,
        w_bb: params.w_bb,
        source: Box::new(e),
    }
}

/// Full analysis of one point.
pub fn run_point(
    params: &ModelParams,
    thresholds: &[f64],
    options: &AnalysisOptions,
    budget: MemoryBudget,
    cache: Option<&Cache>,
) -> Result<PointAnalysis> {
    let (eigenvalues, verdicts) = solve_point(params, &options.rdm(), budget, cache).map_err(with_context(params))?;
    analyze_point(params, eigenvalues, verdicts, thresholds, options).map_err(with_context(params))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeFit {
    pub m_sites: usize,
    pub n_bath: usize,
    pub fit: Option<TanhFit>,
}

/// Cross-point results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub thresholds: Vec<f64>,
    pub points: Vec<PointSummary>,
    /// Spearman rank correlation between `γ` and `G` over all points.
    pub gamma_g_spearman: Option<f64>,
    pub gamma_tanh: Vec<SizeFit>,
    pub g_tanh2: Option<Tanh2Fit>,
}

impl SweepSummary {
    pub fn from_points(thresholds: &[f64], points: Vec<PointSummary>) -> Self {
        let gammas: Vec<f64> = points.iter().map(|p| p.gamma).collect();
        let gs: Vec<f64> = points.iter().map(|p| p.g).collect();
        let gamma_g_spearman = (points.len() >= 2).then(|| spearman(&gammas, &gs)).filter(|r| r.is_finite());
        let mut sizes: Vec<(usize, usize)> = points.iter().map(|p| (p.m_sites, p.n_bath)).collect();
        sizes.dedup();
        let gamma_tanh = sizes
            .into_iter()
            .map(|(m, n)| {
                let pts: Vec<(f64, f64)> = points
                    .iter()
                    .filter(|p| p.m_sites == m && p.n_bath == n)
                    .map(|p| (p.w_bb, p.gamma))
                    .collect();
                SizeFit {
                    m_sites: m,
                    n_bath: n,
                    fit: fit_gamma_tanh(&pts).ok(),
                }
            })
            .collect();
        let pooled: Vec<(f64, f64)> = gammas.iter().copied().zip(gs.iter().copied()).collect();
        Self {
            thresholds: thresholds.to_vec(),
            gamma_g_spearman,
            gamma_tanh,
            g_tanh2: fit_g_tanh2(&pooled).ok(),
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub points: Vec<PointAnalysis>,
    pub summary: SweepSummary,
}

/// Run every point of the sweep in order. Points run one at a time so only
/// one dense eigenproblem is ever held in memory.
pub fn run_sweep(config: &SweepConfig, budget: MemoryBudget, cache: Option<&Cache>) -> Result<SweepResult> {
    config.validate()?;
    let mut points = Vec::new();
    for params in config.points() {
        points.push(run_point(&params, &config.thresholds, &config.analysis, budget, cache)?);
    }
    let summary = SweepSummary::from_points(&config.thresholds, points.iter().map(|p| p.summary.clone()).collect());
    Ok(SweepResult {
        config: config.clone(),
        points,
        summary,
    })
}
