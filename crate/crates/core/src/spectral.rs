//! Level statistics: staircase, binned density of states, polynomial
//! unfolding, nearest-neighbour spacing histograms with Brody fits, and
//! restricted gap ratios.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, LmOptions};

/// Degree of the smoothed staircase polynomial.
pub const STAIRCASE_DEGREE: usize = 10;
/// Minimum number of in-window levels required for unfolding.
pub const MIN_UNFOLD_LEVELS: usize = 500;
pub const DEFAULT_SPACING_BIN: f64 = 0.01;
pub const DEFAULT_RATIO_BIN: f64 = 0.02;
pub const DEFAULT_DOS_BIN: f64 = 0.4;

pub const MEAN_R_POISSON: f64 = 0.3863;
pub const MEAN_R_GOE: f64 = 0.5307;

/// `N(e)`: number of levels `E_α ≤ e` in a sorted spectrum.
pub fn staircase(eigenvalues: &[f64], e: f64) -> usize {
    eigenvalues.partition_point(|&x| x <= e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow {
    pub lo: f64,
    pub hi: f64,
}

impl EnergyWindow {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn everything() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, e: f64) -> bool {
        e >= self.lo && e <= self.hi
    }

    /// Index range of a sorted spectrum that falls inside the window.
    pub fn range(&self, eigenvalues: &[f64]) -> std::ops::Range<usize> {
        let start = eigenvalues.partition_point(|&x| x < self.lo);
        let end = eigenvalues.partition_point(|&x| x <= self.hi);
        start..end.max(start)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosCurve {
    pub bin_width: f64,
    /// Left edge of bin 0, a multiple of `bin_width`.
    pub origin: f64,
    pub counts: Vec<usize>,
}

impl DosCurve {
    pub fn bin_center(&self, k: usize) -> f64 {
        self.origin + (k as f64 + 0.5) * self.bin_width
    }

    /// `count / bin_width` per bin.
    pub fn density(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.bin_width)
            .collect()
    }

    /// Density normalized to unit area.
    pub fn normalized(&self) -> Vec<f64> {
        let total: usize = self.counts.iter().sum();
        self.counts
            .iter()
            .map(|&c| c as f64 / (total as f64 * self.bin_width))
            .collect()
    }

    /// Centre of the most populated bin.
    pub fn peak(&self) -> f64 {
        let k = self
            .counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(k, _)| k)
            .unwrap_or(0);
        self.bin_center(k)
    }

    /// Full width at half maximum, crossings linearly interpolated between
    /// bin centres.
    pub fn fwhm(&self) -> f64 {
        let density = self.density();
        let (peak, &max) = density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("non-empty DOS");
        let half = max / 2.0;
        let crossing = |inner: usize, outer: usize| {
            let (a, b) = (density[inner], density[outer]);
            let t = (a - half) / (a - b);
            self.bin_center(inner) + t * (self.bin_center(outer) - self.bin_center(inner))
        };
        let mut left = self.origin;
        for k in (0..peak).rev() {
            if density[k] < half {
                left = crossing(k + 1, k);
                break;
            }
        }
        let mut right = self.origin + self.counts.len() as f64 * self.bin_width;
        for k in peak + 1..density.len() {
            if density[k] < half {
                right = crossing(k - 1, k);
                break;
            }
        }
        right - left
    }
}

pub fn binned_dos(eigenvalues: &[f64], bin_width: f64) -> Result<DosCurve> {
    if eigenvalues.is_empty() {
        return Err(Error::InsufficientData("empty spectrum".into()));
    }
    if !(bin_width > 0.0) {
        return Err(Error::InvalidConfig(format!("bin width {bin_width} must be positive")));
    }
    let lo = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first = (lo / bin_width).floor() as i64;
    let last = (hi / bin_width).floor() as i64;
    let bins = (last - first + 1) as usize;
    let mut counts = vec![0usize; bins];
    for &e in eigenvalues {
        let k = ((e / bin_width).floor() as i64 - first) as usize;
        counts[k.min(bins - 1)] += 1;
    }
    Ok(DosCurve {
        bin_width,
        origin: first as f64 * bin_width,
        counts,
    })
}

/// Window `[E_min, E_peak + FWHM/2]` from the binned DOS.
pub fn dos_window(eigenvalues: &[f64], dos: &DosCurve) -> EnergyWindow {
    let e_min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    EnergyWindow::new(e_min, dos.peak() + dos.fwhm() / 2.0)
}

/// Polynomial in the scaled variable `x = (E − center) / scale`,
/// coefficients in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub center: f64,
    pub scale: f64,
    pub coefficients: Vec<f64>,
}

impl Polynomial {
    fn x(&self, e: f64) -> f64 {
        (e - self.center) / self.scale
    }

    pub fn value(&self, e: f64) -> f64 {
        let x = self.x(e);
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// First derivative with respect to `E`.
    pub fn derivative(&self, e: f64) -> f64 {
        let x = self.x(e);
        let d = self
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * x + k as f64 * c);
        d / self.scale
    }

    /// Second derivative with respect to `E`.
    pub fn second_derivative(&self, e: f64) -> f64 {
        let x = self.x(e);
        let d = self
            .coefficients
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * x + (k * (k - 1)) as f64 * c);
        d / (self.scale * self.scale)
    }

    /// Ordinary least squares fit of degree `degree` to `(e, y)`.
    pub fn fit(e: &[f64], y: &[f64], degree: usize) -> Result<Self> {
        if e.len() <= degree {
            return Err(Error::InsufficientData(format!(
                "{} points for a degree-{degree} polynomial",
                e.len()
            )));
        }
        let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = (hi - lo) / 2.0;
        if !(scale > 0.0) {
            return Err(Error::InsufficientData("degenerate energy range".into()));
        }
        let center = (hi + lo) / 2.0;
        let vander = DMatrix::from_fn(e.len(), degree + 1, |r, c| {
            ((e[r] - center) / scale).powi(c as i32)
        });
        let rhs = DVector::from_column_slice(y);
        let coefficients = vander
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|m| Error::FitFailed(format!("polynomial least squares: {m}")))?;
        Ok(Self {
            center,
            scale,
            coefficients: coefficients.iter().copied().collect(),
        })
    }
}

/// Smoothed staircase `N̄(E)` fitted to `N(E_α)` at every level.
pub fn fit_staircase(eigenvalues: &[f64]) -> Result<Polynomial> {
    let counts: Vec<f64> = eigenvalues
        .iter()
        .map(|&e| staircase(eigenvalues, e) as f64)
        .collect();
    Polynomial::fit(eigenvalues, &counts, STAIRCASE_DEGREE)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedSpectrum {
    /// In-window raw levels.
    pub raw: Vec<f64>,
    pub smooth_staircase: Polynomial,
    /// `N̄(E_α)` for the in-window levels.
    pub unfolded: Vec<f64>,
    pub window: EnergyWindow,
}

impl UnfoldedSpectrum {
    pub fn spacings(&self) -> Vec<f64> {
        self.unfolded.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn mean_spacing(&self) -> f64 {
        let n = self.unfolded.len();
        (self.unfolded[n - 1] - self.unfolded[0]) / (n - 1) as f64
    }
}

/// Number of grid points used to check monotonicity of `N̄`.
const MONOTONE_GRID: usize = 4000;

/// Unfold a sorted spectrum with the degree-10 staircase fitted to all
/// levels; unfolded values are returned for levels inside `window`.
pub fn unfold(eigenvalues: &[f64], window: EnergyWindow) -> Result<UnfoldedSpectrum> {
    let range = window.range(eigenvalues);
    if range.len() < MIN_UNFOLD_LEVELS {
        return Err(Error::InsufficientData(format!(
            "{} levels in window, need {MIN_UNFOLD_LEVELS}",
            range.len()
        )));
    }
    let fit = fit_staircase(eigenvalues)?;
    let raw = eigenvalues[range].to_vec();
    let (lo, hi) = (raw[0], raw[raw.len() - 1]);
    for k in 0..=MONOTONE_GRID {
        let e = lo + (hi - lo) * k as f64 / MONOTONE_GRID as f64;
        if fit.derivative(e) < 0.0 {
            return Err(Error::NonMonotone { energy: e });
        }
    }
    let unfolded = raw.iter().map(|&e| fit.value(e)).collect();
    Ok(UnfoldedSpectrum {
        raw,
        smooth_staircase: fit,
        unfolded,
        window,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingHistogram {
    pub bin_width: f64,
    pub counts: Vec<usize>,
    pub samples: usize,
}

impl SpacingHistogram {
    /// Histogram of non-negative samples on bins `[k·w, (k+1)·w)`.
    pub fn from_spacings(spacings: &[f64], bin_width: f64) -> Result<Self> {
        if spacings.is_empty() {
            return Err(Error::InsufficientData("no spacings".into()));
        }
        if !(bin_width > 0.0) {
            return Err(Error::InvalidConfig(format!("bin width {bin_width} must be positive")));
        }
        let max = spacings.iter().copied().fold(0.0, f64::max);
        let bins = (max / bin_width).floor() as usize + 1;
        let mut counts = vec![0usize; bins];
        for &s in spacings {
            let k = (s.max(0.0) / bin_width).floor() as usize;
            counts[k.min(bins - 1)] += 1;
        }
        Ok(Self {
            bin_width,
            counts,
            samples: spacings.len(),
        })
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_width
    }

    /// Probability density per bin; integrates to one.
    pub fn density(&self) -> Vec<f64> {
        let norm = self.samples as f64 * self.bin_width;
        self.counts.iter().map(|&c| c as f64 / norm).collect()
    }

    /// Empirical cumulative distribution at the right edge of every bin.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0usize;
        self.counts
            .iter()
            .map(|&c| {
                acc += c;
                acc as f64 / self.samples as f64
            })
            .collect()
    }
}

pub fn spacing_histogram(u: &UnfoldedSpectrum, bin_width: f64) -> Result<SpacingHistogram> {
    if u.unfolded.len() < 2 {
        return Err(Error::InsufficientData("fewer than two levels".into()));
    }
    SpacingHistogram::from_spacings(&u.spacings(), bin_width)
}

/// Brody normalization `b = Γ((γ+2)/(γ+1))^{γ+1}`.
pub fn brody_b(gamma_param: f64) -> f64 {
    gamma((gamma_param + 2.0) / (gamma_param + 1.0)).powf(gamma_param + 1.0)
}

pub fn brody_pdf(s: f64, gamma_param: f64) -> f64 {
    let b = brody_b(gamma_param);
    (gamma_param + 1.0) * b * s.powf(gamma_param) * (-b * s.powf(gamma_param + 1.0)).exp()
}

pub fn brody_cdf(s: f64, gamma_param: f64) -> f64 {
    let b = brody_b(gamma_param);
    1.0 - (-b * s.powf(gamma_param + 1.0)).exp()
}

pub fn poisson_pdf(s: f64) -> f64 {
    (-s).exp()
}

pub fn wigner_dyson_pdf(s: f64) -> f64 {
    let pi = std::f64::consts::PI;
    pi * s / 2.0 * (-pi * s * s / 4.0).exp()
}

pub const BRODY_BOUNDS: (f64, f64) = (0.0, 1.05);
const BRODY_STARTS: [f64; 3] = [0.5, 0.1, 0.9];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrodyFitResult {
    pub gamma: f64,
    pub gamma_err: f64,
    pub gamma_pdf: f64,
    pub gamma_cdf: f64,
}

fn fit_one_brody<F>(residuals: F, what: &str) -> Result<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut tried = Vec::new();
    for start in BRODY_STARTS {
        match levenberg_marquardt(&residuals, &[start], &[BRODY_BOUNDS], LmOptions::default()) {
            Ok(fit) => return Ok(fit.params[0]),
            Err(e) => tried.push(format!("γ0={start}: {e}")),
        }
    }
    Err(Error::FitFailed(format!("Brody {what} fit: {}", tried.join("; "))))
}

/// Fit the Brody density to the histogram and the Brody CDF to the empirical
/// CDF. The reported γ is their mean, the error their sample standard
/// deviation `|γ_pdf − γ_cdf| / √2`.
pub fn fit_brody(h: &SpacingHistogram) -> Result<BrodyFitResult> {
    let density = h.density();
    let occupied: Vec<(f64, f64)> = density
        .iter()
        .enumerate()
        .filter(|(k, _)| h.counts[*k] > 0)
        .map(|(k, &d)| (h.bin_center(k), d))
        .collect();
    if occupied.len() < 2 {
        return Err(Error::InsufficientData("histogram has fewer than two occupied bins".into()));
    }
    let gamma_pdf = fit_one_brody(
        |p| occupied.iter().map(|&(s, d)| brody_pdf(s, p[0]) - d).collect(),
        "density",
    )?;
    let edges_cdf: Vec<(f64, f64)> = h
        .cumulative()
        .into_iter()
        .enumerate()
        .map(|(k, c)| ((k + 1) as f64 * h.bin_width, c))
        .collect();
    let gamma_cdf = fit_one_brody(
        |p| edges_cdf.iter().map(|&(s, c)| brody_cdf(s, p[0]) - c).collect(),
        "cumulative",
    )?;
    Ok(BrodyFitResult {
        gamma: 0.5 * (gamma_pdf + gamma_cdf),
        gamma_err: (gamma_pdf - gamma_cdf).abs() / std::f64::consts::SQRT_2,
        gamma_pdf,
        gamma_cdf,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRatioStats {
    pub ratios: Vec<f64>,
    pub mean_r: f64,
    /// Ratios dropped because one of the adjacent gaps was exactly zero.
    pub degeneracies: usize,
    pub bin_width: f64,
    /// Density `W(r)` on bins of `bin_width` covering `[0, 1]`.
    pub histogram: Vec<f64>,
}

pub fn restricted_gap_ratios(
    eigenvalues: &[f64],
    window: EnergyWindow,
    bin_width: f64,
) -> Result<GapRatioStats> {
    let levels = &eigenvalues[window.range(eigenvalues)];
    if levels.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} levels in window, need 3",
            levels.len()
        )));
    }
    let mut ratios = Vec::with_capacity(levels.len() - 2);
    let mut degeneracies = 0;
    for w in levels.windows(3) {
        let below = w[1] - w[0];
        let above = w[2] - w[1];
        if below == 0.0 || above == 0.0 {
            degeneracies += 1;
            continue;
        }
        let g = above / below;
        ratios.push(g.min(1.0 / g));
    }
    if ratios.is_empty() {
        return Err(Error::InsufficientData("every gap ratio is degenerate".into()));
    }
    let mean_r = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let bins = (1.0 / bin_width).round().max(1.0) as usize;
    let mut counts = vec![0usize; bins];
    for &r in &ratios {
        counts[((r / bin_width) as usize).min(bins - 1)] += 1;
    }
    let norm = ratios.len() as f64 * bin_width;
    Ok(GapRatioStats {
        mean_r,
        degeneracies,
        bin_width,
        histogram: counts.iter().map(|&c| c as f64 / norm).collect(),
        ratios,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RatioEnsemble {
    Goe,
    Poisson,
}

pub fn gap_ratio_reference(r: f64, kind: RatioEnsemble) -> f64 {
    match kind {
        RatioEnsemble::Goe => 27.0 / 4.0 * (r + r * r) / (1.0 + r + r * r).powf(2.5),
        RatioEnsemble::Poisson => 2.0 / (1.0 + r).powi(2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Composite Simpson rule on [a, b] with n (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn staircase_counts() {
        let ev: Vec<f64> = (1..=9).map(f64::from).collect();
        assert_eq!(staircase(&ev, 0.5), 0);
        assert_eq!(staircase(&ev, 9.0), 9);
        assert_eq!(staircase(&ev, 100.0), 9);
        assert_eq!(staircase(&ev, 5.0), 5);
    }

    #[test]
    fn uniform_dos() {
        let ev: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let dos = binned_dos(&ev, 0.1).unwrap();
        assert_eq!(dos.counts, vec![10; 10]);
        for d in dos.density() {
            assert_abs_diff_eq!(d, 100.0, epsilon = 1e-9);
        }
        for d in dos.normalized() {
            assert_abs_diff_eq!(d, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn degenerate_dos_and_errors() {
        let dos = binned_dos(&[0.3; 7], 0.4).unwrap();
        assert_eq!(dos.counts, vec![7]);
        assert!(binned_dos(&[], 0.4).is_err());
        assert!(binned_dos(&[1.0], 0.0).is_err());
    }

    #[test]
    fn fwhm_of_triangle() {
        // densities 1,2,3,4,3,2,1 on unit bins -> half max 2 crossed at centres 1 and 5
        let counts = vec![1, 2, 3, 4, 3, 2, 1];
        let dos = DosCurve { bin_width: 1.0, origin: 0.0, counts };
        assert_abs_diff_eq!(dos.peak(), 3.5);
        // crossing of 2.0 lies exactly at the centre of bins 1 and 5
        assert_abs_diff_eq!(dos.fwhm(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn polynomial_derivatives() {
        let p = Polynomial { center: 1.0, scale: 2.0, coefficients: vec![1.0, 2.0, 3.0] };
        // N(E) = 1 + 2x + 3x², x = (E-1)/2
        let e = 4.0;
        let x = 1.5;
        assert_abs_diff_eq!(p.value(e), 1.0 + 2.0 * x + 3.0 * x * x);
        assert_abs_diff_eq!(p.derivative(e), (2.0 + 6.0 * x) / 2.0);
        assert_abs_diff_eq!(p.second_derivative(e), 6.0 / 4.0);
    }

    #[test]
    fn unfolding_identity_spectrum() {
        let ev: Vec<f64> = (1..=800).map(f64::from).collect();
        let u = unfold(&ev, EnergyWindow::everything()).unwrap();
        for (a, b) in u.unfolded.iter().zip(&ev) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn unfolding_needs_levels() {
        let ev: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!(matches!(
            unfold(&ev, EnergyWindow::everything()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn equally_spaced_histogram() {
        let h = SpacingHistogram::from_spacings(&[1.0; 50], 0.01).unwrap();
        let k = h.counts.iter().position(|&c| c > 0).unwrap();
        assert_eq!(h.counts[k], 50);
        assert!(k as f64 * 0.01 <= 1.0 && 1.0 < (k + 1) as f64 * 0.01);
        let total: f64 = h.density().iter().map(|d| d * h.bin_width).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn brody_limits() {
        assert_abs_diff_eq!(brody_b(0.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(brody_b(1.0), std::f64::consts::FRAC_PI_4, epsilon = 1e-14);
        for s in [0.0, 0.3, 1.0, 2.5] {
            assert_abs_diff_eq!(brody_pdf(s, 0.0), poisson_pdf(s), epsilon = 1e-14);
            assert_abs_diff_eq!(brody_pdf(s, 1.0), wigner_dyson_pdf(s), epsilon = 1e-14);
        }
    }

    #[test]
    fn brody_norm_and_mean() {
        for g in [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
            // substitute s = t² to tame the s^γ cusp at the origin
            let norm = simpson(|t| 2.0 * t * brody_pdf(t * t, g), 0.0, 7.0, 20000);
            let mean = simpson(|t| 2.0 * t.powi(3) * brody_pdf(t * t, g), 0.0, 7.0, 20000);
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-8);
            assert_abs_diff_eq!(mean, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn ratio_references() {
        assert_eq!(gap_ratio_reference(0.0, RatioEnsemble::Goe), 0.0);
        assert_eq!(gap_ratio_reference(0.0, RatioEnsemble::Poisson), 2.0);
        for kind in [RatioEnsemble::Goe, RatioEnsemble::Poisson] {
            let total = simpson(|r| gap_ratio_reference(r, kind), 0.0, 1.0, 2000);
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
        }
        let mean_p = simpson(|r| r * gap_ratio_reference(r, RatioEnsemble::Poisson), 0.0, 1.0, 2000);
        assert_abs_diff_eq!(mean_p, 2.0 * std::f64::consts::LN_2 - 1.0, epsilon = 1e-10);
    }

    #[test]
    fn equally_spaced_ratios() {
        let ev: Vec<f64> = (0..20).map(|i| 0.25 * i as f64).collect();
        let stats = restricted_gap_ratios(&ev, EnergyWindow::everything(), 0.02).unwrap();
        assert!(stats.ratios.iter().all(|&r| r == 1.0));
        assert_eq!(stats.mean_r, 1.0);
        assert_eq!(stats.ratios.len(), 18);
    }

    #[test]
    fn degenerate_ratios_are_counted() {
        let ev = [0.0, 1.0, 1.0, 2.5, 3.0];
        let stats = restricted_gap_ratios(&ev, EnergyWindow::everything(), 0.02).unwrap();
        assert_eq!(stats.degeneracies, 2);
        assert_eq!(stats.ratios.len(), 1);
        assert!(restricted_gap_ratios(&[0.0, 1.0], EnergyWindow::everything(), 0.02).is_err());
    }

    #[test]
    fn window_range() {
        let ev = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(EnergyWindow::new(0.5, 3.0).range(&ev), 1..4);
        assert_eq!(EnergyWindow::new(5.0, 6.0).range(&ev), 5..5);
    }
}
