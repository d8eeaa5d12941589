//! Inverse temperature as a function of energy, from the smoothed density of
//! states (microcanonical) and from the canonical mean energy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{fit_staircase, Polynomial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DosSource {
    Total,
    Bath,
}

/// `β(E) = d ln Ω̄ / dE = N̄''(E) / N̄'(E)` from the degree-10 staircase fit.
#[derive(Debug, Clone, PartialEq)]
pub struct MicrocanonicalBeta {
    pub source: DosSource,
    pub staircase: Polynomial,
}

impl MicrocanonicalBeta {
    pub fn from_eigenvalues(eigenvalues: &[f64], source: DosSource) -> Result<Self> {
        Ok(Self {
            source,
            staircase: fit_staircase(eigenvalues)?,
        })
    }

    pub fn beta(&self, e: f64) -> Result<f64> {
        beta_microcanonical(&self.staircase, e)
    }
}

pub fn beta_microcanonical(staircase: &Polynomial, e: f64) -> Result<f64> {
    let omega = staircase.derivative(e);
    if !(omega > 0.0) {
        return Err(Error::OutOfDomain { energy: e });
    }
    Ok(staircase.second_derivative(e) / omega)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalPartition {
    pub beta: f64,
    pub log_z: f64,
    pub mean_energy: f64,
    pub energy_variance: f64,
}

/// Canonical statistics with the exponent shifted by `min_α β E_α`.
pub fn canonical_stats(eigenvalues: &[f64], beta: f64) -> CanonicalPartition {
    let shift = eigenvalues
        .iter()
        .map(|&e| beta * e)
        .fold(f64::INFINITY, f64::min);
    let mut z = 0.0;
    let mut first = 0.0;
    for &e in eigenvalues {
        let w = (-(beta * e - shift)).exp();
        z += w;
        first += w * e;
    }
    let mean = first / z;
    let variance = eigenvalues
        .iter()
        .map(|&e| (-(beta * e - shift)).exp() * (e - mean).powi(2))
        .sum::<f64>()
        / z;
    CanonicalPartition {
        beta,
        log_z: z.ln() - shift,
        mean_energy: mean,
        energy_variance: variance.max(0.0),
    }
}

/// Solve `⟨E⟩_β = e` by bisection. `⟨E⟩_β` decreases monotonically in β.
pub fn solve_beta_canonical(eigenvalues: &[f64], e: f64) -> Result<f64> {
    let e_min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let e_max = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(e > e_min && e < e_max) {
        return Err(Error::EnergyOutOfRange {
            energy: e,
            lo: e_min,
            hi: e_max,
        });
    }
    let mean = |b: f64| canonical_stats(eigenvalues, b).mean_energy;
    let mut lo = -50.0;
    let mut hi = 50.0;
    while mean(lo) < e && lo > -1e8 {
        lo *= 2.0;
    }
    while mean(hi) > e && hi < 1e8 {
        hi *= 2.0;
    }
    let tolerance = 1e-9 * (e_max - e_min);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        let m = mean(mid);
        if m > e {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    if (mean(beta) - e).abs() > tolerance {
        return Err(Error::FitFailed(format!(
            "canonical β for E={e} did not reach tolerance"
        )));
    }
    Ok(beta)
}

/// β(E) on an energy grid from all three routes. Microcanonical values are
/// NaN where the smoothed DOS is not positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaCurve {
    pub energies: Vec<f64>,
    pub beta_micro_total: Vec<f64>,
    pub beta_micro_bath: Vec<f64>,
    pub beta_canonical: Vec<f64>,
}

impl BetaCurve {
    pub fn compute(
        total_eigenvalues: &[f64],
        bath_eigenvalues: &[f64],
        energies: Vec<f64>,
    ) -> Result<Self> {
        let total = MicrocanonicalBeta::from_eigenvalues(total_eigenvalues, DosSource::Total)?;
        let bath = MicrocanonicalBeta::from_eigenvalues(bath_eigenvalues, DosSource::Bath)?;
        let beta_micro_total = energies
            .iter()
            .map(|&e| total.beta(e).unwrap_or(f64::NAN))
            .collect();
        let beta_micro_bath = energies
            .iter()
            .map(|&e| bath.beta(e).unwrap_or(f64::NAN))
            .collect();
        let beta_canonical = energies
            .iter()
            .map(|&e| solve_beta_canonical(total_eigenvalues, e).unwrap_or(f64::NAN))
            .collect();
        Ok(Self {
            energies,
            beta_micro_total,
            beta_micro_bath,
            beta_canonical,
        })
    }

    /// RMS of `β_micro_total − β_canonical` over grid points where both are
    /// finite, and the largest `|β|` seen on those points.
    pub fn ensemble_discrepancy(&self) -> (f64, f64, usize) {
        let mut sum = 0.0;
        let mut max_abs = 0.0f64;
        let mut n = 0;
        for (m, c) in self.beta_micro_total.iter().zip(&self.beta_canonical) {
            if m.is_finite() && c.is_finite() {
                sum += (m - c).powi(2);
                max_abs = max_abs.max(m.abs()).max(c.abs());
                n += 1;
            }
        }
        ((sum / n.max(1) as f64).sqrt(), max_abs, n)
    }
}

/// Evenly spaced grid of `points` energies on `[lo, hi]`.
pub fn energy_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}
