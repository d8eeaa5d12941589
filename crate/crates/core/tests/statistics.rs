//! Level statistics and thermodynamics on synthetic spectra with known answers.

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};
use typicality::rdm::fit_boltzmann;
use typicality::spectral::{
    brody_b, fit_brody, restricted_gap_ratios, unfold, EnergyWindow, SpacingHistogram, DEFAULT_RATIO_BIN,
    DEFAULT_SPACING_BIN, MEAN_R_GOE, MEAN_R_POISSON,
};
use typicality::thermo::{solve_beta_canonical, MicrocanonicalBeta, DosSource};

fn brody_samples(gamma: f64, n: usize, rng: &mut StdRng) -> Vec<f64> {
    let b = brody_b(gamma);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            (-(1.0 - u).ln() / b).powf(1.0 / (gamma + 1.0))
        })
        .collect()
}

#[test]
fn brody_fit_recovers_sampled_exponent() {
    let mut rng = StdRng::seed_from_u64(11);
    for target in [0.0, 0.3, 0.5, 0.7, 1.0] {
        let s = brody_samples(target, 20_000, &mut rng);
        let h = SpacingHistogram::from_spacings(&s, DEFAULT_SPACING_BIN).unwrap();
        let fit = fit_brody(&h).unwrap();
        assert!((fit.gamma - target).abs() < 0.08, "target {target}: {fit:?}");
        assert!(fit.gamma_err < 0.1, "target {target}: {fit:?}");
    }
}

fn goe_levels(size: usize, rng: &mut StdRng) -> Vec<f64> {
    let mut a = DMatrix::<f64>::from_fn(size, size, |_, _| rng.sample(StandardNormal));
    a = &a + a.transpose();
    let mut ev: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[test]
fn goe_gap_ratio_mean() {
    let mut rng = StdRng::seed_from_u64(5);
    let mut ratios = Vec::new();
    for _ in 0..40 {
        let ev = goe_levels(300, &mut rng);
        let bulk = EnergyWindow::new(ev[75], ev[225]);
        ratios.extend(restricted_gap_ratios(&ev, bulk, DEFAULT_RATIO_BIN).unwrap().ratios);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((mean - MEAN_R_GOE).abs() < 0.01, "{mean} over {}", ratios.len());
}

#[test]
fn poisson_gap_ratio_mean() {
    let mut rng = StdRng::seed_from_u64(6);
    let mut levels: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
    levels.sort_by(f64::total_cmp);
    let r = restricted_gap_ratios(&levels, EnergyWindow::everything(), DEFAULT_RATIO_BIN).unwrap();
    assert!((r.mean_r - MEAN_R_POISSON).abs() < 0.01, "{}", r.mean_r);
    let integral: f64 = r.histogram.iter().sum::<f64>() * r.bin_width;
    assert!((integral - 1.0).abs() < 1e-12);
}

#[test]
fn quadratic_staircase_unfolds_to_unit_spacing() {
    // N(E) = E² exactly, so the smooth staircase is a polynomial.
    let levels: Vec<f64> = (0..2000).map(|k| (k as f64 + 0.5).sqrt()).collect();
    let u = unfold(&levels, EnergyWindow::new(levels[200], levels[1800])).unwrap();
    let spacings = u.spacings();
    assert!(spacings.iter().all(|s| (s - 1.0).abs() < 1e-3), "{:?}", &spacings[..4]);
    assert!((u.mean_spacing() - 1.0).abs() < 1e-6);
}

fn gaussian_levels(n: usize, sigma: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, sigma).unwrap();
    (0..n).map(|k| normal.inverse_cdf((k as f64 + 0.5) / n as f64)).collect()
}

#[test]
fn gaussian_density_of_states_gives_linear_beta() {
    let sigma = 2.0;
    let levels = gaussian_levels(6000, sigma);
    let micro = MicrocanonicalBeta::from_eigenvalues(&levels, DosSource::Total).unwrap();
    for e in [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0] {
        let exact = -e / (sigma * sigma);
        let b = micro.beta(e).unwrap();
        assert!((b - exact).abs() < 0.02, "micro at {e}: {b} vs {exact}");
        let c = solve_beta_canonical(&levels, e).unwrap();
        assert!((c - exact).abs() < 0.02, "canonical at {e}: {c} vs {exact}");
    }
}

#[test]
fn noisy_boltzmann_occupations_fit_within_error() {
    let mut rng = StdRng::seed_from_u64(3);
    // Additive noise on n makes the n² weights the inverse variances of ln n.
    let beta = 0.8;
    let energies: Vec<f64> = (0..12).map(|k| -2.0 + 0.35 * k as f64).collect();
    let mut hits = 0;
    for _ in 0..200 {
        let raw: Vec<f64> = energies
            .iter()
            .map(|e| (-beta * e).exp() + 0.005 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let z: f64 = raw.iter().sum();
        let n: Vec<f64> = raw.iter().map(|x| x / z).collect();
        let fit = fit_boltzmann(&n, &energies, 1e-12).unwrap();
        if (fit.beta - beta).abs() <= 3.0 * fit.beta_err {
            hits += 1;
        }
    }
    assert!(hits >= 185, "{hits} of 200 within three standard errors");
}

#[test]
fn multiplicative_noise_fit_within_error() {
    let mut rng = StdRng::seed_from_u64(4);
    let beta = 0.7;
    let energies: Vec<f64> = (0..10).map(|k| -2.0 + 4.0 * k as f64 / 9.0).collect();
    let mut hits = 0;
    for _ in 0..400 {
        let raw: Vec<f64> = energies
            .iter()
            .map(|e| (-beta * e).exp() * rng.random_range(0.95..1.05))
            .collect();
        let z: f64 = raw.iter().sum();
        let n: Vec<f64> = raw.iter().map(|x| x / z).collect();
        let fit = fit_boltzmann(&n, &energies, 1e-12).unwrap();
        assert!((fit.beta - beta).abs() < 0.05);
        if (fit.beta - beta).abs() <= 3.0 * fit.beta_err {
            hits += 1;
        }
    }
    assert!(hits >= 340, "{hits} of 400 within three standard errors");
}

#[test]
fn poisson_spacings_pass_chi_squared() {
    use statrs::distribution::ChiSquared;
    let mut rng = StdRng::seed_from_u64(8);
    let spacings: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(rand_distr::Exp1)).collect();
    let h = SpacingHistogram::from_spacings(&spacings, 0.1).unwrap();
    let n = spacings.len() as f64;
    let bins = 40;
    let mut chi2 = 0.0;
    for k in 0..bins {
        let lo = k as f64 * 0.1;
        let expected = n * ((-lo).exp() - (-(lo + 0.1)).exp());
        let observed = *h.counts.get(k).unwrap_or(&0) as f64;
        chi2 += (observed - expected).powi(2) / expected;
    }
    let tail_expected = n * (-(bins as f64) * 0.1).exp();
    let tail_observed: usize = h.counts.iter().skip(bins).sum();
    chi2 += (tail_observed as f64 - tail_expected).powi(2) / tail_expected;
    let p = 1.0 - ChiSquared::new(bins as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "χ² = {chi2}, p = {p}");
}

#[test]
fn goe_spacings_follow_wigner_dyson() {
    let mut rng = StdRng::seed_from_u64(9);
    let mut spacings = Vec::new();
    for _ in 0..6 {
        let ev = goe_levels(900, &mut rng);
        let u = unfold(&ev, EnergyWindow::new(ev[150], ev[750])).unwrap();
        spacings.extend(u.spacings());
    }
    let h = SpacingHistogram::from_spacings(&spacings, 0.1).unwrap();
    let cdf = |x: f64| 1.0 - (-std::f64::consts::PI * x * x / 4.0).exp();
    let n = spacings.len() as f64;
    let bins = 30;
    let mut chi2 = 0.0;
    for k in 0..bins {
        let lo = k as f64 * 0.1;
        let expected = n * (cdf(lo + 0.1) - cdf(lo));
        let observed = *h.counts.get(k).unwrap_or(&0) as f64;
        chi2 += (observed - expected).powi(2) / expected;
    }
    let p = 1.0 - statrs::distribution::ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.001, "χ² = {chi2}, p = {p}");
    let fine = SpacingHistogram::from_spacings(&spacings, DEFAULT_SPACING_BIN).unwrap();
    let gamma = fit_brody(&fine).unwrap().gamma;
    assert!(gamma > 0.85, "{gamma}");
}
