//! CSV and JSON emitters for sweep results and the plot-data report.
//!
//! Every CSV starts with `#` comment lines: a one-line description and the
//! schema name with its version. Empty fields stand for undefined values.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::{write_atomic, PointAnalysis, SweepResult, SweepSummary};
use crate::model::ModelParams;
use crate::rdm::{site_correlation, StateAnalysis, StateVerdict};
use crate::spectral::{
    brody_pdf, gap_ratio_reference, poisson_pdf, staircase, wigner_dyson_pdf, BrodyFitResult, DosCurve,
    EnergyWindow, GapRatioStats, Polynomial, RatioEnsemble, SpacingHistogram,
};
use crate::thermo::BetaCurve;

pub const SCHEMA_VERSION: u32 = 1;

type CsvWriter = csv::Writer<BufWriter<File>>;

fn create_csv(path: &Path, description: &str, schema: &str, header: &[&str]) -> Result<CsvWriter> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut file = BufWriter::new(File::create(path)?);
    for line in description.lines() {
        writeln!(file, "# {line}")?;
    }
    writeln!(file, "# schema: {schema}/{SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    Ok(w)
}

fn finish(mut w: CsvWriter) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn write_dos(path: &Path, dos: &DosCurve) -> Result<()> {
    let mut w = create_csv(
        path,
        &format!("Binned density of states, bin width {}", dos.bin_width),
        "dos",
        &["E_center", "count", "density", "normalized_density"],
    )?;
    let density = dos.density();
    let normalized = dos.normalized();
    for k in 0..dos.counts.len() {
        w.write_record([
            num(dos.bin_center(k)),
            dos.counts[k].to_string(),
            num(density[k]),
            num(normalized[k]),
        ])?;
    }
    finish(w)
}

/// `N(E)` at every level together with the smoothed polynomial.
pub fn write_staircase(path: &Path, eigenvalues: &[f64], smooth: &Polynomial) -> Result<()> {
    let mut w = create_csv(
        path,
        "Spectral staircase N(E) at every level and its degree-10 polynomial fit",
        "staircase",
        &["E", "N", "N_smooth"],
    )?;
    for &e in eigenvalues {
        w.write_record([num(e), staircase(eigenvalues, e).to_string(), num(smooth.value(e))])?;
    }
    finish(w)
}

pub fn write_spacing_histogram(path: &Path, h: &SpacingHistogram, brody: &BrodyFitResult) -> Result<()> {
    let mut w = create_csv(
        path,
        &format!(
            "Nearest-neighbour spacing distribution of the unfolded levels, bin width {}\nBrody fit gamma = {} +- {} (density fit {}, cumulative fit {})",
            h.bin_width, brody.gamma, brody.gamma_err, brody.gamma_pdf, brody.gamma_cdf
        ),
        "spacing_histogram",
        &["s_mid", "count", "density", "cumulative", "brody", "poisson", "wigner_dyson"],
    )?;
    let density = h.density();
    let cumulative = h.cumulative();
    for k in 0..h.counts.len() {
        let s = h.bin_center(k);
        w.write_record([
            num(s),
            h.counts[k].to_string(),
            num(density[k]),
            num(cumulative[k]),
            num(brody_pdf(s, brody.gamma)),
            num(poisson_pdf(s)),
            num(wigner_dyson_pdf(s)),
        ])?;
    }
    finish(w)
}

pub fn write_gap_ratio_histogram(path: &Path, r: &GapRatioStats) -> Result<()> {
    let mut w = create_csv(
        path,
        &format!(
            "Restricted gap ratio distribution, bin width {}, mean {} over {} ratios ({} degenerate gaps skipped)",
            r.bin_width,
            r.mean_r,
            r.ratios.len(),
            r.degeneracies
        ),
        "gap_ratio_histogram",
        &["r_mid", "density", "goe", "poisson"],
    )?;
    for (k, &d) in r.histogram.iter().enumerate() {
        let mid = (k as f64 + 0.5) * r.bin_width;
        w.write_record([
            num(mid),
            num(d),
            num(gap_ratio_reference(mid, RatioEnsemble::Goe)),
            num(gap_ratio_reference(mid, RatioEnsemble::Poisson)),
        ])?;
    }
    finish(w)
}

pub fn write_beta_curve(path: &Path, curve: &BetaCurve) -> Result<()> {
    let mut w = create_csv(
        path,
        "Inverse temperature from the smoothed total and bath densities of states and from the canonical mean energy",
        "beta_curve",
        &["E", "beta_micro_total", "beta_micro_bath", "beta_canonical"],
    )?;
    for k in 0..curve.energies.len() {
        w.write_record([
            num(curve.energies[k]),
            num(curve.beta_micro_total[k]),
            num(curve.beta_micro_bath[k]),
            num(curve.beta_canonical[k]),
        ])?;
    }
    finish(w)
}

pub fn write_verdicts(path: &Path, verdicts: &[StateVerdict], window: EnergyWindow) -> Result<()> {
    let mut w = create_csv(
        path,
        "Boltzmann fit of the impurity natural occupations for every eigenstate, with the trace distance to the fitted Gibbs state",
        "verdicts",
        &[
            "alpha",
            "E_alpha",
            "beta_fit",
            "beta_err",
            "gibbs_distance",
            "n_orbitals_used",
            "in_window",
        ],
    )?;
    for v in verdicts {
        w.write_record([
            v.alpha.to_string(),
            num(v.energy),
            opt(v.beta()),
            opt(v.beta_err()),
            opt(v.gibbs_distance),
            v.n_orbitals_used().to_string(),
            u8::from(window.contains(v.energy)).to_string(),
        ])?;
    }
    finish(w)
}

fn write_matrix(path: &Path, description: &str, schema: &str, m: &DMatrix<f64>) -> Result<()> {
    let header: Vec<String> = std::iter::once("m".to_string())
        .chain((1..=m.ncols()).map(|c| format!("m{c}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = create_csv(path, description, schema, &header)?;
    for r in 0..m.nrows() {
        let row: Vec<String> = std::iter::once((r + 1).to_string())
            .chain((0..m.ncols()).map(|c| num(m[(r, c)])))
            .collect();
        w.write_record(&row)?;
    }
    finish(w)
}

/// Full per-state dump: RDM, Gibbs state, natural orbitals and site
/// correlations.
pub fn write_state_dump(dir: &Path, a: &StateAnalysis) -> Result<()> {
    let alpha = a.verdict.alpha;
    write_matrix(
        &dir.join("rdm.csv"),
        &format!("Impurity reduced density matrix in the site basis, state {alpha}, E = {}", a.verdict.energy),
        "rdm_matrix",
        &a.rdm.matrix,
    )?;
    if let Some(g) = &a.gibbs {
        write_matrix(
            &dir.join("gibbs.csv"),
            &format!("Gibbs state at the fitted beta = {}", opt(a.verdict.beta())),
            "gibbs_matrix",
            g,
        )?;
    }
    let mut w = create_csv(
        &dir.join("orbitals.csv"),
        &format!(
            "Natural occupations against orbital energies, state {alpha}; fitted beta = {} +- {}",
            opt(a.verdict.beta()),
            opt(a.verdict.beta_err())
        ),
        "natural_orbitals",
        &["j", "occupation", "energy", "fluctuation", "boltzmann"],
    )?;
    let fit = a.verdict.fit;
    for j in 0..a.orbitals.occupations.len() {
        let e = a.orbital_energies.energies[j];
        w.write_record([
            (j + 1).to_string(),
            num(a.orbitals.occupations[j]),
            num(e),
            num(a.orbital_energies.fluctuations[j]),
            opt(fit.map(|f| (f.intercept - f.beta * e).exp())),
        ])?;
    }
    finish(w)?;
    let mut w = create_csv(
        &dir.join("correlation.csv"),
        &format!("Density-matrix site correlation C(dm) of state {alpha} and of its Gibbs state"),
        "site_correlation",
        &["dm", "rdm", "gibbs"],
    )?;
    for dm in 0..a.rdm.matrix.nrows() {
        let gibbs = match &a.gibbs {
            Some(g) => Some(site_correlation(g, dm)?),
            None => None,
        };
        w.write_record([dm.to_string(), num(site_correlation(&a.rdm.matrix, dm)?), opt(gibbs)])?;
    }
    finish(w)
}

/// Directory name of a sweep point.
pub fn point_label(p: &ModelParams) -> String {
    label(p.m_sites, p.n_bath, p.w_bb)
}

fn label(m_sites: usize, n_bath: usize, w_bb: f64) -> String {
    format!("M{m_sites}_N{n_bath}_W{w_bb}")
}

pub fn write_point(dir: &Path, a: &PointAnalysis) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_dos(&dir.join("dos.csv"), &a.spectral.dos)?;
    write_staircase(&dir.join("staircase.csv"), &a.eigenvalues, &a.spectral.staircase)?;
    write_spacing_histogram(&dir.join("spacing_hist.csv"), &a.spectral.spacings, &a.spectral.brody)?;
    write_gap_ratio_histogram(&dir.join("gap_ratio_hist.csv"), &a.spectral.ratios)?;
    write_beta_curve(&dir.join("beta_curve.csv"), &a.beta)?;
    write_verdicts(&dir.join("verdicts.csv"), &a.verdicts, a.spectral.window)?;
    write_json(&dir.join("point.json"), &a.summary)
}

/// Write a sweep result tree: `summary.json`, the resolved config and one
/// directory per point.
pub fn write_sweep(out: &Path, result: &SweepResult) -> Result<()> {
    fs::create_dir_all(out)?;
    for p in &result.points {
        write_point(&out.join("points").join(point_label(&p.params)), p)?;
    }
    let config = toml::to_string(&result.config).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    write_atomic(&out.join("sweep.toml"), config.as_bytes())?;
    write_json(&out.join("summary.json"), &result.summary)
}

pub fn read_summary(result_dir: &Path) -> Result<SweepSummary> {
    Ok(serde_json::from_slice(&fs::read(result_dir.join("summary.json"))?)?)
}

/// Concatenate one per-point CSV across all points, prefixing the point
/// coordinates.
fn gather(
    result_dir: &Path,
    summary: &SweepSummary,
    source: &str,
    target: &Path,
    description: &str,
    schema: &str,
) -> Result<()> {
    let mut out: Option<CsvWriter> = None;
    for p in &summary.points {
        let path = result_dir
            .join("points")
            .join(label(p.m_sites, p.n_bath, p.w_bb))
            .join(source);
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(&path)?;
        if out.is_none() {
            let mut header = vec!["m_sites", "n_bath", "w_bb"];
            let columns = reader.headers()?.clone();
            header.extend(columns.iter());
            out = Some(create_csv(target, description, schema, &header)?);
        }
        let w = out.as_mut().unwrap();
        for record in reader.records() {
            let record = record?;
            let mut row = vec![p.m_sites.to_string(), p.n_bath.to_string(), p.w_bb.to_string()];
            row.extend(record.iter().map(str::to_string));
            w.write_record(&row)?;
        }
    }
    match out {
        Some(w) => finish(w),
        None => Err(Error::InsufficientData("sweep summary lists no points".into())),
    }
}

pub const REPORT_FILES: [&str; 10] = [
    "staircase.csv",
    "dos.csv",
    "spacing_distribution.csv",
    "gamma_vs_wbb.csv",
    "gap_ratio_distribution.csv",
    "beta_curves.csv",
    "beta_vs_energy.csv",
    "G_vs_gamma.csv",
    "gamma_vs_size.csv",
    "G_vs_gamma_universal.csv",
];

/// Emit the plot-data bundle for a sweep result tree. Returns the files
/// written.
pub fn write_report(result_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let summary = read_summary(result_dir)?;
    fs::create_dir_all(out)?;
    let file = |name: &str| out.join(name);

    gather(
        result_dir,
        &summary,
        "staircase.csv",
        &file("staircase.csv"),
        "Spectral staircase N(E) and its smoothed polynomial fit, per point",
        "report_staircase",
    )?;
    gather(
        result_dir,
        &summary,
        "dos.csv",
        &file("dos.csv"),
        "Binned and normalized density of states for each bath-bath coupling",
        "report_dos",
    )?;
    gather(
        result_dir,
        &summary,
        "spacing_hist.csv",
        &file("spacing_distribution.csv"),
        "Level spacing distribution with Poisson, Wigner-Dyson and fitted Brody curves",
        "report_spacing_distribution",
    )?;
    gather(
        result_dir,
        &summary,
        "gap_ratio_hist.csv",
        &file("gap_ratio_distribution.csv"),
        "Restricted gap ratio distribution against the GOE and Poisson predictions",
        "report_gap_ratio_distribution",
    )?;
    gather(
        result_dir,
        &summary,
        "beta_curve.csv",
        &file("beta_curves.csv"),
        "Microcanonical and canonical inverse temperature against energy",
        "report_beta_curves",
    )?;
    gather(
        result_dir,
        &summary,
        "verdicts.csv",
        &file("beta_vs_energy.csv"),
        "Fitted inverse temperature of every eigenstate against its energy, with the fit error",
        "report_beta_vs_energy",
    )?;

    let mut w = create_csv(
        &file("gamma_vs_wbb.csv"),
        "Brody parameter against bath-bath coupling with the per-size fit gamma0*tanh(W/W0)",
        "report_gamma_vs_wbb",
        &["m_sites", "n_bath", "w_bb", "gamma", "gamma_err", "gamma_pdf", "gamma_cdf", "mean_r", "tanh_fit", "gamma0", "w0"],
    )?;
    for p in &summary.points {
        let fit = summary
            .gamma_tanh
            .iter()
            .find(|f| f.m_sites == p.m_sites && f.n_bath == p.n_bath)
            .and_then(|f| f.fit.as_ref());
        w.write_record([
            p.m_sites.to_string(),
            p.n_bath.to_string(),
            p.w_bb.to_string(),
            num(p.gamma),
            num(p.gamma_err),
            num(p.gamma_pdf),
            num(p.gamma_cdf),
            num(p.mean_r),
            opt(fit.map(|f| f.gamma0 * (p.w_bb / f.w0).tanh())),
            opt(fit.map(|f| f.gamma0)),
            opt(fit.map(|f| f.w0)),
        ])?;
    }
    finish(w)?;

    let mut w = create_csv(
        &file("G_vs_gamma.csv"),
        &format!(
            "Fraction G of Gibbs-like impurity states against the Brody parameter; G and its error are the mean and standard deviation over thresholds {:?}",
            summary.thresholds
        ),
        "report_G_vs_gamma",
        &["m_sites", "n_bath", "w_bb", "gamma", "gamma_err", "G", "G_err", "states_in_window", "median_gibbs_distance"],
    )?;
    for p in &summary.points {
        w.write_record([
            p.m_sites.to_string(),
            p.n_bath.to_string(),
            p.w_bb.to_string(),
            num(p.gamma),
            num(p.gamma_err),
            num(p.g),
            num(p.g_err),
            p.states_in_window.to_string(),
            opt(p.median_gibbs_distance),
        ])?;
    }
    finish(w)?;

    let mut w = create_csv(
        &file("gamma_vs_size.csv"),
        "Brody parameter against bath-bath coupling for each system size",
        "report_gamma_vs_size",
        &["w_bb", "m_sites", "n_bath", "dimension", "gamma", "gamma_err"],
    )?;
    let mut by_size: Vec<_> = summary.points.iter().collect();
    by_size.sort_by(|a, b| a.w_bb.total_cmp(&b.w_bb).then(a.m_sites.cmp(&b.m_sites)).then(a.n_bath.cmp(&b.n_bath)));
    for p in by_size {
        w.write_record([
            p.w_bb.to_string(),
            p.m_sites.to_string(),
            p.n_bath.to_string(),
            p.dimension.to_string(),
            num(p.gamma),
            num(p.gamma_err),
        ])?;
    }
    finish(w)?;

    let fit = summary.g_tanh2.as_ref();
    let mut w = create_csv(
        &file("G_vs_gamma_universal.csv"),
        &format!(
            "Pooled (gamma, G) over all sizes and couplings with the fit G = tanh^2(gamma/gamma0'); gamma0' = {}, rms residual = {}, Spearman rank correlation = {}",
            opt(fit.map(|f| f.gamma0_prime)),
            opt(fit.map(|f| f.rms_residual)),
            opt(summary.gamma_g_spearman)
        ),
        "report_G_vs_gamma_universal",
        &["m_sites", "n_bath", "w_bb", "gamma", "gamma_err", "G", "G_err", "tanh2_fit", "residual"],
    )?;
    for (k, p) in summary.points.iter().enumerate() {
        w.write_record([
            p.m_sites.to_string(),
            p.n_bath.to_string(),
            p.w_bb.to_string(),
            num(p.gamma),
            num(p.gamma_err),
            num(p.g),
            num(p.g_err),
            opt(fit.map(|f| (p.gamma / f.gamma0_prime).tanh().powi(2))),
            opt(fit.map(|f| f.residuals[k])),
        ])?;
    }
    finish(w)?;

    Ok(REPORT_FILES.iter().map(|f| file(f)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comment_header_and_empty_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        let curve = BetaCurve {
            energies: vec![0.0, 1.0],
            beta_micro_total: vec![0.5, f64::NAN],
            beta_micro_bath: vec![0.4, 0.3],
            beta_canonical: vec![f64::NAN, -0.1],
        };
        write_beta_curve(&path, &curve).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# "));
        assert_eq!(lines[1], "# schema: beta_curve/1");
        assert_eq!(lines[2], "E,beta_micro_total,beta_micro_bath,beta_canonical");
        assert_eq!(lines[3], "0,0.5,0.4,");
        assert_eq!(lines[4], "1,,0.3,-0.1");
    }

    #[test]
    fn labels() {
        assert_eq!(point_label(&ModelParams::new(12, 6, 0.05, 1.0)), "M12_N6_W0.05");
    }
}
