//! Brute-force constructions shared by the oracle and acceptance targets.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use typicality::eigen::diagonalize;
use typicality::model::{build_hamiltonian, enumerate_basis, impurity_hamiltonian, MemoryBudget, ModelParams};
use typicality::rdm::{analyze_state, bath_reduction, impurity_reduction, RdmOptions};

pub const TOL: f64 = 1e-10;

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

/// Annihilator on mode `j` of `m` modes, with the string on modes `< j`.
fn annihilator(j: usize, m: usize) -> DMatrix<f64> {
    let id = DMatrix::<f64>::identity(2, 2);
    let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    (0..m).fold(DMatrix::identity(1, 1), |acc, k| {
        let f = match k.cmp(&j) {
            std::cmp::Ordering::Less => &z,
            std::cmp::Ordering::Equal => &a,
            std::cmp::Ordering::Greater => &id,
        };
        kron(&acc, f)
    })
}

fn tilt(p: &ModelParams, j: usize) -> f64 {
    let x = j as f64 / (p.m_sites - 1) as f64;
    p.tilt_amplitude * (-0.5 + x.powi(p.tilt_exponent as i32))
}

struct Oracle {
    /// Hamiltonian restricted to the particle-number sector.
    h: DMatrix<f64>,
    /// Number operators restricted to the sector, per site.
    n_ops: Vec<DMatrix<f64>>,
    m: usize,
    sector: usize,
}

impl Oracle {
    fn new(p: &ModelParams) -> Self {
        let m = p.m_sites;
        let c: Vec<DMatrix<f64>> = (0..m).map(|j| annihilator(j, m)).collect();
        let n: Vec<DMatrix<f64>> = c.iter().map(|cj| cj.transpose() * cj).collect();
        let fock = 1usize << m;
        let mut hb = DMatrix::zeros(fock, fock);
        for j in 0..m {
            hb += &n[j] * tilt(p, j);
            if j + 1 < m {
                let hop = c[j].transpose() * &c[j + 1];
                hb -= (&hop + hop.transpose()) * p.j_bath;
                hb += (&n[j] * &n[j + 1]) * p.w_bb;
            }
        }
        let mut hi = DMatrix::zeros(m, m);
        for j in 0..m {
            hi[(j, j)] = tilt(p, j);
            if j + 1 < m {
                hi[(j, j + 1)] = -p.j_imp;
                hi[(j + 1, j)] = -p.j_imp;
            }
        }
        let mut h = kron(&hi, &DMatrix::identity(fock, fock)) + kron(&DMatrix::identity(m, m), &hb);
        for j in 0..m {
            let mut proj = DMatrix::zeros(m, m);
            proj[(j, j)] = 1.0;
            h += kron(&proj, &n[j]) * p.w_ib;
        }
        let total: DMatrix<f64> = n.iter().fold(DMatrix::zeros(fock, fock), |acc, x| acc + x);
        let keep: Vec<usize> = (0..fock)
            .filter(|&s| (total[(s, s)] - p.n_bath as f64).abs() < 0.5)
            .collect();
        let sector = keep.len();
        let full_keep: Vec<usize> = (0..m).flat_map(|i| keep.iter().map(move |&s| i * fock + s)).collect();
        let h = h.select_rows(&full_keep).select_columns(&full_keep);
        let n_ops = n
            .iter()
            .map(|nj| {
                let big = kron(&DMatrix::identity(m, m), nj);
                big.select_rows(&full_keep).select_columns(&full_keep)
            })
            .collect();
        Self { h, n_ops, m, sector }
    }

    fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.h.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = eig.eigenvectors.select_columns(&order);
        (values, vectors)
    }

    fn reduce(&self, psi: &DVector<f64>) -> DMatrix<f64> {
        let s = self.sector;
        DMatrix::from_fn(self.m, self.m, |a, b| {
            (0..s).map(|k| psi[a * s + k] * psi[b * s + k]).sum()
        })
    }

    fn density(&self, psi: &DVector<f64>) -> Vec<f64> {
        self.n_ops.iter().map(|nj| psi.dot(&(nj * psi))).collect()
    }
}

/// Distance between the reduction of `psi` and the Gibbs state fitted to it,
/// built from closed-form regression and a matrix exponential.
fn oracle_gibbs_distance(o: &Oracle, p: &ModelParams, psi: &DVector<f64>) -> Option<f64> {
    let d = o.reduce(psi);
    let mut h = impurity_hamiltonian(p);
    for (j, rho) in o.density(psi).iter().enumerate() {
        h[(j, j)] += p.w_ib * rho;
    }
    let eig = SymmetricEigen::new(d.clone());
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut used = 0;
    for (k, &n) in eig.eigenvalues.iter().enumerate() {
        if n < 1e-12 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let e = v.dot(&(&h * v));
        let w = n * n;
        sw += w;
        sx += w * e;
        sy += w * n.ln();
        sxx += w * e * e;
        sxy += w * e * n.ln();
        used += 1;
    }
    if used < 3 {
        return None;
    }
    let slope = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
    let beta = -slope;
    let g = (&h * -beta).exp();
    let g = &g / g.trace();
    Some((d - g).symmetric_eigenvalues().iter().map(|l| l.abs()).sum())
}

pub fn library_spectrum(p: &ModelParams) -> typicality::eigen::SpectrumResult {
    let budget = MemoryBudget::default();
    let basis = enumerate_basis(p, budget).unwrap();
    let h = build_hamiltonian(&basis, p).unwrap();
    diagonalize(&h, budget).unwrap()
}

/// Largest deviations between the library and the operator construction.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleReport {
    pub spectrum: f64,
    pub rdm: f64,
    pub distance: f64,
    /// Nondegenerate states whose reductions were compared.
    pub compared: usize,
    pub states: usize,
    pub fit_mismatches: usize,
}

impl OracleReport {
    pub fn worst(&self) -> f64 {
        self.spectrum.max(self.rdm).max(self.distance)
    }

    pub fn ok(&self) -> bool {
        self.worst() < TOL && self.fit_mismatches == 0 && self.compared > self.states / 2
    }
}

pub fn compare_with_oracle(p: &ModelParams) -> OracleReport {
    let oracle = Oracle::new(p);
    let (values, vectors) = oracle.eigen();
    let s = library_spectrum(p);
    assert_eq!(s.dimension(), values.len());
    let mut report = OracleReport {
        states: values.len(),
        ..Default::default()
    };
    for (a, b) in s.eigenvalues().iter().zip(&values) {
        report.spectrum = report.spectrum.max((a - b).abs());
    }
    let options = RdmOptions::default();
    for alpha in 0..values.len() {
        let gap_below = if alpha > 0 { values[alpha] - values[alpha - 1] } else { f64::INFINITY };
        let gap_above = values.get(alpha + 1).map_or(f64::INFINITY, |v| v - values[alpha]);
        if gap_below.min(gap_above) < 1e-6 {
            continue;
        }
        let psi = vectors.column(alpha).into_owned();
        let lib = analyze_state(&s, alpha, &options).unwrap();
        let d_oracle = oracle.reduce(&psi);
        report.rdm = report.rdm.max((&lib.rdm.matrix - &d_oracle).abs().max());
        match (lib.verdict.gibbs_distance, oracle_gibbs_distance(&oracle, p, &psi)) {
            (Some(a), Some(b)) => report.distance = report.distance.max((a - b).abs()),
            (None, None) => {}
            _ => report.fit_mismatches += 1,
        }
        report.compared += 1;
    }
    report
}

pub fn check_against_oracle(p: ModelParams) {
    let r = compare_with_oracle(&p);
    assert!(r.ok(), "{p:?}: {r:?}");
}

/// Largest gap between the noninteracting spectrum and its Minkowski sum.
pub fn minkowski_deviation(p: &ModelParams) -> f64 {
    let s = library_spectrum(p);
    let expected = minkowski_sum(p);
    assert_eq!(s.dimension(), expected.len());
    s.eigenvalues()
        .iter()
        .zip(&expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Largest mismatch between the Schmidt spectra seen from either side, over
/// every eigenstate.
pub fn schmidt_defect(p: &ModelParams) -> f64 {
    let s = library_spectrum(p);
    let m = p.m_sites;
    let mut worst = 0.0f64;
    for alpha in 0..s.dimension() {
        let psi = s.eigenvector(alpha);
        let mut a: Vec<f64> = impurity_reduction(psi, m).symmetric_eigenvalues().iter().copied().collect();
        let mut b: Vec<f64> = bath_reduction(psi, m).symmetric_eigenvalues().iter().copied().collect();
        a.sort_by(|x, y| y.total_cmp(x));
        b.sort_by(|x, y| y.total_cmp(x));
        let shared = m.min(b.len());
        for k in 0..shared {
            worst = worst.max((a[k] - b[k]).abs());
        }
        for x in a[shared..].iter().chain(&b[shared..]) {
            worst = worst.max(x.abs());
        }
    }
    worst
}

/// Without interactions the spectrum is every impurity level plus every sum
/// of `N_B` distinct bath levels.
pub fn minkowski_sum(p: &ModelParams) -> Vec<f64> {
    let imp: Vec<f64> = impurity_hamiltonian(p).symmetric_eigenvalues().iter().copied().collect();
    let mut bath_one_body = impurity_hamiltonian(p);
    for j in 0..p.m_sites - 1 {
        bath_one_body[(j, j + 1)] = -p.j_bath;
        bath_one_body[(j + 1, j)] = -p.j_bath;
    }
    let eps: Vec<f64> = bath_one_body.symmetric_eigenvalues().iter().copied().collect();
    let many: Vec<f64> = (0u32..1 << p.m_sites)
        .filter(|s| s.count_ones() as usize == p.n_bath)
        .map(|s| (0..p.m_sites).filter(|&k| s >> k & 1 == 1).map(|k| eps[k]).sum())
        .collect();
    let mut all: Vec<f64> = imp.iter().flat_map(|e| many.iter().map(move |b| e + b)).collect();
    all.sort_by(f64::total_cmp);
    all
}

