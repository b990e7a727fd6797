//! Independent ground truth for the fiber operators: the truncated
//! Fourier-basis matrix eigenproblem.
//!
//! In the basis `e^{i(2 pi k + t)x}`, `|k| <= M`, the fiber operator is the
//! dense matrix with diagonal `(2 pi k + t)^2` and off-diagonal entries
//! `q_{j-k}`. Everything else here is bookkeeping on top of its
//! eigendecomposition: pairing matrix eigenvalues to operator indices,
//! biorthogonal pairs and `alpha_n(t)`, Jordan-defect tests, finite-rank
//! spectral projections and their norms, and tail-structure reports for
//! the eigenvector asymptotics.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Once;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, assign_min_cost, eigen_decompose, inner, l2_norm, CMatrix, EigenPair};
use crate::potential::PotentialSpec;

/// Certification tolerance: central eigenvalues must agree between the two
/// truncations to `CERT_TOL * (1 + |lambda|)`.
pub const CERT_TOL: f64 = 1e-8;

/// Pairwise clustering radius for algebraic-multiplicity decisions,
/// relative to `1 + |lambda|`. Sits two orders above eigensolver error and
/// two below the smallest simple gaps the suite certifies.
pub const CLUSTER_RADIUS: f64 = 2e-8;

/// Radius used to match an externally supplied point (for instance a
/// discriminant-side candidate) to the matrix spectrum, relative to
/// `1 + |lambda|`.
pub const CANDIDATE_MATCH_RADIUS: f64 = 1e-6;

/// Singular values of `H - lambda I` below `SIGMA_TOL * (1 + |lambda|)`
/// count as kernel directions in the geometric-multiplicity test.
pub const SIGMA_TOL: f64 = 1e-7;

/// `|alpha|` below this marks the biorthogonal pairing as degenerate.
pub const ALPHA_FLOOR: f64 = 1e-6;

fn sequential_faer() {
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        // Deterministic output matters more than speed at these sizes.
        faer::set_global_parallelism(faer::Par::Seq);
    });
}

/// The fiber matrix `H(t)` at truncation half-width `M`.
pub fn hamiltonian(p: &PotentialSpec, t: f64, m: i64) -> CMatrix {
    let dim = (2 * m + 1) as usize;
    let mut h = CMatrix::zeros(dim);
    for j in -m..=m {
        for k in -m..=m {
            let i = (j + m) as usize;
            let l = (k + m) as usize;
            if j == k {
                let freq = 2.0 * PI * k as f64 + t;
                h.set(i, l, Complex64::new(freq * freq, 0.0));
            } else {
                let v = p.coeff(j - k);
                if v.norm() > 0.0 {
                    h.set(i, l, v);
                }
            }
        }
    }
    h
}

/// Eigenvalue pairing metadata for one operator index.
#[derive(Debug, Clone, Copy)]
pub struct PairingEntry {
    /// Index into [`OracleSpectrum::eigen`].
    pub eig_index: usize,
    /// Set when the nearest-center rule conflicted and the assignment came
    /// from min-cost matching over the low-index cluster.
    pub low_index_cluster: bool,
    /// Central eigenvalue agreed with the larger truncation.
    pub certified: bool,
}

/// All eigenpairs of one fiber matrix plus the index pairing.
#[derive(Debug, Clone)]
pub struct OracleSpectrum {
    pub t: f64,
    pub m: i64,
    /// Eigenpairs sorted by `|lambda|`, unit eigenvectors over `k in [-M, M]`.
    pub eigen: Vec<EigenPair>,
    /// Operator index `n` -> matrix eigenpair.
    pub pairing: BTreeMap<i64, PairingEntry>,
    /// Largest eigenpair residual `||(H - lambda) v||`.
    pub residual_max: f64,
}

impl OracleSpectrum {
    /// Paired eigenvalue for operator index `n`.
    pub fn eigenvalue(&self, n: i64) -> Result<Complex64> {
        Ok(self.eigen[self.entry(n)?.eig_index].value)
    }

    pub fn entry(&self, n: i64) -> Result<PairingEntry> {
        self.pairing
            .get(&n)
            .copied()
            .ok_or(Error::IndexOutsideCertified { index: n, max: self.m })
    }

    pub fn eigenvector(&self, n: i64) -> Result<&[Complex64]> {
        Ok(&self.eigen[self.entry(n)?.eig_index].vector)
    }

    /// Coefficient of the paired eigenvector at basis frequency index `k`.
    pub fn coefficient(&self, n: i64, k: i64) -> Result<Complex64> {
        let vec = self.eigenvector(n)?;
        let idx = k + self.m;
        if idx < 0 || idx >= vec.len() as i64 {
            return Err(Error::InvalidParameter(format!("basis index {k} outside [-M, M]")));
        }
        Ok(vec[idx as usize])
    }

    /// Indices (into `eigen`) of eigenvalues in the open disk around `center`.
    pub fn in_disk(&self, center: Complex64, radius: f64) -> Vec<usize> {
        self.eigen
            .iter()
            .enumerate()
            .filter(|(_, p)| (p.value - center).norm() < radius)
            .map(|(i, _)| i)
            .collect()
    }

    /// Whether the paired eigenvalue is simple in the pairwise-cluster sense.
    pub fn is_simple(&self, n: i64) -> Result<bool> {
        let lambda = self.eigenvalue(n)?;
        let radius = CLUSTER_RADIUS * (1.0 + lambda.norm());
        let hits = self.eigen.iter().filter(|p| (p.value - lambda).norm() < radius).count();
        Ok(hits == 1)
    }
}

/// Raw eigendecomposition plus nearest-center pairing, no certification.
pub fn spectrum_raw(p: &PotentialSpec, t: f64, m: i64) -> Result<OracleSpectrum> {
    sequential_faer();
    if m < 1 {
        return Err(Error::InvalidParameter("truncation M must be >= 1".into()));
    }
    let h = hamiltonian(p, t, m);
    let eigen = eigen_decompose(&h)?;
    let dim = (2 * m + 1) as usize;
    debug_assert_eq!(eigen.len(), dim);

    let mut residual_max: f64 = 0.0;
    for pair in &eigen {
        let hv = h.matvec(&pair.vector);
        let res: f64 = hv
            .iter()
            .zip(&pair.vector)
            .map(|(a, b)| (a - pair.value * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        residual_max = residual_max.max(res);
    }
    let h_scale = (2.0 * PI * m as f64 + PI).powi(2) + p.max_abs_coeff() * dim as f64;
    if residual_max > 1e-11 * (1.0 + h_scale) {
        return Err(Error::Eigensolver(format!(
            "eigenpair residual {residual_max:.3e} above sanity bound"
        )));
    }

    let pairing = pair_to_indices(&eigen, t, m);
    Ok(OracleSpectrum { t, m, eigen, pairing, residual_max })
}

/// Nearest-center pairing with min-cost fallback on conflicts.
fn pair_to_indices(eigen: &[EigenPair], t: f64, m: i64) -> BTreeMap<i64, PairingEntry> {
    let center = |n: i64| {
        let f = 2.0 * PI * n as f64 + t;
        Complex64::new(f * f, 0.0)
    };
    let mut claimed: Vec<Option<i64>> = vec![None; eigen.len()];
    let mut conflicted: Vec<i64> = Vec::new();
    let mut chosen: BTreeMap<i64, usize> = BTreeMap::new();

    for n in -m..=m {
        let c = center(n);
        let best = (0..eigen.len())
            .min_by(|&a, &b| {
                let da = (eigen[a].value - c).norm();
                let db = (eigen[b].value - c).norm();
                da.partial_cmp(&db).unwrap()
            })
            .expect("nonempty spectrum");
        match claimed[best] {
            None => {
                claimed[best] = Some(n);
                chosen.insert(n, best);
            }
            Some(other) => {
                conflicted.push(n);
                if !conflicted.contains(&other) {
                    conflicted.push(other);
                }
            }
        }
    }
    for n in &conflicted {
        if let Some(i) = chosen.remove(n) {
            claimed[i] = None;
        }
    }

    let mut pairing = BTreeMap::new();
    for (&n, &i) in &chosen {
        pairing.insert(n, PairingEntry { eig_index: i, low_index_cluster: false, certified: false });
    }
    if !conflicted.is_empty() {
        conflicted.sort_unstable();
        let free: Vec<usize> = (0..eigen.len()).filter(|&i| claimed[i].is_none()).collect();
        let rows = conflicted.len();
        let cols = free.len();
        let size = rows.max(cols);
        // Square padding with a prohibitive cost so dummies never displace
        // a real assignment.
        let padded: Vec<Vec<f64>> = (0..size)
            .map(|r| {
                (0..size)
                    .map(|cidx| {
                        if r < rows && cidx < cols {
                            (eigen[free[cidx]].value - center(conflicted[r])).norm()
                        } else {
                            1e15
                        }
                    })
                    .collect()
            })
            .collect();
        let assignment = assign_min_cost(&padded);
        for (r, &n) in conflicted.iter().enumerate() {
            let cidx = assignment[r];
            if cidx < cols {
                pairing.insert(
                    n,
                    PairingEntry { eig_index: free[cidx], low_index_cluster: true, certified: false },
                );
            }
        }
    }
    pairing
}

/// Full oracle: eigendecomposition with central indices (`|n| <= M/2`)
/// certified against the doubled truncation.
pub fn oracle_spectrum(p: &PotentialSpec, t: f64, m: i64) -> Result<OracleSpectrum> {
    oracle_spectrum_certified(p, t, m, 2 * m)
}

/// Oracle with an explicit certification truncation `m_cert > m`.
pub fn oracle_spectrum_certified(
    p: &PotentialSpec,
    t: f64,
    m: i64,
    m_cert: i64,
) -> Result<OracleSpectrum> {
    if m_cert <= m {
        return Err(Error::InvalidParameter("certification truncation must exceed M".into()));
    }
    let mut spec = spectrum_raw(p, t, m)?;
    let big = spectrum_raw(p, t, m_cert)?;
    let half = m / 2;
    for n in -half..=half {
        let (Ok(small_l), Ok(big_l)) = (spec.eigenvalue(n), big.eigenvalue(n)) else {
            continue;
        };
        let delta = (small_l - big_l).norm();
        let tol = CERT_TOL * (1.0 + small_l.norm());
        if delta > tol {
            return Err(Error::CertificationFailure { index: n, delta, tol });
        }
        spec.pairing.get_mut(&n).expect("paired above").certified = true;
    }
    Ok(spec)
}

/// Biorthogonal data of one eigenvalue: the eigenvector, the adjoint
/// eigenvector, their pairing `alpha_n(t)`, and the leading-coefficient
/// split of the eigenvector.
#[derive(Debug, Clone)]
pub struct BiorthogonalData {
    pub n: i64,
    pub t: f64,
    pub lambda: Complex64,
    /// `(Psi, Psi*)`; zero when the pairing is defective.
    pub alpha: Complex64,
    /// Coefficient at basis index `+|n|`.
    pub u: Complex64,
    /// Coefficient at basis index `-|n|`.
    pub v: Complex64,
    /// Norm of the eigenvector minus its two leading coefficients.
    pub tail_norm: f64,
    /// Geometric multiplicity deficit detected (associated function exists).
    pub defect: bool,
    pub eigenvector: Vec<Complex64>,
    pub adjoint_vector: Vec<Complex64>,
}

/// Primal and adjoint eigendecompositions of one fiber, reusable across
/// operator indices.
#[derive(Debug, Clone)]
pub struct FiberSolve {
    pub spectrum: OracleSpectrum,
    pub adjoint: Vec<EigenPair>,
}

pub fn fiber_solve(p: &PotentialSpec, t: f64, m: i64) -> Result<FiberSolve> {
    let spectrum = spectrum_raw(p, t, m)?;
    let h_adj = hamiltonian(p, t, m).adjoint();
    let adjoint = eigen_decompose(&h_adj)?;
    Ok(FiberSolve { spectrum, adjoint })
}

impl FiberSolve {
    /// Adjoint eigenpair for the eigenvalue nearest `conj(lambda)`.
    pub fn adjoint_pair_for(&self, lambda: Complex64) -> &EigenPair {
        let target = lambda.conj();
        self.adjoint
            .iter()
            .min_by(|a, b| {
                (a.value - target).norm().partial_cmp(&(b.value - target).norm()).unwrap()
            })
            .expect("nonempty adjoint spectrum")
    }

    /// Multiplicity data at a probe point; `match_radius` is relative to
    /// `1 + |probe|`.
    pub fn defect_report(
        &self,
        p: &PotentialSpec,
        probe: Complex64,
        match_radius: f64,
    ) -> Result<DefectReport> {
        let radius = match_radius * (1.0 + probe.norm());
        let cluster: Vec<usize> = self
            .spectrum
            .eigen
            .iter()
            .enumerate()
            .filter(|(_, e)| (e.value - probe).norm() < radius)
            .map(|(i, _)| i)
            .collect();
        let algebraic = cluster.len();
        if algebraic == 0 {
            return Ok(DefectReport { algebraic: 0, geometric: 0, sigma_min: f64::NAN });
        }
        let mean: Complex64 = cluster
            .iter()
            .map(|&i| self.spectrum.eigen[i].value)
            .sum::<Complex64>()
            / algebraic as f64;
        let mut shifted = hamiltonian(p, self.spectrum.t, self.spectrum.m);
        for i in 0..shifted.n {
            let d = shifted.get(i, i) - mean;
            shifted.set(i, i, d);
        }
        let sigmas = linalg::singular_values(&shifted)?;
        let tol = SIGMA_TOL * (1.0 + mean.norm());
        let geometric = sigmas.iter().filter(|&&s| s < tol).count();
        let sigma_min = sigmas.last().copied().unwrap_or(f64::NAN);
        Ok(DefectReport { algebraic, geometric, sigma_min })
    }
}

/// Multiplicity evidence at one spectral point.
#[derive(Debug, Clone, Copy)]
pub struct DefectReport {
    pub algebraic: usize,
    pub geometric: usize,
    pub sigma_min: f64,
}

impl DefectReport {
    pub fn is_defective(&self) -> bool {
        self.algebraic >= 2 && self.geometric < self.algebraic
    }
}

/// Eigenvector, adjoint eigenvector and `alpha_n(t)` for operator index `n`.
pub fn pair_and_alpha(p: &PotentialSpec, t: f64, m: i64, n: i64) -> Result<BiorthogonalData> {
    let fiber = fiber_solve(p, t, m)?;
    pair_and_alpha_from(p, &fiber, n)
}

pub fn pair_and_alpha_from(
    p: &PotentialSpec,
    fiber: &FiberSolve,
    n: i64,
) -> Result<BiorthogonalData> {
    let m = fiber.spectrum.m;
    if n.abs() > m / 2 {
        return Err(Error::IndexOutsideCertified { index: n, max: m / 2 });
    }
    let lambda = fiber.spectrum.eigenvalue(n)?;
    let vector = fiber.spectrum.eigenvector(n)?.to_vec();
    let adj = fiber.adjoint_pair_for(lambda);
    let adjoint_vector = adj.vector.clone();

    let alpha = inner(&vector, &adjoint_vector);
    let defect = {
        let rep = fiber.defect_report(p, lambda, CLUSTER_RADIUS)?;
        rep.is_defective() || alpha.norm() < ALPHA_FLOOR
    };

    let u = fiber.spectrum.coefficient(n, n.abs())?;
    let v = fiber.spectrum.coefficient(n, -n.abs())?;
    let tail_sq = (l2_norm(&vector).powi(2) - u.norm_sqr() - v.norm_sqr()).max(0.0);

    Ok(BiorthogonalData {
        n,
        t: fiber.spectrum.t,
        lambda,
        alpha: if defect { Complex64::default() } else { alpha },
        u,
        v,
        tail_norm: tail_sq.sqrt(),
        defect,
        eigenvector: vector,
        adjoint_vector,
    })
}

/// Axis-aligned half-closed rectangle `[re0, re1) x [im0, im1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub re0: f64,
    pub re1: f64,
    pub im0: f64,
    pub im1: f64,
}

impl Rectangle {
    pub fn centered(c: Complex64, half_re: f64, half_im: f64) -> Self {
        Self { re0: c.re - half_re, re1: c.re + half_re, im0: c.im - half_im, im1: c.im + half_im }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re0 && z.re < self.re1 && z.im >= self.im0 && z.im < self.im1
    }

    /// Distance from `z` to the rectangle boundary (zero on the boundary).
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        let dx = (z.re - self.re0).abs().min((z.re - self.re1).abs());
        let dy = (z.im - self.im0).abs().min((z.im - self.im1).abs());
        if self.contains(z) {
            dx.min(dy)
        } else {
            let ox = if z.re < self.re0 {
                self.re0 - z.re
            } else if z.re >= self.re1 {
                z.re - self.re1
            } else {
                0.0
            };
            let oy = if z.im < self.im0 {
                self.im0 - z.im
            } else if z.im >= self.im1 {
                z.im - self.im1
            } else {
                0.0
            };
            if ox == 0.0 {
                dy
            } else if oy == 0.0 {
                dx
            } else {
                (ox * ox + oy * oy).sqrt()
            }
        }
    }
}

/// Result of building a finite-rank spectral projection over a region.
#[derive(Debug, Clone)]
pub struct ProjectionNormReport {
    /// Operator 2-norm; `+inf` when a defective eigenvalue lies inside.
    pub norm: f64,
    /// Operator indices of the eigenvalues inside the region (`i64::MIN`
    /// for eigenvalues the pairing could not label).
    pub members: Vec<i64>,
    /// Index of the defective member, if any.
    pub defect_index: Option<i64>,
}

/// Builds `e(t, region) = sum (1/alpha_n) Psi_n (x) conj(Psi*_n)` over the
/// eigenvalues inside the region and returns its operator 2-norm.
pub fn projection_norm(
    p: &PotentialSpec,
    t: f64,
    m: i64,
    region: &[Rectangle],
) -> Result<ProjectionNormReport> {
    let fiber = fiber_solve(p, t, m)?;
    projection_norm_from(p, &fiber, region)
}

pub fn projection_norm_from(
    p: &PotentialSpec,
    fiber: &FiberSolve,
    region: &[Rectangle],
) -> Result<ProjectionNormReport> {
    let spec = &fiber.spectrum;
    for e in &spec.eigen {
        let floor = 1e-9 * (1.0 + e.value.norm());
        for r in region {
            let d = r.boundary_distance(e.value);
            if d < floor {
                return Err(Error::BoundaryEigenvalue { lambda: e.value, distance: d });
            }
        }
    }

    let index_of: BTreeMap<usize, i64> =
        spec.pairing.iter().map(|(&n, pe)| (pe.eig_index, n)).collect();

    let mut members = Vec::new();
    let dim = spec.eigen.len();
    let mut proj = CMatrix::zeros(dim);
    for (i, e) in spec.eigen.iter().enumerate() {
        if !region.iter().any(|r| r.contains(e.value)) {
            continue;
        }
        let n = index_of.get(&i).copied().unwrap_or(i64::MIN);
        members.push(n);
        let rep = fiber.defect_report(p, e.value, CLUSTER_RADIUS)?;
        let adj = fiber.adjoint_pair_for(e.value);
        let alpha = inner(&e.vector, &adj.vector);
        if rep.is_defective() || alpha.norm() < ALPHA_FLOOR {
            return Ok(ProjectionNormReport { norm: f64::INFINITY, members, defect_index: Some(n) });
        }
        for r in 0..dim {
            for cidx in 0..dim {
                proj.add(r, cidx, e.vector[r] * adj.vector[cidx].conj() / alpha);
            }
        }
    }
    let norm = if members.is_empty() { 0.0 } else { linalg::operator_norm(&proj)? };
    Ok(ProjectionNormReport { norm, members, defect_index: None })
}

/// Smallest `n0 >= 1` such that for every `n in [n0, M/2]` and every grid
/// `t` the disk `D(n, t, rho)` holds exactly two eigenvalues, both simple.
/// `None` when no such threshold exists (degenerate fibers on the grid, as
/// for potentials with persistent double points).
pub fn n_est(p: &PotentialSpec, m: i64, rho: f64, t_grid: &[f64]) -> Result<Option<i64>> {
    let half = m / 2;
    let mut ok = vec![true; (half + 1) as usize];
    for &t in t_grid {
        let spec = spectrum_raw(p, t, m)?;
        for n in 1..=half {
            let center_f = 2.0 * PI * n as f64 + t;
            let center = Complex64::new(center_f * center_f, 0.0);
            let radius = 15.0 * PI * n as f64 * rho;
            let inside = spec.in_disk(center, radius);
            let mut good = inside.len() == 2;
            if good {
                let a = spec.eigen[inside[0]].value;
                let b = spec.eigen[inside[1]].value;
                let sep = CLUSTER_RADIUS * (1.0 + a.norm());
                good = (a - b).norm() > sep;
            }
            if !good {
                ok[n as usize] = false;
            }
        }
    }
    let mut n0 = None;
    for n in (1..=half).rev() {
        if ok[n as usize] {
            n0 = Some(n);
        } else {
            break;
        }
    }
    Ok(n0)
}

/// Structure data of one paired eigenvector used by the tail-bound checks.
#[derive(Debug, Clone, Copy)]
pub struct VectorStructure {
    pub n: i64,
    pub lambda: Complex64,
    /// `sum_{k != +-n} |c_k|`.
    pub tail_l1: f64,
    /// `sum_{k != +-n} |c_k|^2`.
    pub tail_l2_sq: f64,
    /// `|u|^2 + |v|^2`.
    pub leading_mass: f64,
    pub u_abs: f64,
    pub v_abs: f64,
    /// `max_k |(q Psi, e_k)|` over `|k| <= M/2`, from the convolution of
    /// the coefficient tables.
    pub q_psi_coeff_max: f64,
}

/// Tail and leading-coefficient structure of the eigenvector at index `n`.
pub fn vector_structure(
    p: &PotentialSpec,
    spec: &OracleSpectrum,
    n: i64,
) -> Result<VectorStructure> {
    let lambda = spec.eigenvalue(n)?;
    let vec = spec.eigenvector(n)?;
    let m = spec.m;
    let mut tail_l1 = 0.0;
    let mut tail_l2_sq = 0.0;
    for k in -m..=m {
        if k == n.abs() || k == -n.abs() {
            continue;
        }
        let c = vec[(k + m) as usize].norm();
        tail_l1 += c;
        tail_l2_sq += c * c;
    }
    let u = vec[(n.abs() + m) as usize];
    let v = vec[(-n.abs() + m) as usize];

    let mut q_psi_coeff_max: f64 = 0.0;
    for k in -(m / 2)..=(m / 2) {
        // (q Psi)_k = sum_j q_j c_{k-j}
        let mut acc = Complex64::default();
        for (j, qj) in p.entries() {
            let idx = k - j;
            if idx.abs() <= m {
                acc += qj * vec[(idx + m) as usize];
            }
        }
        q_psi_coeff_max = q_psi_coeff_max.max(acc.norm());
    }

    Ok(VectorStructure {
        n,
        lambda,
        tail_l1,
        tail_l2_sq,
        leading_mass: u.norm_sqr() + v.norm_sqr(),
        u_abs: u.norm(),
        v_abs: v.norm(),
        q_psi_coeff_max,
    })
}
