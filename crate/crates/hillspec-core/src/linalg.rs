//! Dense complex linear algebra used by the matrix oracle: eigendecomposition,
//! singular values, operator norms, and a small min-cost assignment solver
//! for eigenvalue pairing conflicts.
//!
//! The heavy factorizations are delegated to `faer`; this module owns the
//! conversions and the conventions (row-major `Vec<Complex64>` storage).

use faer::linalg::solvers::{Eigen, Svd};
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::default(); n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] += v;
    }

    fn to_faer(&self) -> Mat<Complex64> {
        Mat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// `self * v`.
    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                let row = &self.data[i * self.n..(i + 1) * self.n];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// `self^H * v` (conjugate transpose application).
    pub fn matvec_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.n);
        let mut out = vec![Complex64::default(); self.n];
        for i in 0..self.n {
            let vi = v[i];
            let row = &self.data[i * self.n..(i + 1) * self.n];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * vi;
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }
}

/// One right eigenpair of a dense complex matrix.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: Complex64,
    /// Unit 2-norm right eigenvector.
    pub vector: Vec<Complex64>,
}

/// Full eigendecomposition; pairs are returned sorted by `|value|`.
pub fn eigen_decompose(m: &CMatrix) -> Result<Vec<EigenPair>> {
    let a = m.to_faer();
    let eig: Eigen<f64> =
        Eigen::new(a.as_ref()).map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let u = eig.U();
    let s = eig.S();
    let mut pairs: Vec<EigenPair> = (0..m.n)
        .map(|j| {
            let mut vector: Vec<Complex64> = (0..m.n).map(|i| u[(i, j)]).collect();
            let norm = l2_norm(&vector);
            if norm > 0.0 {
                for v in &mut vector {
                    *v /= norm;
                }
            }
            EigenPair { value: s[j], vector }
        })
        .collect();
    pairs.sort_by(|a, b| {
        a.value
            .norm()
            .partial_cmp(&b.value.norm())
            .unwrap()
            .then(a.value.re.partial_cmp(&b.value.re).unwrap())
            .then(a.value.im.partial_cmp(&b.value.im).unwrap())
    });
    Ok(pairs)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    let a = m.to_faer();
    let svd: Svd<Complex64> =
        Svd::new(a.as_ref()).map_err(|e| Error::Eigensolver(format!("svd: {e:?}")))?;
    let s = svd.S();
    Ok((0..m.n).map(|i| s[i].re).collect())
}

/// Operator 2-norm (largest singular value).
pub fn operator_norm(m: &CMatrix) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

pub fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `<u, v> = sum u_i conj(v_i)`, the inner product linear in the first slot.
pub fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

/// Min-cost perfect assignment of rows to columns on a square cost matrix
/// (Hungarian algorithm with Jonker–Volgenant potentials). Sizes here are
/// the handful of low-index pairing conflicts, so O(n^3) is plenty.
pub fn assign_min_cost(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based potentials over rows (u) and columns (v).
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut match_col = vec![0usize; n + 1]; // column -> row (1-based, 0 = free)

    for i in 1..=n {
        match_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = match_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if match_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if match_col[j] != 0 {
            row_to_col[match_col[j] - 1] = j - 1;
        }
    }
    row_to_col
}
