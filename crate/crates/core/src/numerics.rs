//! Dense symmetric linear algebra shared by the other modules.
//!
//! Eigendecompositions are delegated to `nalgebra`; this module fixes the
//! conventions on top of it (descending order, symmetrization, truncation of
//! small eigenvalues for the pseudo-inverse).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Full spectrum of a symmetric matrix, eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, aligned with `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

/// Relative eigenvalue cut-off used when none is given: `1e-10 * size`.
pub fn default_rel_tol(size: usize) -> f64 {
    1e-10 * size.max(1) as f64
}

/// Eigendecomposition of `(A + Aᵀ)/2`.
pub fn eig_sym(a: &DMatrix<f64>) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "eig_sym needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(SymmetricEigen { eigenvalues: Vec::new(), eigenvectors: DMatrix::zeros(0, 0) });
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    // total_cmp keeps the ordering deterministic, stable sort keeps ties in place
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SymmetricEigen { eigenvalues, eigenvectors })
}

impl SymmetricEigen {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    fn kept(&self, rel_tol: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
        let top = self.eigenvalues.first().copied().unwrap_or(0.0);
        let cut = rel_tol * top;
        self.eigenvalues
            .iter()
            .copied()
            .enumerate()
            .filter(move |&(_, s)| s > 0.0 && s > cut)
    }

    /// `A⁺ b` with eigenvalues at or below `rel_tol * λ_max` discarded.
    pub fn pinv_apply(&self, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.len());
        for (k, s) in self.kept(rel_tol) {
            let v = self.eigenvectors.column(k);
            let coef = v.dot(b) / s;
            out.axpy(coef, &v, 1.0);
        }
        out
    }

    /// The truncated pseudo-inverse as an explicit matrix.
    pub fn pinv_matrix(&self, rel_tol: f64) -> DMatrix<f64> {
        let n = self.len();
        let mut out = DMatrix::zeros(n, n);
        for (k, s) in self.kept(rel_tol) {
            let v = self.eigenvectors.column(k);
            out.ger(1.0 / s, &v, &v, 1.0);
        }
        out
    }

    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.len(), self.len(), |r, c| {
            self.eigenvectors[(r, c)] * self.eigenvalues[c]
        });
        scaled * self.eigenvectors.transpose()
    }
}

/// Applies the pseudo-inverse of a symmetric PSD matrix to `b`.
///
/// An all-zero `A` maps every `b` to the zero vector.
pub fn pinv_apply(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.len() });
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::invalid(format!("rel_tol must lie in (0,1), got {rel_tol}")));
    }
    Ok(eig_sym(a)?.pinv_apply(b, rel_tol))
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}
