//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{FvError, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<Complex64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), -I, I, c(0.0)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

/// Largest entry of `|A − A†|`.
pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a - b))
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().iter().sum()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Spectral decomposition of a Hermitian matrix: ascending real eigenvalues
/// and the unitary whose columns are the matching eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn eigh(a: &CMatrix) -> Eigh {
    let n = a.nrows();
    // symmetrize so the solver sees an exactly Hermitian input
    let sym = (a + a.adjoint()) * c(0.5);
    let se = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, k| se.eigenvectors[(r, order[k])]);
    Eigh { values, vectors }
}

impl Eigh {
    /// `f(A) = V diag(f(λ)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let d = DVector::from_iterator(self.values.len(), self.values.iter().map(|&x| f(x)));
        let scaled = CMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |r, k| {
            self.vectors[(r, k)] * d[k]
        });
        scaled * self.vectors.adjoint()
    }

    /// `exp(−i A t)`.
    pub fn propagator(&self, t: f64) -> CMatrix {
        self.map(|e| C64::new(0.0, -e * t).exp())
    }
}

/// `exp(−i H t)` for Hermitian `H`.
pub fn unitary(h: &CMatrix, t: f64) -> CMatrix {
    eigh(h).propagator(t)
}

/// General dense matrix exponential (scaling and squaring with Padé).
pub fn expm(a: &CMatrix) -> CMatrix {
    a.exp()
}

/// Traces out the right factor of a `left ⊗ right` operator.
pub fn partial_trace_right(a: &CMatrix, left: usize, right: usize) -> Result<CMatrix> {
    if a.nrows() != left * right || a.ncols() != left * right {
        return Err(FvError::DimensionMismatch {
            expected: left * right,
            got: a.nrows(),
        });
    }
    Ok(CMatrix::from_fn(left, left, |i, j| {
        (0..right).map(|k| a[(i * right + k, j * right + k)]).sum()
    }))
}

/// Real row-major `[re, im]` pairs to a matrix.
pub fn from_pairs(dim: usize, entries: &[[f64; 2]]) -> Result<CMatrix> {
    if entries.len() != dim * dim {
        return Err(FvError::DimensionMismatch {
            expected: dim * dim,
            got: entries.len(),
        });
    }
    Ok(CMatrix::from_fn(dim, dim, |r, k| {
        let [re, im] = entries[r * dim + k];
        C64::new(re, im)
    }))
}

pub fn to_pairs(a: &CMatrix) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(a.len());
    for r in 0..a.nrows() {
        for k in 0..a.ncols() {
            out.push([a[(r, k)].re, a[(r, k)].im]);
        }
    }
    out
}
