//! Liouville-space algebra.
//!
//! Operators are vectorized by stacking columns, so `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.
//! This matches `nalgebra`'s column-major storage: `vec(ρ)` is `ρ.as_slice()`.

use nalgebra::DVector;

use crate::error::{FvError, Result};
use crate::linalg::{self, c, CMatrix, C64};

/// A square operator on the system (or any finite) Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOp {
    entries: CMatrix,
    hermitian: bool,
}

impl DenseOp {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(FvError::InvalidArgument(format!(
                "operator must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(DenseOp {
            entries,
            hermitian: false,
        })
    }

    /// Builds an operator flagged Hermitian, verified to 1e-12.
    pub fn hermitian(entries: CMatrix) -> Result<Self> {
        let mut op = DenseOp::new(entries)?;
        let dev = linalg::hermitian_deviation(&op.entries);
        if dev > 1e-12 {
            return Err(FvError::NotHermitian { deviation: dev });
        }
        op.hermitian = true;
        Ok(op)
    }

    pub fn identity(dim: usize) -> Self {
        DenseOp {
            entries: CMatrix::identity(dim, dim),
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A linear map on `dim × dim` operators, stored as a `dim² × dim²` matrix
/// acting on column-stacked vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOp {
    dim: usize,
    entries: CMatrix,
}

impl SuperOp {
    pub fn from_matrix(dim: usize, entries: CMatrix) -> Result<Self> {
        let n = dim * dim;
        if entries.nrows() != n || entries.ncols() != n {
            return Err(FvError::DimensionMismatch {
                expected: n,
                got: entries.nrows(),
            });
        }
        Ok(SuperOp { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        SuperOp {
            dim,
            entries: CMatrix::identity(dim * dim, dim * dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(FvError::DimensionMismatch {
                expected: self.dim,
                got: rho.nrows(),
            });
        }
        let v = DVector::from_column_slice(rho.as_slice());
        let out = &self.entries * v;
        Ok(CMatrix::from_column_slice(self.dim, self.dim, out.as_slice()))
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &SuperOp) -> Result<SuperOp> {
        if self.dim != other.dim {
            return Err(FvError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(SuperOp {
            dim: self.dim,
            entries: &self.entries * &other.entries,
        })
    }

    pub fn scale(&self, s: C64) -> SuperOp {
        SuperOp {
            dim: self.dim,
            entries: &self.entries * s,
        }
    }

    pub fn add(&self, other: &SuperOp) -> Result<SuperOp> {
        if self.dim != other.dim {
            return Err(FvError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(SuperOp {
            dim: self.dim,
            entries: &self.entries + &other.entries,
        })
    }

    pub fn exp(&self) -> SuperOp {
        SuperOp {
            dim: self.dim,
            entries: linalg::expm(&self.entries),
        }
    }
}

/// Left or right multiplication by `op`: `A •` or `• A`, without sign.
pub fn lift(op: &DenseOp, side: Side) -> SuperOp {
    let d = op.dim();
    let id = CMatrix::identity(d, d);
    let entries = match side {
        Side::Left => linalg::kron(&id, op.matrix()),
        Side::Right => linalg::kron(&op.matrix().transpose(), &id),
    };
    SuperOp { dim: d, entries }
}

/// The signed right lift `• ↦ −• A` used for system coupling operators on the
/// backward branch.
pub fn lift_signed_right(op: &DenseOp) -> SuperOp {
    lift(op, Side::Right).scale(c(-1.0))
}

/// Liouvillian `−i[V, •]` of a Hamiltonian-like operator.
pub fn commutator_generator(v: &DenseOp) -> SuperOp {
    let l = lift(v, Side::Left);
    let r = lift(v, Side::Right);
    SuperOp {
        dim: v.dim(),
        entries: (l.entries - r.entries) * C64::new(0.0, -1.0),
    }
}

/// Time-ordered exponential of `∫ L(t) dt` over `[t_i, t_f]`.
///
/// Each of the `n_steps` equal steps uses `exp(dt · L(t_mid))`; steps are
/// composed chronologically with the latest step leftmost. Second order in `dt`.
pub fn propagate_ordered<F>(liouvillian_at: F, t_i: f64, t_f: f64, n_steps: usize) -> Result<SuperOp>
where
    F: Fn(f64) -> SuperOp,
{
    if n_steps == 0 {
        return Err(FvError::InvalidArgument("n_steps must be >= 1".into()));
    }
    let dt = (t_f - t_i) / n_steps as f64;
    let mut total: Option<SuperOp> = None;
    for k in 0..n_steps {
        let mid = t_i + (k as f64 + 0.5) * dt;
        let step = liouvillian_at(mid).scale(c(dt)).exp();
        total = Some(match total {
            None => step,
            Some(acc) => step.compose(&acc)?,
        });
    }
    Ok(total.expect("n_steps >= 1"))
}
