//! Reference problems shared by the benchmarks.

use fvheat_core::linalg::c;
use fvheat_core::oracle::{FockPolicy, DEFAULT_DIMENSION_CAP};
use fvheat_core::{BathSpec, CMatrix, Oracle, PathGrid, SystemModel, TruncatedBath};

/// Spin-boson system with unit tunnelling, starting in the upper state.
pub fn spin_boson() -> (SystemModel, CMatrix) {
    let rho0 = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
    (SystemModel::spin_boson(1.0), rho0)
}

pub fn weak_bath() -> BathSpec {
    BathSpec::single_mode(1.0, 1.0, 0.3, 2.0).expect("valid bath")
}

pub fn grid(n_slices: usize) -> PathGrid {
    PathGrid::new(0.0, 1.0, n_slices).expect("valid grid")
}

pub fn kerr_bath(kerr: f64) -> TruncatedBath {
    TruncatedBath::kerr(weak_bath(), kerr, FockPolicy::default()).expect("bath truncates")
}

pub fn oracle(kerr: f64) -> Oracle {
    Oracle::new(spin_boson().0, vec![kerr_bath(kerr)], DEFAULT_DIMENSION_CAP).expect("oracle builds")
}
