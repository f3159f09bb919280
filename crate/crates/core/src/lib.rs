//! Feynman-Vernon path sums for open quantum systems, heat generating
//! functions of counted baths, higher-order bath cumulants, and an exact
//! truncated-bath reference solver.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod cumulants;
pub mod error;
pub mod influence;
pub mod linalg;
pub mod oracle;
pub mod quadrature;
pub mod records;
pub mod reduce;
pub mod superop;

pub use bath::{BathSpec, Branch, Mode, Ramp};
pub use error::{FvError, Result};
pub use influence::{
    discretize_action, path_sum, HigherOrderKernels, InfluenceCoefficients, PathGrid, PathPair, PathSumOutput, SumMode,
};
pub use linalg::{CMatrix, C64};
pub use oracle::{FockPolicy, Oracle, SystemModel, TruncatedBath};
pub use records::ResultRecord;
