//! Builds engine inputs from a [`Scenario`] and runs both engines.

use fvheat_core::influence::{
    discretize_action_with_order, path_pair_count, path_sum, HigherOrderKernels, InfluenceCoefficients, SumMode,
};
use fvheat_core::linalg::{CMatrix, C64};
use fvheat_core::oracle::{Oracle, TruncatedBath};
use fvheat_core::{FvError, Result};

use crate::config::Scenario;

pub fn truncated_bath(scn: &Scenario, i: usize) -> Result<TruncatedBath> {
    TruncatedBath::new(scn.baths[i].clone(), scn.kerr[i], scn.fock[i], scn.dimension_cap)
}

pub fn truncated_baths(scn: &Scenario) -> Result<Vec<TruncatedBath>> {
    (0..scn.baths.len()).map(|i| truncated_bath(scn, i)).collect()
}

pub fn oracle(scn: &Scenario, baths: Vec<TruncatedBath>) -> Result<Oracle> {
    Oracle::new(scn.system.clone(), baths, scn.dimension_cap)
}

pub fn pairs_required(scn: &Scenario) -> u128 {
    path_pair_count(scn.system.dim(), scn.grid.n_slices)
}

/// Fails early with the budget error so no work is wasted.
pub fn check_budget(scn: &Scenario) -> Result<()> {
    let required = pairs_required(scn);
    if required > scn.budget {
        return Err(FvError::PathBudget {
            required,
            budget: scn.budget,
        });
    }
    Ok(())
}

/// Second-order coefficients for every bath; `nu` applies to the counted bath.
///
/// Kerr baths use their exact two-point function, which needs the truncated
/// bath; harmonic baths use the closed-form kernels.
pub fn coefficients(scn: &Scenario, truncated: Option<&[TruncatedBath]>, nu: f64) -> Result<Vec<InfluenceCoefficients>> {
    (0..scn.baths.len())
        .map(|i| {
            let shift = if i == scn.counted { nu } else { 0.0 };
            if scn.kerr[i] != 0.0 {
                let owned;
                let tb = match truncated {
                    Some(t) => &t[i],
                    None => {
                        owned = truncated_bath(scn, i)?;
                        &owned
                    }
                };
                discretize_action_with_order(tb, &scn.grid, shift, scn.gauss_order)
            } else {
                discretize_action_with_order(&scn.baths[i], &scn.grid, shift, scn.gauss_order)
            }
        })
        .collect()
}

/// Combined third/fourth-order tables for all baths, or `None` at order 2.
pub fn higher_order(scn: &Scenario, order: usize, truncated: &[TruncatedBath]) -> Result<Option<HigherOrderKernels>> {
    if order < 3 {
        return Ok(None);
    }
    let mut total: Option<HigherOrderKernels> = None;
    for tb in truncated {
        let k = HigherOrderKernels::from_bath(tb, &scn.grid, order)?;
        total = Some(match total {
            None => k,
            Some(t) => t.add(&k)?,
        });
    }
    Ok(total)
}

pub fn path_density(
    scn: &Scenario,
    coeffs: &[InfluenceCoefficients],
    kernels: Option<&HigherOrderKernels>,
) -> Result<CMatrix> {
    Ok(path_sum(&scn.system, coeffs, kernels, &scn.rho0, SumMode::Density, scn.budget)?
        .density()
        .expect("density mode"))
}

pub fn path_gf(scn: &Scenario, truncated: Option<&[TruncatedBath]>, nu: f64) -> Result<C64> {
    let coeffs = coefficients(scn, truncated, nu)?;
    Ok(path_sum(
        &scn.system,
        &coeffs,
        None,
        &scn.rho0,
        SumMode::Gf { counted: scn.counted },
        scn.budget,
    )?
    .gf()
    .expect("gf mode"))
}

pub fn oracle_density(scn: &Scenario, o: &Oracle) -> Result<CMatrix> {
    o.reduced_density(&scn.rho0, scn.grid.t_i, scn.grid.t_f, scn.oracle_steps())
}

pub fn oracle_gf(scn: &Scenario, o: &Oracle, nus: &[f64]) -> Result<Vec<C64>> {
    o.generating_functions(scn.counted, &scn.rho0, nus, scn.grid.t_i, scn.grid.t_f, scn.oracle_steps())
}
