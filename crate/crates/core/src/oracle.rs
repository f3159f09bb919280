//! Exact reference dynamics in the full system ⊗ truncated-bath Hilbert space.
//!
//! Baths are represented by their Hamiltonian eigenbasis ([`DiagonalBath`]):
//! energies, the coupling operator `Y` in that basis, and thermal populations.
//! For oscillator baths (optionally with a Kerr term `λ n(n−1)`) the Fock basis
//! is already the eigenbasis. The total space is ordered `S ⊗ B_1 ⊗ B_2 ⊗ …`.

use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::bath::{BathSpec, Branch};
use crate::cumulants::{self, CorrelationTensor, CorrelatorSource, CumulantTensor, Event, OperatorCorrelator};
use crate::error::{FvError, Result};
use crate::linalg::{self, c, CMatrix, C64, I};

/// Top Fock level population above which a truncation is rejected.
pub const LEAKAGE_LIMIT: f64 = 1e-6;
pub const DEFAULT_LEAKAGE_TARGET: f64 = 1e-9;
pub const DEFAULT_DIMENSION_CAP: usize = 4096;
const MAX_AUTO_FOCK: usize = 512;

#[derive(Debug, Clone)]
pub struct SystemModel {
    h_s: CMatrix,
    x_s: CMatrix,
    x_eigenvalues: Vec<f64>,
    x_eigenbasis: CMatrix,
}

impl SystemModel {
    pub fn new(h_s: CMatrix, x_s: CMatrix) -> Result<Self> {
        let d = h_s.nrows();
        if d == 0 || h_s.ncols() != d {
            return Err(FvError::InvalidArgument("H_S must be square and non-empty".into()));
        }
        if x_s.nrows() != d || x_s.ncols() != d {
            return Err(FvError::DimensionMismatch {
                expected: d,
                got: x_s.nrows(),
            });
        }
        for m in [&h_s, &x_s] {
            let dev = linalg::hermitian_deviation(m);
            if dev > 1e-12 {
                return Err(FvError::NotHermitian { deviation: dev });
            }
        }
        let e = linalg::eigh(&x_s);
        Ok(SystemModel {
            h_s,
            x_s,
            x_eigenvalues: e.values,
            x_eigenbasis: e.vectors,
        })
    }

    /// Two-level system with `H_S = (delta/2) σ_x` and `X_S = σ_z`.
    pub fn spin_boson(delta: f64) -> Self {
        SystemModel::new(linalg::pauli_x() * c(0.5 * delta), linalg::pauli_z()).expect("Pauli matrices are Hermitian")
    }

    pub fn dim(&self) -> usize {
        self.h_s.nrows()
    }

    pub fn h_s(&self) -> &CMatrix {
        &self.h_s
    }

    pub fn x_s(&self) -> &CMatrix {
        &self.x_s
    }

    pub fn x_eigenvalues(&self) -> &[f64] {
        &self.x_eigenvalues
    }

    /// Columns are eigenvectors of `X_S`, matching [`Self::x_eigenvalues`].
    pub fn x_eigenbasis(&self) -> &CMatrix {
        &self.x_eigenbasis
    }

    /// Checks that `rho` is a valid system density matrix.
    pub fn validate_density(&self, rho: &CMatrix) -> Result<()> {
        if rho.nrows() != self.dim() || rho.ncols() != self.dim() {
            return Err(FvError::DimensionMismatch {
                expected: self.dim(),
                got: rho.nrows(),
            });
        }
        let dev = linalg::hermitian_deviation(rho);
        if dev > 1e-10 {
            return Err(FvError::NotHermitian { deviation: dev });
        }
        let tr = linalg::trace(rho);
        if (tr - c(1.0)).norm() > 1e-10 {
            return Err(FvError::InvalidArgument(format!(
                "initial density must have unit trace, got {tr}"
            )));
        }
        let min = linalg::eigh(rho).values[0];
        if min < -1e-10 {
            return Err(FvError::InvalidArgument(format!(
                "initial density has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }
}

/// Thermal populations `∝ exp(−β E)` (shifted by the minimum for stability).
fn thermal_populations(energies: &[f64], beta: f64) -> Vec<f64> {
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// A stationary bath in its energy eigenbasis with a thermal initial state.
#[derive(Debug, Clone)]
pub struct DiagonalBath {
    energies: Vec<f64>,
    y: CMatrix,
    populations: Vec<f64>,
    beta: f64,
    /// `(p_m |Y_mn|², E_m − E_n)` for the two-point function.
    spectral: Vec<(f64, f64)>,
}

impl DiagonalBath {
    pub fn new(energies: Vec<f64>, y: CMatrix, beta: f64) -> Result<Self> {
        let d = energies.len();
        if d == 0 || y.nrows() != d || y.ncols() != d {
            return Err(FvError::DimensionMismatch {
                expected: d,
                got: y.nrows(),
            });
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(FvError::InvalidBath(format!("beta must be > 0, got {beta}")));
        }
        let dev = linalg::hermitian_deviation(&y);
        if dev > 1e-12 {
            return Err(FvError::NotHermitian { deviation: dev });
        }
        let populations = thermal_populations(&energies, beta);
        let mut spectral = Vec::new();
        for m in 0..d {
            for n in 0..d {
                let w = populations[m] * y[(m, n)].norm_sqr();
                if w > 0.0 {
                    spectral.push((w, energies[m] - energies[n]));
                }
            }
        }
        Ok(DiagonalBath {
            energies,
            y,
            populations,
            beta,
            spectral,
        })
    }

    /// Diagonalizes a general Hermitian bath Hamiltonian.
    pub fn from_hamiltonian(h: &CMatrix, y: &CMatrix, beta: f64) -> Result<Self> {
        let dev = linalg::hermitian_deviation(h);
        if dev > 1e-12 {
            return Err(FvError::NotHermitian { deviation: dev });
        }
        let e = linalg::eigh(h);
        let y_eb = e.vectors.adjoint() * y * &e.vectors;
        let y_eb = (&y_eb + y_eb.adjoint()) * c(0.5);
        DiagonalBath::new(e.values, y_eb, beta)
    }

    /// Same bath with `Y` replaced by `Y − ⟨Y⟩`.
    pub fn centered(&self) -> Self {
        let mean = self.mean_y();
        let d = self.dim();
        let y = &self.y - CMatrix::identity(d, d) * c(mean);
        DiagonalBath::new(self.energies.clone(), y, self.beta).expect("shift keeps Y Hermitian")
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn y(&self) -> &CMatrix {
        &self.y
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn thermal_state(&self) -> CMatrix {
        let d = self.dim();
        CMatrix::from_fn(d, d, |i, j| if i == j { c(self.populations[i]) } else { c(0.0) })
    }

    pub fn hamiltonian(&self) -> CMatrix {
        let d = self.dim();
        CMatrix::from_fn(d, d, |i, j| if i == j { c(self.energies[i]) } else { c(0.0) })
    }

    /// `⟨Y⟩` in the thermal state.
    pub fn mean_y(&self) -> f64 {
        (0..self.dim()).map(|m| self.populations[m] * self.y[(m, m)].re).sum()
    }

    /// Heisenberg-picture `Y(t) = e^{iHt} Y e^{−iHt}`.
    pub fn heisenberg(&self, t: f64) -> CMatrix {
        let d = self.dim();
        CMatrix::from_fn(d, d, |m, n| {
            self.y[(m, n)] * C64::new(0.0, (self.energies[m] - self.energies[n]) * t).exp()
        })
    }

    /// `C(τ) = ⟨Y(τ) Y(0)⟩`.
    pub fn correlation_function(&self, tau: f64) -> C64 {
        self.spectral
            .iter()
            .map(|&(w, f)| C64::new(0.0, f * tau).exp() * w)
            .sum()
    }

    /// `(κ_r(τ), κ_i(τ))` defined by `C(τ) = κ_r(τ) − i κ_i(τ)`.
    pub fn kappa(&self, tau: f64) -> (f64, f64) {
        let z = self.correlation_function(tau);
        (z.re, -z.im)
    }

    /// Branch-labelled correlator with counting shift `nu`.
    ///
    /// `+` operators go left of ρ, latest leftmost, evaluated at `t + ν`;
    /// `−` operators go right of ρ, earliest adjacent to ρ, unshifted.
    pub fn multitime_correlator(&self, branches: &[Branch], times: &[f64], nu: f64) -> Result<CorrelationTensor> {
        let ev = cumulants::events(branches, times)?;
        if ev.is_empty() {
            return Err(FvError::InvalidArgument("correlator needs at least one time".into()));
        }
        let value = self.branch_correlator(&ev, nu);
        Ok(CorrelationTensor {
            branches: branches.to_vec(),
            times: times.to_vec(),
            nu,
            value,
        })
    }

    fn branch_correlator(&self, events: &[Event], nu: f64) -> C64 {
        let mut left: Vec<f64> = events
            .iter()
            .filter(|e| e.branch == Branch::Plus)
            .map(|e| e.time)
            .collect();
        let mut right: Vec<f64> = events
            .iter()
            .filter(|e| e.branch == Branch::Minus)
            .map(|e| e.time)
            .collect();
        left.sort_by(|a, b| b.total_cmp(a));
        right.sort_by(|a, b| a.total_cmp(b));
        let left: Vec<f64> = left.into_iter().map(|t| t + nu).collect();
        self.ordered_trace(&left, &right)
    }

    /// Adapter exposing this bath as a [`CorrelatorSource`] at fixed `nu`.
    pub fn source(&self, nu: f64) -> BathCorrelator<'_> {
        BathCorrelator { bath: self, nu }
    }

    pub fn cumulant(&self, branches: &[Branch], times: &[f64], nu: f64) -> Result<CumulantTensor> {
        cumulants::cumulant(&self.source(nu), branches, times)
    }

    /// Wick sum over pairings using this bath's exact pair correlators.
    pub fn wick_reconstruct(&self, branches: &[Branch], times: &[f64], nu: f64) -> Result<C64> {
        let ev = cumulants::events(branches, times)?;
        cumulants::wick_reconstruct(&ev, |a, b| Ok(self.branch_correlator(&[a, b], nu)))
    }
}

impl OperatorCorrelator for DiagonalBath {
    fn ordered_trace(&self, left: &[f64], right: &[f64]) -> C64 {
        // tr[L ρ R] = Σ_m p_m (R L)_mm
        let d = self.dim();
        let mut prod = CMatrix::identity(d, d);
        for &t in right.iter().chain(left) {
            prod *= self.heisenberg(t);
        }
        (0..d).map(|m| prod[(m, m)] * self.populations[m]).sum()
    }
}

pub struct BathCorrelator<'a> {
    bath: &'a DiagonalBath,
    nu: f64,
}

impl CorrelatorSource for BathCorrelator<'_> {
    fn correlator(&self, events: &[Event]) -> Result<C64> {
        if events.is_empty() {
            return Ok(c(1.0));
        }
        Ok(self.bath.branch_correlator(events, self.nu))
    }

    fn nu(&self) -> f64 {
        self.nu
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FockPolicy {
    /// Smallest truncation whose top level population is below the target.
    Auto { leakage_target: f64 },
    Fixed(usize),
}

impl Default for FockPolicy {
    fn default() -> Self {
        FockPolicy::Auto {
            leakage_target: DEFAULT_LEAKAGE_TARGET,
        }
    }
}

/// An oscillator bath truncated in Fock space, with an optional Kerr term
/// `λ (a†)² a²` per mode.
#[derive(Debug, Clone)]
pub struct TruncatedBath {
    spec: BathSpec,
    kerr: f64,
    n_fock: Vec<usize>,
    top_population: Vec<f64>,
    diag: DiagonalBath,
}

fn mode_energies(omega: f64, kerr: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| omega * k as f64 + kerr * (k * k.saturating_sub(1)) as f64).collect()
}

impl TruncatedBath {
    pub fn harmonic(spec: BathSpec, policy: FockPolicy) -> Result<Self> {
        TruncatedBath::new(spec, 0.0, policy, DEFAULT_DIMENSION_CAP)
    }

    pub fn kerr(spec: BathSpec, lambda: f64, policy: FockPolicy) -> Result<Self> {
        TruncatedBath::new(spec, lambda, policy, DEFAULT_DIMENSION_CAP)
    }

    pub fn new(spec: BathSpec, kerr: f64, policy: FockPolicy, dimension_cap: usize) -> Result<Self> {
        spec.validate()?;
        if !(kerr >= 0.0) || !kerr.is_finite() {
            return Err(FvError::InvalidBath(format!(
                "Kerr coefficient must be >= 0 (bounded spectrum), got {kerr}"
            )));
        }
        let mut n_fock = Vec::with_capacity(spec.modes.len());
        let mut top_population = Vec::with_capacity(spec.modes.len());
        for (k, mode) in spec.modes.iter().enumerate() {
            let top = |n: usize| *thermal_populations(&mode_energies(mode.omega, kerr, n), spec.beta).last().unwrap();
            let n = match policy {
                FockPolicy::Fixed(n) => {
                    if n < 2 {
                        return Err(FvError::InvalidArgument(format!("n_fock must be >= 2, got {n}")));
                    }
                    n
                }
                FockPolicy::Auto { leakage_target } => {
                    if !(leakage_target > 0.0) {
                        return Err(FvError::InvalidArgument(format!(
                            "leakage target must be > 0, got {leakage_target}"
                        )));
                    }
                    (2..=MAX_AUTO_FOCK).find(|&n| top(n) < leakage_target).unwrap_or(MAX_AUTO_FOCK)
                }
            };
            let pop = top(n);
            if pop >= LEAKAGE_LIMIT {
                return Err(FvError::FockLeakage {
                    mode: k,
                    n_fock: n,
                    population: pop,
                    limit: LEAKAGE_LIMIT,
                });
            }
            n_fock.push(n);
            top_population.push(pop);
        }
        let dim = n_fock
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .unwrap_or(usize::MAX);
        if dim > dimension_cap {
            return Err(FvError::DimensionCap {
                required: dim,
                cap: dimension_cap,
            });
        }

        let mut energies = vec![0.0];
        let mut y = CMatrix::zeros(1, 1);
        for (mode, &n) in spec.modes.iter().zip(&n_fock) {
            let e_mode = mode_energies(mode.omega, kerr, n);
            let q = CMatrix::from_fn(n, n, |i, j| {
                if i + 1 == j {
                    c((j as f64).sqrt())
                } else if j + 1 == i {
                    c((i as f64).sqrt())
                } else {
                    c(0.0)
                }
            }) * c(mode.ladder_coupling());
            let d_prev = energies.len();
            energies = energies
                .iter()
                .flat_map(|&e| e_mode.iter().map(move |&f| e + f))
                .collect();
            y = linalg::kron(&y, &CMatrix::identity(n, n)) + linalg::kron(&CMatrix::identity(d_prev, d_prev), &q);
        }
        let diag = DiagonalBath::new(energies, y, spec.beta)?;
        Ok(TruncatedBath {
            spec,
            kerr,
            n_fock,
            top_population,
            diag,
        })
    }

    pub fn spec(&self) -> &BathSpec {
        &self.spec
    }

    pub fn kerr_lambda(&self) -> f64 {
        self.kerr
    }

    pub fn n_fock(&self) -> &[usize] {
        &self.n_fock
    }

    pub fn top_population(&self) -> &[f64] {
        &self.top_population
    }

    pub fn dim(&self) -> usize {
        self.diag.dim()
    }

    pub fn diagonal(&self) -> &DiagonalBath {
        &self.diag
    }

    pub fn multitime_correlator(&self, branches: &[Branch], times: &[f64], nu: f64) -> Result<CorrelationTensor> {
        self.diag.multitime_correlator(branches, times, nu)
    }

    pub fn cumulant(&self, branches: &[Branch], times: &[f64], nu: f64) -> Result<CumulantTensor> {
        self.diag.cumulant(branches, times, nu)
    }

    pub fn wick_reconstruct(&self, branches: &[Branch], times: &[f64], nu: f64) -> Result<C64> {
        self.diag.wick_reconstruct(branches, times, nu)
    }
}

/// Full system-plus-baths evolution.
#[derive(Debug, Clone)]
pub struct Oracle {
    system: SystemModel,
    baths: Vec<TruncatedBath>,
    bath_dims: Vec<usize>,
    dim: usize,
    h_static: CMatrix,
    couplings: Vec<CMatrix>,
    /// Last propagator, keyed by `(t_i, t_f, n_steps)` bit patterns.
    cache: Arc<Mutex<Option<(PropagatorKey, CMatrix)>>>,
}

type PropagatorKey = (u64, u64, usize);

impl Oracle {
    pub fn new(system: SystemModel, baths: Vec<TruncatedBath>, dimension_cap: usize) -> Result<Self> {
        let bath_dims: Vec<usize> = baths.iter().map(TruncatedBath::dim).collect();
        let dim = bath_dims
            .iter()
            .try_fold(system.dim(), |acc, &n| acc.checked_mul(n))
            .unwrap_or(usize::MAX);
        if dim > dimension_cap {
            return Err(FvError::DimensionCap {
                required: dim,
                cap: dimension_cap,
            });
        }
        let ds = system.dim();
        let embed = |pos: Option<usize>, op: &CMatrix| {
            // op acts on the system (pos = None) or on bath `pos`
            let mut out = match pos {
                None => op.clone(),
                Some(_) => CMatrix::identity(ds, ds),
            };
            for (b, &db) in bath_dims.iter().enumerate() {
                let factor = if pos == Some(b) { op.clone() } else { CMatrix::identity(db, db) };
                out = linalg::kron(&out, &factor);
            }
            out
        };
        let mut h_static = embed(None, system.h_s());
        let mut couplings = Vec::with_capacity(baths.len());
        for (b, bath) in baths.iter().enumerate() {
            h_static += embed(Some(b), &bath.diag.hamiltonian());
            let y_full = embed(Some(b), bath.diag.y());
            let x_full = embed(None, system.x_s());
            couplings.push(x_full * y_full);
        }
        Ok(Oracle {
            system,
            baths,
            bath_dims,
            dim,
            h_static,
            couplings,
            cache: Arc::new(Mutex::new(None)),
        })
    }

    pub fn system(&self) -> &SystemModel {
        &self.system
    }

    pub fn baths(&self) -> &[TruncatedBath] {
        &self.baths
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn has_ramp(&self) -> bool {
        self.baths.iter().any(|b| b.spec.ramp.is_some())
    }

    /// Total Hamiltonian at time `t` (coupling envelopes applied).
    pub fn hamiltonian_at(&self, t: f64) -> CMatrix {
        let mut h = self.h_static.clone();
        for (bath, v) in self.baths.iter().zip(&self.couplings) {
            h += v * c(bath.spec.envelope(t));
        }
        h
    }

    /// `U(t_f, t_i)`. Exact for constant coupling; with a ramp, a product of
    /// `n_steps` midpoint exponentials.
    pub fn propagator(&self, t_i: f64, t_f: f64, n_steps: usize) -> Result<CMatrix> {
        let key = (t_i.to_bits(), t_f.to_bits(), n_steps);
        if let Some((k, u)) = self.cache.lock().expect("propagator cache").as_ref() {
            if *k == key {
                return Ok(u.clone());
            }
        }
        let u = self.compute_propagator(t_i, t_f, n_steps)?;
        *self.cache.lock().expect("propagator cache") = Some((key, u.clone()));
        Ok(u)
    }

    fn compute_propagator(&self, t_i: f64, t_f: f64, n_steps: usize) -> Result<CMatrix> {
        if !self.has_ramp() {
            return Ok(linalg::unitary(&self.hamiltonian_at(t_i), t_f - t_i));
        }
        if n_steps == 0 {
            return Err(FvError::InvalidArgument("n_steps must be >= 1 with a coupling ramp".into()));
        }
        let dt = (t_f - t_i) / n_steps as f64;
        let mut u = CMatrix::identity(self.dim, self.dim);
        for k in 0..n_steps {
            let mid = t_i + (k as f64 + 0.5) * dt;
            u = linalg::unitary(&self.hamiltonian_at(mid), dt) * u;
        }
        Ok(u)
    }

    /// `ρ_S(0) ⊗ ρ_1 ⊗ ρ_2 ⊗ …` with thermal bath states.
    pub fn initial_state(&self, rho_s0: &CMatrix) -> Result<CMatrix> {
        self.system.validate_density(rho_s0)?;
        let mut rho = rho_s0.clone();
        for b in &self.baths {
            rho = linalg::kron(&rho, &b.diag.thermal_state());
        }
        Ok(rho)
    }

    pub fn evolve_full(&self, rho_s0: &CMatrix, t_i: f64, t_f: f64, n_steps: usize) -> Result<CMatrix> {
        let rho0 = self.initial_state(rho_s0)?;
        let u = self.propagator(t_i, t_f, n_steps)?;
        Ok(&u * rho0 * u.adjoint())
    }

    pub fn reduced_density(&self, rho_s0: &CMatrix, t_i: f64, t_f: f64, n_steps: usize) -> Result<CMatrix> {
        let full = self.evolve_full(rho_s0, t_i, t_f, n_steps)?;
        let rest: usize = self.bath_dims.iter().product();
        linalg::partial_trace_right(&full, self.system.dim(), rest)
    }

    fn check_counted(&self, counted: usize) -> Result<()> {
        if counted >= self.baths.len() {
            return Err(FvError::InvalidArgument(format!(
                "counted bath index {counted} out of range (have {} baths)",
                self.baths.len()
            )));
        }
        Ok(())
    }

    /// Diagonal of the counted bath Hamiltonian `H_C` in the full space.
    pub fn counted_energies(&self, counted: usize) -> Result<Vec<f64>> {
        self.check_counted(counted)?;
        let inner: usize = self.bath_dims[counted + 1..].iter().product();
        let dc = self.bath_dims[counted];
        let e = self.baths[counted].diag.energies();
        Ok((0..self.dim).map(|i| e[(i / inner) % dc]).collect())
    }

    /// Heat generating functions `tr{e^{iνH_C} U e^{−iνH_C} ρ(0) U†}` for
    /// several `ν`, sharing one propagator.
    pub fn generating_functions(
        &self,
        counted: usize,
        rho_s0: &CMatrix,
        nus: &[f64],
        t_i: f64,
        t_f: f64,
        n_steps: usize,
    ) -> Result<Vec<C64>> {
        let e = self.counted_energies(counted)?;
        let rho0 = self.initial_state(rho_s0)?;
        let u = self.propagator(t_i, t_f, n_steps)?;
        // B = ρ0 U†; G = Σ_ij e^{iν(E_i − E_j)} U_ij B_ji
        let b = &rho0 * u.adjoint();
        let n = self.dim;
        let terms: Vec<C64> = (0..n * n).map(|k| u[(k / n, k % n)] * b[(k % n, k / n)]).collect();
        Ok(nus
            .par_iter()
            .map(|&nu| {
                let mut acc = crate::reduce::Neumaier::new();
                for (k, &t) in terms.iter().enumerate() {
                    let (i, j) = (k / n, k % n);
                    acc.add(t * (I * (nu * (e[i] - e[j]))).exp());
                }
                acc.value()
            })
            .collect())
    }

    pub fn generating_function_exact(
        &self,
        counted: usize,
        rho_s0: &CMatrix,
        nu: f64,
        t_i: f64,
        t_f: f64,
        n_steps: usize,
    ) -> Result<C64> {
        Ok(self.generating_functions(counted, rho_s0, &[nu], t_i, t_f, n_steps)?[0])
    }

    /// `tr{H_C (ρ(t_f) − ρ(t_i))}`.
    pub fn heat_first_moment(&self, counted: usize, rho_s0: &CMatrix, t_i: f64, t_f: f64, n_steps: usize) -> Result<f64> {
        let e = self.counted_energies(counted)?;
        let rho0 = self.initial_state(rho_s0)?;
        let u = self.propagator(t_i, t_f, n_steps)?;
        let rho_t = &u * &rho0 * u.adjoint();
        let mut acc = crate::reduce::Neumaier::new();
        for (i, &ei) in e.iter().enumerate() {
            acc.add((rho_t[(i, i)] - rho0[(i, i)]) * ei);
        }
        Ok(acc.value().re)
    }

    /// `−i ∂_ν ln G(ν)` at `ν = 0` by Richardson-extrapolated central
    /// differences with steps `h` and `2h`.
    pub fn heat_first_moment_fd(
        &self,
        counted: usize,
        rho_s0: &CMatrix,
        t_i: f64,
        t_f: f64,
        n_steps: usize,
        h: f64,
    ) -> Result<C64> {
        if !(h > 0.0) {
            return Err(FvError::InvalidArgument(format!("finite-difference step must be > 0, got {h}")));
        }
        let g = self.generating_functions(counted, rho_s0, &[h, -h, 2.0 * h, -2.0 * h], t_i, t_f, n_steps)?;
        Ok(richardson_log_derivative(g[0], g[1], g[2], g[3], h))
    }
}

/// `−i d/dν ln G` at 0 from `G(±h)`, `G(±2h)`.
pub fn richardson_log_derivative(gp: C64, gm: C64, gp2: C64, gm2: C64, h: f64) -> C64 {
    let d1 = (gp.ln() - gm.ln()) / (2.0 * h);
    let d2 = (gp2.ln() - gm2.ln()) / (4.0 * h);
    -I * (d1 * 4.0 - d2) / 3.0
}
