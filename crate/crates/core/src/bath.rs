//! Harmonic bath models and their two-time kernels.
//!
//! A bath is a finite list of oscillator modes `(omega_k, m_k, c_k)` at inverse
//! temperature `beta`, coupled bilinearly to the system through `X_S ⊗ Σ c_k q_k`.
//! Everything the influence functional needs is derived from the two kernels
//!
//! ```text
//! kappa_i(tau) = Σ_k c_k² / (2 m_k ω_k) · sin(ω_k tau)
//! kappa_r(tau) = Σ_k c_k² / (2 m_k ω_k) · coth(ω_k β / 2) · cos(ω_k tau)
//! ```
//!
//! with `ħ = 1`. The counting parameter `nu` of the heat generating function
//! enters only as a real time shift of the forward/backward cross kernels.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FvError, Result};

/// Which side of the density operator a super-operator multiplies on.
///
/// `Plus` is the forward (chronological, left-of-ρ) branch and `Minus` the
/// backward (anti-chronological, right-of-ρ) branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Plus, Branch::Minus];

    pub fn flip(self) -> Branch {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Branch::Plus => '+',
            Branch::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub omega: f64,
    pub mass: f64,
    pub coupling: f64,
}

impl Mode {
    pub fn new(omega: f64, mass: f64, coupling: f64) -> Self {
        Mode {
            omega,
            mass,
            coupling,
        }
    }

    /// `c_k² / (2 m_k ω_k)`, the amplitude shared by both kernels.
    pub fn weight(&self) -> f64 {
        self.coupling * self.coupling / (2.0 * self.mass * self.omega)
    }

    /// Ladder-operator coupling `c'_k = c_k / sqrt(2 m_k ω_k)`.
    pub fn ladder_coupling(&self) -> f64 {
        self.coupling / (2.0 * self.mass * self.omega).sqrt()
    }
}

/// Smooth switching window for the system-bath coupling.
///
/// The coupling rises as `sin²` over `width` after `t_on`, stays at one, and
/// falls as `cos²` over `width` before `t_off`. Zero width gives a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub t_on: f64,
    pub t_off: f64,
    pub width: f64,
}

impl Ramp {
    pub fn factor(&self, t: f64) -> f64 {
        if t < self.t_on || t > self.t_off {
            return 0.0;
        }
        if self.width == 0.0 {
            return 1.0;
        }
        let edge = |x: f64| {
            if x >= self.width {
                1.0
            } else {
                (FRAC_PI_2 * x / self.width).sin().powi(2)
            }
        };
        edge(t - self.t_on).min(edge(self.t_off - t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub modes: Vec<Mode>,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp: Option<Ramp>,
}

impl BathSpec {
    pub fn new(modes: Vec<Mode>, beta: f64) -> Result<Self> {
        let spec = BathSpec {
            modes,
            beta,
            ramp: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_ramp(mut self, ramp: Ramp) -> Result<Self> {
        self.ramp = Some(ramp);
        self.validate()?;
        Ok(self)
    }

    pub fn single_mode(omega: f64, mass: f64, coupling: f64, beta: f64) -> Result<Self> {
        BathSpec::new(vec![Mode::new(omega, mass, coupling)], beta)
    }

    /// Discretizes an Ohmic spectral density `J(ω) = alpha · ω` on
    /// `(0, cutoff]` with `n_modes` equally spaced unit-mass modes.
    ///
    /// Uses `J(ω) = (π/2) Σ c_k² / (m_k ω_k) δ(ω − ω_k)`, so each mode carries
    /// `c_k² = (2/π) m ω_k J(ω_k) Δω`. A convenience constructor only.
    pub fn ohmic(alpha: f64, cutoff: f64, n_modes: usize, beta: f64) -> Result<Self> {
        if n_modes == 0 || !(cutoff > 0.0) || !(alpha >= 0.0) {
            return Err(FvError::InvalidBath(
                "ohmic discretization needs n_modes >= 1, cutoff > 0, alpha >= 0".into(),
            ));
        }
        let dw = cutoff / n_modes as f64;
        let modes = (0..n_modes)
            .map(|j| {
                let w = (j as f64 + 0.5) * dw;
                let c2 = 2.0 / std::f64::consts::PI * w * (alpha * w) * dw;
                Mode::new(w, 1.0, c2.sqrt())
            })
            .collect();
        BathSpec::new(modes, beta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(FvError::InvalidBath("mode list is empty".into()));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(FvError::InvalidBath(format!(
                "beta must be a positive finite number, got {}",
                self.beta
            )));
        }
        for (k, m) in self.modes.iter().enumerate() {
            if !(m.omega > 0.0) || !m.omega.is_finite() {
                return Err(FvError::InvalidBath(format!(
                    "mode {k}: omega must be > 0, got {}",
                    m.omega
                )));
            }
            if !(m.mass > 0.0) || !m.mass.is_finite() {
                return Err(FvError::InvalidBath(format!(
                    "mode {k}: mass must be > 0, got {}",
                    m.mass
                )));
            }
            if !m.coupling.is_finite() {
                return Err(FvError::InvalidBath(format!(
                    "mode {k}: coupling must be finite"
                )));
            }
        }
        if let Some(r) = &self.ramp {
            if !(r.t_on < r.t_off) {
                return Err(FvError::InvalidBath(format!(
                    "ramp needs t_on < t_off, got {} >= {}",
                    r.t_on, r.t_off
                )));
            }
            if !(r.width >= 0.0) {
                return Err(FvError::InvalidBath(format!(
                    "ramp width must be >= 0, got {}",
                    r.width
                )));
            }
        }
        Ok(())
    }

    /// Coupling envelope at absolute time `t` (one when no ramp is set).
    pub fn envelope(&self, t: f64) -> f64 {
        self.ramp.map_or(1.0, |r| r.factor(t))
    }

    /// Two-time kernels including the coupling envelope:
    /// `f(s) f(s') (kappa_r(s − s'), kappa_i(s − s'))`.
    pub fn kernels_at(&self, s: f64, s_prime: f64) -> (f64, f64) {
        let (kr, ki) = kappa(self, s - s_prime);
        let f = self.envelope(s) * self.envelope(s_prime);
        (f * kr, f * ki)
    }

    /// Forward/backward cross kernel `kappa_r(τ + ν) + i kappa_i(τ + ν)` at
    /// `τ = s − s'`, with the envelope applied to both time arguments.
    pub fn counting_kernel(&self, s: f64, s_prime: f64, nu: f64) -> Complex64 {
        let (kr, ki) = kappa(self, s - s_prime + nu);
        let f = self.envelope(s) * self.envelope(s_prime);
        Complex64::new(f * kr, f * ki)
    }
}

/// Evaluates `(kappa_r(tau), kappa_i(tau))` for constant coupling.
pub fn kappa(bath: &BathSpec, tau: f64) -> (f64, f64) {
    let mut kr = 0.0;
    let mut ki = 0.0;
    for m in &bath.modes {
        let w = m.weight();
        let (s, c) = (m.omega * tau).sin_cos();
        ki += w * s;
        kr += w * c / (0.5 * m.omega * bath.beta).tanh();
    }
    (kr, ki)
}

/// Sign convention for the same-branch correlators; `sign(0) = 0`.
fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Branch-indexed pair correlator `C^{d1 d2}(t1, t2)` of a harmonic bath at
/// counting parameter `nu`.
pub fn pair_correlation(
    bath: &BathSpec,
    d1: Branch,
    d2: Branch,
    t1: f64,
    t2: f64,
    nu: f64,
) -> Complex64 {
    let tau = t1 - t2;
    match (d1, d2) {
        (Branch::Plus, Branch::Plus) => {
            let (kr, ki) = kappa(bath, tau);
            Complex64::new(kr, -sign0(tau) * ki)
        }
        (Branch::Minus, Branch::Minus) => {
            let (kr, ki) = kappa(bath, tau);
            Complex64::new(kr, sign0(tau) * ki)
        }
        (Branch::Plus, Branch::Minus) => {
            let (kr, ki) = kappa(bath, tau + nu);
            Complex64::new(kr, ki)
        }
        (Branch::Minus, Branch::Plus) => {
            let (kr, ki) = kappa(bath, tau - nu);
            Complex64::new(kr, -ki)
        }
    }
}

/// Sampled kernels on a symmetric grid of time differences.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    pub tau_grid: Vec<f64>,
    pub kappa_r: Vec<f64>,
    pub kappa_i: Vec<f64>,
    pub nu: f64,
    /// `kappa_r(τ + ν) + i kappa_i(τ + ν)`
    pub shifted_plus: Vec<Complex64>,
    /// `kappa_r(τ − ν) − i kappa_i(τ − ν)`
    pub shifted_minus: Vec<Complex64>,
}

pub const KERNEL_CSV_HEADER: [&str; 7] = [
    "tau",
    "kappa_r",
    "kappa_i",
    "re_shifted_plus",
    "im_shifted_plus",
    "re_shifted_minus",
    "im_shifted_minus",
];

/// Tabulates the kernels on `n_samples` points spanning `[-tau_max, tau_max]`.
///
/// The shifted columns are fresh kernel evaluations at `τ ± ν`, not
/// interpolations of the unshifted ones.
pub fn build_kernel_table(
    bath: &BathSpec,
    tau_max: f64,
    n_samples: usize,
    nu: f64,
) -> Result<KernelTable> {
    if n_samples < 2 {
        return Err(FvError::InvalidArgument(format!(
            "kernel table needs at least 2 samples, got {n_samples}"
        )));
    }
    if !(tau_max > 0.0) {
        return Err(FvError::InvalidArgument(format!(
            "tau_max must be > 0, got {tau_max}"
        )));
    }
    let last = (n_samples - 1) as f64;
    // integer numerator keeps the grid exactly symmetric about zero
    let tau_grid: Vec<f64> = (0..n_samples)
        .map(|j| tau_max * (2.0 * j as f64 - last) / last)
        .collect();
    let mut kappa_r = Vec::with_capacity(n_samples);
    let mut kappa_i = Vec::with_capacity(n_samples);
    let mut shifted_plus = Vec::with_capacity(n_samples);
    let mut shifted_minus = Vec::with_capacity(n_samples);
    for &tau in &tau_grid {
        let (kr, ki) = kappa(bath, tau);
        kappa_r.push(kr);
        kappa_i.push(ki);
        let (pr, pi) = kappa(bath, tau + nu);
        shifted_plus.push(Complex64::new(pr, pi));
        let (mr, mi) = kappa(bath, tau - nu);
        shifted_minus.push(Complex64::new(mr, -mi));
    }
    Ok(KernelTable {
        tau_grid,
        kappa_r,
        kappa_i,
        nu,
        shifted_plus,
        shifted_minus,
    })
}

impl KernelTable {
    pub fn len(&self) -> usize {
        self.tau_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_grid.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(KERNEL_CSV_HEADER)?;
        for j in 0..self.len() {
            let row = [
                self.tau_grid[j],
                self.kappa_r[j],
                self.kappa_i[j],
                self.shifted_plus[j].re,
                self.shifted_plus[j].im,
                self.shifted_minus[j].re,
                self.shifted_minus[j].im,
            ];
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        w.flush().map_err(|e| FvError::Csv(e.to_string()))?;
        Ok(())
    }
}

/// Auxiliary trigonometric quantities of the single-oscillator path-integral
/// evaluation of the generating function (ħ = 1).
///
/// `y = cot(ων)`, `y' = csc(ων)`, `z = cot(ω(ν − iβ))`, `z' = csc(ω(ν − iβ))`,
/// `x = cot(ωt)`, `x' = csc(ωt)` and `Δ = 2(z'y' − yz − 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxTrig {
    pub omega: f64,
    pub nu: f64,
    pub beta: f64,
    pub elapsed: f64,
    pub x: Complex64,
    pub xp: Complex64,
    pub y: Complex64,
    pub yp: Complex64,
    pub z: Complex64,
    pub zp: Complex64,
    pub delta: Complex64,
}

fn cot(z: Complex64) -> Complex64 {
    z.cos() / z.sin()
}

fn csc(z: Complex64) -> Complex64 {
    z.sin().inv()
}

impl AuxTrig {
    pub fn new(omega: f64, nu: f64, beta: f64, elapsed: f64) -> Self {
        let wt = Complex64::new(omega * elapsed, 0.0);
        let wn = Complex64::new(omega * nu, 0.0);
        let wb = Complex64::new(omega * nu, -omega * beta);
        let (y, yp, z, zp) = (cot(wn), csc(wn), cot(wb), csc(wb));
        AuxTrig {
            omega,
            nu,
            beta,
            elapsed,
            x: cot(wt),
            xp: csc(wt),
            y,
            yp,
            z,
            zp,
            delta: 2.0 * (zp * yp - y * z - 1.0),
        }
    }
}

/// Absolute residuals of the three closed forms for `Δ`, `(yz' − y'z)/Δ` and
/// `(z' − y')/Δ`. Rejects `nu = 0`, where `cot(ων)` and `csc(ων)` diverge.
pub fn check_shift_identities(omega: f64, nu: f64, beta: f64) -> Result<[f64; 3]> {
    if nu == 0.0 {
        return Err(FvError::InvalidArgument(
            "the auxiliary identities are singular at nu = 0".into(),
        ));
    }
    if !(omega > 0.0) || !(beta > 0.0) {
        return Err(FvError::InvalidArgument(
            "omega and beta must be positive".into(),
        ));
    }
    // x and x' do not enter the three identities; any elapsed time works.
    let aux = AuxTrig::new(omega, nu, beta, 1.0);
    let wn = omega * nu;
    let coth_half = 1.0 / (0.5 * omega * beta).tanh();
    let i = Complex64::i();

    let delta_closed = 2.0
        * csc(Complex64::new(wn, -omega * beta))
        * csc(Complex64::new(wn, 0.0))
        * (1.0 - (omega * beta).cosh());
    let ratio1 = (aux.y * aux.zp - aux.yp * aux.z) / aux.delta;
    let ratio1_closed = 0.5 * wn.cos() + 0.5 * i * wn.sin() * coth_half;
    let ratio2 = (aux.zp - aux.yp) / aux.delta;
    let ratio2_closed = -0.5 * i * wn.cos() * coth_half + 0.5 * wn.sin();

    Ok([
        (aux.delta - delta_closed).norm(),
        (ratio1 - ratio1_closed).norm(),
        (ratio2 - ratio2_closed).norm(),
    ])
}
