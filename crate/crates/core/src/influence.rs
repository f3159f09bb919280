//! Discretized influence-functional path sums.
//!
//! Paths are piecewise constant on `n_slices` equal slices and take values in
//! the eigenvalues of `X_S`. A forward/backward pair `(Q, Q̃)` is weighted by
//! `exp(iΦ)` with
//!
//! ```text
//! iΦ = Σ_{k ≥ k'} [ i ζ−(k) ζ+(k') η_i(k,k') − ζ−(k) ζ−(k') η_r(k,k') ]
//! ```
//!
//! where `ζ± = Q ± Q̃` and `η` are slice-pair integrals of the kernels
//! (diagonal cells over the triangle `s > s'`). For the heat generating
//! function of a counted bath the cross terms are regrouped into
//!
//! ```text
//! iΦ_ν = Σ_{k ≥ k'} [ −(Q Q' + Q̃ Q̃') η_r + i (Q Q' − Q̃ Q̃') η_i ] + Σ_{k, k'} Q(k) Q̃(k') η_×(k,k')
//! ```
//!
//! with `η_×` the full-cell integral of `κ_r(s − s' + ν) + i κ_i(s − s' + ν)`.
//! Optional third- and fourth-order cumulant terms multiply the weight by
//! `exp(S₃ + S₄)`.
//!
//! The system propagator uses a symmetric split: half a step of `H_S`, the
//! influence of slice 0, full steps between slices, and a final half step.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{BathSpec, Branch};
use crate::cumulants::{self, AmplitudeSet3, AmplitudeSet4, OperatorCorrelator};
use crate::error::{FvError, Result};
use crate::linalg::{self, c, CMatrix, C64, I};
use crate::oracle::{SystemModel, TruncatedBath};
use crate::quadrature::GaussLegendre;
use crate::reduce::{tree_reduce, Neumaier};

pub const DEFAULT_GAUSS_ORDER: usize = 8;
pub const DEFAULT_PATH_BUDGET: u128 = 100_000_000;
/// Prefix enumeration targets at least this many independent chunks.
const MIN_CHUNKS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    pub t_i: f64,
    pub t_f: f64,
    pub n_slices: usize,
}

impl PathGrid {
    pub fn new(t_i: f64, t_f: f64, n_slices: usize) -> Result<Self> {
        if n_slices == 0 {
            return Err(FvError::InvalidArgument("n_slices must be >= 1".into()));
        }
        if !(t_f > t_i) || !t_i.is_finite() || !t_f.is_finite() {
            return Err(FvError::InvalidArgument(format!(
                "grid needs finite t_f > t_i, got [{t_i}, {t_f}]"
            )));
        }
        Ok(PathGrid { t_i, t_f, n_slices })
    }

    pub fn dt(&self) -> f64 {
        (self.t_f - self.t_i) / self.n_slices as f64
    }

    pub fn slice_start(&self, k: usize) -> f64 {
        self.t_i + k as f64 * self.dt()
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        self.t_i + (k as f64 + 0.5) * self.dt()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.n_slices).map(|k| self.midpoint(k)).collect()
    }
}

/// Forward and backward paths as indices into the `X_S` eigenvalues.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathPair {
    pub q: Vec<usize>,
    pub q_tilde: Vec<usize>,
}

impl PathPair {
    pub fn new(q: Vec<usize>, q_tilde: Vec<usize>) -> Result<Self> {
        if q.len() != q_tilde.len() {
            return Err(FvError::DimensionMismatch {
                expected: q.len(),
                got: q_tilde.len(),
            });
        }
        Ok(PathPair { q, q_tilde })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn swapped(&self) -> PathPair {
        PathPair {
            q: self.q_tilde.clone(),
            q_tilde: self.q.clone(),
        }
    }

    fn values(&self, eigenvalues: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let look = |idx: &[usize]| {
            idx.iter()
                .map(|&i| {
                    eigenvalues.get(i).copied().ok_or_else(|| {
                        FvError::InvalidArgument(format!("path index {i} out of range ({})", eigenvalues.len()))
                    })
                })
                .collect::<Result<Vec<f64>>>()
        };
        Ok((look(&self.q)?, look(&self.q_tilde)?))
    }
}

/// Two-time kernels as seen by the discretizer, with coupling envelopes applied.
pub trait KernelSource: Sync {
    /// `(κ_r, κ_i)` at `(s, s')`.
    fn kernels_at(&self, s: f64, s_prime: f64) -> (f64, f64);
    /// `κ_r(s − s' + ν) + i κ_i(s − s' + ν)`.
    fn counting_kernel(&self, s: f64, s_prime: f64, nu: f64) -> C64;
}

impl KernelSource for BathSpec {
    fn kernels_at(&self, s: f64, s_prime: f64) -> (f64, f64) {
        BathSpec::kernels_at(self, s, s_prime)
    }

    fn counting_kernel(&self, s: f64, s_prime: f64, nu: f64) -> C64 {
        BathSpec::counting_kernel(self, s, s_prime, nu)
    }
}

/// Uses the truncated bath's exact two-point function, so a Kerr bath gets
/// its own second-order kernel rather than the harmonic one.
impl KernelSource for TruncatedBath {
    fn kernels_at(&self, s: f64, s_prime: f64) -> (f64, f64) {
        let f = self.spec().envelope(s) * self.spec().envelope(s_prime);
        let (kr, ki) = self.diagonal().kappa(s - s_prime);
        (f * kr, f * ki)
    }

    fn counting_kernel(&self, s: f64, s_prime: f64, nu: f64) -> C64 {
        let f = self.spec().envelope(s) * self.spec().envelope(s_prime);
        self.diagonal().correlation_function(s - s_prime + nu).conj() * f
    }
}

/// Slice-pair integrals of the kernels for one bath.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceCoefficients {
    pub t_i: f64,
    pub dt: f64,
    pub n_slices: usize,
    pub nu: f64,
    pub gauss_order: usize,
    /// Row-major `n × n`, only `k ≥ k'` populated.
    pub eta_r: Vec<f64>,
    pub eta_i: Vec<f64>,
    /// Row-major `n × n`, full square.
    pub eta_cross: Vec<C64>,
}

pub const COEFFICIENT_CSV_HEADER: [&str; 10] =
    ["t_i", "dt", "nu", "gauss_order", "k", "kp", "eta_r", "eta_i", "re_cross", "im_cross"];

#[derive(Debug, Serialize, Deserialize)]
struct CoefficientRow {
    t_i: f64,
    dt: f64,
    nu: f64,
    gauss_order: usize,
    k: usize,
    kp: usize,
    eta_r: f64,
    eta_i: f64,
    re_cross: f64,
    im_cross: f64,
}

impl InfluenceCoefficients {
    fn idx(&self, k: usize, kp: usize) -> usize {
        k * self.n_slices + kp
    }

    pub fn eta_r(&self, k: usize, kp: usize) -> f64 {
        self.eta_r[self.idx(k, kp)]
    }

    pub fn eta_i(&self, k: usize, kp: usize) -> f64 {
        self.eta_i[self.idx(k, kp)]
    }

    pub fn eta_cross(&self, k: usize, kp: usize) -> C64 {
        self.eta_cross[self.idx(k, kp)]
    }

    pub fn grid(&self) -> PathGrid {
        PathGrid {
            t_i: self.t_i,
            t_f: self.t_i + self.dt * self.n_slices as f64,
            n_slices: self.n_slices,
        }
    }

    fn same_grid(&self, n_slices: usize, dt: f64, t_i: f64) -> bool {
        self.n_slices == n_slices && (self.dt - dt).abs() <= 1e-12 * dt.abs() && (self.t_i - t_i).abs() <= 1e-12
    }

    /// Smallest eigenvalue of the symmetric form `Σ_{k≥k'} ζ_k ζ_k' η_r(k,k')`.
    /// Non-negative for a physical bath, which bounds every weight by one.
    pub fn noise_form_min_eigenvalue(&self) -> f64 {
        let n = self.n_slices;
        let m = CMatrix::from_fn(n, n, |k, kp| {
            let v = match k.cmp(&kp) {
                std::cmp::Ordering::Equal => self.eta_r(k, k),
                std::cmp::Ordering::Greater => 0.5 * self.eta_r(k, kp),
                std::cmp::Ordering::Less => 0.5 * self.eta_r(kp, k),
            };
            c(v)
        });
        linalg::eigh(&m).values[0]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for k in 0..self.n_slices {
            for kp in 0..self.n_slices {
                let x = self.eta_cross(k, kp);
                w.serialize(CoefficientRow {
                    t_i: self.t_i,
                    dt: self.dt,
                    nu: self.nu,
                    gauss_order: self.gauss_order,
                    k,
                    kp,
                    eta_r: self.eta_r(k, kp),
                    eta_i: self.eta_i(k, kp),
                    re_cross: x.re,
                    im_cross: x.im,
                })?;
            }
        }
        w.flush().map_err(|e| FvError::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows: Vec<CoefficientRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
        let n = (rows.len() as f64).sqrt().round() as usize;
        if n == 0 || n * n != rows.len() {
            return Err(FvError::Csv(format!("expected n² rows, got {}", rows.len())));
        }
        let first = &rows[0];
        let mut out = InfluenceCoefficients {
            t_i: first.t_i,
            dt: first.dt,
            n_slices: n,
            nu: first.nu,
            gauss_order: first.gauss_order,
            eta_r: vec![0.0; n * n],
            eta_i: vec![0.0; n * n],
            eta_cross: vec![c(0.0); n * n],
        };
        for row in &rows {
            if row.k >= n || row.kp >= n {
                return Err(FvError::Csv(format!("slice index ({}, {}) out of range", row.k, row.kp)));
            }
            if row.t_i != first.t_i || row.dt != first.dt || row.nu != first.nu {
                return Err(FvError::Csv("inconsistent grid metadata between rows".into()));
            }
            let i = row.k * n + row.kp;
            out.eta_r[i] = row.eta_r;
            out.eta_i[i] = row.eta_i;
            out.eta_cross[i] = C64::new(row.re_cross, row.im_cross);
        }
        Ok(out)
    }
}

/// `∬` of `f(s, s')` over slice `k` × slice `kp`; with `triangle`, only `s > s'`
/// (meaningful on the diagonal).
fn cell_integral<T>(g: &GaussLegendre, grid: &PathGrid, k: usize, kp: usize, triangle: bool, f: impl Fn(f64, f64) -> T) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
{
    let (a, b) = (grid.slice_start(k), grid.slice_start(k + 1));
    let (ap, bp) = (grid.slice_start(kp), grid.slice_start(kp + 1));
    let mut acc = T::default();
    for (s, ws) in g.on_interval(a, b) {
        let upper = if triangle { s } else { bp };
        for (sp, wp) in g.on_interval(ap, upper) {
            acc = acc + f(s, sp) * (ws * wp);
        }
    }
    acc
}

pub fn discretize_action<K: KernelSource + ?Sized>(bath: &K, grid: &PathGrid, nu: f64) -> Result<InfluenceCoefficients> {
    discretize_action_with_order(bath, grid, nu, DEFAULT_GAUSS_ORDER)
}

pub fn discretize_action_with_order<K: KernelSource + ?Sized>(
    bath: &K,
    grid: &PathGrid,
    nu: f64,
    gauss_order: usize,
) -> Result<InfluenceCoefficients> {
    if !nu.is_finite() {
        return Err(FvError::InvalidArgument(format!("nu must be finite, got {nu}")));
    }
    let g = GaussLegendre::new(gauss_order)?;
    let n = grid.n_slices;
    let cells: Vec<(f64, f64, C64)> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (k, kp) = (idx / n, idx % n);
            let (er, ei) = if k >= kp {
                let r = cell_integral(&g, grid, k, kp, k == kp, |s, sp| bath.kernels_at(s, sp).0);
                let i = cell_integral(&g, grid, k, kp, k == kp, |s, sp| bath.kernels_at(s, sp).1);
                (r, i)
            } else {
                (0.0, 0.0)
            };
            let cross = if k == kp {
                // the full diagonal cell as two triangles, s > s' and s < s'
                cell_integral(&g, grid, k, k, true, |s, sp| bath.counting_kernel(s, sp, nu))
                    + cell_integral(&g, grid, k, k, true, |s, sp| bath.counting_kernel(sp, s, nu))
            } else {
                cell_integral(&g, grid, k, kp, false, |s, sp| bath.counting_kernel(s, sp, nu))
            };
            (er, ei, cross)
        })
        .collect();
    Ok(InfluenceCoefficients {
        t_i: grid.t_i,
        dt: grid.dt(),
        n_slices: n,
        nu,
        gauss_order,
        eta_r: cells.iter().map(|x| x.0).collect(),
        eta_i: cells.iter().map(|x| x.1).collect(),
        eta_cross: cells.iter().map(|x| x.2).collect(),
    })
}

fn check_pair_len(coeffs: &InfluenceCoefficients, pair: &PathPair) -> Result<()> {
    if pair.len() != coeffs.n_slices {
        return Err(FvError::GridMismatch(format!(
            "path has {} slices, coefficients have {}",
            pair.len(),
            coeffs.n_slices
        )));
    }
    Ok(())
}

/// `iΦ` of the second-order action for one path pair.
pub fn fv_exponent(coeffs: &InfluenceCoefficients, pair: &PathPair, eigenvalues: &[f64]) -> Result<C64> {
    check_pair_len(coeffs, pair)?;
    let (q, qt) = pair.values(eigenvalues)?;
    let n = coeffs.n_slices;
    let mut acc = c(0.0);
    for k in 0..n {
        let zm = q[k] - qt[k];
        for kp in 0..=k {
            let zp2 = q[kp] + qt[kp];
            let zm2 = q[kp] - qt[kp];
            acc += I * (zm * zp2 * coeffs.eta_i(k, kp)) - c(zm * zm2 * coeffs.eta_r(k, kp));
        }
    }
    Ok(acc)
}

pub fn fv_weight(coeffs: &InfluenceCoefficients, pair: &PathPair, eigenvalues: &[f64]) -> Result<C64> {
    Ok(fv_exponent(coeffs, pair, eigenvalues)?.exp())
}

/// `iΦ_ν` with the shifted cross block.
pub fn counting_exponent(coeffs: &InfluenceCoefficients, pair: &PathPair, eigenvalues: &[f64]) -> Result<C64> {
    check_pair_len(coeffs, pair)?;
    let (q, qt) = pair.values(eigenvalues)?;
    let n = coeffs.n_slices;
    let mut acc = c(0.0);
    for k in 0..n {
        for kp in 0..=k {
            let same = q[k] * q[kp] + qt[k] * qt[kp];
            let diff = q[k] * q[kp] - qt[k] * qt[kp];
            acc += I * (diff * coeffs.eta_i(k, kp)) - c(same * coeffs.eta_r(k, kp));
        }
        for kp in 0..n {
            acc += coeffs.eta_cross(k, kp) * (q[k] * qt[kp]);
        }
    }
    Ok(acc)
}

/// Generating-function weight of one path pair. At `ν = 0` this is exactly
/// [`fv_weight`].
pub fn heat_gf_weight(coeffs: &InfluenceCoefficients, pair: &PathPair, eigenvalues: &[f64]) -> Result<C64> {
    if coeffs.nu == 0.0 {
        return fv_weight(coeffs, pair, eigenvalues);
    }
    Ok(counting_exponent(coeffs, pair, eigenvalues)?.exp())
}

/// Third- and fourth-order cumulant amplitudes on strictly ordered slice
/// tuples, with coupling envelopes folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct HigherOrderKernels {
    pub t_i: f64,
    pub dt: f64,
    pub n_slices: usize,
    pub max_order: usize,
    /// Dense `n³`, populated for `s > u > v`.
    pub third: Vec<AmplitudeSet3>,
    /// Dense `n⁴`, populated for `s > u > v > w` when `max_order == 4`.
    pub fourth: Vec<AmplitudeSet4>,
}

pub const HIGHER_ORDER_CSV_HEADER: [&str; 10] = ["n_slices", "t_i", "dt", "s", "u", "v", "w", "label", "re", "im"];

#[derive(Debug, Serialize, Deserialize)]
struct HigherOrderRow {
    n_slices: usize,
    t_i: f64,
    dt: f64,
    s: usize,
    u: usize,
    v: usize,
    w: Option<usize>,
    label: String,
    re: f64,
    im: f64,
}

fn label_string(branches: &[Branch]) -> String {
    branches.iter().map(|b| b.symbol()).collect()
}

impl HigherOrderKernels {
    pub fn zeros(grid: &PathGrid, max_order: usize) -> Result<Self> {
        if !(3..=4).contains(&max_order) {
            return Err(FvError::UnsupportedOrder(max_order));
        }
        let n = grid.n_slices;
        Ok(HigherOrderKernels {
            t_i: grid.t_i,
            dt: grid.dt(),
            n_slices: n,
            max_order,
            third: vec![AmplitudeSet3::ZERO; n * n * n],
            fourth: if max_order == 4 {
                vec![AmplitudeSet4::ZERO; n * n * n * n]
            } else {
                Vec::new()
            },
        })
    }

    /// Builds the tables from a bath's operator traces at slice midpoints.
    ///
    /// Third order uses the four-trace formulas, fourth order the sign table
    /// applied to operator-ordered fourth cumulants. The bath must have zero mean
    /// coupling.
    pub fn build<O>(ops: &O, envelope: impl Fn(f64) -> f64 + Sync, grid: &PathGrid, max_order: usize) -> Result<Self>
    where
        O: OperatorCorrelator + Sync + ?Sized,
    {
        let mut out = HigherOrderKernels::zeros(grid, max_order)?;
        let n = grid.n_slices;
        let t = grid.midpoints();
        let f: Vec<f64> = t.iter().map(|&x| envelope(x)).collect();
        let triples: Vec<(usize, usize, usize)> = (0..n)
            .flat_map(|s| (0..s).flat_map(move |u| (0..u).map(move |v| (s, u, v))))
            .collect();
        let third: Vec<AmplitudeSet3> = triples
            .par_iter()
            .map(|&(s, u, v)| {
                let a = cumulants::amplitudes3(ops, t[s], t[u], t[v])?;
                let scale = f[s] * f[u] * f[v];
                Ok(AmplitudeSet3 {
                    a: a.a * scale,
                    b: a.b * scale,
                    c: a.c * scale,
                    d: a.d * scale,
                })
            })
            .collect::<Result<_>>()?;
        for (&(s, u, v), a) in triples.iter().zip(third) {
            out.third[(s * n + u) * n + v] = a;
        }
        if max_order == 4 {
            let quads: Vec<[usize; 4]> = triples
                .iter()
                .flat_map(|&(s, u, v)| (0..v).map(move |w| [s, u, v, w]))
                .collect();
            let fourth: Vec<AmplitudeSet4> = quads
                .par_iter()
                .map(|&[s, u, v, w]| {
                    let g4 = |x: [f64; 4]| cumulants::operator_cumulant(ops, &x);
                    let mut a = cumulants::amplitudes4(g4, t[s], t[u], t[v], t[w])?;
                    let scale = f[s] * f[u] * f[v] * f[w];
                    for x in a.values.iter_mut() {
                        *x *= scale;
                    }
                    Ok(a)
                })
                .collect::<Result<_>>()?;
            for (&[s, u, v, w], a) in quads.iter().zip(fourth) {
                out.fourth[((s * n + u) * n + v) * n + w] = a;
            }
        }
        Ok(out)
    }

    pub fn from_bath(bath: &TruncatedBath, grid: &PathGrid, max_order: usize) -> Result<Self> {
        let spec = bath.spec().clone();
        HigherOrderKernels::build(bath.diagonal(), move |t| spec.envelope(t), grid, max_order)
    }

    pub fn third(&self, s: usize, u: usize, v: usize) -> &AmplitudeSet3 {
        &self.third[(s * self.n_slices + u) * self.n_slices + v]
    }

    pub fn fourth(&self, s: usize, u: usize, v: usize, w: usize) -> Option<&AmplitudeSet4> {
        let n = self.n_slices;
        self.fourth.get(((s * n + u) * n + v) * n + w)
    }

    fn check_grid(&self, n_slices: usize, dt: f64, t_i: f64) -> Result<()> {
        if self.n_slices != n_slices || (self.dt - dt).abs() > 1e-12 * dt.abs() || (self.t_i - t_i).abs() > 1e-12 {
            return Err(FvError::GridMismatch(format!(
                "kernels built for {} slices of {} from {}, requested {} slices of {} from {}",
                self.n_slices, self.dt, self.t_i, n_slices, dt, t_i
            )));
        }
        Ok(())
    }

    /// Entry-wise sum, for several independent baths.
    pub fn add(&self, other: &HigherOrderKernels) -> Result<HigherOrderKernels> {
        other.check_grid(self.n_slices, self.dt, self.t_i)?;
        let mut out = self.clone();
        for (a, b) in out.third.iter_mut().zip(&other.third) {
            a.a += b.a;
            a.b += b.b;
            a.c += b.c;
            a.d += b.d;
        }
        if other.max_order == 4 {
            if out.max_order < 4 {
                out.max_order = 4;
                out.fourth = other.fourth.clone();
            } else {
                for (a, b) in out.fourth.iter_mut().zip(&other.fourth) {
                    for (x, y) in a.values.iter_mut().zip(&b.values) {
                        *x += y;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        let t = self.third.iter().fold(0.0f64, |m, a| m.max(a.max_abs()));
        self.fourth.iter().fold(t, |m, a| m.max(a.max_abs()))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let n = self.n_slices;
        let labels3 = [
            [Branch::Plus, Branch::Plus],
            [Branch::Plus, Branch::Minus],
            [Branch::Minus, Branch::Plus],
            [Branch::Minus, Branch::Minus],
        ];
        for s in 0..n {
            for u in 0..s {
                for v in 0..u {
                    let a = self.third(s, u, v);
                    for l in labels3 {
                        let x = a.get(l[0], l[1]);
                        wtr.serialize(HigherOrderRow {
                            n_slices: n,
                            t_i: self.t_i,
                            dt: self.dt,
                            s,
                            u,
                            v,
                            w: None,
                            label: label_string(&l),
                            re: x.re,
                            im: x.im,
                        })?;
                    }
                    if self.max_order == 4 {
                        for w in 0..v {
                            let a = self.fourth(s, u, v, w).expect("fourth-order table present");
                            for (l, x) in cumulants::AMPLITUDE4_LABELS.iter().zip(a.values) {
                                wtr.serialize(HigherOrderRow {
                                    n_slices: n,
                                    t_i: self.t_i,
                                    dt: self.dt,
                                    s,
                                    u,
                                    v,
                                    w: Some(w),
                                    label: label_string(l),
                                    re: x.re,
                                    im: x.im,
                                })?;
                            }
                        }
                    }
                }
            }
        }
        wtr.flush().map_err(|e| FvError::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, max_order: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows: Vec<HigherOrderRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
        let first = rows
            .first()
            .ok_or_else(|| FvError::Csv("empty higher-order kernel table".into()))?;
        let grid = PathGrid {
            t_i: first.t_i,
            t_f: first.t_i + first.dt * first.n_slices as f64,
            n_slices: first.n_slices,
        };
        let mut out = HigherOrderKernels::zeros(&grid, max_order)?;
        let n = out.n_slices;
        let parse = |label: &str| -> Result<Vec<Branch>> {
            label
                .chars()
                .map(|ch| match ch {
                    '+' => Ok(Branch::Plus),
                    '-' => Ok(Branch::Minus),
                    other => Err(FvError::Csv(format!("bad branch symbol {other:?}"))),
                })
                .collect()
        };
        for row in &rows {
            if row.s >= n || row.u >= n || row.v >= n || row.w.is_some_and(|w| w >= n) {
                return Err(FvError::Csv("slice index out of range".into()));
            }
            let x = C64::new(row.re, row.im);
            let l = parse(&row.label)?;
            match (row.w, l.as_slice()) {
                (None, [p, q]) => {
                    let a = &mut out.third[(row.s * n + row.u) * n + row.v];
                    match (p, q) {
                        (Branch::Plus, Branch::Plus) => a.a = x,
                        (Branch::Plus, Branch::Minus) => a.b = x,
                        (Branch::Minus, Branch::Plus) => a.c = x,
                        (Branch::Minus, Branch::Minus) => a.d = x,
                    }
                }
                (Some(w), [p, q, r]) if max_order == 4 => {
                    let idx = cumulants::AMPLITUDE4_LABELS
                        .iter()
                        .position(|lab| lab == &[*p, *q, *r])
                        .expect("all labels present");
                    out.fourth[((row.s * n + row.u) * n + row.v) * n + w].values[idx] = x;
                }
                (Some(_), [_, _, _]) => {}
                _ => return Err(FvError::Csv(format!("malformed label {:?}", row.label))),
            }
        }
        Ok(out)
    }
}

fn zeta(q: f64, qt: f64, p: Branch) -> f64 {
    match p {
        Branch::Plus => q + qt,
        Branch::Minus => q - qt,
    }
}

/// `S₃ + S₄` for one path pair, summed over strictly ordered slice tuples.
pub fn higher_order_exponent(kernels: &HigherOrderKernels, pair: &PathPair, eigenvalues: &[f64]) -> Result<C64> {
    if pair.len() != kernels.n_slices {
        return Err(FvError::GridMismatch(format!(
            "path has {} slices, kernels have {}",
            pair.len(),
            kernels.n_slices
        )));
    }
    let (q, qt) = pair.values(eigenvalues)?;
    let n = kernels.n_slices;
    let dt = kernels.dt;
    let z = |k: usize, p: Branch| zeta(q[k], qt[k], p);
    let mut s3 = c(0.0);
    let mut s4 = c(0.0);
    for s in 0..n {
        let zm = z(s, Branch::Minus);
        for u in 0..s {
            for v in 0..u {
                let a = kernels.third(s, u, v);
                for p in Branch::BOTH {
                    for qb in Branch::BOTH {
                        s3 += a.get(p, qb) * (zm * z(u, p) * z(v, qb));
                    }
                }
                if kernels.max_order == 4 {
                    for w in 0..v {
                        let a = kernels.fourth(s, u, v, w).expect("fourth-order table present");
                        for (l, x) in cumulants::AMPLITUDE4_LABELS.iter().zip(a.values) {
                            s4 += x * (zm * z(u, l[0]) * z(v, l[1]) * z(w, l[2]));
                        }
                    }
                }
            }
        }
    }
    Ok(s3 * (I * 0.25 * dt.powi(3)) + s4 * (0.125 * dt.powi(4)))
}

pub fn higher_order_weight(kernels: &HigherOrderKernels, pair: &PathPair, eigenvalues: &[f64]) -> Result<C64> {
    Ok(higher_order_exponent(kernels, pair, eigenvalues)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumMode {
    Density,
    /// Heat generating function of bath `counted` at that bath's `ν`.
    Gf { counted: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathSumOutput {
    Density(CMatrix),
    Gf(C64),
}

impl PathSumOutput {
    pub fn density(self) -> Option<CMatrix> {
        match self {
            PathSumOutput::Density(m) => Some(m),
            PathSumOutput::Gf(_) => None,
        }
    }

    pub fn gf(self) -> Option<C64> {
        match self {
            PathSumOutput::Gf(g) => Some(g),
            PathSumOutput::Density(_) => None,
        }
    }
}

/// Number of path pairs `dim^(2 n_slices)`, saturating.
pub fn path_pair_count(dim: usize, n_slices: usize) -> u128 {
    let p = (dim * dim) as u128;
    (0..n_slices).try_fold(1u128, |acc, _| acc.checked_mul(p)).unwrap_or(u128::MAX)
}

struct Engine<'a> {
    n: usize,
    p: usize,
    /// `[k][k'][a][b]` second-order exponent linking slice `k` in pair state
    /// `a` to slice `k' ≤ k` in state `b`.
    t2: Vec<C64>,
    /// `prop[b][a]`: amplitude to go from state `b` to `a` over one step.
    prop: Vec<C64>,
    rho0: Vec<C64>,
    zeta_plus: Vec<f64>,
    zeta_minus: Vec<f64>,
    kernels: Option<&'a HigherOrderKernels>,
}

impl Engine<'_> {
    fn t2(&self, k: usize, kp: usize, a: usize, b: usize) -> C64 {
        self.t2[((k * self.n + kp) * self.p + a) * self.p + b]
    }

    fn zeta(&self, a: usize, p: Branch) -> f64 {
        match p {
            Branch::Plus => self.zeta_plus[a],
            Branch::Minus => self.zeta_minus[a],
        }
    }

    /// Higher-order exponent per unit `ζ−` at slice `k`, given earlier states.
    fn higher_order_factor(&self, k: usize, states: &[usize]) -> C64 {
        let Some(h) = self.kernels else {
            return c(0.0);
        };
        let mut s3 = c(0.0);
        let mut s4 = c(0.0);
        for u in 0..k {
            for v in 0..u {
                let a = h.third(k, u, v);
                for p in Branch::BOTH {
                    let zu = self.zeta(states[u], p);
                    for q in Branch::BOTH {
                        s3 += a.get(p, q) * (zu * self.zeta(states[v], q));
                    }
                }
                if h.max_order == 4 {
                    for w in 0..v {
                        let a = h.fourth(k, u, v, w).expect("fourth-order table present");
                        for (l, x) in cumulants::AMPLITUDE4_LABELS.iter().zip(a.values) {
                            s4 += x * (self.zeta(states[u], l[0]) * self.zeta(states[v], l[1]) * self.zeta(states[w], l[2]));
                        }
                    }
                }
            }
        }
        s3 * (I * 0.25 * h.dt.powi(3)) + s4 * (0.125 * h.dt.powi(4))
    }

    /// Extends a partial path by state `a` at slice `k`.
    fn step(&self, k: usize, a: usize, states: &[usize], amp: C64, expo: C64, ho: C64) -> (C64, C64) {
        let amp = if k == 0 {
            self.rho0[a]
        } else {
            amp * self.prop[states[k - 1] * self.p + a]
        };
        let mut e = expo + self.t2(k, k, a, a);
        for (kp, &b) in states[..k].iter().enumerate() {
            e += self.t2(k, kp, a, b);
        }
        e += ho * self.zeta_minus[a];
        (amp, e)
    }

    fn dfs(&self, k: usize, states: &mut Vec<usize>, amp: C64, expo: C64, acc: &mut [Neumaier]) {
        let ho = self.higher_order_factor(k, states);
        for a in 0..self.p {
            let (amp_a, e_a) = self.step(k, a, states, amp, expo, ho);
            if amp_a == c(0.0) {
                continue;
            }
            if k + 1 == self.n {
                acc[a].add(amp_a * e_a.exp());
            } else {
                states.push(a);
                self.dfs(k + 1, states, amp_a, e_a, acc);
                states.pop();
            }
        }
    }

    fn run_prefix(&self, prefix: &[usize]) -> Vec<C64> {
        let mut acc = vec![Neumaier::new(); self.p];
        let mut states = Vec::with_capacity(self.n);
        let mut amp = c(0.0);
        let mut expo = c(0.0);
        for (k, &a) in prefix.iter().enumerate() {
            let ho = self.higher_order_factor(k, &states);
            let (na, ne) = self.step(k, a, &states, amp, expo, ho);
            if na == c(0.0) {
                return vec![c(0.0); self.p];
            }
            amp = na;
            expo = ne;
            states.push(a);
        }
        if prefix.len() == self.n {
            let last = *prefix.last().expect("n >= 1");
            acc[last].add(amp * expo.exp());
        } else {
            self.dfs(prefix.len(), &mut states, amp, expo, &mut acc);
        }
        acc.iter().map(Neumaier::value).collect()
    }
}

/// Sums all forward/backward path pairs.
///
/// Density mode uses the second-order action for every bath and returns
/// `ρ_S(t_f)` in the original basis. Gf mode uses the counting action for the
/// counted bath and returns `tr_S Γ`. All coefficient tables must share one grid.
pub fn path_sum(
    system: &SystemModel,
    coeffs: &[InfluenceCoefficients],
    kernels: Option<&HigherOrderKernels>,
    rho_s0: &CMatrix,
    mode: SumMode,
    budget: u128,
) -> Result<PathSumOutput> {
    let first = coeffs
        .first()
        .ok_or_else(|| FvError::InvalidArgument("path sum needs at least one bath".into()))?;
    let (n, dt, t_i) = (first.n_slices, first.dt, first.t_i);
    for cf in coeffs {
        if !cf.same_grid(n, dt, t_i) {
            return Err(FvError::GridMismatch("influence coefficients use different grids".into()));
        }
    }
    if let Some(h) = kernels {
        h.check_grid(n, dt, t_i)?;
    }
    let counted = match mode {
        SumMode::Density => None,
        SumMode::Gf { counted } => {
            if counted >= coeffs.len() {
                return Err(FvError::InvalidArgument(format!(
                    "counted bath index {counted} out of range (have {} baths)",
                    coeffs.len()
                )));
            }
            if kernels.is_some() && coeffs[counted].nu != 0.0 {
                return Err(FvError::Unsupported(
                    "higher-order cumulant terms with a non-zero counting parameter".into(),
                ));
            }
            Some(counted)
        }
    };
    let d = system.dim();
    let required = path_pair_count(d, n);
    if required > budget {
        return Err(FvError::PathBudget { required, budget });
    }
    system.validate_density(rho_s0)?;

    let p = d * d;
    let x = system.x_eigenvalues();
    let v = system.x_eigenbasis();
    let h_eb = v.adjoint() * system.h_s() * v;
    let u_half = linalg::unitary(&h_eb, 0.5 * dt);
    let u_full = linalg::unitary(&h_eb, dt);
    let rho_eb = v.adjoint() * rho_s0 * v;
    let rho_t = &u_half * rho_eb * u_half.adjoint();

    let qv = |a: usize| x[a / d];
    let qtv = |a: usize| x[a % d];
    let mut t2 = vec![c(0.0); n * n * p * p];
    for k in 0..n {
        for kp in 0..=k {
            for a in 0..p {
                for b in 0..p {
                    if kp == k && a != b {
                        continue;
                    }
                    let (q, qt, q2, qt2) = (qv(a), qtv(a), qv(b), qtv(b));
                    let mut e = c(0.0);
                    for (bi, cf) in coeffs.iter().enumerate() {
                        let use_counting = counted == Some(bi) && cf.nu != 0.0;
                        if use_counting {
                            let same = q * q2 + qt * qt2;
                            let diff = q * q2 - qt * qt2;
                            e += I * (diff * cf.eta_i(k, kp)) - c(same * cf.eta_r(k, kp));
                            e += cf.eta_cross(k, kp) * (q * qt2);
                            if kp != k {
                                e += cf.eta_cross(kp, k) * (q2 * qt);
                            }
                        } else {
                            let zm = q - qt;
                            e += I * (zm * (q2 + qt2) * cf.eta_i(k, kp)) - c(zm * (q2 - qt2) * cf.eta_r(k, kp));
                        }
                    }
                    t2[((k * n + kp) * p + a) * p + b] = e;
                }
            }
        }
    }
    let mut prop = vec![c(0.0); p * p];
    for b in 0..p {
        for a in 0..p {
            prop[b * p + a] = u_full[(a / d, b / d)] * u_full[(a % d, b % d)].conj();
        }
    }
    let engine = Engine {
        n,
        p,
        t2,
        prop,
        rho0: (0..p).map(|a| rho_t[(a / d, a % d)]).collect(),
        zeta_plus: (0..p).map(|a| qv(a) + qtv(a)).collect(),
        zeta_minus: (0..p).map(|a| qv(a) - qtv(a)).collect(),
        kernels,
    };

    let mut depth = 0;
    let mut chunks = 1usize;
    while depth < n && chunks < MIN_CHUNKS {
        depth += 1;
        chunks *= p;
    }
    let partials: Vec<Vec<C64>> = (0..chunks)
        .into_par_iter()
        .map(|idx| {
            let mut prefix = vec![0; depth];
            let mut r = idx;
            for slot in prefix.iter_mut().rev() {
                *slot = r % p;
                r /= p;
            }
            engine.run_prefix(&prefix)
        })
        .collect();
    let m = tree_reduce(partials, |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect()).expect("at least one chunk");

    let m = CMatrix::from_fn(d, d, |i, j| m[i * d + j]);
    match mode {
        SumMode::Density => {
            let rho = &u_half * m * u_half.adjoint();
            Ok(PathSumOutput::Density(v * rho * v.adjoint()))
        }
        SumMode::Gf { .. } => Ok(PathSumOutput::Gf(linalg::trace(&m))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::kappa;
    use crate::linalg::max_abs_diff;

    fn weak_bath() -> BathSpec {
        BathSpec::single_mode(1.0, 1.0, 0.3, 2.0).unwrap()
    }

    struct Constant;
    impl KernelSource for Constant {
        fn kernels_at(&self, _: f64, _: f64) -> (f64, f64) {
            (1.0, 1.0)
        }
        fn counting_kernel(&self, _: f64, _: f64, _: f64) -> C64 {
            C64::new(1.0, 1.0)
        }
    }

    #[test]
    fn triangle_of_constant_kernel() {
        let grid = PathGrid::new(0.0, 0.4, 1).unwrap();
        let cf = discretize_action(&Constant, &grid, 0.0).unwrap();
        assert!((cf.eta_r(0, 0) - 0.08).abs() < 1e-15);
        assert!((cf.eta_cross(0, 0) - C64::new(0.16, 0.16)).norm() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        assert!(PathGrid::new(0.0, 1.0, 0).is_err());
        assert!(PathGrid::new(1.0, 1.0, 3).is_err());
        let g = PathGrid::new(0.5, 1.5, 4).unwrap();
        assert_eq!(g.dt(), 0.25);
        assert_eq!(g.midpoint(1), 0.875);
    }

    #[test]
    fn zero_shift_cross_block_matches_unshifted_blocks() {
        let grid = PathGrid::new(0.0, 1.0, 5).unwrap();
        let cf = discretize_action(&weak_bath(), &grid, 0.0).unwrap();
        for k in 0..5 {
            for kp in 0..5 {
                let expect = match k.cmp(&kp) {
                    std::cmp::Ordering::Greater => C64::new(cf.eta_r(k, kp), cf.eta_i(k, kp)),
                    std::cmp::Ordering::Less => C64::new(cf.eta_r(kp, k), -cf.eta_i(kp, k)),
                    std::cmp::Ordering::Equal => c(2.0 * cf.eta_r(k, k)),
                };
                assert!((cf.eta_cross(k, kp) - expect).norm() < 1e-14, "{k} {kp}");
            }
        }
    }

    #[test]
    fn quadrature_self_convergence() {
        let grid = PathGrid::new(0.0, 0.5, 5).unwrap();
        let a = discretize_action_with_order(&weak_bath(), &grid, 0.3, 8).unwrap();
        let b = discretize_action_with_order(&weak_bath(), &grid, 0.3, 16).unwrap();
        let d = a
            .eta_r
            .iter()
            .zip(&b.eta_r)
            .map(|(x, y)| (x - y).abs())
            .chain(a.eta_cross.iter().zip(&b.eta_cross).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max);
        assert!(d < 1e-10, "{d}");
    }

    #[test]
    fn off_diagonal_cell_matches_analytic_integral() {
        // ∬ κ_i over [a,b]×[a',b'] for one mode: (w/ω²)[sin ω(b−a') − sin ω(b−b') − sin ω(a−a') + sin ω(a−b')]
        let spec = weak_bath();
        let grid = PathGrid::new(0.0, 1.0, 4).unwrap();
        let cf = discretize_action(&spec, &grid, 0.0).unwrap();
        let w = spec.modes[0].weight();
        let (a, b, ap, bp) = (0.5, 0.75, 0.0, 0.25);
        let f = |x: f64| -x.sin();
        let exact = -(w * (f(b - ap) - f(b - bp) - f(a - ap) + f(a - bp)));
        let exact = -exact;
        // direct check through a fine midpoint rule as well
        let m = 400;
        let h = 0.25 / m as f64;
        let mut mid = 0.0;
        for i in 0..m {
            for j in 0..m {
                mid += kappa(&spec, a + (i as f64 + 0.5) * h - ap - (j as f64 + 0.5) * h).1 * h * h;
            }
        }
        assert!((cf.eta_i(2, 0) - mid).abs() < 1e-6);
        assert!((cf.eta_i(2, 0) - exact).abs() < 1e-14, "{} vs {}", cf.eta_i(2, 0), exact);
    }

    #[test]
    fn identical_paths_feel_no_influence() {
        let grid = PathGrid::new(0.0, 1.0, 4).unwrap();
        let cf = discretize_action(&weak_bath(), &grid, 0.0).unwrap();
        let x = [-1.0, 1.0];
        let pair = PathPair::new(vec![0, 1, 1, 0], vec![0, 1, 1, 0]).unwrap();
        assert_eq!(fv_weight(&cf, &pair, &x).unwrap(), c(1.0));
    }

    #[test]
    fn zero_coupling_weights_are_one() {
        let spec = BathSpec::single_mode(1.0, 1.0, 0.0, 2.0).unwrap();
        let grid = PathGrid::new(0.0, 1.0, 3).unwrap();
        let cf = discretize_action(&spec, &grid, 0.4).unwrap();
        let pair = PathPair::new(vec![0, 1, 0], vec![1, 1, 0]).unwrap();
        let x = [-1.0, 1.0];
        assert_eq!(fv_weight(&cf, &pair, &x).unwrap(), c(1.0));
        assert_eq!(heat_gf_weight(&cf, &pair, &x).unwrap(), c(1.0));
    }

    #[test]
    fn noise_form_is_positive_and_weights_bounded() {
        let grid = PathGrid::new(0.0, 1.0, 4).unwrap();
        let cf = discretize_action(&weak_bath(), &grid, 0.0).unwrap();
        assert!(cf.noise_form_min_eigenvalue() > -1e-14);
        let x = [-1.0, 1.0];
        for idx in 0..256usize {
            let q: Vec<usize> = (0..4).map(|k| (idx >> k) & 1).collect();
            let qt: Vec<usize> = (0..4).map(|k| (idx >> (k + 4)) & 1).collect();
            let pair = PathPair::new(q, qt).unwrap();
            let w = fv_weight(&cf, &pair, &x).unwrap();
            assert!(w.norm() <= 1.0 + 1e-14);
            let swapped = fv_weight(&cf, &pair.swapped(), &x).unwrap();
            assert!((swapped - w.conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn counting_weight_at_zero_shift_is_fv_weight() {
        let grid = PathGrid::new(0.0, 1.0, 4).unwrap();
        let cf = discretize_action(&weak_bath(), &grid, 0.0).unwrap();
        let x = [-1.0, 1.0];
        let pair = PathPair::new(vec![0, 1, 1, 0], vec![1, 1, 0, 0]).unwrap();
        assert_eq!(heat_gf_weight(&cf, &pair, &x).unwrap(), fv_weight(&cf, &pair, &x).unwrap());
        // the regrouped exponent agrees numerically as well
        let a = counting_exponent(&cf, &pair, &x).unwrap();
        let b = fv_exponent(&cf, &pair, &x).unwrap();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn higher_order_weight_hand_check() {
        let grid = PathGrid::new(0.0, 0.9, 3).unwrap();
        let mut h = HigherOrderKernels::zeros(&grid, 3).unwrap();
        h.third[(2 * 3 + 1) * 3] = AmplitudeSet3 {
            a: c(1.0),
            b: c(2.0),
            c: c(3.0),
            d: c(4.0),
        };
        let x = [-1.0, 1.0];
        let pair = PathPair::new(vec![1, 1, 0], vec![0, 1, 1]).unwrap();
        // slices: (Q,Q̃) = (1,−1), (1,1), (−1,1); ζ±(0) = (0, 2), ζ±(1) = (2, 0), ζ−(2) = −2
        // bracket = A·2·0 + B·2·2 + C·0·0 + D·0·2 = 8
        let expected = (I * 0.25 * 0.3f64.powi(3) * (-2.0) * 8.0).exp();
        let got = higher_order_weight(&h, &pair, &x).unwrap();
        assert!((got - expected).norm() < 1e-15);
        let zero = HigherOrderKernels::zeros(&grid, 4).unwrap();
        assert_eq!(higher_order_weight(&zero, &pair, &x).unwrap(), c(1.0));
        let short = PathPair::new(vec![0, 1], vec![0, 1]).unwrap();
        assert!(matches!(higher_order_weight(&h, &short, &x), Err(FvError::GridMismatch(_))));
    }

    #[test]
    fn later_identical_slices_drop_out() {
        let grid = PathGrid::new(0.0, 1.0, 5).unwrap();
        let mut h = HigherOrderKernels::zeros(&grid, 4).unwrap();
        let mut k = 0.1;
        for a in h.third.iter_mut() {
            *a = AmplitudeSet3 { a: c(k), b: c(-k), c: C64::new(0.0, k), d: c(0.5 * k) };
            k += 0.01;
        }
        for a in h.fourth.iter_mut() {
            a.values = [C64::new(k, -k); 8];
            k += 0.003;
        }
        let x = [-1.0, 1.0];
        // identical from slice 3 on: changing those common values leaves S unchanged
        let p1 = PathPair::new(vec![0, 1, 0, 1, 1], vec![1, 1, 1, 1, 1]).unwrap();
        let p2 = PathPair::new(vec![0, 1, 0, 0, 0], vec![1, 1, 1, 0, 0]).unwrap();
        let e1 = higher_order_exponent(&h, &p1, &x).unwrap();
        let e2 = higher_order_exponent(&h, &p2, &x).unwrap();
        assert!((e1 - e2).norm() < 1e-15);
    }

    #[test]
    fn coefficient_csv_round_trip() {
        let grid = PathGrid::new(0.0, 1.0, 3).unwrap();
        let cf = discretize_action(&weak_bath(), &grid, 0.25).unwrap();
        let mut buf = Vec::new();
        cf.write_csv(&mut buf).unwrap();
        let head = String::from_utf8(buf.clone()).unwrap();
        assert!(head.starts_with(&COEFFICIENT_CSV_HEADER.join(",")));
        let back = InfluenceCoefficients::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, cf);
    }

    #[test]
    fn higher_order_csv_round_trip() {
        let grid = PathGrid::new(0.0, 1.0, 5).unwrap();
        let mut h = HigherOrderKernels::zeros(&grid, 4).unwrap();
        let mut k = 0.0;
        for s in 0..5 {
            for u in 0..s {
                for v in 0..u {
                    k += 1.0;
                    h.third[(s * 5 + u) * 5 + v] = AmplitudeSet3 { a: c(k), b: c(k + 0.1), c: c(k + 0.2), d: C64::new(0.0, k) };
                    for w in 0..v {
                        h.fourth[((s * 5 + u) * 5 + v) * 5 + w].values = std::array::from_fn(|j| C64::new(k, j as f64));
                    }
                }
            }
        }
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with(&HIGHER_ORDER_CSV_HEADER.join(",")));
        let back = HigherOrderKernels::read_csv(buf.as_slice(), 4).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn budget_is_enforced() {
        let grid = PathGrid::new(0.0, 1.0, 6).unwrap();
        let cf = discretize_action(&weak_bath(), &grid, 0.0).unwrap();
        let sys = SystemModel::spin_boson(1.0);
        let rho = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        let err = path_sum(&sys, &[cf], None, &rho, SumMode::Density, 1000).unwrap_err();
        assert_eq!(err, FvError::PathBudget { required: 4096, budget: 1000 });
        assert_eq!(path_pair_count(2, 13), 67_108_864);
        assert_eq!(path_pair_count(10, 40), u128::MAX);
    }

    #[test]
    fn zero_coupling_is_free_evolution() {
        let spec = BathSpec::single_mode(1.0, 1.0, 0.0, 2.0).unwrap();
        let grid = PathGrid::new(0.0, 1.0, 5).unwrap();
        let cf = discretize_action(&spec, &grid, 0.0).unwrap();
        let sys = SystemModel::spin_boson(1.0);
        let rho = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        let out = path_sum(&sys, &[cf], None, &rho, SumMode::Density, DEFAULT_PATH_BUDGET)
            .unwrap()
            .density()
            .unwrap();
        let u = linalg::unitary(sys.h_s(), 1.0);
        // without influence the split propagator telescopes to the exact one
        assert!(max_abs_diff(&out, &(&u * rho * u.adjoint())) < 1e-12);
    }
}
