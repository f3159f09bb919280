//! Time-ordered cumulants of bath correlators and the amplitude combinations
//! that enter the third- and fourth-order influence action.
//!
//! Two kinds of correlator sources are used:
//!
//! * [`CorrelatorSource`] evaluates branch-labelled correlators
//!   `⟨T 𝒴^{d_1}(t_1) ⋯ 𝒴^{d_n}(t_n)⟩`, where `+` operators sit left of ρ in
//!   chronological order and `−` operators right of ρ in anti-chronological order.
//! * [`OperatorCorrelator`] evaluates plain traces `tr[Y(l_1)⋯Y(l_k) ρ Y(r_1)⋯]`
//!   with the operators placed exactly as given.
//!
//! Cumulants are defined through the usual moment-cumulant relation over set
//! partitions; for operator-ordered moments the blocks keep the operator order.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::bath::Branch;
use crate::error::{FvError, Result};
use crate::linalg::{c, C64};

pub const MAX_CUMULANT_ORDER: usize = 4;
pub const MAX_GROUPING_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub branch: Branch,
    pub time: f64,
}

impl Event {
    pub fn new(branch: Branch, time: f64) -> Self {
        Event { branch, time }
    }

    pub fn plus(time: f64) -> Self {
        Event::new(Branch::Plus, time)
    }

    pub fn minus(time: f64) -> Self {
        Event::new(Branch::Minus, time)
    }
}

pub fn events(branches: &[Branch], times: &[f64]) -> Result<Vec<Event>> {
    if branches.len() != times.len() {
        return Err(FvError::DimensionMismatch {
            expected: branches.len(),
            got: times.len(),
        });
    }
    Ok(branches.iter().zip(times).map(|(&b, &t)| Event::new(b, t)).collect())
}

pub trait CorrelatorSource {
    /// Branch-labelled correlator of the given events (order of the slice is
    /// irrelevant). The empty product is 1.
    fn correlator(&self, events: &[Event]) -> Result<C64>;

    /// Counting shift applied to the `+` branch.
    fn nu(&self) -> f64 {
        0.0
    }
}

/// Adapts a closure into a [`CorrelatorSource`]; used for synthetic data.
pub struct FnCorrelator<F>(pub F);

impl<F> CorrelatorSource for FnCorrelator<F>
where
    F: Fn(&[Event]) -> Result<C64>,
{
    fn correlator(&self, events: &[Event]) -> Result<C64> {
        if events.is_empty() {
            return Ok(c(1.0));
        }
        (self.0)(events)
    }
}

pub trait OperatorCorrelator {
    /// `tr[Y(left_1) ⋯ Y(left_k) ρ Y(right_1) ⋯ Y(right_m)]`.
    fn ordered_trace(&self, left: &[f64], right: &[f64]) -> C64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTensor {
    pub branches: Vec<Branch>,
    pub times: Vec<f64>,
    pub nu: f64,
    pub value: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantTensor {
    pub branches: Vec<Branch>,
    pub times: Vec<f64>,
    pub nu: f64,
    pub value: C64,
}

impl CorrelationTensor {
    pub fn order(&self) -> usize {
        self.times.len()
    }
}

impl CumulantTensor {
    pub fn order(&self) -> usize {
        self.times.len()
    }
}

/// Cumulants of every subset of `n` items, indexed by bitmask, from the
/// corresponding moments. `moment` is called once per non-empty mask.
///
/// Uses `m(S) = Σ_{T ∋ min S, T ⊆ S} κ(T) m(S∖T)` solved for `κ(S)`.
pub fn subset_cumulants(n: usize, mut moment: impl FnMut(u32) -> Result<C64>) -> Result<Vec<C64>> {
    if n > MAX_GROUPING_ORDER {
        return Err(FvError::UnsupportedOrder(n));
    }
    let size = 1usize << n;
    let mut m = vec![c(1.0); size];
    for mask in 1..size {
        m[mask] = moment(mask as u32)?;
    }
    let mut k = vec![c(0.0); size];
    for mask in 1..size {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut acc = m[mask];
        // proper subsets T of `mask` containing `low`: T = low | r, r ⊊ rest
        let mut r = rest;
        while r != 0 {
            r = (r - 1) & rest;
            let t = low | r;
            acc -= k[t] * m[mask ^ t];
        }
        k[mask] = acc;
    }
    Ok(k)
}

pub fn cumulant_from_moments(n: usize, moment: impl FnMut(u32) -> Result<C64>) -> Result<C64> {
    if n == 0 {
        return Err(FvError::InvalidArgument("cumulant of an empty set".into()));
    }
    Ok(subset_cumulants(n, moment)?[(1usize << n) - 1])
}

fn select<T: Copy>(items: &[T], mask: u32) -> Vec<T> {
    items
        .iter()
        .enumerate()
        .filter(|(j, _)| mask & (1 << j) != 0)
        .map(|(_, &x)| x)
        .collect()
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 || n > MAX_CUMULANT_ORDER {
        return Err(FvError::UnsupportedOrder(n));
    }
    Ok(())
}

/// Branch-labelled cumulant `G_n^{d_1…d_n}(t_1,…,t_n)`, including the
/// subtraction of first-order terms.
pub fn cumulants_from_correlators<S: CorrelatorSource + ?Sized>(source: &S, events: &[Event]) -> Result<C64> {
    check_order(events.len())?;
    cumulant_from_moments(events.len(), |mask| source.correlator(&select(events, mask)))
}

pub fn cumulant<S: CorrelatorSource + ?Sized>(
    source: &S,
    branches: &[Branch],
    times: &[f64],
) -> Result<CumulantTensor> {
    let ev = events(branches, times)?;
    let value = cumulants_from_correlators(source, &ev)?;
    Ok(CumulantTensor {
        branches: branches.to_vec(),
        times: times.to_vec(),
        nu: source.nu(),
        value,
    })
}

/// Ordinary cumulant of the operator product `Y(t_1) ⋯ Y(t_n)` (operators
/// kept in the given order, all left of ρ).
pub fn operator_cumulant<O: OperatorCorrelator + ?Sized>(ops: &O, times: &[f64]) -> Result<C64> {
    check_order(times.len())?;
    cumulant_from_moments(times.len(), |mask| Ok(ops.ordered_trace(&select(times, mask), &[])))
}

/// All set partitions of `{0, …, n−1}`, blocks in increasing order of their
/// smallest element.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            rec(i + 1, n, cur, out);
            cur[b].pop();
        }
        cur.push(vec![i]);
        rec(i + 1, n, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(0, n, &mut Vec::new(), &mut out);
    }
    out
}

/// Number of groupings of `N = Σ j n_j` times into `n_j` blocks of size `j`:
/// `N! / Π_j (n_j! (j!)^{n_j})`.
pub fn grouping_count(block_sizes: &[usize]) -> u64 {
    let fact = |k: usize| (1..=k as u64).product::<u64>();
    let n: usize = block_sizes.iter().sum();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &s in block_sizes {
        *counts.entry(s).or_default() += 1;
    }
    let denom: u64 = counts
        .iter()
        .map(|(&j, &nj)| fact(nj) * fact(j).pow(nj as u32))
        .product();
    fact(n) / denom
}

/// The set partitions entering the reconstruction of an order-`N` correlator.
#[derive(Debug, Clone)]
pub struct GroupingExpansion {
    pub order: usize,
    pub partitions: Vec<Vec<Vec<usize>>>,
    pub singletons_dropped: bool,
}

impl GroupingExpansion {
    /// With `g1_zero`, partitions containing a one-element block are omitted.
    pub fn new(order: usize, g1_zero: bool) -> Result<Self> {
        if order == 0 || order > MAX_GROUPING_ORDER {
            return Err(FvError::UnsupportedOrder(order));
        }
        let partitions = set_partitions(order)
            .into_iter()
            .filter(|p| !g1_zero || p.iter().all(|b| b.len() > 1))
            .collect();
        Ok(GroupingExpansion {
            order,
            partitions,
            singletons_dropped: g1_zero,
        })
    }

    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    /// Partition counts keyed by sorted block-size multiset.
    pub fn class_counts(&self) -> BTreeMap<Vec<usize>, u64> {
        let mut out = BTreeMap::new();
        for p in &self.partitions {
            let mut sizes: Vec<usize> = p.iter().map(Vec::len).collect();
            sizes.sort_unstable();
            *out.entry(sizes).or_default() += 1;
        }
        out
    }

    /// `Σ_partitions Π_blocks κ(block)`.
    pub fn reconstruct<T: Copy>(&self, items: &[T], cumulant: impl Fn(&[T]) -> Result<C64>) -> Result<C64> {
        if items.len() != self.order {
            return Err(FvError::DimensionMismatch {
                expected: self.order,
                got: items.len(),
            });
        }
        let mut total = c(0.0);
        for p in &self.partitions {
            let mut term = c(1.0);
            for block in p {
                let sub: Vec<T> = block.iter().map(|&j| items[j]).collect();
                term *= cumulant(&sub)?;
            }
            total += term;
        }
        Ok(total)
    }
}

/// Rebuilds a correlator from its cumulants over all groupings of the events.
pub fn grouping_reconstruct(
    events: &[Event],
    cumulant: impl Fn(&[Event]) -> Result<C64>,
    g1_zero: bool,
) -> Result<C64> {
    GroupingExpansion::new(events.len(), g1_zero)?.reconstruct(events, cumulant)
}

/// Sum over all perfect matchings of the events of products of pair correlators.
pub fn wick_reconstruct(events: &[Event], pair: impl Fn(Event, Event) -> Result<C64>) -> Result<C64> {
    if events.is_empty() || events.len() % 2 == 1 {
        return Err(FvError::InvalidArgument(format!(
            "Wick reconstruction needs a positive even number of events, got {}",
            events.len()
        )));
    }
    fn rec(rest: &[Event], pair: &dyn Fn(Event, Event) -> Result<C64>) -> Result<C64> {
        if rest.is_empty() {
            return Ok(c(1.0));
        }
        let first = rest[0];
        let mut total = c(0.0);
        for j in 1..rest.len() {
            let mut remaining: Vec<Event> = rest[1..].to_vec();
            let partner = remaining.remove(j - 1);
            total += pair(first, partner)? * rec(&remaining, pair)?;
        }
        Ok(total)
    }
    rec(events, &pair)
}

fn check_descending(times: &[f64]) -> Result<()> {
    if times.windows(2).all(|w| w[0] > w[1]) {
        Ok(())
    } else {
        Err(FvError::UnorderedTimes(times.to_vec()))
    }
}

/// `A' = tr[Y(s)(Y(u)ρ − ρY(u))]` and `B' = tr[Y(s)(Y(u)ρ + ρY(u))]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSet2 {
    pub a_prime: C64,
    pub b_prime: C64,
}

pub fn amplitudes2<O: OperatorCorrelator + ?Sized>(ops: &O, s: f64, u: f64) -> Result<AmplitudeSet2> {
    check_descending(&[s, u])?;
    let t1 = ops.ordered_trace(&[s, u], &[]);
    let t2 = ops.ordered_trace(&[s], &[u]);
    Ok(AmplitudeSet2 {
        a_prime: t1 - t2,
        b_prime: t1 + t2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSet3 {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl AmplitudeSet3 {
    pub const ZERO: AmplitudeSet3 = AmplitudeSet3 {
        a: C64::new(0.0, 0.0),
        b: C64::new(0.0, 0.0),
        c: C64::new(0.0, 0.0),
        d: C64::new(0.0, 0.0),
    };

    /// From the four traces `T1 = tr[Y(s)Y(u)Y(v)ρ]`, `T2 = tr[Y(s)Y(u)ρY(v)]`,
    /// `T3 = tr[Y(s)Y(v)ρY(u)]`, `T4 = tr[Y(s)ρY(v)Y(u)]`.
    pub fn from_traces(t: [C64; 4]) -> Self {
        let [t1, t2, t3, t4] = t;
        AmplitudeSet3 {
            a: t1 - t2 - t3 + t4,
            b: t1 + t2 - t3 - t4,
            c: t1 - t2 + t3 - t4,
            d: t1 + t2 + t3 + t4,
        }
    }

    /// Coefficient multiplying `ζ_p(u) ζ_q(v)`.
    pub fn get(&self, p: Branch, q: Branch) -> C64 {
        match (p, q) {
            (Branch::Plus, Branch::Plus) => self.a,
            (Branch::Plus, Branch::Minus) => self.b,
            (Branch::Minus, Branch::Plus) => self.c,
            (Branch::Minus, Branch::Minus) => self.d,
        }
    }

    pub fn max_abs(&self) -> f64 {
        [self.a, self.b, self.c, self.d].iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// Third-order amplitudes from plain operator traces. Requires `s > u > v`.
///
/// Valid when the first cumulant vanishes, so that third moments equal third
/// cumulants.
pub fn amplitudes3<O: OperatorCorrelator + ?Sized>(ops: &O, s: f64, u: f64, v: f64) -> Result<AmplitudeSet3> {
    check_descending(&[s, u, v])?;
    Ok(AmplitudeSet3::from_traces([
        ops.ordered_trace(&[s, u, v], &[]),
        ops.ordered_trace(&[s, u], &[v]),
        ops.ordered_trace(&[s, v], &[u]),
        ops.ordered_trace(&[s], &[v, u]),
    ]))
}

/// `s(d, p)`: the sign picked up by `x^d = (s(d,+) ζ_+ + s(d,−) ζ_−) / 2`
/// with `x^+ = Q`, `x^− = −Q̃`.
fn zeta_sign(d: Branch, p: Branch) -> f64 {
    match (d, p) {
        (Branch::Minus, Branch::Plus) => -1.0,
        _ => 1.0,
    }
}

/// Third-order amplitudes from branch-labelled cumulants
/// `Σ_{d_2 d_3} s(d_2,p) s(d_3,q) G_3^{+ d_2 d_3}(s,u,v)`.
pub fn amplitudes3_from_cumulants<S: CorrelatorSource + ?Sized>(
    src: &S,
    s: f64,
    u: f64,
    v: f64,
) -> Result<AmplitudeSet3> {
    check_descending(&[s, u, v])?;
    let mut g = BTreeMap::new();
    for d2 in Branch::BOTH {
        for d3 in Branch::BOTH {
            let ev = [Event::plus(s), Event::new(d2, u), Event::new(d3, v)];
            g.insert((d2, d3), cumulants_from_correlators(src, &ev)?);
        }
    }
    let amp = |p, q| {
        g.iter()
            .map(|(&(d2, d3), &val)| val * (zeta_sign(d2, p) * zeta_sign(d3, q)))
            .sum::<C64>()
    };
    use Branch::{Minus as M, Plus as P};
    Ok(AmplitudeSet3 {
        a: amp(P, P),
        b: amp(P, M),
        c: amp(M, P),
        d: amp(M, M),
    })
}

/// Row labels `(p, q, r)` of the fourth-order sign table.
pub const AMPLITUDE4_LABELS: [[Branch; 3]; 8] = {
    use Branch::{Minus as M, Plus as P};
    [
        [P, P, P],
        [P, P, M],
        [P, M, P],
        [M, P, P],
        [P, M, M],
        [M, P, M],
        [M, M, P],
        [M, M, M],
    ]
};

/// Argument orders of the eight permuted fourth cumulants, as indices into
/// `(s, u, v, w)`.
pub const G4_PERMUTATIONS: [[usize; 4]; 8] = [
    [0, 1, 2, 3], // (s,u,v,w)
    [3, 2, 1, 0], // (w,v,u,s)
    [3, 0, 1, 2], // (w,s,u,v)
    [2, 0, 1, 3], // (v,s,u,w)
    [1, 0, 2, 3], // (u,s,v,w)
    [2, 1, 0, 3], // (v,u,s,w)
    [3, 1, 0, 2], // (w,u,s,v)
    [3, 2, 0, 1], // (w,v,s,u)
];

/// Signs of the permuted fourth cumulants in each amplitude `A_pqr`.
pub const SIGN_MATRIX: [[i8; 8]; 8] = [
    [1, -1, -1, -1, -1, 1, 1, 1],
    [1, 1, 1, -1, -1, 1, -1, -1],
    [1, 1, -1, 1, -1, -1, 1, -1],
    [1, 1, -1, -1, 1, -1, -1, 1],
    [1, -1, 1, 1, -1, -1, -1, 1],
    [1, -1, 1, -1, 1, -1, 1, -1],
    [1, -1, -1, 1, 1, 1, -1, -1],
    [1, 1, 1, 1, 1, 1, 1, 1],
];

pub const SIGN_MATRIX_ROW_SUMS: [i32; 8] = [0, 0, 0, 0, 0, 0, 0, 8];

pub fn sign_matrix_row_sums() -> [i32; 8] {
    let mut out = [0; 8];
    for (o, row) in out.iter_mut().zip(SIGN_MATRIX.iter()) {
        *o = row.iter().map(|&x| x as i32).sum();
    }
    out
}

/// Checks the row sums of [`SIGN_MATRIX`] once per process.
pub fn assert_sign_matrix() {
    static CHECKED: OnceLock<()> = OnceLock::new();
    CHECKED.get_or_init(|| {
        assert_eq!(sign_matrix_row_sums(), SIGN_MATRIX_ROW_SUMS, "fourth-order sign table is corrupted");
    });
}

fn label_index(p: Branch, q: Branch, r: Branch) -> usize {
    AMPLITUDE4_LABELS
        .iter()
        .position(|l| *l == [p, q, r])
        .expect("all eight labels present")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSet4 {
    /// Indexed like [`AMPLITUDE4_LABELS`].
    pub values: [C64; 8],
}

impl AmplitudeSet4 {
    pub const ZERO: AmplitudeSet4 = AmplitudeSet4 {
        values: [C64::new(0.0, 0.0); 8],
    };

    /// Applies the sign table to the eight permuted cumulants, given in the
    /// order of [`G4_PERMUTATIONS`].
    pub fn from_permuted(g: [C64; 8]) -> Self {
        assert_sign_matrix();
        let mut values = [c(0.0); 8];
        for (v, row) in values.iter_mut().zip(SIGN_MATRIX.iter()) {
            *v = row.iter().zip(&g).map(|(&sg, &x)| x * sg as f64).sum();
        }
        AmplitudeSet4 { values }
    }

    /// Coefficient multiplying `ζ_p(u) ζ_q(v) ζ_r(w)`.
    pub fn get(&self, p: Branch, q: Branch, r: Branch) -> C64 {
        self.values[label_index(p, q, r)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// Fourth-order amplitudes from an operator-ordered fourth cumulant
/// `g4(t_1, t_2, t_3, t_4)`. Requires `s > u > v > w`.
pub fn amplitudes4(g4: impl Fn([f64; 4]) -> Result<C64>, s: f64, u: f64, v: f64, w: f64) -> Result<AmplitudeSet4> {
    check_descending(&[s, u, v, w])?;
    let t = [s, u, v, w];
    let mut g = [c(0.0); 8];
    for (gk, perm) in g.iter_mut().zip(G4_PERMUTATIONS.iter()) {
        *gk = g4([t[perm[0]], t[perm[1]], t[perm[2]], t[perm[3]]])?;
    }
    Ok(AmplitudeSet4::from_permuted(g))
}

/// Fourth-order amplitudes from branch-labelled cumulants
/// `Σ_d s(d_2,p) s(d_3,q) s(d_4,r) G_4^{+ d_2 d_3 d_4}(s,u,v,w)`.
pub fn amplitudes4_from_cumulants<S: CorrelatorSource + ?Sized>(
    src: &S,
    s: f64,
    u: f64,
    v: f64,
    w: f64,
) -> Result<AmplitudeSet4> {
    check_descending(&[s, u, v, w])?;
    let mut g = Vec::with_capacity(8);
    for d2 in Branch::BOTH {
        for d3 in Branch::BOTH {
            for d4 in Branch::BOTH {
                let ev = [Event::plus(s), Event::new(d2, u), Event::new(d3, v), Event::new(d4, w)];
                g.push(([d2, d3, d4], cumulants_from_correlators(src, &ev)?));
            }
        }
    }
    let mut values = [c(0.0); 8];
    for (val, label) in values.iter_mut().zip(AMPLITUDE4_LABELS.iter()) {
        *val = g
            .iter()
            .map(|(d, x)| x * (zeta_sign(d[0], label[0]) * zeta_sign(d[1], label[1]) * zeta_sign(d[2], label[2])))
            .sum();
    }
    Ok(AmplitudeSet4 { values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn second_order_with_zero_mean_is_the_correlator() {
        let src = FnCorrelator(|ev: &[Event]| {
            Ok(match ev.len() {
                1 => c(0.0),
                2 => C64::new(0.3, -0.1),
                _ => unreachable!(),
            })
        });
        let g = cumulants_from_correlators(&src, &[Event::plus(1.0), Event::minus(0.5)]).unwrap();
        assert_eq!(g, C64::new(0.3, -0.1));
    }

    #[test]
    fn first_moments_are_subtracted() {
        // m1 = a, m2 = b  =>  κ2 = b − a²
        let src = FnCorrelator(|ev: &[Event]| Ok(if ev.len() == 1 { c(2.0) } else { c(5.0) }));
        let g = cumulants_from_correlators(&src, &[Event::plus(1.0), Event::plus(0.0)]).unwrap();
        assert_eq!(g, c(1.0));
    }

    #[test]
    fn constant_third_moment_only() {
        let src = FnCorrelator(|ev: &[Event]| Ok(if ev.len() == 3 { c(1.0) } else { c(0.0) }));
        let ev = [Event::plus(0.3), Event::minus(0.2), Event::plus(0.1)];
        assert_eq!(cumulants_from_correlators(&src, &ev).unwrap(), c(1.0));
    }

    #[test]
    fn gaussian_fourth_cumulant_vanishes() {
        // pair function symmetric in its arguments; four-point moment by Wick
        let pair = |a: Event, b: Event| Ok(C64::new((a.time - b.time).cos(), 0.2 * (a.time + b.time).sin()));
        let src = FnCorrelator(move |ev: &[Event]| match ev.len() {
            1 | 3 => Ok(c(0.0)),
            2 => pair(ev[0], ev[1]),
            4 => wick_reconstruct(ev, pair),
            _ => unreachable!(),
        });
        let ev = [Event::plus(0.9), Event::minus(0.7), Event::plus(0.4), Event::minus(0.1)];
        let g = cumulants_from_correlators(&src, &ev).unwrap();
        assert!(g.norm() < 1e-14);
    }

    #[test]
    fn rejects_unsupported_orders() {
        let src = FnCorrelator(|_: &[Event]| Ok(c(1.0)));
        let ev = vec![Event::plus(0.0); 5];
        assert_eq!(
            cumulants_from_correlators(&src, &ev),
            Err(FvError::UnsupportedOrder(5))
        );
        assert!(cumulants_from_correlators(&src, &[]).is_err());
    }

    #[test]
    fn missing_correlator_propagates() {
        let src = FnCorrelator(|ev: &[Event]| {
            if ev.len() == 2 {
                Err(FvError::MissingCorrelator("pair".into()))
            } else {
                Ok(c(0.0))
            }
        });
        let ev = [Event::plus(0.3), Event::minus(0.2), Event::plus(0.1)];
        assert!(matches!(
            cumulants_from_correlators(&src, &ev),
            Err(FvError::MissingCorrelator(_))
        ));
    }

    #[test]
    fn partition_counts() {
        let bell = [1, 1, 2, 5, 15, 52, 203];
        for (n, &b) in bell.iter().enumerate().skip(1) {
            assert_eq!(set_partitions(n).len(), b);
        }
        assert_eq!(GroupingExpansion::new(4, true).unwrap().len(), 4);
        assert_eq!(GroupingExpansion::new(3, true).unwrap().len(), 1);
        assert!(GroupingExpansion::new(7, false).is_err());
    }

    #[test]
    fn class_counts_follow_formula() {
        for n in 1..=6 {
            let g = GroupingExpansion::new(n, false).unwrap();
            for (sizes, count) in g.class_counts() {
                assert_eq!(count, grouping_count(&sizes), "n={n} sizes={sizes:?}");
            }
        }
        assert_eq!(grouping_count(&[2, 2]), 3);
        assert_eq!(grouping_count(&[2, 2, 2]), 15);
        assert_eq!(grouping_count(&[1, 1, 2]), 6);
    }

    #[test]
    fn pairs_only_gives_three_pairings() {
        let ev = [Event::plus(4.0), Event::plus(3.0), Event::minus(2.0), Event::minus(1.0)];
        let kappa = |b: &[Event]| {
            Ok(if b.len() == 2 {
                c(b[0].time * 10.0 + b[1].time)
            } else {
                c(0.0)
            })
        };
        let r = grouping_reconstruct(&ev, kappa, true).unwrap();
        // (43)(21) + (42)(31) + (41)(32)
        let expected = 43.0 * 21.0 + 42.0 * 31.0 + 41.0 * 32.0;
        assert_eq!(r, c(expected));
    }

    #[test]
    fn wick_counts_and_errors() {
        let ev: Vec<Event> = (0..6).map(|j| Event::plus(j as f64)).collect();
        let n = wick_reconstruct(&ev, |_, _| Ok(c(1.0))).unwrap();
        assert_eq!(n, c(15.0));
        assert_eq!(wick_reconstruct(&ev[..2], |_, _| Ok(c(0.7))).unwrap(), c(0.7));
        assert!(wick_reconstruct(&ev[..3], |_, _| Ok(c(1.0))).is_err());
    }

    #[test]
    fn sign_matrix_rows() {
        assert_eq!(sign_matrix_row_sums(), SIGN_MATRIX_ROW_SUMS);
        assert!(SIGN_MATRIX.iter().all(|r| r[0] == 1));
        assert!(SIGN_MATRIX[7].iter().all(|&x| x == 1));
    }

    #[test]
    fn synthetic_fourth_order_inputs() {
        let all_ones = AmplitudeSet4::from_permuted([c(1.0); 8]);
        assert_eq!(all_ones.get(Branch::Minus, Branch::Minus, Branch::Minus), c(8.0));
        assert_eq!(all_ones.get(Branch::Plus, Branch::Plus, Branch::Plus), c(0.0));
        let mut first = [c(0.0); 8];
        first[0] = c(1.0);
        let ind = AmplitudeSet4::from_permuted(first);
        assert!(ind.values.iter().all(|&v| v == c(1.0)));
        assert_eq!(AmplitudeSet4::from_permuted([c(0.0); 8]), AmplitudeSet4::ZERO);
    }

    #[test]
    fn synthetic_third_order_inputs() {
        let a = AmplitudeSet3::from_traces([c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert_eq!(a, AmplitudeSet3 { a: c(1.0), b: c(1.0), c: c(1.0), d: c(1.0) });
        let z = AmplitudeSet3::from_traces([c(0.0); 4]);
        assert_eq!(z, AmplitudeSet3::ZERO);
    }

    #[test]
    fn amplitudes_reject_unordered_times() {
        let g4 = |_: [f64; 4]| Ok(c(0.0));
        assert!(matches!(amplitudes4(g4, 0.1, 0.2, 0.3, 0.4), Err(FvError::UnorderedTimes(_))));
        struct Zero;
        impl OperatorCorrelator for Zero {
            fn ordered_trace(&self, _: &[f64], _: &[f64]) -> C64 {
                c(0.0)
            }
        }
        assert!(amplitudes3(&Zero, 0.3, 0.3, 0.1).is_err());
        assert!(amplitudes2(&Zero, 0.1, 0.2).is_err());
    }

    #[test]
    fn permutation_table_covers_the_branch_orderings() {
        // each permutation lists right-of-ρ operators in increasing time,
        // then left-of-ρ operators in decreasing time, with s always on the left
        for perm in G4_PERMUTATIONS {
            let s_pos = perm.iter().position(|&x| x == 0).unwrap();
            let (right, left) = perm.split_at(s_pos);
            assert!(right.windows(2).all(|w| w[0] > w[1]));
            assert!(left.windows(2).all(|w| w[0] < w[1]));
        }
        let mut seen: Vec<_> = G4_PERMUTATIONS.to_vec();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 8);
    }

    #[test]
    fn zero_cumulants_give_zero_amplitudes() {
        let src = FnCorrelator(|_: &[Event]| Ok(c(0.0)));
        let a3 = amplitudes3_from_cumulants(&src, 0.3, 0.2, 0.1).unwrap();
        let a4 = amplitudes4_from_cumulants(&src, 0.4, 0.3, 0.2, 0.1).unwrap();
        assert_eq!(a3.max_abs(), 0.0);
        assert_eq!(a4.max_abs(), 0.0);
        assert!(close(a3.a, c(0.0), 0.0));
    }
}
