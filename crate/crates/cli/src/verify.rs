//! The `verify` suite: kernel identities, correlator properties of the
//! truncated baths, cumulant algebra, and agreement between the two engines.
//!
//! Everything here is seeded and free of wall-clock data, so `verify.json` is
//! reproducible byte for byte.

use fvheat_core::bath::{build_kernel_table, check_shift_identities, kappa, pair_correlation, Branch};
use fvheat_core::cumulants::{self, events, AmplitudeSet3, CorrelatorSource};
use fvheat_core::linalg::{self, c, hermitian_deviation, max_abs_diff, CMatrix, C64};
use fvheat_core::oracle::{DiagonalBath, TruncatedBath, LEAKAGE_LIMIT};
use fvheat_core::records::ResultRecord;
use fvheat_core::FvError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::Scenario;
use crate::engines;
use crate::output;
use crate::CliResult;

pub const KERNEL_PARITY_TOL: f64 = 1e-12;
pub const SHIFT_IDENTITY_TOL: f64 = 1e-8;
pub const SHIFT_THEOREM_TOL: f64 = 1e-7;
pub const G3_TOL: f64 = 1e-8;
pub const G4_TOL: f64 = 1e-7;
pub const WICK_TOL: f64 = 1e-7;
pub const ROUND_TRIP_TOL: f64 = 1e-9;
pub const SYMBOL_FLIP_TOL: f64 = 1e-9;
pub const DUAL_ROUTE_TOL: f64 = 1e-9;
pub const COLLAPSE_TOL: f64 = 1e-10;
pub const ORACLE_G0_TOL: f64 = 1e-12;
pub const PATH_G0_TOL: f64 = 1e-8;
pub const HERMITICITY_TOL: f64 = 1e-9;
pub const CONJUGATE_TOL: f64 = 1e-10;
pub const FIRST_MOMENT_REL_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Default)]
pub struct Suite {
    pub checks: Vec<Check>,
}

impl Suite {
    fn measure(&mut self, name: impl Into<String>, residual: f64, tolerance: f64) {
        let status = if residual <= tolerance { Status::Pass } else { Status::Fail };
        self.checks.push(Check {
            name: name.into(),
            status,
            residual: Some(residual),
            tolerance: Some(tolerance),
            note: None,
        });
    }

    fn exact(&mut self, name: impl Into<String>, ok: bool, note: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            residual: None,
            tolerance: None,
            note: Some(note.into()),
        });
    }

    fn fail(&mut self, name: impl Into<String>, note: impl Into<String>, residual: Option<f64>) {
        self.checks.push(Check {
            name: name.into(),
            status: Status::Fail,
            residual,
            tolerance: None,
            note: Some(note.into()),
        });
    }

    fn skip(&mut self, name: impl Into<String>, note: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            status: Status::Skipped,
            residual: None,
            tolerance: None,
            note: Some(note.into()),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail).collect()
    }
}

fn branches(rng: &mut ChaCha8Rng, n: usize) -> Vec<Branch> {
    (0..n).map(|_| if rng.random::<bool>() { Branch::Plus } else { Branch::Minus }).collect()
}

fn times(rng: &mut ChaCha8Rng, n: usize, t_max: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.0..t_max)).collect()
}

/// Random four-level bath with nonzero odd cumulants, centered so `⟨Y⟩ = 0`.
pub fn generic_test_bath(rng: &mut ChaCha8Rng) -> DiagonalBath {
    let n = 4;
    let mut h = CMatrix::zeros(n, n);
    let mut y = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            for m in [&mut h, &mut y] {
                let z = C64::new(rng.random_range(-1.0..1.0), if i == j { 0.0 } else { rng.random_range(-1.0..1.0) });
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
    }
    DiagonalBath::from_hamiltonian(&h, &y, 0.7)
        .expect("random Hermitian input")
        .centered()
}

fn max_norm(xs: impl IntoIterator<Item = C64>) -> f64 {
    xs.into_iter().fold(0.0, |m, z| m.max(z.norm()))
}

fn static_checks(s: &mut Suite, scn: &Scenario, rng: &mut ChaCha8Rng) {
    let rows = cumulants::sign_matrix_row_sums();
    s.exact(
        "sign_matrix_row_sums",
        rows == cumulants::SIGN_MATRIX_ROW_SUMS,
        format!("{rows:?}"),
    );

    let mut synthetic = true;
    let ones = cumulants::amplitudes4(|_| Ok(c(1.0)), 4.0, 3.0, 2.0, 1.0).expect("ordered");
    synthetic &= ones.values[7] == c(8.0) && ones.values[0] == c(0.0);
    let first = cumulants::amplitudes4(|t| Ok(if t == [4.0, 3.0, 2.0, 1.0] { c(1.0) } else { c(0.0) }), 4.0, 3.0, 2.0, 1.0)
        .expect("ordered");
    synthetic &= first.values.iter().all(|&v| v == c(1.0));
    let a3 = AmplitudeSet3::from_traces([c(1.0), c(0.0), c(0.0), c(0.0)]);
    synthetic &= [a3.a, a3.b, a3.c, a3.d].iter().all(|&v| v == c(1.0));
    let zero = cumulants::amplitudes4(|_| Ok(c(0.0)), 4.0, 3.0, 2.0, 1.0).expect("ordered");
    synthetic &= zero.max_abs() == 0.0;
    s.exact("synthetic_amplitude_inputs", synthetic, "exact comparisons");

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let w = rng.random_range(0.05..5.0);
        let nu = rng.random_range(0.01..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let beta = rng.random_range(0.05..5.0);
        match check_shift_identities(w, nu, beta) {
            Ok(r) => worst = r.into_iter().fold(worst, f64::max),
            Err(_) => worst = f64::INFINITY,
        }
    }
    s.measure("shift_identity_sweep_100", worst, SHIFT_IDENTITY_TOL);

    let tau_max = scn.grid.t_f - scn.grid.t_i;
    let nu = scn.nus.iter().copied().find(|&v| v != 0.0).unwrap_or(0.5);
    for (b, spec) in scn.baths.iter().enumerate() {
        let t0 = build_kernel_table(spec, tau_max, scn.kernel_samples, 0.0).expect("valid grid");
        let n = t0.len();
        let scale = t0.kappa_r.iter().chain(&t0.kappa_i).fold(1.0f64, |m, v| m.max(v.abs()));
        let mut parity = 0.0f64;
        let mut collapse = 0.0f64;
        for j in 0..n {
            parity = parity
                .max((t0.kappa_r[j] - t0.kappa_r[n - 1 - j]).abs() / scale)
                .max((t0.kappa_i[j] + t0.kappa_i[n - 1 - j]).abs() / scale);
            collapse = collapse.max((t0.shifted_plus[j] - C64::new(t0.kappa_r[j], t0.kappa_i[j])).norm());
        }
        let zero_ok = n % 2 == 0 || t0.kappa_i[n / 2] == 0.0;
        s.measure(format!("bath{b}.kernel_parity"), if zero_ok { parity } else { f64::INFINITY }, KERNEL_PARITY_TOL);
        s.measure(format!("bath{b}.kernel_zero_shift_collapse"), collapse, 0.0);

        let tn = build_kernel_table(spec, tau_max, scn.kernel_samples, nu).expect("valid grid");
        let mirror = (0..n)
            .map(|j| (tn.shifted_minus[j] - tn.shifted_plus[n - 1 - j]).norm())
            .fold(0.0, f64::max);
        s.measure(format!("bath{b}.kernel_shift_mirror"), mirror / scale, KERNEL_PARITY_TOL);

        let mut conj = 0.0f64;
        for _ in 0..20 {
            let (t1, t2, v) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-2.0..2.0));
            let pp = pair_correlation(spec, Branch::Plus, Branch::Plus, t1, t2, v);
            let mm = pair_correlation(spec, Branch::Minus, Branch::Minus, t1, t2, v);
            conj = conj.max((mm - pp.conj()).norm());
        }
        s.measure(format!("bath{b}.pair_minus_minus_is_conjugate"), conj, KERNEL_PARITY_TOL);

        let (kr_hot, _) = kappa(&fvheat_core::BathSpec { beta: 1.0, ..spec.clone() }, 0.0);
        let (kr_cold, _) = kappa(&fvheat_core::BathSpec { beta: 50.0, ..spec.clone() }, 0.0);
        s.exact(
            format!("bath{b}.noise_decreases_when_colder"),
            kr_cold < kr_hot || spec.modes.iter().all(|m| m.coupling == 0.0),
            format!("kappa_r(0): beta=1 {kr_hot:.6e}, beta=50 {kr_cold:.6e}"),
        );
    }

    let generic = generic_test_bath(rng);
    dual_route(s, "generic_test_bath", &generic);
}

fn dual_route(s: &mut Suite, label: &str, b: &DiagonalBath) {
    let src = b.source(0.0);
    let (t3, t4) = ((1.3, 0.6, 0.2), (1.4, 0.9, 0.5, 0.1));
    let r = (|| -> fvheat_core::Result<(f64, f64)> {
        let a = cumulants::amplitudes3(b, t3.0, t3.1, t3.2)?;
        let g = cumulants::amplitudes3_from_cumulants(&src, t3.0, t3.1, t3.2)?;
        let d3 = max_norm([a.a - g.a, a.b - g.b, a.c - g.c, a.d - g.d]);
        let a4 = cumulants::amplitudes4(|x| cumulants::operator_cumulant(b, &x), t4.0, t4.1, t4.2, t4.3)?;
        let g4 = cumulants::amplitudes4_from_cumulants(&src, t4.0, t4.1, t4.2, t4.3)?;
        let d4 = max_norm(a4.values.iter().zip(&g4.values).map(|(x, y)| x - y));
        Ok((d3, d4))
    })();
    match r {
        Ok((d3, d4)) => {
            s.measure(format!("{label}.amplitudes3_dual_route"), d3, DUAL_ROUTE_TOL);
            s.measure(format!("{label}.amplitudes4_dual_route"), d4, DUAL_ROUTE_TOL);
        }
        Err(e) => s.fail(format!("{label}.amplitudes_dual_route"), e.to_string(), None),
    }
}

fn bath_checks(s: &mut Suite, scn: &Scenario, b: usize, tb: &TruncatedBath, rng: &mut ChaCha8Rng) {
    let d = tb.diagonal();
    let t_max = 3.0;
    let harmonic = tb.kerr_lambda() == 0.0;
    let src0 = d.source(0.0);
    let run = |f: &mut dyn FnMut() -> fvheat_core::Result<f64>| f().unwrap_or(f64::INFINITY);

    if harmonic {
        let mut worst = 0.0f64;
        let r = run(&mut || {
            for _ in 0..20 {
                let (t1, t2, nu) = (rng.random_range(0.0..t_max), rng.random_range(0.0..t_max), rng.random_range(-2.0..2.0));
                let got = d.multitime_correlator(&[Branch::Plus, Branch::Minus], &[t1, t2], nu)?.value;
                let expect = pair_correlation(&scn.baths[b], Branch::Plus, Branch::Minus, t1, t2, nu);
                worst = worst.max((got - expect).norm());
            }
            Ok(worst)
        });
        s.measure(format!("bath{b}.shifted_cross_correlator"), r, SHIFT_THEOREM_TOL);

        let (mut g3, mut g4, mut wick) = (0.0f64, 0.0f64, 0.0f64);
        let ok = (|| -> fvheat_core::Result<()> {
            for _ in 0..20 {
                let nu = rng.random_range(-1.0..1.0);
                let (d3, t3) = (branches(rng, 3), times(rng, 3, t_max));
                g3 = g3.max(d.cumulant(&d3, &t3, nu)?.value.norm());
                let (d4, t4) = (branches(rng, 4), times(rng, 4, t_max));
                g4 = g4.max(d.cumulant(&d4, &t4, nu)?.value.norm());
                let full = d.multitime_correlator(&d4, &t4, nu)?.value;
                wick = wick.max((full - d.wick_reconstruct(&d4, &t4, nu)?).norm());
            }
            Ok(())
        })();
        if ok.is_err() {
            g3 = f64::INFINITY;
        }
        s.measure(format!("bath{b}.wick_g3_vanishes"), g3, G3_TOL);
        s.measure(format!("bath{b}.wick_g4_vanishes"), g4, G4_TOL);
        s.measure(format!("bath{b}.wick_four_point"), wick, WICK_TOL);
    } else {
        let mut largest = 0.0f64;
        for _ in 0..20 {
            let (d4, t4) = (branches(rng, 4), times(rng, 4, t_max));
            if let Ok(g) = d.cumulant(&d4, &t4, 0.0) {
                largest = largest.max(g.value.norm());
            }
        }
        let note = format!("anharmonic bath, nonzero cumulants expected (max |G4| = {largest:.3e})");
        s.skip(format!("bath{b}.shifted_cross_correlator"), "harmonic kernels do not apply to an anharmonic bath");
        s.skip(format!("bath{b}.wick_g3_vanishes"), note.clone());
        s.skip(format!("bath{b}.wick_g4_vanishes"), note.clone());
        s.skip(format!("bath{b}.wick_four_point"), note);
    }

    let mut worst = 0.0f64;
    let r = run(&mut || {
        for _ in 0..10 {
            let nu = rng.random_range(-1.0..1.0);
            let ev = events(&branches(rng, 4), &times(rng, 4, t_max))?;
            let src = d.source(nu);
            let moment = src.correlator(&ev)?;
            let back = cumulants::grouping_reconstruct(&ev, |sub| cumulants::cumulants_from_correlators(&src, sub), false)?;
            worst = worst.max((moment - back).norm() / moment.norm().max(1.0));
        }
        Ok(worst)
    });
    s.measure(format!("bath{b}.cumulant_round_trip"), r, ROUND_TRIP_TOL);

    let mut worst = 0.0f64;
    let r = run(&mut || {
        for n in 2..=4 {
            for _ in 0..10 {
                let mut br = branches(rng, n);
                let t = times(rng, n, t_max);
                let imax = (0..n).max_by(|&i, &j| t[i].total_cmp(&t[j])).expect("n >= 2");
                let a = src0.correlator(&events(&br, &t)?)?;
                br[imax] = br[imax].flip();
                let f = src0.correlator(&events(&br, &t)?)?;
                worst = worst.max((a - f).norm());
            }
        }
        Ok(worst)
    });
    s.measure(format!("bath{b}.largest_time_symbol_independence"), r, SYMBOL_FLIP_TOL);

    dual_route(s, &format!("bath{b}"), d);
}

fn engine_checks(s: &mut Suite, scn: &Scenario, truncated: Vec<TruncatedBath>) -> CliResult<()> {
    let oracle = match engines::oracle(scn, truncated.clone()) {
        Ok(o) => o,
        Err(e) => {
            s.fail("oracle_construction", e.to_string(), None);
            return Ok(());
        }
    };
    let mut nus = vec![0.0];
    for &v in &scn.nus {
        if v != 0.0 {
            nus.push(v);
            nus.push(-v);
        }
    }
    let g = engines::oracle_gf(scn, &oracle, &nus)?;
    s.measure("oracle_gf_at_zero_is_one", (g[0] - c(1.0)).norm(), ORACLE_G0_TOL);
    let conj = (1..nus.len()).step_by(2).map(|k| (g[k] - g[k + 1].conj()).norm()).fold(0.0, f64::max);
    s.measure("oracle_gf_reflection_is_conjugate", conj, CONJUGATE_TOL);

    let h = scn.fd_step;
    let gd = engines::oracle_gf(scn, &oracle, &[h, -h, 2.0 * h, -2.0 * h])?;
    let fd = fvheat_core::oracle::richardson_log_derivative(gd[0], gd[1], gd[2], gd[3], h);
    let direct = oracle.heat_first_moment(scn.counted, &scn.rho0, scn.grid.t_i, scn.grid.t_f, scn.oracle_steps())?;
    let rel = (fd - c(direct)).norm() / direct.abs().max(1e-300);
    s.measure("first_moment_of_heat", rel, FIRST_MOMENT_REL_TOL);

    if scn.budget == 0 {
        for name in ["path_gf_zero_equals_trace", "path_gf_zero_equals_oracle", "path_density_hermitian", "engine_equivalence"] {
            s.skip(name, "path budget is 0");
        }
        return Ok(());
    }
    let coeffs = engines::coefficients(scn, Some(&truncated), 0.0)?;
    for (b, cf) in coeffs.iter().enumerate() {
        let scale = cf.eta_r.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
        s.measure(format!("bath{b}.noise_form_positive"), (-cf.noise_form_min_eigenvalue() / scale).max(0.0), 1e-12);
    }
    let kernels = engines::higher_order(scn, scn.order, &truncated)?;
    let rho2 = engines::path_density(scn, &coeffs, None)?;
    let rho = match &kernels {
        Some(k) => engines::path_density(scn, &coeffs, Some(k))?,
        None => rho2.clone(),
    };
    let g0 = fvheat_core::influence::path_sum(
        &scn.system,
        &coeffs,
        None,
        &scn.rho0,
        fvheat_core::SumMode::Gf { counted: scn.counted },
        scn.budget,
    )?
    .gf()
    .expect("gf mode");
    s.measure("path_gf_zero_equals_trace", (g0 - linalg::trace(&rho2)).norm(), COLLAPSE_TOL);
    s.measure("path_gf_zero_equals_oracle", (g0 - g[0]).norm(), PATH_G0_TOL);
    s.measure("path_density_hermitian", hermitian_deviation(&rho), HERMITICITY_TOL);
    let exact = engines::oracle_density(scn, &oracle)?;
    s.measure("engine_equivalence", max_abs_diff(&rho, &exact), scn.tolerance);
    Ok(())
}

pub fn run_suite(scn: &Scenario) -> CliResult<Suite> {
    if scn.budget > 0 {
        engines::check_budget(scn)?;
    }
    let mut s = Suite::default();
    let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);
    static_checks(&mut s, scn, &mut rng);

    let mut truncated = Vec::new();
    for b in 0..scn.baths.len() {
        match engines::truncated_bath(scn, b) {
            Ok(tb) => {
                let top = tb.top_population().iter().copied().fold(0.0, f64::max);
                s.measure(format!("bath{b}.fock_leakage"), top, LEAKAGE_LIMIT);
                bath_checks(&mut s, scn, b, &tb, &mut rng);
                truncated.push(tb);
            }
            Err(e @ FvError::FockLeakage { population, .. }) => {
                s.fail(format!("bath{b}.fock_leakage"), e.to_string(), Some(population));
            }
            Err(e) => s.fail(format!("bath{b}.truncation"), e.to_string(), None),
        }
    }
    if truncated.len() == scn.baths.len() {
        engine_checks(&mut s, scn, truncated)?;
    } else {
        s.skip("engine_checks", "a bath truncation was rejected");
    }
    Ok(s)
}

pub fn print_table(s: &Suite) {
    println!("{:<8} {:<48} {:>12} {:>10}  note", "status", "check", "residual", "tolerance");
    for ch in &s.checks {
        let status = match ch.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        let fmt = |x: Option<f64>| x.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
        println!(
            "{:<8} {:<48} {:>12} {:>10}  {}",
            status,
            ch.name,
            fmt(ch.residual),
            fmt(ch.tolerance),
            ch.note.as_deref().unwrap_or("")
        );
    }
}

/// Runs the suite, prints the table and writes `verify.json`. Returns whether
/// every check passed.
pub fn verify(scn: &Scenario) -> CliResult<Suite> {
    let suite = run_suite(scn)?;
    print_table(&suite);
    let dir = output::out_dir(scn)?;
    let rec = ResultRecord::new(
        "verify",
        output::parameters(scn),
        json!({ "all_passed": suite.all_passed(), "checks": suite.checks }),
    );
    output::write_record(&dir, "verify.json", &rec)?;
    Ok(suite)
}
