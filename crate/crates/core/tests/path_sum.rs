use fvheat_core::influence::{
    self, discretize_action, fv_weight, heat_gf_weight, higher_order_weight, path_sum, HigherOrderKernels, PathGrid,
    PathPair, SumMode, DEFAULT_PATH_BUDGET,
};
use fvheat_core::linalg::{self, c, max_abs_diff, CMatrix, C64};
use fvheat_core::oracle::{FockPolicy, Oracle, SystemModel, TruncatedBath, DEFAULT_DIMENSION_CAP};
use fvheat_core::BathSpec;

fn up() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)])
}

fn weak_spec() -> BathSpec {
    BathSpec::single_mode(1.0, 1.0, 0.3, 2.0).unwrap()
}

fn oracle_for(spec: BathSpec, kerr: f64) -> (Oracle, TruncatedBath) {
    let bath = TruncatedBath::kerr(spec, kerr, FockPolicy::default()).unwrap();
    let o = Oracle::new(SystemModel::spin_boson(1.0), vec![bath.clone()], DEFAULT_DIMENSION_CAP).unwrap();
    (o, bath)
}

fn density(spec: &BathSpec, n: usize) -> CMatrix {
    let grid = PathGrid::new(0.0, 1.0, n).unwrap();
    let cf = discretize_action(spec, &grid, 0.0).unwrap();
    path_sum(&SystemModel::spin_boson(1.0), &[cf], None, &up(), SumMode::Density, DEFAULT_PATH_BUDGET)
        .unwrap()
        .density()
        .unwrap()
}

/// Explicit enumeration with the per-pair weight functions and matrix products.
fn brute_force(
    sys: &SystemModel,
    weight: impl Fn(&PathPair) -> C64,
    rho0: &CMatrix,
    grid: &PathGrid,
) -> CMatrix {
    let d = sys.dim();
    let n = grid.n_slices;
    let v = sys.x_eigenbasis();
    let h = v.adjoint() * sys.h_s() * v;
    let uh = linalg::unitary(&h, 0.5 * grid.dt());
    let uf = linalg::unitary(&h, grid.dt());
    let r = &uh * (v.adjoint() * rho0 * v) * uh.adjoint();
    let total = (d * d).pow(n as u32);
    let mut m = CMatrix::zeros(d, d);
    for idx in 0..total {
        let mut rest = idx;
        let mut q = vec![0; n];
        let mut qt = vec![0; n];
        for k in 0..n {
            q[k] = rest % d;
            rest /= d;
            qt[k] = rest % d;
            rest /= d;
        }
        let mut amp = r[(q[0], qt[0])];
        for k in 1..n {
            amp *= uf[(q[k], q[k - 1])] * uf[(qt[k], qt[k - 1])].conj();
        }
        let pair = PathPair::new(q.clone(), qt.clone()).unwrap();
        m[(q[n - 1], qt[n - 1])] += amp * weight(&pair);
    }
    v * (&uh * m * uh.adjoint()) * v.adjoint()
}

#[test]
fn path_sum_matches_explicit_enumeration() {
    let sys = SystemModel::spin_boson(1.0);
    let grid = PathGrid::new(0.0, 1.0, 4).unwrap();
    let spec = weak_spec();
    let cf = discretize_action(&spec, &grid, 0.0).unwrap();
    let x = sys.x_eigenvalues().to_vec();
    let expect = brute_force(&sys, |p| fv_weight(&cf, p, &x).unwrap(), &up(), &grid);
    let got = path_sum(&sys, std::slice::from_ref(&cf), None, &up(), SumMode::Density, DEFAULT_PATH_BUDGET)
        .unwrap()
        .density()
        .unwrap();
    assert!(max_abs_diff(&got, &expect) < 1e-13, "{}", max_abs_diff(&got, &expect));

    let (_, bath) = oracle_for(spec.clone(), 0.2);
    let h = HigherOrderKernels::from_bath(&bath, &grid, 4).unwrap();
    let cfk = discretize_action(&bath, &grid, 0.0).unwrap();
    let expect = brute_force(
        &sys,
        |p| fv_weight(&cfk, p, &x).unwrap() * higher_order_weight(&h, p, &x).unwrap(),
        &up(),
        &grid,
    );
    let got = path_sum(&sys, &[cfk], Some(&h), &up(), SumMode::Density, DEFAULT_PATH_BUDGET)
        .unwrap()
        .density()
        .unwrap();
    assert!(max_abs_diff(&got, &expect) < 1e-13);
}

#[test]
fn generating_function_matches_enumeration_and_trace() {
    let sys = SystemModel::spin_boson(1.0);
    let grid = PathGrid::new(0.0, 1.0, 4).unwrap();
    let spec = weak_spec();
    let x = sys.x_eigenvalues().to_vec();
    for nu in [0.0, 0.4, -1.1] {
        let cf = discretize_action(&spec, &grid, nu).unwrap();
        let m = brute_force(&sys, |p| heat_gf_weight(&cf, p, &x).unwrap(), &up(), &grid);
        let g = path_sum(&sys, &[cf], None, &up(), SumMode::Gf { counted: 0 }, DEFAULT_PATH_BUDGET)
            .unwrap()
            .gf()
            .unwrap();
        assert!((g - linalg::trace(&m)).norm() < 1e-13, "nu={nu}");
    }
    let cf = discretize_action(&spec, &grid, 0.0).unwrap();
    let g0 = path_sum(&sys, std::slice::from_ref(&cf), None, &up(), SumMode::Gf { counted: 0 }, DEFAULT_PATH_BUDGET)
        .unwrap()
        .gf()
        .unwrap();
    let rho = path_sum(&sys, &[cf], None, &up(), SumMode::Density, DEFAULT_PATH_BUDGET)
        .unwrap()
        .density()
        .unwrap();
    assert!((g0 - linalg::trace(&rho)).norm() < 1e-12);
}

#[test]
fn weak_coupling_converges_to_oracle() {
    let (oracle, _) = oracle_for(weak_spec(), 0.0);
    let exact = oracle.reduced_density(&up(), 0.0, 1.0, 1).unwrap();
    let e6 = max_abs_diff(&density(&weak_spec(), 6), &exact);
    let e12 = max_abs_diff(&density(&weak_spec(), 12), &exact);
    eprintln!("errors: 6 slices {e6:e}, 12 slices {e12:e}, ratio {}", e6 / e12);
    assert!(e6 < 5e-3);
    assert!(e6 / e12 >= 3.0);
}

#[test]
fn generating_function_tracks_oracle() {
    let (oracle, _) = oracle_for(weak_spec(), 0.0);
    let sys = SystemModel::spin_boson(1.0);
    for nu in [0.3, 1.0] {
        let exact = oracle.generating_function_exact(0, &up(), nu, 0.0, 1.0, 1).unwrap();
        let mut errs = Vec::new();
        for n in [6, 12] {
            let grid = PathGrid::new(0.0, 1.0, n).unwrap();
            let cf = discretize_action(&weak_spec(), &grid, nu).unwrap();
            let g = path_sum(&sys, &[cf], None, &up(), SumMode::Gf { counted: 0 }, DEFAULT_PATH_BUDGET)
                .unwrap()
                .gf()
                .unwrap();
            errs.push((g - exact).norm());
        }
        eprintln!("nu={nu}: {errs:?}");
        assert!(errs[0] < 1e-2 && errs[1] < errs[0]);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| density(&weak_spec(), 8))
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
}

#[test]
fn higher_orders_rejected_when_counting() {
    let grid = PathGrid::new(0.0, 1.0, 3).unwrap();
    let (_, bath) = oracle_for(weak_spec(), 0.2);
    let h = HigherOrderKernels::from_bath(&bath, &grid, 3).unwrap();
    let cf = discretize_action(&bath, &grid, 0.5).unwrap();
    let err = path_sum(&SystemModel::spin_boson(1.0), &[cf], Some(&h), &up(), SumMode::Gf { counted: 0 }, 1 << 20);
    assert!(matches!(err, Err(fvheat_core::FvError::Unsupported(_))));
    assert_eq!(influence::path_pair_count(2, 3), 64);
}
