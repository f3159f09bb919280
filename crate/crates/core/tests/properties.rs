use fvheat_core::bath::{check_shift_identities, kappa, pair_correlation, BathSpec, Branch, Mode};
use fvheat_core::cumulants::{self, Event, GroupingExpansion};
use fvheat_core::influence::{discretize_action, fv_weight, heat_gf_weight, higher_order_weight, HigherOrderKernels, PathGrid, PathPair};
use fvheat_core::linalg::{c, C64};
use fvheat_core::records::ResultRecord;
use fvheat_core::superop::{commutator_generator, propagate_ordered, DenseOp};
use fvheat_core::CMatrix;
use proptest::prelude::*;

fn mode() -> impl Strategy<Value = Mode> {
    (0.1f64..4.0, 0.2f64..3.0, -1.5f64..1.5).prop_map(|(w, m, cp)| Mode::new(w, m, cp))
}

fn bath() -> impl Strategy<Value = BathSpec> {
    (prop::collection::vec(mode(), 1..4), 0.1f64..10.0).prop_map(|(modes, beta)| BathSpec::new(modes, beta).unwrap())
}

fn branch() -> impl Strategy<Value = Branch> {
    prop_oneof![Just(Branch::Plus), Just(Branch::Minus)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_have_definite_parity(b in bath(), tau in -20.0f64..20.0) {
        let (r1, i1) = kappa(&b, tau);
        let (r2, i2) = kappa(&b, -tau);
        prop_assert!((r1 - r2).abs() <= 1e-12 * r1.abs().max(1.0));
        prop_assert!((i1 + i2).abs() <= 1e-12 * i1.abs().max(1.0));
    }

    #[test]
    fn anti_chronological_pair_is_conjugate(b in bath(), t1 in -5.0f64..5.0, t2 in -5.0f64..5.0, nu in -3.0f64..3.0) {
        let pp = pair_correlation(&b, Branch::Plus, Branch::Plus, t1, t2, nu);
        let mm = pair_correlation(&b, Branch::Minus, Branch::Minus, t1, t2, nu);
        prop_assert!((mm - pp.conj()).norm() <= 1e-12 * pp.norm().max(1.0));
    }

    #[test]
    fn unshifted_cross_pairs_swap(b in bath(), t1 in -5.0f64..5.0, t2 in -5.0f64..5.0) {
        let pm = pair_correlation(&b, Branch::Plus, Branch::Minus, t1, t2, 0.0);
        let mp = pair_correlation(&b, Branch::Minus, Branch::Plus, t2, t1, 0.0);
        let (kr, ki) = kappa(&b, t1 - t2);
        prop_assert!((pm - mp).norm() <= 1e-12 * pm.norm().max(1.0));
        prop_assert!((pm - C64::new(kr, ki)).norm() <= 1e-12 * pm.norm().max(1.0));
    }

    #[test]
    fn shift_identities_hold(w in 0.05f64..5.0, nu_abs in 0.01f64..3.0, neg in any::<bool>(), beta in 0.05f64..5.0) {
        let nu = if neg { -nu_abs } else { nu_abs };
        for r in check_shift_identities(w, nu, beta).unwrap() {
            prop_assert!(r < 1e-8, "residual {r} at ({w}, {nu}, {beta})");
        }
    }

    #[test]
    fn cumulants_and_groupings_are_inverse(re in prop::collection::vec(-1.0f64..1.0, 16), im in prop::collection::vec(-1.0f64..1.0, 16)) {
        // arbitrary moments indexed by subset bitmask of four events
        let moments: Vec<C64> = re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect();
        let moment = |mask: u32| if mask == 0 { c(1.0) } else { moments[mask as usize] };
        let kappas = cumulants::subset_cumulants(4, |m| Ok(moment(m))).unwrap();
        let expansion = GroupingExpansion::new(4, false).unwrap();
        let items = [0usize, 1, 2, 3];
        let back = expansion.reconstruct(&items, |block| {
            let mask = block.iter().fold(0u32, |m, &i| m | (1 << i));
            Ok(kappas[mask as usize])
        }).unwrap();
        prop_assert!((back - moment(15)).norm() < 1e-10);
    }

    #[test]
    fn fv_weight_bounded_and_conjugated_by_swap(
        b in bath(),
        q in prop::collection::vec(0usize..3, 5),
        qt in prop::collection::vec(0usize..3, 5),
        nu in -2.0f64..2.0,
    ) {
        let grid = PathGrid::new(0.0, 1.0, 5).unwrap();
        let cf = discretize_action(&b, &grid, nu).unwrap();
        let x = [-1.0, 0.25, 1.5];
        let min_eig = cf.noise_form_min_eigenvalue();
        prop_assert!(min_eig > -1e-12 * cf.eta_r.iter().fold(1.0f64, |m, v| m.max(v.abs())));
        let pair = PathPair::new(q, qt).unwrap();
        let w = fv_weight(&cf, &pair, &x).unwrap();
        prop_assert!(w.norm() <= 1.0 + 1e-12);
        let ws = fv_weight(&cf, &pair.swapped(), &x).unwrap();
        prop_assert!((ws - w.conj()).norm() < 1e-12);
        let diag = PathPair::new(pair.q.clone(), pair.q.clone()).unwrap();
        prop_assert_eq!(fv_weight(&cf, &diag, &x).unwrap(), c(1.0));
        let cf0 = discretize_action(&b, &grid, 0.0).unwrap();
        prop_assert_eq!(heat_gf_weight(&cf0, &pair, &x).unwrap(), fv_weight(&cf0, &pair, &x).unwrap());
    }

    #[test]
    fn zero_higher_order_kernels_give_unit_weight(q in prop::collection::vec(0usize..2, 6), qt in prop::collection::vec(0usize..2, 6)) {
        let grid = PathGrid::new(0.0, 0.6, 6).unwrap();
        let h = HigherOrderKernels::zeros(&grid, 4).unwrap();
        let pair = PathPair::new(q, qt).unwrap();
        prop_assert_eq!(higher_order_weight(&h, &pair, &[-1.0, 1.0]).unwrap(), c(1.0));
    }

    #[test]
    fn unitary_propagation_preserves_trace_and_hermiticity(
        v in prop::collection::vec(-1.0f64..1.0, 8),
        r in prop::collection::vec(-1.0f64..1.0, 4),
        steps in 1usize..6,
    ) {
        let vm = CMatrix::from_row_slice(2, 2, &[c(v[0]), C64::new(v[1], v[2]), C64::new(v[1], -v[2]), c(v[3])]);
        let gen = commutator_generator(&DenseOp::hermitian(vm).unwrap());
        let map = propagate_ordered(|t| gen.scale(c(1.0 + v[4] * t)), 0.0, 1.5, steps).unwrap();
        let p = 0.5 + 0.4 * r[0];
        let off = C64::new(0.2 * r[1], 0.2 * r[2]);
        let rho = CMatrix::from_row_slice(2, 2, &[c(p), off, off.conj(), c(1.0 - p)]);
        let out = map.apply(&rho).unwrap();
        prop_assert!((out.trace() - c(1.0)).norm() < 1e-10);
        prop_assert!((&out - out.adjoint()).iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn result_records_round_trip(
        kind in "[a-z]{1,10}",
        xs in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 0..6),
        tol in prop::option::of(1e-14f64..1.0),
        wall in prop::option::of(0.0f64..1e4),
    ) {
        let mut rec = ResultRecord::new(kind, serde_json::json!({ "xs": xs }), serde_json::json!({ "sum": xs.iter().sum::<f64>() }));
        rec.tolerance = tol;
        rec.wall_time = wall;
        let text = rec.to_json_pretty().unwrap();
        prop_assert_eq!(ResultRecord::from_json(&text).unwrap(), rec);
    }

    #[test]
    fn wick_reconstruct_rejects_odd_lengths(n in 1usize..4, t in prop::collection::vec(0.0f64..1.0, 7), d in prop::collection::vec(branch(), 7)) {
        let len = 2 * n - 1;
        let ev: Vec<Event> = d[..len].iter().zip(&t[..len]).map(|(&b, &x)| Event::new(b, x)).collect();
        prop_assert!(cumulants::wick_reconstruct(&ev, |_, _| Ok(c(1.0))).is_err());
    }
}

#[test]
fn shift_identity_sweep_of_one_hundred_triples() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let w = rng.random_range(0.05..5.0);
        let nu = rng.random_range(0.01..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let beta = rng.random_range(0.05..5.0);
        worst = check_shift_identities(w, nu, beta).unwrap().into_iter().fold(worst, f64::max);
    }
    assert!(worst < 1e-8, "{worst}");
    assert!(check_shift_identities(1.0, 0.0, 1.0).is_err());
}

#[test]
fn colder_baths_are_quieter() {
    let hot = BathSpec::single_mode(1.0, 1.0, 1.0, 1.0).unwrap();
    let cold = BathSpec::single_mode(1.0, 1.0, 1.0, 50.0).unwrap();
    assert!(kappa(&cold, 0.0).0 < kappa(&hot, 0.0).0);
    assert!(kappa(&cold, 0.0).0 >= 0.5);
}
