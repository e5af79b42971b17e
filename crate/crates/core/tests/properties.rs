use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use zoro::estimators::{estimate_gradient, fdsa_gradient, opportunistic_estimate, spsa_gradient, OppConfig, OppState};
use zoro::problems::{make_max_k_squared_sum, make_sparse_quadratic, NoiseModel, Oracle, ProblemSpec};
use zoro::regularizers::Regularizer;
use zoro::rng;
use zoro::sensing::rademacher_directions;
use zoro::solver::{zoro_run, EstimatorKind, SolverConfig};
use zoro::sparse_recovery::{cosamp, top_k_indices, CosampConfig};

fn vector(d: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-10.0..10.0f64, d).prop_map(DVector::from_vec)
}

fn regularizers(d: usize) -> impl Strategy<Value = Regularizer> {
    prop_oneof![
        Just(Regularizer::Zero),
        Just(Regularizer::NonNeg),
        (0.0..3.0f64).prop_map(|l| Regularizer::L1 { lambda: l }),
        (vector(d), vector(d)).prop_map(|(a, b)| {
            let lower = a.zip_map(&b, f64::min);
            let upper = a.zip_map(&b, f64::max);
            Regularizer::Box { lower, upper }
        }),
    ]
}

/// `½(w − v)² + α·r(w)` for a scalar regularizer.
fn prox_objective(reg: &Regularizer, v: f64, alpha: f64, w: f64) -> f64 {
    let wv = DVector::from_element(1, w);
    0.5 * (w - v).powi(2) + alpha * reg.value(&wv)
}

proptest! {
    #[test]
    fn projections_are_idempotent((v, reg) in vector(6).prop_flat_map(|v| (Just(v), regularizers(6))), alpha in 0.01..5.0f64) {
        if matches!(reg, Regularizer::NonNeg | Regularizer::Box { .. }) {
            let once = reg.prox(&v, alpha).unwrap();
            let twice = reg.prox(&once, alpha).unwrap();
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn prox_is_nonexpansive(reg in regularizers(5), u in vector(5), v in vector(5), alpha in 0.01..5.0f64) {
        let pu = reg.prox(&u, alpha).unwrap();
        let pv = reg.prox(&v, alpha).unwrap();
        prop_assert!((pu - pv).norm() <= (&u - &v).norm() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn prox_beats_grid_search(reg in regularizers(1), v in -4.0..4.0f64, alpha in 0.05..2.0f64) {
        let w = reg.prox(&DVector::from_element(1, v), alpha).unwrap()[0];
        let at_prox = prox_objective(&reg, v, alpha, w);
        let best_grid = (0..=20_000)
            .map(|i| -10.0 + i as f64 * 1e-3)
            .map(|g| prox_objective(&reg, v, alpha, g))
            .fold(f64::INFINITY, f64::min);
        prop_assert!(at_prox <= best_grid + 1e-9);
    }

    #[test]
    fn cosamp_output_is_sparse_and_residual_consistent(
        seed in any::<u64>(),
        m in 4usize..30,
        d in 5usize..40,
        s in 1usize..6,
        y_seed in any::<u64>(),
    ) {
        let s = s.min(d);
        let z = rademacher_directions(m, d, seed).unwrap().matrix() / (m as f64).sqrt();
        let y = rng::gaussian_vector(&mut rng::stream(y_seed), m);
        let sol = cosamp(&z, &y, &CosampConfig::new(s)).unwrap();
        let nnz = sol.values.iter().filter(|v| **v != 0.0).count();
        prop_assert!(nnz <= s);
        prop_assert!(sol.support.len() <= s);
        for (i, v) in sol.values.iter().enumerate() {
            if *v != 0.0 {
                prop_assert!(sol.support.contains(&i));
            }
        }
        let recomputed = (&z * &sol.values - &y).norm();
        prop_assert!((recomputed - sol.residual_norm).abs() <= 1e-12);
        // Started from zero, accepted iterations never increase the residual.
        prop_assert!(sol.residual_norm <= y.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn top_k_matches_full_sort(v in prop::collection::vec(-5i32..5, 1..30), k in 0usize..30) {
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        let k = k.min(v.len());
        let picked = top_k_indices(&v, k);
        prop_assert_eq!(picked.len(), k);
        let threshold = picked.iter().map(|&i| v[i].abs()).fold(f64::INFINITY, f64::min);
        for i in 0..v.len() {
            if !picked.contains(&i) {
                prop_assert!(v[i].abs() <= threshold);
            }
        }
    }

    #[test]
    fn estimators_are_finite_and_account_exactly(seed in any::<u64>(), sigma in prop_oneof![Just(0.0), 1e-6..1e-2f64]) {
        let d = 40;
        let p = make_sparse_quadratic(d, 4, seed).unwrap();
        let noise = if sigma == 0.0 { NoiseModel::none() } else { NoiseModel::uniform(sigma, seed) };
        let x = rng::random_unit_vector(&mut rng::stream(seed), d);
        let dirs = rademacher_directions(25, d, seed ^ 1).unwrap();
        let mut oracle = Oracle::new(&p, &noise).unwrap();

        let before = oracle.queries();
        let est = estimate_gradient(&mut oracle, &x, 4, 1e-3, &dirs).unwrap();
        prop_assert_eq!(est.queries_used, oracle.queries() - before);
        prop_assert_eq!(est.g_hat.len(), d);
        prop_assert!(est.g_hat.iter().all(|v| v.is_finite()));
        prop_assert!(est.support.len() <= 4);

        let support = if est.support.is_empty() { vec![0] } else { est.support.clone() };
        let state = OppState::new(dirs, support, seed).unwrap();
        let before = oracle.queries();
        let (opp, next) = opportunistic_estimate(&mut oracle, &x, state, 1e-3, &OppConfig::default()).unwrap();
        prop_assert_eq!(opp.queries_used, oracle.queries() - before);
        prop_assert!(opp.queries_used <= d as u64 + 1);
        prop_assert!(opp.support.len() <= opp.sparsity);
        prop_assert!(opp.g_hat.iter().all(|v| v.is_finite()));
        prop_assert_eq!(next.m_current, next.dirs.m());
        prop_assert!(next.s_current >= 1);

        let before = oracle.queries();
        let f = fdsa_gradient(&mut oracle, &x, 1e-3).unwrap();
        prop_assert_eq!(f.queries_used, oracle.queries() - before);
        prop_assert_eq!(f.queries_used, d as u64 + 1);

        let before = oracle.queries();
        let sp = spsa_gradient(&mut oracle, &x, 1e-3, 3, &mut rng::stream(seed)).unwrap();
        prop_assert_eq!(sp.queries_used, oracle.queries() - before);
        prop_assert_eq!(sp.queries_used, 6);
        prop_assert!(sp.g_hat.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn solver_trace_invariants(seed in 0u64..1000, kind in 0usize..4, k in 1usize..15) {
        let d = 30;
        let base = make_max_k_squared_sum(d, 3).unwrap();
        let calls = Arc::new(AtomicU64::new(0));
        let counter = calls.clone();
        let inner = base.clone();
        let p = ProblemSpec::new("counted", d, base.lipschitz(), move |x| {
            counter.fetch_add(1, Ordering::Relaxed);
            inner.exact_value(x)
        })
        .unwrap()
        .with_hessian_bound(base.hessian_l1_bound())
        .unwrap();
        let estimator = [
            EstimatorKind::Fixed,
            EstimatorKind::Opportunistic,
            EstimatorKind::Fdsa,
            EstimatorKind::Spsa { batch: 2 },
        ][kind];
        let cfg = SolverConfig::new(3).with_max_iterations(k).with_estimator(estimator).with_seed(seed);
        let x0 = rng::gaussian_vector(&mut rng::stream(seed), d);
        let out = zoro_run(&p, &NoiseModel::uniform(1e-4, seed), &Regularizer::NonNeg, &x0, &cfg).unwrap();
        let r = &out.trace.records;
        prop_assert!(r.len() <= k + 1);
        for w in r.windows(2) {
            prop_assert!(w[1].queries > w[0].queries);
        }
        // Every record reads the exact objective once; everything else is a query.
        let last = r.last().unwrap();
        prop_assert_eq!(calls.load(Ordering::Relaxed), last.queries + r.len() as u64);
        for rec in r.iter().skip(1) {
            prop_assert!(rec.step_norm.is_finite());
        }
        prop_assert!(out.x.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn sparse_synthetics_never_expose_gradients_to_the_solver() {
    let p = make_sparse_quadratic(60, 6, 3).unwrap();
    let cfg = SolverConfig::new(6).with_max_iterations(20);
    zoro_run(&p, &NoiseModel::none(), &Regularizer::Zero, &DVector::from_element(60, 1.0), &cfg).unwrap();
    assert_eq!(p.true_gradient_calls(), 0);
}

#[test]
fn brute_force_restricted_ls_agrees_with_normal_equations() {
    let z = rademacher_directions(15, 8, 4).unwrap().matrix().clone();
    let y = rng::gaussian_vector(&mut rng::stream(2), 15);
    let support = [1, 3, 6];
    let v = zoro::sparse_recovery::restricted_least_squares(&z, &y, &support).unwrap();
    let zs = DMatrix::from_fn(15, 3, |i, j| z[(i, support[j])]);
    let coeffs = (zs.transpose() * &zs).lu().solve(&(zs.transpose() * &y)).unwrap();
    for (j, &i) in support.iter().enumerate() {
        assert!((v[i] - coeffs[j]).abs() <= 1e-10);
    }
}
