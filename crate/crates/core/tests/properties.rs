mod common;

use proptest::prelude::*;

use mhpinn::analysis::{covariance_eigenvalues, spearman, SpectrumReport};
use mhpinn::model::{assemble_solution, init_params, random_orthonormal, Arch, Checkpoint, IcFunction, InitialCondition};
use mhpinn::numerics::{matmul, Matrix, Rng};
use mhpinn::physics::{lambda_weight, ortho_penalty, ResidualWeighting};
use mhpinn::reference::{solve_fd, FdGrid};
use mhpinn::sampling::{log_spaced, sample_random_batch};
use mhpinn::training::{lr_at, TrainConfig};

fn matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = Rng::new(seed);
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ortho_penalty_matches_oracle_and_rank_bound(r in 1usize..6, c in 1usize..6, seed in any::<u64>()) {
        let w = matrix(r, c, seed);
        let p = ortho_penalty(&w);
        prop_assert!((p - common::ortho_oracle(&w)).abs() <= 1e-9 * (1.0 + p));
        // WᵀW or WWᵀ has at least |r - c| zero eigenvalues.
        prop_assert!(p >= r.abs_diff(c) as f64 - 1e-9);
    }

    #[test]
    fn orthonormal_square_has_zero_penalty(n in 1usize..8, seed in any::<u64>()) {
        let q = random_orthonormal(n, n, &mut Rng::new(seed));
        prop_assert!(ortho_penalty(&q) < 1e-24);
    }

    #[test]
    fn weighting_never_amplifies(s in -50.0f64..50.0, a in 0.0f64..5.0, b in 0.5f64..4.0) {
        let l = lambda_weight(s, ResidualWeighting { a, b });
        prop_assert!(l >= 1.0);
    }

    #[test]
    fn fourier_ics_vanish_at_edges(sin in prop::collection::vec(-1.0f64..1.0, 1..10), cos in prop::collection::vec(-1.0f64..1.0, 1..10)) {
        let ic = IcFunction::fourier(sin, cos);
        prop_assert!(ic.value(-5.0).abs() < 1e-12);
        prop_assert!(ic.value(5.0).abs() < 1e-12);
    }

    #[test]
    fn polynomial_ics_vanish_at_edges(c in prop::collection::vec(-2.0f64..2.0, 1..6)) {
        let ic = IcFunction::polynomial(c);
        prop_assert_eq!(ic.value(-5.0), 0.0);
        prop_assert_eq!(ic.value(5.0), 0.0);
    }

    #[test]
    fn solution_equals_ic_at_t0(seed in any::<u64>(), x in -5.0f64..5.0, lognu in -2.0f64..0.0) {
        let mut rng = Rng::new(seed);
        let p = init_params(Arch::new(2, 6, 3, 2), &mut rng).unwrap();
        let ic = IcFunction::fourier(vec![rng.normal(), rng.normal()], vec![rng.normal()]);
        let u = assemble_solution(&p, &ic, 1, x, 0.0, 10f64.powf(lognu)).unwrap();
        prop_assert_eq!(u.v, ic.value(x));
        prop_assert_eq!(u.vx, ic.eval(x).dv);
    }

    #[test]
    fn random_batches_stay_in_domain(seed in any::<u64>(), m in 1usize..200) {
        let b = sample_random_batch(m, &mut Rng::new(seed)).unwrap();
        prop_assert_eq!(b.len(), m);
        for [x, t, nu] in b.points {
            prop_assert!((-5.0..=5.0).contains(&x) && (0.0..=5.0).contains(&t) && (1e-2..=1.0).contains(&nu));
        }
    }

    #[test]
    fn log_spacing_is_monotone(lo in 1e-3f64..0.5, span in 1.01f64..100.0, n in 2usize..30) {
        let v = log_spaced(lo, lo * span, n);
        prop_assert_eq!(v[0], lo);
        prop_assert_eq!(v[n - 1], lo * span);
        prop_assert!(v.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn lr_never_increases_after_warmup(e in 1000u64..200_000, d in 1u64..5000) {
        let cfg = TrainConfig::default();
        prop_assert!(lr_at(e + d, &cfg) <= lr_at(e, &cfg));
        prop_assert!(lr_at(e, &cfg) <= cfg.base_lr);
    }

    #[test]
    fn checkpoint_round_trips(depth in 1usize..4, width in 1usize..6, n_b in 1usize..5, heads in 1usize..4, seed in any::<u64>()) {
        let p = init_params(Arch::new(depth, width, n_b, heads), &mut Rng::new(seed)).unwrap();
        let ck = Checkpoint::new(&p, seed, 7, None);
        let back = Checkpoint::from_json(&ck.to_json()).unwrap().params().unwrap();
        prop_assert_eq!(back.to_flat(), p.to_flat());
    }

    #[test]
    fn spectrum_invariant_under_rotation(k in 2usize..6, seed in any::<u64>()) {
        let z = matrix(60, k, seed);
        let q = random_orthonormal(k, k, &mut Rng::new(seed ^ 1));
        let a = covariance_eigenvalues(&z).unwrap();
        let b = covariance_eigenvalues(&matmul(&z, &q).unwrap()).unwrap();
        prop_assert!(common::max_abs_diff(&a, &b) < 1e-10);
        let oracle = common::bisection_eigenvalues(&common::naive_covariance(&z));
        prop_assert!(common::max_abs_diff(&a, &oracle) < 1e-9);
    }

    #[test]
    fn explained_ratios_form_a_distribution(ev in prop::collection::vec(0.0f64..10.0, 1..10)) {
        let r = SpectrumReport::from_eigenvalues(ev);
        if r.eigenvalues.iter().sum::<f64>() > 0.0 {
            prop_assert!((r.cumulative.last().unwrap() - 1.0).abs() < 1e-12);
            prop_assert!(r.rank_at(0.9) >= 1 && r.rank_at(0.9) <= r.ratios.len());
        }
        prop_assert!(r.ratios.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn spearman_is_bounded_and_symmetric(a in prop::collection::vec(-5.0f64..5.0, 3..12), seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let b: Vec<f64> = a.iter().map(|_| rng.normal()).collect();
        let s = spearman(&a, &b).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&s));
        prop_assert!((s - spearman(&b, &a).unwrap()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fd_solver_obeys_maximum_principle(sin in prop::collection::vec(-0.3f64..0.3, 1..4), nu in 0.05f64..1.0) {
        let ic = IcFunction::fourier(sin, vec![]);
        let grid = FdGrid::stable(129, 1.0, nu, 1.0, 5).unwrap();
        let snaps = solve_fd(&ic, &grid).unwrap();
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        let u0 = sup(&snaps[0].values);
        for s in &snaps {
            prop_assert!(sup(&s.values) <= u0 + 1e-9);
        }
    }
}
