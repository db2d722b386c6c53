use circsketch_core::learner::{extract_factors, fast_apply};
use circsketch_core::rubik::{rubik_score_exact, rubik_score_greedy, GreedyConfig};
use circsketch_core::{
    circ_apply, circ_apply_adjoint, circ_to_dense, rotate_left, rotate_right, DenseMatrix,
    Generator,
};
use proptest::prelude::*;

fn vec_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n)
}

fn matrix(max_m: usize, max_n: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_n)
        .prop_flat_map(move |n| (1..=max_m.min(n), Just(n)))
        .prop_flat_map(|(m, n)| {
            vec_of(m * n).prop_map(move |d| DenseMatrix::from_vec(m, n, d).unwrap())
        })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

proptest! {
    #[test]
    fn rotations_invert(v in prop::collection::vec(-1.0f64..1.0, 1..40), s in 0usize..40) {
        let s = s % v.len();
        prop_assert_eq!(rotate_left(&rotate_right(&v, s).unwrap(), s).unwrap(), v);
    }

    #[test]
    fn circulant_apply_is_dense_product((c, x) in (1usize..48).prop_flat_map(|n| (vec_of(n), vec_of(n)))) {
        let g = Generator::new(c).unwrap();
        let fast = circ_apply(&g, &x).unwrap();
        let slow = circ_to_dense(&g).matvec(&x).unwrap();
        let tol = 1e-10 * (g.norm() * norm(&x)).max(1.0);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() <= tol);
        }
    }

    #[test]
    fn adjoint_identity((c, x, y) in (1usize..48).prop_flat_map(|n| (vec_of(n), vec_of(n), vec_of(n)))) {
        let g = Generator::new(c).unwrap();
        let lhs = dot(&circ_apply(&g, &x).unwrap(), &y);
        let rhs = dot(&x, &circ_apply_adjoint(&g, &y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (g.norm() * norm(&x) * norm(&y)).max(1.0));
    }

    #[test]
    fn score_is_bounded_and_greedy_never_beats_exact(a in matrix(3, 7)) {
        let total = a.frobenius_norm_sq();
        let exact = rubik_score_exact(&a, 1_000_000).unwrap();
        let greedy = rubik_score_greedy(&a, &GreedyConfig::default()).unwrap();
        let tol = 1e-9 * total.max(1.0);
        prop_assert!(exact.error >= -tol && exact.error <= total + tol);
        prop_assert!(exact.score * exact.score <= total + tol);
        prop_assert!(greedy.error >= exact.error - tol);
    }

    #[test]
    fn score_ignores_row_order_and_common_rotation(a in matrix(3, 7), s in 0usize..7) {
        let (m, n) = a.shape();
        let s = s % n;
        let rotated = DenseMatrix::from_rows(
            &(0..m).rev().map(|i| rotate_right(a.row(i), s).unwrap()).collect::<Vec<_>>(),
        )
        .unwrap();
        let e0 = rubik_score_exact(&a, 1_000_000).unwrap().error;
        let e1 = rubik_score_exact(&rotated, 1_000_000).unwrap().error;
        prop_assert!((e0 - e1).abs() <= 1e-9 * a.frobenius_norm_sq().max(1.0));
    }

    #[test]
    fn factored_apply_is_dense_product(mm in matrix(4, 12), seed in 0u64..1000) {
        prop_assume!(mm.frobenius_norm() > 0.0);
        let n = mm.cols();
        let mut r = circsketch_core::rng::seeded(seed);
        let g = Generator::new(circsketch_core::rng::gaussian_vec(&mut r, n)).unwrap();
        let x = circsketch_core::rng::gaussian_vec(&mut r, n);
        let cf = extract_factors(&mm, 0.0).unwrap();
        let fast = fast_apply(&cf, &g, &x).unwrap();
        let slow = mm.matmul(&circ_to_dense(&g)).unwrap().matvec(&x).unwrap();
        let tol = 1e-10 * (mm.frobenius_norm() * g.norm() * norm(&x)).max(1.0);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).abs() <= tol);
        }
    }
}
