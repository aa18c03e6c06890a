use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use smolkram_core::matx::{
    expm, lyapunov_by_quadrature, lyapunov_residual, min_sym_eig, solve_lyapunov, solve_sylvester,
    sylvester_by_quadrature, sylvester_residual,
};
use smolkram_core::Matrix;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::from_row_major(rows, cols, data).unwrap()
}

fn stable(b: &Matrix, margin: f64) -> Matrix {
    let shift = margin - min_sym_eig(b).unwrap();
    b + &Matrix::identity(b.rows()).scale(shift.max(0.0))
}

#[test]
fn quadrature_agrees_with_direct_solves() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for case in 0..50 {
        let d = 1 + case % 6;
        let gamma = stable(&random_matrix(&mut rng, d, d), rng.random_range(0.3..2.0));
        let c = random_matrix(&mut rng, d, d);
        let q = &c * &c.transpose();
        let direct = solve_lyapunov(&gamma, &q).unwrap();
        let quad = lyapunov_by_quadrature(&gamma, &q, 1e-10).unwrap();
        assert!((&direct - &quad).frobenius_norm() <= 1e-6, "case {case}");

        let a = -&stable(&random_matrix(&mut rng, d, d), 0.5);
        let b = stable(&random_matrix(&mut rng, d + 1, d + 1), 0.5);
        let c = random_matrix(&mut rng, d, d + 1);
        let direct = solve_sylvester(&a, &b, &c).unwrap();
        let quad = sylvester_by_quadrature(&a, &b, &c, 1e-10).unwrap();
        assert!((&direct - &quad).frobenius_norm() <= 1e-6, "case {case}");
    }
}

fn square(d: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, d * d).prop_map(move |v| Matrix::from_row_major(d, d, v).unwrap())
}

fn sized_pair() -> impl Strategy<Value = (Matrix, Matrix)> {
    (1usize..=5).prop_flat_map(|d| (square(d), square(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lyapunov_solution_is_symmetric_with_small_residual((b, c) in sized_pair(), margin in 0.2f64..3.0) {
        let gamma = stable(&b, margin);
        let q = &c * &c.transpose();
        let j = solve_lyapunov(&gamma, &q).unwrap();
        prop_assert_eq!(j.clone(), j.transpose());
        prop_assert!(lyapunov_residual(&gamma, &j, &q) <= 1e-10);
        // J is positive semi-definite for Q ⪰ 0.
        prop_assert!(min_sym_eig(&j).unwrap() >= -1e-10);
    }

    #[test]
    fn sylvester_residual_small((b, c) in sized_pair(), margin in 0.2f64..3.0) {
        let a = -&stable(&b, margin);
        let bb = stable(&b.transpose(), margin);
        let y = solve_sylvester(&a, &bb, &c).unwrap();
        prop_assert!(sylvester_residual(&a, &bb, &c, &y) <= 1e-10);
    }

    #[test]
    fn exponential_inverts((b, _) in sized_pair()) {
        let product = &expm(&b).unwrap() * &expm(&-&b).unwrap();
        prop_assert!((&product - &Matrix::identity(b.rows())).max_abs() <= 1e-10);
    }

    #[test]
    fn exponential_of_commuting_sum((b, _) in sized_pair(), s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let lhs = expm(&b.scale(s + t)).unwrap();
        let rhs = &expm(&b.scale(s)).unwrap() * &expm(&b.scale(t)).unwrap();
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-10 * lhs.max_abs().max(1.0));
    }
}
