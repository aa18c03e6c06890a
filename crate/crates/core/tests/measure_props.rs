use proptest::prelude::*;
use smolkram_core::measure::{min_cost_assignment, wasserstein2_1d, wasserstein2_assignment};
use smolkram_core::EmpiricalMeasure;

fn brute_force(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
    fn rec(k: usize, perm: &mut [usize], mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, best: &mut f64) {
        if k == perm.len() {
            let cost: f64 = (0..perm.len())
                .map(|i| mu.sample(i).iter().zip(nu.sample(perm[i])).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .sum();
            *best = best.min(cost / perm.len() as f64);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            rec(k + 1, perm, mu, nu, best);
            perm.swap(k, i);
        }
    }
    let mut perm: Vec<usize> = (0..mu.len()).collect();
    let mut best = f64::INFINITY;
    rec(0, &mut perm, mu, nu, &mut best);
    best.sqrt()
}

fn clouds() -> impl Strategy<Value = (EmpiricalMeasure, EmpiricalMeasure)> {
    (1usize..=6, 1usize..=3).prop_flat_map(|(n, d)| {
        let side = move || prop::collection::vec(-5.0f64..5.0, n * d).prop_map(move |v| EmpiricalMeasure::new(d, v).unwrap());
        (side(), side())
    })
}

fn line_clouds() -> impl Strategy<Value = (EmpiricalMeasure, EmpiricalMeasure)> {
    (1usize..=40).prop_flat_map(|n| {
        let side = move || prop::collection::vec(-5.0f64..5.0, n).prop_map(|v| EmpiricalMeasure::new(1, v).unwrap());
        (side(), side())
    })
}

proptest! {
    #[test]
    fn assignment_matches_brute_force((mu, nu) in clouds()) {
        let w = wasserstein2_assignment(&mu, &nu).unwrap();
        prop_assert!((w - brute_force(&mu, &nu)).abs() <= 1e-12);
    }

    #[test]
    fn one_dimensional_fast_path((mu, nu) in line_clouds()) {
        let fast = wasserstein2_1d(&mu, &nu).unwrap();
        let exact = wasserstein2_assignment(&mu, &nu).unwrap();
        prop_assert!((fast - exact).abs() <= 1e-12);
    }

    #[test]
    fn metric_properties((mu, nu) in clouds()) {
        prop_assert_eq!(wasserstein2_assignment(&mu, &mu).unwrap(), 0.0);
        let ab = wasserstein2_assignment(&mu, &nu).unwrap();
        let ba = wasserstein2_assignment(&nu, &mu).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12);
    }

    #[test]
    fn translation_moves_by_shift_length((mu, _) in clouds(), shift in -3.0f64..3.0) {
        let d = mu.dim();
        let moved: Vec<f64> = mu.as_flat().iter().map(|v| v + shift).collect();
        let nu = EmpiricalMeasure::new(d, moved).unwrap();
        let w = wasserstein2_assignment(&mu, &nu).unwrap();
        prop_assert!((w - shift.abs() * (d as f64).sqrt()).abs() <= 1e-9);
    }

    #[test]
    fn assignment_is_a_permutation(n in 1usize..8, cost in prop::collection::vec(0.0f64..10.0, 64)) {
        let assignment = min_cost_assignment(n, &cost[..n * n]);
        let mut seen = assignment.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
    }
}
