use smolkram_core::exper::{run_convergence, ConvergenceConfig};
use smolkram_core::model::{model_library, ModelSpec};
use smolkram_core::sim::{
    diagnostics_velocity, mean_and_stderr, simulate_coupled, step_full_em, step_full_exponential,
    step_limit_em, CoupledConfig, FullEnsemble, LimitEnsemble, LimitOptions, NoiseDriver, StepControl,
    Stepper, VelocityConfig,
};
use smolkram_core::SystemModel;

fn ou() -> Box<dyn SystemModel> {
    model_library(&ModelSpec::new("constant").with("gamma", 2.0).with("sigma", 1.0).with("K", 1.0)).unwrap()
}

/// Positions of one particle on the coarse grid `t = jΔ`, j = 0..=windows.
fn full_path(
    model: &dyn SystemModel,
    stepper: Stepper,
    eps: f64,
    coarse: f64,
    per_window: usize,
    windows: usize,
    x0: f64,
    replica: u64,
    seed: u64,
) -> Vec<f64> {
    let fast = coarse / per_window as f64;
    let ctl = StepControl::default();
    let mut ens = FullEnsemble::new(eps, 1, &[x0], &[0.0]).unwrap();
    let mut noise = NoiseDriver::new(seed, replica, 1, 1, coarse, per_window).unwrap();
    let mut out = vec![x0];
    for _ in 0..windows {
        let w = noise.next_window();
        for s in 0..per_window {
            match stepper {
                Stepper::ExplicitEm => step_full_em(&mut ens, model, fast, w.fast(s), &ctl).unwrap(),
                Stepper::Exponential => step_full_exponential(&mut ens, model, fast, w.fast(s), &ctl).unwrap(),
            }
        }
        out.push(ens.x[0]);
    }
    out
}

#[test]
fn ou_velocity_reaches_stationary_variance() {
    let model = ou();
    let eps = 0.05;
    let kappa = 100.0;
    let cfg = VelocityConfig {
        eps,
        t_end: 1.0,
        fast_step: eps / kappa,
        sample_step: 1.0,
        particles: 1,
        x0: vec![0.0],
        v0: vec![0.0],
        stepper: Stepper::ExplicitEm,
        control: StepControl {
            kappa,
            ..StepControl::default()
        },
    };
    let diag = diagnostics_velocity(model.as_ref(), &cfg, 500, 21).unwrap();
    // The sample grid is {0, T}; at t = 0 the energy is zero, so this is ε E|v_T|².
    assert_eq!(diag.mean_e_v2_time, 1.0);
    assert!((diag.mean_e_v2 - 0.25).abs() <= 3.0 * diag.mean_e_v2_stderr, "{diag:?}");
}

#[test]
fn exponential_matches_fine_explicit_in_law() {
    let model = ou();
    let eps = 0.05;
    let replicas = 500;
    let terminal = |stepper, per_window, seed| -> Vec<f64> {
        (0..replicas)
            .map(|r| *full_path(model.as_ref(), stepper, eps, 0.01, per_window, 100, 1.0, r, seed).last().unwrap())
            .collect()
    };
    let coarse = terminal(Stepper::Exponential, 1, 1);
    let fine = terminal(Stepper::ExplicitEm, 20, 2);
    let moments = |xs: &[f64]| {
        let (m1, s1) = mean_and_stderr(xs);
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (m2, s2) = mean_and_stderr(&sq);
        (m1, s1, m2, s2)
    };
    let (a1, sa1, a2, sa2) = moments(&coarse);
    let (b1, sb1, b2, sb2) = moments(&fine);
    assert!((a1 - b1).abs() <= 3.0 * sa1.hypot(sb1), "means {a1} vs {b1}");
    assert!((a2 - b2).abs() <= 3.0 * sa2.hypot(sb2), "second moments {a2} vs {b2}");
}

#[test]
fn exponential_velocity_exact_for_any_step_ratio() {
    let model = model_library(&ModelSpec::new("constant").with("gamma", 3.0).with("K", 0.0).with("sigma", 0.0)).unwrap();
    let eps = 0.02;
    for delta in [1e-4, 0.01, 0.1, 0.5] {
        let mut ens = FullEnsemble::new(eps, 1, &[0.0], &[2.0]).unwrap();
        for j in 1..=20 {
            step_full_exponential(&mut ens, model.as_ref(), delta, &[0.0], &StepControl::default()).unwrap();
            let exact = 2.0 * (-3.0 * delta * j as f64 / eps).exp();
            assert!((ens.v[0] - exact).abs() <= 1e-12, "δ = {delta}, step {j}");
        }
    }
}

#[test]
fn position_increments_grow_at_most_linearly() {
    let model = ou();
    let eps = 1e-4;
    // Exponential stepper on δ = 2⁻¹²; increments over h = 2⁻⁸..2⁻³ from t = 1/2.
    let per_window = 1;
    let coarse = 2f64.powi(-12);
    let windows = 2usize.pow(12) * 5 / 8;
    let start = 2usize.pow(11);
    let replicas = 400;
    let paths: Vec<Vec<f64>> = (0..replicas)
        .map(|r| full_path(model.as_ref(), Stepper::Exponential, eps, coarse, per_window, windows, 1.0, r, 77))
        .collect();
    let mut log_h = Vec::new();
    let mut log_m = Vec::new();
    for p in 3..=8 {
        let lag = 2usize.pow(12 - p);
        let msd = paths.iter().map(|x| (x[start + lag] - x[start]).powi(2)).sum::<f64>() / replicas as f64;
        log_h.push((lag as f64 * coarse).ln());
        log_m.push(msd.ln());
    }
    let n = log_h.len() as f64;
    let (mx, my) = (log_h.iter().sum::<f64>() / n, log_m.iter().sum::<f64>() / n);
    let sxy: f64 = log_h.iter().zip(&log_m).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = log_h.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!(slope <= 1.2, "slope {slope}");
    assert!(slope > 0.8, "slope {slope}");
}

#[test]
fn smaller_mass_tracks_limit_path_more_closely() {
    let model = ou();
    let mut better = 0;
    for seed in 0..100 {
        let sup = |eps: f64| {
            let cfg = CoupledConfig::new(eps, 1.0, eps / 20.0, 0.01, vec![1.0], vec![0.0]);
            simulate_coupled(model.as_ref(), &cfg, 0, seed).unwrap().sup_diff
        };
        if sup(0.01) <= sup(0.1) {
            better += 1;
        }
    }
    assert!(better >= 90, "{better}/100");
}

#[test]
fn limit_stepper_replays_identically() {
    let model = model_library(&ModelSpec::new("interaction").with("a", 2.0).with("b", 0.5)).unwrap();
    let run = || {
        let mut ens = LimitEnsemble::new(4, &[0.3]).unwrap();
        let mut noise = NoiseDriver::new(5, 0, 4, 1, 0.01, 1).unwrap();
        for _ in 0..50 {
            let w = noise.next_window();
            step_limit_em(&mut ens, model.as_ref(), 0.01, w.coarse(), &LimitOptions::default()).unwrap();
        }
        ens.x
    };
    assert_eq!(run(), run());
}

#[test]
fn constant_model_gap_within_fitted_envelope() {
    let model = ou();
    let spec = ModelSpec::new("constant").with("gamma", 2.0).with("sigma", 1.0).with("K", 1.0);
    let mut cfg = ConvergenceConfig::new(vec![0.1, 0.05, 0.02, 0.01], 1.0, 0.01, vec![1.0], vec![0.0]);
    cfg.replicas = 100;
    cfg.seed = 12;
    let fitted = run_convergence(model.as_ref(), &spec, &cfg).unwrap();
    let c = fitted.ratios.iter().copied().fold(0.0, f64::max);

    cfg.epsilons = vec![1e-3];
    let small = run_convergence(model.as_ref(), &spec, &cfg).unwrap();
    assert!(small.errors[0] <= 5.0 * 1e-3f64.sqrt() * c, "{} vs C = {c}", small.errors[0]);
}

#[test]
fn reports_independent_of_thread_count() {
    let spec = ModelSpec::new("interaction").with("a", 2.0).with("b", 0.5).with("d", 2.0);
    let model = model_library(&spec).unwrap();
    let mut cfg = ConvergenceConfig::new(vec![0.1, 0.05], 0.2, 0.01, vec![0.5, -0.5], vec![0.0, 0.0]);
    cfg.replicas = 12;
    cfg.particles = 6;
    let in_pool = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_convergence(model.as_ref(), &spec, &cfg).unwrap())
    };
    let one = in_pool(1);
    assert_eq!(one, in_pool(4));
    assert_eq!(one, in_pool(7));
}
