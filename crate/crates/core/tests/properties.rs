use monoreg::oracle::regularized_path_cold;
use monoreg::problems::integral_sigma_inverse;
use monoreg::{
    build_integral_problem, fixed_point_initializer, make_linear_spd, make_noise, regularized_path,
    run, solve_regularized, GammaRule, GridFunction, InitialGuess, NoiseModel, NormMode, Operator,
    RunReport, ScheduleParams, SolverConfig, Space,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> GridFunction {
    GridFunction::new(
        (0..n)
            .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng))
            .collect(),
    )
    .unwrap()
}

fn testbed_schedule() -> ScheduleParams {
    ScheduleParams::new(0.1, 5.0, 0.99, 1.0).unwrap()
}

/// `ψ_{n+1} ≤ (1 - γ_n a_{n+1}) ψ_n + (a_n - a_{n+1}) ‖u_n - ū‖` along a trace.
fn residual_recursion_holds(rep: &RunReport) -> bool {
    rep.trace.windows(2).all(|w| {
        let (r, s) = (&w[0], &w[1]);
        let rhs = (1.0 - r.gamma_n * s.a_n) * r.psi + (r.a_n - s.a_n) * r.shifted_norm;
        s.psi <= rhs + 1e-12 * (1.0 + rhs)
    })
}

#[test]
fn residual_recursion_on_testbed_traces() {
    let p = build_integral_problem(100).unwrap();
    for mode in [NormMode::Euclidean, NormMode::TrapezoidWeighted] {
        for (k, &d) in [0.05, 0.01, 0.001].iter().enumerate() {
            for model in [
                NoiseModel::Gaussian { seed: k as u64 },
                NoiseModel::Sinusoid,
            ] {
                let (f_delta, spec) = make_noise(p.f_exact(), model, d, mode).unwrap();
                let cfg = SolverConfig {
                    norm_mode: mode,
                    ..SolverConfig::default()
                };
                let rep = run(&p, &f_delta, spec.delta, &testbed_schedule(), &cfg).unwrap();
                assert!(
                    residual_recursion_holds(&rep),
                    "{mode} {d} {}",
                    model.name()
                );
                assert!(rep.dp_bracketing_holds());
            }
        }
    }
}

#[test]
fn residual_recursion_with_shift_and_adaptive_step() {
    let p = build_integral_problem(50).unwrap();
    let (f_delta, spec) =
        make_noise(p.f_exact(), NoiseModel::Sinusoid, 0.01, NormMode::Euclidean).unwrap();
    let shift = GridFunction::constant(50, 0.5).unwrap();
    let cfg = SolverConfig {
        shift: Some(shift),
        gamma: Some(GammaRule::Adaptive { cap: None }),
        ..SolverConfig::default()
    };
    let rep = run(&p, &f_delta, spec.delta, &testbed_schedule(), &cfg).unwrap();
    assert!(residual_recursion_holds(&rep));
}

#[test]
fn monotone_and_bounded_derivative_on_testbed() {
    let p = build_integral_problem(100).unwrap();
    let space = Space::new(100, NormMode::TrapezoidWeighted).unwrap();
    let euclid = Space::new(100, NormMode::Euclidean).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..1000 {
        let u = random(&mut rng, 100, 3.0);
        let v = random(&mut rng, 100, 3.0);
        let (fu, fv) = (p.apply(&u).unwrap(), p.apply(&v).unwrap());
        let df: Vec<f64> = (0..100).map(|i| fu[i] - fv[i]).collect();
        let du: Vec<f64> = (0..100).map(|i| u[i] - v[i]).collect();
        assert!(space.dot(&df, &du) >= -1e-10);
        assert!(euclid.dot(&df, &du) >= -1e-10);
    }
    // ‖F'(u)h‖ ≤ σ⁻¹ ‖h‖ in the weighted norm, where the kernel is selfadjoint
    for _ in 0..100 {
        let u = random(&mut rng, 100, 3.0);
        let h = random(&mut rng, 100, 1.0);
        let jh = p.derivative_apply(&u, &h).unwrap();
        assert!(
            space.norm(&jh).unwrap() <= integral_sigma_inverse() * space.norm(&h).unwrap() + 1e-10
        );
    }
}

#[test]
fn fixed_point_start_is_unique_on_testbed() {
    let p = build_integral_problem(100).unwrap();
    let (f_delta, _) =
        make_noise(p.f_exact(), NoiseModel::Sinusoid, 0.01, NormMode::Euclidean).unwrap();
    let gamma = 1.0 / (integral_sigma_inverse() + 0.2);
    let solve = |v0: &GridFunction| {
        fixed_point_initializer(
            &p,
            0.1,
            &f_delta,
            v0,
            gamma,
            1e-10,
            1_000_000,
            None,
            NormMode::Euclidean,
        )
        .unwrap()
    };
    let a = solve(&GridFunction::zeros(100));
    let b = solve(&GridFunction::constant(100, 3.0).unwrap());
    assert!(a.residual <= 1e-10 && b.residual <= 1e-10);
    for (x, y) in a.v.as_slice().iter().zip(b.v.as_slice()) {
        assert!((x - y).abs() < 1e-8);
    }
}

#[test]
fn fixed_point_start_run_on_testbed() {
    let p = build_integral_problem(100).unwrap();
    let (f_delta, spec) = make_noise(
        p.f_exact(),
        NoiseModel::Gaussian { seed: 1 },
        0.05,
        NormMode::Euclidean,
    )
    .unwrap();
    let cfg = SolverConfig {
        u0: InitialGuess::FixedPoint,
        ..SolverConfig::default()
    };
    let rep = run(&p, &f_delta, spec.delta, &testbed_schedule(), &cfg).unwrap();
    assert!(rep.theorem3_start_ok);
    assert!(rep.initializer_iterations.is_some());
    assert!(rep.trace[0].psi <= cfg.theta * spec.delta.powf(cfg.zeta));
    assert!(rep.dp_bracketing_holds());
}

#[test]
fn noise_perturbation_bound() {
    let p = build_integral_problem(60).unwrap();
    let space = Space::new(60, NormMode::Euclidean).unwrap();
    for &d in &[0.05, 0.01] {
        let (f_delta, spec) = make_noise(
            p.f_exact(),
            NoiseModel::Gaussian { seed: 9 },
            d,
            NormMode::Euclidean,
        )
        .unwrap();
        for &a in &[1.0, 0.1, 0.01] {
            let tol = 1e-12;
            let noisy = solve_regularized(&p, a, &f_delta, tol, NormMode::Euclidean).unwrap();
            let clean = solve_regularized(&p, a, p.f_exact(), tol, NormMode::Euclidean).unwrap();
            let gap = space.dist(noisy.v.as_slice(), clean.v.as_slice());
            assert!(
                gap <= spec.delta / a + 2.0 * tol / a,
                "a = {a}: {gap} > {}",
                spec.delta / a
            );
        }
    }
}

#[test]
fn large_regularization_trend() {
    let p = build_integral_problem(60).unwrap();
    let space = Space::new(60, NormMode::Euclidean).unwrap();
    let (f_delta, _) =
        make_noise(p.f_exact(), NoiseModel::Sinusoid, 0.01, NormMode::Euclidean).unwrap();
    let start = space.norm_of(f_delta.as_slice()); // ‖F(0) - f_δ‖ with F(0) = 0
    let mut last_gap = f64::INFINITY;
    for &a in &[10.0, 1e2, 1e3, 1e4] {
        let sol = solve_regularized(&p, a, &f_delta, 1e-13, NormMode::Euclidean).unwrap();
        let v_norm = space.norm_of(sol.v.as_slice());
        assert!(a * v_norm <= start + 1e-12);
        let fv = p.apply(&sol.v).unwrap();
        let gap = (space.dist(fv.as_slice(), f_delta.as_slice()) - start).abs();
        assert!(gap < last_gap);
        last_gap = gap;
    }
    assert!(last_gap < 1e-3 * start);
}

#[test]
fn warm_and_cold_paths_agree_on_testbed() {
    let p = build_integral_problem(30).unwrap();
    let (f_delta, _) = make_noise(
        p.f_exact(),
        NoiseModel::Gaussian { seed: 2 },
        0.01,
        NormMode::TrapezoidWeighted,
    )
    .unwrap();
    let s = testbed_schedule();
    let tol = 1e-11;
    let warm = regularized_path(&p, &s, &f_delta, 40, tol, NormMode::TrapezoidWeighted).unwrap();
    let cold =
        regularized_path_cold(&p, &s, &f_delta, 40, tol, NormMode::TrapezoidWeighted).unwrap();
    for (w, c) in warm.iter().zip(&cold) {
        // residual tol bounds the weighted-norm error by tol/a; pointwise error ≤ that / sqrt(min weight)
        let min_w: f64 = 1.0 / (2.0 * 29.0);
        let bound = 10.0 * tol / w.a / min_w.sqrt();
        for (x, y) in w.v.as_slice().iter().zip(c.v.as_slice()) {
            assert!((x - y).abs() <= bound);
        }
        assert!(c.iterations >= w.iterations || w.a == s.a_at(0));
    }
}

#[test]
fn diagonal_operator_sorted_and_sigma() {
    let op = make_linear_spd(&[0.2, 1.0, 0.5]).unwrap();
    assert_eq!(op.eigenvalues(), &[1.0, 0.5, 0.2]);
    assert!(op.reordered());
    assert_eq!(op.sigma_inverse_bound(), 1.0);
}
