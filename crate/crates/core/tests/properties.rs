use lqr_adp::analysis::{
    construct_peps, probe_delta0, probe_delta1, DirectionKind,
};
use lqr_adp::inexact::{inexact_pi_run, inexact_vi_run, make_schedule, Schedule};
use lqr_adp::lqr::{
    bellman_operator, closed_loop, gain_l, is_stabilizing_gain, is_stabilizing_kernel,
    policy_evaluation, policy_improvement, riccati_update, Gain, Kernel, LqrProblem,
};
use lqr_adp::matlin::{
    dlyap, inverse, is_schur_stable, lyap_operator, max_eig, min_eig, peps_norm, pmat,
    spectral_radius_estimate, sym_eig, Mat, SymMat,
};
use lqr_adp::oracle::{scalar_dare_closed_form, solve_dare_bruteforce};
use lqr_adp::sampling::{
    gaussian_mat, random_contractive_problem, random_problem, random_psd_kernel, rng, unit_psd,
    unit_symmetric,
};
use lqr_adp::solvers::{
    kernel_decrease_margin, pi_run, vi_run, PiInit, Reference, StopRule,
};
use proptest::prelude::*;
use rand::Rng;

fn benchmark_system() -> LqrProblem {
    lqr_adp::cli::config::benchmark_system()
}

fn mat_strategy(max_dim: usize) -> impl Strategy<Value = Mat> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
        prop::collection::vec(-2.0f64..2.0, r * c)
            .prop_map(move |d| Mat::from_col_major(r, c, d).unwrap())
    })
}

fn square_pair(max_dim: usize) -> impl Strategy<Value = (Mat, Mat)> {
    (1..=max_dim).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0f64..1.0, n * n),
            prop::collection::vec(-1.0f64..1.0, n * n),
        )
            .prop_map(move |(x, y)| {
                (
                    Mat::from_col_major(n, n, x).unwrap(),
                    Mat::from_col_major(n, n, y).unwrap(),
                )
            })
    })
}

/// Random problem whose DARE the oracle certifies, with its solution.
/// Nearly unstabilizable draws are rejected.
fn certified_problem(r: &mut impl Rng, n: usize, m: usize) -> (LqrProblem, Kernel) {
    loop {
        let prob = random_problem(r, n, m);
        if let Ok(sol) = solve_dare_bruteforce(&prob) {
            return (prob, sol.p_star);
        }
    }
}

/// Random matrix scaled so its spectral radius estimate is `target`.
fn with_radius(m: Mat, target: f64) -> Mat {
    let rho = spectral_radius_estimate(&m, 4096).unwrap().value;
    m.scale(target / rho.max(1e-12))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn vec_round_trip(m in (1usize..=8, 1usize..=8).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c)
            .prop_map(move |d| Mat::from_col_major(r, c, d).unwrap())
    })) {
        let (r, c) = m.shape();
        prop_assert_eq!(Mat::unvec(&m.vec(), r, c).unwrap(), m);
    }

    #[test]
    fn pmat_vectorizes_lyapunov_operator((x, y) in square_pair(5)) {
        let lhs = lyap_operator(&x, &y).vec();
        let rhs = pmat(&x).matmul(&y.vec());
        prop_assert!((&lhs - &rhs).frob_norm() <= 1e-10);
    }

    #[test]
    fn peps_norm_with_identity_is_spectral_norm(m in mat_strategy(5)) {
        let n = m.rows();
        let got = peps_norm(&m, &SymMat::identity(n)).unwrap();
        let want = max_eig(&SymMat::symmetrize(&m.tr_mul(&m))).unwrap().sqrt();
        prop_assert!((got - want).abs() <= 1e-10);
    }

    #[test]
    fn sym_eig_reconstructs((m, _) in square_pair(6)) {
        let s = SymMat::symmetrize(&(&m + &m.transpose()));
        let e = sym_eig(&s).unwrap();
        prop_assert!((&e.reconstruct() - s.as_mat()).frob_norm() <= 1e-9 * s.as_mat().frob_norm().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn dlyap_residual_on_stable_matrices(seed in any::<u64>(), n in 1usize..=5, target in 0.05f64..0.95) {
        let mut r = rng(seed);
        let x = with_radius(gaussian_mat(&mut r, n, n), target);
        let w = lqr_adp::sampling::random_pd(&mut r, n, 1.0, 0.1);
        let y = dlyap(&x, &w).unwrap();
        let res = (&(&x.tr_mul(&y.as_mat().matmul(&x)) - y.as_mat()) + w.as_mat()).frob_norm();
        prop_assert!(res <= 1e-8 * w.frob_norm().max(1.0), "residual {res:e}");
    }

    #[test]
    fn schur_test_matches_gelfand(seed in any::<u64>(), n in 1usize..=5) {
        let mut r = rng(seed);
        let m = gaussian_mat(&mut r, n, n).scale(r.random_range(0.1..1.5));
        let rho = spectral_radius_estimate(&m, 4096).unwrap().value;
        prop_assume!(!(0.95..=1.05).contains(&rho));
        prop_assert_eq!(is_schur_stable(&m), rho < 1.0);
    }

    #[test]
    fn scalar_oracles_agree(
        a in -3.0f64..3.0,
        b in -2.0f64..2.0,
        q in 0.01f64..5.0,
        r in 0.1f64..5.0,
    ) {
        prop_assume!(b.abs() > 0.05 || a.abs() < 0.95);
        let prob = LqrProblem::scalar(a, b, q, r).unwrap();
        let closed = scalar_dare_closed_form(a, b, q, r).unwrap();
        let brute = solve_dare_bruteforce(&prob).unwrap();
        prop_assert!((brute.p_star[(0, 0)] - closed).abs() <= 1e-10 * closed.max(1.0),
            "{} vs {closed}", brute.p_star[(0, 0)]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn bellman_forms_agree(seed in any::<u64>(), n in 1usize..=5, m in 1usize..=3) {
        let mut r = rng(seed);
        let prob = random_problem(&mut r, n, m);
        let p = random_psd_kernel(&mut r, n, 5.0);
        let t = bellman_operator(&prob, &p).unwrap();
        let u = riccati_update(&prob, &p).unwrap();
        prop_assert!((t.as_mat() - u.as_mat()).frob_norm() <= 1e-10 * t.frob_norm().max(1.0));
    }

    #[test]
    fn closed_loop_identity(seed in any::<u64>(), n in 1usize..=5, m in 1usize..=3) {
        let mut r = rng(seed);
        let prob = random_problem(&mut r, n, m);
        let p = random_psd_kernel(&mut r, n, 5.0);
        let b = prob.b();
        let brb = b.matmul(&inverse(prob.r().as_mat()).unwrap()).matmul(&b.transpose());
        let lhs = &brb.matmul(p.as_mat()) + &Mat::identity(n);
        let want = lqr_adp::matlin::solve_linear(&lhs, prob.a()).unwrap();
        let got = closed_loop(&prob, &p).unwrap();
        prop_assert!((&got - &want).frob_norm() <= 1e-9 * want.frob_norm().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sandwich_bound(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=3) {
        let mut r = rng(seed);
        let (prob, ps) = certified_problem(&mut r, n, m);
        let scale = ps.frob_norm().max(1.0);
        let p = Kernel::new(ps.sym().add(&unit_psd(&mut r, n).scale(r.random_range(0.0..0.5) * scale)));
        let d = p.as_mat() - ps.as_mat();
        let lower = SymMat::symmetrize(&d).congruence(&closed_loop(&prob, &p).unwrap());
        let upper = SymMat::symmetrize(&d).congruence(&closed_loop(&prob, &ps).unwrap());
        let mid = SymMat::symmetrize(&(bellman_operator(&prob, &p).unwrap().as_mat() - ps.as_mat()));
        let tol = -1e-8 * scale;
        prop_assert!(min_eig(&mid.sub(&lower)).unwrap() >= tol);
        prop_assert!(min_eig(&upper.sub(&mid)).unwrap() >= tol);
    }

    #[test]
    fn evaluation_of_optimal_gain(seed in any::<u64>(), n in 1usize..=5, m in 1usize..=3) {
        let mut r = rng(seed);
        let (prob, ps) = certified_problem(&mut r, n, m);
        let back = policy_evaluation(&prob, &policy_improvement(&prob, &ps).unwrap()).unwrap();
        prop_assert!((back.as_mat() - ps.as_mat()).frob_norm() <= 1e-7 * ps.frob_norm().max(1.0));
    }

    #[test]
    fn limits_agree_with_oracle(seed in any::<u64>(), n in 1usize..=5, m in 1usize..=3) {
        let mut r = rng(seed);
        let (prob, ps) = certified_problem(&mut r, n, m);
        let vi = vi_run(&prob, Kernel::zeros(n), StopRule::default(), None);
        let k0 = Gain::new(gain_l(&prob, &ps.scale(2.0)).unwrap().scale(-1.0));
        let pi = pi_run(&prob, PiInit::Gain(k0), StopRule::default(), None);
        prop_assert!(vi.converged() && pi.converged());
        let (v, p) = (vi.final_kernel().unwrap(), pi.final_kernel().unwrap());
        prop_assert!((v.as_mat() - ps.as_mat()).frob_norm() <= 1e-7);
        prop_assert!((p.as_mat() - ps.as_mat()).frob_norm() <= 1e-7);
        prop_assert!((v.as_mat() - p.as_mat()).frob_norm() <= 1e-7);
    }

    #[test]
    fn peps_weight_invariants(seed in any::<u64>(), n in 1usize..=5, m in 1usize..=3) {
        let mut r = rng(seed);
        let (prob, ps) = certified_problem(&mut r, n, m);
        let w = construct_peps(&prob, &ps).unwrap();
        let top = max_eig(&w.peps).unwrap();
        prop_assert!((1.0 - 1e-10..=1.0 + 1e-12).contains(&top));
        prop_assert!(min_eig(&w.peps).unwrap() > 1e-12);
        prop_assert!(w.contraction_at_optimum < 1.0);
    }

    #[test]
    fn probe_radii_ordered(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=3) {
        let mut r = rng(seed);
        let (prob, ps) = certified_problem(&mut r, n, m);
        let cap = ps.frob_norm().max(1.0);
        let d0 = probe_delta0(&prob, &ps, 10, cap, DirectionKind::Symmetric, &mut r);
        prop_assert!(d0.radius > 0.0);
        let d1 = probe_delta1(&prob, &ps, d0.radius, 10, &mut r);
        prop_assert!(d1.radius > 0.0 && d1.radius <= d0.radius);
    }

    #[test]
    fn exact_schedule_is_bitwise_exact(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=3) {
        let mut r = rng(seed);
        let prob = random_problem(&mut r, n, m);
        let p0 = random_psd_kernel(&mut r, n, 3.0);
        let seq = make_schedule(Schedule::Exact, prob.plant()).unwrap();
        let stop = StopRule::new(1e-12, 300).unwrap();
        let vi = inexact_vi_run(&prob, p0.clone(), &seq, stop, None).unwrap();
        prop_assert_eq!(vi.trace, vi_run(&prob, p0.clone(), stop, None));
        let pi = inexact_pi_run(&prob, PiInit::Kernel(p0.clone()), &seq, stop, None).unwrap();
        prop_assert_eq!(pi.trace, pi_run(&prob, PiInit::Kernel(p0), stop, None));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // every PSD kernel stabilizes a contractive A when B R^-1 B^T = c I
    #[test]
    fn psd_kernels_stabilize_contractive_plants(seed in any::<u64>(), n in 1usize..=5) {
        let mut r = rng(seed);
        let base = random_contractive_problem(&mut r, n, n);
        let c: f64 = r.random_range(0.2..5.0);
        let prob = LqrProblem::from_mats(
            base.a().clone(),
            Mat::identity(n).scale(c.sqrt()),
            base.q().as_mat().clone(),
            Mat::identity(n),
        ).unwrap();
        for _ in 0..50 {
            let p = random_psd_kernel(&mut r, n, 100.0);
            prop_assert!(is_stabilizing_kernel(&prob, &p));
        }
    }
}

#[test]
fn psd_kernel_counterexample_for_general_input_matrix() {
    let a = Mat::from_rows(&[[0.0, 0.9], [0.9, 0.0]]).unwrap();
    let b = Mat::from_rows(&[[1.0], [0.0]]).unwrap();
    let prob = LqrProblem::from_mats(a, b, Mat::identity(2), Mat::identity(1)).unwrap();
    let p = Kernel::new(SymMat::new(Mat::from_rows(&[[2.0, -9.0], [-9.0, 50.0]]).unwrap()).unwrap());
    assert!(min_eig(p.sym()).unwrap() > 0.0);
    assert!(!is_stabilizing_kernel(&prob, &p));
    let rho = spectral_radius_estimate(&closed_loop(&prob, &p).unwrap(), 4096).unwrap().value;
    assert!((rho - 2.7965).abs() < 1e-3, "{rho}");
}

#[test]
fn vi_contracts_from_above_and_inside_ball() {
    let prob = benchmark_system();
    let ps = solve_dare_bruteforce(&prob).unwrap().p_star;
    let reference = Reference::new(&prob, ps.clone());
    let mut r = rng(21);
    let d0 = probe_delta0(&prob, &ps, 50, 1.0, DirectionKind::Symmetric, &mut r);
    for k in 0..50 {
        let p0 = if k % 2 == 0 {
            Kernel::new(ps.sym().add(&unit_psd(&mut r, 3).scale(r.random_range(0.0..1.0))))
        } else {
            let t = r.random_range(0.0..d0.radius);
            Kernel::new(ps.sym().add(&unit_symmetric(&mut r, 3).scale(t)))
        };
        let t = vi_run(&prob, p0, StopRule::default(), Some(&reference));
        let e = t.peps_errors().unwrap();
        for w in e.windows(2).filter(|w| w[0] > 1e-14) {
            assert!(w[1] / w[0] <= 1.0 - 1e-10, "sample {k}: ratio {}", w[1] / w[0]);
        }
    }
}

#[test]
fn pi_monotone_from_stabilizing_gains() {
    let prob = benchmark_system();
    let ps = solve_dare_bruteforce(&prob).unwrap().p_star;
    let mut r = rng(22);
    let mut used = 0;
    while used < 50 {
        let k0 = Gain::new(gaussian_mat(&mut r, 3, 3).scale(0.3));
        if !is_stabilizing_gain(&prob, &k0) {
            continue;
        }
        used += 1;
        let t = pi_run(&prob, PiInit::Gain(k0), StopRule::default(), None);
        assert!(t.converged());
        assert!(t.records.iter().all(|rec| rec.gain_stabilizing == Some(true)));
        assert!(kernel_decrease_margin(&t).unwrap() >= -1e-8);
        assert!((t.final_kernel().unwrap().as_mat() - ps.as_mat()).frob_norm() < 1e-9);
    }
}

#[test]
fn vanishing_schedules_converge() {
    let prob = benchmark_system();
    let ps = solve_dare_bruteforce(&prob).unwrap().p_star;
    let reference = Reference::without_peps(ps.clone());
    let k0 = Gain::new(gain_l(&prob, &ps.scale(2.0)).unwrap().scale(-1.0));
    for gamma in [0.5, 0.9, 0.99] {
        let seq = make_schedule(Schedule::GeometricVanishing { rho: 0.01, gamma }, prob.plant()).unwrap();
        let stop = StopRule::new(1e-12, 5000).unwrap();
        let vi = inexact_vi_run(&prob, ps.scale(2.0), &seq, stop, Some(&reference)).unwrap();
        let pi = inexact_pi_run(&prob, PiInit::Gain(k0.clone()), &seq, stop, Some(&reference)).unwrap();
        for t in [&vi.trace, &pi.trace] {
            let e = t.frob_errors().unwrap();
            assert!(e.iter().copied().fold(f64::INFINITY, f64::min) < 1e-6, "gamma {gamma}");
        }
    }
}

#[test]
fn small_offsets_preserve_stability() {
    let prob = benchmark_system();
    let ps = solve_dare_bruteforce(&prob).unwrap().p_star;
    for rho in [1e-5, 5e-5, 1e-4] {
        let seq = make_schedule(Schedule::ConstantOffset { rho }, prob.plant()).unwrap();
        let stop = StopRule::new(f64::MIN_POSITIVE, 500).unwrap();
        let vi = inexact_vi_run(&prob, ps.scale(2.0), &seq, stop, None).unwrap();
        assert!(vi.trace.records.iter().all(|rec| rec.stabilizing), "rho {rho}");
        let k0 = Gain::new(gain_l(&prob, &ps.scale(2.0)).unwrap().scale(-1.0));
        let pi = inexact_pi_run(&prob, PiInit::Gain(k0), &seq, stop, None).unwrap();
        assert!(pi.trace.records.iter().all(|rec| rec.stabilizing), "rho {rho}");
    }
}

#[test]
fn oracle_certificates_hold() {
    let mut r = rng(23);
    for _ in 0..100 {
        let n = r.random_range(1..=5);
        let m = r.random_range(1..=3);
        let prob = random_problem(&mut r, n, m);
        let Ok(sol) = solve_dare_bruteforce(&prob) else { continue };
        assert!(sol.residual <= 1e-9 * prob.q().frob_norm().max(1.0));
        assert!(is_stabilizing_kernel(&prob, &sol.p_star));
    }
}
