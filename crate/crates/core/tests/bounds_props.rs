use betadelta_core::bounds::{
    beta_equality, beta_lower, beta_upper, exact_bounds_on_support, gaussian_beta_interval,
    gaussian_eigen_estimates, outer_gram, residual_energy_in_range,
};
use betadelta_core::linalg::{dot, symmetric_eigenvalues};
use betadelta_core::lpn::{solve_lpn, LpnTolerances};
use betadelta_core::problem::{generate_gaussian_matrix, generate_problem, ProblemParams};
use betadelta_core::qp::{Lasso, QpConfig};
use betadelta_core::solution::residual;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // At a penalized optimum with support Ā: rᵀ(ĀĀᵀ)r = beta² k.
    #[test]
    fn range_energy_identity(seed in 0u64..10_000, t in 0.02..0.8f64) {
        let p = ProblemParams { n: 50, m: 25, k: 4, sigma: 1.0, sigma_w: 0.1 };
        let prob = generate_problem(&p, seed).unwrap();
        let lasso = Lasso::new(&prob.a, &prob.b).unwrap();
        let beta = t * lasso.beta_max();
        let s = lasso.solve(&QpConfig::new(beta), None).unwrap();
        prop_assume!(s.solution.k > 0);
        let abar = s.solution.restricted_matrix(&prob.a);
        let r: Vec<f64> = residual(&abar, &prob.b, &s.solution.reduced()).iter().map(|v| -v).collect();
        let quad = dot(&r, &outer_gram(&abar).mul_vec(&r));
        let target = beta * beta * s.solution.k as f64;
        prop_assert!((quad - target).abs() <= 1e-6 * target, "{quad} vs {target}");
        let energy = residual_energy_in_range(&abar, &prob.b, &s.solution.reduced());
        prop_assert!((energy - target).abs() <= 1e-6 * target);
    }

    #[test]
    fn outer_and_inner_gram_share_nonzero_spectrum(m in 2usize..12, k in 1usize..12, seed in any::<u64>()) {
        prop_assume!(k <= m);
        let a = generate_gaussian_matrix(m, k, 1.0, seed).unwrap();
        let inner = symmetric_eigenvalues(&betadelta_core::linalg::gram(&a)).unwrap();
        let outer = symmetric_eigenvalues(&outer_gram(&a)).unwrap();
        let top = inner[0];
        for i in 0..k {
            prop_assert!((inner[i] - outer[i]).abs() <= 1e-9 * top);
        }
        for v in &outer[k..] {
            prop_assert!(v.abs() <= 1e-9 * top);
        }
    }

    #[test]
    fn gaussian_interval_is_composition(m in 10usize..400, frac in 0.01..1.0f64, sigma in 0.1..3.0f64, delta in 0.0..10.0f64) {
        let k = ((m as f64 * frac).ceil() as usize).clamp(1, m);
        let (lmin, lmax) = gaussian_eigen_estimates(m, sigma, k as f64 / m as f64).unwrap();
        let (lo, hi) = gaussian_beta_interval(m, k, sigma, delta).unwrap();
        prop_assert_eq!(lo, beta_lower(lmin, m, delta).unwrap());
        prop_assert_eq!(hi, beta_upper(lmax, k, delta).unwrap());
        prop_assert!(lo <= hi);
    }
}

// The constrained solution's beta sits below the exact upper bound on its own
// support, and the closed form on that support reproduces it.
#[test]
fn sandwich_and_equality_on_recovered_support() {
    let p = ProblemParams {
        n: 128,
        m: 50,
        k: 10,
        sigma: 1.0,
        sigma_w: 0.15,
    };
    let mut lower_misses = 0;
    let seeds = 0..20u64;
    let total = seeds.clone().count();
    for seed in seeds {
        let prob = generate_problem(&p, seed).unwrap();
        let r = solve_lpn(&prob.a, &prob.b, prob.delta, &LpnTolerances::default()).unwrap();
        let bounds = exact_bounds_on_support(&prob.a, &r.solution.support, prob.delta).unwrap();
        assert!(
            r.beta_star <= bounds.upper * 1.05,
            "seed {seed}: {} > {}",
            r.beta_star,
            bounds.upper
        );
        if r.beta_star < bounds.lower / 1.05 {
            lower_misses += 1;
        }
        let abar = r.solution.restricted_matrix(&prob.a);
        let eq = beta_equality(&abar, &prob.b, &r.solution.signs(), prob.delta).unwrap();
        assert!(eq.signs_consistent);
        assert!(
            (eq.beta - r.beta_star).abs() <= 0.01 * r.beta_star,
            "seed {seed}: {} vs {}",
            eq.beta,
            r.beta_star
        );
    }
    assert!(
        lower_misses as f64 <= 0.2 * total as f64,
        "{lower_misses} lower-bound misses"
    );
}
