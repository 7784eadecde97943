use betadelta::format::{problem_from_str, problem_to_string, real};
use betadelta_core::{DenseMatrix, SensingProblem};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e3..1e3f64,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
    ]
}

proptest! {
    #[test]
    fn real_is_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(real(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn problem_round_trip(
        (m, n, data, b, x) in (1usize..5, 0usize..4).prop_flat_map(|(m, extra)| {
            let n = m + extra;
            (Just(m), Just(n), prop::collection::vec(finite(), m * n), prop::collection::vec(finite(), m),
             prop::option::of(prop::collection::vec(finite(), n)))
        }),
        delta in 0.0..10.0f64,
        seed in any::<u64>(),
    ) {
        let a = DenseMatrix::from_row_major(m, n, data).unwrap();
        let mut p = SensingProblem::new(a, b, x, delta).unwrap();
        p.seed = seed;
        p.sigma_w = delta / 3.0;
        let back = problem_from_str(&problem_to_string(&p)).unwrap();
        prop_assert_eq!(back, p);
    }
}
