//! Property tests for the structural invariants.

use pinlab::annealed::{solve_annealed, CorrLengthRequest, PinningParams};
use pinlab::config::{law_to_string, parse_law};
use pinlab::law::{ExcursionLaw, LawKind};
use pinlab::numeric::logsumexp;
use pinlab::paths::{overlap, ReturnPath};
use pinlab::SlowlyVarying;
use proptest::prelude::*;

fn return_path(max_n: u64) -> impl Strategy<Value = ReturnPath> {
    proptest::collection::btree_set(1..=max_n, 0..40).prop_map(move |s| ReturnPath {
        returns: s.into_iter().collect(),
        horizon: max_n,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn overlap_symmetric_and_bounded(a in return_path(200), b in return_path(200)) {
        let ab = overlap(&a, &b).unwrap();
        let ba = overlap(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab.common as usize <= a.returns.len().min(b.returns.len()));
    }

    #[test]
    fn logsumexp_shift_invariant(v in proptest::collection::vec(-200.0f64..200.0, 1..20), shift in -500.0f64..500.0) {
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let lhs = logsumexp(&shifted);
        let rhs = logsumexp(&v) + shift;
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn law_grammar_round_trips(c in 1.05f64..1.95, p_inf in 0.0f64..0.9, a in -3.0f64..3.0, logpow in proptest::bool::ANY) {
        let phi = if logpow { SlowlyVarying::LogPower(a) } else { SlowlyVarying::Constant(a.abs() + 0.1) };
        let law = LawKind::Heavy { c, phi, p_inf };
        let round = parse_law(&law_to_string(&law)).unwrap();
        prop_assert_eq!(law, round);
    }
}

proptest! {
    // law construction is comparatively expensive; keep the case count small
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_heavy_laws_are_normalized(c in 1.1f64..1.9, p_inf in 0.0f64..0.7) {
        let law = ExcursionLaw::heavy(c, SlowlyVarying::Constant(1.0), p_inf, 2000).unwrap();
        let mut mass = 0.0;
        for n in 1..=2000u64 {
            mass += law.pmf_at(n);
        }
        let total = mass + law.tail_at(2000);
        prop_assert!((total - 1.0).abs() < 1e-11, "total = {}", total);
        // tail nonincreasing on a coarse grid
        for m in (0..1900u64).step_by(100) {
            prop_assert!(law.tail_at(m + 100) <= law.tail_at(m) + 1e-15);
        }
    }

    #[test]
    fn annealed_identities_hold_on_random_points(c in 1.15f64..1.9, bd in 1e-4f64..0.4) {
        let law = ExcursionLaw::heavy(c, SlowlyVarying::Constant(1.0), 0.0, 50_000).unwrap();
        let sol = solve_annealed(&law, PinningParams::from_delta(1.0, bd), CorrLengthRequest::Skip).unwrap();
        prop_assert!(sol.alpha0 > 0.0);
        prop_assert!(sol.delta_star > 0.0 && sol.delta_star < 1.0);
        prop_assert!(sol.residual_identity.abs() < 1e-10);
        prop_assert!(sol.residual_variational.abs() < 1e-8);
    }
}
