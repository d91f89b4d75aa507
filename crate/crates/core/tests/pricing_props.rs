mod common;

use common::*;
use num_traits::Zero;
use proptest::prelude::*;
use tollcast::arith::{rat, Rational};
use tollcast::equilibrium::solve_equilibrium;
use tollcast::model::{verify_wardrop, Flow, Instance};
use tollcast::pricing::{
    check_implementable, implement_budget, market_price_interval, min_feasible_budget, min_price,
};

fn g(inst: &Instance, f: &Flow) -> Rational {
    f.total_externality(inst)[0].clone()
}

fn phi(inst: &Instance, f: &Flow) -> Rational {
    f.potential(inst, &[rat(0, 1)])
}

fn wardrop(inst: &Instance, f: &Flow, lambda: &Rational) -> bool {
    verify_wardrop(inst, f, std::slice::from_ref(lambda), 100_000).unwrap().holds
}

/// A budget `t/4` of the way from the least attainable externality to the
/// externality of the untolled equilibrium.
fn budget(inst: &Instance, t: i64) -> Rational {
    let lo = min_feasible_budget(inst).unwrap().remove(0);
    let hi = g(inst, &solve_equilibrium(inst, &[rat(0, 1)]).unwrap().flow);
    &lo + (hi - &lo) * rat(t, 4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn min_price_is_least_and_tight(seed in any::<u64>(), strict in any::<bool>(), t in 0i64..=4) {
        let inst = random_instance(&mut rng(seed), &GenConfig { strictly_increasing: strict, ..Default::default() });
        let b = budget(&inst, t);
        let r = min_price(&inst, &b).unwrap();
        prop_assert!(r.iterations <= r.iteration_bound);
        prop_assert!(g(&inst, &r.flow) <= b);
        if !r.lambda_star.is_zero() {
            prop_assert_eq!(g(&inst, &r.flow), b.clone());
        }
        prop_assert!(wardrop(&inst, &r.flow, &r.lambda_star));
        if strict && !r.lambda_star.is_zero() {
            let below = &r.lambda_star * rat(999, 1000);
            prop_assert!(g(&inst, &solve_equilibrium(&inst, &[below]).unwrap().flow) > b);
        }
    }

    #[test]
    fn market_witnesses_clear(seed in any::<u64>(), t in 0i64..=4) {
        let inst = random_instance(&mut rng(seed), &GenConfig::default());
        let credits = budget(&inst, t);
        let m = market_price_interval(&inst, &credits).unwrap();
        let mut ends = vec![(m.lambda_lo.clone(), m.witness_lo.clone())];
        if let (Some(hi), Some(w)) = (&m.lambda_hi, &m.witness_hi) {
            prop_assert!(&m.lambda_lo <= hi);
            ends.push((hi.clone(), w.clone()));
        }
        for (lambda, w) in ends {
            let used = g(&inst, &w);
            prop_assert!(used <= credits);
            prop_assert!((&lambda * (&used - &credits)).is_zero());
            prop_assert!(wardrop(&inst, &w, &lambda));
        }
    }

    #[test]
    fn budget_prices_implement_the_optimum(seed in any::<u64>(), t in 0i64..=4) {
        let inst = random_instance(&mut rng(seed), &GenConfig::default());
        let b = budget(&inst, t);
        let r = implement_budget(&inst, std::slice::from_ref(&b)).unwrap();
        let used = g(&inst, &r.flow);
        prop_assert!(used <= b);
        prop_assert!(!r.lambda[0].is_negative());
        prop_assert!((&r.lambda[0] * (&used - &b)).is_zero());
        prop_assert!(wardrop(&inst, &r.flow, &r.lambda[0]));
        // The least price is one budget-respecting equilibrium, so it cannot
        // beat the optimum.
        let least = min_price(&inst, &b).unwrap();
        prop_assert!(phi(&inst, &r.flow) <= phi(&inst, &least.flow));
    }

    #[test]
    fn tolled_equilibria_are_budget_optimal(seed in any::<u64>(), num in 1i64..40, den in 1i64..5) {
        // x(λ) with λ > 0 minimises Φ among flows with G ≤ G(x(λ)).
        let inst = random_instance(&mut rng(seed), &GenConfig::default());
        let x = solve_equilibrium(&inst, &[rat(num, den)]).unwrap().flow;
        let r = implement_budget(&inst, &[g(&inst, &x)]).unwrap();
        prop_assert_eq!(phi(&inst, &r.flow), phi(&inst, &x));
    }

    #[test]
    fn equilibria_are_implementable(seed in any::<u64>(), num in 0i64..40, den in 1i64..5) {
        let inst = random_instance(&mut rng(seed), &GenConfig::default());
        let x = solve_equilibrium(&inst, &[rat(num, den)]).unwrap().flow;
        let r = check_implementable(&inst, &x).unwrap();
        prop_assert!(r.implementable);
        prop_assert!(r.gap.is_zero());
        let lambda = r.lambda.unwrap();
        prop_assert!(!lambda[0].is_negative());
        prop_assert!(wardrop(&inst, &x, &lambda[0]));
    }
}
