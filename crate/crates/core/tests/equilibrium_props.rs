mod common;

use common::*;
use proptest::prelude::*;
use tollcast::arith::{rat, Rational};
use tollcast::equilibrium::{check_complementarity, extract_edge_state, solve_equilibrium};
use tollcast::model::verify_wardrop;

fn price(num: i64, den: i64) -> Rational {
    rat(num, den)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn equilibria_pass_both_checks(seed in any::<u64>(), strict in any::<bool>(), num in 0i64..80, den in 1i64..8) {
        let inst = random_instance(&mut rng(seed), &GenConfig { strictly_increasing: strict, ..Default::default() });
        let lambda = [price(num, den)];
        let res = solve_equilibrium(&inst, &lambda).unwrap();
        prop_assert!(check_complementarity(&inst, &res));
        prop_assert!(verify_wardrop(&inst, &res.flow, &lambda, 100_000).unwrap().holds);
        prop_assert_eq!(extract_edge_state(&inst, &res), res.edge_state.clone());
        prop_assert_eq!(solve_equilibrium(&inst, &lambda).unwrap(), res);
    }

    #[test]
    fn externality_falls_and_potential_rises(seed in any::<u64>(), a in 0i64..60, b in 0i64..60, den in 1i64..5) {
        let inst = random_instance(&mut rng(seed), &GenConfig::default());
        let (lo, hi) = (price(a.min(b), den), price(a.max(b), den));
        let x = solve_equilibrium(&inst, &[lo]).unwrap().flow;
        let y = solve_equilibrium(&inst, &[hi]).unwrap().flow;
        prop_assert!(x.total_externality(&inst)[0] >= y.total_externality(&inst)[0]);
        let zero = [rat(0, 1)];
        prop_assert!(x.potential(&inst, &zero) <= y.potential(&inst, &zero));
    }

    #[test]
    fn priced_potential_is_minimal_against_other_equilibria(seed in any::<u64>(), a in 0i64..40, b in 0i64..40) {
        // Every equilibrium is feasible, so none may beat x(λ) on Φ^λ.
        let inst = random_instance(&mut rng(seed), &GenConfig::default());
        let la = [price(a, 3)];
        let x = solve_equilibrium(&inst, &la).unwrap().flow;
        let y = solve_equilibrium(&inst, &[price(b, 3)]).unwrap().flow;
        prop_assert!(x.potential(&inst, &la) <= y.potential(&inst, &la));
    }
}

#[test]
fn multi_commodity_fixture_is_exact() {
    let d = fixture("two-commodity.json");
    for (l, a1, b1) in [(0, rat(1, 1), rat(2, 1)), (1, rat(1, 2), rat(3, 2)), (3, rat(0, 1), rat(1, 2)), (6, rat(0, 1), rat(0, 1))] {
        let res = solve_equilibrium(&d, &[rat(l, 1)]).unwrap();
        let loads = res.flow.loads();
        assert_eq!((loads[0].clone(), loads[2].clone()), (a1, b1), "λ={l}");
    }
}
