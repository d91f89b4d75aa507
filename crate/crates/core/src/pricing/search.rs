//! Bisection over a scalar price, resolved exactly inside one edge state.

use num_traits::{One, Zero};

use crate::arith::{ceil_log2, common_denominator, hadamard_bit_bound, Rational};
use crate::curve::{lambda_max, probe, StateInterval};
use crate::equilibrium::solve_equilibrium;
use crate::error::{Error, Result};
use crate::model::{Flow, Instance};

use super::{check_budget_feasible, min_feasible_budget};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceSearchReport {
    pub lambda_star: Rational,
    /// Equilibrium at `lambda_star` with `G ≤ B`; `G = B` whenever `lambda_star > 0`.
    pub flow: Flow,
    pub iterations: u64,
    pub iteration_bound: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketInterval {
    pub lambda_lo: Rational,
    /// `None` for an unbounded interval.
    pub lambda_hi: Option<Rational>,
    pub witness_lo: Flow,
    pub witness_hi: Option<Flow>,
}

fn externality(instance: &Instance, flow: &Flow) -> Rational {
    flow.total_externality(instance)[0].clone()
}

/// `G` along the state: value at `lambda_lo` and at `lambda_hi` (or its
/// constant value when unbounded).
fn g_ends(instance: &Instance, iv: &StateInterval) -> (Rational, Rational) {
    let lo = externality(instance, &iv.flow_lo);
    let hi = match &iv.flow_hi {
        Some(f) => externality(instance, f),
        None => lo.clone(),
    };
    (lo, hi)
}

/// The price in `iv` where `G` equals `target`; `G` must not be constant there.
fn solve_on(instance: &Instance, iv: &StateInterval, target: &Rational) -> (Rational, Flow) {
    let (g_lo, g_hi) = g_ends(instance, iv);
    let hi = iv.lambda_hi.as_ref().expect("G varies only on bounded states");
    let lambda = &iv.lambda_lo + (hi - &iv.lambda_lo) * (&g_lo - target) / (&g_lo - &g_hi);
    let flow = iv.flow_at(&lambda);
    (lambda, flow)
}

/// Mixes two equilibria at the same price so that `G` equals `target`
/// (equilibria at a fixed price form a convex set on which `G` is linear).
fn blend(instance: &Instance, above: &Flow, below: &Flow, target: &Rational) -> Flow {
    let (ga, gb) = (externality(instance, above), externality(instance, below));
    if ga == gb {
        return below.clone();
    }
    let w = (&ga - target) / (&ga - &gb);
    Flow::combine(above, &(Rational::one() - &w), below, &w)
}

/// `⌈log₂((λ̂+1)·(ημ)^{2η})⌉` with `η = |I||V| + |I||E| + 1` and `μ` the
/// largest coefficient among `1`, the slopes, offsets and externality rates
/// after scaling them to integers by their common denominator.
pub fn iteration_bound(instance: &Instance) -> Result<u64> {
    let top = lambda_max(instance)?;
    if top.is_zero() {
        return Ok(0);
    }
    let ni = instance.commodities.len();
    let eta = ni * instance.nodes.len() + ni * instance.edges.len() + 1;
    let coeffs: Vec<&Rational> = instance
        .edges
        .iter()
        .flat_map(|e| {
            e.pieces.iter().flat_map(|p| [&p.slope, &p.offset]).chain(e.externality.iter().map(|x| &x.constant))
        })
        .collect();
    let scale = Rational::from(common_denominator(coeffs.iter().copied()));
    let mu = coeffs.iter().map(|c| c.abs() * &scale).fold(Rational::one(), Rational::max);
    let gap = hadamard_bit_bound(&mu, eta)?;
    Ok(ceil_log2(&(top / gap)).max(0) as u64)
}

fn require_scalar(instance: &Instance, what: &str) -> Result<()> {
    instance.require_single_class(what)?;
    instance.require_constant_externality(what)
}

/// Smallest `λ ≥ 0` at which an equilibrium has `G ≤ budget`.
///
/// Bisects `[0, λ_max]` keeping `G > B` at the left end and `G ≤ B` at the
/// right end. Each midpoint's state interval is searched exactly, so the loop
/// stops as soon as it lands in the state where `G` crosses `B`.
pub fn min_price(instance: &Instance, budget: &Rational) -> Result<PriceSearchReport> {
    require_scalar(instance, "min_price")?;
    check_budget_feasible(instance, std::slice::from_ref(budget))?;
    let bound = iteration_bound(instance)?;
    let report = |lambda_star, flow, iterations| PriceSearchReport { lambda_star, flow, iterations, iteration_bound: bound };

    let at_zero = solve_equilibrium(instance, &[Rational::zero()])?.flow;
    if externality(instance, &at_zero) <= *budget {
        return Ok(report(Rational::zero(), at_zero, 0));
    }
    let mut left = Rational::zero();
    let mut left_flow = at_zero;
    let mut right = lambda_max(instance)?;
    let mut right_flow = solve_equilibrium(instance, std::slice::from_ref(&right))?.flow;
    if externality(instance, &right_flow) > *budget {
        return Err(Error::Internal(format!("budget {budget} unmet at the price bound {right}")));
    }
    let mut iterations = 0u64;
    loop {
        if iterations > bound {
            return Err(Error::Internal(format!("price search exceeded its bound of {bound} iterations")));
        }
        iterations += 1;
        let mid = (&left + &right) / Rational::from(2);
        let (iv, _) = probe(instance, &mid)?;
        let (g_lo, g_hi) = g_ends(instance, &iv);
        if g_lo <= *budget {
            if iv.lambda_lo <= left {
                // Two equilibria at `left` straddle the budget.
                let flow = blend(instance, &left_flow, &iv.flow_at(&left), budget);
                return Ok(report(left, flow, iterations));
            }
            right = iv.lambda_lo.clone();
            right_flow = iv.flow_lo.clone();
        } else if g_hi <= *budget {
            let (lambda, flow) = solve_on(instance, &iv, budget);
            return Ok(report(lambda, flow, iterations));
        } else {
            let Some(hi) = iv.lambda_hi.clone() else {
                return Err(Error::Internal(format!("budget {budget} unmet for every price")));
            };
            left_flow = iv.flow_hi.clone().expect("bounded state");
            left = hi;
            if left >= right {
                // `G` jumps at `left`: one equilibrium on each side of the budget.
                let flow = blend(instance, &left_flow, &right_flow, budget);
                return Ok(report(left, flow, iterations));
            }
        }
    }
}

/// All prices at which `credits` clear the market: some equilibrium uses at
/// most `credits` and the price is zero unless all credits are used.
pub fn market_price_interval(instance: &Instance, credits: &Rational) -> Result<MarketInterval> {
    require_scalar(instance, "a credit scheme")?;
    let lo = min_price(instance, credits)?;
    let b_min = min_feasible_budget(instance)?.remove(0);
    if *credits == b_min {
        return Ok(MarketInterval { lambda_lo: lo.lambda_star, lambda_hi: None, witness_lo: lo.flow, witness_hi: None });
    }
    if externality(instance, &lo.flow) < *credits {
        // Credits are left over at `lambda_lo`, so only a zero price clears.
        let flow = lo.flow;
        return Ok(MarketInterval {
            lambda_lo: Rational::zero(),
            lambda_hi: Some(Rational::zero()),
            witness_lo: flow.clone(),
            witness_hi: Some(flow),
        });
    }

    // Largest price whose equilibrium still uses every credit.
    let mut left = lo.lambda_star.clone();
    let mut left_flow = lo.flow.clone();
    let mut right = lambda_max(instance)?;
    let mut right_flow = solve_equilibrium(instance, std::slice::from_ref(&right))?.flow;
    let bound = iteration_bound(instance)?;
    for _ in 0..=bound {
        let mid = (&left + &right) / Rational::from(2);
        let (iv, _) = probe(instance, &mid)?;
        let (g_lo, g_hi) = g_ends(instance, &iv);
        let found = if g_lo < *credits {
            if iv.lambda_lo <= left {
                Some((left.clone(), blend(instance, &iv.flow_at(&left), &left_flow, credits)))
            } else {
                right = iv.lambda_lo.clone();
                right_flow = iv.flow_lo.clone();
                None
            }
        } else if g_hi < *credits {
            Some(solve_on(instance, &iv, credits))
        } else {
            match &iv.lambda_hi {
                None => return Err(Error::Internal("credits below the minimum budget stay binding".into())),
                Some(hi) => {
                    left = hi.clone();
                    left_flow = iv.flow_hi.clone().expect("bounded state");
                    (left >= right).then(|| (left.clone(), blend(instance, &left_flow, &right_flow, credits)))
                }
            }
        };
        if let Some((hi, flow)) = found {
            return Ok(MarketInterval {
                lambda_lo: lo.lambda_star,
                lambda_hi: Some(hi),
                witness_lo: lo.flow,
                witness_hi: Some(flow),
            });
        }
    }
    Err(Error::Internal(format!("market price search exceeded its bound of {bound} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use crate::model::test_fixtures::*;

    #[test]
    fn pigou_min_prices() {
        let p = pigou();
        let r = min_price(&p, &rat(1, 2)).unwrap();
        assert_eq!(r.lambda_star, rat(1, 1));
        assert_eq!(r.flow.loads(), vec![rat(1, 2), rat(1, 2)]);
        assert!(r.iterations <= r.iteration_bound);
        assert_eq!(min_price(&p, &rat(2, 1)).unwrap().lambda_star, rat(0, 1));
        assert_eq!(min_price(&p, &rat(0, 1)).unwrap().lambda_star, rat(2, 1));
    }

    #[test]
    fn perturbed_step_toll_min_price() {
        let r = min_price(&step_toll_perturbed(), &rat(0, 1)).unwrap();
        assert_eq!(r.lambda_star, rat(101, 100));
        assert!(r.iterations <= r.iteration_bound);
    }

    #[test]
    fn zero_slope_tie_is_blended() {
        // Both routes cost 1 at λ = 1: the search must land on the blend.
        let r = min_price(&step_toll(), &rat(1, 4)).unwrap();
        assert_eq!(r.lambda_star, rat(1, 1));
        assert_eq!(r.flow.total_externality(&step_toll()), vec![rat(1, 4)]);
    }

    #[test]
    fn rejected_inputs() {
        assert!(matches!(min_price(&braess(), &rat(1, 1)), Err(Error::Unsupported(_))));
        assert!(matches!(min_price(&single_edge(), &rat(1, 1)), Err(Error::InfeasibleBudget { .. })));
        assert!(matches!(min_price(&two_class(), &rat(1, 1)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn pigou_market_intervals() {
        let p = pigou();
        let m = market_price_interval(&p, &rat(1, 2)).unwrap();
        assert_eq!((m.lambda_lo.clone(), m.lambda_hi.clone()), (rat(1, 1), Some(rat(1, 1))));
        let m = market_price_interval(&p, &rat(1, 1)).unwrap();
        assert_eq!((m.lambda_lo.clone(), m.lambda_hi.clone()), (rat(0, 1), Some(rat(0, 1))));
        let m = market_price_interval(&p, &rat(0, 1)).unwrap();
        assert_eq!((m.lambda_lo.clone(), m.lambda_hi.clone()), (rat(2, 1), None));
        let m = market_price_interval(&p, &rat(3, 1)).unwrap();
        assert_eq!((m.lambda_lo, m.lambda_hi), (rat(0, 1), Some(rat(0, 1))));
    }

    #[test]
    fn flat_stretch_gives_a_wide_interval() {
        // With b2 = 5 + x the second commodity stays on b1 for λ ≤ 3, so G
        // sits at 2 on [2, 3].
        let mut d = two_commodity();
        d.edges[3].pieces[0].offset = rat(5, 1);
        let m = market_price_interval(&d, &rat(2, 1)).unwrap();
        assert_eq!((m.lambda_lo, m.lambda_hi), (rat(2, 1), Some(rat(3, 1))));
        for w in [m.witness_lo, m.witness_hi.unwrap()] {
            assert_eq!(w.total_externality(&d), vec![rat(2, 1)]);
        }
    }
}
