//! Prices that meet externality budgets, implementability of given flows and
//! market prices of tradable credit schemes.

mod implement;
mod search;

use num_traits::{One, Zero};

use crate::arith::Rational;
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpOutcome, RowKind, Sense};
use crate::model::Instance;

pub use crate::curve::lambda_max;
pub use implement::{check_implementable, implement_budget, BudgetImplementation, Implementability};
pub use search::{market_price_interval, min_price, iteration_bound, MarketInterval, PriceSearchReport};

/// LP over `x_{i,e} ≥ 0` (column `i·|E| + e`) with conservation rows for every
/// commodity and every node except the commodity's target, in that order.
pub(crate) fn flow_lp(instance: &Instance, sense: Sense, edge_costs: &[Rational]) -> LinearProgram {
    let m = instance.edges.len();
    let objective = (0..instance.commodities.len()).flat_map(|_| edge_costs.iter().cloned()).collect();
    let mut lp = LinearProgram::new(sense, objective);
    for (i, c) in instance.commodities.iter().enumerate() {
        for v in 0..instance.nodes.len() {
            if v == c.target {
                continue;
            }
            let mut row = Vec::new();
            for (e, edge) in instance.edges.iter().enumerate() {
                if edge.tail == edge.head {
                    continue;
                }
                if edge.tail == v {
                    row.push((i * m + e, Rational::one()));
                } else if edge.head == v {
                    row.push((i * m + e, -Rational::one()));
                }
            }
            let rhs = if v == c.source { c.demand.clone() } else { Rational::zero() };
            lp.add_row(row, RowKind::Eq, rhs);
        }
    }
    lp
}

fn class_rates(instance: &Instance, j: usize) -> Vec<Rational> {
    instance.edges.iter().map(|e| e.externality[j].constant.clone()).collect()
}

/// Smallest total externality any feasible flow achieves, per class, each
/// minimised on its own.
pub fn min_feasible_budget(instance: &Instance) -> Result<Vec<Rational>> {
    instance.require_constant_externality("the minimum feasible budget")?;
    (0..instance.num_classes())
        .map(|j| match solve_lp(&flow_lp(instance, Sense::Minimize, &class_rates(instance, j)))? {
            LpOutcome::Optimal { objective, .. } => Ok(objective),
            other => Err(Error::Internal(format!("externality minimisation ended {other:?}"))),
        })
        .collect()
}

/// Errors unless some feasible flow has `G_j ≤ B_j` for every class. The
/// certificate on failure refers to the joint program: conservation rows of
/// [`flow_lp`], then one budget row per class.
pub fn check_budget_feasible(instance: &Instance, budget: &[Rational]) -> Result<()> {
    instance.require_constant_externality("a budget")?;
    if budget.len() != instance.num_classes() {
        return Err(Error::Unsupported(format!(
            "expected {} budget entries, got {}",
            instance.num_classes(),
            budget.len()
        )));
    }
    let minima = min_feasible_budget(instance)?;
    let short = (0..budget.len()).find(|&j| minima[j] > budget[j]);

    let m = instance.edges.len();
    let zero = vec![Rational::zero(); m];
    let mut lp = flow_lp(instance, Sense::Minimize, &zero);
    for (j, b) in budget.iter().enumerate() {
        let rates = class_rates(instance, j);
        let row = (0..instance.commodities.len())
            .flat_map(|i| rates.iter().enumerate().map(move |(e, g)| (i * m + e, g.clone())))
            .filter(|(_, g)| !g.is_zero())
            .collect();
        lp.add_row(row, RowKind::Le, b.clone());
    }
    match solve_lp(&lp)? {
        LpOutcome::Optimal { .. } => Ok(()),
        LpOutcome::Infeasible { certificate } => {
            let message = match short {
                Some(j) => format!(
                    "class `{}` needs at least {} but the budget is {}",
                    instance.externality_names[j], minima[j], budget[j]
                ),
                None => "each class is attainable alone but not all together".into(),
            };
            Err(Error::InfeasibleBudget { message, certificate })
        }
        LpOutcome::Unbounded { .. } => Err(Error::Internal("feasibility program unbounded".into())),
    }
}
