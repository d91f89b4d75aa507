//! Multi-class budget implementation and implementability of a given flow.

use num_traits::Zero;

use crate::arith::Rational;
use crate::equilibrium::{collapse_flow, solve_expanded_qp, ExpandedNetwork};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpOutcome, RowKind, Sense};
use crate::model::{Flow, Instance};

use super::{check_budget_feasible, flow_lp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetImplementation {
    /// One price per class, `λ_j ≥ 0` with `λ_j·(G_j − B_j) = 0`.
    pub lambda: Vec<Rational>,
    /// Minimises the travel-time potential subject to the budget; it is a
    /// Wardrop equilibrium under `lambda`.
    pub flow: Flow,
    pub perturbed: bool,
}

/// Minimises the potential over feasible flows with `G_j ≤ B_j`; the
/// multipliers of the budget rows are prices that implement the optimum.
pub fn implement_budget(instance: &Instance, budget: &[Rational]) -> Result<BudgetImplementation> {
    check_budget_feasible(instance, budget)?;
    let net = ExpandedNetwork::with_budget(instance, budget)?;
    let sol = solve_expanded_qp(&net, &instance.commodities)?;
    collapse_flow(&net, &sol)?;
    if let Some(l) = sol.side_duals.iter().find(|l| l.is_negative()) {
        return Err(Error::Internal(format!("budget multiplier {l} is negative")));
    }
    let flow = Flow::new(instance, sol.flow).map_err(|e| Error::Internal(format!("budget program returned {e}")))?;
    Ok(BudgetImplementation { lambda: sol.side_duals, flow, perturbed: sol.perturbed })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Implementability {
    pub implementable: bool,
    /// Prices under which the flow is an equilibrium, when implementable.
    pub lambda: Option<Vec<Rational>>,
    /// Travel time of the flow minus the best travel time reachable without
    /// exceeding the flow's own externalities, costs frozen at the flow.
    pub gap: Rational,
}

/// Decides whether some prices make `flow` an equilibrium.
///
/// Freezes `τ_e` and the externality rates at the flow's loads `u` and
/// minimises travel time subject to `Σ g_{e,j}(u)·x_e ≤ G_j(u)`. The flow is
/// implementable exactly when it attains the optimum; the prices are then the
/// multipliers of the externality rows.
pub fn check_implementable(instance: &Instance, flow: &Flow) -> Result<Implementability> {
    flow.check(instance)?;
    let u = flow.loads();
    let m = instance.edges.len();
    let nc = instance.commodities.len();
    let tau: Vec<Rational> = instance.edges.iter().zip(&u).map(|(e, x)| e.travel_time(x)).collect();
    let mut lp = flow_lp(instance, Sense::Minimize, &tau);
    let first = lp.rows.len();
    for j in 0..instance.num_classes() {
        let rates: Vec<Rational> = instance.edges.iter().zip(&u).map(|(e, x)| e.externality_rate(j, x)).collect();
        let g_u: Rational = rates.iter().zip(&u).map(|(g, x)| g * x).sum();
        let row = (0..nc)
            .flat_map(|i| rates.iter().enumerate().map(move |(e, g)| (i * m + e, g.clone())))
            .filter(|(_, g)| !g.is_zero())
            .collect();
        lp.add_row(row, RowKind::Le, g_u);
    }
    let (optimum, dual) = match solve_lp(&lp)? {
        LpOutcome::Optimal { objective, dual, .. } => (objective, dual),
        other => return Err(Error::Internal(format!("implementability program ended {other:?}"))),
    };
    let at_flow: Rational = tau.iter().zip(&u).map(|(t, x)| t * x).sum();
    let gap = at_flow - optimum;
    if gap.is_negative() {
        return Err(Error::Internal(format!("flow beats the optimum of its own program by {}", -gap)));
    }
    let implementable = gap.is_zero();
    let lambda = implementable.then(|| dual[first..].iter().map(|y| -y).collect());
    Ok(Implementability { implementable, lambda, gap })
}
