//! Equilibria at a fixed price vector.

mod expand;
pub(crate) mod qp;

use num_traits::Zero;

use crate::arith::Rational;
use crate::error::{Error, Result};
use crate::model::{Flow, Instance};

pub(crate) use expand::bellman_ford;
pub use expand::{collapse_edge, collapse_flow, solve_expanded_qp, CopyEdge, ExpandedNetwork, ExpandedSolution, SideRow};

/// Active support and active pieces of an equilibrium.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeState {
    /// `support[i][e]`: edge `e` lies on a cheapest path of commodity `i`.
    pub support: Vec<Vec<bool>>,
    /// Piece index `ℓ_e` with `σ_{e,ℓ} ≤ x_e < σ_{e,ℓ+1}`.
    pub active_parts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquilibriumResult {
    pub lambda: Vec<Rational>,
    pub flow: Flow,
    /// Shortest-path distances `φ[i][v]` from the commodity's source under
    /// `c^λ` at the equilibrium loads; `None` where the commodity cannot go.
    pub potentials: Vec<Vec<Option<Rational>>>,
    pub edge_state: EdgeState,
    /// Some copy had a zero effective slope, so the flow is the ε → 0⁺ limit
    /// selection among possibly many equilibria.
    pub perturbed: bool,
}

impl EquilibriumResult {
    /// Cheapest path cost per commodity.
    pub fn path_costs(&self, instance: &Instance) -> Vec<Rational> {
        instance
            .commodities
            .iter()
            .zip(&self.potentials)
            .map(|(c, phi)| phi[c.target].clone().expect("target reachable"))
            .collect()
    }
}

/// Computes a Wardrop equilibrium for prices `lambda` (one per class).
pub fn solve_equilibrium(instance: &Instance, lambda: &[Rational]) -> Result<EquilibriumResult> {
    let net = ExpandedNetwork::new(instance, lambda)?;
    let sol = solve_expanded_qp(&net, &instance.commodities)?;
    collapse_flow(&net, &sol)?;
    let flow = Flow::new(instance, sol.flow).map_err(|e| Error::Internal(format!("solver produced an invalid flow: {e}")))?;
    let loads = flow.loads();
    let potentials = shortest_potentials(instance, &loads, lambda);
    let edge_state = state_from_potentials(instance, &loads, lambda, &potentials);
    Ok(EquilibriumResult { lambda: lambda.to_vec(), flow, potentials, edge_state, perturbed: sol.perturbed })
}

/// Exact shortest distances from each commodity's source over the edges it
/// can use, with costs `c^λ_e(x_e)`.
pub fn shortest_potentials(instance: &Instance, loads: &[Rational], lambda: &[Rational]) -> Vec<Vec<Option<Rational>>> {
    let costs: Vec<Rational> = instance.edges.iter().zip(loads).map(|(e, x)| e.priced_cost(x, lambda)).collect();
    let ends: Vec<(usize, usize)> = instance.edges.iter().map(|e| (e.tail, e.head)).collect();
    (0..instance.commodities.len())
        .map(|i| {
            let useful = instance.useful_edges(i);
            let (mut dist, _) = bellman_ford(instance.nodes.len(), &ends, &useful, &costs, instance.commodities[i].source);
            // Keep labels only where the commodity can still reach its target.
            let reach = instance.reaching(instance.commodities[i].target);
            for (v, d) in dist.iter_mut().enumerate() {
                if !reach[v] {
                    *d = None;
                }
            }
            dist
        })
        .collect()
}

fn state_from_potentials(
    instance: &Instance,
    loads: &[Rational],
    lambda: &[Rational],
    potentials: &[Vec<Option<Rational>>],
) -> EdgeState {
    let support = potentials
        .iter()
        .enumerate()
        .map(|(i, phi)| {
            let useful = instance.useful_edges(i);
            instance
                .edges
                .iter()
                .enumerate()
                .map(|(ei, e)| {
                    if !useful[ei] {
                        return false;
                    }
                    match (&phi[e.tail], &phi[e.head]) {
                        (Some(pv), Some(pw)) => e.priced_cost(&loads[ei], lambda) == pw - pv,
                        _ => false,
                    }
                })
                .collect()
        })
        .collect();
    let active_parts = instance.edges.iter().zip(loads).map(|(e, x)| e.piece_index(x)).collect();
    EdgeState { support, active_parts }
}

/// Edge state of `flow` under prices `lambda`, with potentials recomputed as
/// shortest distances.
pub fn edge_state_of(instance: &Instance, flow: &Flow, lambda: &[Rational]) -> EdgeState {
    let loads = flow.loads();
    let potentials = shortest_potentials(instance, &loads, lambda);
    state_from_potentials(instance, &loads, lambda, &potentials)
}

pub fn extract_edge_state(instance: &Instance, result: &EquilibriumResult) -> EdgeState {
    edge_state_of(instance, &result.flow, &result.lambda)
}

/// Whether `(flow, φ)` satisfy complementarity: `c_e = φ_w − φ_v` where flow
/// runs, `c_e ≥ φ_w − φ_v` on every usable edge, `φ_s = 0`.
pub fn check_complementarity(instance: &Instance, result: &EquilibriumResult) -> bool {
    let loads = result.flow.loads();
    for (i, phi) in result.potentials.iter().enumerate() {
        if phi[instance.commodities[i].source].as_ref().is_none_or(|p| !p.is_zero()) {
            return false;
        }
        let useful = instance.useful_edges(i);
        for (ei, e) in instance.edges.iter().enumerate() {
            if !useful[ei] {
                continue;
            }
            let (Some(pv), Some(pw)) = (&phi[e.tail], &phi[e.head]) else { return false };
            let c = e.priced_cost(&loads[ei], &result.lambda);
            let gap = pw - pv;
            if c < gap || (!result.flow.value(i, ei).is_zero() && c != gap) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use crate::model::test_fixtures::*;
    use crate::model::verify_wardrop;

    #[test]
    fn pigou_at_one() {
        let p = pigou();
        let res = solve_equilibrium(&p, &[rat(1, 1)]).unwrap();
        assert_eq!(res.flow.loads(), vec![rat(1, 2), rat(1, 2)]);
        assert_eq!(res.path_costs(&p), vec![rat(3, 2)]);
        assert_eq!(res.flow.total_externality(&p), vec![rat(1, 2)]);
        assert_eq!(res.edge_state.support, vec![vec![true, true]]);
        assert_eq!(res.edge_state.active_parts, vec![0, 0]);
        assert!(check_complementarity(&p, &res));
        assert!(!res.perturbed);
    }

    #[test]
    fn pigou_at_three() {
        let p = pigou();
        let res = solve_equilibrium(&p, &[rat(3, 1)]).unwrap();
        assert_eq!(res.flow.loads(), vec![rat(0, 1), rat(1, 1)]);
        assert_eq!(res.edge_state.support, vec![vec![false, true]]);
        assert_eq!(res.edge_state.active_parts, vec![0, 0]);
    }

    #[test]
    fn braess_both_prices() {
        let b = braess();
        let res = solve_equilibrium(&b, &[rat(1, 1)]).unwrap();
        let ids = |v: &[Rational]| -> Vec<(String, Rational)> {
            b.edges.iter().zip(v).filter(|(_, x)| !x.is_zero()).map(|(e, x)| (e.id.clone(), x.clone())).collect()
        };
        assert_eq!(
            ids(&res.flow.loads()),
            vec![("sv".into(), rat(2, 1)), ("vw".into(), rat(2, 1)), ("wt".into(), rat(2, 1))]
        );
        assert_eq!(res.path_costs(&b), vec![rat(17, 4)]);
        assert_eq!(res.flow.total_externality(&b), vec![rat(8, 1)]);
        let on: Vec<&str> = b.edges.iter().zip(&res.edge_state.support[0]).filter(|(_, s)| **s).map(|(e, _)| e.id.as_str()).collect();
        assert_eq!(on, ["sv", "vw", "wt"]);
        assert!(verify_wardrop(&b, &res.flow, &res.lambda, 100).unwrap().holds);

        let res = solve_equilibrium(&b, &[rat(1, 10)]).unwrap();
        assert_eq!(res.flow.total_externality(&b), vec![rat(7, 1)]);
        assert_eq!(res.flow.loads(), vec![rat(1, 1), rat(1, 1), rat(0, 1), rat(1, 1), rat(1, 1)]);
        assert!(verify_wardrop(&b, &res.flow, &res.lambda, 100).unwrap().holds);
    }

    #[test]
    fn single_edge_carries_demand() {
        let t = single_edge();
        for l in [rat(0, 1), rat(7, 3)] {
            assert_eq!(solve_equilibrium(&t, &[l]).unwrap().flow.loads(), vec![rat(3, 1)]);
        }
    }

    #[test]
    fn step_toll_tie_is_split_evenly() {
        let f = step_toll();
        let res = solve_equilibrium(&f, &[rat(1, 1)]).unwrap();
        assert!(res.perturbed);
        assert_eq!(res.flow.loads(), vec![rat(1, 2), rat(1, 2)]);
        assert_eq!(solve_equilibrium(&f, &[rat(1, 2)]).unwrap().flow.loads(), vec![rat(1, 1), rat(0, 1)]);
        assert_eq!(solve_equilibrium(&f, &[rat(2, 1)]).unwrap().flow.loads(), vec![rat(0, 1), rat(1, 1)]);
    }

    #[test]
    fn two_commodities_solve_independently() {
        let d = two_commodity();
        let res = solve_equilibrium(&d, &[rat(1, 1)]).unwrap();
        assert_eq!(res.flow.loads(), vec![rat(1, 2), rat(1, 2), rat(3, 2), rat(1, 2)]);
        assert!(check_complementarity(&d, &res));
    }

    #[test]
    fn wrong_price_length_is_rejected() {
        assert!(solve_equilibrium(&pigou(), &[]).is_err());
        assert!(solve_equilibrium(&pigou(), &[rat(-1, 1)]).is_err());
    }
}
