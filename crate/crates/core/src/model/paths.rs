//! Path enumeration and a path-based equilibrium check for small networks.

use num_traits::Zero;

use super::flow::Flow;
use super::instance::Instance;
use crate::arith::Rational;
use crate::error::{Error, Result};

/// Default cap used by callers that have no better idea.
pub const DEFAULT_PATH_CAP: usize = 100_000;

/// All simple source→target paths of `commodity`, as edge-index sequences,
/// sorted lexicographically by edge id.
pub fn enumerate_paths(instance: &Instance, commodity: usize, cap: usize) -> Result<Vec<Vec<usize>>> {
    let c = &instance.commodities[commodity];
    let out = instance.out_edges();
    let mut paths = Vec::new();
    let mut on_path = vec![false; instance.nodes.len()];
    let mut stack: Vec<usize> = Vec::new();
    on_path[c.source] = true;
    dfs(instance, &out, c.source, c.target, &mut on_path, &mut stack, &mut paths, cap)?;
    paths.sort_by(|a, b| {
        let ka = a.iter().map(|&e| instance.edges[e].id.as_str());
        let kb = b.iter().map(|&e| instance.edges[e].id.as_str());
        ka.cmp(kb)
    });
    Ok(paths)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    instance: &Instance,
    out: &[Vec<usize>],
    v: usize,
    target: usize,
    on_path: &mut [bool],
    stack: &mut Vec<usize>,
    paths: &mut Vec<Vec<usize>>,
    cap: usize,
) -> Result<()> {
    if v == target {
        if paths.len() == cap {
            return Err(Error::PathCapExceeded { cap });
        }
        paths.push(stack.clone());
        return Ok(());
    }
    for &e in &out[v] {
        let w = instance.edges[e].head;
        if on_path[w] {
            continue;
        }
        on_path[w] = true;
        stack.push(e);
        dfs(instance, out, w, target, on_path, stack, paths, cap)?;
        stack.pop();
        on_path[w] = false;
    }
    Ok(())
}

/// A flow-carrying edge that no cheapest path uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WardropWitness {
    pub commodity: usize,
    /// Cheapest path through the offending edge.
    pub used_path: Vec<usize>,
    pub used_cost: Rational,
    /// A cheapest path of the commodity.
    pub better_path: Vec<usize>,
    pub better_cost: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WardropCheck {
    pub holds: bool,
    /// Cheapest path cost per commodity at the flow's loads.
    pub min_costs: Vec<Rational>,
    pub witness: Option<WardropWitness>,
}

/// Checks the equilibrium condition by explicit path enumeration.
///
/// Each edge carrying flow of commodity `i` must lie on a cheapest simple
/// path of `i`. Edges on cheapest paths are tight for the shortest-distance
/// labels, so every path decomposition of such a flow uses only cheapest
/// paths.
pub fn verify_wardrop(instance: &Instance, flow: &Flow, lambda: &[Rational], cap: usize) -> Result<WardropCheck> {
    flow.check(instance)?;
    instance.check_lambda(lambda)?;
    let loads = flow.loads();
    let costs: Vec<Rational> =
        instance.edges.iter().zip(&loads).map(|(e, x)| e.priced_cost(x, lambda)).collect();
    let mut min_costs = Vec::with_capacity(instance.commodities.len());
    let mut witness = None;
    for i in 0..instance.commodities.len() {
        let paths = enumerate_paths(instance, i, cap)?;
        let priced: Vec<Rational> = paths.iter().map(|p| p.iter().map(|&e| &costs[e]).sum()).collect();
        let (best, best_cost) = priced
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.cmp(b.1))
            .map(|(k, c)| (k, c.clone()))
            .expect("validated instances have a path per commodity");
        if witness.is_none() {
            let mut on_cheapest = vec![false; instance.edges.len()];
            for (p, c) in paths.iter().zip(&priced) {
                if *c == best_cost {
                    for &e in p {
                        on_cheapest[e] = true;
                    }
                }
            }
            let bad = (0..instance.edges.len()).find(|&e| !flow.value(i, e).is_zero() && !on_cheapest[e]);
            if let Some(e) = bad {
                // Flow on e reaches the target, so some simple path uses e.
                let (k, c) = paths
                    .iter()
                    .zip(&priced)
                    .enumerate()
                    .filter(|(_, (p, _))| p.contains(&e))
                    .min_by(|a, b| a.1 .1.cmp(b.1 .1))
                    .map(|(k, (_, c))| (k, c.clone()))
                    .ok_or_else(|| Error::InvalidFlow(format!("edge `{}` lies on no path", instance.edges[e].id)))?;
                witness = Some(WardropWitness {
                    commodity: i,
                    used_path: paths[k].clone(),
                    used_cost: c,
                    better_path: paths[best].clone(),
                    better_cost: best_cost.clone(),
                });
            }
        }
        min_costs.push(best_cost);
    }
    Ok(WardropCheck { holds: witness.is_none(), min_costs, witness })
}

/// Edge ids joined by `-`, for messages.
pub fn path_label(instance: &Instance, path: &[usize]) -> String {
    path.iter().map(|&e| instance.edges[e].id.as_str()).collect::<Vec<_>>().join("-")
}
