//! Parallel-copy expansion of piecewise-affine edges and its convex QP.

use num_traits::{One, Zero};

use super::qp::{self, Qp};
use crate::arith::{LexRational, Rational};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpOutcome, RowKind, Sense};
use crate::model::{Commodity, Instance};

/// Copy `k` of an edge: cost `slope·y + offset` for `0 ≤ y ≤ capacity`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CopyEdge {
    pub edge: usize,
    pub piece: usize,
    /// Load at which this copy starts to fill.
    pub start: Rational,
    /// Zero slopes carry a unit ε part.
    pub slope: LexRational,
    pub offset: Rational,
    pub capacity: Option<Rational>,
}

/// Linear side constraint `Σ_e coeffs[e]·x_e ≤ bound` on edge loads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideRow {
    pub coeffs: Vec<Rational>,
    pub bound: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedNetwork {
    pub num_nodes: usize,
    /// `(tail, head)` of every original edge.
    pub edges: Vec<(usize, usize)>,
    /// Grouped by edge, in piece order.
    pub copies: Vec<CopyEdge>,
    pub side_rows: Vec<SideRow>,
}

fn perturbed(slope: Rational) -> LexRational {
    if slope.is_zero() {
        LexRational::new(slope, Rational::one())
    } else {
        LexRational::standard(slope)
    }
}

impl ExpandedNetwork {
    /// Copies for costs `c^λ`. Pieces starting beyond the total demand are
    /// left out since no load can reach them.
    pub fn new(instance: &Instance, lambda: &[Rational]) -> Result<ExpandedNetwork> {
        instance.check_lambda(lambda)?;
        let demand = instance.total_demand();
        let mut copies = Vec::new();
        for (ei, e) in instance.edges.iter().enumerate() {
            for (k, p) in e.pieces.iter().enumerate() {
                if p.breakpoint > demand {
                    break;
                }
                let capacity = e.pieces.get(k + 1).map(|next| &next.breakpoint - &p.breakpoint);
                copies.push(CopyEdge {
                    edge: ei,
                    piece: k,
                    start: p.breakpoint.clone(),
                    slope: perturbed(e.effective_slope(k, lambda)),
                    offset: e.priced_cost(&p.breakpoint, lambda),
                    capacity,
                });
            }
        }
        Ok(ExpandedNetwork {
            num_nodes: instance.nodes.len(),
            edges: instance.edges.iter().map(|e| (e.tail, e.head)).collect(),
            copies,
            side_rows: Vec::new(),
        })
    }

    /// Travel-time copies plus one side row `G_j(x) ≤ B_j` per class.
    pub fn with_budget(instance: &Instance, budget: &[Rational]) -> Result<ExpandedNetwork> {
        instance.require_constant_externality("a budget program")?;
        if budget.len() != instance.num_classes() {
            return Err(Error::Unsupported(format!(
                "expected {} budget entries, got {}",
                instance.num_classes(),
                budget.len()
            )));
        }
        let zero = vec![Rational::zero(); instance.num_classes()];
        let mut net = ExpandedNetwork::new(instance, &zero)?;
        net.side_rows = budget
            .iter()
            .enumerate()
            .map(|(j, b)| SideRow {
                coeffs: instance.edges.iter().map(|e| e.externality[j].constant.clone()).collect(),
                bound: b.clone(),
            })
            .collect();
        Ok(net)
    }

    fn useful(&self, c: &Commodity) -> Vec<bool> {
        let reach = |start: usize, fwd: bool| {
            let mut seen = vec![false; self.num_nodes];
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &(t, h) in &self.edges {
                    let (a, b) = if fwd { (t, h) } else { (h, t) };
                    if a == v && !seen[b] {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
            seen
        };
        let f = reach(c.source, true);
        let b = reach(c.target, false);
        self.edges.iter().map(|&(t, h)| f[t] && b[h]).collect()
    }
}

/// Optimal point of the expanded potential minimisation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedSolution {
    /// `x[i][e]` on original edges.
    pub flow: Vec<Vec<Rational>>,
    /// One load per entry of `copies`.
    pub copy_loads: Vec<Rational>,
    /// Node duals `π[i][v]`, zero at the target and at nodes the commodity
    /// cannot use. Copy costs satisfy `ã(y) = π_w − π_v` when `0 < y < u`,
    /// `≥` when `y = 0` and `≤` when `y = u`.
    pub potentials: Vec<Vec<Rational>>,
    /// Common marginal cost of each edge's copies (`None` for unused edges).
    pub edge_marginals: Vec<Option<Rational>>,
    /// Multipliers of the side rows, all `≥ 0`.
    pub side_duals: Vec<Rational>,
    /// Whether some copy had a zero slope and needed the ε-perturbation.
    pub perturbed: bool,
}

struct Layout {
    x: Vec<Vec<Option<usize>>>,
    y: Vec<Option<usize>>,
    cons: Vec<Vec<Option<usize>>>,
    coupling: Vec<Option<usize>>,
    side: Vec<usize>,
    nvars: usize,
}

fn build(net: &ExpandedNetwork, commodities: &[Commodity]) -> (Layout, Qp, Vec<Vec<bool>>) {
    let m = net.edges.len();
    let useful: Vec<Vec<bool>> = commodities.iter().map(|c| net.useful(c)).collect();
    let mut nvars = 0;
    let mut next = || {
        nvars += 1;
        nvars - 1
    };
    let x: Vec<Vec<Option<usize>>> =
        useful.iter().map(|u| u.iter().map(|&ok| ok.then(&mut next)).collect()).collect();
    let used: Vec<bool> = (0..m).map(|e| useful.iter().any(|u| u[e])).collect();
    let y: Vec<Option<usize>> = net.copies.iter().map(|c| used[c.edge].then(&mut next)).collect();
    let s: Vec<usize> = net.side_rows.iter().map(|_| next()).collect();

    let mut rows: Vec<Vec<(usize, Rational)>> = Vec::new();
    let mut rhs = Vec::new();
    let mut cons = Vec::new();
    for (i, c) in commodities.iter().enumerate() {
        let mut touched = vec![false; net.num_nodes];
        for (e, &(t, h)) in net.edges.iter().enumerate() {
            if useful[i][e] {
                touched[t] = true;
                touched[h] = true;
            }
        }
        let mut idx = vec![None; net.num_nodes];
        for v in 0..net.num_nodes {
            if !touched[v] || v == c.target {
                continue;
            }
            let mut row = Vec::new();
            for (e, &(t, h)) in net.edges.iter().enumerate() {
                if let Some(var) = x[i][e] {
                    if t == v {
                        row.push((var, Rational::one()));
                    } else if h == v {
                        row.push((var, -Rational::one()));
                    }
                }
            }
            idx[v] = Some(rows.len());
            rows.push(row);
            rhs.push(if v == c.source { c.demand.clone() } else { Rational::zero() });
        }
        cons.push(idx);
    }
    let mut coupling = vec![None; m];
    for e in 0..m {
        if !used[e] {
            continue;
        }
        let mut row: Vec<(usize, Rational)> =
            net.copies.iter().zip(&y).filter(|(c, _)| c.edge == e).filter_map(|(_, v)| v.map(|v| (v, Rational::one()))).collect();
        for xi in &x {
            if let Some(v) = xi[e] {
                row.push((v, -Rational::one()));
            }
        }
        coupling[e] = Some(rows.len());
        rows.push(row);
        rhs.push(Rational::zero());
    }
    let mut side = Vec::new();
    for (j, sr) in net.side_rows.iter().enumerate() {
        let mut row: Vec<(usize, Rational)> = net
            .copies
            .iter()
            .zip(&y)
            .filter_map(|(c, v)| v.filter(|_| !sr.coeffs[c.edge].is_zero()).map(|v| (v, sr.coeffs[c.edge].clone())))
            .collect();
        row.push((s[j], Rational::one()));
        side.push(rows.len());
        rows.push(row);
        rhs.push(sr.bound.clone());
    }

    let mut hessian = vec![Rational::zero(); nvars];
    let mut linear = vec![Rational::zero(); nvars];
    let mut upper = vec![None; nvars];
    for (c, v) in net.copies.iter().zip(&y) {
        if let Some(v) = *v {
            hessian[v] = c.slope.standard.clone();
            linear[v] = c.offset.clone();
            upper[v] = c.capacity.clone();
        }
    }
    let qp = Qp { hessian, linear, rows, rhs, upper, fixed: vec![false; nvars] };
    (Layout { x, y, cons, coupling, side, nvars }, qp, useful)
}

/// Routes every commodity along one cheapest path at empty-network copy
/// costs and fills copies in piece order. `None` if a copy runs out of room.
fn all_or_nothing(net: &ExpandedNetwork, commodities: &[Commodity], lay: &Layout, useful: &[Vec<bool>]) -> Option<Vec<Rational>> {
    let m = net.edges.len();
    let mut cost0: Vec<Option<Rational>> = vec![None; m];
    for c in &net.copies {
        if cost0[c.edge].as_ref().is_none_or(|v| c.offset < *v) {
            cost0[c.edge] = Some(c.offset.clone());
        }
    }
    let mut z = vec![Rational::zero(); lay.nvars];
    let mut loads = vec![Rational::zero(); m];
    for (i, c) in commodities.iter().enumerate() {
        let costs: Vec<Rational> = cost0.iter().map(|v| v.clone().unwrap_or_else(Rational::zero)).collect();
        let (_, pred) = bellman_ford(net.num_nodes, &net.edges, &useful[i], &costs, c.source);
        let mut v = c.target;
        while v != c.source {
            let e = pred[v]?;
            z[lay.x[i][e]?] += &c.demand;
            loads[e] += &c.demand;
            v = net.edges[e].0;
        }
    }
    for (e, load) in loads.iter().enumerate() {
        let mut left = load.clone();
        for (c, v) in net.copies.iter().zip(&lay.y) {
            if c.edge != e || left.is_zero() {
                continue;
            }
            let take = match &c.capacity {
                Some(u) if *u < left => u.clone(),
                _ => left.clone(),
            };
            left -= &take;
            z[(*v)?] = take;
        }
        if !left.is_zero() {
            return None;
        }
    }
    Some(z)
}

fn lp_start(qp: &Qp) -> Result<Vec<Rational>> {
    let mut lp = LinearProgram::new(Sense::Minimize, qp.linear.clone());
    for (row, b) in qp.rows.iter().zip(&qp.rhs) {
        lp.add_row(row.clone(), RowKind::Eq, b.clone());
    }
    for (j, u) in qp.upper.iter().enumerate() {
        lp.set_bounds(j, Some(Rational::zero()), u.clone());
    }
    match solve_lp(&lp)? {
        LpOutcome::Optimal { primal, .. } => Ok(primal),
        LpOutcome::Infeasible { certificate } => Err(Error::InfeasibleBudget {
            message: "no feasible flow satisfies the side constraints".into(),
            certificate,
        }),
        LpOutcome::Unbounded { .. } => Err(Error::Internal("start LP unbounded".into())),
    }
}

/// Exact shortest distances and predecessor edges from `source` using only
/// edges flagged in `usable`. Costs must be nonnegative.
pub(crate) fn bellman_ford(
    num_nodes: usize,
    edges: &[(usize, usize)],
    usable: &[bool],
    costs: &[Rational],
    source: usize,
) -> (Vec<Option<Rational>>, Vec<Option<usize>>) {
    let mut dist: Vec<Option<Rational>> = vec![None; num_nodes];
    let mut pred = vec![None; num_nodes];
    dist[source] = Some(Rational::zero());
    for _ in 0..num_nodes {
        let mut changed = false;
        for (e, &(t, h)) in edges.iter().enumerate() {
            if !usable[e] {
                continue;
            }
            let Some(dt) = &dist[t] else { continue };
            let cand = dt + &costs[e];
            if dist[h].as_ref().is_none_or(|d| cand < *d) {
                dist[h] = Some(cand);
                pred[h] = Some(e);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (dist, pred)
}

/// Minimises the expanded potential `Σ (offset·y + ½·slope·y²)` over feasible
/// flows.
///
/// Copies with zero slope are resolved as the limit ε → 0⁺ of slope ε: a
/// second solve keeps the optimal face of the unperturbed problem and
/// minimises `½ Σ y²` over those copies.
pub fn solve_expanded_qp(net: &ExpandedNetwork, commodities: &[Commodity]) -> Result<ExpandedSolution> {
    let (lay, qp_a, useful) = build(net, commodities);
    let start = if net.side_rows.is_empty() {
        match all_or_nothing(net, commodities, &lay, &useful) {
            Some(z) => z,
            None => lp_start(&qp_a)?,
        }
    } else {
        lp_start(&qp_a)?
    };
    let phase_a = qp::minimize(&qp_a, start)?;

    let flat: Vec<usize> = net
        .copies
        .iter()
        .zip(&lay.y)
        .filter(|(c, v)| v.is_some() && !c.slope.epsilon.is_zero())
        .map(|(_, v)| v.unwrap())
        .collect();
    let perturbed = !flat.is_empty();
    let z = if perturbed {
        let mut qp_b = qp_a.clone();
        let mut objective_row = Vec::new();
        let mut level = Rational::zero();
        for j in 0..lay.nvars {
            if qp_a.hessian[j].is_positive() {
                qp_b.fixed[j] = true;
            } else if !qp_a.linear[j].is_zero() {
                objective_row.push((j, qp_a.linear[j].clone()));
                level += &qp_a.linear[j] * &phase_a.z[j];
            }
        }
        if !objective_row.is_empty() {
            qp_b.rows.push(objective_row);
            qp_b.rhs.push(level);
        }
        qp_b.hessian = vec![Rational::zero(); lay.nvars];
        for (c, v) in net.copies.iter().zip(&lay.y) {
            if let Some(v) = v {
                qp_b.hessian[*v] = c.slope.epsilon.clone();
            }
        }
        qp_b.linear = vec![Rational::zero(); lay.nvars];
        qp::minimize(&qp_b, phase_a.z.clone())?.z
    } else {
        phase_a.z.clone()
    };

    let nu = &phase_a.duals;
    let flow = lay
        .x
        .iter()
        .map(|row| row.iter().map(|v| v.map_or_else(Rational::zero, |v| z[v].clone())).collect())
        .collect();
    let copy_loads = lay.y.iter().map(|v| v.map_or_else(Rational::zero, |v| z[v].clone())).collect();
    let potentials = lay
        .cons
        .iter()
        .map(|idx| idx.iter().map(|r| r.map_or_else(Rational::zero, |r| nu[r].clone())).collect())
        .collect();
    let edge_marginals = lay.coupling.iter().map(|r| r.map(|r| -&nu[r])).collect();
    let side_duals = lay.side.iter().map(|&r| nu[r].clone()).collect();
    Ok(ExpandedSolution { flow, copy_loads, potentials, edge_marginals, side_duals, perturbed })
}

/// Load and active piece of one edge from its copy loads, checking that
/// copies fill in piece order. A later copy may carry flow early only when
/// its cost ties with the unfilled earlier copy.
pub fn collapse_edge(copies: &[&CopyEdge], loads: &[Rational]) -> Result<(Rational, usize)> {
    let total: Rational = loads.iter().sum();
    for k in 1..copies.len() {
        if loads[k].is_zero() {
            continue;
        }
        let prev = copies[k - 1];
        let full = prev.capacity.as_ref().is_some_and(|u| loads[k - 1] == *u);
        let tied = &prev.slope.standard * &loads[k - 1] + &prev.offset == copies[k].offset;
        if !full && !tied {
            return Err(Error::Internal(format!(
                "copy {} of edge {} carries flow before copy {} is full",
                copies[k].piece,
                copies[k].edge,
                prev.piece
            )));
        }
    }
    let part = copies.iter().rev().find(|c| c.start <= total).map_or(0, |c| c.piece);
    Ok((total, part))
}

/// Edge loads `x_e = Σ_k ỹ_{e_k}` and active pieces, after the fill-order
/// check.
pub fn collapse_flow(net: &ExpandedNetwork, sol: &ExpandedSolution) -> Result<Vec<(Rational, usize)>> {
    (0..net.edges.len())
        .map(|e| {
            let (copies, loads): (Vec<&CopyEdge>, Vec<Rational>) = net
                .copies
                .iter()
                .zip(&sol.copy_loads)
                .filter(|(c, _)| c.edge == e)
                .map(|(c, y)| (c, y.clone()))
                .unzip();
            collapse_edge(&copies, &loads)
        })
        .collect()
}
