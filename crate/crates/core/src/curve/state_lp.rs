//! The linear program over `(x, π, λ)` describing one edge state.

use num_traits::{One, Zero};

use crate::arith::Rational;
use crate::equilibrium::EdgeState;
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpOutcome, RowKind, Sense};
use crate::model::Instance;

/// LP for a state together with its variable layout.
#[derive(Debug, Clone)]
pub struct StateLp {
    pub lp: LinearProgram,
    /// Column of `x_{i,e}` (absent for edges the commodity cannot use).
    pub x: Vec<Vec<Option<usize>>>,
    /// Column of `π_{i,v}`; the source is pinned to zero and has none.
    pub pi: Vec<Vec<Option<usize>>>,
    pub lambda: usize,
}

impl StateLp {
    /// Builds the program for `state`:
    /// `π_w − π_v = c^λ_e(x_e)` on support pairs, `≤` on other usable pairs,
    /// `x_{i,e} = 0` off the support, loads within the active pieces, flow
    /// conservation and `λ ≥ 0`.
    pub fn new(instance: &Instance, state: &EdgeState, sense: Sense) -> Result<StateLp> {
        instance.require_single_class("an edge-state program")?;
        instance.require_constant_externality("an edge-state program")?;
        let nc = instance.commodities.len();
        let m = instance.edges.len();
        if state.support.len() != nc
            || state.support.iter().any(|r| r.len() != m)
            || state.active_parts.len() != m
        {
            return Err(Error::Internal("edge state does not match the instance".into()));
        }
        let mut ncols = 0;
        let mut col = || {
            ncols += 1;
            ncols - 1
        };
        let useful: Vec<Vec<bool>> = (0..nc).map(|i| instance.useful_edges(i)).collect();
        let x: Vec<Vec<Option<usize>>> =
            useful.iter().map(|u| u.iter().map(|&ok| ok.then(&mut col)).collect()).collect();
        let mut pi = Vec::with_capacity(nc);
        for (i, c) in instance.commodities.iter().enumerate() {
            let mut nodes = vec![false; instance.nodes.len()];
            for (e, edge) in instance.edges.iter().enumerate() {
                if useful[i][e] {
                    nodes[edge.tail] = true;
                    nodes[edge.head] = true;
                }
            }
            pi.push((0..instance.nodes.len()).map(|v| (nodes[v] && v != c.source).then(&mut col)).collect::<Vec<_>>());
        }
        let lambda = col();

        let mut objective = vec![Rational::zero(); ncols];
        objective[lambda] = Rational::one();
        let mut lp = LinearProgram::new(sense, objective);
        for row in &pi {
            for v in row.iter().flatten() {
                lp.set_bounds(*v, None, None);
            }
        }
        for (i, row) in x.iter().enumerate() {
            for (e, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    if !state.support[i][e] {
                        lp.set_bounds(*v, Some(Rational::zero()), Some(Rational::zero()));
                    }
                }
            }
        }

        for (e, edge) in instance.edges.iter().enumerate() {
            let l = state.active_parts[e];
            let Some(piece) = edge.pieces.get(l) else {
                return Err(Error::Internal(format!("active part {l} out of range on edge `{}`", edge.id)));
            };
            let load: Vec<(usize, Rational)> = x.iter().filter_map(|r| r[e]).map(|v| (v, Rational::one())).collect();
            lp.add_row(load.clone(), RowKind::Ge, piece.breakpoint.clone());
            if let Some(next) = edge.pieces.get(l + 1) {
                lp.add_row(load.clone(), RowKind::Le, next.breakpoint.clone());
            }
            // a·Σx + g·λ + π_v − π_w  (= or ≥)  −b
            let g = &edge.externality[0].constant;
            for i in 0..nc {
                if !useful[i][e] {
                    continue;
                }
                let mut row: Vec<(usize, Rational)> = Vec::new();
                if !piece.slope.is_zero() {
                    row.extend(load.iter().map(|(v, _)| (*v, piece.slope.clone())));
                }
                if !g.is_zero() {
                    row.push((lambda, g.clone()));
                }
                if let Some(pv) = pi[i][edge.tail] {
                    row.push((pv, Rational::one()));
                }
                if let Some(pw) = pi[i][edge.head] {
                    row.push((pw, -Rational::one()));
                }
                let kind = if state.support[i][e] { RowKind::Eq } else { RowKind::Ge };
                lp.add_row(row, kind, -&piece.offset);
            }
        }

        for (i, c) in instance.commodities.iter().enumerate() {
            for v in 0..instance.nodes.len() {
                if v == c.target || (pi[i][v].is_none() && v != c.source) {
                    continue;
                }
                let mut row = Vec::new();
                for (e, edge) in instance.edges.iter().enumerate() {
                    if let Some(var) = x[i][e] {
                        if edge.tail == v {
                            row.push((var, Rational::one()));
                        } else if edge.head == v {
                            row.push((var, -Rational::one()));
                        }
                    }
                }
                let rhs = if v == c.source { c.demand.clone() } else { Rational::zero() };
                lp.add_row(row, RowKind::Eq, rhs);
            }
        }
        Ok(StateLp { lp, x, pi, lambda })
    }

    /// `x[i][e]` read from a primal vector (or a ray).
    pub fn flow_values(&self, v: &[Rational]) -> Vec<Vec<Rational>> {
        self.x
            .iter()
            .map(|row| row.iter().map(|c| c.map_or_else(Rational::zero, |c| v[c].clone())).collect())
            .collect()
    }
}

/// Solves the edge-state program for `state` in the given sense. The outcome
/// is infeasible exactly when no price admits this state; an unbounded
/// maximisation means the state persists for all large prices.
pub fn state_interval(instance: &Instance, state: &EdgeState, sense: Sense) -> Result<LpOutcome> {
    solve_lp(&StateLp::new(instance, state, sense)?.lp)
}
