//! The piecewise-affine map from a scalar price to an equilibrium flow.

mod export;
mod state_lp;

use num_traits::{One, Zero};

use crate::arith::{common_denominator, Rational};
use crate::equilibrium::{solve_equilibrium, EdgeState};
use crate::error::{Error, Result};
use crate::lp::{LpOutcome, Sense};
use crate::model::{Flow, Instance};

pub use export::{curve_csv, curve_json, curve_svg};
pub use state_lp::{state_interval, StateLp};

/// Start of the piece taken from `iv` at `cur`. Keeps the previous piece's end
/// when the state's program admits it there, so commodity splits do not jump
/// needlessly at breakpoints; any two points of one state's program are joined
/// by equilibria.
fn join_flow(instance: &Instance, iv: &StateInterval, prev: Option<&Segment>, cur: &Rational) -> Result<Flow> {
    let Some(prev) = prev else { return Ok(iv.flow_at(cur)) };
    let mut s = StateLp::new(instance, &iv.state, Sense::Minimize)?;
    for (i, row) in prev.flow_hi.values().iter().enumerate() {
        for (e, v) in row.iter().enumerate() {
            match s.x[i][e] {
                Some(c) => s.lp.set_bounds(c, Some(v.clone()), Some(v.clone())),
                None if v.is_zero() => {}
                None => return Ok(iv.flow_at(cur)),
            }
        }
    }
    s.lp.set_bounds(s.lambda, Some(cur.clone()), Some(cur.clone()));
    Ok(match crate::lp::solve_lp(&s.lp)? {
        LpOutcome::Optimal { .. } => prev.flow_hi.clone(),
        _ => iv.flow_at(cur),
    })
}

/// Price range over which one edge state persists, with the extreme flows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateInterval {
    pub state: EdgeState,
    pub lambda_lo: Rational,
    /// `None` when the state persists for all larger prices.
    pub lambda_hi: Option<Rational>,
    pub flow_lo: Flow,
    pub flow_hi: Option<Flow>,
    /// Flow change per unit price beyond `lambda_lo`, when unbounded.
    pub ray: Option<Vec<Vec<Rational>>>,
}

impl StateInterval {
    pub fn contains(&self, lambda: &Rational) -> bool {
        self.lambda_lo <= *lambda && self.lambda_hi.as_ref().is_none_or(|h| lambda <= h)
    }

    /// The affine flow of this state at `lambda` (which must lie inside).
    pub fn flow_at(&self, lambda: &Rational) -> Flow {
        match (&self.lambda_hi, &self.flow_hi, &self.ray) {
            (Some(hi), Some(fhi), _) => {
                if *hi == self.lambda_lo {
                    return self.flow_lo.clone();
                }
                let w = (lambda - &self.lambda_lo) / (hi - &self.lambda_lo);
                Flow::combine(&self.flow_lo, &(Rational::one() - &w), fhi, &w)
            }
            (_, _, Some(ray)) => shift(&self.flow_lo, ray, &(lambda - &self.lambda_lo)),
            _ => self.flow_lo.clone(),
        }
    }
}

fn shift(base: &Flow, ray: &[Vec<Rational>], t: &Rational) -> Flow {
    let values = base
        .values()
        .iter()
        .zip(ray)
        .map(|(b, r)| b.iter().zip(r).map(|(x, d)| if d.is_zero() { x.clone() } else { x + d * t }).collect())
        .collect();
    Flow::from_values_unchecked(values)
}

/// Interval of `state`, or `None` if no price admits it.
pub fn interval_of_state(instance: &Instance, state: &EdgeState) -> Result<Option<StateInterval>> {
    let lo_lp = StateLp::new(instance, state, Sense::Minimize)?;
    let (lambda_lo, flow_lo) = match crate::lp::solve_lp(&lo_lp.lp)? {
        LpOutcome::Optimal { primal, .. } => (primal[lo_lp.lambda].clone(), lo_lp.flow_values(&primal)),
        LpOutcome::Infeasible { .. } => return Ok(None),
        LpOutcome::Unbounded { .. } => return Err(Error::Internal("price minimisation unbounded".into())),
    };
    let hi_lp = StateLp::new(instance, state, Sense::Maximize)?;
    let flow_lo = to_flow(instance, flow_lo)?;
    match crate::lp::solve_lp(&hi_lp.lp)? {
        LpOutcome::Optimal { primal, .. } => Ok(Some(StateInterval {
            state: state.clone(),
            lambda_lo,
            lambda_hi: Some(primal[hi_lp.lambda].clone()),
            flow_lo,
            flow_hi: Some(to_flow(instance, hi_lp.flow_values(&primal))?),
            ray: None,
        })),
        LpOutcome::Unbounded { ray, .. } => {
            let dl = ray[hi_lp.lambda].clone();
            let per_unit = hi_lp
                .flow_values(&ray)
                .into_iter()
                .map(|row| row.into_iter().map(|d| d / &dl).collect())
                .collect();
            Ok(Some(StateInterval { state: state.clone(), lambda_lo, lambda_hi: None, flow_lo, flow_hi: None, ray: Some(per_unit) }))
        }
        LpOutcome::Infeasible { .. } => Err(Error::Internal("edge-state program lost feasibility".into())),
    }
}

fn to_flow(instance: &Instance, values: Vec<Vec<Rational>>) -> Result<Flow> {
    Flow::new(instance, values).map_err(|e| Error::Internal(format!("edge-state program returned {e}")))
}

/// Solves at `lambda` and returns the interval of the resulting state, plus
/// whether the solve needed the zero-slope perturbation.
pub fn probe(instance: &Instance, lambda: &Rational) -> Result<(StateInterval, bool)> {
    let eq = solve_equilibrium(instance, std::slice::from_ref(lambda))?;
    let iv = interval_of_state(instance, &eq.edge_state)?
        .ok_or_else(|| Error::Internal(format!("state of the equilibrium at {lambda} has an empty interval")))?;
    if !iv.contains(lambda) {
        return Err(Error::Internal(format!("interval of the state at {lambda} does not contain it")));
    }
    Ok((iv, eq.perturbed))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Breakpoint {
    pub lambda: Rational,
    pub flow: Flow,
}

/// One affine piece `[lambda_lo, lambda_hi]` of the curve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub lambda_lo: Rational,
    pub lambda_hi: Rational,
    pub flow_lo: Flow,
    pub flow_hi: Flow,
}

/// `x(λ) = base + (λ − lambda_start)·ray` for `λ ≥ lambda_start`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Terminal {
    pub lambda_start: Rational,
    pub base: Flow,
    pub ray: Vec<Vec<Rational>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquilibriumCurve {
    /// Starts at `λ = 0`; strictly increasing.
    pub breakpoints: Vec<Breakpoint>,
    pub segments: Vec<Segment>,
    pub terminal: Terminal,
    /// Every state interval discovered while tracing, in discovery order.
    pub intervals: Vec<StateInterval>,
    /// Some equilibrium needed the zero-slope perturbation; the curve is
    /// then one valid selection among several equilibria.
    pub perturbed: bool,
    pub lambda_max: Rational,
}

/// Upper bound on the largest breakpoint: `s·Σ_e max_k(b_{e,k} + a_{e,k}·D) + 1`
/// where `D` is the total demand and `s` turns every `g_e` into an integer.
/// Zero when every commodity sees the same externality on all its paths.
pub fn lambda_max(instance: &Instance) -> Result<Rational> {
    instance.require_single_class("the price bound")?;
    instance.require_constant_externality("the price bound")?;
    if (0..instance.commodities.len()).all(|i| uniform_externality(instance, i)) {
        return Ok(Rational::zero());
    }
    let s = Rational::from_integer(common_denominator(instance.edges.iter().map(|e| &e.externality[0].constant)));
    let d = instance.total_demand();
    let sum: Rational = instance
        .edges
        .iter()
        .map(|e| e.pieces.iter().map(|p| &p.offset + &p.slope * &d).max().expect("nonempty pieces"))
        .sum();
    Ok(s * sum + Rational::one())
}

/// Whether all source→target paths of commodity `i` carry the same total
/// externality, i.e. `g` is a potential difference on the usable edges.
fn uniform_externality(instance: &Instance, i: usize) -> bool {
    let useful = instance.useful_edges(i);
    let mut psi: Vec<Option<Rational>> = vec![None; instance.nodes.len()];
    psi[instance.commodities[i].source] = Some(Rational::zero());
    let mut changed = true;
    while changed {
        changed = false;
        for (e, edge) in instance.edges.iter().enumerate() {
            if !useful[e] {
                continue;
            }
            let g = &edge.externality[0].constant;
            match (&psi[edge.tail], &psi[edge.head]) {
                (Some(a), Some(b)) => {
                    if &(a + g) != b {
                        return false;
                    }
                }
                (Some(a), None) => {
                    psi[edge.head] = Some(a + g);
                    changed = true;
                }
                (None, Some(b)) => {
                    psi[edge.tail] = Some(b - g);
                    changed = true;
                }
                (None, None) => {}
            }
        }
    }
    true
}

/// `2^{|I||E|}·Π_e (K_e + 1)`, saturating.
pub fn state_count_bound(instance: &Instance) -> u128 {
    let mut b: u128 = 1;
    for _ in 0..instance.commodities.len() * instance.edges.len() {
        b = b.saturating_mul(2);
    }
    for e in &instance.edges {
        b = b.saturating_mul(e.pieces.len() as u128);
    }
    b
}

const PROBE_CAP: u128 = 1 << 20;

/// Traces the whole curve on `[0, ∞)`.
///
/// Starting from the states at `0` and at `lambda_max`, each round probes the
/// middle of the first uncovered gap (or one past the covered range when
/// nothing lies beyond) until a state persists for all larger prices.
pub fn trace_curve(instance: &Instance) -> Result<EquilibriumCurve> {
    instance.require_single_class("curve tracing")?;
    instance.require_constant_externality("curve tracing")?;
    let lmax = lambda_max(instance)?;
    let cap = state_count_bound(instance).min(PROBE_CAP) as usize;

    let mut intervals: Vec<StateInterval> = Vec::new();
    let mut perturbed = false;
    let mut add = |iv: (StateInterval, bool), intervals: &mut Vec<StateInterval>| {
        perturbed |= iv.1;
        intervals.push(iv.0);
    };
    add(probe(instance, &Rational::zero())?, &mut intervals);
    if !intervals[0].contains(&lmax) {
        add(probe(instance, &lmax)?, &mut intervals);
    }
    loop {
        let mut order: Vec<&StateInterval> = intervals.iter().collect();
        order.sort_by(|a, b| a.lambda_lo.cmp(&b.lambda_lo));
        let mut end = Some(Rational::zero());
        let mut next_lo = None;
        for iv in order {
            let Some(e) = &end else { break };
            if iv.lambda_lo <= *e {
                end = match &iv.lambda_hi {
                    None => None,
                    Some(h) => Some(h.clone().max(e.clone())),
                };
            } else {
                next_lo = Some(iv.lambda_lo.clone());
                break;
            }
        }
        let Some(end) = end else { break };
        if intervals.len() >= cap {
            return Err(Error::Internal(format!("curve tracing exceeded {cap} state intervals")));
        }
        let at = match next_lo {
            Some(n) => (&end + &n) / Rational::from(2),
            None => &end + Rational::one(),
        };
        add(probe(instance, &at)?, &mut intervals);
    }

    // Sweep: from the current price take the interval reaching furthest.
    let mut cur = Rational::zero();
    let mut segments = Vec::new();
    let terminal;
    loop {
        let best = intervals
            .iter()
            .filter(|iv| iv.lambda_lo <= cur && iv.lambda_hi.as_ref().is_none_or(|h| *h > cur))
            .fold(None::<&StateInterval>, |acc, iv| match acc {
                None => Some(iv),
                Some(a) => match (&a.lambda_hi, &iv.lambda_hi) {
                    (None, _) => Some(a),
                    (Some(_), None) => Some(iv),
                    (Some(x), Some(y)) => Some(if y > x { iv } else { a }),
                },
            })
            .ok_or_else(|| Error::Internal(format!("no state interval covers {cur}")))?;
        match (&best.lambda_hi, &best.flow_hi) {
            (Some(hi), Some(fhi)) => {
                segments.push(Segment {
                    lambda_lo: cur.clone(),
                    lambda_hi: hi.clone(),
                    flow_lo: join_flow(instance, best, segments.last(), &cur)?,
                    flow_hi: fhi.clone(),
                });
                cur = hi.clone();
            }
            _ => {
                terminal = Terminal {
                    lambda_start: cur.clone(),
                    base: join_flow(instance, best, segments.last(), &cur)?,
                    ray: best.ray.clone().expect("unbounded interval has a ray"),
                };
                break;
            }
        }
    }
    let mut breakpoints = vec![Breakpoint {
        lambda: Rational::zero(),
        flow: segments.first().map_or_else(|| terminal.base.clone(), |s| s.flow_lo.clone()),
    }];
    for s in &segments {
        breakpoints.push(Breakpoint { lambda: s.lambda_hi.clone(), flow: s.flow_hi.clone() });
    }
    Ok(EquilibriumCurve { breakpoints, segments, terminal, intervals, perturbed, lambda_max: lmax })
}

/// The curve's flow at `lambda ≥ 0`.
pub fn evaluate(curve: &EquilibriumCurve, lambda: &Rational) -> Result<Flow> {
    if lambda.is_negative() {
        return Err(Error::Unsupported(format!("negative price {lambda}")));
    }
    if let Some(b) = curve.breakpoints.iter().find(|b| b.lambda == *lambda) {
        return Ok(b.flow.clone());
    }
    if let Some(s) = curve.segments.iter().find(|s| s.lambda_lo < *lambda && *lambda < s.lambda_hi) {
        let w = (lambda - &s.lambda_lo) / (&s.lambda_hi - &s.lambda_lo);
        return Ok(Flow::combine(&s.flow_lo, &(Rational::one() - &w), &s.flow_hi, &w));
    }
    let t = &curve.terminal;
    Ok(shift(&t.base, &t.ray, &(lambda - &t.lambda_start)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use crate::model::test_fixtures::*;

    fn state(support: &[bool], parts: &[usize]) -> EdgeState {
        EdgeState { support: vec![support.to_vec()], active_parts: parts.to_vec() }
    }

    #[test]
    fn pigou_state_programs() {
        let p = pigou();
        let both = state(&[true, true], &[0, 0]);
        let iv = interval_of_state(&p, &both).unwrap().unwrap();
        assert_eq!(iv.lambda_lo, rat(0, 1));
        assert_eq!(iv.flow_lo.loads(), vec![rat(1, 1), rat(0, 1)]);
        assert_eq!(iv.lambda_hi, Some(rat(2, 1)));
        assert_eq!(iv.flow_hi.unwrap().loads(), vec![rat(0, 1), rat(1, 1)]);

        let upper = state(&[false, true], &[0, 0]);
        match state_interval(&p, &upper, Sense::Maximize).unwrap() {
            LpOutcome::Unbounded { ray, .. } => assert!(ray.last().unwrap().is_positive()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pigou_curve() {
        let p = pigou();
        let c = trace_curve(&p).unwrap();
        let bps: Vec<(Rational, Vec<Rational>)> = c.breakpoints.iter().map(|b| (b.lambda.clone(), b.flow.loads())).collect();
        assert_eq!(bps, vec![(rat(0, 1), vec![rat(1, 1), rat(0, 1)]), (rat(2, 1), vec![rat(0, 1), rat(1, 1)])]);
        assert!(c.terminal.ray.iter().flatten().all(Zero::is_zero));
        assert_eq!(evaluate(&c, &rat(1, 1)).unwrap().loads(), vec![rat(1, 2), rat(1, 2)]);
        assert_eq!(evaluate(&c, &rat(5, 1)).unwrap().loads(), vec![rat(0, 1), rat(1, 1)]);
        assert_eq!(evaluate(&c, &rat(2, 1)).unwrap(), c.breakpoints[1].flow);
        assert!(!c.perturbed);
    }

    #[test]
    fn single_edge_curve_is_constant() {
        let t = single_edge();
        let c = trace_curve(&t).unwrap();
        assert_eq!(c.breakpoints.len(), 1);
        assert_eq!(c.breakpoints[0].flow.loads(), vec![rat(3, 1)]);
        assert_eq!(evaluate(&c, &rat(9, 1)).unwrap().loads(), vec![rat(3, 1)]);
    }

    #[test]
    fn two_commodity_breakpoints() {
        let d = two_commodity();
        let c = trace_curve(&d).unwrap();
        let ls: Vec<Rational> = c.breakpoints.iter().map(|b| b.lambda.clone()).collect();
        assert_eq!(ls, vec![rat(0, 1), rat(2, 1), rat(4, 1)]);
        assert_eq!(evaluate(&c, &rat(3, 1)).unwrap().loads(), vec![rat(0, 1), rat(1, 1), rat(1, 2), rat(3, 2)]);
    }

    #[test]
    fn price_bounds() {
        assert_eq!(lambda_max(&pigou()).unwrap(), rat(4, 1));
        assert_eq!(lambda_max(&single_edge()).unwrap(), rat(0, 1));
        let mut p = pigou();
        p.edges[0].externality[0].constant = rat(1, 3);
        // s = 3: 3·(1 + 2) + 1
        assert_eq!(lambda_max(&p).unwrap(), rat(10, 1));
        assert!(matches!(lambda_max(&braess()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn affine_externality_is_rejected() {
        assert!(matches!(trace_curve(&braess()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn zero_slope_curve_is_flagged() {
        let c = trace_curve(&step_toll()).unwrap();
        assert!(c.perturbed);
        let ls: Vec<Rational> = c.breakpoints.iter().map(|b| b.lambda.clone()).collect();
        assert_eq!(ls, vec![rat(0, 1), rat(1, 1)]);
    }
}
