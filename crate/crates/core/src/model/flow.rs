use num_traits::Zero;
use serde_json::{Map, Value};

use super::instance::{Instance, Piece};
use crate::arith::{rat, Rational};
use crate::error::{Error, Result};

/// Edge-based multi-commodity flow `x[i][e]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    values: Vec<Vec<Rational>>,
}

impl Flow {
    /// Builds a flow, checking shape, nonnegativity and exact conservation.
    pub fn new(instance: &Instance, values: Vec<Vec<Rational>>) -> Result<Flow> {
        let flow = Flow { values };
        flow.check(instance)?;
        Ok(flow)
    }

    pub(crate) fn from_values_unchecked(values: Vec<Vec<Rational>>) -> Flow {
        Flow { values }
    }

    pub fn check(&self, instance: &Instance) -> Result<()> {
        if self.values.len() != instance.commodities.len() {
            return Err(Error::InvalidFlow(format!(
                "{} commodity rows for {} commodities",
                self.values.len(),
                instance.commodities.len()
            )));
        }
        for (i, row) in self.values.iter().enumerate() {
            if row.len() != instance.edges.len() {
                return Err(Error::InvalidFlow(format!("commodity {i}: wrong number of edge values")));
            }
            if let Some(e) = row.iter().position(Rational::is_negative) {
                return Err(Error::InvalidFlow(format!(
                    "commodity {i}: negative flow on edge `{}`",
                    instance.edges[e].id
                )));
            }
            let c = &instance.commodities[i];
            let mut net = vec![Rational::zero(); instance.nodes.len()];
            for (e, x) in row.iter().enumerate() {
                if x.is_zero() {
                    continue;
                }
                let edge = &instance.edges[e];
                net[edge.tail] += x;
                net[edge.head] -= x;
            }
            for (v, n) in net.iter().enumerate() {
                let expected = if v == c.source {
                    c.demand.clone()
                } else if v == c.target {
                    -&c.demand
                } else {
                    Rational::zero()
                };
                if *n != expected {
                    return Err(Error::InvalidFlow(format!(
                        "commodity {i}: net outflow {n} at node `{}`, expected {expected}",
                        instance.nodes[v]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn values(&self) -> &[Vec<Rational>] {
        &self.values
    }

    pub fn value(&self, commodity: usize, edge: usize) -> &Rational {
        &self.values[commodity][edge]
    }

    /// Total edge loads `x_e = Σ_i x_{i,e}`.
    pub fn loads(&self) -> Vec<Rational> {
        let m = self.values.first().map_or(0, Vec::len);
        (0..m).map(|e| self.values.iter().map(|r| &r[e]).sum()).collect()
    }

    /// `a·wa + b·wb`, entrywise.
    pub fn combine(a: &Flow, wa: &Rational, b: &Flow, wb: &Rational) -> Flow {
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x * wa + y * wb).collect())
            .collect();
        Flow { values }
    }

    pub fn total_externality(&self, instance: &Instance) -> Vec<Rational> {
        total_externality_of_loads(instance, &self.loads())
    }

    /// Beckmann potential `Φ^λ` of the flow.
    pub fn potential(&self, instance: &Instance, lambda: &[Rational]) -> Rational {
        potential_of_loads(instance, &self.loads(), lambda)
    }

    /// Serializes as `{flow, edge_loads, G, Phi}`; `Phi` is the travel-time
    /// potential (prices zero).
    pub fn to_json(&self, instance: &Instance) -> Map<String, Value> {
        let mut flow = Map::new();
        for (i, row) in self.values.iter().enumerate() {
            let mut m = Map::new();
            for (e, x) in row.iter().enumerate() {
                m.insert(instance.edges[e].id.clone(), Value::String(x.to_string()));
            }
            flow.insert(i.to_string(), Value::Object(m));
        }
        let loads = self.loads();
        let mut out = Map::new();
        out.insert("flow".into(), Value::Object(flow));
        out.insert("edge_loads".into(), edge_map(instance, &loads));
        out.insert("G".into(), class_map(instance, &total_externality_of_loads(instance, &loads)));
        let zero = vec![Rational::zero(); instance.num_classes()];
        out.insert("Phi".into(), Value::String(potential_of_loads(instance, &loads, &zero).to_string()));
        out
    }

    /// Reads the `flow` member of a JSON document (or the document itself if
    /// it has no such member). Missing entries are zero; derived members are
    /// ignored.
    pub fn from_json(instance: &Instance, doc: &Value) -> Result<Flow> {
        let body = doc.get("flow").unwrap_or(doc);
        let obj = body
            .as_object()
            .ok_or_else(|| Error::InvalidFlow("expected an object keyed by commodity index".into()))?;
        let mut values = vec![vec![Rational::zero(); instance.edges.len()]; instance.commodities.len()];
        for (key, row) in obj {
            let i: usize = key
                .parse()
                .ok()
                .filter(|&i| i < instance.commodities.len())
                .ok_or_else(|| Error::InvalidFlow(format!("unknown commodity index `{key}`")))?;
            let row = row
                .as_object()
                .ok_or_else(|| Error::InvalidFlow(format!("commodity {key}: expected an object")))?;
            for (id, v) in row {
                let e = instance
                    .edge_index(id)
                    .ok_or_else(|| Error::InvalidFlow(format!("unknown edge `{id}`")))?;
                let s = v
                    .as_str()
                    .ok_or_else(|| Error::InvalidFlow(format!("flow on `{id}` must be a rational string")))?;
                values[i][e] = Rational::parse(s).map_err(|err| Error::InvalidFlow(err.to_string()))?;
            }
        }
        Flow::new(instance, values)
    }
}

/// `{edge id: value}` with values as rational strings.
pub fn edge_map(instance: &Instance, values: &[Rational]) -> Value {
    Value::Object(
        instance
            .edges
            .iter()
            .zip(values)
            .map(|(e, v)| (e.id.clone(), Value::String(v.to_string())))
            .collect(),
    )
}

/// `{class name: value}` with values as rational strings.
pub fn class_map(instance: &Instance, values: &[Rational]) -> Value {
    Value::Object(
        instance
            .externality_names
            .iter()
            .zip(values)
            .map(|(n, v)| (n.clone(), Value::String(v.to_string())))
            .collect(),
    )
}

/// `G_j = Σ_e (g_{e,j} + γ_{e,j}·x_e)·x_e` for every class.
pub fn total_externality_of_loads(instance: &Instance, loads: &[Rational]) -> Vec<Rational> {
    (0..instance.num_classes())
        .map(|j| {
            instance
                .edges
                .iter()
                .zip(loads)
                .filter(|(_, x)| !x.is_zero())
                .map(|(e, x)| e.externality_rate(j, x) * x)
                .sum()
        })
        .collect()
}

/// `∫₀ˣ τ(y) dy` for a piecewise-affine function given by its pieces.
pub fn integrate_pieces(pieces: &[Piece], x: &Rational) -> Rational {
    let mut total = Rational::zero();
    for (k, p) in pieces.iter().enumerate() {
        if p.breakpoint >= *x {
            break;
        }
        let lo = &p.breakpoint;
        let hi = match pieces.get(k + 1) {
            Some(next) if next.breakpoint < *x => &next.breakpoint,
            _ => x,
        };
        total += &p.slope * rat(1, 2) * (hi * hi - lo * lo) + &p.offset * (hi - lo);
    }
    total
}

/// `Φ^λ = Σ_e ∫₀^{x_e} c^λ_e(y) dy`.
pub fn potential_of_loads(instance: &Instance, loads: &[Rational], lambda: &[Rational]) -> Rational {
    let mut total = Rational::zero();
    for (e, x) in instance.edges.iter().zip(loads) {
        if x.is_zero() {
            continue;
        }
        total += integrate_pieces(&e.pieces, x);
        for (r, l) in e.externality.iter().zip(lambda) {
            if !l.is_zero() {
                total += l * (&r.constant * x + &r.slope * rat(1, 2) * x * x);
            }
        }
    }
    total
}
