use num_traits::Zero;
use serde::Deserialize;

use crate::arith::Rational;
use crate::error::{Error, Result};

/// One affine part `slope·x + offset` of a travel-time function, valid from
/// `breakpoint` up to the next part's breakpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub breakpoint: Rational,
    pub slope: Rational,
    pub offset: Rational,
}

/// Externality induced per unit of flow: `constant + slope·load`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExternalityRate {
    pub constant: Rational,
    pub slope: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub id: String,
    pub tail: usize,
    pub head: usize,
    pub pieces: Vec<Piece>,
    /// Indexed by externality class.
    pub externality: Vec<ExternalityRate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Commodity {
    pub source: usize,
    pub target: usize,
    pub demand: Rational,
}

/// A validated network with piecewise-affine travel times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    pub commodities: Vec<Commodity>,
    pub externality_names: Vec<String>,
}

impl Edge {
    /// Index `k` of the piece with `σ_k ≤ load < σ_{k+1}`.
    pub fn piece_index(&self, load: &Rational) -> usize {
        self.pieces.iter().rposition(|p| p.breakpoint <= *load).unwrap_or(0)
    }

    pub fn travel_time(&self, load: &Rational) -> Rational {
        let p = &self.pieces[self.piece_index(load)];
        &p.slope * load + &p.offset
    }

    /// Travel-time slope of the piece active at `load` plus the priced
    /// externality slopes.
    pub fn effective_slope(&self, piece: usize, lambda: &[Rational]) -> Rational {
        let mut s = self.pieces[piece].slope.clone();
        for (r, l) in self.externality.iter().zip(lambda) {
            if !r.slope.is_zero() && !l.is_zero() {
                s += &r.slope * l;
            }
        }
        s
    }

    /// Per-unit externality of class `j` at `load`.
    pub fn externality_rate(&self, class: usize, load: &Rational) -> Rational {
        let r = &self.externality[class];
        &r.constant + &r.slope * load
    }

    /// Priced cost `τ_e(x) + Σ_j λ_j·(g_j + γ_j·x)`, without the load check.
    pub fn priced_cost(&self, load: &Rational, lambda: &[Rational]) -> Rational {
        let mut c = self.travel_time(load);
        for (j, l) in lambda.iter().enumerate() {
            if !l.is_zero() {
                c += l * self.externality_rate(j, load);
            }
        }
        c
    }

    pub fn has_affine_externality(&self) -> bool {
        self.externality.iter().any(|r| !r.slope.is_zero())
    }
}

impl Instance {
    pub fn num_classes(&self) -> usize {
        self.externality_names.len()
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.externality_names.iter().position(|n| n == name)
    }

    pub fn total_demand(&self) -> Rational {
        self.commodities.iter().map(|c| &c.demand).sum()
    }

    /// Largest piece count minus one.
    pub fn max_piece_index(&self) -> usize {
        self.edges.iter().map(|e| e.pieces.len() - 1).max().unwrap_or(0)
    }

    pub fn has_affine_externality(&self) -> bool {
        self.edges.iter().any(Edge::has_affine_externality)
    }

    pub fn all_slopes_positive(&self) -> bool {
        self.edges.iter().all(|e| e.pieces.iter().all(|p| p.slope.is_positive()))
    }

    /// Cost of edge `edge` at `load` under prices `lambda`.
    pub fn edge_cost(&self, edge: usize, load: &Rational, lambda: &[Rational]) -> Result<Rational> {
        if load.is_negative() {
            return Err(Error::NegativeLoad(load.clone()));
        }
        self.check_lambda(lambda)?;
        Ok(self.edges[edge].priced_cost(load, lambda))
    }

    pub(crate) fn check_lambda(&self, lambda: &[Rational]) -> Result<()> {
        if lambda.len() != self.num_classes() {
            return Err(Error::Unsupported(format!(
                "expected {} price components, got {}",
                self.num_classes(),
                lambda.len()
            )));
        }
        if let Some(l) = lambda.iter().find(|l| l.is_negative()) {
            return Err(Error::Unsupported(format!("negative price {l}")));
        }
        Ok(())
    }

    pub(crate) fn require_constant_externality(&self, what: &str) -> Result<()> {
        if let Some(e) = self.edges.iter().find(|e| e.has_affine_externality()) {
            return Err(Error::Unsupported(format!(
                "{what} requires constant externality rates, but edge `{}` has a load-dependent rate",
                e.id
            )));
        }
        Ok(())
    }

    pub(crate) fn require_single_class(&self, what: &str) -> Result<()> {
        if self.num_classes() != 1 {
            return Err(Error::Unsupported(format!(
                "{what} requires exactly one externality class, instance has {}",
                self.num_classes()
            )));
        }
        Ok(())
    }

    /// Out-edges per node, in edge order.
    pub fn out_edges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            out[e.tail].push(i);
        }
        out
    }

    /// Nodes reachable from `from`.
    pub fn reachable_from(&self, from: usize) -> Vec<bool> {
        self.search(from, |e| (e.tail, e.head))
    }

    /// Nodes that can reach `to`.
    pub fn reaching(&self, to: usize) -> Vec<bool> {
        self.search(to, |e| (e.head, e.tail))
    }

    fn search(&self, start: usize, dir: impl Fn(&Edge) -> (usize, usize)) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for e in &self.edges {
                let (a, b) = dir(e);
                if a == v && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen
    }

    /// Edges lying on some walk from the commodity's source to its target.
    pub fn useful_edges(&self, commodity: usize) -> Vec<bool> {
        let c = &self.commodities[commodity];
        let fwd = self.reachable_from(c.source);
        let bwd = self.reaching(c.target);
        self.edges.iter().map(|e| fwd[e.tail] && bwd[e.head]).collect()
    }

    /// Checks every structural and numeric invariant.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::invalid("nodes", "at least one node is required"));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if self.nodes[..i].contains(n) {
                return Err(Error::invalid(format!("nodes[{i}]"), format!("duplicate node `{n}`")));
            }
        }
        for (i, n) in self.externality_names.iter().enumerate() {
            if self.externality_names[..i].contains(n) {
                return Err(Error::invalid(
                    format!("externalities[{i}]"),
                    format!("duplicate externality class `{n}`"),
                ));
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            let at = |f: &str| format!("edges[{i}].{f}");
            if self.edges[..i].iter().any(|o| o.id == e.id) {
                return Err(Error::invalid(at("id"), format!("duplicate edge id `{}`", e.id)));
            }
            if e.tail >= self.nodes.len() || e.head >= self.nodes.len() {
                return Err(Error::invalid(at("tail"), "endpoint out of range"));
            }
            if e.tail == e.head {
                return Err(Error::invalid(at("head"), "self-loops are not supported"));
            }
            if e.pieces.is_empty() {
                return Err(Error::invalid(at("pieces"), "at least one piece is required"));
            }
            if !e.pieces[0].breakpoint.is_zero() {
                return Err(Error::invalid(at("pieces[0].breakpoint"), "first breakpoint must be 0"));
            }
            for (k, p) in e.pieces.iter().enumerate() {
                if p.slope.is_negative() {
                    return Err(Error::invalid(at(&format!("pieces[{k}].slope")), "slope must be ≥ 0"));
                }
                if p.offset.is_negative() {
                    return Err(Error::invalid(at(&format!("pieces[{k}].offset")), "offset must be ≥ 0"));
                }
                if k > 0 {
                    let prev = &e.pieces[k - 1];
                    if p.breakpoint <= prev.breakpoint {
                        return Err(Error::invalid(
                            at(&format!("pieces[{k}].breakpoint")),
                            "breakpoints must be strictly increasing",
                        ));
                    }
                    let left = &prev.slope * &p.breakpoint + &prev.offset;
                    let right = &p.slope * &p.breakpoint + &p.offset;
                    if left != right {
                        return Err(Error::invalid(
                            at(&format!("pieces[{k}]")),
                            format!("discontinuous at breakpoint {}: {left} vs {right}", p.breakpoint),
                        ));
                    }
                }
            }
            if e.externality.len() != self.num_classes() {
                return Err(Error::invalid(at("externality"), "one rate per externality class expected"));
            }
            for (j, r) in e.externality.iter().enumerate() {
                let name = &self.externality_names[j];
                if r.constant.is_negative() {
                    return Err(Error::invalid(at(&format!("externality.{name}.g")), "must be ≥ 0"));
                }
                if r.slope.is_negative() {
                    return Err(Error::invalid(at(&format!("externality.{name}.gamma")), "must be ≥ 0"));
                }
            }
        }
        if self.commodities.is_empty() {
            return Err(Error::invalid("commodities", "at least one commodity is required"));
        }
        for (i, c) in self.commodities.iter().enumerate() {
            let at = |f: &str| format!("commodities[{i}].{f}");
            if c.source >= self.nodes.len() || c.target >= self.nodes.len() {
                return Err(Error::invalid(at("source"), "endpoint out of range"));
            }
            if c.source == c.target {
                return Err(Error::invalid(at("target"), "source and target must differ"));
            }
            if !c.demand.is_positive() {
                return Err(Error::invalid(at("demand"), "demand must be > 0"));
            }
            if !self.reachable_from(c.source)[c.target] {
                return Err(Error::invalid(at("target"), "target is not reachable from source"));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    nodes: Vec<String>,
    #[serde(default)]
    externalities: Vec<String>,
    edges: Vec<EdgeFile>,
    commodities: Vec<CommodityFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeFile {
    id: String,
    tail: String,
    head: String,
    pieces: Vec<PieceFile>,
    #[serde(default)]
    externality: serde_json::Map<String, serde_json::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PieceFile {
    breakpoint: String,
    slope: String,
    offset: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RateFile {
    g: String,
    #[serde(default)]
    gamma: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CommodityFile {
    source: String,
    target: String,
    demand: String,
}

fn num(path: String, s: &str) -> Result<Rational> {
    Rational::parse(s).map_err(|e| Error::invalid(path, e.to_string()))
}

impl Instance {
    /// Parses and validates the JSON instance format.
    pub fn from_json_str(text: &str) -> Result<Instance> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| Error::invalid("$", e.to_string()))?;
        let node = |path: String, name: &str, nodes: &[String]| {
            nodes
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::invalid(path, format!("unknown node `{name}`")))
        };
        let mut edges = Vec::with_capacity(file.edges.len());
        for (i, e) in file.edges.iter().enumerate() {
            let at = |f: &str| format!("edges[{i}].{f}");
            let pieces = e
                .pieces
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    Ok(Piece {
                        breakpoint: num(at(&format!("pieces[{k}].breakpoint")), &p.breakpoint)?,
                        slope: num(at(&format!("pieces[{k}].slope")), &p.slope)?,
                        offset: num(at(&format!("pieces[{k}].offset")), &p.offset)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut externality = vec![ExternalityRate::default(); file.externalities.len()];
            for (class, value) in &e.externality {
                let path = at(&format!("externality.{class}"));
                let j = file
                    .externalities
                    .iter()
                    .position(|n| n == class)
                    .ok_or_else(|| Error::invalid(path.clone(), format!("unknown externality class `{class}`")))?;
                let rate: RateFile = serde_json::from_value(value.clone())
                    .map_err(|err| Error::invalid(path.clone(), err.to_string()))?;
                externality[j] = ExternalityRate {
                    constant: num(format!("{path}.g"), &rate.g)?,
                    slope: match &rate.gamma {
                        Some(s) => num(format!("{path}.gamma"), s)?,
                        None => Rational::zero(),
                    },
                };
            }
            edges.push(Edge {
                id: e.id.clone(),
                tail: node(at("tail"), &e.tail, &file.nodes)?,
                head: node(at("head"), &e.head, &file.nodes)?,
                pieces,
                externality,
            });
        }
        let commodities = file
            .commodities
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let at = |f: &str| format!("commodities[{i}].{f}");
                Ok(Commodity {
                    source: node(at("source"), &c.source, &file.nodes)?,
                    target: node(at("target"), &c.target, &file.nodes)?,
                    demand: num(at("demand"), &c.demand)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let inst = Instance { nodes: file.nodes, edges, commodities, externality_names: file.externalities };
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::{json, Map, Value};
        let edges: Vec<Value> = self
            .edges
            .iter()
            .map(|e| {
                let mut ext = Map::new();
                for (j, r) in e.externality.iter().enumerate() {
                    let mut m = Map::new();
                    m.insert("g".into(), Value::String(r.constant.to_string()));
                    if !r.slope.is_zero() {
                        m.insert("gamma".into(), Value::String(r.slope.to_string()));
                    }
                    ext.insert(self.externality_names[j].clone(), Value::Object(m));
                }
                json!({
                    "id": e.id,
                    "tail": self.nodes[e.tail],
                    "head": self.nodes[e.head],
                    "pieces": e.pieces.iter().map(|p| json!({
                        "breakpoint": p.breakpoint.to_string(),
                        "slope": p.slope.to_string(),
                        "offset": p.offset.to_string(),
                    })).collect::<Vec<_>>(),
                    "externality": ext,
                })
            })
            .collect();
        json!({
            "nodes": self.nodes,
            "externalities": self.externality_names,
            "edges": edges,
            "commodities": self.commodities.iter().map(|c| json!({
                "source": self.nodes[c.source],
                "target": self.nodes[c.target],
                "demand": c.demand.to_string(),
            })).collect::<Vec<_>>(),
        })
    }
}
