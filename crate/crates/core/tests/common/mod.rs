//! Shared helpers for the integration tests.
#![allow(dead_code)]

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tollcast::arith::{rat, Rational};
use tollcast::model::{Commodity, Edge, ExternalityRate, Instance, Piece};

pub fn fixture(name: &str) -> Instance {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    Instance::from_json_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_rational(rng: &mut impl Rng, max_num: i64, dens: &[i64]) -> Rational {
    rat(rng.gen_range(0..=max_num), dens[rng.gen_range(0..dens.len())])
}

pub struct GenConfig {
    pub strictly_increasing: bool,
    pub max_nodes: usize,
    pub max_edges: usize,
    pub max_commodities: usize,
    pub max_pieces: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { strictly_increasing: false, max_nodes: 6, max_edges: 10, max_commodities: 2, max_pieces: 3 }
    }
}

fn pieces(rng: &mut impl Rng, cfg: &GenConfig) -> Vec<Piece> {
    let k = rng.gen_range(1..=cfg.max_pieces);
    let mut breakpoints = vec![rat(0, 1)];
    for _ in 1..k {
        let next = breakpoints.last().unwrap() + rat(rng.gen_range(1..=4), 2);
        breakpoints.push(next);
    }
    let mut out: Vec<Piece> = Vec::with_capacity(k);
    let mut value = small_rational(rng, 3, &[1, 2]);
    for (i, at) in breakpoints.iter().enumerate() {
        // Slope limited so the offset stays nonnegative.
        let cap = if at.is_zero() { rat(4, 1) } else { (&value / at).min(rat(4, 1)) };
        let mut slope = rat(rng.gen_range(0..=4), 4) * &cap;
        if cfg.strictly_increasing && slope.is_zero() {
            slope = &cap * rat(1, 4);
        }
        let offset = &value - &slope * at;
        if let Some(next) = breakpoints.get(i + 1) {
            value = &slope * next + &offset;
        }
        out.push(Piece { breakpoint: at.clone(), slope, offset });
    }
    out
}

/// Random instance with constant externalities. Nodes `0..n` form a chain so
/// every commodity `(s, t)` with `s < t` has a path.
pub fn random_instance(rng: &mut impl Rng, cfg: &GenConfig) -> Instance {
    let n = rng.gen_range(3..=cfg.max_nodes);
    let m = rng.gen_range(n - 1..=cfg.max_edges.max(n - 1));
    let mut ends: Vec<(usize, usize)> = (0..n - 1).map(|v| (v, v + 1)).collect();
    while ends.len() < m {
        let t = rng.gen_range(0..n);
        let h = rng.gen_range(0..n);
        if t != h {
            ends.push((t, h));
        }
    }
    let edges = ends
        .iter()
        .enumerate()
        .map(|(i, &(tail, head))| Edge {
            id: format!("e{i}"),
            tail,
            head,
            pieces: pieces(rng, cfg),
            externality: vec![ExternalityRate { constant: small_rational(rng, 3, &[1, 2]), slope: rat(0, 1) }],
        })
        .collect();
    let k = rng.gen_range(1..=cfg.max_commodities);
    let commodities = (0..k)
        .map(|_| {
            let s = rng.gen_range(0..n - 1);
            let t = rng.gen_range(s + 1..n);
            Commodity { source: s, target: t, demand: rat(rng.gen_range(1..=6), 2) }
        })
        .collect();
    let inst = Instance {
        nodes: (0..n).map(|v| format!("n{v}")).collect(),
        edges,
        commodities,
        externality_names: vec!["co2".into()],
    };
    inst.validate().unwrap();
    inst
}
