//! JSON, CSV and SVG renderings of a traced curve.

use std::fmt::Write as _;

use num_traits::{One, Zero};
use serde_json::{Map, Value};

use super::{evaluate, EquilibriumCurve};
use crate::arith::Rational;
use crate::error::Result;
use crate::model::{edge_map, potential_of_loads, total_externality_of_loads, Flow, Instance};

fn fmt(r: &Rational, digits: Option<usize>) -> String {
    match digits {
        Some(d) => r.to_decimal_string(d),
        None => r.to_string(),
    }
}

/// `{lambda_max, perturbed, breakpoints: [{lambda, flow, edge_loads, G, Phi}], terminal}`.
pub fn curve_json(instance: &Instance, curve: &EquilibriumCurve) -> Value {
    let breakpoints = curve
        .breakpoints
        .iter()
        .map(|b| {
            let mut m = Map::new();
            m.insert("lambda".into(), Value::String(b.lambda.to_string()));
            m.extend(b.flow.to_json(instance));
            Value::Object(m)
        })
        .collect();
    let t = &curve.terminal;
    let ray: Map<String, Value> = t.ray.iter().enumerate().map(|(i, row)| (i.to_string(), edge_map(instance, row))).collect();
    let mut terminal = Map::new();
    terminal.insert("lambda_start".into(), Value::String(t.lambda_start.to_string()));
    terminal.insert("ray".into(), Value::Object(ray));
    let mut out = Map::new();
    out.insert("lambda_max".into(), Value::String(curve.lambda_max.to_string()));
    out.insert("perturbed".into(), Value::Bool(curve.perturbed));
    out.insert("breakpoints".into(), Value::Array(breakpoints));
    out.insert("terminal".into(), Value::Object(terminal));
    Value::Object(out)
}

/// Right end of the plotted range: one past the last breakpoint.
fn plot_end(curve: &EquilibriumCurve) -> Rational {
    curve.breakpoints.last().map_or_else(Rational::zero, |b| b.lambda.clone()) + Rational::one()
}

/// Rows `lambda, <edge loads>, G, Phi` at every breakpoint and at `grid`
/// evenly spaced prices on `[0, last breakpoint + 1]`, sorted and deduplicated.
pub fn curve_csv(instance: &Instance, curve: &EquilibriumCurve, grid: usize, digits: Option<usize>) -> Result<String> {
    let end = plot_end(curve);
    let mut lambdas: Vec<Rational> = curve.breakpoints.iter().map(|b| b.lambda.clone()).collect();
    if grid >= 2 {
        let steps = Rational::from(grid - 1);
        lambdas.extend((0..grid).map(|k| &end * Rational::from(k) / &steps));
    } else if grid == 1 {
        lambdas.push(Rational::zero());
    }
    lambdas.sort();
    lambdas.dedup();

    let mut out = String::from("lambda");
    for e in &instance.edges {
        out.push(',');
        out.push_str(&e.id);
    }
    for name in &instance.externality_names {
        let _ = write!(out, ",G_{name}");
    }
    out.push_str(",Phi\n");
    let zero = vec![Rational::zero(); instance.num_classes()];
    for l in &lambdas {
        let loads = evaluate(curve, l)?.loads();
        out.push_str(&fmt(l, digits));
        for x in &loads {
            out.push(',');
            out.push_str(&fmt(x, digits));
        }
        for g in total_externality_of_loads(instance, &loads) {
            out.push(',');
            out.push_str(&fmt(&g, digits));
        }
        let _ = writeln!(out, ",{}", fmt(&potential_of_loads(instance, &loads, &zero), digits));
    }
    Ok(out)
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 48.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// Line chart of edge loads (left panel) and `G` (dashed, own scale) against
/// the price. Both are affine between breakpoints, so polylines through the
/// breakpoints are exact.
pub fn curve_svg(instance: &Instance, curve: &EquilibriumCurve) -> Result<String> {
    let end = plot_end(curve);
    let mut lambdas: Vec<Rational> = curve.breakpoints.iter().map(|b| b.lambda.clone()).collect();
    lambdas.push(end.clone());
    let flows: Vec<Flow> = lambdas.iter().map(|l| evaluate(curve, l)).collect::<Result<_>>()?;
    let loads: Vec<Vec<f64>> = flows.iter().map(|f| f.loads().iter().map(Rational::to_f64).collect()).collect();
    let gs: Vec<f64> =
        flows.iter().map(|f| total_externality_of_loads(instance, &f.loads())[0].to_f64()).collect();
    let xs: Vec<f64> = lambdas.iter().map(Rational::to_f64).collect();

    let xmax = end.to_f64().max(f64::MIN_POSITIVE);
    let ymax = loads.iter().flatten().copied().fold(0.0, f64::max).max(1e-9);
    let gmax = gs.iter().copied().fold(0.0, f64::max).max(1e-9);
    let px = |x: f64| PAD + x / xmax * (W - 2.0 * PAD);
    let py = |y: f64, top: f64| H - PAD - y / top * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD},{PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">price</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}" font-size="11" text-anchor="end">0</text>"#, H - PAD + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{xmax:.3}</text>"#, W - PAD, H - PAD + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{PAD}" font-size="11" text-anchor="end">{ymax:.3}</text>"#, PAD - 4.0);
    for (e, edge) in instance.edges.iter().enumerate() {
        let colour = PALETTE[e % PALETTE.len()];
        let pts: Vec<String> = xs.iter().zip(&loads).map(|(x, l)| format!("{:.2},{:.2}", px(*x), py(l[e], ymax))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#, pts.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{colour}">{}</text>"#,
            W - PAD + 4.0,
            PAD + 14.0 * e as f64,
            escape(&edge.id)
        );
    }
    let pts: Vec<String> = xs.iter().zip(&gs).map(|(x, g)| format!("{:.2},{:.2}", px(*x), py(*g, gmax))).collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="black" stroke-dasharray="6 4" stroke-width="1.5"/>"#,
        pts.join(" ")
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11">G (max {gmax:.3})</text>"#,
        W - PAD + 4.0,
        PAD + 14.0 * instance.edges.len() as f64
    );
    for x in &xs[..xs.len() - 1] {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5"/>"#, px(*x), H - PAD);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
