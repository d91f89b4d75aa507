use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use tollcast::arith::Rational;
use tollcast::curve::{curve_csv, curve_json, curve_svg, trace_curve};
use tollcast::equilibrium::solve_equilibrium;
use tollcast::model::{class_map, Flow, Instance};
use tollcast::pricing::{
    check_implementable, implement_budget, market_price_interval, min_feasible_budget, min_price,
};
use tollcast::Error;

/// Exact Wardrop equilibria and externality pricing.
#[derive(Parser)]
#[command(name = "tollcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the JSON result to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also emit a `decimal` member with every exact value rounded to N digits.
    #[arg(long, global = true, value_name = "N")]
    decimal: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file.
    Validate { file: PathBuf },
    /// Equilibrium at fixed prices.
    Equilibrium {
        /// Price applied to every class.
        #[arg(long)]
        lambda: Option<Rational>,
        /// Price for one class, as `class=r`; overrides --lambda.
        #[arg(long = "lambda-j", value_parser = parse_assignment)]
        lambda_j: Vec<(String, Rational)>,
        file: PathBuf,
    },
    /// Whole price-to-equilibrium curve (single constant class).
    Curve {
        /// Grid points for the CSV export, besides the breakpoints.
        #[arg(long, default_value_t = 16)]
        grid: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        file: PathBuf,
    },
    /// Least price meeting a budget.
    MinPrice {
        #[arg(long)]
        budget: Rational,
        file: PathBuf,
    },
    /// Prices implementing a per-class budget, as `class=r[,class=r...]`.
    ImplementBudget {
        #[arg(long, value_parser = parse_assignment, value_delimiter = ',', required = true)]
        budget: Vec<(String, Rational)>,
        file: PathBuf,
    },
    /// Whether some prices make a given flow an equilibrium.
    CheckFlow {
        #[arg(long)]
        flow: PathBuf,
        file: PathBuf,
    },
    /// Smallest attainable total externality per class.
    MinBudget { file: PathBuf },
    /// Market-clearing prices of a tradable credit scheme.
    CreditScheme {
        #[arg(long)]
        credits: Rational,
        file: PathBuf,
    },
}

/// `class=r`, or a bare `r` for single-class instances.
fn parse_assignment(s: &str) -> Result<(String, Rational), String> {
    let (name, value) = s.split_once('=').unwrap_or(("", s));
    let value = Rational::parse(value.trim()).map_err(|e| e.to_string())?;
    Ok((name.trim().to_string(), value))
}

enum Failure {
    Solver(Error),
    Input(String),
    Output(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Output(_) => 1,
            Failure::Solver(e) => match e {
                Error::InvalidInstance { .. } | Error::InvalidFlow(_) => 2,
                Error::InfeasibleBudget { .. } => 3,
                Error::Unsupported(_) | Error::PathCapExceeded { .. } => 4,
                _ => 1,
            },
        }
    }

    fn report(&self) {
        match self {
            Failure::Input(m) | Failure::Output(m) => eprintln!("error: {m}"),
            Failure::Solver(Error::InfeasibleBudget { message, certificate }) => {
                eprintln!("error: infeasible budget: {message}");
                let cert: Vec<String> = certificate.iter().map(ToString::to_string).collect();
                eprintln!("certificate: [{}]", cert.join(", "));
            }
            Failure::Solver(e) => eprintln!("error: {e}"),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Instance, Failure> {
    Ok(Instance::from_json_str(&read(path)?)?)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Output(format!("cannot write {}: {e}", path.display())))
}

/// Per-class values from `class=r` pairs; unnamed values need a single class.
fn assignments(instance: &Instance, pairs: &[(String, Rational)], what: &str) -> Result<Vec<Option<Rational>>, Failure> {
    let mut out: Vec<Option<Rational>> = vec![None; instance.num_classes()];
    for (name, value) in pairs {
        let j = if name.is_empty() {
            if instance.num_classes() != 1 {
                return Err(Failure::Input(format!("{what} `{value}` needs a class name")));
            }
            0
        } else {
            instance
                .class_index(name)
                .ok_or_else(|| Failure::Input(format!("unknown externality class `{name}`")))?
        };
        out[j] = Some(value.clone());
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<(Value, String), Failure> {
    match &cli.command {
        Command::Validate { file } => {
            let inst = load(file)?;
            let summary = format!(
                "valid: {} nodes, {} edges, {} commodities",
                inst.nodes.len(),
                inst.edges.len(),
                inst.commodities.len()
            );
            let doc = json!({
                "valid": true,
                "nodes": inst.nodes.len(),
                "edges": inst.edges.len(),
                "commodities": inst.commodities.len(),
                "externalities": inst.externality_names,
                "affine_externality": inst.has_affine_externality(),
            });
            Ok((doc, summary))
        }
        Command::Equilibrium { lambda, lambda_j, file } => {
            let inst = load(file)?;
            let lam: Vec<Rational> = assignments(&inst, lambda_j, "price")?
                .into_iter()
                .map(|v| v.or_else(|| lambda.clone()).unwrap_or_default())
                .collect();
            let res = solve_equilibrium(&inst, &lam)?;
            let costs = res.path_costs(&inst);
            let mut doc = Map::new();
            doc.insert("lambda".into(), class_map(&inst, &lam));
            doc.extend(res.flow.to_json(&inst));
            doc.insert("Phi_lambda".into(), Value::String(res.flow.potential(&inst, &lam).to_string()));
            doc.insert("min_path_cost".into(), numbered(&costs));
            doc.insert("perturbed".into(), Value::Bool(res.perturbed));
            let summary = format!("equilibrium: G = {}", join(&res.flow.total_externality(&inst)));
            Ok((Value::Object(doc), summary))
        }
        Command::Curve { grid, csv, svg, file } => {
            let inst = load(file)?;
            let curve = trace_curve(&inst)?;
            if let Some(path) = csv {
                write(path, &curve_csv(&inst, &curve, *grid, None)?)?;
            }
            if let Some(path) = svg {
                write(path, &curve_svg(&inst, &curve)?)?;
            }
            let summary = format!(
                "curve: {} breakpoints, terminal ray from {}",
                curve.breakpoints.len(),
                curve.terminal.lambda_start
            );
            Ok((curve_json(&inst, &curve), summary))
        }
        Command::MinPrice { budget, file } => {
            let inst = load(file)?;
            let r = min_price(&inst, budget)?;
            let mut doc = Map::new();
            doc.insert("lambda".into(), Value::String(r.lambda_star.to_string()));
            doc.extend(r.flow.to_json(&inst));
            doc.insert("iterations".into(), json!(r.iterations));
            doc.insert("bound".into(), json!(r.iteration_bound));
            let summary = format!("min price {} after {} of at most {} steps", r.lambda_star, r.iterations, r.iteration_bound);
            Ok((Value::Object(doc), summary))
        }
        Command::ImplementBudget { budget, file } => {
            let inst = load(file)?;
            let b: Vec<Rational> = assignments(&inst, budget, "budget")?
                .into_iter()
                .enumerate()
                .map(|(j, v)| v.ok_or_else(|| Failure::Input(format!("no budget for class `{}`", inst.externality_names[j]))))
                .collect::<Result<_, _>>()?;
            let r = implement_budget(&inst, &b)?;
            let mut doc = Map::new();
            doc.insert("lambda".into(), class_map(&inst, &r.lambda));
            doc.insert("budget".into(), class_map(&inst, &b));
            doc.extend(r.flow.to_json(&inst));
            doc.insert("perturbed".into(), Value::Bool(r.perturbed));
            Ok((Value::Object(doc), format!("implementing prices: {}", join(&r.lambda))))
        }
        Command::CheckFlow { flow, file } => {
            let inst = load(file)?;
            let text = read(flow)?;
            let doc: Value =
                serde_json::from_str(&text).map_err(|e| Failure::Solver(Error::InvalidFlow(e.to_string())))?;
            let f = Flow::from_json(&inst, &doc)?;
            let r = check_implementable(&inst, &f)?;
            let out = json!({
                "implementable": r.implementable,
                "lambda": r.lambda.as_ref().map_or(Value::Null, |l| class_map(&inst, l)),
                "gap": r.gap.to_string(),
            });
            let summary = if r.implementable {
                format!("implementable with prices {}", join(r.lambda.as_deref().unwrap_or_default()))
            } else {
                format!("not implementable, gap {}", r.gap)
            };
            Ok((out, summary))
        }
        Command::MinBudget { file } => {
            let inst = load(file)?;
            let b = min_feasible_budget(&inst)?;
            Ok((json!({ "B_min": class_map(&inst, &b) }), format!("minimum budget {}", join(&b))))
        }
        Command::CreditScheme { credits, file } => {
            let inst = load(file)?;
            let m = market_price_interval(&inst, credits)?;
            let hi = m.lambda_hi.as_ref().map_or_else(|| "inf".to_string(), ToString::to_string);
            let out = json!({
                "lambda_lo": m.lambda_lo.to_string(),
                "lambda_hi": hi,
                "witness_lo": Value::Object(m.witness_lo.to_json(&inst)),
                "witness_hi": m.witness_hi.as_ref().map_or(Value::Null, |w| Value::Object(w.to_json(&inst))),
            });
            let summary = format!("market prices [{}, {}{}", m.lambda_lo, hi, if m.lambda_hi.is_some() { "]" } else { ")" });
            Ok((out, summary))
        }
    }
}

fn numbered(values: &[Rational]) -> Value {
    Value::Object(values.iter().enumerate().map(|(i, v)| (i.to_string(), Value::String(v.to_string()))).collect())
}

fn join(values: &[Rational]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// Same shape as `v` with every rational string rounded to `digits`.
fn decimals(v: &Value, digits: usize) -> Value {
    match v {
        Value::String(s) => match Rational::parse(s) {
            Ok(r) => Value::String(r.to_decimal_string(digits)),
            Err(_) => v.clone(),
        },
        Value::Array(a) => Value::Array(a.iter().map(|x| decimals(x, digits)).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, x)| (k.clone(), decimals(x, digits))).collect()),
        other => other.clone(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if std::env::var("TOLLCAST_VERBOSE").is_ok_and(|v| v == "1") {
        tollcast::lp::set_trace(true);
    }
    let result = run(&cli).and_then(|(mut doc, summary)| {
        if let (Some(n), Value::Object(map)) = (cli.decimal, &mut doc) {
            let approx = decimals(&Value::Object(map.clone()), n);
            map.insert("decimal".into(), approx);
        }
        let text = serde_json::to_string_pretty(&doc).expect("JSON values serialize") + "\n";
        match &cli.out {
            Some(path) => write(path, &text)?,
            None => print!("{text}"),
        }
        eprintln!("{summary}");
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report();
            ExitCode::from(f.exit_code())
        }
    }
}
