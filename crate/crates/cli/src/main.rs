//! `conehedge` command-line front end.
//!
//! Model data comes from one JSON config; flags only pick the mode, seed
//! and output directory. Exit status: 0 success, 1 validation or domain
//! error, 2 internal invariant breach.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use conehedge::config::{Mode, RunConfig, Validated};
use conehedge::fixtures::{random_theta, random_tree_strategy, rng};
use conehedge::market::{build_tree, simulate_paths, PriceTree};
use conehedge::pricing::{find_consistent_z, ConsistentPriceProcess, mc_supermartingale_check, reweighting_check, tree_supermartingale_check};
use conehedge::portfolio::theta_to_k;
use conehedge::solvency::{decompose, ExchangeMatrix};
use conehedge::superhedge::{
    backward_sets, dpp_check, eps_value_membership_mc, eps_value_membership_tree, oracle_membership, root_contains,
    EpsQuery, DEFAULT_EPS_BUDGET,
};
use conehedge::Error;
use ratgeom::{format_rat, format_rats, parse_rats, rat_int, rat_to_f64, Rat};

mod verify;

#[derive(Parser, Debug)]
#[command(name = "conehedge", version, about = "Superhedging under proportional transaction costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (defaults to the config's `output`, then `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated ε grid, overriding the config.
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long, global = true)]
    allow_degenerate: bool,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, global = true)]
    quick: bool,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Solvency cone generators and dual generators.
    Cone,
    /// Transfer matrix reproducing a nonnegative vector.
    Decompose {
        /// Comma-separated rationals; defaults to all ones.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<String>>,
    },
    /// Recombination-free price tree.
    Tree,
    /// Superhedging sets by backward recursion, with DPP and oracle checks.
    Superhedge,
    /// ε-superhedging membership over the ε grid.
    Eps,
    /// Consistent price process and supermartingale check.
    Price,
    /// Property suite on built-in fixtures.
    Verify,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModeArg {
    Tree,
    Mc,
}

/// Failure modes mapped to exit codes.
enum Failure {
    Domain(Error),
    Io(String),
    Breach(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type Run<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
            ExitCode::SUCCESS
        }
        Err(Failure::Domain(e)) => {
            let report = json!({"error": e.to_string(), "invariant": e.invariant()});
            eprintln!("{report}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("{}", json!({"error": msg, "invariant": "output directory writable, config readable"}));
            ExitCode::from(1)
        }
        Err(Failure::Breach(msg)) => {
            eprintln!("{}", json!({"error": msg, "invariant": "internal invariant breach"}));
            ExitCode::from(2)
        }
    }
}

fn load(cli: &Cli) -> Run<Validated> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Domain(Error::Config("--config is required".into())))?;
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut config = RunConfig::from_json_str(&text)?;
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(e) = &cli.eps {
        config.eps = e.clone();
    }
    if cli.allow_degenerate {
        config.allow_degenerate = true;
    }
    match cli.mode {
        Some(ModeArg::Tree) => config.mode = Mode::Tree,
        Some(ModeArg::Mc) => config.mode = Mode::Mc,
        None => {}
    }
    Ok(config.validate()?)
}

fn out_dir(cli: &Cli, config: Option<&RunConfig>) -> Run<PathBuf> {
    let dir = cli
        .out
        .clone()
        .or_else(|| config.and_then(|c| c.output.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, body: &str) -> Run<()> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_json(dir: &Path, name: &str, v: &Value) -> Run<()> {
    write(dir, name, &(serde_json::to_string_pretty(v).expect("json") + "\n"))
}

fn run(cli: &Cli) -> Run<Value> {
    if let Command::Verify = cli.command {
        let config = match &cli.config {
            Some(_) => Some(load(cli)?),
            None => None,
        };
        let dir = out_dir(cli, config.as_ref().map(|v| &v.config))?;
        let seed = cli.seed.or(config.as_ref().map(|v| v.config.seed)).unwrap_or(0);
        let report = verify::run_suite(cli.quick, seed)?;
        write_json(&dir, "verify.json", &report)?;
        if report["passed"] != json!(true) {
            return Err(Failure::Breach(format!("verify: failing checks {}", report["failed"])));
        }
        return Ok(report);
    }
    let v = load(cli)?;
    let dir = out_dir(cli, Some(&v.config))?;
    match &cli.command {
        Command::Cone => cone(&v, &dir),
        Command::Decompose { alpha } => decompose_cmd(&v, alpha.as_deref(), &dir),
        Command::Tree => tree_cmd(&v, &dir),
        Command::Superhedge => superhedge(&v, &dir),
        Command::Eps => eps(&v, &dir),
        Command::Price => price(&v, &dir),
        Command::Verify => unreachable!(),
    }
}

fn rat_rows(rows: &[Vec<Rat>]) -> Value {
    json!(rows.iter().map(|r| format_rats(r)).collect::<Vec<_>>())
}

fn cone(v: &Validated, dir: &Path) -> Run<Value> {
    let s = &v.spec;
    let out = json!({
        "d": s.d(),
        "mu": rat_rows(s.exchange.rows()),
        "pi": rat_rows(&s.exchange.pi_matrix()),
        "generators": rat_rows(&s.generators),
        "dual_generators": rat_rows(&s.dual_generators),
        "unit_normals": s.unit_normals,
        "degenerate": s.degenerate,
    });
    write_json(dir, "cone.json", &out)?;
    Ok(out)
}

fn decompose_cmd(v: &Validated, alpha: Option<&[String]>, dir: &Path) -> Run<Value> {
    let d = v.spec.d();
    let alpha = match alpha {
        Some(a) => parse_rats(a).map_err(Error::from)?,
        None => vec![rat_int(1); d],
    };
    let b = decompose(&v.spec, &alpha)?;
    let back = reconstruct(&v.spec.exchange, &b);
    if back != alpha {
        return Err(Failure::Breach(format!("decompose reconstructs {:?}, not alpha", format_rats(&back))));
    }
    let out = json!({"alpha": format_rats(&alpha), "b": rat_rows(&b)});
    write_json(dir, "decompose.json", &out)?;
    Ok(out)
}

/// `Σ_{ij} b^{ij} g^{ij}`.
fn reconstruct(exchange: &ExchangeMatrix, b: &[Vec<Rat>]) -> Vec<Rat> {
    let d = exchange.d();
    let mut acc = vec![rat_int(0); d];
    for (i, j) in exchange.pairs() {
        let g = exchange.generator(i, j);
        for k in 0..d {
            acc[k] += &b[i][j] * &g[k];
        }
    }
    acc
}

fn tree_json(tree: &PriceTree, z: &ConsistentPriceProcess) -> Value {
    let nodes: Vec<Value> = tree
        .nodes
        .iter()
        .zip(&z.z)
        .map(|(n, z)| {
            json!({
                "id": n.id,
                "level": n.level,
                "parent": n.parent,
                "children": n.children,
                "signs": n.signs,
                "price": n.price,
                "price_exact": format_rats(&n.price_exact),
                "prob": format_rat(&n.prob),
                "Z": format_rats(z),
            })
        })
        .collect();
    json!({"d": tree.d, "m": tree.m, "periods": tree.periods, "times": tree.times, "nodes": nodes})
}

fn tree_cmd(v: &Validated, dir: &Path) -> Run<Value> {
    let tree = build_tree(&v.model, v.config.periods)?;
    let z = find_consistent_z(&tree, &v.spec)?;
    write_json(dir, "tree.json", &tree_json(&tree, &z))?;
    Ok(json!({"nodes": tree.nodes.len(), "leaves": tree.leaves().len(), "periods": tree.periods}))
}

fn superhedge(v: &Validated, dir: &Path) -> Run<Value> {
    let tree = build_tree(&v.model, v.config.periods)?;
    let res = backward_sets(&tree, &v.spec, &v.claim)?;
    let mut dpp = Vec::new();
    for u in 1..tree.periods {
        let ok = dpp_check(&tree, &v.spec, &res, u)?;
        if !ok {
            return Err(Failure::Breach(format!("dynamic programming principle fails at level {u}")));
        }
        dpp.push(u);
    }
    // Every root vertex is in the set; shifting it down by any positive
    // vector leaves the set, since the set is upward closed.
    let root = res.root();
    let step = ratgeom::rat(1, 100);
    let mut probes = 0;
    for vert in root.vertices() {
        let below: Vec<Rat> = vert.iter().map(|x| x - &step).collect();
        for (p, want) in [(vert.clone(), true), (below, false)] {
            let recursion = root_contains(&res, &p)?;
            let oracle = oracle_membership(&tree, &v.spec, &v.claim, &p)?;
            if recursion != want || oracle != want {
                return Err(Failure::Breach(format!(
                    "membership of {:?}: recursion {recursion}, oracle {oracle}, expected {want}",
                    format_rats(&p)
                )));
            }
            probes += 1;
        }
    }
    write_json(dir, "superhedge.json", &res.to_json())?;
    let mut csv = String::from(&(0..tree.d).map(|i| format!("x{}", i + 1)).collect::<Vec<_>>().join(","));
    csv.push('\n');
    for vert in root.vertices() {
        csv.push_str(&vert.iter().map(|x| format!("{}", rat_to_f64(x))).collect::<Vec<_>>().join(","));
        csv.push('\n');
    }
    write(dir, "root_vertices.csv", &csv)?;
    Ok(json!({
        "root": ratgeom::to_json_value(root),
        "dpp_levels": dpp,
        "oracle_probes": probes,
        "levels": res.trace.iter().map(|t| json!({"level": t.level, "nodes": t.nodes, "max_vertices": t.max_vertices, "max_rays": t.max_rays})).collect::<Vec<_>>(),
    }))
}

fn eps(v: &Validated, dir: &Path) -> Run<Value> {
    let c = &v.config;
    if c.eps.is_empty() {
        return Err(Error::Config("eps grid is empty".into()).into());
    }
    let mut grid = c.eps.clone();
    grid.sort_by(f64::total_cmp);
    let lipschitz = rat_to_f64(&v.claim.lipschitz);
    let mut rows = Vec::new();
    let mut csv = String::new();
    let mut prev = false;
    match c.mode {
        Mode::Tree => {
            let tree = build_tree(&v.model, c.periods)?;
            let xi = match &c.xi {
                Some(x) => x.clone(),
                None => {
                    let res = backward_sets(&tree, &v.spec, &v.claim)?;
                    res.root().vertices()[0].iter().map(rat_to_f64).collect()
                }
            };
            csv.push_str("eps,accepted,subsets_tried,set_ops\n");
            for &e in &grid {
                let q = EpsQuery { xi: xi.clone(), eps: e, lipschitz, node: 0 };
                let r = eps_value_membership_tree(&tree, &v.spec, &v.claim, &q, DEFAULT_EPS_BUDGET)?;
                check_monotone(prev, r.accepted, e)?;
                prev = r.accepted;
                csv.push_str(&format!("{e},{},{},{}\n", r.accepted, r.subsets_tried, r.set_ops));
                rows.push(json!({"eps": e, "accepted": r.accepted, "witness": r.witness, "subsets_tried": r.subsets_tried, "set_ops": r.set_ops}));
            }
            let out = json!({"mode": "tree", "xi": xi, "queries": rows});
            write_json(dir, "eps.json", &out)?;
            write(dir, "eps.csv", &csv)?;
            Ok(out)
        }
        Mode::Mc => {
            let xi = c.xi.clone().ok_or_else(|| Failure::Domain(Error::Config("mc eps queries need xi".into())))?;
            let paths = simulate_paths(&v.model, c.n_paths, c.n_steps, c.seed)?;
            csv.push_str("eps,accepted,successes,frequency\n");
            for &e in &grid {
                let q = EpsQuery { xi: xi.clone(), eps: e, lipschitz, node: 0 };
                let r = eps_value_membership_mc(&paths, &v.spec, &v.claim, &q)?;
                check_monotone(prev, r.accepted, e)?;
                prev = r.accepted;
                csv.push_str(&format!("{e},{},{},{}\n", r.accepted, r.successes, r.frequency));
                rows.push(json!({"eps": e, "accepted": r.accepted, "successes": r.successes, "n_paths": r.n_paths, "frequency": r.frequency}));
            }
            let out = json!({"mode": "mc", "xi": xi, "seed": c.seed, "queries": rows});
            write_json(dir, "eps.json", &out)?;
            write(dir, "eps.csv", &csv)?;
            Ok(out)
        }
    }
}

fn check_monotone(prev: bool, now: bool, eps: f64) -> Run<()> {
    if prev && !now {
        return Err(Failure::Breach(format!("eps membership lost when eps grew to {eps}")));
    }
    Ok(())
}

fn price(v: &Validated, dir: &Path) -> Run<Value> {
    let c = &v.config;
    match c.mode {
        Mode::Tree => {
            let tree = build_tree(&v.model, c.periods)?;
            let z = find_consistent_z(&tree, &v.spec)?;
            let strategy = random_tree_strategy(&tree, &v.spec, &mut rng(c.seed))?;
            let v0 = vec![rat_int(1); tree.d];
            let rep = tree_supermartingale_check(&tree, &v.spec, &z, &strategy, &v0)?;
            if rep.violations > 0 {
                return Err(Failure::Breach(format!("{} supermartingale violations", rep.violations)));
            }
            let out = json!({
                "mode": "tree",
                "Z": z.to_json(),
                "supermartingale": {
                    "nodes_checked": rep.nodes_checked,
                    "violations": rep.violations,
                    "strict_nodes": rep.strict_nodes,
                    "worst_node": rep.worst_node,
                    "worst_margin": format_rat(&rep.worst_margin),
                },
            });
            write_json(dir, "price.json", &out)?;
            Ok(out)
        }
        Mode::Mc => {
            let rep = reweighting_check(&v.model, &v.claim, c.n_paths, c.n_steps, c.seed)?;
            let paths = simulate_paths(&v.model, c.n_paths, c.n_steps, c.seed)?;
            let z0 = conehedge::pricing::mc_consistent_z(&v.model, &paths)?;
            let d = v.model.d();
            let z_root: Vec<f64> = z0[..d].to_vec();
            let theta = random_theta(d, c.n_steps, &mut rng(c.seed));
            let k = theta_to_k(&theta, &v.spec.exchange);
            let sm = mc_supermartingale_check(&v.model, &paths, &v.spec, &k, &vec![1.0; d])?;
            if !rep.passes || !sm.passes {
                return Err(Failure::Breach("Monte Carlo pricing checks failed".into()));
            }
            let out = json!({
                "mode": "mc",
                "seed": c.seed,
                "Z": {"root": z_root},
                "reweighting": {"reweighted": rep.reweighted, "reweighted_se": rep.reweighted_se, "direct": rep.direct, "direct_se": rep.direct_se},
                "supermartingale": {"mean": sm.mean, "initial": sm.initial, "std_error": sm.std_error},
            });
            write_json(dir, "price.json", &out)?;
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use conehedge::fixtures::golden_fixture;

    #[test]
    fn golden_reconstruction() {
        let f = golden_fixture();
        let alpha = vec![rat_int(1), rat_int(1)];
        let b = decompose(&f.spec, &alpha).unwrap();
        assert_eq!(reconstruct(&f.spec.exchange, &b), alpha);
    }
}
