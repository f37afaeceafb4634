//! Command-line front end. Every subcommand is deterministic given its
//! flags: all randomness flows through explicit seeds, and timing is opt-in,
//! so identical invocations produce byte-identical output.
//!
//! Exit codes: 0 success, 1 input error, 2 internal invariant violation.

use anchorgt::bench::{fit_log_slope, records_to_csv, scaling_sweep, BenchFamily};
use anchorgt::*;
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "anchorgt",
    about = "Anchor-based sparse graph attention toolkit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct GraphArgs {
    /// Edge-list file: first line "N M", then M lines "u v".
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Inline generator spec, e.g. cycle:6, path:5, star:6, grid:3x3,
    /// complete:8, single:1, er:100:0.05:7, union:cycle:3+cycle:3.
    #[arg(long)]
    gen: Option<String>,
}

#[derive(Args)]
struct SecondGraphArgs {
    /// Edge-list file for the second graph.
    #[arg(long)]
    graph2: Option<PathBuf>,
    /// Generator spec for the second graph.
    #[arg(long)]
    gen2: Option<String>,
}

#[derive(Args)]
struct ModelArgs {
    /// Coverage radius of the anchor set.
    #[arg(long, default_value_t = 1)]
    k: u32,
    /// SPD clamp ceiling; defaults to 2k+2.
    #[arg(long)]
    dmax: Option<u32>,
    /// Model width.
    #[arg(long, default_value_t = 8)]
    d: usize,
    /// Attention heads.
    #[arg(long, default_value_t = 2)]
    heads: usize,
    /// Stacked layers.
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// Graph readout: mean or sum.
    #[arg(long, default_value = "mean")]
    readout: String,
    #[arg(long, default_value_t = 1)]
    param_seed: u64,
    #[arg(long, default_value_t = 1)]
    anchor_seed: u64,
    #[arg(long, default_value_t = 1)]
    feature_seed: u64,
}

impl ModelArgs {
    fn to_config(&self) -> Result<ModelConfig> {
        let readout = match self.readout.as_str() {
            "mean" => Readout::Mean,
            "sum" => Readout::Sum,
            other => return Err(Error::Input(format!("unknown readout {other:?}"))),
        };
        Ok(ModelConfig {
            layers: self.layers,
            d: self.d,
            h: self.heads,
            k: self.k,
            d_max: self.dmax.unwrap_or(2 * self.k + 2),
            readout,
            param_seed: self.param_seed,
            anchor_seed: self.anchor_seed,
            feature_seed: self.feature_seed,
        })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Select a k-dominating anchor set and report it as JSON.
    Anchors {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the receptive field with SPD buckets as CSV.
    Rf {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long)]
        dmax: Option<u32>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the stacked model and emit the graph embedding.
    Forward {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the analytic backward pass against central finite differences.
    Gradcheck {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value_t = 8)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        heads: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Joint WL / randomized-model verdict for a pair of graphs.
    Distinguish {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        graph2: SecondGraphArgs,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value_t = 1)]
        layers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scaling sweep over a graph family; CSV plus a slope summary line.
    Bench {
        /// cycle, path, star, grid, er, or complete.
        #[arg(long)]
        family: String,
        /// "64:8192" doubles from the first size to the last; "64,96,128"
        /// lists sizes explicitly.
        #[arg(long, default_value = "64:8192")]
        sizes: String,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Measure forward-pass wall time (best of 3). Off by default so
        /// output stays byte-identical across runs.
        #[arg(long, default_value_t = false)]
        timing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_gen_spec(spec: &str) -> Result<Graph> {
    if let Some(rest) = spec.strip_prefix("union:") {
        let parts: Vec<&str> = rest.split('+').collect();
        if parts.len() < 2 {
            return Err(Error::Input("union spec needs at least two parts".into()));
        }
        let mut g = parse_atomic_spec(parts[0])?;
        for part in &parts[1..] {
            g = disjoint_union(&g, &parse_atomic_spec(part)?)?;
        }
        return Ok(g);
    }
    parse_atomic_spec(spec)
}

fn parse_atomic_spec(spec: &str) -> Result<Graph> {
    let fields: Vec<&str> = spec.split(':').collect();
    let usage = || Error::Input(format!("malformed generator spec {spec:?}"));
    let num = |s: &str| s.parse::<u32>().map_err(|_| usage());
    match fields.as_slice() {
        ["cycle", n] => generate(&GraphFamily::Cycle(num(n)?)),
        ["path", n] => generate(&GraphFamily::Path(num(n)?)),
        ["star", n] => generate(&GraphFamily::Star(num(n)?)),
        ["complete", n] => generate(&GraphFamily::Complete(num(n)?)),
        ["single", n] => generate(&GraphFamily::Edgeless(num(n)?)),
        ["grid", wh] => {
            let (w, h) = wh.split_once('x').ok_or_else(usage)?;
            generate(&GraphFamily::Grid(num(w)?, num(h)?))
        }
        ["er", n, p, seed] => {
            let p: f64 = p.parse().map_err(|_| usage())?;
            let seed: u64 = seed.parse().map_err(|_| usage())?;
            generate(&GraphFamily::ErdosRenyi(num(n)?, p, seed))
        }
        _ => Err(usage()),
    }
}

/// Loads a graph and returns it with a printable name.
fn load_graph(path: &Option<PathBuf>, gen: &Option<String>) -> Result<(String, Graph)> {
    match (path, gen) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)?;
            Ok((path.display().to_string(), graph::read_edge_list(&text)?))
        }
        (None, Some(spec)) => Ok((spec.clone(), parse_gen_spec(spec)?)),
        _ => Err(Error::Input(
            "provide exactly one of --graph or --gen".into(),
        )),
    }
}

fn parse_sizes(spec: &str) -> Result<Vec<u32>> {
    if let Some((lo, hi)) = spec.split_once(':') {
        let lo: u32 = lo
            .parse()
            .map_err(|_| Error::Input(format!("bad size {lo:?}")))?;
        let hi: u32 = hi
            .parse()
            .map_err(|_| Error::Input(format!("bad size {hi:?}")))?;
        if lo == 0 || lo > hi {
            return Err(Error::Input(format!("bad size range {spec:?}")));
        }
        let mut sizes = Vec::new();
        let mut n = lo;
        while n <= hi {
            sizes.push(n);
            match n.checked_mul(2) {
                Some(next) => n = next,
                None => break,
            }
        }
        Ok(sizes)
    } else {
        spec.split(',')
            .map(|s| {
                s.parse::<u32>()
                    .map_err(|_| Error::Input(format!("bad size {s:?}")))
            })
            .collect()
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

enum Failure {
    Input(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::Input(e.to_string())
    }
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.cmd {
        Cmd::Anchors {
            graph,
            k,
            seed,
            out,
        } => {
            let (_, g) = load_graph(&graph.graph, &graph.gen)?;
            let s = select_k_ds(&g, k, seed)?;
            let coverage_ok = verify_k_ds(&g, &s);
            let report = json!({
                "k": s.k,
                "seed": s.seed,
                "anchors": s.nodes,
                "op_count": s.op_count,
                "coverage_ok": coverage_ok,
            });
            emit(&format!("{report}\n"), &out)?;
            if !coverage_ok {
                return Err(Failure::Internal(
                    "selected anchor set does not cover the graph".into(),
                ));
            }
        }
        Cmd::Rf {
            graph,
            k,
            dmax,
            seed,
            out,
        } => {
            let (_, g) = load_graph(&graph.graph, &graph.gen)?;
            let s = select_k_ds(&g, k, seed)?;
            let bucketing = match dmax {
                Some(d) => SpdBucketing::new(d),
                None => SpdBucketing::for_radius(k),
            };
            let rf = compute_receptive_fields(&g, &s, bucketing)?;
            emit(&rf.to_csv(), &out)?;
        }
        Cmd::Forward {
            graph,
            model,
            format,
            out,
        } => {
            let (_, g) = load_graph(&graph.graph, &graph.gen)?;
            let cfg = model.to_config()?;
            let (_, graph_embedding) = model_forward(&g, &cfg)?;
            let text = match format.as_str() {
                "json" => {
                    let report = json!({
                        "n": g.node_count(),
                        "d": cfg.d,
                        "layers": cfg.layers,
                        "readout": if cfg.readout == Readout::Mean { "mean" } else { "sum" },
                        "graph_embedding": graph_embedding,
                    });
                    format!("{report}\n")
                }
                "csv" => {
                    let row: Vec<String> = graph_embedding.iter().map(|v| format!("{v}")).collect();
                    format!("{}\n", row.join(","))
                }
                other => return Err(Failure::Input(format!("unknown format {other:?}"))),
            };
            emit(&text, &out)?;
        }
        Cmd::Gradcheck {
            graph,
            k,
            d,
            heads,
            seed,
            out,
        } => {
            let (_, g) = load_graph(&graph.graph, &graph.gen)?;
            let max_rel_err = gradcheck(&g, k, d, heads, seed)?;
            let pass = max_rel_err < 1e-5;
            let verdict = if pass { "PASS" } else { "FAIL" };
            emit(
                &format!("max_rel_err = {max_rel_err:.3e} (threshold 1e-5): {verdict}\n"),
                &out,
            )?;
            if !pass {
                return Err(Failure::Internal(format!(
                    "analytic gradients deviate from finite differences by {max_rel_err:.3e}"
                )));
            }
        }
        Cmd::Distinguish {
            graph,
            graph2,
            k,
            layers,
            out,
        } => {
            let (name1, g1) = load_graph(&graph.graph, &graph.gen)?;
            let (name2, g2) = load_graph(&graph2.graph2, &graph2.gen2)?;
            let cfg = ModelConfig {
                layers,
                ..ModelConfig::new(1, 8, 2, k)
            };
            let wl = match wl_refine(&g1, &g2, g1.node_count() + g2.node_count() + 1) {
                WlOutcome::Distinguished => "distinguished",
                WlOutcome::StableEqual => "stable-equal",
            };
            let model = match distinguish_randomized(&g1, &g2, &cfg)? {
                DistinguishOutcome::Distinguished => "distinguished",
                DistinguishOutcome::NotDistinguished => "not-distinguished",
            };
            let dist_json = |g: &Graph| -> Result<serde_json::Value> {
                let dist = enumerate_greedy_distribution(g, k, model::MAX_ENUM_NODES)?;
                let mut sizes: std::collections::BTreeMap<String, String> = Default::default();
                for (nodes, prob) in dist {
                    sizes.insert(format!("{nodes:?}"), prob.to_string());
                }
                Ok(json!(sizes))
            };
            let report = json!({
                "pair": [name1, name2],
                "wl": wl,
                "anchorgt": model,
                "anchor_set_distributions": {
                    "graph1": dist_json(&g1)?,
                    "graph2": dist_json(&g2)?,
                },
            });
            emit(&format!("{report}\n"), &out)?;
        }
        Cmd::Bench {
            family,
            sizes,
            k,
            seed,
            timing,
            out,
        } => {
            let family = BenchFamily::parse(&family)?;
            let sizes = parse_sizes(&sizes)?;
            let records = scaling_sweep(family, &sizes, k, &[seed], timing)?;
            let mut text = records_to_csv(&records);
            if records.len() >= 4 {
                let slope = fit_exponent(&records)?;
                let xs: Vec<f64> = records.iter().map(|r| (r.n as f64).ln()).collect();
                let ys: Vec<f64> = records
                    .iter()
                    .map(|r| (r.dense_pairs as f64).ln())
                    .collect();
                let dense = fit_log_slope(&xs, &ys)?;
                text.push_str(&format!(
                    "# fit_exponent attn_pairs={slope:.4} dense_pairs={dense:.4}\n"
                ));
            }
            emit(&text, &out)?;
        }
    }
    Ok(())
}

/// One-instance gradient check: seeded parameters, features and upstream
/// gradient; central differences with step 1e-5 over every parameter and
/// input coordinate.
fn gradcheck(g: &Graph, k: u32, d: usize, heads: usize, seed: u64) -> Result<f64> {
    let s = select_k_ds(g, k, seed)?;
    let rf = compute_receptive_fields(g, &s, SpdBucketing::for_radius(k))?;
    let p = LayerParams::seeded(heads, d, rf.bucketing().bucket_count(), seed ^ 0x9E37)?;
    let n = g.node_count() as usize;
    let x = model::seeded_features(n, d, seed ^ 0x79B9);
    let upstream = model::seeded_features(n, d, seed ^ 0x7F4A);

    let (g_x, grads) = transformer_block_backward(&x, &rf, &p, &upstream)?;
    let mut analytic = grads.to_flat();
    analytic.extend_from_slice(g_x.data());

    let loss_of = |params: &LayerParams, input: &Matrix| -> f64 {
        let out = transformer_block_forward(input, &rf, params).expect("forward in gradcheck");
        out.data()
            .iter()
            .zip(upstream.data())
            .map(|(o, u)| o * u)
            .sum()
    };

    const STEP: f64 = 1e-5;
    let mut numeric = Vec::with_capacity(analytic.len());
    let mut theta = p.to_flat();
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + STEP;
        let plus = loss_of(&p.from_flat(&theta)?, &x);
        theta[i] = orig - STEP;
        let minus = loss_of(&p.from_flat(&theta)?, &x);
        theta[i] = orig;
        numeric.push((plus - minus) / (2.0 * STEP));
    }
    let mut flat_x = x.data().to_vec();
    for i in 0..flat_x.len() {
        let orig = flat_x[i];
        flat_x[i] = orig + STEP;
        let plus = loss_of(&p, &Matrix::from_vec(n, d, flat_x.clone())?);
        flat_x[i] = orig - STEP;
        let minus = loss_of(&p, &Matrix::from_vec(n, d, flat_x.clone())?);
        flat_x[i] = orig;
        numeric.push((plus - minus) / (2.0 * STEP));
    }

    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1.0))
        .fold(0.0, f64::max))
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal invariant violation: {msg}");
            std::process::exit(2);
        }
    }
}
