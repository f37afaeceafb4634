//! Complexity-claim measurements: anchor-selection operation counts,
//! attention pair counts against the N(n_k + A) budget and the dense N^2
//! baseline, anchor-set sizes, and optional forward-pass wall time. Counts
//! are deterministic and machine-independent; wall clock is a secondary,
//! opt-in signal so that benchmark output stays byte-identical by default.

use crate::anchor::select_k_ds;
use crate::attention::LayerParams;
use crate::encoding::{compute_receptive_fields, SpdBucketing};
use crate::error::{Error, Result};
use crate::graph::{generate, Graph, GraphFamily};
use crate::model::seeded_features;
use std::time::Instant;

/// Model width/heads used for the timed forward pass.
const TIMING_WIDTH: usize = 16;
const TIMING_HEADS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRecord {
    pub family: String,
    pub n: u32,
    pub m: u64,
    pub k: u32,
    pub seed: u64,
    pub anchors: usize,
    pub n_k_max: usize,
    pub select_ops: u64,
    pub attn_pairs: u64,
    pub dense_pairs: u64,
    pub wall_ns: u64,
}

/// Graph families swept by the benchmark. Erdős–Rényi uses p = 8/n so the
/// expected degree stays constant and only N scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchFamily {
    Cycle,
    Path,
    Star,
    Grid,
    ErdosRenyi,
    Complete,
}

impl BenchFamily {
    pub fn name(&self) -> &'static str {
        match self {
            BenchFamily::Cycle => "cycle",
            BenchFamily::Path => "path",
            BenchFamily::Star => "star",
            BenchFamily::Grid => "grid",
            BenchFamily::ErdosRenyi => "er",
            BenchFamily::Complete => "complete",
        }
    }

    pub fn parse(name: &str) -> Result<BenchFamily> {
        match name {
            "cycle" => Ok(BenchFamily::Cycle),
            "path" => Ok(BenchFamily::Path),
            "star" => Ok(BenchFamily::Star),
            "grid" => Ok(BenchFamily::Grid),
            "er" => Ok(BenchFamily::ErdosRenyi),
            "complete" => Ok(BenchFamily::Complete),
            other => Err(Error::Input(format!("unknown bench family {other:?}"))),
        }
    }

    fn build(&self, size: u32, seed: u64) -> Result<Graph> {
        match self {
            BenchFamily::Cycle => generate(&GraphFamily::Cycle(size)),
            BenchFamily::Path => generate(&GraphFamily::Path(size)),
            BenchFamily::Star => generate(&GraphFamily::Star(size)),
            BenchFamily::Grid => {
                let w = (size as f64).sqrt().round().max(1.0) as u32;
                let h = size.div_ceil(w);
                generate(&GraphFamily::Grid(w, h))
            }
            BenchFamily::ErdosRenyi => {
                let p = (8.0 / size as f64).min(1.0);
                generate(&GraphFamily::ErdosRenyi(size, p, seed))
            }
            BenchFamily::Complete => generate(&GraphFamily::Complete(size)),
        }
    }
}

/// Σ_v |N_k(v) ∪ S| and max_v |N_k(v)| without materializing the receptive
/// field: one depth-k search per node, counting which anchors it already
/// contains.
fn count_attention_pairs(g: &Graph, anchors: &[u32], k: u32) -> (u64, usize) {
    let n = g.node_count() as usize;
    let mut is_anchor = vec![false; n];
    for &a in anchors {
        is_anchor[a as usize] = true;
    }
    let mut scratch = vec![u32::MAX; n];
    let mut pairs = 0u64;
    let mut n_k_max = 0usize;
    for v in 0..n as u32 {
        let hood = g.k_hop_into_scratch(v, k, &mut scratch);
        n_k_max = n_k_max.max(hood.len());
        let anchors_inside = hood.iter().filter(|&&(u, _)| is_anchor[u as usize]).count();
        pairs += (hood.len() + anchors.len() - anchors_inside) as u64;
    }
    (pairs, n_k_max)
}

fn time_forward_ns(g: &Graph, anchors: &crate::anchor::AnchorSet, k: u32) -> Result<u64> {
    let rf = compute_receptive_fields(g, anchors, SpdBucketing::for_radius(k))?;
    let p = LayerParams::seeded(TIMING_HEADS, TIMING_WIDTH, rf.bucketing().bucket_count(), 1)?;
    let x = seeded_features(g.node_count() as usize, TIMING_WIDTH, 1);
    let mut best = u64::MAX;
    for _ in 0..3 {
        let start = Instant::now();
        let out = crate::attention::transformer_block_forward(&x, &rf, &p)?;
        let elapsed = start.elapsed().as_nanos() as u64;
        // Touch the output so the pass cannot be elided.
        if !out.is_finite() {
            return Err(Error::Numeric("forward pass produced NaN/Inf".into()));
        }
        best = best.min(elapsed);
    }
    Ok(best)
}

/// One record per (size, seed). Counts are deterministic; when
/// `time_forward` is set, wall_ns holds the best of three forward passes,
/// otherwise it stays 0 so repeated runs emit identical bytes.
pub fn scaling_sweep(
    family: BenchFamily,
    sizes: &[u32],
    k: u32,
    seeds: &[u64],
    time_forward: bool,
) -> Result<Vec<ScalingRecord>> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Input("sizes must be strictly ascending".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Input("need at least one seed".into()));
    }
    let mut records = Vec::with_capacity(sizes.len() * seeds.len());
    for &size in sizes {
        for &seed in seeds {
            let g = family.build(size, seed)?;
            let s = select_k_ds(&g, k, seed)?;
            let (attn_pairs, n_k_max) = count_attention_pairs(&g, &s.nodes, k);
            let wall_ns = if time_forward {
                time_forward_ns(&g, &s, k)?
            } else {
                0
            };
            let n = g.node_count();
            records.push(ScalingRecord {
                family: family.name().to_string(),
                n,
                m: g.edge_count(),
                k,
                seed,
                anchors: s.nodes.len(),
                n_k_max,
                select_ops: s.op_count,
                attn_pairs,
                dense_pairs: n as u64 * n as u64,
                wall_ns,
            });
        }
    }
    Ok(records)
}

/// Least-squares slope of y against x. Needs at least 4 points and a
/// non-degenerate spread in x.
pub fn fit_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 4 {
        return Err(Error::Input(format!(
            "slope fit needs >= 4 points, got {}",
            xs.len().min(ys.len())
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        return Err(Error::Input("slope fit needs distinct x values".into()));
    }
    Ok(num / den)
}

/// Scaling exponent: slope of log(attn_pairs) against log(n).
pub fn fit_exponent(records: &[ScalingRecord]) -> Result<f64> {
    let xs: Vec<f64> = records.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = records.iter().map(|r| (r.attn_pairs as f64).ln()).collect();
    fit_log_slope(&xs, &ys)
}

pub const CSV_HEADER: &str =
    "family,n,m,k,seed,anchors,n_k_max,select_ops,attn_pairs,dense_pairs,wall_ns";

pub fn records_to_csv(records: &[ScalingRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.family,
            r.n,
            r.m,
            r.k,
            r.seed,
            r.anchors,
            r.n_k_max,
            r.select_ops,
            r.attn_pairs,
            r.dense_pairs,
            r.wall_ns
        ));
    }
    out
}
