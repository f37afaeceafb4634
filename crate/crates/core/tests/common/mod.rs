//! Oracles shared by the property and acceptance suites. Everything here is
//! deliberately independent of the implementation paths it checks:
//! all-pairs distances come from Floyd–Warshall rather than BFS, the dense
//! attention reference builds a full N×N score matrix with -inf masking,
//! and gradients are re-derived with central finite differences.

#![allow(dead_code)]

use anchorgt::{AnchorSet, Graph, GraphFamily, LayerParams, Matrix, ReceptiveField, SplitMix64};
use std::collections::HashSet;

pub const INF: u32 = u32::MAX / 2;

/// All-pairs shortest path distances by Floyd–Warshall.
pub fn floyd_warshall(g: &Graph) -> Vec<Vec<u32>> {
    let n = g.node_count() as usize;
    let mut dist = vec![vec![INF; n]; n];
    for v in 0..n {
        dist[v][v] = 0;
        for &u in g.neighbors(v as u32) {
            dist[v][u as usize] = 1;
        }
    }
    for mid in 0..n {
        for i in 0..n {
            let dim = dist[i][mid];
            if dim == INF {
                continue;
            }
            for j in 0..n {
                let alt = dim + dist[mid][j];
                if alt < dist[i][j] {
                    dist[i][j] = alt;
                }
            }
        }
    }
    dist
}

/// Coverage predicate recomputed from the all-pairs oracle.
pub fn coverage_by_oracle(g: &Graph, anchors: &[u32], k: u32) -> bool {
    let fw = floyd_warshall(g);
    (0..g.node_count() as usize).all(|v| anchors.iter().any(|&a| fw[v][a as usize] <= k))
}

/// Dense biased attention with -inf masking, computed from the all-pairs
/// distance oracle: the reference the sparse path must agree with.
pub fn dense_attention_reference(
    x: &Matrix,
    g: &Graph,
    anchors: &[u32],
    k: u32,
    d_max: u32,
    p: &LayerParams,
) -> Matrix {
    let n = x.rows();
    let d = p.d;
    let dh = p.d_head();
    let inv_sqrt = 1.0 / (dh as f64).sqrt();
    let fw = floyd_warshall(g);
    let is_anchor: HashSet<u32> = anchors.iter().copied().collect();
    let unreachable_bucket = d_max + 1;

    let mut concat = Matrix::zeros(n, d);
    for t in 0..p.h {
        // Explicit projections.
        let project = |w: &Matrix| -> Vec<Vec<f64>> {
            (0..n)
                .map(|r| {
                    (0..dh)
                        .map(|j| (0..d).map(|i| x.get(r, i) * w.get(i, j)).sum())
                        .collect()
                })
                .collect()
        };
        let q = project(&p.w_q[t]);
        let kk = project(&p.w_k[t]);
        let vv = project(&p.w_v[t]);
        for v in 0..n {
            let mut scores = vec![f64::NEG_INFINITY; n];
            for u in 0..n {
                let spd = fw[v][u];
                let in_field = spd <= k || is_anchor.contains(&(u as u32));
                if !in_field {
                    continue;
                }
                let bucket = if spd >= INF {
                    unreachable_bucket
                } else {
                    spd.min(d_max)
                };
                let dot: f64 = (0..dh).map(|j| q[v][j] * kk[u][j]).sum();
                scores[u] = dot * inv_sqrt + p.bias_table[t][bucket as usize];
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            let mut exps = vec![0.0; n];
            for u in 0..n {
                if scores[u] > f64::NEG_INFINITY {
                    exps[u] = (scores[u] - max).exp();
                    z += exps[u];
                }
            }
            for u in 0..n {
                if exps[u] > 0.0 {
                    let alpha = exps[u] / z;
                    for j in 0..dh {
                        let slot = t * dh + j;
                        concat.set(v, slot, concat.get(v, slot) + alpha * vv[u][j]);
                    }
                }
            }
        }
    }
    // Output projection.
    let mut out = Matrix::zeros(n, d);
    for r in 0..n {
        for j in 0..d {
            let mut acc = 0.0;
            for i in 0..d {
                acc += concat.get(r, i) * p.w_o.get(i, j);
            }
            out.set(r, j, acc);
        }
    }
    out
}

/// Central finite differences of a scalar function, step 1e-5.
pub fn finite_difference_grad(f: impl Fn(&[f64]) -> f64, theta: &[f64]) -> Vec<f64> {
    const STEP: f64 = 1e-5;
    let mut grad = Vec::with_capacity(theta.len());
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + STEP;
        let plus = f(&probe);
        probe[i] = theta[i] - STEP;
        let minus = f(&probe);
        probe[i] = theta[i];
        grad.push((plus - minus) / (2.0 * STEP));
    }
    grad
}

/// Worst per-coordinate relative error, guarded at 1 for tiny gradients.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
        .fold(0.0, f64::max)
}

pub fn seeded_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = SplitMix64::new(seed);
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = rng.uniform(1.0);
    }
    m
}

pub fn anchor_set(nodes: Vec<u32>, k: u32) -> AnchorSet {
    AnchorSet {
        order: nodes.clone(),
        nodes,
        k,
        seed: 0,
        op_count: 0,
    }
}

/// Deterministic Erdős–Rényi graph that is connected: scans seeds upward
/// from `seed` until the sample is connected.
pub fn connected_er(n: u32, p: f64, seed: u64) -> Graph {
    for offset in 0..1000 {
        let g = anchorgt::generate(&GraphFamily::ErdosRenyi(n, p, seed + offset)).unwrap();
        if g.is_connected() {
            return g;
        }
    }
    panic!("no connected ER(n={n}, p={p}) found near seed {seed}");
}

/// Mixed family corpus used by the property-style acceptance criteria.
pub fn property_corpus() -> Vec<(String, Graph)> {
    let mut corpus: Vec<(String, Graph)> = vec![
        (
            "cycle6".into(),
            anchorgt::generate(&GraphFamily::Cycle(6)).unwrap(),
        ),
        (
            "cycle9".into(),
            anchorgt::generate(&GraphFamily::Cycle(9)).unwrap(),
        ),
        (
            "path5".into(),
            anchorgt::generate(&GraphFamily::Path(5)).unwrap(),
        ),
        (
            "path1".into(),
            anchorgt::generate(&GraphFamily::Path(1)).unwrap(),
        ),
        (
            "star6".into(),
            anchorgt::generate(&GraphFamily::Star(6)).unwrap(),
        ),
        (
            "star10".into(),
            anchorgt::generate(&GraphFamily::Star(10)).unwrap(),
        ),
        (
            "grid3x3".into(),
            anchorgt::generate(&GraphFamily::Grid(3, 3)).unwrap(),
        ),
        (
            "grid4x5".into(),
            anchorgt::generate(&GraphFamily::Grid(4, 5)).unwrap(),
        ),
        (
            "complete8".into(),
            anchorgt::generate(&GraphFamily::Complete(8)).unwrap(),
        ),
        ("two_triangles".into(), anchorgt::two_triangles()),
        (
            "cycle5_plus_path4".into(),
            anchorgt::disjoint_union(
                &anchorgt::generate(&GraphFamily::Cycle(5)).unwrap(),
                &anchorgt::generate(&GraphFamily::Path(4)).unwrap(),
            )
            .unwrap(),
        ),
    ];
    let mut rng = SplitMix64::new(0xC0FFEE);
    for i in 0..15 {
        let n = 8 + (rng.below(57)) as u32; // 8..=64
        let c = 1.0 + rng.next_f64() * 7.0;
        let p = (c / n as f64).min(1.0);
        let g = anchorgt::generate(&GraphFamily::ErdosRenyi(n, p, rng.next_u64())).unwrap();
        corpus.push((format!("er{i}_n{n}"), g));
    }
    corpus
}

/// Random permutation of 0..n.
pub fn random_permutation(n: u32, seed: u64) -> Vec<u32> {
    let mut rng = SplitMix64::new(seed);
    let mut perm: Vec<u32> = (0..n).collect();
    for i in (1..n as usize).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        perm.swap(i, j);
    }
    perm
}

/// Receptive field lookup: sorted entries for node v as a map.
pub fn entries_map(rf: &ReceptiveField, v: u32) -> std::collections::BTreeMap<u32, u32> {
    rf.entries(v).iter().copied().collect()
}

// --- exhaustive small-graph enumeration --------------------------------------

fn pair_index(n: usize, mut a: usize, mut b: usize) -> usize {
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    // Index of (a, b) with a < b in lexicographic order.
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

fn mask_is_connected(n: usize, mask: u32) -> bool {
    if n == 0 {
        return true;
    }
    let mut adj = vec![0u32; n];
    let mut idx = 0;
    for a in 0..n {
        for b in (a + 1)..n {
            if mask & (1 << idx) != 0 {
                adj[a] |= 1 << b;
                adj[b] |= 1 << a;
            }
            idx += 1;
        }
    }
    let mut seen = 1u32;
    let mut frontier = 1u32;
    while frontier != 0 {
        let mut next = 0u32;
        let mut f = frontier;
        while f != 0 {
            let v = f.trailing_zeros() as usize;
            f &= f - 1;
            next |= adj[v] & !seen;
        }
        seen |= next;
        frontier = next;
    }
    seen.count_ones() as usize == n
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    fn heap(kk: usize, items: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if kk == 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..kk {
            heap(kk - 1, items, out);
            if kk % 2 == 0 {
                items.swap(i, kk - 1);
            } else {
                items.swap(0, kk - 1);
            }
        }
    }
    heap(n, &mut items, &mut out);
    out
}

/// All connected graphs on exactly `n` nodes up to isomorphism, by
/// exhausting every labeled graph and keeping the lexicographically
/// smallest edge mask over all node permutations.
pub fn connected_graphs_up_to_iso(n: usize) -> Vec<Graph> {
    assert!((1..=6).contains(&n), "enumeration written for n <= 6");
    let pairs = n * (n - 1) / 2;
    let perms = permutations(n);
    // For each permutation, where each pair index maps to.
    let pair_maps: Vec<Vec<usize>> = perms
        .iter()
        .map(|perm| {
            let mut map = vec![0; pairs];
            let mut idx = 0;
            for a in 0..n {
                for b in (a + 1)..n {
                    map[idx] = pair_index(n, perm[a], perm[b]);
                    idx += 1;
                }
            }
            map
        })
        .collect();

    let mut canon_seen = HashSet::new();
    let mut out = Vec::new();
    for mask in 0..(1u32 << pairs) {
        if !mask_is_connected(n, mask) {
            continue;
        }
        let mut canon = u32::MAX;
        for map in &pair_maps {
            let mut image = 0u32;
            let mut m = mask;
            while m != 0 {
                let bit = m.trailing_zeros() as usize;
                m &= m - 1;
                image |= 1 << map[bit];
            }
            canon = canon.min(image);
        }
        if canon_seen.insert(canon) {
            let mut edges = Vec::new();
            let mut idx = 0;
            for a in 0..n as u32 {
                for b in (a + 1)..n as u32 {
                    if canon & (1 << idx) != 0 {
                        edges.push((a, b));
                    }
                    idx += 1;
                }
            }
            out.push(Graph::from_edge_list(n as u32, &edges).unwrap());
        }
    }
    out
}
