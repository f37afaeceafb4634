//! Greedy k-dominating-set anchor selection, coverage verification, and
//! exhaustive enumeration of every greedy outcome on small graphs.
//!
//! Selection works on static degrees: degrees are computed once up front and
//! never refreshed as nodes are unlabeled. Each round picks uniformly at
//! random (seeded) among the labeled nodes of maximal degree, then unlabels
//! the pick together with its whole k-hop neighborhood, until no labeled
//! node remains. The resulting set S satisfies: every node is within
//! shortest-path distance k of some member of S.
//!
//! `op_count` tallies the elementary steps that carry the selection cost:
//! one degree read per node, every comparison of the degree sort, and every
//! adjacency query of the unlabeling traversals. The tally scales as
//! N(log2 N + n_k) where n_k is the largest k-hop neighborhood; the
//! benchmark harness checks that empirically.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ratio::Ratio;
use crate::rng::SplitMix64;
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// One selection result. `nodes` is the anchor set sorted ascending;
/// `order` preserves the sequence in which anchors were picked so a replay
/// can re-check greedy maximality step by step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorSet {
    pub nodes: Vec<u32>,
    pub order: Vec<u32>,
    pub k: u32,
    pub seed: u64,
    pub op_count: u64,
}

/// Merge sort that reports how many comparator calls it made. Sorting cost
/// is part of the selection complexity story, so it is measured rather than
/// delegated to the adaptive standard-library sort (which collapses to O(N)
/// on the constant-degree graphs the benchmark sweeps).
fn sort_by_degree_desc(degrees: &[u32]) -> (Vec<u32>, u64) {
    let n = degrees.len();
    let mut items: Vec<u32> = (0..n as u32).collect();
    let mut scratch = items.clone();
    let mut comparisons = 0u64;
    // (degree desc, id asc); id keeps the order canonical.
    let less_eq = |a: u32, b: u32, cmp: &mut u64| -> bool {
        *cmp += 1;
        let (da, db) = (degrees[a as usize], degrees[b as usize]);
        da > db || (da == db && a <= b)
    };
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = usize::min(lo + width, n);
            let hi = usize::min(lo + 2 * width, n);
            let (mut i, mut j, mut out) = (lo, mid, lo);
            while i < mid && j < hi {
                if less_eq(items[i], items[j], &mut comparisons) {
                    scratch[out] = items[i];
                    i += 1;
                } else {
                    scratch[out] = items[j];
                    j += 1;
                }
                out += 1;
            }
            scratch[out..out + (mid - i)].copy_from_slice(&items[i..mid]);
            let out2 = out + (mid - i);
            scratch[out2..out2 + (hi - j)].copy_from_slice(&items[j..hi]);
            lo = hi;
        }
        std::mem::swap(&mut items, &mut scratch);
        width *= 2;
    }
    (items, comparisons)
}

/// Degree buckets supporting uniform choice among the labeled max-degree
/// nodes and O(1) removal. Buckets are laid out from the sorted order, so
/// the cursor over them only ever moves toward smaller degrees.
struct DegreeBuckets {
    buckets: Vec<Vec<u32>>,
    bucket_of: Vec<u32>,
    pos_of: Vec<u32>,
    cursor: usize,
}

impl DegreeBuckets {
    fn new(sorted: &[u32], degrees: &[u32]) -> DegreeBuckets {
        let n = sorted.len();
        let mut buckets: Vec<Vec<u32>> = Vec::new();
        let mut bucket_of = vec![0u32; n];
        let mut pos_of = vec![0u32; n];
        let mut prev_deg = u32::MAX;
        for &v in sorted {
            let d = degrees[v as usize];
            if d != prev_deg {
                buckets.push(Vec::new());
                prev_deg = d;
            }
            let b = buckets.len() - 1;
            bucket_of[v as usize] = b as u32;
            pos_of[v as usize] = buckets[b].len() as u32;
            buckets[b].push(v);
        }
        DegreeBuckets {
            buckets,
            bucket_of,
            pos_of,
            cursor: 0,
        }
    }

    fn pick_max(&mut self, rng: &mut SplitMix64) -> u32 {
        while self.buckets[self.cursor].is_empty() {
            self.cursor += 1;
        }
        let group = &self.buckets[self.cursor];
        group[rng.below(group.len() as u64) as usize]
    }

    fn remove(&mut self, v: u32) {
        let b = self.bucket_of[v as usize] as usize;
        let pos = self.pos_of[v as usize] as usize;
        let bucket = &mut self.buckets[b];
        let last = *bucket.last().expect("bucket holds v");
        bucket[pos] = last;
        self.pos_of[last as usize] = pos as u32;
        bucket.pop();
    }
}

/// Greedy anchor selection. Deterministic for a fixed (graph, k, seed).
pub fn select_k_ds(g: &Graph, k: u32, seed: u64) -> Result<AnchorSet> {
    if g.node_count() == 0 {
        return Err(Error::Input(
            "anchor selection needs a non-empty graph".into(),
        ));
    }
    if k < 1 {
        return Err(Error::Input("coverage radius k must be >= 1".into()));
    }
    let n = g.node_count() as usize;
    let mut op_count = 0u64;

    let degrees: Vec<u32> = (0..n as u32).map(|v| g.degree(v)).collect();
    op_count += n as u64;

    let (sorted, comparisons) = sort_by_degree_desc(&degrees);
    op_count += comparisons;

    let mut buckets = DegreeBuckets::new(&sorted, &degrees);
    let mut labeled = vec![true; n];
    let mut remaining = n;
    let mut rng = SplitMix64::new(seed);
    let mut order = Vec::new();

    // Scratch distance array for the depth-bounded traversals; entries are
    // restored to u32::MAX after each wave.
    let mut dist = vec![u32::MAX; n];
    let mut wave: Vec<u32> = Vec::new();

    while remaining > 0 {
        let a = buckets.pick_max(&mut rng);
        order.push(a);
        labeled[a as usize] = false;
        buckets.remove(a);
        remaining -= 1;

        wave.clear();
        wave.push(a);
        dist[a as usize] = 0;
        let mut head = 0;
        while head < wave.len() {
            let u = wave[head];
            head += 1;
            let du = dist[u as usize];
            if du == k {
                break;
            }
            for &w in g.neighbors(u) {
                op_count += 1;
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = du + 1;
                    wave.push(w);
                }
            }
        }
        for &u in &wave {
            dist[u as usize] = u32::MAX;
            if labeled[u as usize] {
                labeled[u as usize] = false;
                buckets.remove(u);
                remaining -= 1;
            }
        }
    }

    let mut nodes = order.clone();
    nodes.sort_unstable();
    Ok(AnchorSet {
        nodes,
        order,
        k,
        seed,
        op_count,
    })
}

/// Coverage predicate: every node within distance k of some anchor.
/// Runs one depth-bounded breadth-first search per anchor.
pub fn verify_k_ds(g: &Graph, s: &AnchorSet) -> bool {
    let n = g.node_count() as usize;
    assert!(
        s.nodes.iter().all(|&a| (a as usize) < n),
        "anchor ids must be valid for the graph"
    );
    let mut covered = vec![false; n];
    let mut covered_count = 0usize;
    let mut scratch = vec![u32::MAX; n];
    for &a in &s.nodes {
        for (u, _) in g.k_hop_into_scratch(a, s.k, &mut scratch) {
            if !covered[u as usize] {
                covered[u as usize] = true;
                covered_count += 1;
            }
        }
        if covered_count == n {
            return true;
        }
    }
    covered_count == n
}

/// Every anchor set the greedy can produce on `g`, over all tie-breaking
/// choices. This is the support of the selection distribution and the
/// oracle behind the randomized-distinguishability experiments.
pub fn enumerate_greedy_outcomes(g: &Graph, k: u32, max_nodes: u32) -> Result<BTreeSet<Vec<u32>>> {
    Ok(enumerate_greedy_distribution(g, k, max_nodes)?
        .into_keys()
        .collect())
}

/// Exact probability of each greedy outcome under uniform tie-breaking.
/// Branches over every choice, memoizing on the set of still-labeled nodes.
pub fn enumerate_greedy_distribution(
    g: &Graph,
    k: u32,
    max_nodes: u32,
) -> Result<BTreeMap<Vec<u32>, Ratio>> {
    if g.node_count() == 0 {
        return Err(Error::Input("enumeration needs a non-empty graph".into()));
    }
    if k < 1 {
        return Err(Error::Input("coverage radius k must be >= 1".into()));
    }
    let limit = max_nodes.min(25);
    if g.node_count() > limit {
        return Err(Error::Size(format!(
            "exhaustive enumeration is limited to {} nodes, graph has {}",
            limit,
            g.node_count()
        )));
    }
    let n = g.node_count() as usize;
    let degrees: Vec<u32> = (0..n as u32).map(|v| g.degree(v)).collect();
    let khop_masks: Vec<u32> = (0..n as u32)
        .map(|v| {
            let mut mask = 0u32;
            let mut scratch = vec![u32::MAX; n];
            for (u, _) in g.k_hop_into_scratch(v, k, &mut scratch) {
                mask |= 1 << u;
            }
            mask
        })
        .collect();

    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut memo: HashMap<u32, BTreeMap<Vec<u32>, Ratio>> = HashMap::new();
    let dist = completions(full, &degrees, &khop_masks, &mut memo);
    Ok(dist)
}

fn completions(
    mask: u32,
    degrees: &[u32],
    khop_masks: &[u32],
    memo: &mut HashMap<u32, BTreeMap<Vec<u32>, Ratio>>,
) -> BTreeMap<Vec<u32>, Ratio> {
    if mask == 0 {
        let mut base = BTreeMap::new();
        base.insert(Vec::new(), Ratio::one());
        return base;
    }
    if let Some(cached) = memo.get(&mask) {
        return cached.clone();
    }
    let labeled: Vec<u32> = (0..degrees.len() as u32)
        .filter(|&v| mask & (1 << v) != 0)
        .collect();
    let max_deg = labeled.iter().map(|&v| degrees[v as usize]).max().unwrap();
    let ties: Vec<u32> = labeled
        .into_iter()
        .filter(|&v| degrees[v as usize] == max_deg)
        .collect();
    let t = ties.len() as u128;
    let mut out: BTreeMap<Vec<u32>, Ratio> = BTreeMap::new();
    for &a in &ties {
        let next_mask = mask & !khop_masks[a as usize] & !(1 << a);
        let sub = completions(next_mask, degrees, khop_masks, memo);
        for (list, p) in sub {
            let mut with_a = list;
            let pos = with_a.partition_point(|&x| x < a);
            with_a.insert(pos, a);
            let share = p.div_by(t);
            out.entry(with_a)
                .and_modify(|q| *q = q.add(share))
                .or_insert(share);
        }
    }
    memo.insert(mask, out.clone());
    out
}
