//! Receptive fields R(v) = N_k(v) ∪ S with per-pair shortest-path-distance
//! buckets, plus the two executable encoding validators: an encoding is
//! useful for this attention scheme when adjacency is recoverable from it
//! (neighbor-distinguishable) and when "anchor outside the k-hop
//! neighborhood" is recoverable from it (anchor-distinguishable).

use crate::anchor::AnchorSet;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Clamped SPD bucket space: finite distances clamp to d_max, one extra
/// bucket marks unreachable pairs. d_max must exceed the coverage radius k,
/// otherwise anchor entries beyond the neighborhood would collapse into the
/// same bucket as distance-k neighbors and the anchor-distinguishable
/// property would be lost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpdBucketing {
    pub d_max: u32,
}

impl SpdBucketing {
    pub fn new(d_max: u32) -> SpdBucketing {
        SpdBucketing { d_max }
    }

    /// Default table size for radius k: anchor-to-node distances within a
    /// component are usually <= 2k, plus slack for irregular graphs.
    pub fn for_radius(k: u32) -> SpdBucketing {
        SpdBucketing { d_max: 2 * k + 2 }
    }

    #[inline]
    pub fn bucket_finite(&self, d: u32) -> u32 {
        d.min(self.d_max)
    }

    #[inline]
    pub fn unreachable_bucket(&self) -> u32 {
        self.d_max + 1
    }

    /// Number of distinct bucket values: 0..=d_max plus the unreachable slot.
    #[inline]
    pub fn bucket_count(&self) -> usize {
        self.d_max as usize + 2
    }
}

/// Sparse attention pattern: for every node v, the sorted entries
/// (u, spd_bucket) over u ∈ N_k(v) ∪ S. v itself is always present with
/// bucket 0, so self-attention is never masked.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceptiveField {
    k: u32,
    anchors: Vec<u32>,
    bucketing: SpdBucketing,
    entries: Vec<Vec<(u32, u32)>>,
    total_pairs: usize,
    max_k_hop: usize,
}

impl ReceptiveField {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn anchors(&self) -> &[u32] {
        &self.anchors
    }

    pub fn bucketing(&self) -> SpdBucketing {
        self.bucketing
    }

    pub fn node_count(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self, v: u32) -> &[(u32, u32)] {
        &self.entries[v as usize]
    }

    /// Σ_v |R(v)|: the exact number of attention score computations per head.
    pub fn total_pairs(&self) -> usize {
        self.total_pairs
    }

    /// Largest k-hop neighborhood size n_k observed during construction.
    pub fn max_k_hop(&self) -> usize {
        self.max_k_hop
    }

    /// CSV dump: one metadata header line, then rows "v,u,spd_bucket" sorted
    /// by (v, u). Byte-identical across runs.
    pub fn to_csv(&self) -> String {
        let anchors: Vec<String> = self.anchors.iter().map(|a| a.to_string()).collect();
        let mut out = format!(
            "# k={} d_max={} anchors={}\n",
            self.k,
            self.bucketing.d_max,
            anchors.join(";")
        );
        for (v, row) in self.entries.iter().enumerate() {
            for &(u, b) in row {
                out.push_str(&format!("{v},{u},{b}\n"));
            }
        }
        out
    }
}

/// Builds the receptive field of every node: a depth-k search per node for
/// the neighborhood part, one full breadth-first search per anchor for the
/// global part. No all-pairs computation. Anchors inside N_k(v) keep their
/// true distance and appear once.
pub fn compute_receptive_fields(
    g: &Graph,
    s: &AnchorSet,
    bucketing: SpdBucketing,
) -> Result<ReceptiveField> {
    if bucketing.d_max <= s.k {
        return Err(Error::Config(format!(
            "d_max={} must exceed k={}: anchor entries beyond the neighborhood \
             would be indistinguishable from distance-k neighbors",
            bucketing.d_max, s.k
        )));
    }
    let n = g.node_count() as usize;
    for &a in &s.nodes {
        if a as usize >= n {
            return Err(Error::Input(format!("anchor {a} out of range")));
        }
    }

    let anchor_dists: Vec<Vec<u32>> = s
        .nodes
        .iter()
        .map(|&a| g.bfs_distances(a).map(|r| r.dist))
        .collect::<Result<_>>()?;
    let sentinel = g.node_count();

    let mut entries: Vec<Vec<(u32, u32)>> = Vec::with_capacity(n);
    let mut total_pairs = 0usize;
    let mut max_k_hop = 0usize;
    let mut scratch = vec![u32::MAX; n];
    for v in 0..n as u32 {
        let hood = g.k_hop_into_scratch(v, s.k, &mut scratch);
        max_k_hop = max_k_hop.max(hood.len());
        let mut row: Vec<(u32, u32)> = hood
            .into_iter()
            .map(|(u, d)| (u, bucketing.bucket_finite(d)))
            .collect();
        for (j, &a) in s.nodes.iter().enumerate() {
            let d = anchor_dists[j][v as usize];
            if d > s.k {
                let bucket = if d >= sentinel {
                    bucketing.unreachable_bucket()
                } else {
                    bucketing.bucket_finite(d)
                };
                row.push((a, bucket));
            }
        }
        row.sort_unstable();
        total_pairs += row.len();
        entries.push(row);
    }

    Ok(ReceptiveField {
        k: s.k,
        anchors: s.nodes.clone(),
        bucketing,
        entries,
        total_pairs,
        max_k_hop,
    })
}

/// Same receptive-field structure with every pair encoded as the one given
/// value. The degenerate encoding both validators are expected to reject.
pub fn compute_constant_receptive_fields(
    g: &Graph,
    s: &AnchorSet,
    bucketing: SpdBucketing,
    value: u32,
) -> Result<ReceptiveField> {
    let mut rf = compute_receptive_fields(g, s, bucketing)?;
    for row in &mut rf.entries {
        for entry in row {
            entry.1 = value;
        }
    }
    Ok(rf)
}

/// True iff the bucket values seen on edge pairs are disjoint from those
/// seen on non-edge pairs of the receptive field, i.e. adjacency is
/// recoverable from the encoding alone.
pub fn check_neighbor_distinguishable(rf: &ReceptiveField, g: &Graph) -> bool {
    let mut edge_buckets = std::collections::BTreeSet::new();
    let mut non_edge_buckets = std::collections::BTreeSet::new();
    for v in 0..rf.node_count() as u32 {
        for &(u, b) in rf.entries(v) {
            if u != v && g.has_edge(v, u) {
                edge_buckets.insert(b);
            } else {
                non_edge_buckets.insert(b);
            }
        }
    }
    edge_buckets.is_disjoint(&non_edge_buckets)
}

/// True iff the bucket values on pairs (v, a) with a an anchor outside
/// N_k(v) are disjoint from the buckets on every other receptive-field
/// pair, i.e. "global anchor" is recoverable from the encoding alone.
pub fn check_anchor_distinguishable(rf: &ReceptiveField, g: &Graph) -> bool {
    let n = rf.node_count();
    let mut is_anchor = vec![false; n];
    for &a in rf.anchors() {
        is_anchor[a as usize] = true;
    }
    let mut outside = std::collections::BTreeSet::new();
    let mut other = std::collections::BTreeSet::new();
    let mut in_hood = vec![false; n];
    let mut scratch = vec![u32::MAX; n];
    for v in 0..n as u32 {
        let hood = g.k_hop_into_scratch(v, rf.k(), &mut scratch);
        for &(u, _) in &hood {
            in_hood[u as usize] = true;
        }
        for &(u, b) in rf.entries(v) {
            if is_anchor[u as usize] && !in_hood[u as usize] {
                outside.insert(b);
            } else {
                other.insert(b);
            }
        }
        for (u, _) in hood {
            in_hood[u as usize] = false;
        }
    }
    outside.is_disjoint(&other)
}
