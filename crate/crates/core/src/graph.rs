//! Immutable undirected graphs in compressed sparse row form, breadth-first
//! traversals, and the deterministic generator families used by the tests
//! and the benchmark harness.
//!
//! Graphs are simple (no self-loops, no duplicate edges) and undirected.
//! Neighbor lists are sorted ascending, so equal graphs compare equal
//! structurally. The optional feature matrix carries one real vector per
//! node; generators never attach features.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SplitMix64;
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: u32,
    m: u64,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    features: Option<Matrix>,
}

impl Graph {
    /// Builds the canonical graph for an edge list. Duplicate edges collapse,
    /// edge order and endpoint order are irrelevant.
    pub fn from_edge_list(n: u32, edges: &[(u32, u32)]) -> Result<Graph> {
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Input(format!(
                    "edge ({u},{v}) out of range for n={n}"
                )));
            }
            if u == v {
                return Err(Error::Input(format!("self-loop at node {u}")));
            }
        }
        let mut canon: Vec<(u32, u32)> = edges
            .iter()
            .map(|&(u, v)| if u < v { (u, v) } else { (v, u) })
            .collect();
        canon.sort_unstable();
        canon.dedup();

        let mut deg = vec![0usize; n as usize];
        for &(u, v) in &canon {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n as usize + 1);
        row_ptr.push(0);
        let mut acc = 0usize;
        for d in &deg {
            acc += d;
            row_ptr.push(acc);
        }
        let mut cursor = row_ptr.clone();
        let mut col_idx = vec![0u32; acc];
        for &(u, v) in &canon {
            col_idx[cursor[u as usize]] = v;
            cursor[u as usize] += 1;
            col_idx[cursor[v as usize]] = u;
            cursor[v as usize] += 1;
        }
        // Inserting edges in sorted (u,v) order leaves every neighbor list of
        // u sorted except for the back-edges, so sort each list once.
        let mut g = Graph {
            n,
            m: canon.len() as u64,
            row_ptr,
            col_idx,
            features: None,
        };
        for v in 0..n as usize {
            let (s, e) = (g.row_ptr[v], g.row_ptr[v + 1]);
            g.col_idx[s..e].sort_unstable();
        }
        Ok(g)
    }

    pub fn node_count(&self) -> u32 {
        self.n
    }

    pub fn edge_count(&self) -> u64 {
        self.m
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.col_idx[self.row_ptr[v as usize]..self.row_ptr[v as usize + 1]]
    }

    #[inline]
    pub fn degree(&self, v: u32) -> u32 {
        (self.row_ptr[v as usize + 1] - self.row_ptr[v as usize]) as u32
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// All edges with u < v, sorted.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::with_capacity(self.m as usize);
        for u in 0..self.n {
            for &v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_ref()
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Graph> {
        if features.rows() != self.n as usize {
            return Err(Error::Shape(format!(
                "feature matrix has {} rows for a graph with {} nodes",
                features.rows(),
                self.n
            )));
        }
        if !features.is_finite() {
            return Err(Error::Numeric("feature matrix contains NaN/Inf".into()));
        }
        self.features = Some(features);
        Ok(self)
    }

    /// Single-source shortest path distances. Unreachable nodes carry the
    /// sentinel `n`, which is strictly greater than any realizable distance,
    /// so `dist <= k` comparisons need no reachability branch.
    pub fn bfs_distances(&self, source: u32) -> Result<BfsResult> {
        if source >= self.n {
            return Err(Error::Input(format!("node {source} out of range")));
        }
        let unreachable = self.n;
        let mut dist = vec![unreachable; self.n as usize];
        dist[source as usize] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize];
            for &w in self.neighbors(u) {
                if dist[w as usize] == unreachable {
                    dist[w as usize] = du + 1;
                    queue.push_back(w);
                }
            }
        }
        Ok(BfsResult {
            source,
            dist,
            unreachable,
        })
    }

    /// Exact k-hop neighborhood {(u, spd) : spd(v,u) <= k}, sorted by node,
    /// computed with a depth-bounded breadth-first search. Includes v itself
    /// at distance 0.
    pub fn k_hop_neighborhood(&self, v: u32, k: u32) -> Result<Vec<(u32, u32)>> {
        if v >= self.n {
            return Err(Error::Input(format!("node {v} out of range")));
        }
        let mut out = self.k_hop_into_scratch(v, k, &mut vec![u32::MAX; self.n as usize]);
        out.sort_unstable();
        Ok(out)
    }

    /// Depth-bounded BFS reusing a caller-owned scratch array. `scratch` must
    /// be all-u32::MAX on entry and is restored before returning. Result is
    /// in visit order, not sorted.
    pub(crate) fn k_hop_into_scratch(
        &self,
        v: u32,
        k: u32,
        scratch: &mut [u32],
    ) -> Vec<(u32, u32)> {
        let mut visited = vec![(v, 0u32)];
        scratch[v as usize] = 0;
        let mut head = 0;
        while head < visited.len() {
            let (u, du) = visited[head];
            head += 1;
            if du == k {
                break;
            }
            for &w in self.neighbors(u) {
                if scratch[w as usize] == u32::MAX {
                    scratch[w as usize] = du + 1;
                    visited.push((w, du + 1));
                }
            }
        }
        for &(u, _) in &visited {
            scratch[u as usize] = u32::MAX;
        }
        visited
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let bfs = self.bfs_distances(0).expect("node 0 exists");
        bfs.dist.iter().all(|&d| d != bfs.unreachable)
    }

    /// New graph with node v renamed perm[v]; features rows move with their
    /// nodes. perm must be a permutation of 0..n.
    pub fn relabel(&self, perm: &[u32]) -> Result<Graph> {
        if perm.len() != self.n as usize {
            return Err(Error::Input("permutation length != n".into()));
        }
        let mut seen = vec![false; self.n as usize];
        for &p in perm {
            if p >= self.n || seen[p as usize] {
                return Err(Error::Input("not a permutation".into()));
            }
            seen[p as usize] = true;
        }
        let edges: Vec<(u32, u32)> = self
            .edges()
            .iter()
            .map(|&(u, v)| (perm[u as usize], perm[v as usize]))
            .collect();
        let mut g = Graph::from_edge_list(self.n, &edges)?;
        if let Some(f) = &self.features {
            let mut moved = Matrix::zeros(f.rows(), f.cols());
            for v in 0..self.n as usize {
                moved.row_mut(perm[v] as usize).copy_from_slice(f.row(v));
            }
            g = g.with_features(moved)?;
        }
        Ok(g)
    }
}

/// Distances from one source. `dist[u] == unreachable` (= n) marks nodes in
/// other components.
#[derive(Debug, Clone, PartialEq)]
pub struct BfsResult {
    pub source: u32,
    pub dist: Vec<u32>,
    pub unreachable: u32,
}

impl BfsResult {
    pub fn reachable(&self, u: u32) -> bool {
        self.dist[u as usize] != self.unreachable
    }

    pub fn distance(&self, u: u32) -> Option<u32> {
        if self.reachable(u) {
            Some(self.dist[u as usize])
        } else {
            None
        }
    }
}

/// Deterministic generator families for the test and benchmark corpus.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphFamily {
    /// n >= 3 nodes in a ring.
    Cycle(u32),
    /// n nodes in a line; Path(1) is the single isolated node.
    Path(u32),
    /// Center 0 plus n-1 leaves.
    Star(u32),
    /// w x h lattice, node (x, y) = y*w + x.
    Grid(u32, u32),
    /// Complete graph K_n.
    Complete(u32),
    /// n nodes, no edges.
    Edgeless(u32),
    /// Each pair kept independently with probability p, fixed seed.
    ErdosRenyi(u32, f64, u64),
}

pub fn generate(family: &GraphFamily) -> Result<Graph> {
    use GraphFamily::*;
    match *family {
        Cycle(n) => {
            if n < 3 {
                return Err(Error::Input(format!("cycle needs n >= 3, got {n}")));
            }
            let edges: Vec<(u32, u32)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
            Graph::from_edge_list(n, &edges)
        }
        Path(n) => {
            if n == 0 {
                return Err(Error::Input("path needs n >= 1".into()));
            }
            let edges: Vec<(u32, u32)> = (1..n).map(|i| (i - 1, i)).collect();
            Graph::from_edge_list(n, &edges)
        }
        Star(n) => {
            if n == 0 {
                return Err(Error::Input("star needs n >= 1".into()));
            }
            let edges: Vec<(u32, u32)> = (1..n).map(|i| (0, i)).collect();
            Graph::from_edge_list(n, &edges)
        }
        Grid(w, h) => {
            if w == 0 || h == 0 {
                return Err(Error::Input("grid needs w,h >= 1".into()));
            }
            let mut edges = Vec::new();
            for y in 0..h {
                for x in 0..w {
                    let v = y * w + x;
                    if x + 1 < w {
                        edges.push((v, v + 1));
                    }
                    if y + 1 < h {
                        edges.push((v, v + w));
                    }
                }
            }
            Graph::from_edge_list(w * h, &edges)
        }
        Complete(n) => {
            if n == 0 {
                return Err(Error::Input("complete needs n >= 1".into()));
            }
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    edges.push((u, v));
                }
            }
            Graph::from_edge_list(n, &edges)
        }
        Edgeless(n) => {
            if n == 0 {
                return Err(Error::Input("edgeless needs n >= 1".into()));
            }
            Graph::from_edge_list(n, &[])
        }
        ErdosRenyi(n, p, seed) => {
            if n == 0 {
                return Err(Error::Input("erdos_renyi needs n >= 1".into()));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Input(format!("p={p} outside [0,1]")));
            }
            let mut rng = SplitMix64::new(seed);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.next_f64() < p {
                        edges.push((u, v));
                    }
                }
            }
            Graph::from_edge_list(n, &edges)
        }
    }
}

/// Disjoint union; the second graph's node ids are shifted by g1.n. Feature
/// matrices are stacked when both sides carry them with equal width.
pub fn disjoint_union(g1: &Graph, g2: &Graph) -> Result<Graph> {
    let shift = g1.node_count();
    let mut edges = g1.edges();
    edges.extend(g2.edges().iter().map(|&(u, v)| (u + shift, v + shift)));
    let g = Graph::from_edge_list(shift + g2.node_count(), &edges)?;
    match (g1.features(), g2.features()) {
        (None, None) => Ok(g),
        (Some(f1), Some(f2)) => {
            if f1.cols() != f2.cols() {
                return Err(Error::Shape("feature widths differ in union".into()));
            }
            let mut data = f1.data().to_vec();
            data.extend_from_slice(f2.data());
            g.with_features(Matrix::from_vec(f1.rows() + f2.rows(), f1.cols(), data)?)
        }
        _ => Err(Error::Shape(
            "one side of union has features, the other none".into(),
        )),
    }
}

/// Two disjoint triangles: the standard companion of cycle(6) in the
/// refinement experiments.
pub fn two_triangles() -> Graph {
    let t = generate(&GraphFamily::Cycle(3)).expect("triangle");
    disjoint_union(&t, &t).expect("union of triangles")
}

// --- edge-list text format -------------------------------------------------
//
// First line "N M", then M lines "u v", 0-indexed, whitespace-separated.

pub fn write_edge_list(g: &Graph) -> String {
    let mut out = format!("{} {}\n", g.node_count(), g.edge_count());
    for (u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

pub fn read_edge_list(text: &str) -> Result<Graph> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Input("empty edge-list file".into()))?;
    let mut parts = header.split_whitespace();
    let n: u32 = parse_field(parts.next(), "node count")?;
    let m: usize = parse_field(parts.next(), "edge count")?;
    let mut edges = Vec::with_capacity(m);
    for line in lines {
        let mut it = line.split_whitespace();
        let u: u32 = parse_field(it.next(), "edge endpoint")?;
        let v: u32 = parse_field(it.next(), "edge endpoint")?;
        edges.push((u, v));
    }
    if edges.len() != m {
        return Err(Error::Input(format!(
            "header says {m} edges, file has {}",
            edges.len()
        )));
    }
    Graph::from_edge_list(n, &edges)
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, what: &str) -> Result<T> {
    field
        .ok_or_else(|| Error::Input(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Input(format!("malformed {what}")))
}

// --- feature CSV -----------------------------------------------------------
//
// N rows x F columns, comma-separated, no header. Values use Rust's shortest
// round-trip decimal form, so write/read is bit-exact.

pub fn write_features_csv(features: &Matrix) -> String {
    let mut out = String::new();
    for r in 0..features.rows() {
        let row: Vec<String> = features.row(r).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn read_features_csv(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let row: Result<Vec<f64>> = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Input(format!("bad float {f:?} in features")))
            })
            .collect();
        rows.push(row?);
    }
    if rows.is_empty() {
        return Err(Error::Input("empty feature file".into()));
    }
    Matrix::from_rows(&rows)
}
