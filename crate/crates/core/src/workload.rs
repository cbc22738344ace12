//! Task-graph workloads.
//!
//! Each slice contributes a random layered-ancestor DAG: node 0 is the
//! slice's data-entry point, every later node j draws one mandatory edge
//! from a uniformly chosen earlier node, and every earlier pair (i, j) may
//! independently gain an extra edge. Slices are fused by a fixed tail:
//! slice sinks from the first half of the slice index range feed Align1,
//! the rest feed Align2 (an odd extra slice joins Align1), then
//! Align1/Align2 -> Fusion -> Classifier. The result is one cross-slice
//! DAG whose every node reaches the Classifier.
//!
//! Generation consumes the labeled streams "dag:{s}" (topology) and
//! "timing:{s}" (per-node service times), plus "timing:fusion" for the
//! four tail nodes, so workloads are a pure function of (config, seed).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SimConfig;
use crate::rng::{derive_stream, RngStream};

pub type NodeId = usize;

pub const ALIGN1: &str = "Align1";
pub const ALIGN2: &str = "Align2";
pub const FUSION: &str = "Fusion";
pub const CLASSIFIER: &str = "Classifier";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Owner {
    Slice(usize),
    FusionStage,
}

/// Service-time parameters for one node, all in milliseconds. Compute time
/// is at speed factor 1.0; the engine scales it per CU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingParams {
    pub t_comp_ms: f64,
    pub t_read_on_ms: f64,
    pub t_write_on_ms: f64,
    pub t_read_off_ms: f64,
    pub t_write_off_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskNode {
    pub node_id: NodeId,
    pub owner: Owner,
    pub stage_label: String,
    pub timing: TimingParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskGraph {
    pub nodes: Vec<TaskNode>,
    /// Directed edges (u, v): u must finish before v may start.
    pub edges: Vec<(NodeId, NodeId)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph is cyclic")]
    Cyclic,
    #[error("slice {slice} has {count} in-degree-zero nodes, expected exactly 1")]
    MultiSource { slice: usize, count: usize },
    #[error("node {node} does not reach the Classifier")]
    Unreachable { node: NodeId },
    #[error("bad fusion wiring: {0}")]
    BadFusionWiring(String),
    #[error("slice {slice} has {count} nodes, outside configured range")]
    NodeCountOutOfRange { slice: usize, count: usize },
    #[error("node {node} has a timing sample outside the configured range")]
    TimingOutOfRange { node: NodeId },
    #[error("malformed graph: {0}")]
    Malformed(String),
}

impl TaskGraph {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Predecessor and successor adjacency lists, indexed by node id.
    pub fn adjacency(&self) -> (Vec<Vec<NodeId>>, Vec<Vec<NodeId>>) {
        let n = self.nodes.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(u, v) in &self.edges {
            succs[u].push(v);
            preds[v].push(u);
        }
        (preds, succs)
    }

    pub fn find_label(&self, label: &str) -> Option<NodeId> {
        self.nodes
            .iter()
            .find(|n| n.stage_label == label)
            .map(|n| n.node_id)
    }

    /// The unique in-degree-zero node of each slice, indexed by slice.
    pub fn slice_entries(&self, n_slices: usize) -> Result<Vec<NodeId>, GraphError> {
        let (preds, _) = self.adjacency();
        let mut entries: Vec<Vec<NodeId>> = vec![Vec::new(); n_slices];
        for node in &self.nodes {
            if let Owner::Slice(s) = node.owner {
                if preds[node.node_id].is_empty() {
                    entries[s].push(node.node_id);
                }
            }
        }
        let mut out = Vec::with_capacity(n_slices);
        for (s, e) in entries.iter().enumerate() {
            if e.len() != 1 {
                return Err(GraphError::MultiSource {
                    slice: s,
                    count: e.len(),
                });
            }
            out.push(e[0]);
        }
        Ok(out)
    }

    pub fn per_slice_counts(&self, n_slices: usize) -> Vec<usize> {
        let mut counts = vec![0usize; n_slices];
        for node in &self.nodes {
            if let Owner::Slice(s) = node.owner {
                counts[s] += 1;
            }
        }
        counts
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn from_json_str(json: &str) -> Result<Self, GraphError> {
        serde_json::from_str(json).map_err(|e| GraphError::Malformed(e.to_string()))
    }
}

/// Draws one node's service times. Fixed draw order: comp, read_on,
/// write_on, read_off, write_off.
pub fn sample_timings(stream: &mut RngStream, cfg: &SimConfig) -> TimingParams {
    let mut draw = |r: [f64; 2]| stream.uniform(r[0], r[1]).expect("ranges validated by config");
    TimingParams {
        t_comp_ms: draw(cfg.comp_range_ms),
        t_read_on_ms: draw(cfg.read_on_range_ms),
        t_write_on_ms: draw(cfg.write_on_range_ms),
        t_read_off_ms: draw(cfg.read_off_range_ms),
        t_write_off_ms: draw(cfg.write_off_range_ms),
    }
}

/// One slice's DAG before merging, with slice-local node indices.
#[derive(Debug, Clone)]
pub struct SliceDag {
    pub n_nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub timings: Vec<TimingParams>,
}

/// Generates the layered-ancestor DAG for one slice.
///
/// Draw order on `dag_stream`: node count, then the mandatory ancestor of
/// each node j = 1..n, then one Bernoulli per ordered pair (i, j), i < j.
/// The Bernoulli is drawn even when (i, j) duplicates the mandatory edge,
/// so stream consumption depends only on the node count.
pub fn generate_slice_dag(
    dag_stream: &mut RngStream,
    timing_stream: &mut RngStream,
    cfg: &SimConfig,
) -> SliceDag {
    let [lo, hi] = cfg.nodes_per_slice_range;
    let n = dag_stream.uniform_usize(lo, hi).expect("range validated");
    let mut mandatory = vec![0usize; n];
    for (j, m) in mandatory.iter_mut().enumerate().skip(1) {
        *m = dag_stream.uniform_usize(0, j - 1).expect("j >= 1");
    }
    let mut edges: Vec<(usize, usize)> = (1..n).map(|j| (mandatory[j], j)).collect();
    for j in 1..n {
        for i in 0..j {
            if dag_stream.chance(cfg.intra_edge_prob) && i != mandatory[j] {
                edges.push((i, j));
            }
        }
    }
    let timings = (0..n).map(|_| sample_timings(timing_stream, cfg)).collect();
    SliceDag {
        n_nodes: n,
        edges,
        timings,
    }
}

/// Slices whose index satisfies this feed Align1; the rest feed Align2.
/// For odd slice counts the extra slice lands on Align1.
pub fn feeds_align1(slice: usize, n_slices: usize) -> bool {
    slice < n_slices.div_ceil(2)
}

/// Generates the full cross-slice workload for `cfg` (topology, fusion
/// tail, and timings) from the config's seed.
pub fn generate_workload(cfg: &SimConfig) -> TaskGraph {
    let mut nodes: Vec<TaskNode> = Vec::new();
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    let mut slice_ranges: Vec<(usize, usize)> = Vec::new(); // [start, end) per slice

    for s in 0..cfg.n_slices {
        let mut dag_stream = derive_stream(cfg.seed, &format!("dag:{s}"));
        let mut timing_stream = derive_stream(cfg.seed, &format!("timing:{s}"));
        let sd = generate_slice_dag(&mut dag_stream, &mut timing_stream, cfg);
        let base = nodes.len();
        for j in 0..sd.n_nodes {
            nodes.push(TaskNode {
                node_id: base + j,
                owner: Owner::Slice(s),
                stage_label: format!("s{s}:op{j}"),
                timing: sd.timings[j],
            });
        }
        edges.extend(sd.edges.iter().map(|&(u, v)| (base + u, base + v)));
        slice_ranges.push((base, base + sd.n_nodes));
    }

    let mut fusion_stream = derive_stream(cfg.seed, "timing:fusion");
    let tail = |label: &str, nodes: &mut Vec<TaskNode>, stream: &mut RngStream| {
        let id = nodes.len();
        nodes.push(TaskNode {
            node_id: id,
            owner: Owner::FusionStage,
            stage_label: label.to_string(),
            timing: sample_timings(stream, cfg),
        });
        id
    };
    let align1 = tail(ALIGN1, &mut nodes, &mut fusion_stream);
    let align2 = tail(ALIGN2, &mut nodes, &mut fusion_stream);
    let fusion = tail(FUSION, &mut nodes, &mut fusion_stream);
    let classifier = tail(CLASSIFIER, &mut nodes, &mut fusion_stream);

    // Slice sinks (zero intra-slice out-degree) feed their half's align node.
    let mut intra_outdeg = vec![0usize; nodes.len()];
    for &(u, _) in &edges {
        intra_outdeg[u] += 1;
    }
    for (s, &(start, end)) in slice_ranges.iter().enumerate() {
        let align = if feeds_align1(s, cfg.n_slices) {
            align1
        } else {
            align2
        };
        for v in start..end {
            if intra_outdeg[v] == 0 {
                edges.push((v, align));
            }
        }
    }
    edges.push((align1, fusion));
    edges.push((align2, fusion));
    edges.push((fusion, classifier));
    edges.sort_unstable();

    TaskGraph { nodes, edges }
}

/// Independent structural checker. Verifies everything the generator
/// promises without trusting how the graph was built; imported graphs and
/// hand-mutated graphs go through the same gate.
pub fn validate_graph(g: &TaskGraph, cfg: &SimConfig) -> Result<(), GraphError> {
    let n = g.nodes.len();
    // Dense, unique ids.
    for (i, node) in g.nodes.iter().enumerate() {
        if node.node_id != i {
            return Err(GraphError::Malformed(format!(
                "node at position {i} carries id {}",
                node.node_id
            )));
        }
        if let Owner::Slice(s) = node.owner {
            if s >= cfg.n_slices {
                return Err(GraphError::Malformed(format!(
                    "node {i} owned by slice {s}, config has {}",
                    cfg.n_slices
                )));
            }
        }
    }
    // Edge sanity.
    let mut seen = std::collections::HashSet::new();
    for &(u, v) in &g.edges {
        if u >= n || v >= n {
            return Err(GraphError::Malformed(format!("edge ({u}, {v}) out of range")));
        }
        if u == v {
            return Err(GraphError::Malformed(format!("self-loop on node {u}")));
        }
        if !seen.insert((u, v)) {
            return Err(GraphError::Malformed(format!("duplicate edge ({u}, {v})")));
        }
    }
    // The four fusion-stage nodes, each exactly once, and no other
    // fusion-owned labels.
    let mut stage_ids = std::collections::HashMap::new();
    for node in &g.nodes {
        match node.owner {
            Owner::FusionStage => {
                if ![ALIGN1, ALIGN2, FUSION, CLASSIFIER].contains(&node.stage_label.as_str()) {
                    return Err(GraphError::BadFusionWiring(format!(
                        "fusion-owned node {} labeled {:?}",
                        node.node_id, node.stage_label
                    )));
                }
                if stage_ids
                    .insert(node.stage_label.clone(), node.node_id)
                    .is_some()
                {
                    return Err(GraphError::BadFusionWiring(format!(
                        "duplicate {} node",
                        node.stage_label
                    )));
                }
            }
            Owner::Slice(_) => {}
        }
    }
    let stage = |label: &str| -> Result<NodeId, GraphError> {
        stage_ids
            .get(label)
            .copied()
            .ok_or_else(|| GraphError::BadFusionWiring(format!("missing {label} node")))
    };
    let align1 = stage(ALIGN1)?;
    let align2 = stage(ALIGN2)?;
    let fusion = stage(FUSION)?;
    let classifier = stage(CLASSIFIER)?;

    let (preds, succs) = g.adjacency();

    // Acyclicity (Kahn).
    let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut queue: Vec<NodeId> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut visited = 0usize;
    while let Some(v) = queue.pop() {
        visited += 1;
        for &w in &succs[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push(w);
            }
        }
    }
    if visited != n {
        return Err(GraphError::Cyclic);
    }

    // Exactly one in-degree-zero node per slice.
    let mut sources = vec![0usize; cfg.n_slices];
    for node in &g.nodes {
        if let Owner::Slice(s) = node.owner {
            if preds[node.node_id].is_empty() {
                sources[s] += 1;
            }
        }
    }
    for (s, &count) in sources.iter().enumerate() {
        if count != 1 {
            return Err(GraphError::MultiSource { slice: s, count });
        }
    }

    // Per-slice node counts within the configured range.
    let counts = g.per_slice_counts(cfg.n_slices);
    for (s, &count) in counts.iter().enumerate() {
        if count < cfg.nodes_per_slice_range[0] || count > cfg.nodes_per_slice_range[1] {
            return Err(GraphError::NodeCountOutOfRange { slice: s, count });
        }
    }

    // Fusion wiring: classify every edge and require the tail edges.
    let mut has_tail_edge = [false; 3]; // align1->fusion, align2->fusion, fusion->classifier
    let mut intra_outdeg = vec![0usize; n];
    let mut align_out: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for &(u, v) in &g.edges {
        match (g.nodes[u].owner, g.nodes[v].owner) {
            (Owner::Slice(a), Owner::Slice(b)) => {
                if a != b {
                    return Err(GraphError::BadFusionWiring(format!(
                        "cross-slice edge ({u}, {v}) between slices {a} and {b}"
                    )));
                }
                intra_outdeg[u] += 1;
            }
            (Owner::Slice(a), Owner::FusionStage) => {
                let want = if feeds_align1(a, cfg.n_slices) {
                    align1
                } else {
                    align2
                };
                if v != want {
                    return Err(GraphError::BadFusionWiring(format!(
                        "slice {a} node {u} feeds fusion node {v}, expected {want}"
                    )));
                }
                align_out[u].push(v);
            }
            (Owner::FusionStage, Owner::FusionStage) => {
                if u == align1 && v == fusion {
                    has_tail_edge[0] = true;
                } else if u == align2 && v == fusion {
                    has_tail_edge[1] = true;
                } else if u == fusion && v == classifier {
                    has_tail_edge[2] = true;
                } else {
                    return Err(GraphError::BadFusionWiring(format!(
                        "unexpected fusion-stage edge ({u}, {v})"
                    )));
                }
            }
            (Owner::FusionStage, Owner::Slice(_)) => {
                return Err(GraphError::BadFusionWiring(format!(
                    "fusion node {u} feeds slice node {v}"
                )));
            }
        }
    }
    for (i, name) in [
        (0, "Align1->Fusion"),
        (1, "Align2->Fusion"),
        (2, "Fusion->Classifier"),
    ] {
        if !has_tail_edge[i] {
            return Err(GraphError::BadFusionWiring(format!("missing edge {name}")));
        }
    }
    if !succs[classifier].is_empty() {
        return Err(GraphError::BadFusionWiring(
            "Classifier has outgoing edges".into(),
        ));
    }
    // Slice sinks feed their align node exactly once; non-sinks never do.
    for node in &g.nodes {
        if let Owner::Slice(s) = node.owner {
            let v = node.node_id;
            let expected = if intra_outdeg[v] == 0 { 1 } else { 0 };
            if align_out[v].len() != expected {
                return Err(GraphError::BadFusionWiring(format!(
                    "slice {s} node {v} has {} align edges, expected {expected}",
                    align_out[v].len()
                )));
            }
        }
    }

    // Every node reaches the Classifier (reverse reachability).
    let mut reach = vec![false; n];
    let mut stack = vec![classifier];
    reach[classifier] = true;
    while let Some(v) = stack.pop() {
        for &u in &preds[v] {
            if !reach[u] {
                reach[u] = true;
                stack.push(u);
            }
        }
    }
    if let Some(v) = (0..n).find(|&v| !reach[v]) {
        return Err(GraphError::Unreachable { node: v });
    }

    // Timing samples within configured ranges.
    let in_range = |x: f64, r: [f64; 2]| x >= r[0] && x <= r[1];
    for node in &g.nodes {
        let t = &node.timing;
        if !in_range(t.t_comp_ms, cfg.comp_range_ms)
            || !in_range(t.t_read_on_ms, cfg.read_on_range_ms)
            || !in_range(t.t_write_on_ms, cfg.write_on_range_ms)
            || !in_range(t.t_read_off_ms, cfg.read_off_range_ms)
            || !in_range(t.t_write_off_ms, cfg.write_off_range_ms)
        {
            return Err(GraphError::TimingOutOfRange { node: node.node_id });
        }
    }
    Ok(())
}
