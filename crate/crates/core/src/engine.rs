//! Discrete-event simulation engine.
//!
//! Time advances through one ordered event queue that interleaves
//! slot-quantized communication with continuous-time computation:
//!
//! * slot boundary (t): the comm policy assigns each resource block of
//!   slot t to at most one undelivered slice; grants credit the slice with
//!   the actual sampled transfer, and a slice whose cumulative delivery
//!   reaches its payload finishes transmitting at the end of that slot
//!   (excess is discarded, never credited across slices);
//! * delivery completion: the slice's entry task becomes ready;
//! * task finish: the task's CU frees and successors with all
//!   predecessors finished become ready;
//! * dispatch: while any CU is idle and tasks are ready, the compute
//!   policy picks (task, CU) pairs; each task then occupies its CU for a
//!   strict, non-preemptive read + compute + write span.
//!
//! Simultaneous events process in a fixed order: slot boundaries, then
//! delivery completions, then task finishes, then dispatch, with ascending
//! ids inside each class. Combined with pure policies and streams, a
//! (config, workload, grid) triple yields one bit-reproducible schedule.
//!
//! Memory-mode rule: a task reads on-chip iff it has at least one
//! predecessor and all of them ran on its own CU (slice entry tasks always
//! read off-chip: payloads land in shared memory); it writes off-chip iff
//! some successor has a different owner or it has none, since results
//! crossing a slice/fusion boundary (or leaving the graph) go to shared
//! memory.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelError, ChannelGrid};
use crate::config::SimConfig;
use crate::policies::{
    make_bundle, CommPolicy, ComputePolicy, PolicyError, PolicyView, ReadyTask,
};
use crate::workload::{NodeId, TaskGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemMode {
    OnChip,
    OffChip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GanttEntry {
    pub node_id: NodeId,
    pub cu_id: usize,
    pub start_ms: f64,
    pub read_ms: f64,
    pub comp_ms: f64,
    pub write_ms: f64,
    pub finish_ms: f64,
    pub read_mode: MemMode,
    pub write_mode: MemMode,
}

/// Complete simulation output: enough to audit every invariant without
/// rerunning the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    /// Sparse (slot, freq, slice) grants, ascending by (slot, freq).
    pub rb_assignments: Vec<(u64, usize, usize)>,
    /// Per-slice transmission finish time; 0 for zero payloads.
    pub tx_finish_ms: Vec<f64>,
    /// One row per task, in dispatch order.
    pub gantt: Vec<GanttEntry>,
    pub t_total_ms: f64,
    /// True iff communication was still running at or past the nominal
    /// slot horizon.
    pub horizon_exceeded: bool,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown policy: {0}")]
    UnknownPolicy(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("comm policy returned an invalid decision: {0}")]
    BadCommDecision(String),
    #[error("compute policy returned an invalid dispatch: {0}")]
    BadDispatch(String),
    #[error("deadlock: {0}")]
    Deadlock(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

impl From<PolicyError> for EngineError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::UnknownPolicy(name) => EngineError::UnknownPolicy(name),
        }
    }
}

/// Read mode a node sees when dispatched on `cu`: on-chip iff it has
/// predecessors and all of them ran on that same CU.
pub fn read_mode_for(preds: &[NodeId], placements: &[Option<usize>], cu: usize) -> MemMode {
    if !preds.is_empty() && preds.iter().all(|&p| placements[p] == Some(cu)) {
        MemMode::OnChip
    } else {
        MemMode::OffChip
    }
}

/// Write mode of each node, fixed by the graph alone: off-chip iff some
/// successor has a different owner or there is no successor.
pub fn static_write_modes(g: &TaskGraph) -> Vec<MemMode> {
    let (_, succs) = g.adjacency();
    (0..g.n_nodes())
        .map(|v| {
            let crosses = succs[v]
                .iter()
                .any(|&w| g.nodes[w].owner != g.nodes[v].owner);
            if succs[v].is_empty() || crosses {
                MemMode::OffChip
            } else {
                MemMode::OnChip
            }
        })
        .collect()
}

/// Static critical-path length from each node to the end of the graph:
/// node weight is speed-1.0 compute plus off-chip read plus the
/// boundary-rule write, and path length includes the node itself.
pub fn cp_tails(g: &TaskGraph) -> Vec<f64> {
    let n = g.n_nodes();
    let (preds, succs) = g.adjacency();
    let write_modes = static_write_modes(g);
    let weight: Vec<f64> = (0..n)
        .map(|v| {
            let t = &g.nodes[v].timing;
            let write = match write_modes[v] {
                MemMode::OnChip => t.t_write_on_ms,
                MemMode::OffChip => t.t_write_off_ms,
            };
            t.t_comp_ms + t.t_read_off_ms + write
        })
        .collect();
    // Reverse topological accumulation (Kahn order, then walk backwards).
    let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
    let mut order: Vec<NodeId> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &w in &succs[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                order.push(w);
            }
        }
    }
    assert_eq!(order.len(), n, "cp_tails requires an acyclic graph");
    let mut cp = vec![0.0f64; n];
    for &v in order.iter().rev() {
        let tail = succs[v].iter().map(|&w| cp[w]).fold(0.0f64, f64::max);
        cp[v] = weight[v] + tail;
    }
    cp
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    SlotBoundary(u64),
    TxComplete(usize),
    TaskFinish(NodeId),
    Dispatch,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time_ms: f64,
    rank: u8,
    id: u64,
    kind: EventKind,
}

impl Event {
    fn boundary(t: u64, slot_ms: f64) -> Event {
        Event {
            time_ms: t as f64 * slot_ms,
            rank: 0,
            id: t,
            kind: EventKind::SlotBoundary(t),
        }
    }
    fn tx_complete(s: usize, time_ms: f64) -> Event {
        Event {
            time_ms,
            rank: 1,
            id: s as u64,
            kind: EventKind::TxComplete(s),
        }
    }
    fn task_finish(v: NodeId, time_ms: f64) -> Event {
        Event {
            time_ms,
            rank: 2,
            id: v as u64,
            kind: EventKind::TaskFinish(v),
        }
    }
    fn dispatch(time_ms: f64) -> Event {
        Event {
            time_ms,
            rank: 3,
            id: 0,
            kind: EventKind::Dispatch,
        }
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time_ms
            .total_cmp(&other.time_ms)
            .then(self.rank.cmp(&other.rank))
            .then(self.id.cmp(&other.id))
    }
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    graph: &'a TaskGraph,
    grid: &'a ChannelGrid,
    preds: Vec<Vec<NodeId>>,
    succs: Vec<Vec<NodeId>>,
    static_write: Vec<MemMode>,
    cp: Vec<f64>,
    entries: Vec<NodeId>,

    remaining: Vec<f64>,
    undelivered: usize,
    tx_finish: Vec<Option<f64>>,
    pending_preds: Vec<usize>,
    ready: BTreeMap<NodeId, f64>,
    finished: Vec<bool>,
    unfinished: usize,
    placements: Vec<Option<usize>>,
    cu_busy_until: Vec<f64>,
    cu_running: Vec<Option<NodeId>>,

    heap: BinaryHeap<Reverse<Event>>,
    dispatch_pending: bool,
    // Scratch buffers the policy view borrows.
    ready_scratch: Vec<ReadyTask>,
    idle_scratch: Vec<bool>,

    gantt: Vec<GanttEntry>,
    rbs: Vec<(u64, usize, usize)>,
    horizon_exceeded: bool,
    /// Comm stall guard: any working policy delivers everything within
    /// this many slots (one min-rate block per slot clears the total
    /// payload), so exceeding it means the comm side cannot progress.
    max_slot: u64,
}

impl<'a> Sim<'a> {
    fn new(
        cfg: &'a SimConfig,
        graph: &'a TaskGraph,
        grid: &'a ChannelGrid,
    ) -> Result<Self, EngineError> {
        if graph.n_nodes() == 0 {
            return Err(EngineError::InvalidInput("empty task graph".into()));
        }
        if grid.n_freq() != cfg.n_freq
            || grid.n_slices() != cfg.n_slices
            || grid.slot_ms() != cfg.slot_ms
        {
            return Err(EngineError::InvalidInput(
                "channel grid does not match config dimensions".into(),
            ));
        }
        let entries = graph
            .slice_entries(cfg.n_slices)
            .map_err(|e| EngineError::InvalidInput(e.to_string()))?;
        let (preds, succs) = graph.adjacency();
        let n = graph.n_nodes();

        let remaining = cfg.payloads_kb.clone();
        let tx_finish: Vec<Option<f64>> = remaining
            .iter()
            .map(|&d| if d <= 0.0 { Some(0.0) } else { None })
            .collect();
        let undelivered = tx_finish.iter().filter(|t| t.is_none()).count();

        let total_payload: f64 = remaining.iter().sum();
        let min_credit = crate::channel::kb_per_slot(cfg.rate_min_kbps, cfg.slot_ms);
        let max_slot = (total_payload / min_credit).ceil() as u64 + cfg.horizon_slots + 64;

        let pending_preds: Vec<usize> = preds.iter().map(Vec::len).collect();
        let mut sim = Sim {
            cfg,
            graph,
            grid,
            static_write: static_write_modes(graph),
            cp: cp_tails(graph),
            entries,
            preds,
            succs,
            remaining,
            undelivered,
            tx_finish,
            pending_preds,
            ready: BTreeMap::new(),
            finished: vec![false; n],
            unfinished: n,
            placements: vec![None; n],
            cu_busy_until: vec![0.0; cfg.n_cus],
            cu_running: vec![None; cfg.n_cus],
            heap: BinaryHeap::new(),
            dispatch_pending: false,
            ready_scratch: Vec::new(),
            idle_scratch: Vec::new(),
            gantt: Vec::new(),
            rbs: Vec::new(),
            horizon_exceeded: false,
            max_slot,
        };

        // Initial readiness: in-degree-zero nodes, with slice entries gated
        // on delivery (zero payloads count as already delivered).
        let delivered_at_init: Vec<bool> = sim.tx_finish.iter().map(Option::is_some).collect();
        for v in 0..n {
            if sim.pending_preds[v] > 0 {
                continue;
            }
            match sim.entry_slice(v) {
                Some(s) if !delivered_at_init[s] => {}
                _ => {
                    sim.ready.insert(v, 0.0);
                }
            }
        }
        if sim.undelivered > 0 {
            sim.heap.push(Reverse(Event::boundary(0, cfg.slot_ms)));
        }
        sim.schedule_dispatch(0.0);
        Ok(sim)
    }

    fn entry_slice(&self, v: NodeId) -> Option<usize> {
        self.entries.iter().position(|&e| e == v)
    }

    fn any_idle(&self) -> bool {
        self.cu_running.iter().any(Option::is_none)
    }

    fn schedule_dispatch(&mut self, now: f64) {
        if !self.dispatch_pending && !self.ready.is_empty() && self.any_idle() {
            self.heap.push(Reverse(Event::dispatch(now)));
            self.dispatch_pending = true;
        }
    }

    fn refresh_scratch(&mut self) {
        self.ready_scratch = self
            .ready
            .iter()
            .map(|(&node, &ready_ms)| ReadyTask { node, ready_ms })
            .collect();
        self.idle_scratch = self.cu_running.iter().map(Option::is_none).collect();
    }

    fn view(&self, now_ms: f64, slot: u64) -> PolicyView<'_> {
        PolicyView {
            now_ms,
            slot,
            e_hat_kb: self.cfg.e_hat_kb(),
            remaining_kb: &self.remaining,
            tx_finish_ms: &self.tx_finish,
            cu_busy_until_ms: &self.cu_busy_until,
            cu_idle: &self.idle_scratch,
            cu_speed: &self.cfg.cu_speed_factors,
            ready: &self.ready_scratch,
            graph: self.graph,
            preds: &self.preds,
            succs: &self.succs,
            placements: &self.placements,
            cp_ms: &self.cp,
            static_write: &self.static_write,
            slice_entry: &self.entries,
            grid: self.grid,
        }
    }

    fn handle_boundary(
        &mut self,
        t: u64,
        now: f64,
        comm: &mut dyn CommPolicy,
    ) -> Result<(), EngineError> {
        if self.undelivered == 0 {
            return Ok(());
        }
        if t >= self.cfg.horizon_slots {
            self.horizon_exceeded = true;
        }
        if t > self.max_slot {
            return Err(EngineError::Deadlock(format!(
                "communication stalled: slot {t} exceeds the progress bound {} with {} slice(s) undelivered",
                self.max_slot, self.undelivered
            )));
        }
        self.refresh_scratch();
        let decision = {
            let view = self.view(now, t);
            comm.decide(&view)
        };
        let grants = decision.rb_to_slice;
        if grants.len() != self.cfg.n_freq {
            return Err(EngineError::BadCommDecision(format!(
                "{} grants for {} resource blocks",
                grants.len(),
                self.cfg.n_freq
            )));
        }
        // Validate against slot-start remaining: over-granting within the
        // slot is legal (excess discards), but a slice that entered the
        // slot already delivered must not be assigned.
        for &g in grants.iter().flatten() {
            if g >= self.cfg.n_slices {
                return Err(EngineError::BadCommDecision(format!(
                    "slice {g} out of range"
                )));
            }
            if self.remaining[g] <= 0.0 {
                return Err(EngineError::BadCommDecision(format!(
                    "slice {g} assigned after delivery completed"
                )));
            }
        }
        for (f, &grant) in grants.iter().enumerate() {
            let Some(s) = grant else { continue };
            self.rbs.push((t, f, s));
            if self.tx_finish[s].is_some() {
                continue; // delivered earlier this same slot; excess discarded
            }
            let credit = self.grid.transfer_kb(t, f, s)?;
            self.remaining[s] -= credit;
            if self.remaining[s] <= 0.0 {
                self.remaining[s] = 0.0;
                self.undelivered -= 1;
                let tx = (t + 1) as f64 * self.cfg.slot_ms;
                self.tx_finish[s] = Some(tx);
                self.heap.push(Reverse(Event::tx_complete(s, tx)));
            }
        }
        if self.undelivered > 0 {
            self.heap.push(Reverse(Event::boundary(t + 1, self.cfg.slot_ms)));
        }
        Ok(())
    }

    fn handle_tx_complete(&mut self, s: usize, now: f64) {
        let e = self.entries[s];
        debug_assert_eq!(self.pending_preds[e], 0, "entry nodes have no predecessors");
        self.ready.insert(e, now);
        self.schedule_dispatch(now);
    }

    fn handle_task_finish(&mut self, v: NodeId, now: f64) {
        let cu = self.placements[v].expect("finishing task was placed");
        self.cu_running[cu] = None;
        self.finished[v] = true;
        self.unfinished -= 1;
        for i in 0..self.succs[v].len() {
            let w = self.succs[v][i];
            self.pending_preds[w] -= 1;
            if self.pending_preds[w] == 0 {
                // Successors are never slice entries (those have in-degree
                // zero), so DAG readiness is the only gate.
                self.ready.insert(w, now);
            }
        }
        self.schedule_dispatch(now);
    }

    fn handle_dispatch(
        &mut self,
        now: f64,
        compute: &mut dyn ComputePolicy,
    ) -> Result<(), EngineError> {
        self.dispatch_pending = false;
        let slot = (now / self.cfg.slot_ms) as u64;
        loop {
            if self.ready.is_empty() || !self.any_idle() {
                return Ok(());
            }
            self.refresh_scratch();
            let assignments = {
                let view = self.view(now, slot);
                compute.dispatch(&view)
            };
            if assignments.is_empty() {
                return Ok(());
            }
            for (v, cu) in assignments {
                if !self.ready.contains_key(&v) {
                    return Err(EngineError::BadDispatch(format!("task {v} is not ready")));
                }
                if cu >= self.cfg.n_cus {
                    return Err(EngineError::BadDispatch(format!("CU {cu} out of range")));
                }
                if self.cu_running[cu].is_some() {
                    return Err(EngineError::BadDispatch(format!("CU {cu} is busy")));
                }
                self.start_task(v, cu, now);
            }
        }
    }

    fn start_task(&mut self, v: NodeId, cu: usize, now: f64) {
        let t = &self.graph.nodes[v].timing;
        let read_mode = read_mode_for(&self.preds[v], &self.placements, cu);
        let write_mode = self.static_write[v];
        let read = match read_mode {
            MemMode::OnChip => t.t_read_on_ms,
            MemMode::OffChip => t.t_read_off_ms,
        };
        let write = match write_mode {
            MemMode::OnChip => t.t_write_on_ms,
            MemMode::OffChip => t.t_write_off_ms,
        };
        let comp = t.t_comp_ms * self.cfg.cu_speed_factors[cu];
        let finish = now + read + comp + write;
        self.gantt.push(GanttEntry {
            node_id: v,
            cu_id: cu,
            start_ms: now,
            read_ms: read,
            comp_ms: comp,
            write_ms: write,
            finish_ms: finish,
            read_mode,
            write_mode,
        });
        self.ready.remove(&v);
        self.placements[v] = Some(cu);
        self.cu_running[cu] = Some(v);
        self.cu_busy_until[cu] = finish;
        self.heap.push(Reverse(Event::task_finish(v, finish)));
    }
}

/// Runs one simulation to completion (every task finished) and returns the
/// schedule. The workload must satisfy the structural contract checked by
/// `validate_graph` for generated graphs; hand-built graphs need only
/// acyclicity, dense ids, and one in-degree-zero node per slice.
pub fn run(
    cfg: &SimConfig,
    graph: &TaskGraph,
    grid: &ChannelGrid,
    comm: &mut dyn CommPolicy,
    compute: &mut dyn ComputePolicy,
) -> Result<Schedule, EngineError> {
    let mut sim = Sim::new(cfg, graph, grid)?;
    while let Some(Reverse(ev)) = sim.heap.pop() {
        let now = ev.time_ms;
        match ev.kind {
            EventKind::SlotBoundary(t) => sim.handle_boundary(t, now, comm)?,
            EventKind::TxComplete(s) => sim.handle_tx_complete(s, now),
            EventKind::TaskFinish(v) => sim.handle_task_finish(v, now),
            EventKind::Dispatch => sim.handle_dispatch(now, compute)?,
        }
        if sim.unfinished == 0 {
            break;
        }
    }
    if sim.unfinished > 0 {
        let stuck: Vec<NodeId> = (0..sim.graph.n_nodes())
            .filter(|&v| !sim.finished[v])
            .collect();
        return Err(EngineError::Deadlock(format!(
            "event queue drained with unfinished tasks {stuck:?}"
        )));
    }
    let t_total_ms = sim
        .gantt
        .iter()
        .map(|e| e.finish_ms)
        .fold(0.0f64, f64::max);
    Ok(Schedule {
        rb_assignments: sim.rbs,
        tx_finish_ms: sim
            .tx_finish
            .iter()
            .map(|t| t.expect("all slices delivered before tasks finished"))
            .collect(),
        gantt: sim.gantt,
        t_total_ms,
        horizon_exceeded: sim.horizon_exceeded,
    })
}

/// Convenience entry: resolves a bundle name (or `<comm>+<compute>` pair)
/// and runs it.
pub fn run_bundle(
    cfg: &SimConfig,
    graph: &TaskGraph,
    grid: &ChannelGrid,
    bundle: &str,
) -> Result<Schedule, EngineError> {
    let (mut comm, mut compute) = make_bundle(bundle)?;
    run(cfg, graph, grid, comm.as_mut(), compute.as_mut())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;
    use crate::policies::CommDecision;
    use crate::workload::{generate_workload, Owner, TaskNode, TimingParams};

    fn fixed_node(id: NodeId, owner: Owner) -> TaskNode {
        TaskNode {
            node_id: id,
            owner,
            stage_label: format!("n{id}"),
            timing: TimingParams {
                t_comp_ms: 10.0,
                t_read_on_ms: 0.5,
                t_write_on_ms: 0.5,
                t_read_off_ms: 2.0,
                t_write_off_ms: 5.0,
            },
        }
    }

    fn single_task_setup(payload: f64) -> (SimConfig, TaskGraph, ChannelGrid) {
        let cfg = parse_config_str(&format!(
            r#"{{"n_slices": 1, "payloads_kb": [{payload}], "n_freq": 1, "n_cus": 1,
                "rate_min_kbps": 2000.0, "rate_max_kbps": 2000.0}}"#
        ))
        .unwrap();
        let graph = TaskGraph {
            nodes: vec![fixed_node(0, Owner::Slice(0))],
            edges: vec![],
        };
        let grid = ChannelGrid::new(&cfg);
        (cfg, graph, grid)
    }

    #[test]
    fn single_task_constant_channel_closed_form() {
        // 1 kB over a constant 2000 kbps block: 0.25 kB per slot, four
        // slots, tx at 4 ms; then off-chip read 2 + comp 10 + off-chip
        // write 5 = 17 ms of occupancy.
        let (cfg, graph, grid) = single_task_setup(1.0);
        for bundle in ["joint", "decoupled"] {
            let s = run_bundle(&cfg, &graph, &grid, bundle).unwrap();
            assert!((s.tx_finish_ms[0] - 4.0).abs() < 1e-9, "{bundle}");
            assert!((s.t_total_ms - 21.0).abs() < 1e-9, "{bundle}");
            assert_eq!(s.gantt.len(), 1);
            let e = &s.gantt[0];
            assert!((e.start_ms - 4.0).abs() < 1e-9);
            assert_eq!(e.read_mode, MemMode::OffChip);
            assert_eq!(e.write_mode, MemMode::OffChip);
            assert_eq!(s.rb_assignments, vec![(0, 0, 0), (1, 0, 0), (2, 0, 0), (3, 0, 0)]);
            assert!(!s.horizon_exceeded);
        }
    }

    #[test]
    fn zero_payload_slice_is_ready_at_time_zero() {
        let (cfg, graph, grid) = single_task_setup(0.0);
        let s = run_bundle(&cfg, &graph, &grid, "joint").unwrap();
        assert_eq!(s.tx_finish_ms[0], 0.0);
        assert_eq!(s.gantt[0].start_ms, 0.0);
        assert!((s.t_total_ms - 17.0).abs() < 1e-9);
        assert!(s.rb_assignments.is_empty());
    }

    #[test]
    fn equal_tasks_on_two_cus_run_in_parallel() {
        let cfg = parse_config_str(
            r#"{"n_slices": 2, "payloads_kb": [1.0, 1.0], "n_freq": 2, "n_cus": 2,
                "rate_min_kbps": 2000.0, "rate_max_kbps": 2000.0}"#,
        )
        .unwrap();
        let graph = TaskGraph {
            nodes: vec![fixed_node(0, Owner::Slice(0)), fixed_node(1, Owner::Slice(1))],
            edges: vec![],
        };
        let grid = ChannelGrid::new(&cfg);
        for bundle in ["joint", "decoupled"] {
            let s = run_bundle(&cfg, &graph, &grid, bundle).unwrap();
            assert!((s.tx_finish_ms[0] - 4.0).abs() < 1e-9);
            assert!((s.tx_finish_ms[1] - 4.0).abs() < 1e-9);
            assert_eq!(s.gantt.len(), 2);
            let cus: Vec<usize> = s.gantt.iter().map(|e| e.cu_id).collect();
            assert_eq!({ let mut c = cus.clone(); c.sort_unstable(); c }, vec![0, 1]);
            for e in &s.gantt {
                assert!((e.start_ms - 4.0).abs() < 1e-9);
                assert!((e.finish_ms - 21.0).abs() < 1e-9);
            }
            assert!((s.t_total_ms - 21.0).abs() < 1e-9, "{bundle}");
        }
    }

    #[test]
    fn chain_on_same_cu_reads_on_chip_and_writes_on_chip_inside_slice() {
        let cfg = parse_config_str(
            r#"{"n_slices": 1, "payloads_kb": [0.0], "n_freq": 1, "n_cus": 1}"#,
        )
        .unwrap();
        let graph = TaskGraph {
            nodes: vec![fixed_node(0, Owner::Slice(0)), fixed_node(1, Owner::Slice(0))],
            edges: vec![(0, 1)],
        };
        let grid = ChannelGrid::new(&cfg);
        let s = run_bundle(&cfg, &graph, &grid, "joint").unwrap();
        let e0 = s.gantt.iter().find(|e| e.node_id == 0).unwrap();
        let e1 = s.gantt.iter().find(|e| e.node_id == 1).unwrap();
        assert_eq!(e0.read_mode, MemMode::OffChip); // entry: payload in shared memory
        assert_eq!(e0.write_mode, MemMode::OnChip); // successor in same slice
        assert_eq!(e1.read_mode, MemMode::OnChip); // sole pred ran here
        assert_eq!(e1.write_mode, MemMode::OffChip); // no successors
        // 0: read 2 + comp 10 + write 0.5 = 12.5; 1: read 0.5 + 10 + 5.
        assert!((s.t_total_ms - 28.0).abs() < 1e-9);
    }

    #[test]
    fn join_from_two_cus_reads_off_chip() {
        let cfg = parse_config_str(
            r#"{"n_slices": 2, "payloads_kb": [0.0, 0.0], "n_freq": 1, "n_cus": 2}"#,
        )
        .unwrap();
        let graph = TaskGraph {
            nodes: vec![
                fixed_node(0, Owner::Slice(0)),
                fixed_node(1, Owner::Slice(1)),
                fixed_node(2, Owner::Slice(0)),
            ],
            edges: vec![(0, 2), (1, 2)],
        };
        let grid = ChannelGrid::new(&cfg);
        let s = run_bundle(&cfg, &graph, &grid, "decoupled").unwrap();
        let e2 = s.gantt.iter().find(|e| e.node_id == 2).unwrap();
        assert_eq!(e2.read_mode, MemMode::OffChip);
    }

    #[test]
    fn cp_tails_accumulate_along_the_longest_path() {
        // Chain 0 -> 1, same owner. Node 0 writes on-chip (same-owner
        // successor), node 1 off-chip (sink): w0 = 10+2+0.5, w1 = 10+2+5.
        let graph = TaskGraph {
            nodes: vec![fixed_node(0, Owner::Slice(0)), fixed_node(1, Owner::Slice(0))],
            edges: vec![(0, 1)],
        };
        let cp = cp_tails(&graph);
        assert!((cp[1] - 17.0).abs() < 1e-12);
        assert!((cp[0] - (12.5 + 17.0)).abs() < 1e-12);
    }

    #[test]
    fn static_write_modes_follow_ownership_boundaries() {
        let graph = TaskGraph {
            nodes: vec![
                fixed_node(0, Owner::Slice(0)),
                fixed_node(1, Owner::Slice(0)),
                fixed_node(2, Owner::FusionStage),
            ],
            edges: vec![(0, 1), (1, 2)],
        };
        let w = static_write_modes(&graph);
        assert_eq!(w[0], MemMode::OnChip); // same-slice successor
        assert_eq!(w[1], MemMode::OffChip); // crosses into fusion
        assert_eq!(w[2], MemMode::OffChip); // sink
    }

    #[test]
    fn horizon_overrun_is_flagged_but_not_fatal() {
        let cfg = parse_config_str(
            r#"{"n_slices": 1, "payloads_kb": [0.1], "n_freq": 1, "n_cus": 1,
                "horizon_slots": 5,
                "rate_min_kbps": 20.0, "rate_max_kbps": 20.0}"#,
        )
        .unwrap();
        // 0.0025 kB per slot: 40 slots for 0.1 kB, horizon is 5.
        let graph = TaskGraph {
            nodes: vec![fixed_node(0, Owner::Slice(0))],
            edges: vec![],
        };
        let grid = ChannelGrid::new(&cfg);
        let s = run_bundle(&cfg, &graph, &grid, "joint").unwrap();
        assert!(s.horizon_exceeded);
        assert!((s.tx_finish_ms[0] - 40.0).abs() < 1e-9);
    }

    #[test]
    fn runs_are_bit_deterministic() {
        let cfg = parse_config_str(r#"{"seed": 5}"#).unwrap();
        let graph = generate_workload(&cfg);
        let grid = ChannelGrid::new(&cfg);
        let a = run_bundle(&cfg, &graph, &grid, "joint").unwrap();
        let b = run_bundle(&cfg, &graph, &grid, "joint").unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    struct NeverAssign;
    impl CommPolicy for NeverAssign {
        fn name(&self) -> &str {
            "never_assign"
        }
        fn decide(&mut self, view: &PolicyView) -> CommDecision {
            CommDecision {
                rb_to_slice: vec![None; view.n_freq()],
            }
        }
    }

    struct NeverDispatch;
    impl ComputePolicy for NeverDispatch {
        fn name(&self) -> &str {
            "never_dispatch"
        }
        fn dispatch(&mut self, _view: &PolicyView) -> Vec<(NodeId, usize)> {
            Vec::new()
        }
    }

    #[test]
    fn comm_policy_that_never_assigns_deadlocks() {
        let cfg = parse_config_str(
            r#"{"n_slices": 1, "payloads_kb": [1.0], "n_freq": 1, "n_cus": 1,
                "horizon_slots": 10,
                "rate_min_kbps": 2000.0, "rate_max_kbps": 2000.0}"#,
        )
        .unwrap();
        let graph = TaskGraph {
            nodes: vec![fixed_node(0, Owner::Slice(0))],
            edges: vec![],
        };
        let grid = ChannelGrid::new(&cfg);
        let mut comm = NeverAssign;
        let mut compute = crate::policies::DispatchFifo;
        let err = run(&cfg, &graph, &grid, &mut comm, &mut compute).unwrap_err();
        assert!(matches!(err, EngineError::Deadlock(_)), "{err}");
    }

    #[test]
    fn compute_policy_that_never_dispatches_deadlocks() {
        let (cfg, graph, grid) = single_task_setup(1.0);
        let mut comm = crate::policies::CommGreedy;
        let mut compute = NeverDispatch;
        let err = run(&cfg, &graph, &grid, &mut comm, &mut compute).unwrap_err();
        assert!(matches!(err, EngineError::Deadlock(_)), "{err}");
    }

    struct DoubleBook;
    impl ComputePolicy for DoubleBook {
        fn name(&self) -> &str {
            "double_book"
        }
        fn dispatch(&mut self, view: &PolicyView) -> Vec<(NodeId, usize)> {
            view.ready.iter().map(|t| (t.node, 0)).collect()
        }
    }

    #[test]
    fn dispatch_reusing_a_busy_cu_is_rejected() {
        let cfg = parse_config_str(
            r#"{"n_slices": 2, "payloads_kb": [0.0, 0.0], "n_freq": 1, "n_cus": 2}"#,
        )
        .unwrap();
        let graph = TaskGraph {
            nodes: vec![fixed_node(0, Owner::Slice(0)), fixed_node(1, Owner::Slice(1))],
            edges: vec![],
        };
        let grid = ChannelGrid::new(&cfg);
        let mut comm = crate::policies::CommGreedy;
        let mut compute = DoubleBook;
        let err = run(&cfg, &graph, &grid, &mut comm, &mut compute).unwrap_err();
        assert!(matches!(err, EngineError::BadDispatch(_)), "{err}");
    }

    #[test]
    fn unknown_bundle_is_reported() {
        let (cfg, graph, grid) = single_task_setup(1.0);
        let err = run_bundle(&cfg, &graph, &grid, "heuristic_x").unwrap_err();
        assert!(matches!(err, EngineError::UnknownPolicy(_)), "{err}");
    }

    #[test]
    fn generated_workloads_complete_under_all_policy_pairings() {
        for seed in 0..5u64 {
            let cfg = parse_config_str(&format!("{{\"seed\": {seed}}}")).unwrap();
            let graph = generate_workload(&cfg);
            let grid = ChannelGrid::new(&cfg);
            for bundle in ["joint", "decoupled", "rb_round_robin+dispatch_fifo"] {
                let s = run_bundle(&cfg, &graph, &grid, bundle).unwrap();
                assert_eq!(s.gantt.len(), graph.n_nodes());
                assert!(s.t_total_ms > 0.0);
                assert!(!s.horizon_exceeded);
            }
        }
    }
}
