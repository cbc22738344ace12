//! Scheduling policies.
//!
//! Two pluggable decision points drive the engine:
//!
//! * a communication policy assigns each resource block of the current slot
//!   to at most one undelivered slice;
//! * a compute policy, invoked whenever a compute unit is idle and tasks
//!   are ready, picks (task, CU) pairs to dispatch.
//!
//! Policies see only a read-only [`PolicyView`] of engine state; the
//! registered policies are deterministic, so every decision is a pure
//! function of that view (plus the round-robin cursor, which is itself a
//! function of decision history).
//!
//! Bundles name a (comm, compute) pairing: `joint` couples the
//! bottleneck-score allocator with critical-path dispatch, `decoupled`
//! couples largest-remaining-payload allocation with FIFO dispatch.

use thiserror::Error;

use crate::channel::ChannelGrid;
use crate::engine::{read_mode_for, MemMode};
use crate::workload::{NodeId, TaskGraph};

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("unknown policy: {0}")]
    UnknownPolicy(String),
}

/// A task currently eligible to run: all predecessors finished and, for a
/// slice entry node, its payload fully delivered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadyTask {
    pub node: NodeId,
    /// Time the last readiness precondition was met.
    pub ready_ms: f64,
}

/// Read-only snapshot of engine state offered to policies.
pub struct PolicyView<'a> {
    pub now_ms: f64,
    /// Slot index: the slot being decided (comm) or containing `now_ms`
    /// (dispatch).
    pub slot: u64,
    /// Expected kilobytes one resource block moves per slot at the mean
    /// channel rate.
    pub e_hat_kb: f64,
    /// Per-slice undelivered kilobytes (0 once delivered).
    pub remaining_kb: &'a [f64],
    pub tx_finish_ms: &'a [Option<f64>],
    pub cu_busy_until_ms: &'a [f64],
    pub cu_idle: &'a [bool],
    pub cu_speed: &'a [f64],
    /// Ready tasks in ascending node order.
    pub ready: &'a [ReadyTask],
    pub graph: &'a TaskGraph,
    pub preds: &'a [Vec<NodeId>],
    pub succs: &'a [Vec<NodeId>],
    /// CU each already-dispatched node ran (or runs) on.
    pub placements: &'a [Option<usize>],
    /// Static critical-path length from each node to the Classifier, using
    /// speed-1.0 compute, off-chip reads, and boundary-rule writes.
    pub cp_ms: &'a [f64],
    pub static_write: &'a [MemMode],
    /// Entry node of each slice.
    pub slice_entry: &'a [NodeId],
    pub(crate) grid: &'a ChannelGrid,
}

impl<'a> PolicyView<'a> {
    pub fn n_freq(&self) -> usize {
        self.grid.n_freq()
    }

    pub fn n_slices(&self) -> usize {
        self.remaining_kb.len()
    }

    /// Actual kilobytes resource block `f` would move for slice `s` in the
    /// slot under decision.
    pub fn transfer_kb(&self, f: usize, s: usize) -> f64 {
        self.grid
            .transfer_kb(self.slot, f, s)
            .expect("policy iterates in-range indices")
    }

    /// Memory modes `node` would see if dispatched on `cu` now.
    pub fn modes_on(&self, node: NodeId, cu: usize) -> (MemMode, MemMode) {
        (
            read_mode_for(&self.preds[node], self.placements, cu),
            self.static_write[node],
        )
    }

    /// Full occupancy (read + comp + write) of `node` on `cu`.
    pub fn service_ms(&self, node: NodeId, cu: usize) -> f64 {
        let t = &self.graph.nodes[node].timing;
        let (read_mode, write_mode) = self.modes_on(node, cu);
        let read = match read_mode {
            MemMode::OnChip => t.t_read_on_ms,
            MemMode::OffChip => t.t_read_off_ms,
        };
        let write = match write_mode {
            MemMode::OnChip => t.t_write_on_ms,
            MemMode::OffChip => t.t_write_off_ms,
        };
        read + t.t_comp_ms * self.cu_speed[cu] + write
    }
}

/// Per-slot resource-block grants: `rb_to_slice[f]` is the slice served by
/// block `f`, or `None` to leave it unused.
#[derive(Debug, Clone, PartialEq)]
pub struct CommDecision {
    pub rb_to_slice: Vec<Option<usize>>,
}

pub trait CommPolicy {
    fn name(&self) -> &str;
    fn decide(&mut self, view: &PolicyView) -> CommDecision;
}

pub trait ComputePolicy {
    fn name(&self) -> &str;
    /// Returns (task, CU) assignments to apply now. Must only pair ready
    /// tasks with idle CUs; the engine re-invokes while both remain.
    fn dispatch(&mut self, view: &PolicyView) -> Vec<(NodeId, usize)>;
}

/// Largest-remaining-payload-first block allocation. Within the slot,
/// "remaining" is debited by the actual sampled transfer of each grant, so
/// a slice stops attracting blocks once the slot's grants already cover it.
/// Ties go to the lowest slice index.
pub struct CommGreedy;

impl CommPolicy for CommGreedy {
    fn name(&self) -> &str {
        "comm_greedy"
    }

    fn decide(&mut self, view: &PolicyView) -> CommDecision {
        let mut rem = view.remaining_kb.to_vec();
        let mut out = vec![None; view.n_freq()];
        for (f, slot) in out.iter_mut().enumerate() {
            let mut best: Option<usize> = None;
            for s in 0..rem.len() {
                if rem[s] > 0.0 && best.is_none_or(|b| rem[s] > rem[b]) {
                    best = Some(s);
                }
            }
            let Some(s) = best else { break };
            *slot = Some(s);
            rem[s] = (rem[s] - view.transfer_kb(f, s)).max(0.0);
        }
        CommDecision { rb_to_slice: out }
    }
}

/// Bottleneck-score block allocation. Each block goes to the undelivered
/// slice with the largest projected completion
///
///   score(s) = now + remaining_kb(s) / ((n_s + 1) * e_hat) + cp_tail(s)
///
/// where n_s counts blocks already granted to s this slot and cp_tail(s)
/// is the static critical path from the slice's entry node to the
/// Classifier. Ties go to the lowest slice index.
pub struct JointGreedy;

impl CommPolicy for JointGreedy {
    fn name(&self) -> &str {
        "joint_greedy"
    }

    fn decide(&mut self, view: &PolicyView) -> CommDecision {
        let n_slices = view.n_slices();
        let mut granted = vec![0u32; n_slices];
        let mut out = vec![None; view.n_freq()];
        for slot in out.iter_mut() {
            let mut best: Option<(usize, f64)> = None;
            for s in 0..n_slices {
                if view.remaining_kb[s] <= 0.0 {
                    continue;
                }
                let score = view.now_ms
                    + view.remaining_kb[s] / ((granted[s] + 1) as f64 * view.e_hat_kb)
                    + view.cp_ms[view.slice_entry[s]];
                if best.is_none_or(|(_, b)| score > b) {
                    best = Some((s, score));
                }
            }
            let Some((s, _)) = best else { break };
            *slot = Some(s);
            granted[s] += 1;
        }
        CommDecision { rb_to_slice: out }
    }
}

/// Blocks cycle over undelivered slices in index order; the cursor carries
/// across slots so no slice is systematically favored.
pub struct RbRoundRobin {
    cursor: usize,
}

impl RbRoundRobin {
    pub fn new() -> Self {
        RbRoundRobin { cursor: 0 }
    }
}

impl Default for RbRoundRobin {
    fn default() -> Self {
        Self::new()
    }
}

impl CommPolicy for RbRoundRobin {
    fn name(&self) -> &str {
        "rb_round_robin"
    }

    fn decide(&mut self, view: &PolicyView) -> CommDecision {
        let n_slices = view.n_slices();
        let mut out = vec![None; view.n_freq()];
        for slot in out.iter_mut() {
            let mut pick = None;
            for k in 0..n_slices {
                let s = (self.cursor + k) % n_slices;
                if view.remaining_kb[s] > 0.0 {
                    pick = Some(s);
                    break;
                }
            }
            let Some(s) = pick else { break };
            *slot = Some(s);
            self.cursor = (s + 1) % n_slices;
        }
        CommDecision { rb_to_slice: out }
    }
}

/// First-ready-first-dispatched: tasks in (ready time, node id) order, each
/// to the idle CU with the lowest (busy_until, cu id). Speed-oblivious.
pub struct DispatchFifo;

impl ComputePolicy for DispatchFifo {
    fn name(&self) -> &str {
        "dispatch_fifo"
    }

    fn dispatch(&mut self, view: &PolicyView) -> Vec<(NodeId, usize)> {
        let mut tasks: Vec<&ReadyTask> = view.ready.iter().collect();
        tasks.sort_by(|a, b| {
            a.ready_ms
                .total_cmp(&b.ready_ms)
                .then(a.node.cmp(&b.node))
        });
        let mut cus: Vec<usize> = (0..view.cu_idle.len())
            .filter(|&c| view.cu_idle[c])
            .collect();
        cus.sort_by(|&a, &b| {
            view.cu_busy_until_ms[a]
                .total_cmp(&view.cu_busy_until_ms[b])
                .then(a.cmp(&b))
        });
        tasks
            .iter()
            .zip(cus.iter())
            .map(|(t, &c)| (t.node, c))
            .collect()
    }
}

/// Critical-path-first dispatch: ready tasks in descending cp order (ties:
/// lowest node id), each to the idle CU minimizing the projected finish
/// max(now, busy_until) + read + comp * speed + write under the memory-mode
/// rule (ties: lowest cu id). busy_until of an idle CU is its last finish,
/// which lies in the past; a finish projection cannot predate the dispatch
/// instant, so the start is clamped to now.
pub struct DispatchCpPriority;

impl ComputePolicy for DispatchCpPriority {
    fn name(&self) -> &str {
        "dispatch_cp_priority"
    }

    fn dispatch(&mut self, view: &PolicyView) -> Vec<(NodeId, usize)> {
        let mut tasks: Vec<&ReadyTask> = view.ready.iter().collect();
        tasks.sort_by(|a, b| {
            view.cp_ms[b.node]
                .total_cmp(&view.cp_ms[a.node])
                .then(a.node.cmp(&b.node))
        });
        let mut idle: Vec<usize> = (0..view.cu_idle.len())
            .filter(|&c| view.cu_idle[c])
            .collect();
        let mut out = Vec::new();
        for t in tasks {
            if idle.is_empty() {
                break;
            }
            let mut best = 0usize; // index into idle
            let mut best_finish = f64::INFINITY;
            for (i, &cu) in idle.iter().enumerate() {
                let start = view.now_ms.max(view.cu_busy_until_ms[cu]);
                let finish = start + view.service_ms(t.node, cu);
                if finish < best_finish {
                    best_finish = finish;
                    best = i;
                }
            }
            let cu = idle.remove(best);
            out.push((t.node, cu));
        }
        out
    }
}

pub const BUNDLE_JOINT: &str = "joint";
pub const BUNDLE_DECOUPLED: &str = "decoupled";

pub fn make_comm_policy(name: &str) -> Result<Box<dyn CommPolicy>, PolicyError> {
    match name {
        "comm_greedy" => Ok(Box::new(CommGreedy)),
        "joint_greedy" => Ok(Box::new(JointGreedy)),
        "rb_round_robin" => Ok(Box::new(RbRoundRobin::new())),
        _ => Err(PolicyError::UnknownPolicy(name.to_string())),
    }
}

pub fn make_compute_policy(name: &str) -> Result<Box<dyn ComputePolicy>, PolicyError> {
    match name {
        "dispatch_fifo" => Ok(Box::new(DispatchFifo)),
        "dispatch_cp_priority" => Ok(Box::new(DispatchCpPriority)),
        _ => Err(PolicyError::UnknownPolicy(name.to_string())),
    }
}

/// Resolves a bundle name to its (comm, compute) policy names. Besides the
/// named bundles, `<comm>+<compute>` selects any registered pairing.
pub fn resolve_bundle(name: &str) -> Result<(String, String), PolicyError> {
    match name {
        BUNDLE_JOINT => Ok(("joint_greedy".into(), "dispatch_cp_priority".into())),
        BUNDLE_DECOUPLED => Ok(("comm_greedy".into(), "dispatch_fifo".into())),
        other => match other.split_once('+') {
            Some((c, d)) if !c.is_empty() && !d.is_empty() => Ok((c.into(), d.into())),
            _ => Err(PolicyError::UnknownPolicy(name.to_string())),
        },
    }
}

pub fn make_bundle(
    name: &str,
) -> Result<(Box<dyn CommPolicy>, Box<dyn ComputePolicy>), PolicyError> {
    let (comm, compute) = resolve_bundle(name)?;
    Ok((make_comm_policy(&comm)?, make_compute_policy(&compute)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelGrid;
    use crate::config::parse_config_str;
    use crate::engine::{cp_tails, static_write_modes};
    use crate::workload::{Owner, TaskNode, TimingParams};

    fn node(id: NodeId, owner: Owner, comp: f64, read_off: f64, write_off: f64) -> TaskNode {
        TaskNode {
            node_id: id,
            owner,
            stage_label: format!("n{id}"),
            timing: TimingParams {
                t_comp_ms: comp,
                t_read_on_ms: 0.1,
                t_write_on_ms: 0.1,
                t_read_off_ms: read_off,
                t_write_off_ms: write_off,
            },
        }
    }

    /// Owns everything a PolicyView borrows.
    struct Fixture {
        graph: TaskGraph,
        preds: Vec<Vec<NodeId>>,
        succs: Vec<Vec<NodeId>>,
        cp: Vec<f64>,
        static_write: Vec<MemMode>,
        grid: ChannelGrid,
        remaining: Vec<f64>,
        tx: Vec<Option<f64>>,
        busy: Vec<f64>,
        idle: Vec<bool>,
        speed: Vec<f64>,
        ready: Vec<ReadyTask>,
        placements: Vec<Option<usize>>,
        entries: Vec<NodeId>,
        now: f64,
        e_hat: f64,
    }

    impl Fixture {
        /// Two single-node slices over a constant-rate channel.
        fn two_slices(rate: f64, n_freq: usize, remaining: [f64; 2]) -> Fixture {
            let graph = TaskGraph {
                nodes: vec![
                    node(0, Owner::Slice(0), 10.0, 2.0, 5.0),
                    node(1, Owner::Slice(1), 10.0, 2.0, 5.0),
                ],
                edges: vec![],
            };
            Fixture::from_graph(graph, rate, n_freq, remaining.to_vec(), 2)
        }

        fn from_graph(
            graph: TaskGraph,
            rate: f64,
            n_freq: usize,
            remaining: Vec<f64>,
            n_cus: usize,
        ) -> Fixture {
            let n_slices = remaining.len();
            let payloads: Vec<String> = remaining.iter().map(|r| r.to_string()).collect();
            let cfg = parse_config_str(&format!(
                r#"{{"n_slices": {n_slices}, "payloads_kb": [{}],
                    "n_freq": {n_freq}, "n_cus": {n_cus},
                    "rate_min_kbps": {rate}, "rate_max_kbps": {rate}}}"#,
                payloads.join(","),
            ))
            .unwrap();
            let (preds, succs) = graph.adjacency();
            let cp = cp_tails(&graph);
            let static_write = static_write_modes(&graph);
            let entries = graph.slice_entries(n_slices).unwrap();
            let n = graph.n_nodes();
            Fixture {
                graph,
                preds,
                succs,
                cp,
                static_write,
                grid: ChannelGrid::new(&cfg),
                remaining,
                tx: vec![None; n_slices],
                busy: vec![0.0; n_cus],
                idle: vec![true; n_cus],
                speed: cfg.cu_speed_factors.clone(),
                ready: Vec::new(),
                placements: vec![None; n],
                entries,
                now: 0.0,
                e_hat: cfg.e_hat_kb(),
            }
        }

        fn view(&self) -> PolicyView<'_> {
            PolicyView {
                now_ms: self.now,
                slot: 0,
                e_hat_kb: self.e_hat,
                remaining_kb: &self.remaining,
                tx_finish_ms: &self.tx,
                cu_busy_until_ms: &self.busy,
                cu_idle: &self.idle,
                cu_speed: &self.speed,
                ready: &self.ready,
                graph: &self.graph,
                preds: &self.preds,
                succs: &self.succs,
                placements: &self.placements,
                cp_ms: &self.cp,
                static_write: &self.static_write,
                slice_entry: &self.entries,
                grid: &self.grid,
            }
        }
    }

    #[test]
    fn comm_greedy_keeps_feeding_the_largest_payload() {
        // Transfers of 0.25 kB cannot close a 9 kB gap within one slot.
        let fx = Fixture::two_slices(2000.0, 2, [10.0, 1.0]);
        let d = CommGreedy.decide(&fx.view());
        assert_eq!(d.rb_to_slice, vec![Some(0), Some(0)]);
    }

    #[test]
    fn comm_greedy_breaks_ties_toward_lower_index_and_tracks_transfers() {
        // Equal remaining: block 0 to slice 0; its debited remaining then
        // trails slice 1, so block 1 flips over.
        let fx = Fixture::two_slices(2000.0, 2, [5.0, 5.0]);
        let d = CommGreedy.decide(&fx.view());
        assert_eq!(d.rb_to_slice, vec![Some(0), Some(1)]);
    }

    #[test]
    fn comm_greedy_stops_granting_once_slot_covers_all_payload() {
        // 0.25 kB per grant covers 0.3 kB in two grants; the other two
        // blocks stay unused.
        let fx = Fixture::two_slices(2000.0, 4, [0.3, 0.0]);
        let d = CommGreedy.decide(&fx.view());
        assert_eq!(d.rb_to_slice, vec![Some(0), Some(0), None, None]);
    }

    #[test]
    fn comm_greedy_leaves_all_blocks_unused_when_everything_is_delivered() {
        let fx = Fixture::two_slices(2000.0, 2, [0.0, 0.0]);
        let d = CommGreedy.decide(&fx.view());
        assert_eq!(d.rb_to_slice, vec![None, None]);
    }

    #[test]
    fn joint_greedy_scores_remaining_over_expected_transfer() {
        // Equal cp tails, e_hat = 0.12625: scores 10/0.12625 = 79.2 vs
        // 1/0.12625 = 7.92, so the block goes to slice 0.
        let mut fx = Fixture::two_slices(1010.0, 1, [10.0, 1.0]);
        fx.e_hat = 0.12625;
        assert_eq!(fx.cp[0], fx.cp[1]);
        let d = JointGreedy.decide(&fx.view());
        assert_eq!(d.rb_to_slice, vec![Some(0)]);
    }

    #[test]
    fn joint_greedy_weighs_downstream_compute_not_just_payload() {
        // Slice 0: 1 kB but cp 500; slice 1: 50 kB, cp 0-ish.
        // 1/0.12625 + 500 = 507.9 beats 50/0.12625 = 396.
        let graph = TaskGraph {
            nodes: vec![
                node(0, Owner::Slice(0), 490.0, 5.0, 5.0),
                node(1, Owner::Slice(1), 0.0, 0.0, 0.0),
            ],
            edges: vec![],
        };
        let mut fx = Fixture::from_graph(graph, 1010.0, 1, vec![1.0, 50.0], 2);
        fx.e_hat = 0.12625;
        assert_eq!(fx.cp[0], 500.0);
        assert_eq!(fx.cp[1], 0.0);
        let d = JointGreedy.decide(&fx.view());
        assert_eq!(d.rb_to_slice, vec![Some(0)]);
    }

    #[test]
    fn joint_greedy_extra_grants_shrink_the_score() {
        // With two blocks and equal cp, slice 0 (10 kB) takes block 0;
        // its second-grant score 10/(2*e) = 39.6 still beats 7.92, so it
        // takes block 1 as well.
        let mut fx = Fixture::two_slices(1010.0, 2, [10.0, 1.0]);
        fx.e_hat = 0.12625;
        let d = JointGreedy.decide(&fx.view());
        assert_eq!(d.rb_to_slice, vec![Some(0), Some(0)]);
        // But against a closer rival the second block flips.
        let mut fx = Fixture::two_slices(1010.0, 2, [10.0, 9.0]);
        fx.e_hat = 0.12625;
        let d = JointGreedy.decide(&fx.view());
        assert_eq!(d.rb_to_slice, vec![Some(0), Some(1)]);
    }

    #[test]
    fn joint_greedy_skips_delivered_slices() {
        let fx = Fixture::two_slices(1010.0, 2, [0.0, 1.0]);
        let d = JointGreedy.decide(&fx.view());
        assert_eq!(d.rb_to_slice, vec![Some(1), Some(1)]);
    }

    #[test]
    fn round_robin_spreads_blocks_within_one_from_even() {
        let graph = TaskGraph {
            nodes: vec![
                node(0, Owner::Slice(0), 1.0, 1.0, 1.0),
                node(1, Owner::Slice(1), 1.0, 1.0, 1.0),
                node(2, Owner::Slice(2), 1.0, 1.0, 1.0),
            ],
            edges: vec![],
        };
        let fx = Fixture::from_graph(graph, 2000.0, 8, vec![9.0, 9.0, 9.0], 2);
        let mut rr = RbRoundRobin::new();
        let d = rr.decide(&fx.view());
        let mut grants = [0usize; 3];
        for g in d.rb_to_slice.iter().flatten() {
            grants[*g] += 1;
        }
        assert_eq!(grants.iter().sum::<usize>(), 8);
        assert!(grants.iter().max().unwrap() - grants.iter().min().unwrap() <= 1);
    }

    #[test]
    fn round_robin_cursor_continues_across_slots() {
        let graph = TaskGraph {
            nodes: vec![
                node(0, Owner::Slice(0), 1.0, 1.0, 1.0),
                node(1, Owner::Slice(1), 1.0, 1.0, 1.0),
                node(2, Owner::Slice(2), 1.0, 1.0, 1.0),
            ],
            edges: vec![],
        };
        let fx = Fixture::from_graph(graph, 2000.0, 1, vec![9.0, 9.0, 9.0], 2);
        let mut rr = RbRoundRobin::new();
        let picks: Vec<_> = (0..6)
            .map(|_| rr.decide(&fx.view()).rb_to_slice[0].unwrap())
            .collect();
        assert_eq!(picks, vec![0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn round_robin_sole_undelivered_slice_takes_every_block() {
        let fx = Fixture::two_slices(2000.0, 4, [0.0, 3.0]);
        let mut rr = RbRoundRobin::new();
        let d = rr.decide(&fx.view());
        assert_eq!(d.rb_to_slice, vec![Some(1); 4]);
    }

    #[test]
    fn fifo_orders_by_ready_time_then_node() {
        let mut fx = Fixture::two_slices(2000.0, 1, [0.0, 0.0]);
        fx.ready = vec![
            ReadyTask {
                node: 0,
                ready_ms: 5.0,
            },
            ReadyTask {
                node: 1,
                ready_ms: 3.0,
            },
        ];
        let d = DispatchFifo.dispatch(&fx.view());
        assert_eq!(d, vec![(1, 0), (0, 1)]);
    }

    #[test]
    fn fifo_prefers_longest_idle_cu_then_lowest_id() {
        let mut fx = Fixture::two_slices(2000.0, 1, [0.0, 0.0]);
        fx.ready = vec![ReadyTask {
            node: 0,
            ready_ms: 0.0,
        }];
        fx.busy = vec![4.0, 2.0];
        let d = DispatchFifo.dispatch(&fx.view());
        assert_eq!(d, vec![(0, 1)]);
    }

    #[test]
    fn fifo_ignores_cu_speed() {
        let mut fx = Fixture::two_slices(2000.0, 1, [0.0, 0.0]);
        fx.ready = vec![ReadyTask {
            node: 0,
            ready_ms: 0.0,
        }];
        fx.speed = vec![1.0, 2.0];
        let d = DispatchFifo.dispatch(&fx.view());
        assert_eq!(d, vec![(0, 0)]); // equal busy_until, lowest id wins
    }

    #[test]
    fn cp_priority_dispatches_critical_task_first() {
        // cp(0) = 10+2+5 = 17, cp(1) = 490+5+5 = 500: node 1 goes first.
        let graph = TaskGraph {
            nodes: vec![
                node(0, Owner::Slice(0), 10.0, 2.0, 5.0),
                node(1, Owner::Slice(1), 490.0, 5.0, 5.0),
            ],
            edges: vec![],
        };
        let mut fx = Fixture::from_graph(graph, 2000.0, 1, vec![0.0, 0.0], 1);
        fx.ready = vec![
            ReadyTask {
                node: 0,
                ready_ms: 0.0,
            },
            ReadyTask {
                node: 1,
                ready_ms: 0.0,
            },
        ];
        let d = DispatchCpPriority.dispatch(&fx.view());
        assert_eq!(d, vec![(1, 0)]); // single CU: only the critical task fits
    }

    #[test]
    fn cp_priority_picks_the_faster_cu() {
        let mut fx = Fixture::two_slices(2000.0, 1, [0.0, 0.0]);
        fx.speed = vec![2.0, 1.0];
        fx.ready = vec![ReadyTask {
            node: 0,
            ready_ms: 0.0,
        }];
        // comp 10: projected 20 on cu0, 10 on cu1.
        let d = DispatchCpPriority.dispatch(&fx.view());
        assert_eq!(d, vec![(0, 1)]);
    }

    #[test]
    fn cp_priority_exploits_on_chip_locality() {
        // Node 1 depends on node 0, already run on cu1. Reading on-chip
        // (0.1 ms) on cu1 beats off-chip (2.0 ms) on cu0.
        let graph = TaskGraph {
            nodes: vec![
                node(0, Owner::Slice(0), 10.0, 2.0, 5.0),
                node(1, Owner::Slice(0), 10.0, 2.0, 5.0),
            ],
            edges: vec![(0, 1)],
        };
        let mut fx = Fixture::from_graph(graph, 2000.0, 1, vec![0.0], 2);
        fx.placements[0] = Some(1);
        fx.ready = vec![ReadyTask {
            node: 1,
            ready_ms: 0.0,
        }];
        let d = DispatchCpPriority.dispatch(&fx.view());
        assert_eq!(d, vec![(1, 1)]);
    }

    #[test]
    fn cp_priority_clamps_start_to_now_for_idle_cus() {
        // cu1 just freed at now=50 (it ran the predecessor), cu0 idle since
        // t=0. Both can start at now, so the on-chip read on cu1 must win;
        // ranking by raw busy_until would wrongly penalize cu1.
        let graph = TaskGraph {
            nodes: vec![
                node(0, Owner::Slice(0), 10.0, 2.0, 5.0),
                node(1, Owner::Slice(0), 10.0, 2.0, 5.0),
            ],
            edges: vec![(0, 1)],
        };
        let mut fx = Fixture::from_graph(graph, 2000.0, 1, vec![0.0], 2);
        fx.placements[0] = Some(1);
        fx.busy = vec![0.0, 50.0];
        fx.now = 50.0;
        fx.ready = vec![ReadyTask {
            node: 1,
            ready_ms: 50.0,
        }];
        let d = DispatchCpPriority.dispatch(&fx.view());
        assert_eq!(d, vec![(1, 1)]);
    }

    #[test]
    fn cp_priority_breaks_cu_ties_toward_lowest_id() {
        let mut fx = Fixture::two_slices(2000.0, 1, [0.0, 0.0]);
        fx.ready = vec![ReadyTask {
            node: 0,
            ready_ms: 0.0,
        }];
        let d = DispatchCpPriority.dispatch(&fx.view());
        assert_eq!(d, vec![(0, 0)]);
    }

    #[test]
    fn registry_resolves_known_names_and_rejects_unknown() {
        assert!(make_comm_policy("comm_greedy").is_ok());
        assert!(make_comm_policy("joint_greedy").is_ok());
        assert!(make_comm_policy("rb_round_robin").is_ok());
        assert!(make_compute_policy("dispatch_fifo").is_ok());
        assert!(make_compute_policy("dispatch_cp_priority").is_ok());
        match make_comm_policy("nope") {
            Err(PolicyError::UnknownPolicy(name)) => assert_eq!(name, "nope"),
            Ok(_) => panic!("unknown policy name resolved"),
        }
        assert!(make_compute_policy("comm_greedy").is_err());
    }

    #[test]
    fn bundles_pair_the_documented_policies() {
        assert_eq!(
            resolve_bundle("joint").unwrap(),
            ("joint_greedy".to_string(), "dispatch_cp_priority".to_string())
        );
        assert_eq!(
            resolve_bundle("decoupled").unwrap(),
            ("comm_greedy".to_string(), "dispatch_fifo".to_string())
        );
        let (c, d) = make_bundle("rb_round_robin+dispatch_fifo").unwrap();
        assert_eq!(c.name(), "rb_round_robin");
        assert_eq!(d.name(), "dispatch_fifo");
        assert!(resolve_bundle("mystery").is_err());
        assert!(make_bundle("mystery+dispatch_fifo").is_err());
    }
}
