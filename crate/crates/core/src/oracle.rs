//! Exhaustive ground-truth search for tiny instances.
//!
//! The oracle enumerates every schedule the engine can produce and returns
//! the minimum makespan. It explores exactly the engine-consistent,
//! non-idling class: while data remains, every resource block of every
//! slot goes to some undelivered slice; while a CU is idle and a task is
//! ready, something is dispatched. Every registered heuristic emits one
//! path inside this class, so its makespan can never beat the oracle's.
//! This is a ground truth within the engine's semantics, not a clairvoyant
//! offline optimum over the channel realization.
//!
//! Search structure, two phases:
//!
//! 1. Communication: depth-first over per-slot RB grants, mirroring the
//!    engine's crediting arithmetic bit-for-bit. States that repeat
//!    (same slot, same exact remaining payloads, same deliveries) are
//!    pruned, and each distinct delivery-slot vector keeps one
//!    representative grant script. The compute side only sees delivery
//!    times, so collapsing comm paths per vector loses nothing.
//! 2. Computation: for each delivery vector, depth-first over dispatch
//!    decision points. A scripted compute policy replays a prefix of
//!    (task, CU) choices inside a real engine run, then extends it
//!    first-option and records the alternatives of every new decision
//!    point for backtracking. Each leaf is a full engine run.

use std::collections::{BTreeMap, HashSet};

use thiserror::Error;

use crate::channel::ChannelGrid;
use crate::config::SimConfig;
use crate::engine::{run, EngineError};
use crate::policies::{CommDecision, CommPolicy, ComputePolicy, PolicyView};
use crate::workload::{NodeId, TaskGraph};

const MAX_SLICES: usize = 2;
const MAX_NODES: usize = 6;
const MAX_CUS: usize = 2;
const MAX_FREQ: usize = 2;
const MAX_SLOT_CAP: u64 = 64;
/// Safety valves: refuse rather than grind when a nominally in-bounds
/// instance still explodes combinatorially.
const MAX_COMM_STATES: u64 = 1_000_000;
const MAX_EVALUATIONS: u64 = 2_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance_too_large: {0}")]
    InstanceTooLarge(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OracleResult {
    /// Minimum makespan over the enumerated schedule space.
    pub t_total_ms: f64,
    /// Distinct per-slice delivery-slot vectors reachable within the cap.
    pub tx_vectors: usize,
    /// Complete engine runs evaluated.
    pub evaluations: u64,
}

/// Replays a fixed per-slot grant table. Slots beyond the table assign
/// nothing (unreached in practice: the table ends at full delivery).
struct ScriptedComm {
    grants: Vec<Vec<Option<usize>>>,
    n_freq: usize,
}

impl CommPolicy for ScriptedComm {
    fn name(&self) -> &str {
        "scripted_comm"
    }
    fn decide(&mut self, view: &PolicyView) -> CommDecision {
        let rb_to_slice = self
            .grants
            .get(view.slot as usize)
            .cloned()
            .unwrap_or_else(|| vec![None; self.n_freq]);
        CommDecision { rb_to_slice }
    }
}

/// Replays a prefix of dispatch choices, then extends it by the first
/// option at every further decision point, logging the full option lists
/// so the caller can backtrack.
struct ProbeCompute {
    script: Vec<(NodeId, usize)>,
    pos: usize,
    recorded: Vec<Vec<(NodeId, usize)>>,
}

impl ComputePolicy for ProbeCompute {
    fn name(&self) -> &str {
        "probe_compute"
    }
    fn dispatch(&mut self, view: &PolicyView) -> Vec<(NodeId, usize)> {
        if self.pos < self.script.len() {
            let choice = self.script[self.pos];
            self.pos += 1;
            return vec![choice];
        }
        // New decision point: ready tasks ascending x idle CUs ascending.
        let mut options = Vec::new();
        for t in view.ready {
            for (cu, &idle) in view.cu_idle.iter().enumerate() {
                if idle {
                    options.push((t.node, cu));
                }
            }
        }
        debug_assert!(!options.is_empty(), "dispatch invoked without options");
        let first = options[0];
        self.recorded.push(options);
        self.pos += 1;
        vec![first]
    }
}

/// Delivery-slot vector: per slice, `d + 1` when the slice completes at
/// the end of slot `d`, or `0` for a zero payload (entry ready at time 0).
/// The slice's entry node becomes ready at `code * slot_ms`.
type TxVector = Vec<u64>;

struct CommSearch<'a> {
    cfg: &'a SimConfig,
    grid: &'a ChannelGrid,
    slot_cap: u64,
    seen: HashSet<(u64, Vec<u64>, TxVector)>,
    found: BTreeMap<TxVector, Vec<Vec<Option<usize>>>>,
    states: u64,
    grants_path: Vec<Vec<Option<usize>>>,
}

impl<'a> CommSearch<'a> {
    fn go(&mut self, slot: u64, remaining: &[f64], tx: &TxVector) -> Result<(), OracleError> {
        let undelivered: Vec<usize> = (0..self.cfg.n_slices)
            .filter(|&s| remaining[s] > 0.0)
            .collect();
        if undelivered.is_empty() {
            self.found
                .entry(tx.clone())
                .or_insert_with(|| self.grants_path.clone());
            return Ok(());
        }
        if slot >= self.slot_cap {
            return Ok(()); // dead branch: cap reached with data left
        }
        let key = (
            slot,
            remaining.iter().map(|r| r.to_bits()).collect::<Vec<_>>(),
            tx.clone(),
        );
        if !self.seen.insert(key) {
            return Ok(());
        }
        self.states += 1;
        if self.states > MAX_COMM_STATES {
            return Err(OracleError::InstanceTooLarge(format!(
                "communication search exceeds {MAX_COMM_STATES} states"
            )));
        }

        // Every RB targets some undelivered slice: combos = U^F.
        let f_count = self.cfg.n_freq;
        let mut combo = vec![0usize; f_count];
        loop {
            let mut rem = remaining.to_vec();
            let mut txv = tx.clone();
            let mut row = vec![None; f_count];
            for (f, &ui) in combo.iter().enumerate() {
                let s = undelivered[ui];
                row[f] = Some(s);
                if rem[s] <= 0.0 {
                    continue; // delivered earlier this slot; grant discards
                }
                let credit = self.grid.transfer_kb(slot, f, s).map_err(EngineError::Channel)?;
                rem[s] -= credit;
                if rem[s] <= 0.0 {
                    rem[s] = 0.0;
                    txv[s] = slot + 1;
                }
            }
            self.grants_path.push(row);
            self.go(slot + 1, &rem, &txv)?;
            self.grants_path.pop();

            // Advance the mixed-radix combo counter.
            let mut f = 0;
            loop {
                if f == f_count {
                    return Ok(());
                }
                combo[f] += 1;
                if combo[f] < undelivered.len() {
                    break;
                }
                combo[f] = 0;
                f += 1;
            }
        }
    }
}

/// Exhaustive minimum makespan for a tiny instance. Refuses anything
/// outside the bounded search space (more than 2 slices, 6 nodes, 2 CUs,
/// 2 resource blocks, or a slot cap outside 1..=64), and any instance
/// whose payloads cannot be fully delivered within the slot cap.
pub fn brute_force_oracle(
    cfg: &SimConfig,
    graph: &TaskGraph,
    grid: &ChannelGrid,
    slot_cap: u64,
) -> Result<OracleResult, OracleError> {
    let mut excess = Vec::new();
    if cfg.n_slices > MAX_SLICES {
        excess.push(format!("n_slices {} > {MAX_SLICES}", cfg.n_slices));
    }
    if graph.n_nodes() > MAX_NODES {
        excess.push(format!("{} nodes > {MAX_NODES}", graph.n_nodes()));
    }
    if cfg.n_cus > MAX_CUS {
        excess.push(format!("n_cus {} > {MAX_CUS}", cfg.n_cus));
    }
    if cfg.n_freq > MAX_FREQ {
        excess.push(format!("n_freq {} > {MAX_FREQ}", cfg.n_freq));
    }
    if slot_cap == 0 || slot_cap > MAX_SLOT_CAP {
        excess.push(format!("slot cap {slot_cap} outside 1..={MAX_SLOT_CAP}"));
    }
    if !excess.is_empty() {
        return Err(OracleError::InstanceTooLarge(excess.join("; ")));
    }

    let remaining = cfg.payloads_kb.clone();
    let tx0: TxVector = remaining
        .iter()
        .map(|&d| if d <= 0.0 { 0 } else { u64::MAX })
        .collect();
    let mut search = CommSearch {
        cfg,
        grid,
        slot_cap,
        seen: HashSet::new(),
        found: BTreeMap::new(),
        states: 0,
        grants_path: Vec::new(),
    };
    search.go(0, &remaining, &tx0)?;
    if search.found.is_empty() {
        return Err(OracleError::InstanceTooLarge(format!(
            "no complete delivery within the {slot_cap}-slot cap"
        )));
    }

    let mut best = f64::INFINITY;
    let mut evaluations = 0u64;
    for grants in search.found.values() {
        best = best.min(explore_dispatches(cfg, graph, grid, grants, &mut evaluations)?);
    }
    Ok(OracleResult {
        t_total_ms: best,
        tx_vectors: search.found.len(),
        evaluations,
    })
}

/// Minimum makespan over all dispatch decision sequences for one fixed
/// grant script, by iterative backtracking over recorded decision points.
fn explore_dispatches(
    cfg: &SimConfig,
    graph: &TaskGraph,
    grid: &ChannelGrid,
    grants: &[Vec<Option<usize>>],
    evaluations: &mut u64,
) -> Result<f64, OracleError> {
    struct Frame {
        options: Vec<(NodeId, usize)>,
        chosen: usize,
    }
    let mut frames: Vec<Frame> = Vec::new();
    let mut best = f64::INFINITY;
    loop {
        *evaluations += 1;
        if *evaluations > MAX_EVALUATIONS {
            return Err(OracleError::InstanceTooLarge(format!(
                "schedule enumeration exceeds {MAX_EVALUATIONS} engine runs"
            )));
        }
        let mut comm = ScriptedComm {
            grants: grants.to_vec(),
            n_freq: cfg.n_freq,
        };
        let mut probe = ProbeCompute {
            script: frames.iter().map(|f| f.options[f.chosen]).collect(),
            pos: 0,
            recorded: Vec::new(),
        };
        let sched = run(cfg, graph, grid, &mut comm, &mut probe)?;
        if sched.t_total_ms < best {
            best = sched.t_total_ms;
        }
        frames.extend(
            probe
                .recorded
                .into_iter()
                .map(|options| Frame { options, chosen: 0 }),
        );
        loop {
            match frames.last_mut() {
                None => return Ok(best),
                Some(f) if f.chosen + 1 < f.options.len() => {
                    f.chosen += 1;
                    break;
                }
                Some(_) => {
                    frames.pop();
                }
            }
        }
    }
}
