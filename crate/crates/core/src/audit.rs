//! Independent schedule auditor.
//!
//! `validate_schedule` re-derives every feasibility invariant from the raw
//! schedule data plus the simulation inputs. It deliberately shares no
//! bookkeeping with the engine: it builds its own adjacency lists, applies
//! its own copy of the memory-mode rule, and replays delivery from the
//! sparse RB triples. A bookkeeping bug in the engine therefore cannot
//! vouch for itself here.
//!
//! The auditor never throws; it returns a list of violations (empty means
//! the schedule is feasible and self-consistent).

use serde::{Deserialize, Serialize};

use crate::channel::ChannelGrid;
use crate::config::SimConfig;
use crate::engine::{MemMode, Schedule};
use crate::workload::{NodeId, Owner, TaskGraph};

/// Tolerance for cross-representation float comparisons. Engine output
/// satisfies the invariants bit-exactly; the slack only absorbs textual
/// round-trips and keeps the checks meaningful for imported schedules.
const EPS_MS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.detail)
    }
}

fn violation(out: &mut Vec<Violation>, code: &str, detail: String) {
    out.push(Violation {
        code: code.to_string(),
        detail,
    });
}

/// Checks a schedule against the config, workload, and channel that
/// allegedly produced it. Returns all violations found, empty if none.
pub fn validate_schedule(
    cfg: &SimConfig,
    graph: &TaskGraph,
    grid: &ChannelGrid,
    sched: &Schedule,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = graph.nodes.len();

    // Own adjacency: the auditor trusts only the edge list.
    let mut preds: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut succs: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for &(u, v) in &graph.edges {
        if u >= n || v >= n {
            violation(&mut out, "workload_shape", format!("edge ({u}, {v}) out of range"));
            continue;
        }
        preds[v].push(u);
        succs[u].push(v);
    }

    // One in-degree-zero entry node per slice, found from scratch.
    let mut entry_of_slice: Vec<Option<NodeId>> = vec![None; cfg.n_slices];
    for v in 0..n {
        if !preds[v].is_empty() {
            continue;
        }
        if let Owner::Slice(s) = graph.nodes[v].owner {
            if s < cfg.n_slices {
                if let Some(prev) = entry_of_slice[s] {
                    violation(
                        &mut out,
                        "workload_shape",
                        format!("slice {s} has two entry nodes ({prev} and {v})"),
                    );
                } else {
                    entry_of_slice[s] = Some(v);
                }
            } else {
                violation(&mut out, "workload_shape", format!("node {v} owned by slice {s} out of range"));
            }
        }
    }

    check_delivery(cfg, grid, sched, &mut out);
    let shape_ok = check_gantt_shape(cfg, n, sched, &mut out);
    for e in &sched.gantt {
        let sum = e.start_ms + e.read_ms + e.comp_ms + e.write_ms;
        if (sum - e.finish_ms).abs() > EPS_MS {
            violation(
                &mut out,
                "phase_accounting",
                format!(
                    "node {}: start {} + phases {} != finish {}",
                    e.node_id,
                    e.start_ms,
                    e.read_ms + e.comp_ms + e.write_ms,
                    e.finish_ms
                ),
            );
        }
    }
    if shape_ok {
        check_placement_consistency(cfg, graph, sched, &preds, &succs, &mut out);
        check_precedence(sched, graph, &preds, &entry_of_slice, &mut out);
    }
    check_cu_exclusivity(cfg, sched, &mut out);

    let max_finish = sched.gantt.iter().map(|e| e.finish_ms).fold(0.0f64, f64::max);
    if (sched.t_total_ms - max_finish).abs() > EPS_MS {
        violation(
            &mut out,
            "metric",
            format!(
                "t_total_ms {} differs from max gantt finish {max_finish}",
                sched.t_total_ms
            ),
        );
    }
    out
}

/// Replays the sparse RB triples against the channel grid and compares the
/// outcome with the claimed `tx_finish_ms`. The replay applies credits in
/// ascending (slot, freq) order, matching the crediting order the schedule
/// claims, so a correct schedule reproduces bit-identical arithmetic.
fn check_delivery(cfg: &SimConfig, grid: &ChannelGrid, sched: &Schedule, out: &mut Vec<Violation>) {
    if sched.tx_finish_ms.len() != cfg.n_slices {
        violation(
            out,
            "tx_shape",
            format!(
                "tx_finish_ms has {} entries for {} slices",
                sched.tx_finish_ms.len(),
                cfg.n_slices
            ),
        );
        return;
    }

    let mut triples = sched.rb_assignments.clone();
    triples.sort_unstable_by_key(|&(t, f, _)| (t, f));
    for w in triples.windows(2) {
        if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
            violation(
                out,
                "rb_conflict",
                format!("resource block (slot {}, freq {}) granted twice", w[0].0, w[0].1),
            );
        }
    }

    let mut remaining = cfg.payloads_kb.clone();
    let mut replay_tx: Vec<f64> = remaining
        .iter()
        .map(|&d| if d <= 0.0 { 0.0 } else { f64::NAN })
        .collect();
    let mut i = 0;
    while i < triples.len() {
        let slot = triples[i].0;
        let slot_start = remaining.clone();
        while i < triples.len() && triples[i].0 == slot {
            let (t, f, s) = triples[i];
            i += 1;
            if f >= cfg.n_freq || s >= cfg.n_slices {
                violation(out, "rb_out_of_range", format!("grant (slot {t}, freq {f}, slice {s})"));
                continue;
            }
            if slot_start[s] <= 0.0 {
                violation(
                    out,
                    "rb_after_delivery",
                    format!("slice {s} granted freq {f} in slot {t} after full delivery"),
                );
                continue;
            }
            if remaining[s] <= 0.0 {
                continue; // delivered earlier within this slot; excess discards
            }
            let credit = match grid.transfer_kb(t, f, s) {
                Ok(kb) => kb,
                Err(e) => {
                    violation(out, "rb_out_of_range", e.to_string());
                    continue;
                }
            };
            remaining[s] -= credit;
            if remaining[s] <= 0.0 {
                remaining[s] = 0.0;
                replay_tx[s] = (t + 1) as f64 * cfg.slot_ms;
            }
        }
    }

    for s in 0..cfg.n_slices {
        let claimed = sched.tx_finish_ms[s];
        if replay_tx[s].is_nan() {
            violation(
                out,
                "delivery",
                format!(
                    "slice {s} never reaches its payload ({} kB short of {} kB)",
                    remaining[s], cfg.payloads_kb[s]
                ),
            );
        } else if (claimed - replay_tx[s]).abs() > EPS_MS {
            violation(
                out,
                "delivery",
                format!(
                    "slice {s} claims tx_finish {claimed} ms but RB replay gives {} ms",
                    replay_tx[s]
                ),
            );
        }
    }

    let horizon_ms = cfg.horizon_slots as f64 * cfg.slot_ms;
    let expect_exceeded = replay_tx.iter().any(|&tx| !tx.is_nan() && tx > horizon_ms);
    if !replay_tx.iter().any(|tx| tx.is_nan()) && sched.horizon_exceeded != expect_exceeded {
        violation(
            out,
            "horizon_flag",
            format!(
                "horizon_exceeded is {} but latest delivery vs {horizon_ms} ms horizon implies {}",
                sched.horizon_exceeded, expect_exceeded
            ),
        );
    }
}

fn check_gantt_shape(cfg: &SimConfig, n: usize, sched: &Schedule, out: &mut Vec<Violation>) -> bool {
    let mut ok = true;
    let mut seen = vec![0usize; n];
    for e in &sched.gantt {
        if e.node_id >= n {
            violation(out, "gantt_shape", format!("gantt node {} out of range", e.node_id));
            ok = false;
            continue;
        }
        seen[e.node_id] += 1;
        if e.cu_id >= cfg.n_cus {
            violation(out, "gantt_shape", format!("node {} on CU {} out of range", e.node_id, e.cu_id));
            ok = false;
        }
        if e.start_ms < 0.0 || e.read_ms < 0.0 || e.comp_ms < 0.0 || e.write_ms < 0.0 {
            violation(out, "gantt_shape", format!("node {} has a negative time field", e.node_id));
            ok = false;
        }
    }
    for (v, &count) in seen.iter().enumerate() {
        if count != 1 {
            violation(out, "gantt_shape", format!("node {v} appears {count} times in gantt"));
            ok = false;
        }
    }
    ok
}

/// Re-derives both memory modes and all timing fields for every gantt row.
/// The mode rule is intentionally restated here rather than shared with the
/// engine: read on-chip iff some predecessor exists and every predecessor
/// ran on this row's CU; write off-chip iff any successor has a different
/// owner or there is none.
fn check_placement_consistency(
    cfg: &SimConfig,
    graph: &TaskGraph,
    sched: &Schedule,
    preds: &[Vec<NodeId>],
    succs: &[Vec<NodeId>],
    out: &mut Vec<Violation>,
) {
    let mut cu_of = vec![0usize; graph.nodes.len()];
    for e in &sched.gantt {
        cu_of[e.node_id] = e.cu_id;
    }
    for e in &sched.gantt {
        let v = e.node_id;
        let t = &graph.nodes[v].timing;

        let read_on = !preds[v].is_empty() && preds[v].iter().all(|&p| cu_of[p] == e.cu_id);
        let expect_read = if read_on { MemMode::OnChip } else { MemMode::OffChip };
        let write_off = succs[v].is_empty()
            || succs[v].iter().any(|&w| graph.nodes[w].owner != graph.nodes[v].owner);
        let expect_write = if write_off { MemMode::OffChip } else { MemMode::OnChip };

        if e.read_mode != expect_read {
            violation(out, "mem_mode", format!("node {v} read mode {:?}, placement implies {expect_read:?}", e.read_mode));
        }
        if e.write_mode != expect_write {
            violation(out, "mem_mode", format!("node {v} write mode {:?}, graph implies {expect_write:?}", e.write_mode));
        }

        let expect_read_ms = match expect_read {
            MemMode::OnChip => t.t_read_on_ms,
            MemMode::OffChip => t.t_read_off_ms,
        };
        let expect_write_ms = match expect_write {
            MemMode::OnChip => t.t_write_on_ms,
            MemMode::OffChip => t.t_write_off_ms,
        };
        if (e.read_ms - expect_read_ms).abs() > EPS_MS {
            violation(out, "mem_mode", format!("node {v} read_ms {} != {expect_read_ms}", e.read_ms));
        }
        if (e.write_ms - expect_write_ms).abs() > EPS_MS {
            violation(out, "mem_mode", format!("node {v} write_ms {} != {expect_write_ms}", e.write_ms));
        }
        let expect_comp = t.t_comp_ms * cfg.cu_speed_factors[e.cu_id];
        if (e.comp_ms - expect_comp).abs() > EPS_MS {
            violation(
                out,
                "comp_scaling",
                format!("node {v} comp_ms {} != t_comp {} x speed {}", e.comp_ms, t.t_comp_ms, cfg.cu_speed_factors[e.cu_id]),
            );
        }
    }
}

fn check_precedence(
    sched: &Schedule,
    graph: &TaskGraph,
    preds: &[Vec<NodeId>],
    entry_of_slice: &[Option<NodeId>],
    out: &mut Vec<Violation>,
) {
    let n = graph.nodes.len();
    let mut start = vec![0.0f64; n];
    let mut finish = vec![0.0f64; n];
    for e in &sched.gantt {
        start[e.node_id] = e.start_ms;
        finish[e.node_id] = e.finish_ms;
    }
    for v in 0..n {
        for &u in &preds[v] {
            if finish[u] - start[v] > EPS_MS {
                violation(
                    out,
                    "precedence",
                    format!("node {v} starts at {} before predecessor {u} finishes at {}", start[v], finish[u]),
                );
            }
        }
    }
    for (s, &entry) in entry_of_slice.iter().enumerate() {
        let Some(v) = entry else { continue };
        let Some(&tx) = sched.tx_finish_ms.get(s) else { continue };
        if tx - start[v] > EPS_MS {
            violation(
                out,
                "precedence",
                format!("slice {s} entry node {v} starts at {} before transmission finishes at {tx}", start[v]),
            );
        }
    }
}

fn check_cu_exclusivity(cfg: &SimConfig, sched: &Schedule, out: &mut Vec<Violation>) {
    let mut by_cu: Vec<Vec<(f64, f64, NodeId)>> = vec![Vec::new(); cfg.n_cus];
    for e in &sched.gantt {
        if e.cu_id < cfg.n_cus {
            by_cu[e.cu_id].push((e.start_ms, e.finish_ms, e.node_id));
        }
    }
    for (cu, spans) in by_cu.iter_mut().enumerate() {
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in spans.windows(2) {
            if w[0].1 - w[1].0 > EPS_MS {
                violation(
                    out,
                    "cu_overlap",
                    format!(
                        "CU {cu}: node {} (finish {}) overlaps node {} (start {})",
                        w[0].2, w[0].1, w[1].2, w[1].0
                    ),
                );
            }
        }
    }
}
