//! Metrics, paired Monte Carlo comparison, and parameter sweeps.
//!
//! Comparisons are paired: for each seed, both bundles run on the
//! identical workload and channel realization (all randomness hangs off
//! the seed through labeled streams), so per-seed differences isolate the
//! policy effect. Summaries retain the per-seed rows; every reported
//! statistic can be recomputed from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::validate_schedule;
use crate::channel::ChannelGrid;
use crate::config::{validate_config, RawSimConfig, SimConfig};
use crate::engine::{run_bundle, EngineError, Schedule};
use crate::policies::{BUNDLE_DECOUPLED, BUNDLE_JOINT};
use crate::workload::generate_workload;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid_grid_point({index}): {reason}")]
    InvalidGridPoint { index: usize, reason: String },
    #[error("seed {seed} ({bundle}): {source}")]
    SeedFailure {
        seed: u64,
        bundle: String,
        source: EngineError,
    },
    #[error("seed {seed} ({bundle}): schedule failed audit: {details}")]
    AuditFailure {
        seed: u64,
        bundle: String,
        details: String,
    },
    #[error("empty seed list")]
    NoSeeds,
}

/// Per-run aggregate view of one audited schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub t_total_ms: f64,
    pub tx_finish_ms: Vec<f64>,
    /// Busy time / t_total per CU; 0 for CUs that never ran a task.
    pub cu_utilization: Vec<f64>,
    /// Makespan breakdown: when the air interface went quiet vs when the
    /// last task finished (the latter equals t_total).
    pub last_tx_finish_ms: f64,
    pub final_finish_ms: f64,
    pub horizon_exceeded: bool,
}

pub fn compute_metrics(sched: &Schedule, cfg: &SimConfig) -> MetricsReport {
    let mut busy = vec![0.0f64; cfg.n_cus];
    for e in &sched.gantt {
        if e.cu_id < cfg.n_cus {
            busy[e.cu_id] += e.finish_ms - e.start_ms;
        }
    }
    let cu_utilization = busy
        .iter()
        .map(|&b| {
            if sched.t_total_ms > 0.0 {
                b / sched.t_total_ms
            } else {
                0.0
            }
        })
        .collect();
    MetricsReport {
        t_total_ms: sched.t_total_ms,
        tx_finish_ms: sched.tx_finish_ms.clone(),
        cu_utilization,
        last_tx_finish_ms: sched.tx_finish_ms.iter().copied().fold(0.0, f64::max),
        final_finish_ms: sched.t_total_ms,
        horizon_exceeded: sched.horizon_exceeded,
    }
}

/// One line of the retained per-seed table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub bundle: String,
    pub t_total_ms: f64,
    pub last_tx_finish_ms: f64,
    pub horizon_exceeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleStats {
    pub bundle: String,
    pub count: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

/// Paired per-seed differences, joint minus decoupled (negative means the
/// joint bundle was faster). The interval is a normal-approximation 95%
/// CI (z = 1.96) on the mean difference; for a single seed it degenerates
/// to a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDiff {
    pub count: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub ci95_lo_ms: f64,
    pub ci95_hi_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub bundles: Vec<BundleStats>,
    /// joint − decoupled, paired by seed.
    pub diff: PairedDiff,
    pub rows: Vec<SeedRow>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64], m: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    var.sqrt()
}

fn bundle_stats(bundle: &str, xs: &[f64]) -> BundleStats {
    let m = mean(xs);
    BundleStats {
        bundle: bundle.to_string(),
        count: xs.len(),
        mean_ms: m,
        std_ms: sample_std(xs, m),
        min_ms: xs.iter().copied().fold(f64::INFINITY, f64::min),
        max_ms: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn with_seed(cfg: &SimConfig, seed: u64) -> SimConfig {
    let mut raw = RawSimConfig::from(cfg);
    raw.seed = Some(seed);
    validate_config(raw).expect("reseeding a valid config keeps it valid")
}

fn run_audited(
    cfg: &SimConfig,
    seed: u64,
    bundle: &str,
) -> Result<(Schedule, SimConfig), ExperimentError> {
    let cfg_s = with_seed(cfg, seed);
    let graph = generate_workload(&cfg_s);
    let grid = ChannelGrid::new(&cfg_s);
    let sched = run_bundle(&cfg_s, &graph, &grid, bundle).map_err(|source| {
        ExperimentError::SeedFailure {
            seed,
            bundle: bundle.to_string(),
            source,
        }
    })?;
    let violations = validate_schedule(&cfg_s, &graph, &grid, &sched);
    if !violations.is_empty() {
        let details = violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        return Err(ExperimentError::AuditFailure {
            seed,
            bundle: bundle.to_string(),
            details,
        });
    }
    Ok((sched, cfg_s))
}

/// Rebuilds a summary from a per-seed row table. `run_compare` itself goes
/// through this, so statistics recomputed from an exported table match the
/// reported summary exactly as long as the table round-trips the floats.
pub fn summarize_rows(rows: Vec<SeedRow>) -> Result<MonteCarloSummary, ExperimentError> {
    if rows.is_empty() {
        return Err(ExperimentError::NoSeeds);
    }
    let mut joint = Vec::new();
    let mut decoupled = Vec::new();
    let mut joint_seeds = Vec::new();
    let mut by_seed: BTreeMap<u64, [Option<f64>; 2]> = BTreeMap::new();
    for row in &rows {
        let slot = match row.bundle.as_str() {
            BUNDLE_JOINT => {
                joint.push(row.t_total_ms);
                joint_seeds.push(row.seed);
                0
            }
            BUNDLE_DECOUPLED => {
                decoupled.push(row.t_total_ms);
                1
            }
            _ => continue,
        };
        by_seed.entry(row.seed).or_default()[slot] = Some(row.t_total_ms);
    }
    // Paired differences in joint row order, restricted to seeds that ran
    // both bundles.
    let diffs: Vec<f64> = joint_seeds
        .iter()
        .filter_map(|s| {
            let pair = by_seed.get(s)?;
            Some(pair[0]? - pair[1]?)
        })
        .collect();
    let (dm, ds, half) = if diffs.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        let dm = mean(&diffs);
        let ds = sample_std(&diffs, dm);
        (dm, ds, 1.96 * ds / (diffs.len() as f64).sqrt())
    };
    let mut bundles = Vec::new();
    for (name, xs) in [(BUNDLE_JOINT, &joint), (BUNDLE_DECOUPLED, &decoupled)] {
        if !xs.is_empty() {
            bundles.push(bundle_stats(name, xs));
        }
    }
    Ok(MonteCarloSummary {
        bundles,
        diff: PairedDiff {
            count: diffs.len(),
            mean_ms: dm,
            std_ms: ds,
            ci95_lo_ms: dm - half,
            ci95_hi_ms: dm + half,
        },
        rows,
    })
}

/// Runs the joint and decoupled bundles on the same realization for every
/// seed, audits each schedule, and aggregates the paired comparison.
pub fn run_compare(cfg: &SimConfig, seeds: &[u64]) -> Result<MonteCarloSummary, ExperimentError> {
    if seeds.is_empty() {
        return Err(ExperimentError::NoSeeds);
    }
    let mut rows = Vec::with_capacity(seeds.len() * 2);
    for &seed in seeds {
        for bundle in [BUNDLE_JOINT, BUNDLE_DECOUPLED] {
            let (sched, _) = run_audited(cfg, seed, bundle)?;
            rows.push(SeedRow {
                seed,
                bundle: bundle.to_string(),
                t_total_ms: sched.t_total_ms,
                last_tx_finish_ms: sched.tx_finish_ms.iter().copied().fold(0.0, f64::max),
                horizon_exceeded: sched.horizon_exceeded,
            });
        }
    }
    summarize_rows(rows)
}

/// Sweep description: overrides applied per point on top of the base
/// config. Omitted fields keep the base value; overriding `n_cus` without
/// giving `cu_speed_factors` resets the factors to all-1.0 at the new
/// width (the base vector would no longer fit).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPointOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cus: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_freq: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_min_kbps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_max_kbps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cu_speed_factors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Seeds per point: base seed, base+1, ..., base+seeds-1. The same
    /// list is used at every point, pairing points as well as bundles.
    #[serde(default = "default_grid_seeds")]
    pub seeds: usize,
    pub points: Vec<GridPointOverride>,
}

fn default_grid_seeds() -> usize {
    20
}

pub fn parse_grid_str(text: &str) -> Result<GridSpec, serde_json::Error> {
    serde_json::from_str(text)
}

// Serialize-only: sweep tables are outputs; configs re-enter the system
// through the validated raw-config path, never by decoding a SweepRow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub point_index: usize,
    pub overrides: GridPointOverride,
    /// The fully resolved configuration this point ran with.
    pub cfg: SimConfig,
    pub summary: MonteCarloSummary,
}

fn apply_overrides(
    cfg: &SimConfig,
    ov: &GridPointOverride,
    index: usize,
) -> Result<SimConfig, ExperimentError> {
    let mut raw = RawSimConfig::from(cfg);
    if let Some(n) = ov.n_cus {
        raw.n_cus = Some(n);
        if ov.cu_speed_factors.is_none() {
            raw.cu_speed_factors = None; // re-defaults to all-1.0 at width n
        }
    }
    if let Some(f) = ov.n_freq {
        raw.n_freq = Some(f);
    }
    if let Some(r) = ov.rate_min_kbps {
        raw.rate_min_kbps = Some(r);
    }
    if let Some(r) = ov.rate_max_kbps {
        raw.rate_max_kbps = Some(r);
    }
    if let Some(ref s) = ov.cu_speed_factors {
        raw.cu_speed_factors = Some(s.clone());
    }
    validate_config(raw).map_err(|e| ExperimentError::InvalidGridPoint {
        index,
        reason: e.to_string(),
    })
}

/// One paired comparison per grid point, in point order.
pub fn run_sweep(cfg: &SimConfig, grid: &GridSpec) -> Result<Vec<SweepRow>, ExperimentError> {
    if grid.points.is_empty() {
        return Err(ExperimentError::InvalidGridPoint {
            index: 0,
            reason: "empty grid".to_string(),
        });
    }
    if grid.seeds == 0 {
        return Err(ExperimentError::NoSeeds);
    }
    let seeds: Vec<u64> = (0..grid.seeds as u64).map(|i| cfg.seed + i).collect();
    let mut rows = Vec::with_capacity(grid.points.len());
    for (point_index, ov) in grid.points.iter().enumerate() {
        let point_cfg = apply_overrides(cfg, ov, point_index)?;
        let summary = run_compare(&point_cfg, &seeds)?;
        rows.push(SweepRow {
            point_index,
            overrides: ov.clone(),
            cfg: point_cfg,
            summary,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;
    use crate::engine::{GanttEntry, MemMode};

    #[test]
    fn single_task_occupying_one_cu_has_unit_utilization() {
        let cfg = parse_config_str(
            r#"{"n_slices": 1, "payloads_kb": [0.0], "n_freq": 1, "n_cus": 2}"#,
        )
        .unwrap();
        let sched = Schedule {
            rb_assignments: vec![],
            tx_finish_ms: vec![0.0],
            gantt: vec![GanttEntry {
                node_id: 0,
                cu_id: 0,
                start_ms: 0.0,
                read_ms: 2.0,
                comp_ms: 10.0,
                write_ms: 5.0,
                finish_ms: 17.0,
                read_mode: MemMode::OffChip,
                write_mode: MemMode::OffChip,
            }],
            t_total_ms: 17.0,
            horizon_exceeded: false,
        };
        let m = compute_metrics(&sched, &cfg);
        assert_eq!(m.cu_utilization, vec![1.0, 0.0]);
        assert_eq!(m.last_tx_finish_ms, 0.0);
        assert_eq!(m.final_finish_ms, 17.0);
    }

    #[test]
    fn utilization_ratios_match_hand_arithmetic() {
        let cfg = parse_config_str(
            r#"{"n_slices": 1, "payloads_kb": [0.0], "n_freq": 1, "n_cus": 2}"#,
        )
        .unwrap();
        let row = |node_id, cu_id, start_ms: f64, dur: f64| GanttEntry {
            node_id,
            cu_id,
            start_ms,
            read_ms: 0.0,
            comp_ms: dur,
            write_ms: 0.0,
            finish_ms: start_ms + dur,
            read_mode: MemMode::OffChip,
            write_mode: MemMode::OffChip,
        };
        let sched = Schedule {
            rb_assignments: vec![],
            tx_finish_ms: vec![0.0],
            gantt: vec![row(0, 0, 0.0, 5.0), row(1, 0, 10.0, 5.0), row(2, 1, 0.0, 20.0)],
            t_total_ms: 20.0,
            horizon_exceeded: false,
        };
        let m = compute_metrics(&sched, &cfg);
        assert!((m.cu_utilization[0] - 0.5).abs() < 1e-12);
        assert!((m.cu_utilization[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_seed_summary_mean_equals_that_run() {
        let cfg = parse_config_str(r#"{"seed": 11}"#).unwrap();
        let summary = run_compare(&cfg, &[11]).unwrap();
        assert_eq!(summary.rows.len(), 2);
        for stats in &summary.bundles {
            let row = summary
                .rows
                .iter()
                .find(|r| r.bundle == stats.bundle)
                .unwrap();
            assert_eq!(stats.count, 1);
            assert_eq!(stats.mean_ms, row.t_total_ms);
            assert_eq!(stats.std_ms, 0.0);
            assert_eq!(stats.min_ms, stats.max_ms);
        }
        assert_eq!(summary.diff.ci95_lo_ms, summary.diff.mean_ms);
        assert_eq!(summary.diff.ci95_hi_ms, summary.diff.mean_ms);
    }

    #[test]
    fn summaries_are_deterministic_and_recomputable_from_rows() {
        let cfg = parse_config_str(r#"{"seed": 100}"#).unwrap();
        let seeds: Vec<u64> = (100..110).collect();
        let a = run_compare(&cfg, &seeds).unwrap();
        let b = run_compare(&cfg, &seeds).unwrap();
        assert_eq!(a, b);

        assert_eq!(a.rows.len(), 20);
        for stats in &a.bundles {
            let xs: Vec<f64> = a
                .rows
                .iter()
                .filter(|r| r.bundle == stats.bundle)
                .map(|r| r.t_total_ms)
                .collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            assert!((stats.mean_ms - m).abs() <= 1e-9 * m.abs());
            let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
            assert!((stats.std_ms - var.sqrt()).abs() <= 1e-9 * var.sqrt().max(1.0));
        }
        // Paired diffs rebuild from rows too.
        let mut diffs = Vec::new();
        for seed in &seeds {
            let j = a.rows.iter().find(|r| r.seed == *seed && r.bundle == "joint").unwrap();
            let d = a.rows.iter().find(|r| r.seed == *seed && r.bundle == "decoupled").unwrap();
            diffs.push(j.t_total_ms - d.t_total_ms);
        }
        let dm = diffs.iter().sum::<f64>() / diffs.len() as f64;
        assert!((a.diff.mean_ms - dm).abs() <= 1e-9 * dm.abs().max(1.0));
    }

    #[test]
    fn empty_seed_list_is_rejected() {
        let cfg = SimConfig::default();
        assert!(matches!(run_compare(&cfg, &[]), Err(ExperimentError::NoSeeds)));
    }

    #[test]
    fn paired_bundles_see_a_byte_identical_workload() {
        // run_audited regenerates the workload per (seed, bundle) from the
        // config alone; both bundles of a pair must see the same bytes
        let cfg = parse_config_str(r#"{"seed": 9}"#).unwrap();
        let a = serde_json::to_string(&generate_workload(&cfg)).unwrap();
        let b = serde_json::to_string(&generate_workload(&cfg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_point_grid_equals_run_compare() {
        let cfg = parse_config_str(r#"{"seed": 3}"#).unwrap();
        let grid = GridSpec {
            seeds: 3,
            points: vec![GridPointOverride::default()],
        };
        let rows = run_sweep(&cfg, &grid).unwrap();
        assert_eq!(rows.len(), 1);
        let direct = run_compare(&cfg, &[3, 4, 5]).unwrap();
        assert_eq!(rows[0].summary, direct);
        assert_eq!(rows[0].cfg, cfg);
    }

    #[test]
    fn grid_rows_come_back_in_point_order() {
        let cfg = parse_config_str(r#"{"seed": 9}"#).unwrap();
        let grid = parse_grid_str(
            r#"{"seeds": 2, "points": [
                {"n_freq": 2}, {"n_freq": 4},
                {"n_cus": 2, "n_freq": 2}, {"n_cus": 2, "n_freq": 4}
            ]}"#,
        )
        .unwrap();
        let rows = run_sweep(&cfg, &grid).unwrap();
        assert_eq!(rows.len(), 4);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.point_index, i);
        }
        assert_eq!(rows[1].cfg.n_freq, 4);
        assert_eq!(rows[2].cfg.n_cus, 2);
        // n_cus override without explicit factors re-defaults the vector.
        assert_eq!(rows[2].cfg.cu_speed_factors, vec![1.0, 1.0]);
    }

    #[test]
    fn invalid_grid_point_reports_its_index() {
        let cfg = SimConfig::default();
        let grid = GridSpec {
            seeds: 2,
            points: vec![
                GridPointOverride::default(),
                GridPointOverride {
                    rate_min_kbps: Some(5000.0),
                    ..Default::default()
                },
            ],
        };
        match run_sweep(&cfg, &grid) {
            Err(ExperimentError::InvalidGridPoint { index, reason }) => {
                assert_eq!(index, 1);
                assert!(reason.contains("rate"), "{reason}");
            }
            other => panic!("expected invalid grid point, got {other:?}"),
        }
    }

    #[test]
    fn grid_json_rejects_unknown_fields() {
        assert!(parse_grid_str(r#"{"seeds": 2, "points": [{"n_cu": 1}]}"#).is_err());
        assert!(parse_grid_str(r#"{"seeds": 2, "points": [], "extra": 1}"#).is_err());
    }
}
