//! Deterministic co-simulator for wireless data delivery and DAG compute
//! scheduling on shared compute units.
//!
//! The model: several input slices each own a wireless payload and a task
//! DAG; slice DAGs fuse into one cross-slice graph ending in a Classifier.
//! Communication is slot-quantized over an OFDMA grid of resource blocks;
//! computation runs non-preemptively on heterogeneous compute units with a
//! strict read / compute / write occupancy per task. Pluggable policies
//! decide, each slot, which slice every resource block serves, and, at each
//! dispatch opportunity, which ready task runs on which unit.
//!
//! Everything is reproducible: one root seed fans out into labeled streams
//! (channel, per-slice topology, per-slice timings), so a (config, seed)
//! pair pins the workload, the channel, and every policy decision.

pub mod audit;
pub mod channel;
pub mod config;
pub mod engine;
pub mod export;
pub mod metrics;
pub mod oracle;
pub mod policies;
pub mod rng;
pub mod workload;

pub use audit::{validate_schedule, Violation};
pub use config::{load_config, parse_config_str, validate_config, SimConfig};
pub use engine::{run, run_bundle, Schedule};
pub use export::{export_gantt_svg, export_json, export_schedule_csv, import_schedule_csv};
pub use metrics::{compute_metrics, run_compare, run_sweep, summarize_rows, MonteCarloSummary};
pub use oracle::{brute_force_oracle, OracleResult};
pub use workload::{generate_workload, validate_graph, TaskGraph};
