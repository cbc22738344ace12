//! Scenario configuration: JSON ingestion, defaults, validation.
//!
//! A configuration arrives as JSON with optional fields; [`validate_config`]
//! fills defaults and checks every invariant, reporting the first violation
//! by field name. Unknown JSON keys are rejected outright so typos cannot
//! silently fall back to defaults. The environment variable `WINPA_SEED`,
//! when set, overrides the seed during file/string loading (never during
//! pure validation).

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid_config({field}): {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Raw, possibly partial configuration as it appears on disk. Every field
/// is optional; [`validate_config`] turns this into a [`SimConfig`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSimConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_slices: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_cus: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_freq: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon_slots: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payloads_kb: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_min_kbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_max_kbps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comp_range_ms: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub read_on_range_ms: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub write_on_range_ms: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub read_off_range_ms: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub write_off_range_ms: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cu_speed_factors: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes_per_slice_range: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intra_edge_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comm_policy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compute_policy: Option<String>,
}

/// Fully resolved, validated configuration. Construct via
/// [`validate_config`] (or [`SimConfig::default`] for the stock scenario).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    /// Number of input slices (one wireless payload and one task DAG each).
    pub n_slices: usize,
    /// Number of compute units.
    pub n_cus: usize,
    /// OFDMA resource blocks per slot.
    pub n_freq: usize,
    /// Nominal slot horizon; the grid extends lazily past it, with the
    /// schedule flagged `horizon_exceeded`.
    pub horizon_slots: u64,
    /// Slot duration in milliseconds.
    pub slot_ms: f64,
    /// Per-slice input payload in kilobytes (1 kB = 1000 bytes).
    pub payloads_kb: Vec<f64>,
    pub rate_min_kbps: f64,
    pub rate_max_kbps: f64,
    /// Per-node compute time range at speed factor 1.0.
    pub comp_range_ms: [f64; 2],
    pub read_on_range_ms: [f64; 2],
    pub write_on_range_ms: [f64; 2],
    pub read_off_range_ms: [f64; 2],
    pub write_off_range_ms: [f64; 2],
    /// Multiplier on compute time per CU; 1.0 = nominal speed.
    pub cu_speed_factors: Vec<f64>,
    pub nodes_per_slice_range: [usize; 2],
    /// Probability of each optional intra-slice ancestor edge.
    pub intra_edge_prob: f64,
    pub seed: u64,
    pub comm_policy: String,
    pub compute_policy: String,
}

pub const DEFAULT_PAYLOADS_KB: [f64; 6] = [1.0, 7.5, 25.0, 10.0, 35.0, 50.0];

impl Default for SimConfig {
    fn default() -> Self {
        validate_config(RawSimConfig::default()).expect("stock defaults validate")
    }
}

impl SimConfig {
    /// Expected kilobytes delivered by one resource block in one slot,
    /// under the mean channel rate.
    pub fn e_hat_kb(&self) -> f64 {
        (self.rate_min_kbps + self.rate_max_kbps) / 2.0 * self.slot_ms / 8000.0
    }

    pub fn total_payload_kb(&self) -> f64 {
        self.payloads_kb.iter().sum()
    }
}

impl From<&SimConfig> for RawSimConfig {
    fn from(c: &SimConfig) -> Self {
        RawSimConfig {
            n_slices: Some(c.n_slices),
            n_cus: Some(c.n_cus),
            n_freq: Some(c.n_freq),
            horizon_slots: Some(c.horizon_slots),
            slot_ms: Some(c.slot_ms),
            payloads_kb: Some(c.payloads_kb.clone()),
            rate_min_kbps: Some(c.rate_min_kbps),
            rate_max_kbps: Some(c.rate_max_kbps),
            comp_range_ms: Some(c.comp_range_ms),
            read_on_range_ms: Some(c.read_on_range_ms),
            write_on_range_ms: Some(c.write_on_range_ms),
            read_off_range_ms: Some(c.read_off_range_ms),
            write_off_range_ms: Some(c.write_off_range_ms),
            cu_speed_factors: Some(c.cu_speed_factors.clone()),
            nodes_per_slice_range: Some(c.nodes_per_slice_range),
            intra_edge_prob: Some(c.intra_edge_prob),
            seed: Some(c.seed),
            comm_policy: Some(c.comm_policy.clone()),
            compute_policy: Some(c.compute_policy.clone()),
        }
    }
}

fn bad(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

fn check_range(field: &'static str, r: [f64; 2]) -> Result<(), ConfigError> {
    if !r[0].is_finite() || !r[1].is_finite() {
        return Err(bad(field, "bounds must be finite"));
    }
    if r[0] < 0.0 {
        return Err(bad(field, format!("lower bound {} < 0", r[0])));
    }
    if r[0] > r[1] {
        return Err(bad(field, format!("lower {} > upper {}", r[0], r[1])));
    }
    Ok(())
}

/// Fills defaults and checks every invariant, in field order; the error
/// names the first violated field. Validation is pure: it never consults
/// the environment.
pub fn validate_config(raw: RawSimConfig) -> Result<SimConfig, ConfigError> {
    let n_slices = raw.n_slices.unwrap_or(6);
    let n_cus = raw.n_cus.unwrap_or(4);
    let n_freq = raw.n_freq.unwrap_or(8);
    let cfg = SimConfig {
        n_slices,
        n_cus,
        n_freq,
        horizon_slots: raw.horizon_slots.unwrap_or(500),
        slot_ms: raw.slot_ms.unwrap_or(1.0),
        payloads_kb: raw.payloads_kb.unwrap_or_else(|| DEFAULT_PAYLOADS_KB.to_vec()),
        rate_min_kbps: raw.rate_min_kbps.unwrap_or(20.0),
        rate_max_kbps: raw.rate_max_kbps.unwrap_or(2000.0),
        comp_range_ms: raw.comp_range_ms.unwrap_or([5.0, 25.0]),
        read_on_range_ms: raw.read_on_range_ms.unwrap_or([0.1, 0.6]),
        write_on_range_ms: raw.write_on_range_ms.unwrap_or([0.1, 0.6]),
        read_off_range_ms: raw.read_off_range_ms.unwrap_or([2.0, 8.0]),
        write_off_range_ms: raw.write_off_range_ms.unwrap_or([2.0, 8.0]),
        cu_speed_factors: raw.cu_speed_factors.unwrap_or_else(|| vec![1.0; n_cus]),
        nodes_per_slice_range: raw.nodes_per_slice_range.unwrap_or([5, 6]),
        intra_edge_prob: raw.intra_edge_prob.unwrap_or(0.4),
        seed: raw.seed.unwrap_or(0),
        comm_policy: raw.comm_policy.unwrap_or_else(|| "joint_greedy".into()),
        compute_policy: raw
            .compute_policy
            .unwrap_or_else(|| "dispatch_cp_priority".into()),
    };

    if cfg.n_slices == 0 {
        return Err(bad("n_slices", "must be >= 1"));
    }
    if cfg.n_cus == 0 {
        return Err(bad("n_cus", "must be >= 1"));
    }
    if cfg.n_freq == 0 {
        return Err(bad("n_freq", "must be >= 1"));
    }
    if cfg.horizon_slots == 0 {
        return Err(bad("horizon_slots", "must be >= 1"));
    }
    if !(cfg.slot_ms > 0.0) || !cfg.slot_ms.is_finite() {
        return Err(bad("slot_ms", format!("{} is not > 0", cfg.slot_ms)));
    }
    if cfg.payloads_kb.len() != cfg.n_slices {
        return Err(bad(
            "payloads_kb",
            format!(
                "length {} does not match n_slices {}",
                cfg.payloads_kb.len(),
                cfg.n_slices
            ),
        ));
    }
    if let Some(p) = cfg
        .payloads_kb
        .iter()
        .find(|p| !p.is_finite() || **p < 0.0)
    {
        return Err(bad("payloads_kb", format!("payload {p} must be >= 0")));
    }
    if !(cfg.rate_min_kbps > 0.0) || !cfg.rate_min_kbps.is_finite() {
        return Err(bad("rate_min_kbps", "must be > 0"));
    }
    if !(cfg.rate_max_kbps >= cfg.rate_min_kbps) || !cfg.rate_max_kbps.is_finite() {
        return Err(bad(
            "rate_max_kbps",
            format!(
                "must be finite and >= rate_min_kbps ({})",
                cfg.rate_min_kbps
            ),
        ));
    }
    check_range("comp_range_ms", cfg.comp_range_ms)?;
    check_range("read_on_range_ms", cfg.read_on_range_ms)?;
    check_range("write_on_range_ms", cfg.write_on_range_ms)?;
    check_range("read_off_range_ms", cfg.read_off_range_ms)?;
    check_range("write_off_range_ms", cfg.write_off_range_ms)?;
    if cfg.cu_speed_factors.len() != cfg.n_cus {
        return Err(bad(
            "cu_speed_factors",
            format!(
                "length {} does not match n_cus {}",
                cfg.cu_speed_factors.len(),
                cfg.n_cus
            ),
        ));
    }
    if let Some(f) = cfg
        .cu_speed_factors
        .iter()
        .find(|f| !f.is_finite() || **f <= 0.0)
    {
        return Err(bad("cu_speed_factors", format!("factor {f} must be > 0")));
    }
    if cfg.nodes_per_slice_range[0] < 1 {
        return Err(bad("nodes_per_slice_range", "lower bound must be >= 1"));
    }
    if cfg.nodes_per_slice_range[0] > cfg.nodes_per_slice_range[1] {
        return Err(bad(
            "nodes_per_slice_range",
            format!(
                "lower {} > upper {}",
                cfg.nodes_per_slice_range[0], cfg.nodes_per_slice_range[1]
            ),
        ));
    }
    if !(0.0..=1.0).contains(&cfg.intra_edge_prob) || !cfg.intra_edge_prob.is_finite() {
        return Err(bad("intra_edge_prob", "must lie in [0, 1]"));
    }
    Ok(cfg)
}

/// Parses JSON text into a validated config. Pure: no environment access.
pub fn parse_config_str(json: &str) -> Result<SimConfig, ConfigError> {
    let raw: RawSimConfig =
        serde_json::from_str(json).map_err(|e| ConfigError::Parse(e.to_string()))?;
    validate_config(raw)
}

/// Loads a config file, honoring a `WINPA_SEED` environment override.
pub fn load_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut raw: RawSimConfig =
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    if let Ok(v) = std::env::var("WINPA_SEED") {
        let seed: u64 = v.trim().parse().map_err(|_| {
            bad("seed", format!("WINPA_SEED value {v:?} is not a 64-bit unsigned integer"))
        })?;
        raw.seed = Some(seed);
    }
    validate_config(raw)
}
