//! Time-frequency channel grid.
//!
//! Each (slot t, resource block f, slice s) cell carries an independently
//! sampled throughput in kbps, uniform on [rate_min, rate_max]. Cells are
//! derived counter-style from the "channel" stream: the value of a cell is
//! a pure function of (seed, t, f, s), so queries may arrive in any order,
//! any number of times, and from any thread, and always agree. The grid
//! extends lazily past the nominal horizon; slot indices are unbounded.

use std::io::Write;

use thiserror::Error;

use crate::config::SimConfig;
use crate::rng::{derive_stream, RngStream};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("index out of range: {what} = {got}, limit {limit}")]
    IndexOutOfRange {
        what: &'static str,
        got: usize,
        limit: usize,
    },
}

#[derive(Debug, Clone)]
pub struct ChannelGrid {
    stream: RngStream,
    n_freq: usize,
    n_slices: usize,
    rate_min_kbps: f64,
    rate_max_kbps: f64,
    slot_ms: f64,
}

/// Kilobytes moved by one resource block in one slot at `rate_kbps`.
/// Rates are kilobits per second and a slot lasts `slot_ms` milliseconds,
/// so kB = rate * slot_ms / 8000 (1 kB = 1000 bytes = 8000 bits).
#[inline]
pub fn kb_per_slot(rate_kbps: f64, slot_ms: f64) -> f64 {
    rate_kbps * slot_ms / 8000.0
}

impl ChannelGrid {
    pub fn new(cfg: &SimConfig) -> Self {
        ChannelGrid {
            stream: derive_stream(cfg.seed, "channel"),
            n_freq: cfg.n_freq,
            n_slices: cfg.n_slices,
            rate_min_kbps: cfg.rate_min_kbps,
            rate_max_kbps: cfg.rate_max_kbps,
            slot_ms: cfg.slot_ms,
        }
    }

    pub fn n_freq(&self) -> usize {
        self.n_freq
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    pub fn slot_ms(&self) -> f64 {
        self.slot_ms
    }

    /// Sampled throughput (kbps) for slice `s` on resource block `f` during
    /// slot `t`. Pure in (t, f, s).
    pub fn rate_at(&self, t: u64, f: usize, s: usize) -> Result<f64, ChannelError> {
        if f >= self.n_freq {
            return Err(ChannelError::IndexOutOfRange {
                what: "f",
                got: f,
                limit: self.n_freq,
            });
        }
        if s >= self.n_slices {
            return Err(ChannelError::IndexOutOfRange {
                what: "s",
                got: s,
                limit: self.n_slices,
            });
        }
        // Cell counter (t*F + f)*S + s; wrapping keeps huge t well-defined,
        // and the stream mix decorrelates neighbours regardless.
        let counter = t
            .wrapping_mul(self.n_freq as u64)
            .wrapping_add(f as u64)
            .wrapping_mul(self.n_slices as u64)
            .wrapping_add(s as u64);
        Ok(self
            .stream
            .uniform_at(counter, self.rate_min_kbps, self.rate_max_kbps)
            .expect("rate bounds validated by config"))
    }

    /// Kilobytes slice `s` receives from resource block `f` during slot `t`.
    pub fn transfer_kb(&self, t: u64, f: usize, s: usize) -> Result<f64, ChannelError> {
        Ok(kb_per_slot(self.rate_at(t, f, s)?, self.slot_ms))
    }

    /// Dumps the grid for slots [0, slots) as CSV with header
    /// `t,f,s,rate_kbps`.
    pub fn dump_csv<W: Write>(&self, w: &mut W, slots: u64) -> std::io::Result<()> {
        writeln!(w, "t,f,s,rate_kbps")?;
        for t in 0..slots {
            for f in 0..self.n_freq {
                for s in 0..self.n_slices {
                    let rate = self.rate_at(t, f, s).expect("indices in range");
                    writeln!(w, "{t},{f},{s},{rate}")?;
                }
            }
        }
        Ok(())
    }
}
