//! Deterministic result exports: pretty JSON documents, CSV tables, and an
//! SVG Gantt chart.
//!
//! A schedule exports to four CSV files sharing one path stem
//! (`<stem>_gantt.csv`, `<stem>_rb.csv`, `<stem>_tx.csv`, `<stem>_meta.csv`)
//! and imports back from the same set. Floats are written with the shortest
//! representation that parses back to the identical bits, so a CSV
//! round-trip never changes an audit verdict. The SVG draws one lane per CU
//! with one `<g class="task">` group per task (split into read/comp/write
//! rects) plus one transmission lane per slice; all coordinates are fixed
//! three-decimal strings, so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::SimConfig;
use crate::engine::{MemMode, Schedule};
use crate::metrics::SeedRow;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("io_error: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExportError> {
    fs::write(path, bytes).map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, ExportError> {
    fs::read_to_string(path).map_err(|source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn bad_line(path: &Path, line: usize, reason: impl Into<String>) -> ExportError {
    ExportError::Malformed {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

/// Pretty JSON with a trailing newline. serde_json is built with
/// `float_roundtrip`, so emitted floats re-parse to identical bits.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, ExportError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn export_json<T: Serialize>(value: &T, path: &Path) -> Result<(), ExportError> {
    write_file(path, to_json_string(value)?.as_bytes())
}

pub fn schedule_from_json_str(text: &str) -> Result<Schedule, ExportError> {
    Ok(serde_json::from_str(text)?)
}

fn mode_str(m: MemMode) -> &'static str {
    match m {
        MemMode::OnChip => "on_chip",
        MemMode::OffChip => "off_chip",
    }
}

fn parse_mode(s: &str) -> Result<MemMode, String> {
    match s {
        "on_chip" => Ok(MemMode::OnChip),
        "off_chip" => Ok(MemMode::OffChip),
        other => Err(format!("unknown memory mode {other:?}")),
    }
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    name: &str,
    raw: &str,
) -> Result<T, ExportError> {
    raw.parse()
        .map_err(|_| bad_line(path, line, format!("bad {name}: {raw:?}")))
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut name = stem
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(suffix);
    stem.with_file_name(name)
}

pub const GANTT_CSV_HEADER: &str =
    "node_id,cu_id,start,read,comp,write,finish,read_mode,write_mode";
pub const SEED_CSV_HEADER: &str = "seed,bundle,t_total,last_tx_finish,horizon_exceeded";

/// Writes the four schedule tables, returning the paths in write order.
pub fn export_schedule_csv(sched: &Schedule, stem: &Path) -> Result<Vec<PathBuf>, ExportError> {
    let mut gantt = String::from(GANTT_CSV_HEADER);
    gantt.push('\n');
    for e in &sched.gantt {
        let _ = writeln!(
            gantt,
            "{},{},{},{},{},{},{},{},{}",
            e.node_id,
            e.cu_id,
            e.start_ms,
            e.read_ms,
            e.comp_ms,
            e.write_ms,
            e.finish_ms,
            mode_str(e.read_mode),
            mode_str(e.write_mode),
        );
    }

    let mut rb = String::from("slot,freq,slice\n");
    for &(t, f, s) in &sched.rb_assignments {
        let _ = writeln!(rb, "{t},{f},{s}");
    }

    let mut tx = String::from("slice,tx_finish\n");
    for (s, t) in sched.tx_finish_ms.iter().enumerate() {
        let _ = writeln!(tx, "{s},{t}");
    }

    let meta = format!(
        "t_total,horizon_exceeded\n{},{}\n",
        sched.t_total_ms, sched.horizon_exceeded
    );

    let paths = [
        (with_suffix(stem, "_gantt.csv"), gantt),
        (with_suffix(stem, "_rb.csv"), rb),
        (with_suffix(stem, "_tx.csv"), tx),
        (with_suffix(stem, "_meta.csv"), meta),
    ];
    let mut written = Vec::with_capacity(paths.len());
    for (path, body) in paths {
        write_file(&path, body.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Non-empty data lines of a CSV body after the expected header.
fn csv_lines<'a>(
    path: &Path,
    body: &'a str,
    header: &str,
) -> Result<Vec<(usize, &'a str)>, ExportError> {
    let mut lines = body.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == header => {}
        Some((_, h)) => return Err(bad_line(path, 1, format!("expected header {header:?}, got {h:?}"))),
        None => return Err(bad_line(path, 1, "empty file")),
    }
    Ok(lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect())
}

fn split_n<'a>(
    path: &Path,
    line: usize,
    text: &'a str,
    n: usize,
) -> Result<Vec<&'a str>, ExportError> {
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != n {
        return Err(bad_line(
            path,
            line,
            format!("expected {n} fields, got {}", fields.len()),
        ));
    }
    Ok(fields)
}

/// Reads the four tables written by [`export_schedule_csv`] back into a
/// [`Schedule`].
pub fn import_schedule_csv(stem: &Path) -> Result<Schedule, ExportError> {
    let path = with_suffix(stem, "_gantt.csv");
    let body = read_file(&path)?;
    let mut gantt = Vec::new();
    for (line, text) in csv_lines(&path, &body, GANTT_CSV_HEADER)? {
        let f = split_n(&path, line, text, 9)?;
        gantt.push(crate::engine::GanttEntry {
            node_id: parse_field(&path, line, "node_id", f[0])?,
            cu_id: parse_field(&path, line, "cu_id", f[1])?,
            start_ms: parse_field(&path, line, "start", f[2])?,
            read_ms: parse_field(&path, line, "read", f[3])?,
            comp_ms: parse_field(&path, line, "comp", f[4])?,
            write_ms: parse_field(&path, line, "write", f[5])?,
            finish_ms: parse_field(&path, line, "finish", f[6])?,
            read_mode: parse_mode(f[7]).map_err(|r| bad_line(&path, line, r))?,
            write_mode: parse_mode(f[8]).map_err(|r| bad_line(&path, line, r))?,
        });
    }

    let path = with_suffix(stem, "_rb.csv");
    let body = read_file(&path)?;
    let mut rb_assignments = Vec::new();
    for (line, text) in csv_lines(&path, &body, "slot,freq,slice")? {
        let f = split_n(&path, line, text, 3)?;
        rb_assignments.push((
            parse_field(&path, line, "slot", f[0])?,
            parse_field(&path, line, "freq", f[1])?,
            parse_field(&path, line, "slice", f[2])?,
        ));
    }

    let path = with_suffix(stem, "_tx.csv");
    let body = read_file(&path)?;
    let mut tx_finish_ms = Vec::new();
    for (line, text) in csv_lines(&path, &body, "slice,tx_finish")? {
        let f = split_n(&path, line, text, 2)?;
        let idx: usize = parse_field(&path, line, "slice", f[0])?;
        if idx != tx_finish_ms.len() {
            return Err(bad_line(
                &path,
                line,
                format!("slice {idx} out of order, expected {}", tx_finish_ms.len()),
            ));
        }
        tx_finish_ms.push(parse_field(&path, line, "tx_finish", f[1])?);
    }

    let path = with_suffix(stem, "_meta.csv");
    let body = read_file(&path)?;
    let rows = csv_lines(&path, &body, "t_total,horizon_exceeded")?;
    let (line, text) = match rows.as_slice() {
        [one] => *one,
        _ => return Err(bad_line(&path, 2, "expected exactly one meta row")),
    };
    let f = split_n(&path, line, text, 2)?;
    Ok(Schedule {
        rb_assignments,
        tx_finish_ms,
        gantt,
        t_total_ms: parse_field(&path, line, "t_total", f[0])?,
        horizon_exceeded: parse_field(&path, line, "horizon_exceeded", f[1])?,
    })
}

pub fn export_seed_rows_csv(rows: &[SeedRow], path: &Path) -> Result<(), ExportError> {
    let mut body = String::from(SEED_CSV_HEADER);
    body.push('\n');
    for r in rows {
        let _ = writeln!(
            body,
            "{},{},{},{},{}",
            r.seed, r.bundle, r.t_total_ms, r.last_tx_finish_ms, r.horizon_exceeded
        );
    }
    write_file(path, body.as_bytes())
}

pub fn import_seed_rows_csv(path: &Path) -> Result<Vec<SeedRow>, ExportError> {
    let body = read_file(path)?;
    let mut rows = Vec::new();
    for (line, text) in csv_lines(path, &body, SEED_CSV_HEADER)? {
        let f = split_n(path, line, text, 5)?;
        rows.push(SeedRow {
            seed: parse_field(path, line, "seed", f[0])?,
            bundle: f[1].to_string(),
            t_total_ms: parse_field(path, line, "t_total", f[2])?,
            last_tx_finish_ms: parse_field(path, line, "last_tx_finish", f[3])?,
            horizon_exceeded: parse_field(path, line, "horizon_exceeded", f[4])?,
        });
    }
    Ok(rows)
}

const LANE_H: f64 = 26.0;
const LANE_GAP: f64 = 8.0;
const GUTTER: f64 = 110.0;
const PLOT_W: f64 = 840.0;
const TOP: f64 = 40.0;

/// Renders the schedule as a standalone SVG string: one lane per CU, one
/// `<g class="task">` per task with read/comp/write rects, then one
/// transmission lane per slice with a rect per contiguous granted slot run.
pub fn gantt_svg(cfg: &SimConfig, sched: &Schedule) -> String {
    let span = if sched.t_total_ms > 0.0 {
        sched.t_total_ms
    } else {
        1.0
    };
    let x = |t: f64| GUTTER + t / span * PLOT_W;
    let lanes = cfg.n_cus + cfg.n_slices;
    let height = TOP + lanes as f64 * (LANE_H + LANE_GAP) + 24.0;
    let width = GUTTER + PLOT_W + 20.0;
    let lane_y = |i: usize| TOP + i as f64 * (LANE_H + LANE_GAP);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.3}" height="{height:.3}" viewBox="0 0 {width:.3} {height:.3}" font-family="monospace" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{GUTTER:.3}" y="16" font-size="13">schedule, t_total = {:.3} ms</text>"#,
        sched.t_total_ms
    );

    // time axis: five ticks across the span
    let axis_y = height - 16.0;
    for i in 0..=4u32 {
        let t = span * f64::from(i) / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{0:.3}" y1="{TOP:.3}" x2="{0:.3}" y2="{1:.3}" stroke="#ddd"/>"##,
            x(t),
            axis_y - 10.0
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.3}" y="{axis_y:.3}" text-anchor="middle" fill="#555">{t:.1}</text>"##,
            x(t)
        );
    }

    for cu in 0..cfg.n_cus {
        let y = lane_y(cu);
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="end">CU {cu}</text>"#,
            GUTTER - 8.0,
            y + LANE_H / 2.0 + 4.0
        );
        let _ = writeln!(
            s,
            r##"<line x1="{GUTTER:.3}" y1="{0:.3}" x2="{1:.3}" y2="{0:.3}" stroke="#eee"/>"##,
            y + LANE_H,
            GUTTER + PLOT_W
        );
    }

    // task bars, gantt order; each group is one countable task
    for e in &sched.gantt {
        let y = lane_y(e.cu_id);
        let read_end = e.start_ms + e.read_ms;
        let comp_end = read_end + e.comp_ms;
        let _ = writeln!(s, r#"<g class="task" data-node="{}">"#, e.node_id);
        for (x0, x1, fill) in [
            (e.start_ms, read_end, "#9ecae1"),
            (read_end, comp_end, "#3182bd"),
            (comp_end, e.finish_ms, "#fdae6b"),
        ] {
            let _ = writeln!(
                s,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{LANE_H:.3}" fill="{fill}"/>"#,
                x(x0),
                y,
                (x(x1) - x(x0)).max(0.0)
            );
        }
        let _ = writeln!(
            s,
            r##"<text x="{:.3}" y="{:.3}" fill="#fff">{}</text>"##,
            x(e.start_ms + e.read_ms) + 2.0,
            y + LANE_H / 2.0 + 4.0,
            e.node_id
        );
        let _ = writeln!(s, "</g>");
    }

    // transmission lanes: one rect per contiguous run of granted slots
    for slice in 0..cfg.n_slices {
        let y = lane_y(cfg.n_cus + slice);
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.3}" text-anchor="end">slice {slice}</text>"#,
            GUTTER - 8.0,
            y + LANE_H / 2.0 + 4.0
        );
        let mut slots: Vec<u64> = sched
            .rb_assignments
            .iter()
            .filter(|&&(_, _, sl)| sl == slice)
            .map(|&(t, _, _)| t)
            .collect();
        slots.sort_unstable();
        slots.dedup();
        let mut i = 0;
        while i < slots.len() {
            let mut j = i;
            while j + 1 < slots.len() && slots[j + 1] == slots[j] + 1 {
                j += 1;
            }
            let t0 = slots[i] as f64 * cfg.slot_ms;
            let t1 = (slots[j] + 1) as f64 * cfg.slot_ms;
            let _ = writeln!(
                s,
                r##"<rect class="tx" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#74c476"/>"##,
                x(t0),
                y + LANE_H * 0.25,
                (x(t1) - x(t0)).max(0.0),
                LANE_H * 0.5
            );
            i = j + 1;
        }
    }

    s.push_str("</svg>\n");
    s
}

pub fn export_gantt_svg(
    cfg: &SimConfig,
    sched: &Schedule,
    path: &Path,
) -> Result<(), ExportError> {
    write_file(path, gantt_svg(cfg, sched).as_bytes())
}
