//! Scenario reports and their output formats.

use std::collections::BTreeMap;
use std::io::Write;

use oocmem::{ManagerStats, MemoryManager};
use serde::Serialize;

/// Counter deltas and timing of one scenario phase.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseReport {
    pub name: String,
    pub wall_time_ms: f64,
    pub miss_count: u64,
    pub prefetch_hit_count: u64,
    pub blocked_wait_count: u64,
    pub bytes_written: u64,
    pub bytes_read: u64,
}

/// Full result of one scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub wall_time_ms: f64,
    pub miss_count: u64,
    pub prefetch_hit_count: u64,
    pub blocked_wait_count: u64,
    pub bytes_written: u64,
    pub bytes_read: u64,
    pub peak_resident_bytes: u64,
    pub ram_limit_bytes: u64,
    pub budget_violations: u64,
    pub phases: Vec<PhaseReport>,
    /// Scenario-specific values (paired-run timings, overhead percentages).
    pub extra: BTreeMap<String, f64>,
}

impl Report {
    pub fn phase(&self, name: &str) -> Option<&PhaseReport> {
        self.phases.iter().find(|p| p.name == name)
    }

    pub fn extra(&self, key: &str) -> Option<f64> {
        self.extra.get(key).copied()
    }
}

/// Tracks counter deltas across a phase.
pub struct PhaseTracker {
    name: String,
    start: ManagerStats,
    begun: std::time::Instant,
}

impl PhaseTracker {
    pub fn begin(name: &str, manager: &MemoryManager) -> Self {
        PhaseTracker {
            name: name.to_string(),
            start: manager.stats(),
            begun: std::time::Instant::now(),
        }
    }

    pub fn finish(self, manager: &MemoryManager) -> PhaseReport {
        let end = manager.stats();
        PhaseReport {
            name: self.name,
            wall_time_ms: self.begun.elapsed().as_secs_f64() * 1e3,
            miss_count: end.miss_count - self.start.miss_count,
            prefetch_hit_count: end.preemptive_hit_count - self.start.preemptive_hit_count,
            blocked_wait_count: end.blocked_wait_count - self.start.blocked_wait_count,
            bytes_written: end.bytes_written - self.start.bytes_written,
            bytes_read: end.bytes_read - self.start.bytes_read,
        }
    }
}

/// Output format of [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
    Json,
}

/// The fixed CSV column set, one row per phase plus a `total` row.
pub const CSV_HEADER: &str =
    "scenario,phase,wall_time_ms,miss_count,prefetch_hit_count,blocked_wait_count,bytes_written,bytes_read,peak_resident_bytes";

/// Serialize a report to the writer.
pub fn emit_report(report: &Report, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
    match format {
        Format::Text => {
            writeln!(out, "scenario            : {}", report.scenario)?;
            writeln!(out, "wall_time_ms        : {:.3}", report.wall_time_ms)?;
            writeln!(out, "miss_count          : {}", report.miss_count)?;
            writeln!(out, "prefetch_hit_count  : {}", report.prefetch_hit_count)?;
            writeln!(out, "blocked_wait_count  : {}", report.blocked_wait_count)?;
            writeln!(out, "bytes_written       : {}", report.bytes_written)?;
            writeln!(out, "bytes_read          : {}", report.bytes_read)?;
            writeln!(out, "peak_resident_bytes : {}", report.peak_resident_bytes)?;
            writeln!(out, "ram_limit_bytes     : {}", report.ram_limit_bytes)?;
            writeln!(out, "budget_violations   : {}", report.budget_violations)?;
            for p in &report.phases {
                writeln!(
                    out,
                    "phase {:<14}: {:>10.3} ms, {} misses, {} prefetch hits, {} waits, {} written, {} read",
                    p.name,
                    p.wall_time_ms,
                    p.miss_count,
                    p.prefetch_hit_count,
                    p.blocked_wait_count,
                    p.bytes_written,
                    p.bytes_read
                )?;
            }
            for (k, v) in &report.extra {
                writeln!(out, "{k:<20}: {v:.3}")?;
            }
            Ok(())
        }
        Format::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for p in &report.phases {
                writeln!(
                    out,
                    "{},{},{:.3},{},{},{},{},{},",
                    report.scenario,
                    p.name,
                    p.wall_time_ms,
                    p.miss_count,
                    p.prefetch_hit_count,
                    p.blocked_wait_count,
                    p.bytes_written,
                    p.bytes_read
                )?;
            }
            writeln!(
                out,
                "{},total,{:.3},{},{},{},{},{},{}",
                report.scenario,
                report.wall_time_ms,
                report.miss_count,
                report.prefetch_hit_count,
                report.blocked_wait_count,
                report.bytes_written,
                report.bytes_read,
                report.peak_resident_bytes
            )?;
            Ok(())
        }
        Format::Json => {
            let json = serde_json::to_string_pretty(report)
                .map_err(std::io::Error::other)?;
            writeln!(out, "{json}")
        }
    }
}
