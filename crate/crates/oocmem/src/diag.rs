//! Event tracing, budget snapshots and timeline export.
//!
//! Events go into a bounded in-memory ring; when it overflows new events are
//! counted as dropped instead of blocking the caller. With tracing disabled
//! the record path is a single atomic load.
//!
//! The timeline export replays the accounting effect of each event and
//! writes one CSV row per sample period with the header
//! `time_ms,main_memory_bytes,swap_memory_bytes,swapped_out_cum,swapped_in_cum,preemptive_bytes,pending_in,pending_out`.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

use crate::aio::lock;
use crate::error::{Error, Result};
use crate::handle::HandleId;

/// What happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Create,
    Destroy,
    Adhere,
    Pull,
    Release,
    Touch,
    Miss,
    PrefetchIssue,
    PreemptiveHit,
    Decay,
    Evict,
    StoreSubmit,
    LoadSubmit,
    TransferDone,
    Purge,
    PolicyFired,
    Blocked,
    Unblocked,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Create => "CREATE",
            EventKind::Destroy => "DESTROY",
            EventKind::Adhere => "ADHERE",
            EventKind::Pull => "PULL",
            EventKind::Release => "RELEASE",
            EventKind::Touch => "TOUCH",
            EventKind::Miss => "MISS",
            EventKind::PrefetchIssue => "PREFETCH_ISSUE",
            EventKind::PreemptiveHit => "PREEMPTIVE_HIT",
            EventKind::Decay => "DECAY",
            EventKind::Evict => "EVICT",
            EventKind::StoreSubmit => "STORE_SUBMIT",
            EventKind::LoadSubmit => "LOAD_SUBMIT",
            EventKind::TransferDone => "TRANSFER_DONE",
            EventKind::Purge => "PURGE",
            EventKind::PolicyFired => "POLICY_FIRED",
            EventKind::Blocked => "BLOCKED",
            EventKind::Unblocked => "UNBLOCKED",
        }
    }
}

// Detail tags used by the transfer-done and submit events; the timeline
// replay dispatches on them.
pub(crate) mod detail {
    pub const OUT_WRITE: &str = "out";
    pub const OUT_CLEAN: &str = "out-clean";
    pub const OUT_RESCUED: &str = "out-rescued";
    pub const OUT_RESCUED_STALE: &str = "out-rescued-stale";
    pub const OUT_FAILED: &str = "out-failed";
    pub const IN_DEMAND: &str = "in";
    pub const IN_PREFETCH: &str = "in-prefetch";
    pub const IN_FAILED: &str = "in-failed";
    pub const IN_PREFETCH_FAILED: &str = "in-prefetch-failed";
    pub const SUBMIT_WRITE: &str = "write";
    pub const SUBMIT_CLEAN: &str = "clean";
}

/// One trace record.
#[derive(Debug, Clone, Copy)]
pub struct TraceEvent {
    /// Monotonic nanoseconds since manager start.
    pub timestamp_ns: u64,
    pub kind: EventKind,
    pub handle: Option<HandleId>,
    pub bytes: Option<u64>,
    pub detail: &'static str,
}

/// Bounded trace ring.
pub struct TraceRing {
    enabled: AtomicBool,
    capacity: usize,
    dropped: AtomicU64,
    buf: Mutex<VecDeque<TraceEvent>>,
}

impl TraceRing {
    pub fn new(capacity: usize, enabled: bool) -> Self {
        TraceRing {
            enabled: AtomicBool::new(enabled),
            capacity,
            dropped: AtomicU64::new(0),
            buf: Mutex::new(VecDeque::new()),
        }
    }

    pub fn enabled(&self) -> bool {
        self.enabled.load(Ordering::Relaxed)
    }

    pub fn set_enabled(&self, enabled: bool) {
        self.enabled.store(enabled, Ordering::Relaxed);
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        lock(&self.buf).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn record(&self, event: TraceEvent) {
        if !self.enabled.load(Ordering::Relaxed) {
            return;
        }
        let mut buf = lock(&self.buf);
        if buf.len() >= self.capacity {
            drop(buf);
            self.dropped.fetch_add(1, Ordering::Relaxed);
            return;
        }
        buf.push_back(event);
    }

    /// Copy of the current contents, oldest first.
    pub fn events(&self) -> Vec<TraceEvent> {
        lock(&self.buf).iter().copied().collect()
    }

    pub fn clear(&self) {
        lock(&self.buf).clear();
        self.dropped.store(0, Ordering::Relaxed);
    }
}

/// Point-in-time copy of the byte accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BudgetSnapshot {
    pub main_memory_bytes: u64,
    pub swap_memory_bytes: u64,
    pub swapped_out_cumulative_bytes: u64,
    pub swapped_in_cumulative_bytes: u64,
    pub preemptive_used_bytes: u64,
    pub pending_in_bytes: u64,
    pub pending_out_bytes: u64,
}

/// Replay the accounting effect of the events, in order. Returns the state
/// after the last event at or before `until_ns` (`u64::MAX` for all).
pub fn replay(events: &[TraceEvent], until_ns: u64) -> BudgetSnapshot {
    let mut s = BudgetSnapshot::default();
    for ev in sorted(events) {
        if ev.timestamp_ns > until_ns {
            break;
        }
        apply(&mut s, &ev);
    }
    s
}

/// Timestamps are monotone per emitting thread, but ring order can lag by a
/// record race; reconstructions sort first.
fn sorted(events: &[TraceEvent]) -> Vec<TraceEvent> {
    let mut out = events.to_vec();
    out.sort_by_key(|e| e.timestamp_ns);
    out
}

fn apply(s: &mut BudgetSnapshot, ev: &TraceEvent) {
    let bytes = ev.bytes.unwrap_or(0);
    match ev.kind {
        EventKind::Create => s.main_memory_bytes += bytes,
        EventKind::Destroy => s.main_memory_bytes -= bytes,
        EventKind::StoreSubmit => {
            s.pending_out_bytes += bytes;
            if ev.detail == detail::SUBMIT_WRITE {
                s.swap_memory_bytes += bytes;
            }
        }
        EventKind::LoadSubmit => s.pending_in_bytes += bytes,
        EventKind::PrefetchIssue => {
            s.pending_in_bytes += bytes;
            s.preemptive_used_bytes += bytes;
        }
        EventKind::PreemptiveHit => s.preemptive_used_bytes -= bytes,
        EventKind::Decay => s.preemptive_used_bytes -= bytes,
        EventKind::Purge => s.swap_memory_bytes -= bytes,
        EventKind::TransferDone => match ev.detail {
            detail::OUT_WRITE | detail::OUT_CLEAN => {
                s.pending_out_bytes -= bytes;
                s.main_memory_bytes -= bytes;
                s.swapped_out_cumulative_bytes += bytes;
            }
            detail::OUT_RESCUED => {
                s.pending_out_bytes -= bytes;
            }
            detail::OUT_RESCUED_STALE | detail::OUT_FAILED => {
                s.pending_out_bytes -= bytes;
                s.swap_memory_bytes -= bytes;
            }
            detail::IN_DEMAND | detail::IN_PREFETCH => {
                s.pending_in_bytes -= bytes;
                s.main_memory_bytes += bytes;
                s.swapped_in_cumulative_bytes += bytes;
            }
            detail::IN_FAILED => {
                s.pending_in_bytes -= bytes;
            }
            detail::IN_PREFETCH_FAILED => {
                s.pending_in_bytes -= bytes;
                s.preemptive_used_bytes -= bytes;
            }
            _ => {}
        },
        _ => {}
    }
}

pub(crate) const TIMELINE_HEADER: &str = "time_ms,main_memory_bytes,swap_memory_bytes,swapped_out_cum,swapped_in_cum,preemptive_bytes,pending_in,pending_out";

/// Write the sampled timeline of `events` as CSV.
pub fn export_timeline(
    events: &[TraceEvent],
    path: impl AsRef<Path>,
    sample_period_ms: u64,
) -> Result<()> {
    let path = path.as_ref();
    let events = sorted(events);
    let period = sample_period_ms.max(1);
    let file = std::fs::File::create(path)
        .map_err(|e| Error::io(format!("creating timeline {}", path.display()), e))?;
    let mut out = std::io::BufWriter::new(file);
    let write_err = |e| Error::io(format!("writing timeline {}", path.display()), e);
    writeln!(out, "{TIMELINE_HEADER}").map_err(write_err)?;
    let last_ns = events.last().map(|e| e.timestamp_ns).unwrap_or(0);
    // Sample at instants 0, period, 2*period, ... up to (and covering) the
    // last event.
    let rows = last_ns.div_ceil(period * 1_000_000);
    let mut state = BudgetSnapshot::default();
    let mut idx = 0usize;
    for row in 0..=rows {
        let until_ns = row * period * 1_000_000;
        while idx < events.len() && events[idx].timestamp_ns <= until_ns {
            apply(&mut state, &events[idx]);
            idx += 1;
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row * period,
            state.main_memory_bytes,
            state.swap_memory_bytes,
            state.swapped_out_cumulative_bytes,
            state.swapped_in_cumulative_bytes,
            state.preemptive_used_bytes,
            state.pending_in_bytes,
            state.pending_out_bytes,
        )
        .map_err(write_err)?;
    }
    out.flush().map_err(write_err)?;
    Ok(())
}

/// Write the raw events, one JSON object per line.
pub fn export_events(events: &[TraceEvent], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path)
        .map_err(|e| Error::io(format!("creating event dump {}", path.display()), e))?;
    let mut out = std::io::BufWriter::new(file);
    for ev in events {
        let handle = match ev.handle {
            Some(h) => format!("\"{h}\""),
            None => "null".into(),
        };
        let bytes = match ev.bytes {
            Some(b) => b.to_string(),
            None => "null".into(),
        };
        writeln!(
            out,
            "{{\"t_ns\":{},\"kind\":\"{}\",\"handle\":{},\"bytes\":{},\"detail\":\"{}\"}}",
            ev.timestamp_ns,
            ev.kind.as_str(),
            handle,
            bytes,
            ev.detail,
        )
        .map_err(|e| Error::io(format!("writing event dump {}", path.display()), e))?;
    }
    out.flush()
        .map_err(|e| Error::io(format!("writing event dump {}", path.display()), e))?;
    Ok(())
}
