//! Asynchronous transfer engine and double-booked budget accounting.
//!
//! Transfers are executed by a pool of background workers so submission
//! never blocks on file I/O. While a transfer is in flight its bytes are
//! booked on both sides: a swap-in reserves RAM at submission (so the
//! planner can never over-commit the budget) and a swap-out keeps its RAM
//! counted until the write completes, while `freeing_soon` records how many
//! bytes a waiter can count on getting back.
//!
//! Workers never take the manager's state lock while performing I/O; they
//! push a completion record and briefly take the lock only to publish the
//! wake-up, which keeps the deadlock contract simple: callers must not hold
//! the state lock while blocking on a transfer.

use std::collections::{HashSet, VecDeque};
use std::fs::File;
use std::os::unix::fs::FileExt;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use crate::error::{Error, Result};
use crate::handle::Payload;

/// All byte accounting of the manager.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BudgetLedger {
    /// Hard limit for `ram_used + ram_pending_in`.
    pub ram_limit: u64,
    /// Bytes resident in RAM (including payloads being written out).
    pub ram_used: u64,
    /// Bytes double-booked by in-flight swap-ins.
    pub ram_pending_in: u64,
    /// Bytes of allocated swap spans.
    pub swap_used: u64,
    /// Bytes double-booked by in-flight swap-outs.
    pub swap_pending_out: u64,
    /// RAM bytes that will be released when pending swap-outs complete.
    pub freeing_soon: u64,
}

impl BudgetLedger {
    pub fn new(ram_limit: u64) -> Self {
        BudgetLedger {
            ram_limit,
            ..Default::default()
        }
    }

    /// Committed RAM: resident plus reserved by in-flight swap-ins.
    pub fn committed(&self) -> u64 {
        self.ram_used + self.ram_pending_in
    }

    /// Bytes that can still be reserved without breaking the budget.
    pub fn headroom(&self) -> u64 {
        self.ram_limit.saturating_sub(self.committed())
    }

    /// Reserve RAM for a swap-in, atomically with its submission.
    pub fn reserve_swap_in(&mut self, len: u64) -> Result<()> {
        if self.committed() + len > self.ram_limit {
            return Err(Error::RamReservationFailed {
                requested: len,
                headroom: self.headroom(),
            });
        }
        self.ram_pending_in += len;
        Ok(())
    }

    /// Book a swap-out: its RAM stays counted, its release is promised.
    pub fn book_swap_out(&mut self, len: u64) {
        self.swap_pending_out += len;
        self.freeing_soon += len;
    }

    pub fn complete_swap_in(&mut self, len: u64) {
        debug_assert!(self.ram_pending_in >= len);
        self.ram_pending_in -= len;
        self.ram_used += len;
    }

    pub fn cancel_swap_in(&mut self, len: u64) {
        debug_assert!(self.ram_pending_in >= len);
        self.ram_pending_in -= len;
    }

    pub fn complete_swap_out(&mut self, len: u64) {
        debug_assert!(self.swap_pending_out >= len);
        debug_assert!(self.freeing_soon >= len);
        debug_assert!(self.ram_used >= len);
        self.swap_pending_out -= len;
        self.freeing_soon -= len;
        self.ram_used -= len;
    }

    /// A rescued swap-out keeps its payload resident; only the pending
    /// bookkeeping unwinds (`freeing_soon` was already rolled back at the
    /// rescue).
    pub fn complete_swap_out_rescued(&mut self, len: u64) {
        debug_assert!(self.swap_pending_out >= len);
        self.swap_pending_out -= len;
    }

    /// Roll back the freeing promise when a victim is re-adhered mid-flight.
    pub fn rescue_swap_out(&mut self, len: u64) {
        debug_assert!(self.freeing_soon >= len);
        self.freeing_soon -= len;
    }

    /// A failed or cancelled swap-out: nothing was freed.
    pub fn cancel_swap_out(&mut self, len: u64) {
        debug_assert!(self.swap_pending_out >= len);
        debug_assert!(self.freeing_soon >= len);
        self.swap_pending_out -= len;
        self.freeing_soon -= len;
    }
}

/// Direction of a transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    SwapIn,
    SwapOut,
}

/// Token identifying one submitted transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransferToken(pub u64);

/// The I/O work of one transfer. Spans carry their resolved file handles so
/// workers never consult the allocator.
pub enum IoJob {
    /// Write the payload into the spans, in order.
    Write {
        buffer: Payload,
        spans: Vec<(Arc<File>, u64, u64)>,
    },
    /// Re-use a valid on-disk copy: no bytes move.
    CleanDrop,
    /// Read the spans, in order, into a fresh buffer of `byte_len` bytes.
    Read {
        spans: Vec<(Arc<File>, u64, u64)>,
        byte_len: u64,
    },
}

/// A queued transfer.
pub struct TransferRequest {
    pub token: TransferToken,
    pub slot: u32,
    pub direction: Direction,
    pub byte_len: u64,
    pub preemptive: bool,
    pub job: IoJob,
}

/// Terminal state of a transfer.
#[derive(Debug)]
pub enum Outcome {
    Done {
        /// Payload read from disk (swap-ins only).
        buffer: Option<Box<[u8]>>,
        /// File bytes actually moved (zero for clean re-use).
        bytes_moved: u64,
    },
    Failed(String),
    Cancelled,
}

/// Completion record delivered to the manager.
pub struct Completion {
    pub token: TransferToken,
    pub slot: u32,
    pub direction: Direction,
    pub byte_len: u64,
    pub preemptive: bool,
    pub outcome: Outcome,
}

struct EngineQueue {
    queued: VecDeque<TransferRequest>,
    shutdown: bool,
}

/// Shared core of the transfer engine. Workers own an `Arc` of this and
/// nothing else, so dropping the manager tears the pool down cleanly.
///
/// Wake-ups use a stamped signal: a waiter records the stamp while still
/// holding whatever state lock it is about to release, then parks until the
/// stamp changes. Any event bumped after the read is observed by the stamp
/// comparison, so no wake-up can be lost between unlock and park.
pub struct EngineCore {
    queue: Mutex<EngineQueue>,
    queue_cv: Condvar,
    completions: Mutex<Vec<Completion>>,
    /// Tokens submitted and not yet finished.
    outstanding: Mutex<HashSet<u64>>,
    signal: Mutex<u64>,
    signal_cv: Condvar,
    running: AtomicUsize,
    next_token: AtomicU64,
}

impl EngineCore {
    pub fn new() -> Arc<Self> {
        Arc::new(EngineCore {
            queue: Mutex::new(EngineQueue {
                queued: VecDeque::new(),
                shutdown: false,
            }),
            queue_cv: Condvar::new(),
            completions: Mutex::new(Vec::new()),
            outstanding: Mutex::new(HashSet::new()),
            signal: Mutex::new(0),
            signal_cv: Condvar::new(),
            running: AtomicUsize::new(0),
            next_token: AtomicU64::new(1),
        })
    }

    /// Whether a submitted transfer has not finished yet. Unknown tokens
    /// count as finished.
    pub fn is_outstanding(&self, token: TransferToken) -> bool {
        lock(&self.outstanding).contains(&token.0)
    }

    /// Block until `token` finishes (delivery of its completion record may
    /// still be pending). Returns immediately for finished or unknown
    /// tokens.
    pub fn wait_for_token(&self, token: TransferToken) {
        loop {
            let stamp = self.signal_stamp();
            if !self.is_outstanding(token) {
                return;
            }
            self.wait_signal(stamp, Duration::from_millis(50));
        }
    }

    /// Current signal stamp. Read it before releasing the state lock.
    pub fn signal_stamp(&self) -> u64 {
        *lock(&self.signal)
    }

    /// Bump the signal: something a waiter may care about happened.
    pub fn kick(&self) {
        *lock(&self.signal) += 1;
        self.signal_cv.notify_all();
    }

    /// Park until the signal moves past `stamp` or the timeout elapses.
    pub fn wait_signal(&self, stamp: u64, timeout: Duration) {
        let mut s = lock(&self.signal);
        let deadline = std::time::Instant::now() + timeout;
        while *s == stamp {
            let now = std::time::Instant::now();
            if now >= deadline {
                return;
            }
            let (guard, _) = self
                .signal_cv
                .wait_timeout(s, deadline - now)
                .unwrap_or_else(|p| p.into_inner());
            s = guard;
        }
    }

    pub fn next_token(&self) -> TransferToken {
        TransferToken(self.next_token.fetch_add(1, Ordering::Relaxed))
    }

    /// Queue a transfer. Clean drops complete inline; everything else is
    /// handed to the workers.
    pub fn submit(&self, request: TransferRequest) -> TransferToken {
        let token = request.token;
        lock(&self.outstanding).insert(token.0);
        if matches!(request.job, IoJob::CleanDrop) {
            self.push_completion(Completion {
                token: request.token,
                slot: request.slot,
                direction: request.direction,
                byte_len: request.byte_len,
                preemptive: request.preemptive,
                outcome: Outcome::Done {
                    buffer: None,
                    bytes_moved: 0,
                },
            });
            return token;
        }
        let mut q = lock(&self.queue);
        if q.shutdown {
            drop(q);
            self.push_completion(Completion {
                token: request.token,
                slot: request.slot,
                direction: request.direction,
                byte_len: request.byte_len,
                preemptive: request.preemptive,
                outcome: Outcome::Cancelled,
            });
            return token;
        }
        q.queued.push_back(request);
        drop(q);
        self.queue_cv.notify_one();
        token
    }

    /// Drain all delivered completions.
    pub fn poll_completions(&self) -> Vec<Completion> {
        std::mem::take(&mut *lock(&self.completions))
    }

    pub fn completions_pending(&self) -> bool {
        !lock(&self.completions).is_empty()
    }

    /// Queued plus running transfers.
    pub fn in_flight(&self) -> usize {
        lock(&self.queue).queued.len() + self.running.load(Ordering::Acquire)
    }

    /// Stop accepting work. With `drain` the call returns after the workers
    /// finish everything queued; without it queued requests are reported
    /// cancelled (running ones always finish).
    pub fn shutdown(&self, drain: bool) {
        let mut q = lock(&self.queue);
        if q.shutdown && q.queued.is_empty() {
            drop(q);
            self.queue_cv.notify_all();
            return;
        }
        q.shutdown = true;
        if drain {
            while !q.queued.is_empty() || self.running.load(Ordering::Acquire) > 0 {
                self.queue_cv.notify_all();
                let (guard, _) = self
                    .queue_cv
                    .wait_timeout(q, Duration::from_millis(20))
                    .unwrap_or_else(|p| p.into_inner());
                q = guard;
            }
        } else {
            let cancelled: Vec<TransferRequest> = q.queued.drain(..).collect();
            drop(q);
            for request in cancelled {
                self.push_completion(Completion {
                    token: request.token,
                    slot: request.slot,
                    direction: request.direction,
                    byte_len: request.byte_len,
                    preemptive: request.preemptive,
                    outcome: Outcome::Cancelled,
                });
            }
            self.queue_cv.notify_all();
            return;
        }
        drop(q);
        self.queue_cv.notify_all();
    }

    fn push_completion(&self, completion: Completion) {
        lock(&self.outstanding).remove(&completion.token.0);
        lock(&self.completions).push(completion);
        self.kick();
        self.queue_cv.notify_all();
    }

    /// Worker main loop.
    pub fn run_worker(self: &Arc<Self>) {
        loop {
            let request = {
                let mut q = lock(&self.queue);
                loop {
                    if let Some(r) = q.queued.pop_front() {
                        self.running.fetch_add(1, Ordering::AcqRel);
                        break r;
                    }
                    if q.shutdown {
                        return;
                    }
                    q = self
                        .queue_cv
                        .wait_timeout(q, Duration::from_millis(100))
                        .unwrap_or_else(|p| p.into_inner())
                        .0;
                }
            };
            let outcome = perform(&request.job);
            self.running.fetch_sub(1, Ordering::AcqRel);
            self.push_completion(Completion {
                token: request.token,
                slot: request.slot,
                direction: request.direction,
                byte_len: request.byte_len,
                preemptive: request.preemptive,
                outcome,
            });
        }
    }
}

fn perform(job: &IoJob) -> Outcome {
    match job {
        IoJob::CleanDrop => Outcome::Done {
            buffer: None,
            bytes_moved: 0,
        },
        IoJob::Write { buffer, spans } => {
            let payload = buffer.read().unwrap_or_else(|p| p.into_inner());
            let mut cursor = 0usize;
            for (file, offset, len) in spans {
                let end = cursor + *len as usize;
                if let Err(e) = file.write_all_at(&payload[cursor..end], *offset) {
                    return Outcome::Failed(format!("write at offset {offset}: {e}"));
                }
                cursor = end;
            }
            debug_assert_eq!(cursor, payload.len());
            Outcome::Done {
                buffer: None,
                bytes_moved: cursor as u64,
            }
        }
        IoJob::Read { spans, byte_len } => {
            let mut payload = vec![0u8; *byte_len as usize].into_boxed_slice();
            let mut cursor = 0usize;
            for (file, offset, len) in spans {
                let end = cursor + *len as usize;
                if let Err(e) = file.read_exact_at(&mut payload[cursor..end], *offset) {
                    return Outcome::Failed(format!("read at offset {offset}: {e}"));
                }
                cursor = end;
            }
            debug_assert_eq!(cursor as u64, *byte_len);
            Outcome::Done {
                buffer: Some(payload),
                bytes_moved: *byte_len,
            }
        }
    }
}

/// Lock with poison recovery: a panicking user thread must not wedge the
/// whole manager.
pub(crate) fn lock<T>(mutex: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    mutex.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::RwLock;

    fn payload(bytes: &[u8]) -> Payload {
        Arc::new(RwLock::new(bytes.to_vec().into_boxed_slice()))
    }

    fn start_engine(workers: usize) -> (Arc<EngineCore>, Vec<std::thread::JoinHandle<()>>) {
        let engine = EngineCore::new();
        let handles = (0..workers)
            .map(|_| {
                let e = engine.clone();
                std::thread::spawn(move || e.run_worker())
            })
            .collect();
        (engine, handles)
    }

    fn wait_all(engine: &EngineCore, count: usize) -> Vec<Completion> {
        let mut out = Vec::new();
        let deadline = std::time::Instant::now() + Duration::from_secs(10);
        while out.len() < count {
            out.extend(engine.poll_completions());
            assert!(std::time::Instant::now() < deadline, "transfers stalled");
            std::thread::sleep(Duration::from_millis(1));
        }
        out
    }

    #[test]
    fn write_then_read_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let file = Arc::new(
            std::fs::OpenOptions::new()
                .read(true)
                .write(true)
                .create(true)
                .truncate(true)
                .open(dir.path().join("t.swap"))
                .unwrap(),
        );
        file.set_len(256).unwrap();
        let (engine, handles) = start_engine(2);
        let data: Vec<u8> = (0..100u8).collect();
        engine.submit(TransferRequest {
            token: engine.next_token(),
            slot: 0,
            direction: Direction::SwapOut,
            byte_len: 100,
            preemptive: false,
            job: IoJob::Write {
                buffer: payload(&data),
                // Split across two spans, out of positional order on disk.
                spans: vec![(file.clone(), 128, 60), (file.clone(), 0, 40)],
            },
        });
        let done = wait_all(&engine, 1);
        assert!(matches!(
            done[0].outcome,
            Outcome::Done { bytes_moved: 100, .. }
        ));

        engine.submit(TransferRequest {
            token: engine.next_token(),
            slot: 0,
            direction: Direction::SwapIn,
            byte_len: 100,
            preemptive: false,
            job: IoJob::Read {
                spans: vec![(file.clone(), 128, 60), (file.clone(), 0, 40)],
                byte_len: 100,
            },
        });
        let done = wait_all(&engine, 1);
        match &done[0].outcome {
            Outcome::Done {
                buffer: Some(buf), ..
            } => assert_eq!(&buf[..], &data[..]),
            other => panic!("unexpected outcome {other:?}"),
        }
        engine.shutdown(true);
        for h in handles {
            h.join().unwrap();
        }
    }

    #[test]
    fn wait_for_token_returns_after_completion() {
        let dir = tempfile::tempdir().unwrap();
        let file = Arc::new(
            std::fs::OpenOptions::new()
                .read(true)
                .write(true)
                .create(true)
                .truncate(true)
                .open(dir.path().join("t.swap"))
                .unwrap(),
        );
        file.set_len(4096).unwrap();
        let (engine, handles) = start_engine(1);
        let token = engine.submit(TransferRequest {
            token: engine.next_token(),
            slot: 0,
            direction: Direction::SwapOut,
            byte_len: 4096,
            preemptive: false,
            job: IoJob::Write {
                buffer: payload(&[7u8; 4096]),
                spans: vec![(file.clone(), 0, 4096)],
            },
        });
        engine.wait_for_token(token);
        assert!(!engine.is_outstanding(token));
        // Waiting on an already-finished (or unknown) token returns at once.
        engine.wait_for_token(token);
        engine.wait_for_token(TransferToken(9999));
        engine.shutdown(true);
        for h in handles {
            h.join().unwrap();
        }
    }

    #[test]
    fn clean_drop_completes_inline_with_zero_bytes() {
        let (engine, handles) = start_engine(1);
        engine.submit(TransferRequest {
            token: engine.next_token(),
            slot: 3,
            direction: Direction::SwapOut,
            byte_len: 64,
            preemptive: false,
            job: IoJob::CleanDrop,
        });
        let done = engine.poll_completions();
        assert_eq!(done.len(), 1);
        assert!(matches!(
            done[0].outcome,
            Outcome::Done { bytes_moved: 0, .. }
        ));
        // Completions are delivered exactly once.
        assert!(engine.poll_completions().is_empty());
        engine.shutdown(false);
        for h in handles {
            h.join().unwrap();
        }
    }

    /// Blocks from one byte up to a third beyond one swap file round-trip
    /// exactly, including the splits across files.
    #[test]
    fn split_blocks_roundtrip_across_files() {
        use crate::config::SwapPolicy;
        use crate::swapstore::SwapStore;
        let dir = tempfile::tempdir().unwrap();
        let file_size = 1024u64;
        let mut store = SwapStore::new(dir.path(), file_size, SwapPolicy::Fail);
        store.add_file().unwrap();
        store.add_file().unwrap();
        // Fragment both files a little so mid-sized blocks must split.
        let pin_a = store.try_allocate(100).unwrap();
        let _hold = store.try_allocate(200).unwrap();
        store.free_spans(&pin_a).unwrap();

        let (engine, handles) = start_engine(2);
        for len in [1u64, 2, 100, 101, 1023, 1024, 1025, 1300, 1366] {
            let spans = store
                .try_allocate(len)
                .unwrap_or_else(|| panic!("no space for {len}"));
            let resolved: Vec<(Arc<std::fs::File>, u64, u64)> = spans
                .iter()
                .map(|s| (store.file_handle(s.file_index).unwrap(), s.offset, s.len))
                .collect();
            let data: Vec<u8> = (0..len).map(|i| (i * 31 % 251) as u8).collect();
            engine.submit(TransferRequest {
                token: engine.next_token(),
                slot: 0,
                direction: Direction::SwapOut,
                byte_len: len,
                preemptive: false,
                job: IoJob::Write {
                    buffer: payload(&data),
                    spans: resolved.clone(),
                },
            });
            wait_all(&engine, 1);
            engine.submit(TransferRequest {
                token: engine.next_token(),
                slot: 0,
                direction: Direction::SwapIn,
                byte_len: len,
                preemptive: false,
                job: IoJob::Read {
                    spans: resolved,
                    byte_len: len,
                },
            });
            let done = wait_all(&engine, 1);
            match &done[0].outcome {
                Outcome::Done {
                    buffer: Some(buf), ..
                } => assert_eq!(&buf[..], &data[..], "roundtrip broke at {len} bytes"),
                other => panic!("unexpected outcome {other:?}"),
            }
            store.free_spans(&spans).unwrap();
        }
        engine.shutdown(true);
        for h in handles {
            h.join().unwrap();
        }
    }

    #[test]
    fn shutdown_without_drain_cancels_queued_requests() {
        let dir = tempfile::tempdir().unwrap();
        let file = Arc::new(
            std::fs::OpenOptions::new()
                .read(true)
                .write(true)
                .create(true)
                .truncate(true)
                .open(dir.path().join("t.swap"))
                .unwrap(),
        );
        file.set_len(64).unwrap();
        // No workers: everything stays queued.
        let (engine, handles) = start_engine(0);
        for _ in 0..5 {
            engine.submit(TransferRequest {
                token: engine.next_token(),
                slot: 1,
                direction: Direction::SwapIn,
                byte_len: 8,
                preemptive: false,
                job: IoJob::Read {
                    spans: vec![(file.clone(), 0, 8)],
                    byte_len: 8,
                },
            });
        }
        engine.shutdown(false);
        let done = engine.poll_completions();
        assert_eq!(done.len(), 5);
        assert!(done.iter().all(|c| matches!(c.outcome, Outcome::Cancelled)));
        // Submissions after shutdown are cancelled immediately.
        engine.submit(TransferRequest {
            token: engine.next_token(),
            slot: 1,
            direction: Direction::SwapIn,
            byte_len: 8,
            preemptive: false,
            job: IoJob::Read {
                spans: vec![(file.clone(), 0, 8)],
                byte_len: 8,
            },
        });
        assert!(matches!(
            engine.poll_completions()[0].outcome,
            Outcome::Cancelled
        ));
        // Double shutdown is a no-op.
        engine.shutdown(false);
        drop(handles);
    }

    #[test]
    fn shutdown_with_drain_finishes_queued_writes() {
        let dir = tempfile::tempdir().unwrap();
        let file = Arc::new(
            std::fs::OpenOptions::new()
                .read(true)
                .write(true)
                .create(true)
                .truncate(true)
                .open(dir.path().join("t.swap"))
                .unwrap(),
        );
        file.set_len(1024).unwrap();
        let (engine, handles) = start_engine(1);
        for i in 0..5u64 {
            engine.submit(TransferRequest {
                token: engine.next_token(),
                slot: i as u32,
                direction: Direction::SwapOut,
                byte_len: 16,
                preemptive: false,
                job: IoJob::Write {
                    buffer: payload(&[i as u8; 16]),
                    spans: vec![(file.clone(), i * 16, 16)],
                },
            });
        }
        engine.shutdown(true);
        let done = engine.poll_completions();
        assert_eq!(done.len(), 5);
        assert!(done
            .iter()
            .all(|c| matches!(c.outcome, Outcome::Done { bytes_moved: 16, .. })));
        for h in handles {
            h.join().unwrap();
        }
        let mut back = [0u8; 16];
        file.read_exact_at(&mut back, 4 * 16).unwrap();
        assert_eq!(back, [4u8; 16]);
    }

    mod ledger {
        use super::*;

        #[test]
        fn swap_in_reservation_rules() {
            let mut l = BudgetLedger::new(1000);
            l.ram_used = 900;
            l.reserve_swap_in(100).unwrap();
            assert_eq!(l.ram_pending_in, 100);
            // 50 bytes of headroom, 100 requested.
            l.ram_used = 850;
            let err = l.reserve_swap_in(100).unwrap_err();
            assert!(matches!(
                err,
                Error::RamReservationFailed {
                    requested: 100,
                    headroom: 50
                }
            ));
        }

        #[test]
        fn swap_in_completion_moves_pending_to_used() {
            let mut l = BudgetLedger::new(1000);
            l.reserve_swap_in(100).unwrap();
            l.complete_swap_in(100);
            assert_eq!(l.ram_used, 100);
            assert_eq!(l.ram_pending_in, 0);
        }

        #[test]
        fn swap_out_completion_releases_ram() {
            let mut l = BudgetLedger::new(1000);
            l.ram_used = 500;
            l.book_swap_out(150);
            assert_eq!(l.freeing_soon, 150);
            assert_eq!(l.swap_pending_out, 150);
            assert_eq!(l.ram_used, 500, "double-booked until completion");
            l.complete_swap_out(150);
            assert_eq!(l.ram_used, 350);
            assert_eq!(l.freeing_soon, 0);
            assert_eq!(l.swap_pending_out, 0);
        }

        #[test]
        fn rescue_keeps_ram_counted() {
            let mut l = BudgetLedger::new(1000);
            l.ram_used = 500;
            l.book_swap_out(200);
            l.rescue_swap_out(200);
            assert_eq!(l.freeing_soon, 0);
            l.complete_swap_out_rescued(200);
            assert_eq!(l.ram_used, 500);
            assert_eq!(l.swap_pending_out, 0);
        }
    }
}
