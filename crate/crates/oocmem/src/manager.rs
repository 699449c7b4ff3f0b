//! The memory manager: public surface, budget enforcement and transfer
//! orchestration.
//!
//! One manager instance is shared by all threads of a process; it is cheap
//! to clone (all clones refer to the same state). Registry, ledger,
//! scheduler and allocator mutate inside a single mutual-exclusion domain.
//! Blocking calls (`pull`, `create_managed` under pressure) release the
//! domain while parked, and transfer workers never enter it during file
//! I/O, so the manager cannot deadlock on its own locks.

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::atomic::AtomicBool;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{Duration, Instant};

use crate::aio::{
    lock, BudgetLedger, Completion, Direction, EngineCore, IoJob, Outcome, TransferRequest,
};
use crate::config::ManagerConfig;
use crate::diag::{self, detail, BudgetSnapshot, EventKind, TraceEvent, TraceRing};
use crate::error::{Error, Result};
use crate::guard::{AdherenceGuard, DataView};
use crate::handle::{
    flags, AccessMode, HandleId, HandleInfo, HandleState, LoadMode, Payload, Registry, NO_PARENT,
};
use crate::scheduler::{CyclicScheduler, Strategy};
use crate::swapstore::{CleanCopyPurger, InteractiveCallback, SwapStore};

/// Cumulative operation counters.
#[derive(Debug, Default, Clone, Copy)]
struct Counters {
    miss_count: u64,
    preemptive_hit_count: u64,
    blocked_wait_count: u64,
    bytes_written: u64,
    bytes_read: u64,
    swapped_out_cum: u64,
    swapped_in_cum: u64,
    peak_ram_committed: u64,
    budget_violations: u64,
}

/// Public snapshot of counters and ledger state.
#[derive(Debug, Clone, Copy, Default)]
pub struct ManagerStats {
    pub ram_limit: u64,
    pub ram_used: u64,
    pub ram_pending_in: u64,
    pub swap_used: u64,
    pub swap_pending_out: u64,
    pub freeing_soon: u64,
    pub pulled_bytes: u64,
    pub live_handles: usize,
    pub miss_count: u64,
    pub preemptive_hit_count: u64,
    pub blocked_wait_count: u64,
    pub bytes_written: u64,
    pub bytes_read: u64,
    pub swapped_out_cumulative: u64,
    pub swapped_in_cumulative: u64,
    pub peak_ram_committed: u64,
    pub budget_violations: u64,
    pub preemptive_budget_bytes: u64,
    pub preemptive_used_bytes: u64,
    pub hits_since_miss: u64,
    pub dropped_events: u64,
}

struct ManagerState {
    ram_limit: u64,
    overcommit: bool,
    registry: Registry,
    strategy: Box<dyn Strategy>,
    swap: SwapStore,
    ledger: BudgetLedger,
    counters: Counters,
    /// Total bytes of handles with at least one pulled guard.
    pulled_bytes: u64,
    /// Swap-ins (demand and planned prefetches) waiting for RAM headroom.
    pending_demand: VecDeque<(u32, bool)>,
    /// Resident handles with a valid disk copy, oldest cached first.
    clean_cache: VecDeque<u32>,
    /// Error text of failed demand loads, keyed by slot.
    io_errors: HashMap<u32, String>,
}

/// State shared by the manager, its clones, its guards and its workers.
pub struct Shared {
    state: Mutex<ManagerState>,
    engine: Arc<EngineCore>,
    /// Serializes guard groups so grabbing multiple blocks cannot deadlock.
    group_lock: Mutex<()>,
    trace: TraceRing,
    start: Instant,
    workers: Mutex<Vec<std::thread::JoinHandle<()>>>,
}

impl Drop for Shared {
    fn drop(&mut self) {
        self.engine.shutdown(false);
        for handle in lock(&self.workers).drain(..) {
            let _ = handle.join();
        }
        // SwapStore::drop removes the swap files afterwards.
    }
}

/// Builder for a [`MemoryManager`].
pub struct ManagerBuilder {
    config: ManagerConfig,
    strategy: Option<Box<dyn Strategy>>,
    trace_capacity: usize,
    interactive: Option<InteractiveCallback>,
}

impl ManagerBuilder {
    /// Replace the cyclic scheduler with another eviction strategy.
    pub fn strategy(mut self, strategy: Box<dyn Strategy>) -> Self {
        self.strategy = Some(strategy);
        self
    }

    /// Enable event tracing with the given ring capacity.
    pub fn tracing(mut self, ring_capacity: usize) -> Self {
        self.trace_capacity = ring_capacity;
        self
    }

    /// Callback consulted by the `interactive` swap policy.
    pub fn interactive(mut self, cb: InteractiveCallback) -> Self {
        self.interactive = Some(cb);
        self
    }

    pub fn build(self) -> Result<MemoryManager> {
        let cfg = self.config;
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.swap_dir)
            .map_err(|e| Error::io(format!("creating swap dir {}", cfg.swap_dir.display()), e))?;
        let mut swap = SwapStore::new(&cfg.swap_dir, cfg.swap_file_size_bytes, cfg.swap_policy);
        if let Some(cb) = self.interactive {
            swap.set_interactive_callback(cb);
        }
        let strategy = self.strategy.unwrap_or_else(|| {
            Box::new(CyclicScheduler::new(
                cfg.ram_limit_bytes,
                cfg.preemptive_budget_bytes(),
                cfg.significance_level,
            ))
        });
        let state = ManagerState {
            ram_limit: cfg.ram_limit_bytes,
            overcommit: cfg.overcommit,
            registry: Registry::new(),
            strategy,
            swap,
            ledger: BudgetLedger::new(cfg.ram_limit_bytes),
            counters: Counters::default(),
            pulled_bytes: 0,
            pending_demand: VecDeque::new(),
            clean_cache: VecDeque::new(),
            io_errors: HashMap::new(),
        };
        let engine = EngineCore::new();
        let shared = Arc::new(Shared {
            state: Mutex::new(state),
            engine: engine.clone(),
            group_lock: Mutex::new(()),
            trace: TraceRing::new(self.trace_capacity.max(1), self.trace_capacity > 0),
            start: Instant::now(),
            workers: Mutex::new(Vec::new()),
        });
        let mut workers = lock(&shared.workers);
        for _ in 0..cfg.worker_count {
            let engine = engine.clone();
            workers.push(std::thread::spawn(move || engine.run_worker()));
        }
        drop(workers);
        Ok(MemoryManager { shared })
    }
}

/// An out-of-core memory manager over a fixed RAM budget.
#[derive(Clone)]
pub struct MemoryManager {
    shared: Arc<Shared>,
}

impl MemoryManager {
    pub fn builder(config: ManagerConfig) -> ManagerBuilder {
        ManagerBuilder {
            config,
            strategy: None,
            trace_capacity: 0,
            interactive: None,
        }
    }

    pub fn new(config: ManagerConfig) -> Result<Self> {
        Self::builder(config).build()
    }

    pub fn ram_limit(&self) -> u64 {
        lock(&self.shared.state).ram_limit
    }

    pub fn overcommit(&self) -> bool {
        lock(&self.shared.state).overcommit
    }

    /// Toggle overcommit at runtime. Affects only future pulls; threads
    /// already blocked re-evaluate the flag on their next wakeup.
    pub fn set_overcommit(&self, overcommit: bool) {
        let mut st = lock(&self.shared.state);
        st.overcommit = overcommit;
        drop(st);
        self.shared.engine.kick();
    }

    /// Create a managed block of `element_count * element_size` bytes. The
    /// payload is resident and initialized on return; creating it may evict
    /// other unpinned blocks.
    ///
    /// `init` is an optional per-element fill pattern of exactly
    /// `element_size` bytes; without it the payload is zeroed.
    pub fn create_managed(
        &self,
        element_count: u64,
        element_size: u32,
        init: Option<&[u8]>,
    ) -> Result<HandleId> {
        self.create_with_parent(element_count, element_size, init, NO_PARENT)
    }

    fn create_with_parent(
        &self,
        element_count: u64,
        element_size: u32,
        init: Option<&[u8]>,
        parent: u32,
    ) -> Result<HandleId> {
        if element_count == 0 || element_size == 0 {
            return Err(Error::Config(
                "element_count and element_size must be positive".into(),
            ));
        }
        if let Some(pattern) = init {
            if pattern.len() != element_size as usize {
                return Err(Error::Config(format!(
                    "fill pattern is {} bytes, element_size is {element_size}",
                    pattern.len()
                )));
            }
        }
        let byte_len = element_count
            .checked_mul(element_size as u64)
            .ok_or_else(|| Error::Config("allocation size overflows".into()))?;
        let shared = &self.shared;
        let mut st = lock(&shared.state);
        if byte_len > st.ram_limit {
            return Err(Error::SizeExceedsRamLimit {
                requested: byte_len,
                ram_limit: st.ram_limit,
            });
        }
        let mut blocked = false;
        loop {
            drain_completions(shared, &mut st);
            if st.ledger.headroom() >= byte_len {
                break;
            }
            match request_room(shared, &mut st, byte_len) {
                Ok(()) => {}
                Err(e @ Error::OutOfSwapSpace { .. }) => return Err(e),
                Err(_) => {
                    // Not enough evictable data right now. Without
                    // overcommit, fail once nothing in flight can free the
                    // bytes; with it, wait for other threads to release.
                    if !st.overcommit
                        && st.ledger.freeing_soon == 0
                        && shared.engine.in_flight() == 0
                        && !shared.engine.completions_pending()
                    {
                        return Err(Error::OutOfMemoryRequest {
                            requested: byte_len,
                            in_use: st.ledger.committed(),
                            ram_limit: st.ram_limit,
                        });
                    }
                }
            }
            if st.ledger.headroom() >= byte_len {
                break;
            }
            if !blocked {
                blocked = true;
                st.counters.blocked_wait_count += 1;
                shared.emit(EventKind::Blocked, None, Some(byte_len), "create-room");
            }
            st = wait_signal(shared, st);
        }
        st.ledger.ram_used += byte_len;
        note_budget(&mut st);
        let buffer = make_buffer(byte_len as usize, element_size as usize, init);
        let id = st
            .registry
            .insert(byte_len, element_size, parent, HandleState::Resident, Some(buffer));
        st.registry.slot_mut(id.slot()).set_dirty(true);
        st.strategy
            .register(id.slot(), byte_len)
            .expect("fresh slot already registered");
        shared.emit(EventKind::Create, Some(id), Some(byte_len), "");
        if blocked {
            shared.emit(EventKind::Unblocked, Some(id), None, "create-room");
        }
        Ok(id)
    }

    /// Convenience for two-dimensional data: creates `rows` inner blocks of
    /// `cols` elements each, plus an outer block holding their raw ids in
    /// order. Destroying the outer block destroys the inner ones.
    pub fn create_managed_2d(
        &self,
        rows: u64,
        cols: u64,
        element_size: u32,
    ) -> Result<(HandleId, Vec<HandleId>)> {
        let outer = self.create_managed(rows, 8, None)?;
        let mut inner = Vec::with_capacity(rows as usize);
        for _ in 0..rows {
            match self.create_with_parent(cols, element_size, None, outer.slot()) {
                Ok(id) => inner.push(id),
                Err(e) => {
                    let _ = self.destroy_managed(outer);
                    return Err(e);
                }
            }
        }
        let guard = self.adhere(outer, AccessMode::ReadWrite, LoadMode::Immediate)?;
        let view = guard.pull()?;
        {
            let mut bytes = view.write()?;
            for (i, id) in inner.iter().enumerate() {
                bytes[i * 8..(i + 1) * 8].copy_from_slice(&id.as_u64().to_le_bytes());
            }
        }
        drop(view);
        drop(guard);
        Ok((outer, inner))
    }

    /// Destroy a block (and its children, newest first). Fails while any
    /// guard on the block or a child is alive.
    pub fn destroy_managed(&self, id: HandleId) -> Result<()> {
        let shared = &self.shared;
        let mut st = lock(&shared.state);
        let root = resolve(&st, id)?;
        // Children first, newest creation first, depth first.
        let mut order = Vec::new();
        collect_destroy_order(&st.registry, root, &mut order);
        for &slot in &order {
            if st.registry.slot(slot).adherence > 0 {
                return Err(Error::HandleStillAdhered(st.registry.id_of(slot)));
            }
        }
        for slot in order {
            // Settle in-flight transfers touching this block.
            loop {
                drain_completions(shared, &mut st);
                let entry = st.registry.slot(slot);
                if entry.adherence > 0 {
                    return Err(Error::HandleStillAdhered(st.registry.id_of(slot)));
                }
                match entry.state() {
                    HandleState::SwappingIn | HandleState::SwappingOut => {
                        st = wait_signal(shared, st);
                    }
                    _ => break,
                }
            }
            let entry = st.registry.slot_mut(slot);
            entry.set_flag(flags::PENDING_DEMAND, false);
            let resident = entry.is_resident();
            let preemptive = entry.state() == HandleState::PreemptiveResident;
            let byte_len = entry.byte_len;
            let spans = entry.spans.take();
            entry.buffer = None;
            if resident {
                st.ledger.ram_used -= byte_len;
            }
            let destroyed_id = st.registry.id_of(slot);
            if preemptive {
                // Its bytes leave the speculative budget with it.
                shared.emit(EventKind::Decay, Some(destroyed_id), Some(byte_len), "destroy");
            }
            shared.emit(
                EventKind::Destroy,
                Some(destroyed_id),
                Some(if resident { byte_len } else { 0 }),
                "",
            );
            if !spans.is_empty() {
                clean_cache_remove(&mut st, slot);
                let freed: u64 = spans.iter().map(|s| s.len).sum();
                st.swap
                    .free_spans(&spans)
                    .expect("destroy freed spans that the allocator does not know");
                st.ledger.swap_used = st.swap.allocated_bytes();
                shared.emit(EventKind::Purge, Some(destroyed_id), Some(freed), "destroy");
            }
            st.io_errors.remove(&slot);
            st.strategy.unregister(slot)?;
            st.registry.remove(slot);
            note_budget(&mut st);
        }
        drop(st);
        shared.engine.kick();
        Ok(())
    }

    /// Adhere to a block with a scoped guard. With immediate loading a
    /// swap-in (plus prefetch) is initiated asynchronously; the call itself
    /// never blocks on I/O.
    ///
    /// A guard protects the handle from destruction; eviction protection
    /// starts with the first pull, so that un-pulled adherence can never
    /// wedge the eviction pipeline (grabbing many blocks at once goes
    /// through [`MemoryManager::pull_group`]).
    pub fn adhere(
        &self,
        id: HandleId,
        mode: AccessMode,
        loading: LoadMode,
    ) -> Result<AdherenceGuard> {
        let shared = &self.shared;
        let mut st = lock(&shared.state);
        drain_completions(shared, &mut st);
        let slot = resolve(&st, id)?;
        {
            let entry = st.registry.slot_mut(slot);
            if entry.adherence == u16::MAX {
                return Err(Error::AdherenceOverflow(id));
            }
            entry.adherence += 1;
        }
        if loading == LoadMode::Immediate
            && st.registry.slot(slot).state() == HandleState::Swapped
            && !st.registry.slot(slot).flag(flags::PENDING_DEMAND)
        {
            // Errors surface at pull time; adhere itself stays non-blocking.
            let _ = initiate_miss(shared, &mut st, slot);
        }
        shared.emit(EventKind::Adhere, Some(id), None, "");
        Ok(AdherenceGuard {
            shared: self.shared.clone(),
            id,
            mode,
            loading,
            pulled: AtomicBool::new(false),
        })
    }

    /// Pull several guards atomically with respect to other groups. Prevents
    /// the multi-resource deadlock of threads each holding one pin while
    /// waiting for another.
    pub fn pull_group<'g>(&self, guards: &'g [AdherenceGuard]) -> Result<Vec<DataView<'g>>> {
        let group_bytes = {
            let st = lock(&self.shared.state);
            let mut sum = 0u64;
            for g in guards {
                sum += st.registry.get(g.id())?.byte_len;
            }
            sum
        };
        let ram_limit = {
            let st = lock(&self.shared.state);
            st.ram_limit
        };
        if group_bytes > ram_limit {
            return Err(Error::GroupExceedsRamLimit {
                group_bytes,
                ram_limit,
            });
        }
        let _serialize = lock(&self.shared.group_lock);
        let mut views = Vec::with_capacity(guards.len());
        for guard in guards {
            views.push(guard.pull()?);
        }
        Ok(views)
    }

    /// Free disk copies of data that is also resident in RAM, oldest first,
    /// until `bytes_wanted` bytes are freed or the cache is empty. Affected
    /// blocks are dirty afterwards (their next eviction must write).
    pub fn purge_clean_copies(&self, bytes_wanted: u64) -> u64 {
        let shared = &self.shared;
        let mut st = lock(&shared.state);
        let state = &mut *st;
        let mut purger = CachePurger {
            registry: &mut state.registry,
            clean_cache: &mut state.clean_cache,
        };
        let freed = purger.purge(&mut state.swap, bytes_wanted);
        state.ledger.swap_used = state.swap.allocated_bytes();
        if freed > 0 {
            shared.emit(EventKind::Purge, None, Some(freed), "explicit");
        }
        freed
    }

    pub fn handle_info(&self, id: HandleId) -> Result<HandleInfo> {
        let mut st = lock(&self.shared.state);
        drain_completions(&self.shared, &mut st);
        let entry = st.registry.get(id)?;
        Ok(HandleInfo {
            id,
            byte_len: entry.byte_len,
            element_count: entry.element_count(),
            element_size: entry.element_size,
            state: entry.state(),
            dirty: entry.dirty(),
            adherence_count: entry.adherence as u32,
            disk_span_count: entry.spans.count(),
            has_clean_copy: entry.flag(flags::IN_CLEAN_CACHE),
            parent: if entry.parent == NO_PARENT {
                None
            } else {
                Some(st.registry.id_of(entry.parent))
            },
        })
    }

    pub fn stats(&self) -> ManagerStats {
        let mut st = lock(&self.shared.state);
        drain_completions(&self.shared, &mut st);
        let pre = st.strategy.preemptive();
        ManagerStats {
            ram_limit: st.ram_limit,
            ram_used: st.ledger.ram_used,
            ram_pending_in: st.ledger.ram_pending_in,
            swap_used: st.ledger.swap_used,
            swap_pending_out: st.ledger.swap_pending_out,
            freeing_soon: st.ledger.freeing_soon,
            pulled_bytes: st.pulled_bytes,
            live_handles: st.registry.live(),
            miss_count: st.counters.miss_count,
            preemptive_hit_count: st.counters.preemptive_hit_count,
            blocked_wait_count: st.counters.blocked_wait_count,
            bytes_written: st.counters.bytes_written,
            bytes_read: st.counters.bytes_read,
            swapped_out_cumulative: st.counters.swapped_out_cum,
            swapped_in_cumulative: st.counters.swapped_in_cum,
            peak_ram_committed: st.counters.peak_ram_committed,
            budget_violations: st.counters.budget_violations,
            preemptive_budget_bytes: pre.budget_bytes,
            preemptive_used_bytes: pre.used_bytes,
            hits_since_miss: pre.hits_since_miss,
            dropped_events: self.shared.trace.dropped(),
        }
    }

    /// Consistent point-in-time copy of the byte accounting.
    pub fn snapshot(&self) -> BudgetSnapshot {
        let mut st = lock(&self.shared.state);
        drain_completions(&self.shared, &mut st);
        BudgetSnapshot {
            main_memory_bytes: st.ledger.ram_used,
            swap_memory_bytes: st.ledger.swap_used,
            swapped_out_cumulative_bytes: st.counters.swapped_out_cum,
            swapped_in_cumulative_bytes: st.counters.swapped_in_cum,
            preemptive_used_bytes: st.strategy.preemptive().used_bytes,
            pending_in_bytes: st.ledger.ram_pending_in,
            pending_out_bytes: st.ledger.swap_pending_out,
        }
    }

    /// Block until at least `bytes` of RAM have been released by completing
    /// swap-outs (counted from the moment of the call).
    ///
    /// Fails with [`Error::WaitImpossible`] when the promised frees of the
    /// current in-flight set cannot cover the request — the caller has to
    /// evict more first.
    pub fn wait_for_freed(&self, bytes: u64) -> Result<()> {
        let shared = &self.shared;
        let mut st = lock(&shared.state);
        drain_completions(shared, &mut st);
        let baseline = st.counters.swapped_out_cum;
        loop {
            let freed = st.counters.swapped_out_cum - baseline;
            if freed >= bytes {
                return Ok(());
            }
            if st.ledger.freeing_soon < bytes - freed {
                return Err(Error::WaitImpossible {
                    requested: bytes,
                    pending: st.ledger.freeing_soon,
                });
            }
            st = wait_signal(shared, st);
            drain_completions(shared, &mut st);
        }
    }

    /// Block until no transfers are queued, running or undelivered, or the
    /// timeout elapses. Returns whether the engine went idle.
    pub fn quiesce(&self, timeout: Duration) -> bool {
        let shared = &self.shared;
        let deadline = Instant::now() + timeout;
        let mut st = lock(&shared.state);
        loop {
            drain_completions(shared, &mut st);
            if shared.engine.in_flight() == 0 && !shared.engine.completions_pending() {
                return true;
            }
            if Instant::now() >= deadline {
                return false;
            }
            st = wait_signal(shared, st);
        }
    }

    /// Path of one provisioned swap file, for diagnostics.
    pub fn swap_file_path(&self, file_index: u32) -> Option<std::path::PathBuf> {
        lock(&self.shared.state)
            .swap
            .file_path(file_index)
            .map(|p| p.to_path_buf())
    }

    /// In-memory bookkeeping bytes proportional to the managed blocks:
    /// registry slab, scheduler nodes, span lists, free lists and queues.
    pub fn metadata_bytes(&self) -> u64 {
        let st = lock(&self.shared.state);
        let queues = ((st.pending_demand.capacity() + st.clean_cache.capacity())
            * std::mem::size_of::<u32>()) as u64;
        st.registry.metadata_bytes() + st.strategy.metadata_bytes() + st.swap.metadata_bytes()
            + queues
    }

    pub fn trace_enabled(&self) -> bool {
        self.shared.trace.enabled()
    }

    pub fn set_trace_enabled(&self, enabled: bool) {
        self.shared.trace.set_enabled(enabled);
    }

    /// Copy of the recorded trace events, oldest first.
    pub fn trace_events(&self) -> Vec<TraceEvent> {
        self.shared.trace.events()
    }

    /// Export the sampled budget timeline as CSV.
    pub fn export_timeline(&self, path: impl AsRef<Path>, sample_period_ms: u64) -> Result<()> {
        {
            let mut st = lock(&self.shared.state);
            drain_completions(&self.shared, &mut st);
        }
        diag::export_timeline(&self.shared.trace.events(), path, sample_period_ms)
    }

    /// Export the raw trace, one JSON object per line.
    pub fn export_events(&self, path: impl AsRef<Path>) -> Result<()> {
        diag::export_events(&self.shared.trace.events(), path)
    }
}

impl std::fmt::Debug for MemoryManager {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let st = lock(&self.shared.state);
        f.debug_struct("MemoryManager")
            .field("ram_limit", &st.ram_limit)
            .field("ram_used", &st.ledger.ram_used)
            .field("live_handles", &st.registry.live())
            .finish()
    }
}

impl Shared {
    fn emit(&self, kind: EventKind, handle: Option<HandleId>, bytes: Option<u64>, det: &'static str) {
        if !self.trace.enabled() {
            return;
        }
        self.trace.record(TraceEvent {
            timestamp_ns: self.start.elapsed().as_nanos() as u64,
            kind,
            handle,
            bytes,
            detail: det,
        });
    }

    /// Pull implementation backing [`AdherenceGuard::pull`].
    pub(crate) fn pull_payload(
        shared: &Arc<Shared>,
        guard: &AdherenceGuard,
    ) -> Result<(Payload, u64)> {
        let id = guard.id();
        let mut st = lock(&shared.state);
        let slot = resolve(&st, id)?;
        let byte_len = st.registry.slot(slot).byte_len;
        let first_pull = !guard.is_pulled();
        let mut blocked = false;

        // Admission: the set of pulled blocks must fit the RAM limit, or
        // with overcommit enabled, the caller waits for releases.
        if first_pull && st.registry.slot(slot).pulled == 0 {
            loop {
                if st.registry.slot(slot).pulled > 0 || st.pulled_bytes + byte_len <= st.ram_limit
                {
                    break;
                }
                if !st.overcommit {
                    return Err(Error::OutOfMemoryRequest {
                        requested: byte_len,
                        in_use: st.pulled_bytes,
                        ram_limit: st.ram_limit,
                    });
                }
                if !blocked {
                    blocked = true;
                    st.counters.blocked_wait_count += 1;
                    shared.emit(EventKind::Blocked, Some(id), Some(byte_len), "overcommit");
                }
                st = wait_signal(shared, st);
                drain_completions(shared, &mut st);
            }
        }
        if first_pull {
            if st.registry.slot(slot).pulled == 0 {
                st.pulled_bytes += byte_len;
                // Pulled data is pinned: never an eviction victim.
                st.strategy.set_pinned(slot, true);
            }
            st.registry.slot_mut(slot).pulled += 1;
        }

        // Residency: drive and await the swap-in.
        let (mut st, residency) = ensure_resident(shared, st, slot, id, &mut blocked);
        if let Err(e) = residency {
            if first_pull {
                let entry = st.registry.slot_mut(slot);
                entry.pulled -= 1;
                if entry.pulled == 0 {
                    st.pulled_bytes -= byte_len;
                    st.strategy.set_pinned(slot, false);
                }
            }
            return Err(e);
        }

        if guard.mode() == AccessMode::ReadWrite {
            mark_dirty_invalidate(shared, &mut st, slot);
        }
        let touch = st
            .strategy
            .touch(slot)
            .expect("resident handle not touchable");
        if touch.preemptive_hit {
            st.counters.preemptive_hit_count += 1;
            st.registry.slot_mut(slot).set_state(HandleState::Resident);
            shared.emit(EventKind::PreemptiveHit, Some(id), Some(byte_len), "");
        }
        shared.emit(EventKind::Touch, Some(id), None, "");
        shared.emit(EventKind::Pull, Some(id), Some(byte_len), "");
        if blocked {
            shared.emit(EventKind::Unblocked, Some(id), None, "");
        }
        let payload = st
            .registry
            .slot(slot)
            .buffer
            .clone()
            .expect("resident handle without buffer");
        Ok((payload, byte_len))
    }

    /// Release implementation backing guard drop.
    pub(crate) fn release_guard(shared: &Arc<Shared>, id: HandleId, pulled: bool) {
        let mut st = lock(&shared.state);
        let Ok(entry) = st.registry.get_mut(id) else {
            debug_assert!(false, "guard outlived its handle");
            return;
        };
        let byte_len = entry.byte_len;
        if pulled {
            entry.pulled -= 1;
            let last_pull = entry.pulled == 0;
            if last_pull {
                st.pulled_bytes -= byte_len;
                st.strategy.set_pinned(id.slot(), false);
            }
        }
        let entry = st.registry.get_mut(id).expect("checked above");
        entry.adherence -= 1;
        shared.emit(EventKind::Release, Some(id), None, "");
        drop(st);
        shared.engine.kick();
    }
}

// ---------------------------------------------------------------------------
// Internal orchestration. All functions take the locked state; functions that
// wait return the re-acquired guard.
// ---------------------------------------------------------------------------

fn resolve(st: &ManagerState, id: HandleId) -> Result<u32> {
    st.registry.get(id)?;
    Ok(id.slot())
}

fn make_buffer(byte_len: usize, element_size: usize, init: Option<&[u8]>) -> Payload {
    let mut buf = vec![0u8; byte_len];
    if let Some(pattern) = init {
        if pattern.iter().any(|&b| b != 0) {
            for chunk in buf.chunks_mut(element_size) {
                chunk.copy_from_slice(&pattern[..chunk.len()]);
            }
        }
    }
    Arc::new(RwLock::new(buf.into_boxed_slice()))
}

fn collect_destroy_order(registry: &Registry, slot: u32, out: &mut Vec<u32>) {
    for child in registry.children_of(slot) {
        collect_destroy_order(registry, child, out);
    }
    out.push(slot);
}

fn note_budget(st: &mut ManagerState) {
    let committed = st.ledger.committed();
    if committed > st.counters.peak_ram_committed {
        st.counters.peak_ram_committed = committed;
    }
    if committed > st.ledger.ram_limit {
        st.counters.budget_violations += 1;
        debug_assert!(
            false,
            "budget violated: committed {committed} > limit {}",
            st.ledger.ram_limit
        );
    }
}

fn wait_signal<'a>(shared: &'a Shared, st: MutexGuard<'a, ManagerState>) -> MutexGuard<'a, ManagerState> {
    let stamp = shared.engine.signal_stamp();
    drop(st);
    shared.engine.wait_signal(stamp, Duration::from_millis(50));
    lock(&shared.state)
}

fn clean_cache_push(st: &mut ManagerState, slot: u32) {
    let entry = st.registry.slot_mut(slot);
    if !entry.flag(flags::IN_CLEAN_CACHE) {
        entry.set_flag(flags::IN_CLEAN_CACHE, true);
        st.clean_cache.push_back(slot);
    }
}

fn clean_cache_remove(st: &mut ManagerState, slot: u32) {
    // The queue entry goes stale and is skipped when popped.
    st.registry
        .slot_mut(slot)
        .set_flag(flags::IN_CLEAN_CACHE, false);
}

/// Purger over the clean-copy cache: frees disk copies of resident data,
/// oldest cached first, marking the owners dirty.
struct CachePurger<'a> {
    registry: &'a mut Registry,
    clean_cache: &'a mut VecDeque<u32>,
}

impl CleanCopyPurger for CachePurger<'_> {
    fn purge(&mut self, store: &mut SwapStore, bytes_wanted: u64) -> u64 {
        let mut freed = 0u64;
        while freed < bytes_wanted {
            let Some(slot) = self.clean_cache.pop_front() else {
                break;
            };
            if !self.registry.slot_live(slot) {
                continue;
            }
            let entry = self.registry.slot_mut(slot);
            if !entry.flag(flags::IN_CLEAN_CACHE) {
                continue; // stale queue entry
            }
            debug_assert!(entry.is_resident() && !entry.dirty());
            entry.set_flag(flags::IN_CLEAN_CACHE, false);
            let spans = entry.spans.take();
            entry.set_dirty(true);
            freed += spans.iter().map(|s| s.len).sum::<u64>();
            store
                .free_spans(&spans)
                .expect("clean cache held spans unknown to the allocator");
        }
        freed
    }
}

/// Allocate swap spans for `byte_len` bytes, with clean-copy purging and the
/// configured policy as fallbacks.
fn allocate_swap(shared: &Shared, st: &mut ManagerState, byte_len: u64) -> Result<Vec<crate::swapstore::ChunkSpan>> {
    let state = &mut *st;
    let mut purger = CachePurger {
        registry: &mut state.registry,
        clean_cache: &mut state.clean_cache,
    };
    let result = state.swap.allocate(byte_len, &mut purger);
    state.ledger.swap_used = state.swap.allocated_bytes();
    match result {
        Ok((spans, outcome)) => {
            if outcome.purged_bytes > 0 {
                shared.emit(EventKind::Purge, None, Some(outcome.purged_bytes), "pressure");
            }
            if outcome.policy_fired {
                shared.emit(
                    EventKind::PolicyFired,
                    None,
                    Some(outcome.files_added as u64),
                    "extend",
                );
            }
            Ok(spans)
        }
        Err(e) => {
            shared.emit(EventKind::PolicyFired, None, Some(byte_len), "fail");
            Err(e)
        }
    }
}

/// Start writing out (or clean-dropping) an eviction victim.
fn submit_swap_out(shared: &Shared, st: &mut ManagerState, slot: u32) -> Result<()> {
    let entry = st.registry.slot(slot);
    debug_assert!(entry.is_resident());
    let byte_len = entry.byte_len;
    let id = st.registry.id_of(slot);
    let clean_reuse = !entry.dirty() && entry.spans.is_some();
    shared.emit(EventKind::Evict, Some(id), Some(byte_len), "");
    if clean_reuse {
        // The on-disk copy is still valid: no write needed.
        clean_cache_remove(st, slot);
        st.ledger.book_swap_out(byte_len);
        st.registry.slot_mut(slot).set_state(HandleState::SwappingOut);
        shared.emit(EventKind::StoreSubmit, Some(id), Some(byte_len), detail::SUBMIT_CLEAN);
        let token = shared.engine.next_token();
        shared.engine.submit(TransferRequest {
            token,
            slot,
            direction: Direction::SwapOut,
            byte_len,
            preemptive: false,
            job: IoJob::CleanDrop,
        });
        return Ok(());
    }
    debug_assert!(
        !st.registry.slot(slot).spans.is_some(),
        "dirty handle still owns spans"
    );
    let spans = match allocate_swap(shared, st, byte_len) {
        Ok(spans) => spans,
        Err(e) => {
            // Roll the victim back into the active zone; nothing happened.
            st.strategy.note_rescued(slot);
            return Err(e);
        }
    };
    let resolved: Vec<(Arc<std::fs::File>, u64, u64)> = spans
        .iter()
        .map(|s| {
            (
                st.swap.file_handle(s.file_index).expect("span without file"),
                s.offset,
                s.len,
            )
        })
        .collect();
    let entry = st.registry.slot_mut(slot);
    entry.spans = crate::handle::DiskSpans::from_vec(spans);
    entry.set_state(HandleState::SwappingOut);
    let buffer = entry.buffer.clone().expect("resident without buffer");
    st.ledger.book_swap_out(byte_len);
    shared.emit(EventKind::StoreSubmit, Some(id), Some(byte_len), detail::SUBMIT_WRITE);
    let token = shared.engine.next_token();
    shared.engine.submit(TransferRequest {
        token,
        slot,
        direction: Direction::SwapOut,
        byte_len,
        preemptive: false,
        job: IoJob::Write {
            buffer,
            spans: resolved,
        },
    });
    Ok(())
}

/// Reserve RAM and submit the read for a swap-in. Returns false when the
/// reservation cannot be made right now.
fn submit_swap_in(shared: &Shared, st: &mut ManagerState, slot: u32, preemptive: bool) -> bool {
    let entry = st.registry.slot(slot);
    debug_assert_eq!(entry.state(), HandleState::Swapped);
    let byte_len = entry.byte_len;
    if st.ledger.reserve_swap_in(byte_len).is_err() {
        return false;
    }
    note_budget(st);
    let id = st.registry.id_of(slot);
    let resolved: Vec<(Arc<std::fs::File>, u64, u64)> = st
        .registry
        .slot(slot)
        .spans
        .to_vec()
        .iter()
        .map(|s| {
            (
                st.swap.file_handle(s.file_index).expect("span without file"),
                s.offset,
                s.len,
            )
        })
        .collect();
    debug_assert!(!resolved.is_empty(), "swapped handle without spans");
    let entry = st.registry.slot_mut(slot);
    entry.set_state(HandleState::SwappingIn);
    entry.set_flag(flags::LOAD_FAILED, false);
    st.io_errors.remove(&slot);
    if preemptive {
        shared.emit(EventKind::PrefetchIssue, Some(id), Some(byte_len), "");
    } else {
        shared.emit(EventKind::LoadSubmit, Some(id), Some(byte_len), "");
    }
    let token = shared.engine.next_token();
    shared.engine.submit(TransferRequest {
        token,
        slot,
        direction: Direction::SwapIn,
        byte_len,
        preemptive,
        job: IoJob::Read {
            spans: resolved,
            byte_len,
        },
    });
    true
}

/// Submit evictions so that `bytes` of RAM can eventually be reserved
/// (headroom + promised frees cover it). Does not wait.
fn request_room(shared: &Shared, st: &mut ManagerState, bytes: u64) -> Result<()> {
    let available = st.ledger.headroom() + st.ledger.freeing_soon;
    if available >= bytes {
        return Ok(());
    }
    let mut deficit = bytes - available;
    let take = deficit.min(st.strategy.evictable_bytes());
    if take > 0 {
        let victims = st.strategy.make_room(take)?;
        for v in victims {
            let len = st.registry.slot(v).byte_len;
            submit_swap_out(shared, st, v)?;
            deficit = deficit.saturating_sub(len);
        }
    }
    if deficit > 0 {
        // Reclaim stale pre-emptive blocks under pressure.
        let victims = st.strategy.take_decay_victims(deficit);
        if !victims.is_empty() {
            let total: u64 = victims
                .iter()
                .map(|&v| st.registry.slot(v).byte_len)
                .sum();
            shared.emit(EventKind::Decay, None, Some(total), "pressure");
            for v in victims {
                let len = st.registry.slot(v).byte_len;
                submit_swap_out(shared, st, v)?;
                deficit = deficit.saturating_sub(len);
            }
        }
    }
    if deficit > 0 {
        return Err(Error::InsufficientEvictableBytes {
            needed: bytes,
            evictable: st.strategy.evictable_bytes(),
        });
    }
    Ok(())
}

/// The demand-miss protocol: decay stale prefetches, plan the swap-in, make
/// room and submit what fits. The demand falls back to the pending queue
/// when RAM headroom is not available yet.
fn initiate_miss(shared: &Shared, st: &mut ManagerState, slot: u32) -> Result<()> {
    let id = st.registry.id_of(slot);
    let byte_len = st.registry.slot(slot).byte_len;
    st.counters.miss_count += 1;
    shared.emit(EventKind::Miss, Some(id), Some(byte_len), "");

    let decay = st.strategy.evaluate_decay();
    if decay > 0 {
        let victims = st.strategy.take_decay_victims(decay);
        if !victims.is_empty() {
            let total: u64 = victims
                .iter()
                .map(|&v| st.registry.slot(v).byte_len)
                .sum();
            shared.emit(EventKind::Decay, None, Some(total), "");
            for v in victims {
                submit_swap_out(shared, st, v)?;
            }
        }
    }

    // Secure room for the demand before planning, so a full swap surfaces
    // before any in-flight marks exist.
    match request_room(shared, st, byte_len) {
        Ok(()) => {}
        Err(e @ Error::OutOfSwapSpace { .. }) => return Err(e),
        Err(_) => {} // insufficient evictable: waiters make progress later
    }
    let plan = st.strategy.plan_swap_in(slot)?;
    let prefetch_bytes: u64 = plan
        .prefetch
        .iter()
        .map(|&p| st.registry.slot(p).byte_len)
        .sum();
    if prefetch_bytes > 0 {
        // Prefetching is opportunistic; a full swap here only means fewer
        // speculative loads.
        let _ = request_room(shared, st, byte_len + prefetch_bytes);
    }
    if !submit_swap_in(shared, st, slot, false) {
        let entry = st.registry.slot_mut(slot);
        entry.set_flag(flags::PENDING_DEMAND, true);
        st.pending_demand.push_back((slot, false));
    }
    for p in plan.prefetch {
        if st.registry.slot(p).state() != HandleState::Swapped {
            st.strategy.cancel_prefetch(p);
        } else if !submit_swap_in(shared, st, p, true) {
            // Queue it: evictions for this miss are still in flight, and
            // the budget was already granted by the plan.
            let entry = st.registry.slot_mut(p);
            entry.set_flag(flags::PENDING_DEMAND, true);
            st.pending_demand.push_back((p, true));
        }
    }
    Ok(())
}

/// Bytes of queued demand loads up to and including `slot`.
fn pending_prefix_bytes(st: &ManagerState, slot: u32) -> u64 {
    let mut sum = 0u64;
    for &(s, _) in &st.pending_demand {
        if st.registry.slot_live(s) {
            sum += st.registry.slot(s).byte_len;
        }
        if s == slot {
            break;
        }
    }
    sum
}

/// Issue queued demand loads for which headroom has become available.
fn pump_pending(shared: &Shared, st: &mut ManagerState) {
    while let Some(&(slot, preemptive)) = st.pending_demand.front() {
        if !st.registry.slot_live(slot) {
            st.pending_demand.pop_front();
            continue;
        }
        let entry = st.registry.slot(slot);
        if !entry.flag(flags::PENDING_DEMAND) || entry.state() != HandleState::Swapped {
            st.pending_demand.pop_front();
            continue;
        }
        if submit_swap_in(shared, st, slot, preemptive) {
            st.registry
                .slot_mut(slot)
                .set_flag(flags::PENDING_DEMAND, false);
            st.pending_demand.pop_front();
        } else {
            break;
        }
    }
}

/// A swap-out victim is being re-adhered while its transfer is still in
/// flight: keep the payload resident and let the completion know.
fn rescue(shared: &Shared, st: &mut ManagerState, slot: u32) {
    let entry = st.registry.slot_mut(slot);
    debug_assert_eq!(entry.state(), HandleState::SwappingOut);
    let byte_len = entry.byte_len;
    entry.set_flag(flags::RESCUED, true);
    entry.set_state(HandleState::Resident);
    st.ledger.rescue_swap_out(byte_len);
    st.strategy.note_rescued(slot);
    shared.emit(
        EventKind::Touch,
        Some(st.registry.id_of(slot)),
        Some(byte_len),
        "rescue",
    );
}

/// A read-write pull: the payload may change, so any clean disk copy is
/// invalid from here on.
fn mark_dirty_invalidate(shared: &Shared, st: &mut ManagerState, slot: u32) {
    let entry = st.registry.slot_mut(slot);
    if entry.flag(flags::RESCUED) {
        // A write-out is reading the buffer right now; the copy it produces
        // is stale. Spans are freed when the transfer completes.
        entry.set_flag(flags::DIRTIED_IN_FLIGHT, true);
        entry.set_dirty(true);
        return;
    }
    let had_copy = entry.spans.is_some();
    entry.set_dirty(true);
    if had_copy {
        clean_cache_remove(st, slot);
        let entry = st.registry.slot_mut(slot);
        let freed = entry.spans.total_len();
        let spans = entry.spans.take();
        st.swap
            .free_spans(&spans)
            .expect("invalidated spans unknown to the allocator");
        st.ledger.swap_used = st.swap.allocated_bytes();
        shared.emit(
            EventKind::Purge,
            Some(st.registry.id_of(slot)),
            Some(freed),
            "invalidate",
        );
    }
}

/// Drive the state machine until `slot` is resident. Blocks; the state
/// guard travels through so the caller can roll back on failure.
fn ensure_resident<'a>(
    shared: &'a Shared,
    mut st: MutexGuard<'a, ManagerState>,
    slot: u32,
    id: HandleId,
    blocked: &mut bool,
) -> (MutexGuard<'a, ManagerState>, Result<()>) {
    loop {
        drain_completions(shared, &mut st);
        pump_pending(shared, &mut st);
        let entry = st.registry.slot(slot);
        match entry.state() {
            HandleState::Resident | HandleState::PreemptiveResident => {
                return (st, Ok(()));
            }
            HandleState::SwappingOut => {
                rescue(shared, &mut st, slot);
                continue;
            }
            HandleState::SwappingIn => {}
            HandleState::Swapped => {
                if entry.flag(flags::LOAD_FAILED) {
                    st.registry.slot_mut(slot).set_flag(flags::LOAD_FAILED, false);
                    let msg = st
                        .io_errors
                        .remove(&slot)
                        .unwrap_or_else(|| "load failed".into());
                    return (st, Err(Error::TransferFailed(msg)));
                }
                if !entry.flag(flags::PENDING_DEMAND) {
                    if let Err(e) = initiate_miss(shared, &mut st, slot) {
                        return (st, Err(e));
                    }
                    continue;
                }
                // Pending: keep driving evictions for every queued demand up
                // to ours, since promised frees may have been claimed by
                // other reservations in the meantime.
                let byte_len = entry.byte_len;
                let need = pending_prefix_bytes(&st, slot);
                let _ = request_room(shared, &mut st, need);
                pump_pending(shared, &mut st);
                if st.registry.slot(slot).state() != HandleState::Swapped {
                    continue;
                }
                // If nothing in flight can free bytes and nothing is
                // evictable, fail or keep waiting per the overcommit
                // contract.
                let stuck = st.ledger.freeing_soon == 0
                    && shared.engine.in_flight() == 0
                    && !shared.engine.completions_pending()
                    && st.strategy.evictable_bytes() == 0
                    && st.strategy.preemptive().used_bytes == 0
                    && st.ledger.headroom() < byte_len;
                if stuck && !st.overcommit {
                    let err = Error::OutOfMemoryRequest {
                        requested: byte_len,
                        in_use: st.ledger.committed(),
                        ram_limit: st.ram_limit,
                    };
                    return (st, Err(err));
                }
            }
        }
        if !*blocked {
            *blocked = true;
            st.counters.blocked_wait_count += 1;
            shared.emit(EventKind::Blocked, Some(id), None, "residency");
        }
        st = wait_signal(shared, st);
    }
}

/// Apply delivered transfer completions to ledger, registry and scheduler.
fn drain_completions(shared: &Shared, st: &mut ManagerState) -> usize {
    if !shared.engine.completions_pending() {
        return 0;
    }
    let completions = shared.engine.poll_completions();
    let n = completions.len();
    for c in completions {
        apply_completion(shared, st, c);
    }
    if n > 0 {
        pump_pending(shared, st);
        note_budget(st);
        shared.engine.kick();
    }
    n
}

fn apply_completion(shared: &Shared, st: &mut ManagerState, c: Completion) {
    debug_assert!(st.registry.slot_live(c.slot), "completion for a dead slot");
    let id = st.registry.id_of(c.slot);
    match (c.direction, c.outcome) {
        (Direction::SwapOut, Outcome::Done { bytes_moved, .. }) => {
            st.counters.bytes_written += bytes_moved;
            let entry = st.registry.slot_mut(c.slot);
            if entry.flag(flags::RESCUED) {
                entry.set_flag(flags::RESCUED, false);
                st.ledger.complete_swap_out_rescued(c.byte_len);
                let entry = st.registry.slot_mut(c.slot);
                if entry.flag(flags::DIRTIED_IN_FLIGHT) {
                    // The written copy is stale; drop it.
                    entry.set_flag(flags::DIRTIED_IN_FLIGHT, false);
                    let spans = entry.spans.take();
                    if !spans.is_empty() {
                        clean_cache_remove(st, c.slot);
                        st.swap
                            .free_spans(&spans)
                            .expect("stale rescue spans unknown");
                        st.ledger.swap_used = st.swap.allocated_bytes();
                    }
                    shared.emit(
                        EventKind::TransferDone,
                        Some(id),
                        Some(c.byte_len),
                        detail::OUT_RESCUED_STALE,
                    );
                } else {
                    // The block stayed clean: the write produced (or a clean
                    // drop confirmed) a reusable disk copy.
                    entry.set_dirty(false);
                    clean_cache_push(st, c.slot);
                    shared.emit(
                        EventKind::TransferDone,
                        Some(id),
                        Some(c.byte_len),
                        detail::OUT_RESCUED,
                    );
                }
            } else {
                debug_assert_eq!(entry.state(), HandleState::SwappingOut);
                entry.buffer = None;
                entry.set_state(HandleState::Swapped);
                entry.set_dirty(false);
                st.ledger.complete_swap_out(c.byte_len);
                st.counters.swapped_out_cum += c.byte_len;
                shared.emit(
                    EventKind::TransferDone,
                    Some(id),
                    Some(c.byte_len),
                    if bytes_moved == 0 {
                        detail::OUT_CLEAN
                    } else {
                        detail::OUT_WRITE
                    },
                );
            }
        }
        (Direction::SwapOut, Outcome::Failed(_) | Outcome::Cancelled) => {
            let entry = st.registry.slot_mut(c.slot);
            let rescued = entry.flag(flags::RESCUED);
            entry.set_flag(flags::RESCUED, false);
            entry.set_flag(flags::DIRTIED_IN_FLIGHT, false);
            entry.set_dirty(true);
            let spans = entry.spans.take();
            if rescued {
                st.ledger.complete_swap_out_rescued(c.byte_len);
            } else {
                st.ledger.cancel_swap_out(c.byte_len);
                st.registry.slot_mut(c.slot).set_state(HandleState::Resident);
                st.strategy.note_rescued(c.slot);
            }
            if !spans.is_empty() {
                clean_cache_remove(st, c.slot);
                st.swap.free_spans(&spans).expect("failed-write spans unknown");
                st.ledger.swap_used = st.swap.allocated_bytes();
            }
            shared.emit(
                EventKind::TransferDone,
                Some(id),
                Some(c.byte_len),
                detail::OUT_FAILED,
            );
        }
        (Direction::SwapIn, Outcome::Done { buffer, .. }) => {
            let buffer = buffer.expect("swap-in completion without payload");
            st.counters.bytes_read += c.byte_len;
            st.counters.swapped_in_cum += c.byte_len;
            st.ledger.complete_swap_in(c.byte_len);
            let entry = st.registry.slot_mut(c.slot);
            debug_assert_eq!(entry.state(), HandleState::SwappingIn);
            entry.buffer = Some(Arc::new(RwLock::new(buffer)));
            entry.set_state(if c.preemptive {
                HandleState::PreemptiveResident
            } else {
                HandleState::Resident
            });
            entry.set_dirty(false);
            st.strategy.note_swap_in_arrival(c.slot, c.preemptive);
            // The spans stay valid on disk: register the clean copy.
            clean_cache_push(st, c.slot);
            shared.emit(
                EventKind::TransferDone,
                Some(id),
                Some(c.byte_len),
                if c.preemptive {
                    detail::IN_PREFETCH
                } else {
                    detail::IN_DEMAND
                },
            );
        }
        (Direction::SwapIn, outcome @ (Outcome::Failed(_) | Outcome::Cancelled)) => {
            st.ledger.cancel_swap_in(c.byte_len);
            let entry = st.registry.slot_mut(c.slot);
            debug_assert_eq!(entry.state(), HandleState::SwappingIn);
            entry.set_state(HandleState::Swapped);
            st.strategy.note_swap_in_failed(c.slot, c.preemptive);
            if !c.preemptive {
                let msg = match outcome {
                    Outcome::Failed(m) => m,
                    _ => "cancelled".into(),
                };
                let entry = st.registry.slot_mut(c.slot);
                entry.set_flag(flags::LOAD_FAILED, true);
                st.io_errors.insert(c.slot, msg);
            }
            shared.emit(
                EventKind::TransferDone,
                Some(id),
                Some(c.byte_len),
                if c.preemptive {
                    detail::IN_PREFETCH_FAILED
                } else {
                    detail::IN_FAILED
                },
            );
        }
    }
}
