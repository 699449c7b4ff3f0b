//! Cyclic eviction and prefetch strategy.
//!
//! All registered blocks live on one circular doubly linked list. Walking
//! forward from the `active` cursor (the most recently accessed block) the
//! list is ordered by decreasing recency: first the resident run, ending at
//! the `counteractive` cursor (the least recently accessed block that is
//! still resident), then the swapped run, then the pre-emptive run of
//! speculatively loaded blocks, which closes the circle just in front of
//! `active` because those blocks are predicted to be accessed next.
//!
//! Touching the block directly in front of `active` therefore only rotates
//! the cursor; a repeated in-order scan performs no relinks at all after its
//! first pass. Eviction victims are collected from `counteractive` walking
//! backwards, which yields least-recently-used order without any sorting,
//! and a demand miss prefetches the swapped blocks in front of the missed
//! one until the pre-emptive byte budget is filled.
//!
//! The pre-emptive budget decays probabilistically: with `P` the chance of
//! hitting a pre-emptive block at random and `N` the number of pre-emptive
//! hits since the last demand miss, a run of hits with `P^N` below the
//! significance level is taken as evidence of sequential access, and twice
//! the free budget (at least one byte) of stale pre-emptive blocks is
//! dropped to make room for fresh prefetches.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Sentinel slot index meaning "no node".
pub const NIL: u32 = u32::MAX;

/// Placement of a node on the cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    /// Not registered.
    Vacant,
    /// Resident and owned by the application (allocated).
    Active,
    /// On disk, or moving between disk and RAM.
    Swapped,
    /// Resident, loaded speculatively, not yet touched by the application.
    Preemptive,
}

/// Pre-emptive budget bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreemptiveState {
    /// Byte allowance for speculatively loaded blocks.
    pub budget_bytes: u64,
    /// Bytes currently attributed to the pre-emptive zone (including planned
    /// prefetches still in flight).
    pub used_bytes: u64,
    /// Pre-emptive blocks touched since the last demand miss.
    pub hits_since_miss: u64,
    /// Bytes currently swapped out (mirror for diagnostics).
    pub swap_used_bytes: u64,
}

/// Result of planning a swap-in: the missed block plus prefetch candidates
/// in anticipated access order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapInPlan {
    pub demand: u32,
    pub prefetch: Vec<u32>,
}

/// What a touch did to the cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Touch {
    /// The node had to be unlinked and relinked (not a pure cursor rotation).
    pub relinked: bool,
    /// The node was pre-emptive and has been consumed into the active zone.
    pub preemptive_hit: bool,
}

/// The decay rule: with `P = budget/ram_limit` bounding the probability of a
/// random pre-emptive hit and `N` hits observed since the last miss, decay
/// fires when `P^N` drops strictly below the significance level and removes
/// twice the free budget, but at least one byte.
pub fn decay_bytes(
    budget_bytes: u64,
    used_bytes: u64,
    hits_since_miss: u64,
    ram_limit_bytes: u64,
    significance_level: f64,
) -> u64 {
    if ram_limit_bytes == 0 {
        return 0;
    }
    let p = budget_bytes as f64 / ram_limit_bytes as f64;
    let n = hits_since_miss.min(i32::MAX as u64) as i32;
    if p.powi(n) < significance_level {
        (2 * budget_bytes.saturating_sub(used_bytes)).max(1)
    } else {
        0
    }
}

/// Strategy interface of the scheduler, so alternate policies can be swapped
/// in behind the manager.
pub trait Strategy: Send {
    fn register(&mut self, slot: u32, len: u64) -> Result<()>;
    fn unregister(&mut self, slot: u32) -> Result<()>;
    fn touch(&mut self, slot: u32) -> Result<Touch>;
    fn set_pinned(&mut self, slot: u32, pinned: bool);
    /// Collect unpinned resident victims, least recently used first, whose
    /// sizes sum to at least `bytes`.
    fn make_room(&mut self, bytes: u64) -> Result<Vec<u32>>;
    /// Plan a demand swap-in plus prefetch. Resets the hit counter.
    fn plan_swap_in(&mut self, slot: u32) -> Result<SwapInPlan>;
    /// Bytes of stale pre-emptive blocks to drop right now, if any.
    fn evaluate_decay(&self) -> u64;
    /// Remove up to `bytes` of pre-emptive blocks, oldest prefetched first.
    fn take_decay_victims(&mut self, bytes: u64) -> Vec<u32>;
    /// Roll back a planned prefetch that could not be submitted.
    fn cancel_prefetch(&mut self, slot: u32);
    fn note_swap_in_arrival(&mut self, slot: u32, preemptive: bool);
    fn note_swap_in_failed(&mut self, slot: u32, preemptive: bool);
    /// A swap-out victim was re-adhered (or its write failed) while still in
    /// RAM; put it back into the active zone.
    fn note_rescued(&mut self, slot: u32);
    /// Total unpinned bytes in the active zone.
    fn evictable_bytes(&self) -> u64;
    fn preemptive(&self) -> PreemptiveState;
    fn registered(&self) -> usize;
    /// Approximate in-memory footprint of the strategy's bookkeeping.
    fn metadata_bytes(&self) -> u64 {
        0
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    prev: u32,
    next: u32,
    len: u64,
    zone: Zone,
    pinned: bool,
    /// A swap-in for this node has been planned and not yet completed.
    inflight_in: bool,
    /// The in-flight swap-in is a prefetch (counted against the budget).
    inflight_pre: bool,
}

const VACANT_NODE: Node = Node {
    prev: NIL,
    next: NIL,
    len: 0,
    zone: Zone::Vacant,
    pinned: false,
    inflight_in: false,
    inflight_pre: false,
};

/// The cyclic strategy.
pub struct CyclicScheduler {
    nodes: Vec<Node>,
    active: u32,
    counteractive: u32,
    registered: usize,
    evictable: u64,
    budget_bytes: u64,
    used_bytes: u64,
    hits_since_miss: u64,
    swap_used_bytes: u64,
    ram_limit_bytes: u64,
    significance_level: f64,
    /// Prefetches in issue order, for oldest-first decay. Entries whose node
    /// has left the pre-emptive zone are skipped lazily.
    preempt_queue: VecDeque<u32>,
    relinks: u64,
}

impl CyclicScheduler {
    pub fn new(
        ram_limit_bytes: u64,
        preemptive_budget_bytes: u64,
        significance_level: f64,
    ) -> Self {
        CyclicScheduler {
            nodes: Vec::new(),
            active: NIL,
            counteractive: NIL,
            registered: 0,
            evictable: 0,
            budget_bytes: preemptive_budget_bytes,
            used_bytes: 0,
            hits_since_miss: 0,
            swap_used_bytes: 0,
            ram_limit_bytes,
            significance_level,
            preempt_queue: VecDeque::new(),
            relinks: 0,
        }
    }

    /// Cumulative count of unlink/relink operations, for access-pattern
    /// diagnostics. Pure cursor rotations do not count.
    pub fn relink_count(&self) -> u64 {
        self.relinks
    }

    pub fn active_cursor(&self) -> Option<u32> {
        (self.active != NIL).then_some(self.active)
    }

    pub fn counteractive_cursor(&self) -> Option<u32> {
        (self.counteractive != NIL).then_some(self.counteractive)
    }

    pub fn zone(&self, slot: u32) -> Zone {
        self.nodes
            .get(slot as usize)
            .map(|n| n.zone)
            .unwrap_or(Zone::Vacant)
    }

    fn node(&self, slot: u32) -> &Node {
        &self.nodes[slot as usize]
    }

    fn node_mut(&mut self, slot: u32) -> &mut Node {
        &mut self.nodes[slot as usize]
    }

    fn ensure_capacity(&mut self, slot: u32) {
        let needed = slot as usize + 1;
        if self.nodes.len() < needed {
            if self.nodes.capacity() < needed {
                // Grow in bounded increments to keep slack small; the node
                // table dominates per-block scheduling metadata.
                let grow = (self.nodes.len() / 8).max(64);
                self.nodes.reserve_exact(needed + grow - self.nodes.len());
            }
            self.nodes.resize(needed, VACANT_NODE);
        }
    }

    /// Unlink `slot` from the ring. The caller must fix cursors first.
    fn unlink(&mut self, slot: u32) {
        let Node { prev, next, .. } = *self.node(slot);
        self.node_mut(prev).next = next;
        self.node_mut(next).prev = prev;
        let n = self.node_mut(slot);
        n.prev = NIL;
        n.next = NIL;
    }

    /// Link `slot` immediately in front of `anchor` (as its predecessor in
    /// forward order).
    fn link_before(&mut self, slot: u32, anchor: u32) {
        let prev = self.node(anchor).prev;
        self.node_mut(prev).next = slot;
        self.node_mut(anchor).prev = slot;
        let n = self.node_mut(slot);
        n.prev = prev;
        n.next = anchor;
    }

    /// Unlink and relink `slot` in front of `anchor` unless it already is
    /// there. Returns true when a relink happened.
    fn move_before(&mut self, slot: u32, anchor: u32) -> bool {
        if slot == anchor || self.node(anchor).prev == slot {
            return false;
        }
        if self.counteractive == slot {
            let p = self.node(slot).prev;
            self.repair_counteractive(p);
        }
        self.unlink(slot);
        self.link_before(slot, anchor);
        self.relinks += 1;
        true
    }

    /// Walk backwards from `start` to the nearest active-zone node and point
    /// `counteractive` at it; fall back to `active`.
    fn repair_counteractive(&mut self, start: u32) {
        if self.active == NIL {
            self.counteractive = NIL;
            return;
        }
        let mut cur = start;
        for _ in 0..self.registered {
            if cur == NIL {
                break;
            }
            if self.node(cur).zone == Zone::Active {
                self.counteractive = cur;
                return;
            }
            if cur == self.active {
                break;
            }
            cur = self.node(cur).prev;
        }
        self.counteractive = self.active;
    }

    fn settle_counteractive(&mut self) {
        if self.counteractive != NIL && self.node(self.counteractive).zone != Zone::Active {
            self.counteractive = self.active;
        }
    }

    /// Ring integrity and byte accounting. Holds after every operation.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        if self.registered == 0 {
            if self.active != NIL || self.counteractive != NIL {
                return Err("cursors set on empty cycle".into());
            }
            return Ok(());
        }
        if self.active == NIL || self.counteractive == NIL {
            return Err("cursors unset on non-empty cycle".into());
        }
        let mut seen = 0usize;
        let mut cur = self.active;
        let mut evictable = 0u64;
        let mut used = 0u64;
        let mut swap_used = 0u64;
        loop {
            let n = self.node(cur);
            if n.zone == Zone::Vacant {
                return Err(format!("vacant node {cur} linked into the cycle"));
            }
            if self.node(n.next).prev != cur || self.node(n.prev).next != cur {
                return Err(format!("links around {cur} are not mutual"));
            }
            match n.zone {
                Zone::Active => {
                    if !n.pinned {
                        evictable += n.len;
                    }
                }
                Zone::Preemptive => used += n.len,
                Zone::Swapped => {
                    if n.inflight_in && n.inflight_pre {
                        used += n.len;
                    } else {
                        swap_used += n.len;
                    }
                }
                Zone::Vacant => unreachable!(),
            }
            seen += 1;
            if seen > self.registered {
                return Err("cycle longer than the registration count".into());
            }
            cur = n.next;
            if cur == self.active {
                break;
            }
        }
        if seen != self.registered {
            return Err(format!(
                "cycle visits {seen} nodes, {} registered",
                self.registered
            ));
        }
        if evictable != self.evictable {
            return Err(format!(
                "evictable bytes drifted: cycle {evictable}, cached {}",
                self.evictable
            ));
        }
        if used != self.used_bytes {
            return Err(format!(
                "preemptive bytes drifted: cycle {used}, cached {}",
                self.used_bytes
            ));
        }
        if swap_used != self.swap_used_bytes {
            return Err(format!(
                "swap bytes drifted: cycle {swap_used}, cached {}",
                self.swap_used_bytes
            ));
        }
        Ok(())
    }

    /// Strict zone layout: each zone occupies at most one contiguous arc of
    /// the circle, ordered active -> swapped -> pre-emptive in forward
    /// direction. In-flight nodes count towards their destination zone, so
    /// this holds for pin-free, decay-free traces; eviction skipping pinned
    /// nodes in place and decay both leave documented stragglers behind and
    /// are excluded by tests that assert strict layout.
    pub fn check_zone_arcs(&self) -> std::result::Result<(), String> {
        if self.registered == 0 {
            return Ok(());
        }
        let classify = |n: &Node| -> Zone {
            if n.inflight_in {
                if n.inflight_pre {
                    Zone::Preemptive
                } else {
                    Zone::Active
                }
            } else {
                n.zone
            }
        };
        // Collapse the circle into maximal runs.
        let mut runs: Vec<Zone> = Vec::new();
        let mut cur = self.active;
        loop {
            let z = classify(self.node(cur));
            if runs.last() != Some(&z) {
                runs.push(z);
            }
            cur = self.node(cur).next;
            if cur == self.active {
                break;
            }
        }
        // Merge the wrap-around run.
        if runs.len() > 1 && runs.first() == runs.last() {
            runs.pop();
        }
        for zone in [Zone::Active, Zone::Swapped, Zone::Preemptive] {
            let count = runs.iter().filter(|z| **z == zone).count();
            if count > 1 {
                return Err(format!("{zone:?} split into {count} arcs: {runs:?}"));
            }
        }
        // Forward orientation: active arc, then swapped, then pre-emptive.
        if runs.len() == 3 && runs[0] == Zone::Active && runs[1] != Zone::Swapped {
            return Err(format!("zone arcs out of order: {runs:?}"));
        }
        Ok(())
    }
}

impl Strategy for CyclicScheduler {
    fn register(&mut self, slot: u32, len: u64) -> Result<()> {
        self.ensure_capacity(slot);
        if self.node(slot).zone != Zone::Vacant {
            return Err(Error::DuplicateRegistration(slot));
        }
        *self.node_mut(slot) = Node {
            prev: slot,
            next: slot,
            len,
            zone: Zone::Active,
            pinned: false,
            inflight_in: false,
            inflight_pre: false,
        };
        if self.active == NIL {
            self.active = slot;
            self.counteractive = slot;
        } else {
            // Newly created data is the most recent: it takes the active
            // position, in front of the former active element.
            self.link_before(slot, self.active);
            self.active = slot;
        }
        self.registered += 1;
        self.evictable += len;
        self.settle_counteractive();
        Ok(())
    }

    fn unregister(&mut self, slot: u32) -> Result<()> {
        if slot as usize >= self.nodes.len() || self.node(slot).zone == Zone::Vacant {
            return Err(Error::UnknownHandle(crate::handle::HandleId::from_slot(
                slot,
            )));
        }
        let n = *self.node(slot);
        debug_assert!(!n.pinned, "unregistering a pinned node");
        match n.zone {
            Zone::Active => {
                if !n.pinned {
                    self.evictable -= n.len;
                }
            }
            Zone::Preemptive => self.used_bytes -= n.len,
            Zone::Swapped => {
                if n.inflight_in && n.inflight_pre {
                    self.used_bytes -= n.len;
                } else {
                    self.swap_used_bytes -= n.len;
                }
            }
            Zone::Vacant => {}
        }
        if self.registered == 1 {
            self.active = NIL;
            self.counteractive = NIL;
        } else {
            if self.active == slot {
                // The next most recent element takes over.
                self.active = n.next;
            }
            if self.counteractive == slot {
                self.repair_counteractive(n.prev);
            }
        }
        self.unlink(slot);
        *self.node_mut(slot) = VACANT_NODE;
        self.registered -= 1;
        Ok(())
    }

    fn touch(&mut self, slot: u32) -> Result<Touch> {
        if slot as usize >= self.nodes.len() {
            return Err(Error::NotResident(slot));
        }
        let n = *self.node(slot);
        let mut outcome = Touch {
            relinked: false,
            preemptive_hit: false,
        };
        match n.zone {
            Zone::Active => {}
            Zone::Preemptive => {
                // Consumed into the active zone; its size leaves the budget.
                self.used_bytes -= n.len;
                self.hits_since_miss += 1;
                self.node_mut(slot).zone = Zone::Active;
                if !n.pinned {
                    self.evictable += n.len;
                }
                outcome.preemptive_hit = true;
            }
            _ => return Err(Error::NotResident(slot)),
        }
        if slot == self.active {
            // Already the most recent element.
        } else if slot == self.node(self.active).prev {
            // The anticipated next element: rotate the cursor, no relink.
            if self.counteractive == slot {
                // The least recent resident became the most recent one.
                let p = self.node(slot).prev;
                self.repair_counteractive(p);
            }
            self.active = slot;
        } else {
            outcome.relinked = self.move_before(slot, self.active);
            self.active = slot;
        }
        self.settle_counteractive();
        Ok(outcome)
    }

    fn set_pinned(&mut self, slot: u32, pinned: bool) {
        if slot as usize >= self.nodes.len() {
            return;
        }
        let n = *self.node(slot);
        if n.zone == Zone::Vacant || n.pinned == pinned {
            return;
        }
        if n.zone == Zone::Active {
            if pinned {
                self.evictable -= n.len;
            } else {
                self.evictable += n.len;
            }
        }
        self.node_mut(slot).pinned = pinned;
    }

    fn make_room(&mut self, bytes: u64) -> Result<Vec<u32>> {
        if bytes == 0 {
            return Ok(Vec::new());
        }
        if bytes > self.evictable {
            return Err(Error::InsufficientEvictableBytes {
                needed: bytes,
                evictable: self.evictable,
            });
        }
        // Sweep backwards from the end of the circle. In the standard layout
        // this reaches `counteractive` after skipping the non-resident runs,
        // exactly the cursor walk; it additionally ranks formerly pinned
        // nodes left embedded in the swapped run oldest-first, keeping the
        // victim order least-recently-used even across pin churn.
        let mut victims = Vec::new();
        let mut collected = 0u64;
        let mut cur = self.node(self.active).prev;
        for _ in 0..self.registered {
            let n = *self.node(cur);
            let next_back = n.prev;
            if n.zone == Zone::Active && !n.pinned {
                self.node_mut(cur).zone = Zone::Swapped;
                self.evictable -= n.len;
                self.swap_used_bytes += n.len;
                collected += n.len;
                victims.push(cur);
            }
            if collected >= bytes {
                break;
            }
            cur = next_back;
        }
        debug_assert!(collected >= bytes);
        // Move the cursor past the victims to the newest remaining resident.
        let start = self.node(*victims.last().unwrap()).prev;
        self.repair_counteractive(start);
        Ok(victims)
    }

    fn plan_swap_in(&mut self, slot: u32) -> Result<SwapInPlan> {
        if slot as usize >= self.nodes.len()
            || self.node(slot).zone != Zone::Swapped
            || self.node(slot).inflight_in
        {
            return Err(Error::NotSwapped(slot));
        }
        self.hits_since_miss = 0;
        // Gather prefetch candidates: the swapped neighbours in anticipated
        // access order, while the budget lasts.
        let mut prefetch = Vec::new();
        let mut planned = 0u64;
        let mut cand = self.node(slot).prev;
        while cand != slot && cand != NIL {
            let n = *self.node(cand);
            if n.zone != Zone::Swapped || n.inflight_in {
                break;
            }
            if self.used_bytes + planned + n.len > self.budget_bytes {
                break;
            }
            planned += n.len;
            prefetch.push(cand);
            cand = n.prev;
        }
        // Relink into final positions now so that arrivals land in
        // anticipated touch order: ..., p2, p1, demand, active. For an
        // in-order scan everything is already in place and nothing moves.
        if self.active != NIL && slot != self.active {
            self.move_before(slot, self.active);
        }
        self.node_mut(slot).inflight_in = true;
        let mut anchor = slot;
        for &p in &prefetch {
            self.move_before(p, anchor);
            let n = self.node_mut(p);
            n.inflight_in = true;
            n.inflight_pre = true;
            let len = n.len;
            self.swap_used_bytes -= len;
            self.used_bytes += len;
            self.preempt_queue.push_back(p);
            anchor = p;
        }
        self.settle_counteractive();
        Ok(SwapInPlan {
            demand: slot,
            prefetch,
        })
    }

    fn evaluate_decay(&self) -> u64 {
        decay_bytes(
            self.budget_bytes,
            self.used_bytes,
            self.hits_since_miss,
            self.ram_limit_bytes,
            self.significance_level,
        )
    }

    fn take_decay_victims(&mut self, bytes: u64) -> Vec<u32> {
        let mut victims = Vec::new();
        let mut freed = 0u64;
        let mut scanned = 0;
        let max = self.preempt_queue.len();
        while freed < bytes && scanned < max {
            let Some(slot) = self.preempt_queue.pop_front() else {
                break;
            };
            scanned += 1;
            let n = *self.node(slot);
            if n.zone == Zone::Swapped && n.inflight_in && n.inflight_pre {
                // Still in flight; cannot decay yet, keep for later.
                self.preempt_queue.push_back(slot);
                continue;
            }
            if n.zone != Zone::Preemptive {
                continue; // stale entry: consumed by a touch or unregistered
            }
            self.node_mut(slot).zone = Zone::Swapped;
            self.used_bytes -= n.len;
            self.swap_used_bytes += n.len;
            freed += n.len;
            victims.push(slot);
        }
        self.settle_counteractive();
        victims
    }

    fn cancel_prefetch(&mut self, slot: u32) {
        let n = self.node_mut(slot);
        if n.inflight_in && n.inflight_pre && n.zone == Zone::Swapped {
            n.inflight_in = false;
            n.inflight_pre = false;
            let len = n.len;
            self.used_bytes -= len;
            self.swap_used_bytes += len;
        }
    }

    fn note_swap_in_arrival(&mut self, slot: u32, preemptive: bool) {
        let n = self.node_mut(slot);
        debug_assert_eq!(n.zone, Zone::Swapped);
        debug_assert_eq!(n.inflight_pre, preemptive);
        n.inflight_in = false;
        n.inflight_pre = false;
        if preemptive {
            n.zone = Zone::Preemptive;
            // Budget already accounted at planning time.
        } else {
            n.zone = Zone::Active;
            let len = n.len;
            let pinned = n.pinned;
            self.swap_used_bytes -= len;
            if !pinned {
                self.evictable += len;
            }
        }
        self.settle_counteractive();
    }

    fn note_swap_in_failed(&mut self, slot: u32, preemptive: bool) {
        let n = self.node_mut(slot);
        n.inflight_in = false;
        n.inflight_pre = false;
        if preemptive {
            let len = n.len;
            self.used_bytes -= len;
            self.swap_used_bytes += len;
        }
    }

    fn note_rescued(&mut self, slot: u32) {
        let n = *self.node(slot);
        debug_assert_eq!(n.zone, Zone::Swapped);
        self.node_mut(slot).zone = Zone::Active;
        self.swap_used_bytes -= n.len;
        if !n.pinned {
            self.evictable += n.len;
        }
        if slot != self.active {
            self.move_before(slot, self.active);
        }
        self.settle_counteractive();
    }

    fn evictable_bytes(&self) -> u64 {
        self.evictable
    }

    fn preemptive(&self) -> PreemptiveState {
        PreemptiveState {
            budget_bytes: self.budget_bytes,
            used_bytes: self.used_bytes,
            hits_since_miss: self.hits_since_miss,
            swap_used_bytes: self.swap_used_bytes,
        }
    }

    fn registered(&self) -> usize {
        self.registered
    }

    fn metadata_bytes(&self) -> u64 {
        (self.nodes.capacity() * std::mem::size_of::<Node>()) as u64
            + (self.preempt_queue.capacity() * std::mem::size_of::<u32>()) as u64
    }
}

/// A trivial strategy for tests: eviction in registration order, no
/// prefetching, no decay.
pub struct DummyStrategy {
    order: Vec<u32>,
    lens: Vec<u64>,
    resident: Vec<bool>,
    pinned: Vec<bool>,
}

impl DummyStrategy {
    pub fn new() -> Self {
        DummyStrategy {
            order: Vec::new(),
            lens: Vec::new(),
            resident: Vec::new(),
            pinned: Vec::new(),
        }
    }

    fn registered_slot(&self, slot: u32) -> bool {
        (slot as usize) < self.lens.len() && self.order.contains(&slot)
    }
}

impl Default for DummyStrategy {
    fn default() -> Self {
        Self::new()
    }
}

impl Strategy for DummyStrategy {
    fn register(&mut self, slot: u32, len: u64) -> Result<()> {
        if self.registered_slot(slot) {
            return Err(Error::DuplicateRegistration(slot));
        }
        let needed = slot as usize + 1;
        if self.lens.len() < needed {
            self.lens.resize(needed, 0);
            self.resident.resize(needed, false);
            self.pinned.resize(needed, false);
        }
        self.lens[slot as usize] = len;
        self.resident[slot as usize] = true;
        self.pinned[slot as usize] = false;
        self.order.push(slot);
        Ok(())
    }

    fn unregister(&mut self, slot: u32) -> Result<()> {
        if !self.registered_slot(slot) {
            return Err(Error::UnknownHandle(crate::handle::HandleId::from_slot(
                slot,
            )));
        }
        self.order.retain(|&s| s != slot);
        self.resident[slot as usize] = false;
        Ok(())
    }

    fn touch(&mut self, slot: u32) -> Result<Touch> {
        if !self.registered_slot(slot) || !self.resident[slot as usize] {
            return Err(Error::NotResident(slot));
        }
        Ok(Touch {
            relinked: false,
            preemptive_hit: false,
        })
    }

    fn set_pinned(&mut self, slot: u32, pinned: bool) {
        if (slot as usize) < self.pinned.len() {
            self.pinned[slot as usize] = pinned;
        }
    }

    fn make_room(&mut self, bytes: u64) -> Result<Vec<u32>> {
        let evictable = self.evictable_bytes();
        if bytes > evictable {
            return Err(Error::InsufficientEvictableBytes {
                needed: bytes,
                evictable,
            });
        }
        let mut victims = Vec::new();
        let mut collected = 0;
        for &slot in &self.order {
            if collected >= bytes {
                break;
            }
            let i = slot as usize;
            if self.resident[i] && !self.pinned[i] {
                victims.push(slot);
                collected += self.lens[i];
            }
        }
        for &v in &victims {
            self.resident[v as usize] = false;
        }
        Ok(victims)
    }

    fn plan_swap_in(&mut self, slot: u32) -> Result<SwapInPlan> {
        if !self.registered_slot(slot) || self.resident[slot as usize] {
            return Err(Error::NotSwapped(slot));
        }
        Ok(SwapInPlan {
            demand: slot,
            prefetch: Vec::new(),
        })
    }

    fn evaluate_decay(&self) -> u64 {
        0
    }

    fn take_decay_victims(&mut self, _bytes: u64) -> Vec<u32> {
        Vec::new()
    }

    fn cancel_prefetch(&mut self, _slot: u32) {}

    fn note_swap_in_arrival(&mut self, slot: u32, _preemptive: bool) {
        self.resident[slot as usize] = true;
    }

    fn note_swap_in_failed(&mut self, _slot: u32, _preemptive: bool) {}

    fn note_rescued(&mut self, slot: u32) {
        self.resident[slot as usize] = true;
    }

    fn evictable_bytes(&self) -> u64 {
        self.order
            .iter()
            .filter(|&&s| self.resident[s as usize] && !self.pinned[s as usize])
            .map(|&s| self.lens[s as usize])
            .sum()
    }

    fn preemptive(&self) -> PreemptiveState {
        PreemptiveState {
            budget_bytes: 0,
            used_bytes: 0,
            hits_since_miss: 0,
            swap_used_bytes: 0,
        }
    }

    fn registered(&self) -> usize {
        self.order.len()
    }
}
