//! Handle identities and the slab registry of managed blocks.
//!
//! Entries are kept deliberately small: per-block metadata is the limiting
//! factor for how much data can be managed, so the registry is a slab indexed
//! by slot (no hash map), single disk spans are stored inline, and the slab
//! grows in bounded increments instead of doubling.

use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::swapstore::ChunkSpan;

/// Shared payload buffer of a resident block.
pub(crate) type Payload = Arc<RwLock<Box<[u8]>>>;

pub(crate) const NO_PARENT: u32 = u32::MAX;

/// Identity of a managed block: a slab slot plus a generation that detects
/// stale ids after the slot is reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HandleId(u64);

impl HandleId {
    pub(crate) fn new(slot: u32, generation: u32) -> Self {
        HandleId(((generation as u64) << 32) | slot as u64)
    }

    pub(crate) fn from_slot(slot: u32) -> Self {
        HandleId::new(slot, 0)
    }

    pub(crate) fn slot(self) -> u32 {
        self.0 as u32
    }

    pub(crate) fn generation(self) -> u32 {
        (self.0 >> 32) as u32
    }

    /// Raw 64-bit form, stable within one manager lifetime.
    pub fn as_u64(self) -> u64 {
        self.0
    }

    pub fn from_u64(raw: u64) -> Self {
        HandleId(raw)
    }
}

impl std::fmt::Display for HandleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "h{}.{}", self.slot(), self.generation())
    }
}

/// Residency state of a managed block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandleState {
    /// Payload in RAM, owned by the application.
    Resident,
    /// Payload in RAM, loaded speculatively and not yet touched.
    PreemptiveResident,
    /// Payload only on disk.
    Swapped,
    /// A read from disk is in flight.
    SwappingIn,
    /// A write to disk is in flight (payload still in RAM).
    SwappingOut,
}

/// Requested access mode of a guard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessMode {
    ReadOnly,
    ReadWrite,
}

/// When the payload of a guard is brought into RAM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    /// Start the swap-in when the guard is created.
    Immediate,
    /// Wait until the first pull.
    Deferred,
}

/// Public snapshot of one handle, for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct HandleInfo {
    pub id: HandleId,
    pub byte_len: u64,
    pub element_count: u64,
    pub element_size: u32,
    pub state: HandleState,
    pub dirty: bool,
    pub adherence_count: u32,
    pub disk_span_count: usize,
    /// A valid on-disk copy exists while the payload is also resident, so a
    /// later eviction needs no write.
    pub has_clean_copy: bool,
    pub parent: Option<HandleId>,
}

/// Inline storage for the common single-span case. The single span is kept
/// flattened so the whole enum fits in 24 bytes.
#[derive(Debug, Clone, Default)]
pub(crate) enum DiskSpans {
    #[default]
    None,
    One {
        offset: u64,
        len: u64,
        file_index: u32,
    },
    Many(Box<[ChunkSpan]>),
}

impl DiskSpans {
    pub(crate) fn from_vec(mut spans: Vec<ChunkSpan>) -> Self {
        match spans.len() {
            0 => DiskSpans::None,
            1 => {
                let s = spans.pop().unwrap();
                DiskSpans::One {
                    offset: s.offset,
                    len: s.len,
                    file_index: s.file_index,
                }
            }
            _ => DiskSpans::Many(spans.into_boxed_slice()),
        }
    }

    pub(crate) fn is_some(&self) -> bool {
        !matches!(self, DiskSpans::None)
    }

    pub(crate) fn count(&self) -> usize {
        match self {
            DiskSpans::None => 0,
            DiskSpans::One { .. } => 1,
            DiskSpans::Many(s) => s.len(),
        }
    }

    pub(crate) fn to_vec(&self) -> Vec<ChunkSpan> {
        match self {
            DiskSpans::None => Vec::new(),
            DiskSpans::One {
                offset,
                len,
                file_index,
            } => vec![ChunkSpan {
                file_index: *file_index,
                offset: *offset,
                len: *len,
            }],
            DiskSpans::Many(s) => s.to_vec(),
        }
    }

    pub(crate) fn total_len(&self) -> u64 {
        match self {
            DiskSpans::None => 0,
            DiskSpans::One { len, .. } => *len,
            DiskSpans::Many(s) => s.iter().map(|sp| sp.len).sum(),
        }
    }

    pub(crate) fn take(&mut self) -> Vec<ChunkSpan> {
        let taken = std::mem::take(self);
        taken.to_vec()
    }

    /// Bytes of heap owned by this value (the inline variants own none).
    pub(crate) fn heap_bytes(&self) -> u64 {
        match self {
            DiskSpans::Many(s) => (s.len() * std::mem::size_of::<ChunkSpan>()) as u64,
            _ => 0,
        }
    }
}

pub(crate) mod flags {
    pub const DIRTY: u8 = 1 << 0;
    /// A swap-out is in flight but the block was re-adhered; completion must
    /// keep the payload resident.
    pub const RESCUED: u8 = 1 << 1;
    /// The payload was modified after a rescued swap-out started; the copy
    /// being written is stale.
    pub const DIRTIED_IN_FLIGHT: u8 = 1 << 2;
    /// A demand swap-in is queued waiting for RAM headroom.
    pub const PENDING_DEMAND: u8 = 1 << 3;
    /// Member of the clean-copy purge queue.
    pub const IN_CLEAN_CACHE: u8 = 1 << 4;
    /// The last demand swap-in failed; the error is in the side table.
    pub const LOAD_FAILED: u8 = 1 << 5;
}

#[derive(Debug, Default)]
pub(crate) struct HandleEntry {
    pub byte_len: u64,
    pub element_size: u32,
    pub generation: u32,
    pub parent: u32,
    pub creation_seq: u32,
    pub adherence: u16,
    pub pulled: u16,
    state: u8,
    pub flags: u8,
    pub buffer: Option<Payload>,
    pub spans: DiskSpans,
}

const STATE_VACANT: u8 = 0;

impl HandleEntry {
    pub fn state(&self) -> HandleState {
        match self.state {
            1 => HandleState::Resident,
            2 => HandleState::PreemptiveResident,
            3 => HandleState::Swapped,
            4 => HandleState::SwappingIn,
            5 => HandleState::SwappingOut,
            other => unreachable!("vacant or corrupt state {other}"),
        }
    }

    pub fn set_state(&mut self, state: HandleState) {
        self.state = match state {
            HandleState::Resident => 1,
            HandleState::PreemptiveResident => 2,
            HandleState::Swapped => 3,
            HandleState::SwappingIn => 4,
            HandleState::SwappingOut => 5,
        };
    }

    pub fn is_vacant(&self) -> bool {
        self.state == STATE_VACANT
    }

    pub fn dirty(&self) -> bool {
        self.flags & flags::DIRTY != 0
    }

    pub fn set_dirty(&mut self, dirty: bool) {
        if dirty {
            self.flags |= flags::DIRTY;
        } else {
            self.flags &= !flags::DIRTY;
        }
    }

    pub fn flag(&self, bit: u8) -> bool {
        self.flags & bit != 0
    }

    pub fn set_flag(&mut self, bit: u8, on: bool) {
        if on {
            self.flags |= bit;
        } else {
            self.flags &= !bit;
        }
    }

    pub fn element_count(&self) -> u64 {
        if self.element_size == 0 {
            0
        } else {
            self.byte_len / self.element_size as u64
        }
    }

    pub fn is_resident(&self) -> bool {
        matches!(
            self.state(),
            HandleState::Resident | HandleState::PreemptiveResident
        )
    }
}

/// Slab of handle entries with slot reuse and generation tags.
#[derive(Debug, Default)]
pub(crate) struct Registry {
    entries: Vec<HandleEntry>,
    free_slots: Vec<u32>,
    next_seq: u32,
    live: usize,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    pub fn live(&self) -> usize {
        self.live
    }

    pub fn insert(
        &mut self,
        byte_len: u64,
        element_size: u32,
        parent: u32,
        state: HandleState,
        buffer: Option<Payload>,
    ) -> HandleId {
        let seq = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        let slot = match self.free_slots.pop() {
            Some(slot) => slot,
            None => {
                if self.entries.len() == self.entries.capacity() {
                    // Bounded growth: metadata slack stays small relative to
                    // the managed payload.
                    let grow = (self.entries.len() / 8).max(64);
                    self.entries.reserve_exact(grow);
                }
                self.entries.push(HandleEntry::default());
                (self.entries.len() - 1) as u32
            }
        };
        let generation = self.entries[slot as usize].generation;
        let entry = &mut self.entries[slot as usize];
        entry.byte_len = byte_len;
        entry.element_size = element_size;
        entry.parent = parent;
        entry.creation_seq = seq;
        entry.adherence = 0;
        entry.pulled = 0;
        entry.flags = 0;
        entry.buffer = buffer;
        entry.spans = DiskSpans::None;
        entry.set_state(state);
        self.live += 1;
        HandleId::new(slot, generation)
    }

    pub fn get(&self, id: HandleId) -> Result<&HandleEntry> {
        let entry = self
            .entries
            .get(id.slot() as usize)
            .ok_or(Error::UnknownHandle(id))?;
        if entry.is_vacant() || entry.generation != id.generation() {
            return Err(Error::UnknownHandle(id));
        }
        Ok(entry)
    }

    pub fn get_mut(&mut self, id: HandleId) -> Result<&mut HandleEntry> {
        let entry = self
            .entries
            .get_mut(id.slot() as usize)
            .ok_or(Error::UnknownHandle(id))?;
        if entry.is_vacant() || entry.generation != id.generation() {
            return Err(Error::UnknownHandle(id));
        }
        Ok(entry)
    }

    /// Access by slot, for completion handling where the slot is known live.
    pub fn slot(&self, slot: u32) -> &HandleEntry {
        &self.entries[slot as usize]
    }

    pub fn slot_mut(&mut self, slot: u32) -> &mut HandleEntry {
        &mut self.entries[slot as usize]
    }

    pub fn slot_live(&self, slot: u32) -> bool {
        (slot as usize) < self.entries.len() && !self.entries[slot as usize].is_vacant()
    }

    pub fn id_of(&self, slot: u32) -> HandleId {
        HandleId::new(slot, self.entries[slot as usize].generation)
    }

    pub fn remove(&mut self, slot: u32) {
        let entry = &mut self.entries[slot as usize];
        debug_assert!(!entry.is_vacant());
        entry.state = STATE_VACANT;
        entry.buffer = None;
        entry.spans = DiskSpans::None;
        entry.generation = entry.generation.wrapping_add(1);
        self.free_slots.push(slot);
        self.live -= 1;
    }

    /// Live slots whose parent is `slot`, newest creation first.
    pub fn children_of(&self, slot: u32) -> Vec<u32> {
        let mut kids: Vec<u32> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.is_vacant() && e.parent == slot)
            .map(|(i, _)| i as u32)
            .collect();
        kids.sort_by_key(|&s| std::cmp::Reverse(self.entries[s as usize].creation_seq));
        kids
    }

    /// In-memory footprint of the slab and span side storage.
    pub fn metadata_bytes(&self) -> u64 {
        let slab = (self.entries.capacity() * std::mem::size_of::<HandleEntry>()) as u64;
        let spans: u64 = self.entries.iter().map(|e| e.spans.heap_bytes()).sum();
        let free = (self.free_slots.capacity() * std::mem::size_of::<u32>()) as u64;
        slab + spans + free
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entry_stays_compact() {
        // The registry entry and the inline span storage are the dominant
        // per-block costs; keep them within one cache line.
        assert!(std::mem::size_of::<HandleEntry>() <= 64);
        assert!(std::mem::size_of::<DiskSpans>() <= 32);
    }

    #[test]
    fn stale_ids_are_rejected_after_slot_reuse() {
        let mut r = Registry::new();
        let a = r.insert(10, 1, NO_PARENT, HandleState::Resident, None);
        r.remove(a.slot());
        let b = r.insert(20, 1, NO_PARENT, HandleState::Resident, None);
        assert_eq!(a.slot(), b.slot());
        assert!(r.get(a).is_err());
        assert_eq!(r.get(b).unwrap().byte_len, 20);
    }

    #[test]
    fn children_sorted_by_reverse_creation() {
        let mut r = Registry::new();
        let p = r.insert(1, 1, NO_PARENT, HandleState::Resident, None);
        let c1 = r.insert(1, 1, p.slot(), HandleState::Resident, None);
        let c2 = r.insert(1, 1, p.slot(), HandleState::Resident, None);
        let c3 = r.insert(1, 1, p.slot(), HandleState::Resident, None);
        assert_eq!(
            r.children_of(p.slot()),
            vec![c3.slot(), c2.slot(), c1.slot()]
        );
    }

    #[test]
    fn disk_spans_roundtrip() {
        let one = DiskSpans::from_vec(vec![ChunkSpan {
            file_index: 0,
            offset: 4,
            len: 10,
        }]);
        assert_eq!(one.count(), 1);
        assert_eq!(one.to_vec()[0].offset, 4);
        assert_eq!(one.total_len(), 10);
        let many = DiskSpans::from_vec(vec![
            ChunkSpan {
                file_index: 0,
                offset: 0,
                len: 1,
            },
            ChunkSpan {
                file_index: 1,
                offset: 0,
                len: 2,
            },
        ]);
        assert_eq!(many.count(), 2);
        assert_eq!(many.total_len(), 3);
        let mut m = many;
        assert_eq!(m.take().len(), 2);
        assert!(!m.is_some());
    }
}
