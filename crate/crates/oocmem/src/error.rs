//! Error types shared by all manager subsystems.

use crate::handle::HandleId;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the memory manager and its subsystems.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A single block can never be made resident because it is larger than
    /// the configured RAM limit.
    #[error("block of {requested} bytes exceeds the RAM limit of {ram_limit} bytes")]
    SizeExceedsRamLimit { requested: u64, ram_limit: u64 },

    /// Swap space is exhausted and the configured policy forbids extending it.
    #[error("swap space exhausted: {needed} bytes requested, {free} bytes free")]
    OutOfSwapSpace { needed: u64, free: u64 },

    /// The handle still has living adherence guards.
    #[error("handle {0} is still adhered to")]
    HandleStillAdhered(HandleId),

    /// The handle id does not refer to a live handle.
    #[error("unknown handle {0}")]
    UnknownHandle(HandleId),

    /// The set of currently pulled guards would exceed the RAM limit and
    /// overcommit is disabled, or no room can be made for a pull.
    #[error("pull would exceed the RAM limit ({requested} bytes requested, {in_use} in use, limit {ram_limit})")]
    OutOfMemoryRequest {
        requested: u64,
        in_use: u64,
        ram_limit: u64,
    },

    /// The combined size of a guard group exceeds the RAM limit.
    #[error("guard group of {group_bytes} bytes exceeds the RAM limit of {ram_limit} bytes")]
    GroupExceedsRamLimit { group_bytes: u64, ram_limit: u64 },

    /// A scheduler slot was registered twice.
    #[error("slot {0} is already registered with the scheduler")]
    DuplicateRegistration(u32),

    /// The operation requires a resident block.
    #[error("slot {0} is not resident")]
    NotResident(u32),

    /// The operation requires a swapped-out block.
    #[error("slot {0} is not swapped out")]
    NotSwapped(u32),

    /// Eviction cannot collect enough unpinned bytes.
    #[error("cannot evict {needed} bytes: only {evictable} bytes are unpinned and resident")]
    InsufficientEvictableBytes { needed: u64, evictable: u64 },

    /// A chunk span was freed twice (it overlaps the free list).
    #[error("double free of swap span (file {file_index}, offset {offset}, len {len})")]
    DoubleFree {
        file_index: u32,
        offset: u64,
        len: u64,
    },

    /// A chunk span does not belong to the swap store.
    #[error("unknown swap span (file {file_index}, offset {offset}, len {len})")]
    UnknownSpan {
        file_index: u32,
        offset: u64,
        len: u64,
    },

    /// A swap-in reservation could not be made without breaking the budget.
    #[error("cannot reserve {requested} bytes of RAM for a transfer ({headroom} bytes of headroom)")]
    RamReservationFailed { requested: u64, headroom: u64 },

    /// An asynchronous transfer finished with an error.
    #[error("transfer failed: {0}")]
    TransferFailed(String),

    /// A wait can never be satisfied by the current in-flight transfer set.
    #[error("waiting for {requested} bytes to free is impossible ({pending} bytes pending)")]
    WaitImpossible { requested: u64, pending: u64 },

    /// Too many guards on one handle.
    #[error("adherence count overflow on handle {0}")]
    AdherenceOverflow(HandleId),

    /// Write access requested through a read-only view.
    #[error("view is read-only")]
    ReadOnlyView,

    /// Invalid configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An I/O operation failed.
    #[error("i/o failure ({context}): {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// An [`Error::Io`] with context.
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
