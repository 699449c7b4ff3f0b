//! Out-of-core memory management behind a fixed RAM budget.
//!
//! `oocmem` lets an application work with more data than a configured
//! amount of physical memory by transparently swapping managed blocks to
//! disk-backed swap files. Blocks are created through the manager, pinned
//! with scoped [`AdherenceGuard`]s and accessed through pulled views;
//! everything else — eviction order, speculative prefetching, asynchronous
//! transfers, swap-file allocation — happens behind the scenes.
//!
//! ```no_run
//! use oocmem::{AccessMode, LoadMode, ManagerConfig, MemoryManager};
//!
//! let config = ManagerConfig::new(64 << 20, "/tmp/oocmem-swap");
//! let manager = MemoryManager::new(config).unwrap();
//!
//! // 1 MiB of f64s, zero-initialized.
//! let handle = manager.create_managed(131_072, 8, None).unwrap();
//! {
//!     let guard = manager.adhere(handle, AccessMode::ReadWrite, LoadMode::Immediate).unwrap();
//!     let view = guard.pull().unwrap();
//!     view.write().unwrap()[0] = 42;
//! } // guard dropped: the block may be swapped out under pressure
//! manager.destroy_managed(handle).unwrap();
//! ```
//!
//! The eviction policy is a cyclic strategy: blocks live on one circular
//! list ordered by access recency, victims are taken from the least
//! recently used end, and a demand miss prefetches the blocks predicted to
//! be needed next into a bounded pre-emptive budget (10% of the RAM limit
//! by default) that decays probabilistically when it goes stale. Read-only
//! access keeps a clean on-disk copy alive, so unmodified blocks are
//! evicted again without writing a byte.

pub mod aio;
pub mod config;
pub mod diag;
mod error;
mod guard;
mod handle;
pub mod manager;
pub mod scheduler;
pub mod swapstore;

pub use config::{ManagerConfig, SwapPolicy};
pub use diag::{BudgetSnapshot, EventKind, TraceEvent};
pub use error::{Error, Result};
pub use guard::{AdherenceGuard, DataView, ViewRead, ViewWrite};
pub use handle::{AccessMode, HandleId, HandleInfo, HandleState, LoadMode};
pub use manager::{ManagerBuilder, ManagerStats, MemoryManager};
pub use scheduler::{CyclicScheduler, DummyStrategy, Strategy};
pub use swapstore::ChunkSpan;
