//! Scoped adherence guards and the data views pulled from them.
//!
//! A guard pins a handle: while any guard on a handle exists the payload is
//! never evicted once pulled. Views borrow the guard, so the type system
//! rules out reading a buffer whose pin has been released.

use std::marker::PhantomData;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLockReadGuard, RwLockWriteGuard};

use crate::error::{Error, Result};
use crate::handle::{AccessMode, HandleId, LoadMode, Payload};
use crate::manager::Shared;

/// A scoped pin on a managed block. Dropping (or [`release`]ing) the guard
/// makes the block evictable again once no other guards remain.
///
/// [`release`]: AdherenceGuard::release
pub struct AdherenceGuard {
    pub(crate) shared: Arc<Shared>,
    pub(crate) id: HandleId,
    pub(crate) mode: AccessMode,
    pub(crate) loading: LoadMode,
    pub(crate) pulled: AtomicBool,
}

impl AdherenceGuard {
    pub fn id(&self) -> HandleId {
        self.id
    }

    pub fn mode(&self) -> AccessMode {
        self.mode
    }

    pub fn loading(&self) -> LoadMode {
        self.loading
    }

    /// Whether a view has been pulled from this guard.
    pub fn is_pulled(&self) -> bool {
        self.pulled.load(Ordering::Acquire)
    }

    /// Block until the payload is resident and return a stable view of it.
    ///
    /// Read-write guards mark the block dirty here, invalidating any clean
    /// on-disk copy. Repeated pulls of the same guard return views of the
    /// same buffer.
    pub fn pull(&self) -> Result<DataView<'_>> {
        let (buffer, len) = Shared::pull_payload(&self.shared, self)?;
        self.pulled.store(true, Ordering::Release);
        Ok(DataView {
            buffer,
            byte_len: len as usize,
            mode: self.mode,
            _guard: PhantomData,
        })
    }

    /// Release the pin explicitly. Equivalent to dropping the guard.
    pub fn release(self) {
        drop(self);
    }
}

impl Drop for AdherenceGuard {
    fn drop(&mut self) {
        Shared::release_guard(&self.shared, self.id, self.pulled.load(Ordering::Acquire));
    }
}

impl std::fmt::Debug for AdherenceGuard {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdherenceGuard")
            .field("id", &self.id)
            .field("mode", &self.mode)
            .field("loading", &self.loading)
            .field("pulled", &self.is_pulled())
            .finish()
    }
}

/// A contiguous view of a resident payload, valid while its guard lives.
pub struct DataView<'g> {
    buffer: Payload,
    byte_len: usize,
    mode: AccessMode,
    _guard: PhantomData<&'g AdherenceGuard>,
}

impl DataView<'_> {
    pub fn len(&self) -> usize {
        self.byte_len
    }

    pub fn is_empty(&self) -> bool {
        self.byte_len == 0
    }

    pub fn mode(&self) -> AccessMode {
        self.mode
    }

    /// Stable identity of the underlying buffer: pulls of the same guard
    /// always observe the same value.
    pub fn buffer_id(&self) -> usize {
        Arc::as_ptr(&self.buffer) as usize
    }

    /// Shared read access to the payload bytes.
    pub fn read(&self) -> ViewRead<'_> {
        let inner = self
            .buffer
            .read()
            .unwrap_or_else(|poisoned| poisoned.into_inner());
        ViewRead { inner }
    }

    /// Exclusive write access to the payload bytes. Fails on read-only
    /// guards.
    pub fn write(&self) -> Result<ViewWrite<'_>> {
        if self.mode != AccessMode::ReadWrite {
            return Err(Error::ReadOnlyView);
        }
        let inner = self
            .buffer
            .write()
            .unwrap_or_else(|poisoned| poisoned.into_inner());
        Ok(ViewWrite { inner })
    }
}

impl std::fmt::Debug for DataView<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DataView")
            .field("byte_len", &self.byte_len)
            .field("mode", &self.mode)
            .finish()
    }
}

/// Read lock over a payload.
pub struct ViewRead<'a> {
    inner: RwLockReadGuard<'a, Box<[u8]>>,
}

impl std::ops::Deref for ViewRead<'_> {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        &self.inner
    }
}

/// Write lock over a payload.
pub struct ViewWrite<'a> {
    inner: RwLockWriteGuard<'a, Box<[u8]>>,
}

impl std::ops::Deref for ViewWrite<'_> {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        &self.inner
    }
}

impl std::ops::DerefMut for ViewWrite<'_> {
    fn deref_mut(&mut self) -> &mut [u8] {
        &mut self.inner
    }
}
