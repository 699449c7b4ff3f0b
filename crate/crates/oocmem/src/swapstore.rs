//! Disk-backed storage for swapped blocks.
//!
//! Swap files are raw byte blobs with no on-disk metadata; the entire layout
//! lives in memory so that lookups never touch the disk. Files are created
//! sparse at a fixed provisioned size and named `oocmem-<pid>-<index>.swap`;
//! they are deleted when the store is dropped. Swapped data does not
//! survive a restart.
//!
//! Allocation is staged:
//! 1. first fit: the first single free chunk the block fits into, trimmed to
//!    size with the remainder left free;
//! 2. splitting: if no single chunk fits, free chunks are consumed greedily
//!    in scan order until the block is covered;
//! 3. the caller-provided clean-copy purger frees disk copies of data that is
//!    also resident in RAM, and stages 1-2 run again;
//! 4. the swap policy decides whether to provision more files or fail.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::config::SwapPolicy;
use crate::error::{Error, Result};

/// A contiguous region of one swap file holding part of a swapped block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkSpan {
    pub file_index: u32,
    pub offset: u64,
    pub len: u64,
}

impl std::fmt::Display for ChunkSpan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(f{}, {}, {})", self.file_index, self.offset, self.len)
    }
}

/// Frees clean disk copies under allocation pressure (stage 3).
///
/// Implementations must free at least `bytes_wanted` bytes back into `store`
/// if they can, oldest copies first, and return the number of bytes freed.
pub trait CleanCopyPurger {
    fn purge(&mut self, store: &mut SwapStore, bytes_wanted: u64) -> u64;
}

/// A purger with nothing to purge.
pub struct NoPurge;

impl CleanCopyPurger for NoPurge {
    fn purge(&mut self, _store: &mut SwapStore, _bytes_wanted: u64) -> u64 {
        0
    }
}

/// Callback consulted by the `Interactive` policy. Receives the number of
/// bytes still missing and answers whether swap space may be extended.
pub type InteractiveCallback = Box<dyn FnMut(u64) -> bool + Send>;

/// Outcome details of a staged allocation, for diagnostics.
#[derive(Debug, Default, Clone, Copy)]
pub struct AllocOutcome {
    pub purged_bytes: u64,
    pub files_added: u32,
    pub policy_fired: bool,
}

struct SwapFile {
    file: Arc<File>,
    path: PathBuf,
    /// Free chunks, keyed by offset. Never contains two touching entries.
    free: BTreeMap<u64, u64>,
}

/// The swap file pool and its in-memory free lists.
pub struct SwapStore {
    dir: PathBuf,
    file_size: u64,
    policy: SwapPolicy,
    interactive: Option<InteractiveCallback>,
    files: Vec<SwapFile>,
    allocated_bytes: u64,
}

impl SwapStore {
    pub fn new(dir: impl Into<PathBuf>, file_size: u64, policy: SwapPolicy) -> Self {
        assert!(file_size > 0, "swap file size must be positive");
        SwapStore {
            dir: dir.into(),
            file_size,
            policy,
            interactive: None,
            files: Vec::new(),
            allocated_bytes: 0,
        }
    }

    pub fn set_interactive_callback(&mut self, cb: InteractiveCallback) {
        self.interactive = Some(cb);
    }

    pub fn policy(&self) -> SwapPolicy {
        self.policy
    }

    pub fn set_policy(&mut self, policy: SwapPolicy) {
        self.policy = policy;
    }

    /// Bytes currently allocated to spans.
    pub fn allocated_bytes(&self) -> u64 {
        self.allocated_bytes
    }

    /// Bytes currently free across all provisioned files.
    pub fn free_bytes(&self) -> u64 {
        self.files
            .iter()
            .map(|f| f.free.values().sum::<u64>())
            .sum()
    }

    /// Total provisioned bytes.
    pub fn provisioned_bytes(&self) -> u64 {
        self.files.len() as u64 * self.file_size
    }

    pub fn file_count(&self) -> usize {
        self.files.len()
    }

    /// The open file backing `file_index`, for transfer submission.
    pub fn file_handle(&self, file_index: u32) -> Option<Arc<File>> {
        self.files.get(file_index as usize).map(|f| f.file.clone())
    }

    /// Approximate in-memory footprint of the free lists and file table.
    pub fn metadata_bytes(&self) -> u64 {
        let per_entry = std::mem::size_of::<(u64, u64)>() as u64 + 16; // BTreeMap node overhead
        let free_entries: u64 = self.files.iter().map(|f| f.free.len() as u64).sum();
        let table = (self.files.capacity() * std::mem::size_of::<SwapFile>()) as u64;
        table + free_entries * per_entry
    }

    /// Provision one more swap file. Returns its index.
    pub fn add_file(&mut self) -> Result<u32> {
        let index = self.files.len() as u32;
        let name = format!("oocmem-{}-{}.swap", std::process::id(), index);
        let path = self.dir.join(name);
        let file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(true)
            .open(&path)
            .map_err(|e| Error::io(format!("creating swap file {}", path.display()), e))?;
        // Sparse: the file consumes disk space only as spans are written.
        file.set_len(self.file_size)
            .map_err(|e| Error::io(format!("sizing swap file {}", path.display()), e))?;
        let mut free = BTreeMap::new();
        free.insert(0, self.file_size);
        self.files.push(SwapFile {
            file: Arc::new(file),
            path,
            free,
        });
        Ok(index)
    }

    /// Stages 1-2: first fit, then splitting over the remaining gaps.
    /// Returns `None` when the total free space cannot cover the request.
    pub fn try_allocate(&mut self, byte_len: u64) -> Option<Vec<ChunkSpan>> {
        assert!(byte_len > 0, "allocation size must be positive");
        // Stage 1: first single chunk the block fits into.
        for (fi, file) in self.files.iter_mut().enumerate() {
            let found = file
                .free
                .iter()
                .find(|(_, len)| **len >= byte_len)
                .map(|(off, len)| (*off, *len));
            if let Some((off, len)) = found {
                file.free.remove(&off);
                if len > byte_len {
                    file.free.insert(off + byte_len, len - byte_len);
                }
                self.allocated_bytes += byte_len;
                return Some(vec![ChunkSpan {
                    file_index: fi as u32,
                    offset: off,
                    len: byte_len,
                }]);
            }
        }
        // Stage 2: split consecutively over the remaining gaps.
        if self.free_bytes() < byte_len {
            return None;
        }
        let mut spans = Vec::new();
        let mut remaining = byte_len;
        'files: for (fi, file) in self.files.iter_mut().enumerate() {
            while remaining > 0 {
                let Some((off, len)) = file.free.iter().next().map(|(o, l)| (*o, *l)) else {
                    continue 'files;
                };
                let take = len.min(remaining);
                file.free.remove(&off);
                if len > take {
                    file.free.insert(off + take, len - take);
                }
                spans.push(ChunkSpan {
                    file_index: fi as u32,
                    offset: off,
                    len: take,
                });
                remaining -= take;
            }
            break;
        }
        debug_assert_eq!(remaining, 0);
        self.allocated_bytes += byte_len;
        Some(spans)
    }

    /// Full staged allocation (stages 1-4).
    pub fn allocate(
        &mut self,
        byte_len: u64,
        purger: &mut dyn CleanCopyPurger,
    ) -> Result<(Vec<ChunkSpan>, AllocOutcome)> {
        let mut outcome = AllocOutcome::default();
        // Base provisioning happens lazily on first use under any policy.
        if self.files.is_empty() {
            self.add_file()?;
            outcome.files_added += 1;
        }
        if let Some(spans) = self.try_allocate(byte_len) {
            return Ok((spans, outcome));
        }
        // Stage 3: purge clean copies and retry.
        let deficit = byte_len.saturating_sub(self.free_bytes());
        outcome.purged_bytes = purger.purge(self, deficit);
        if let Some(spans) = self.try_allocate(byte_len) {
            return Ok((spans, outcome));
        }
        // Stage 4: the policy decides.
        outcome.policy_fired = true;
        let mut consent = match self.policy {
            SwapPolicy::Fail => false,
            SwapPolicy::Autoextend => true,
            SwapPolicy::Interactive => {
                let missing = byte_len.saturating_sub(self.free_bytes());
                match self.interactive.as_mut() {
                    Some(cb) => cb(missing),
                    None => false,
                }
            }
        };
        while consent {
            if self.add_file().is_err() {
                consent = false;
                break;
            }
            outcome.files_added += 1;
            if let Some(spans) = self.try_allocate(byte_len) {
                return Ok((spans, outcome));
            }
        }
        let _ = consent;
        Err(Error::OutOfSwapSpace {
            needed: byte_len,
            free: self.free_bytes(),
        })
    }

    /// Return spans to the free lists, coalescing adjacent free chunks.
    pub fn free_spans(&mut self, spans: &[ChunkSpan]) -> Result<()> {
        // Validate every span before mutating anything.
        for s in spans {
            let file = self
                .files
                .get(s.file_index as usize)
                .ok_or(Error::UnknownSpan {
                    file_index: s.file_index,
                    offset: s.offset,
                    len: s.len,
                })?;
            if s.len == 0 || s.offset + s.len > self.file_size {
                return Err(Error::UnknownSpan {
                    file_index: s.file_index,
                    offset: s.offset,
                    len: s.len,
                });
            }
            // Overlap with free space means the span (or part of it) was
            // already freed.
            let overlaps_prev = file
                .free
                .range(..=s.offset)
                .next_back()
                .is_some_and(|(off, len)| off + len > s.offset);
            let overlaps_next = file
                .free
                .range(s.offset..s.offset + s.len)
                .next()
                .is_some();
            if overlaps_prev || overlaps_next {
                return Err(Error::DoubleFree {
                    file_index: s.file_index,
                    offset: s.offset,
                    len: s.len,
                });
            }
        }
        for s in spans {
            let file = &mut self.files[s.file_index as usize];
            let mut off = s.offset;
            let mut len = s.len;
            // Coalesce with the predecessor.
            if let Some((&poff, &plen)) = file.free.range(..off).next_back() {
                if poff + plen == off {
                    file.free.remove(&poff);
                    off = poff;
                    len += plen;
                }
            }
            // Coalesce with the successor.
            if let Some((&noff, &nlen)) = file.free.range(off + len..).next() {
                if off + len == noff {
                    file.free.remove(&noff);
                    len += nlen;
                }
            }
            file.free.insert(off, len);
            self.allocated_bytes -= s.len;
        }
        Ok(())
    }

    /// The free list of one file as `(offset, len)` pairs, for inspection.
    pub fn free_list(&self, file_index: u32) -> Vec<(u64, u64)> {
        self.files
            .get(file_index as usize)
            .map(|f| f.free.iter().map(|(o, l)| (*o, *l)).collect())
            .unwrap_or_default()
    }

    /// Check the accounting identity `allocated + free == provisioned` and
    /// that no two free chunks touch. Used by tests and assertions.
    pub fn check_accounting(&self) -> std::result::Result<(), String> {
        let free = self.free_bytes();
        let provisioned = self.provisioned_bytes();
        if self.allocated_bytes + free != provisioned {
            return Err(format!(
                "accounting broken: allocated {} + free {} != provisioned {}",
                self.allocated_bytes, free, provisioned
            ));
        }
        for (fi, file) in self.files.iter().enumerate() {
            let mut prev_end: Option<u64> = None;
            for (&off, &len) in &file.free {
                if len == 0 {
                    return Err(format!("file {fi}: zero-length free chunk at {off}"));
                }
                if off + len > self.file_size {
                    return Err(format!("file {fi}: free chunk ({off},{len}) out of range"));
                }
                if let Some(end) = prev_end {
                    if end >= off {
                        return Err(format!(
                            "file {fi}: free chunks touch or overlap at offset {off}"
                        ));
                    }
                }
                prev_end = Some(off + len);
            }
        }
        Ok(())
    }

    fn remove_files(&mut self) {
        for f in self.files.drain(..) {
            let _ = std::fs::remove_file(&f.path);
        }
    }

    /// Path of one swap file (test support).
    pub fn file_path(&self, file_index: u32) -> Option<&Path> {
        self.files.get(file_index as usize).map(|f| f.path.as_path())
    }
}

impl Drop for SwapStore {
    fn drop(&mut self) {
        self.remove_files();
    }
}

impl std::fmt::Debug for SwapStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SwapStore")
            .field("dir", &self.dir)
            .field("file_size", &self.file_size)
            .field("policy", &self.policy)
            .field("files", &self.files.len())
            .field("allocated_bytes", &self.allocated_bytes)
            .finish()
    }
}
