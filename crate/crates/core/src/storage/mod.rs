//! Object-store abstraction the container is written against.
//!
//! Objects are flat byte sequences addressed by slash-separated paths. The
//! surface mirrors a distributed file system client: create, append, ranged
//! read, atomic rename, listing by prefix. Wrappers add IO metering, pinning
//! of hot objects, and write-fault injection.

mod fault;
mod local;
mod memory;
mod meter;

use std::fmt;
use std::sync::Arc;

pub use fault::{FaultInjectingBackend, FaultSchedule};
pub use local::LocalDirBackend;
pub use memory::MemoryBackend;
pub use meter::{with_phase, IoCounters, IoMeter, MeteredBackend, Phase};

use crate::error::{Error, Result};

/// Validated, root-relative object path such as `archive1/part-0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectPath(String);

impl ObjectPath {
    pub fn new(path: impl Into<String>) -> Result<Self> {
        let path = path.into();
        let valid = !path.is_empty()
            && !path.contains(['\\', '\0'])
            && path
                .split('/')
                .all(|c| !c.is_empty() && c != "." && c != "..");
        if valid {
            Ok(Self(path))
        } else {
            Err(Error::InvalidPath(path))
        }
    }

    pub fn join(&self, name: &str) -> Result<Self> {
        Self::new(format!("{}/{name}", self.0))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Final path component.
    pub fn file_name(&self) -> &str {
        self.0.rsplit('/').next().unwrap_or(&self.0)
    }
}

impl fmt::Display for ObjectPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<&str> for ObjectPath {
    type Error = Error;

    fn try_from(value: &str) -> Result<Self> {
        Self::new(value)
    }
}

/// Storage backend. Appends and renames are atomic per call; nothing spans
/// more than one call.
pub trait Backend: Send + Sync {
    /// Creates an empty object; fails with `Conflict` if it exists.
    fn create(&self, path: &ObjectPath) -> Result<()>;

    /// Appends `data` and returns the new object length.
    fn append(&self, path: &ObjectPath, data: &[u8]) -> Result<u64>;

    fn read_range(&self, path: &ObjectPath, offset: u64, len: u64) -> Result<Vec<u8>>;

    fn length(&self, path: &ObjectPath) -> Result<u64>;

    fn delete(&self, path: &ObjectPath) -> Result<()>;

    /// Renames `src` to `dst`; `dst` must not exist.
    fn rename(&self, src: &ObjectPath, dst: &ObjectPath) -> Result<()>;

    /// Renames `src` over `dst`, atomically replacing it if present.
    fn replace(&self, src: &ObjectPath, dst: &ObjectPath) -> Result<()>;

    /// Every object whose path starts with `prefix`, sorted.
    fn list(&self, prefix: &str) -> Result<Vec<ObjectPath>>;

    fn exists(&self, path: &ObjectPath) -> Result<bool>;

    /// Marks an object memory-resident. Plain backends only check existence.
    fn pin(&self, path: &ObjectPath) -> Result<()> {
        if self.exists(path)? {
            Ok(())
        } else {
            Err(Error::NotFound(path.to_string()))
        }
    }

    fn unpin(&self, path: &ObjectPath) -> Result<()> {
        self.pin(path)
    }

    fn read_all(&self, path: &ObjectPath) -> Result<Vec<u8>> {
        let len = self.length(path)?;
        self.read_range(path, 0, len)
    }
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn create(&self, path: &ObjectPath) -> Result<()> {
        (**self).create(path)
    }
    fn append(&self, path: &ObjectPath, data: &[u8]) -> Result<u64> {
        (**self).append(path, data)
    }
    fn read_range(&self, path: &ObjectPath, offset: u64, len: u64) -> Result<Vec<u8>> {
        (**self).read_range(path, offset, len)
    }
    fn length(&self, path: &ObjectPath) -> Result<u64> {
        (**self).length(path)
    }
    fn delete(&self, path: &ObjectPath) -> Result<()> {
        (**self).delete(path)
    }
    fn rename(&self, src: &ObjectPath, dst: &ObjectPath) -> Result<()> {
        (**self).rename(src, dst)
    }
    fn replace(&self, src: &ObjectPath, dst: &ObjectPath) -> Result<()> {
        (**self).replace(src, dst)
    }
    fn list(&self, prefix: &str) -> Result<Vec<ObjectPath>> {
        (**self).list(prefix)
    }
    fn exists(&self, path: &ObjectPath) -> Result<bool> {
        (**self).exists(path)
    }
    fn pin(&self, path: &ObjectPath) -> Result<()> {
        (**self).pin(path)
    }
    fn unpin(&self, path: &ObjectPath) -> Result<()> {
        (**self).unpin(path)
    }
    fn read_all(&self, path: &ObjectPath) -> Result<Vec<u8>> {
        (**self).read_all(path)
    }
}

pub(crate) fn check_range(path: &ObjectPath, offset: u64, len: u64, object_len: u64) -> Result<()> {
    match offset.checked_add(len) {
        Some(end) if end <= object_len => Ok(()),
        _ => Err(Error::Range {
            path: path.to_string(),
            offset,
            len,
            object_len,
        }),
    }
}
