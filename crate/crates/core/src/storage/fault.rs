use std::sync::atomic::{AtomicU64, Ordering};

use super::{Backend, ObjectPath};
use crate::error::{Error, Result};

/// Writes are numbered from 1. Every write numbered `fail_at_write` or
/// later fails, so `fail_at_write = 3` lets writes 1 and 2 through and
/// `0` blocks everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultSchedule {
    pub fail_at_write: u64,
}

/// Backend wrapper simulating a client that dies at a chosen write. Reads
/// keep working so a restarted client can inspect what was left behind.
#[derive(Debug)]
pub struct FaultInjectingBackend<B> {
    inner: B,
    writes: AtomicU64,
    fail_at: AtomicU64,
}

impl<B: Backend> FaultInjectingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            writes: AtomicU64::new(0),
            fail_at: AtomicU64::new(u64::MAX),
        }
    }

    pub fn inject_fault(&self, schedule: FaultSchedule) {
        self.fail_at.store(schedule.fail_at_write, Ordering::SeqCst);
    }

    pub fn clear_fault(&self) {
        self.fail_at.store(u64::MAX, Ordering::SeqCst);
    }

    /// Mutating calls seen so far, including failed ones.
    pub fn writes_attempted(&self) -> u64 {
        self.writes.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    fn gate(&self) -> Result<()> {
        let n = self.writes.fetch_add(1, Ordering::SeqCst) + 1;
        if n >= self.fail_at.load(Ordering::SeqCst) {
            Err(Error::InjectedFault(n))
        } else {
            Ok(())
        }
    }
}

impl<B: Backend> Backend for FaultInjectingBackend<B> {
    fn create(&self, path: &ObjectPath) -> Result<()> {
        self.gate()?;
        self.inner.create(path)
    }

    fn append(&self, path: &ObjectPath, data: &[u8]) -> Result<u64> {
        self.gate()?;
        self.inner.append(path, data)
    }

    fn read_range(&self, path: &ObjectPath, offset: u64, len: u64) -> Result<Vec<u8>> {
        self.inner.read_range(path, offset, len)
    }

    fn length(&self, path: &ObjectPath) -> Result<u64> {
        self.inner.length(path)
    }

    fn delete(&self, path: &ObjectPath) -> Result<()> {
        self.gate()?;
        self.inner.delete(path)
    }

    fn rename(&self, src: &ObjectPath, dst: &ObjectPath) -> Result<()> {
        self.gate()?;
        self.inner.rename(src, dst)
    }

    fn replace(&self, src: &ObjectPath, dst: &ObjectPath) -> Result<()> {
        self.gate()?;
        self.inner.replace(src, dst)
    }

    fn list(&self, prefix: &str) -> Result<Vec<ObjectPath>> {
        self.inner.list(prefix)
    }

    fn exists(&self, path: &ObjectPath) -> Result<bool> {
        self.inner.exists(path)
    }

    fn pin(&self, path: &ObjectPath) -> Result<()> {
        self.inner.pin(path)
    }

    fn unpin(&self, path: &ObjectPath) -> Result<()> {
        self.inner.unpin(path)
    }

    fn read_all(&self, path: &ObjectPath) -> Result<Vec<u8>> {
        self.inner.read_all(path)
    }
}
