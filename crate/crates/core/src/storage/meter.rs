//! IO accounting and object pinning.
//!
//! [`MeteredBackend`] forwards every call to an inner backend and records it
//! in a shared [`IoMeter`]. Reads are attributed to the calling thread's
//! current [`Phase`], so one lookup can report its metadata and content
//! costs separately. Pinned objects are copied into memory; reads of them
//! count as `cached_read_ops` instead of `read_ops`.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::{Add, Sub};
use std::sync::{Arc, Mutex, RwLock};

use super::{check_range, Backend, ObjectPath};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Phase {
    #[default]
    Other,
    Metadata,
    Content,
}

thread_local! {
    static PHASE: Cell<Phase> = const { Cell::new(Phase::Other) };
}

/// Runs `f` with reads on this thread attributed to `phase`.
pub fn with_phase<R>(phase: Phase, f: impl FnOnce() -> R) -> R {
    let prev = PHASE.with(|p| p.replace(phase));
    struct Restore(Phase);
    impl Drop for Restore {
        fn drop(&mut self) {
            PHASE.with(|p| p.set(self.0));
        }
    }
    let _restore = Restore(prev);
    f()
}

fn current_phase() -> Phase {
    PHASE.with(|p| p.get())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IoCounters {
    pub read_ops: u64,
    pub read_bytes: u64,
    pub cached_read_ops: u64,
    pub cached_read_bytes: u64,
    pub write_ops: u64,
    pub write_bytes: u64,
    /// Ranged reads that did not start where the previous read of the same
    /// object ended.
    pub seek_like_ops: u64,
}

impl Add for IoCounters {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            read_ops: self.read_ops + o.read_ops,
            read_bytes: self.read_bytes + o.read_bytes,
            cached_read_ops: self.cached_read_ops + o.cached_read_ops,
            cached_read_bytes: self.cached_read_bytes + o.cached_read_bytes,
            write_ops: self.write_ops + o.write_ops,
            write_bytes: self.write_bytes + o.write_bytes,
            seek_like_ops: self.seek_like_ops + o.seek_like_ops,
        }
    }
}

impl Sub for IoCounters {
    type Output = Self;

    fn sub(self, o: Self) -> Self {
        Self {
            read_ops: self.read_ops - o.read_ops,
            read_bytes: self.read_bytes - o.read_bytes,
            cached_read_ops: self.cached_read_ops - o.cached_read_ops,
            cached_read_bytes: self.cached_read_bytes - o.cached_read_bytes,
            write_ops: self.write_ops - o.write_ops,
            write_bytes: self.write_bytes - o.write_bytes,
            seek_like_ops: self.seek_like_ops - o.seek_like_ops,
        }
    }
}

#[derive(Debug, Default)]
struct MeterState {
    total: IoCounters,
    phases: BTreeMap<Phase, IoCounters>,
    paths: BTreeMap<String, IoCounters>,
    last_read_end: HashMap<String, u64>,
}

/// Shared, monotone IO counters. Only [`IoMeter::reset`] lowers them.
#[derive(Debug, Default)]
pub struct IoMeter {
    state: Mutex<MeterState>,
}

impl IoMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> IoCounters {
        self.state.lock().unwrap().total
    }

    pub fn phase(&self, phase: Phase) -> IoCounters {
        self.state
            .lock()
            .unwrap()
            .phases
            .get(&phase)
            .copied()
            .unwrap_or_default()
    }

    pub fn path(&self, path: &str) -> IoCounters {
        self.state
            .lock()
            .unwrap()
            .paths
            .get(path)
            .copied()
            .unwrap_or_default()
    }

    /// Paths that received at least one mutating call.
    pub fn written_paths(&self) -> BTreeSet<String> {
        self.state
            .lock()
            .unwrap()
            .paths
            .iter()
            .filter(|(_, c)| c.write_ops > 0)
            .map(|(p, _)| p.clone())
            .collect()
    }

    pub fn reset(&self) {
        *self.state.lock().unwrap() = MeterState::default();
    }

    fn record_read(&self, path: &ObjectPath, offset: u64, len: u64, cached: bool) {
        let phase = current_phase();
        let mut st = self.state.lock().unwrap();
        let delta = if cached {
            IoCounters {
                cached_read_ops: 1,
                cached_read_bytes: len,
                ..Default::default()
            }
        } else {
            let last = st.last_read_end.insert(path.to_string(), offset + len);
            IoCounters {
                read_ops: 1,
                read_bytes: len,
                seek_like_ops: u64::from(last.unwrap_or(0) != offset),
                ..Default::default()
            }
        };
        st.total = st.total + delta;
        let p = st.phases.entry(phase).or_default();
        *p = *p + delta;
        let c = st.paths.entry(path.to_string()).or_default();
        *c = *c + delta;
    }

    fn record_write(&self, paths: &[&ObjectPath], bytes: u64) {
        let mut st = self.state.lock().unwrap();
        let delta = IoCounters {
            write_ops: 1,
            write_bytes: bytes,
            ..Default::default()
        };
        st.total = st.total + delta;
        for path in paths {
            let c = st.paths.entry(path.to_string()).or_default();
            *c = *c + delta;
        }
    }
}

/// Backend wrapper that meters calls and serves pinned objects from memory.
#[derive(Debug)]
pub struct MeteredBackend<B> {
    inner: B,
    meter: Arc<IoMeter>,
    pinned: RwLock<HashMap<String, Arc<Vec<u8>>>>,
}

impl<B: Backend> MeteredBackend<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            meter: Arc::new(IoMeter::new()),
            pinned: RwLock::default(),
        }
    }

    pub fn meter(&self) -> &Arc<IoMeter> {
        &self.meter
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }

    pub fn is_pinned(&self, path: &ObjectPath) -> bool {
        self.pinned.read().unwrap().contains_key(path.as_str())
    }

    fn refresh_pin(&self, path: &ObjectPath) -> Result<()> {
        if self.is_pinned(path) {
            let data = self.inner.read_all(path)?;
            self.pinned
                .write()
                .unwrap()
                .insert(path.to_string(), Arc::new(data));
        }
        Ok(())
    }

    fn drop_pin(&self, path: &ObjectPath) {
        self.pinned.write().unwrap().remove(path.as_str());
    }
}

impl<B: Backend> Backend for MeteredBackend<B> {
    fn create(&self, path: &ObjectPath) -> Result<()> {
        self.inner.create(path)?;
        self.meter.record_write(&[path], 0);
        Ok(())
    }

    fn append(&self, path: &ObjectPath, data: &[u8]) -> Result<u64> {
        let len = self.inner.append(path, data)?;
        self.meter.record_write(&[path], data.len() as u64);
        self.refresh_pin(path)?;
        Ok(len)
    }

    fn read_range(&self, path: &ObjectPath, offset: u64, len: u64) -> Result<Vec<u8>> {
        let resident = self.pinned.read().unwrap().get(path.as_str()).cloned();
        if let Some(data) = resident {
            check_range(path, offset, len, data.len() as u64)?;
            self.meter.record_read(path, offset, len, true);
            return Ok(data[offset as usize..(offset + len) as usize].to_vec());
        }
        let out = self.inner.read_range(path, offset, len)?;
        self.meter.record_read(path, offset, len, false);
        Ok(out)
    }

    fn length(&self, path: &ObjectPath) -> Result<u64> {
        self.inner.length(path)
    }

    fn delete(&self, path: &ObjectPath) -> Result<()> {
        self.inner.delete(path)?;
        self.meter.record_write(&[path], 0);
        self.drop_pin(path);
        Ok(())
    }

    fn rename(&self, src: &ObjectPath, dst: &ObjectPath) -> Result<()> {
        self.inner.rename(src, dst)?;
        self.meter.record_write(&[src, dst], 0);
        self.drop_pin(src);
        Ok(())
    }

    fn replace(&self, src: &ObjectPath, dst: &ObjectPath) -> Result<()> {
        self.inner.replace(src, dst)?;
        self.meter.record_write(&[src, dst], 0);
        self.drop_pin(src);
        self.refresh_pin(dst)
    }

    fn list(&self, prefix: &str) -> Result<Vec<ObjectPath>> {
        self.inner.list(prefix)
    }

    fn exists(&self, path: &ObjectPath) -> Result<bool> {
        self.inner.exists(path)
    }

    fn pin(&self, path: &ObjectPath) -> Result<()> {
        let data = self.inner.read_all(path)?;
        self.pinned
            .write()
            .unwrap()
            .insert(path.to_string(), Arc::new(data));
        Ok(())
    }

    fn unpin(&self, path: &ObjectPath) -> Result<()> {
        if !self.inner.exists(path)? {
            return Err(crate::Error::NotFound(path.to_string()));
        }
        self.drop_pin(path);
        Ok(())
    }

    fn read_all(&self, path: &ObjectPath) -> Result<Vec<u8>> {
        let len = self.length(path)?;
        self.read_range(path, 0, len)
    }
}
