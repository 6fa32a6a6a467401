//! Parallel merge of input files into part objects.
//!
//! Worker `w` takes files `w, w+W, w+2W, ...` and appends their frames to
//! its own part object. Commits (`_names` entry, `_temporaryIndex` record,
//! directory insert) are serialized and happen in input order, so the
//! archive's name order is deterministic.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::thread;

use super::frame::{encode_frame, Codec};
use super::index_file::decode_index_file;
use super::layout::Layout;
use super::names::encode_name;
use super::record::MetadataRecord;
use crate::directory::{BucketId, ExtendibleDirectory};
use crate::error::{Error, Result};
use crate::hashing::{name_hash, FileKey};
use crate::storage::Backend;

#[derive(Debug, Clone)]
pub enum ContentSource {
    Bytes(Vec<u8>),
    Path(PathBuf),
}

#[derive(Debug, Clone)]
pub struct InputFile {
    pub name: String,
    pub source: ContentSource,
}

impl InputFile {
    pub fn from_bytes(name: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        Self {
            name: name.into(),
            source: ContentSource::Bytes(bytes.into()),
        }
    }

    pub fn from_path(name: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        Self {
            name: name.into(),
            source: ContentSource::Path(path.into()),
        }
    }

    fn load(&self) -> Result<Cow<'_, [u8]>> {
        match &self.source {
            ContentSource::Bytes(b) => Ok(Cow::Borrowed(b)),
            ContentSource::Path(p) => {
                std::fs::read(p)
                    .map(Cow::Owned)
                    .map_err(|source| Error::Source {
                        name: self.name.clone(),
                        source,
                    })
            }
        }
    }
}

/// Hashes every name, rejecting repeated names and colliding keys.
pub(crate) fn unique_keys(files: &[InputFile]) -> Result<Vec<FileKey>> {
    let mut seen: std::collections::HashMap<FileKey, &str> = Default::default();
    let mut keys = Vec::with_capacity(files.len());
    for f in files {
        let key = name_hash(&f.name);
        if let Some(first) = seen.insert(key, &f.name) {
            return Err(if first == f.name {
                Error::DuplicateName(f.name.clone())
            } else {
                Error::KeyCollision {
                    key,
                    first: first.to_string(),
                    second: f.name.clone(),
                }
            });
        }
        keys.push(key);
    }
    Ok(keys)
}

pub(crate) struct MergeTarget<'a> {
    pub backend: &'a dyn Backend,
    pub layout: &'a Layout,
    pub codec: Codec,
    pub max_part_size: u64,
}

pub(crate) struct MergeOutcome {
    pub directory: ExtendibleDirectory,
    pub changed: BTreeSet<BucketId>,
    pub parts: BTreeMap<u32, u64>,
    pub active_parts: Vec<u32>,
}

struct CommitState {
    directory: ExtendibleDirectory,
    changed: BTreeSet<BucketId>,
    parts: BTreeMap<u32, u64>,
    next: usize,
}

/// Merges `files` (with precomputed `keys`) into the archive. Evicted
/// buckets are loaded from their index files before they receive records.
pub(crate) fn merge(
    target: &MergeTarget<'_>,
    directory: ExtendibleDirectory,
    files: &[InputFile],
    keys: &[FileKey],
    parts: BTreeMap<u32, u64>,
    active_parts: &[u32],
) -> Result<MergeOutcome> {
    let workers = active_parts.len();
    let next_part = AtomicU32::new(parts.keys().next_back().map_or(0, |m| m + 1));
    let state = Mutex::new(CommitState {
        directory,
        changed: BTreeSet::new(),
        parts,
        next: 0,
    });
    let turn = Condvar::new();
    let abort = AtomicBool::new(false);
    let initial_lengths: Vec<u64> = {
        let st = state.lock().unwrap();
        active_parts
            .iter()
            .map(|p| st.parts.get(p).copied().unwrap_or(0))
            .collect()
    };

    let shared = Shared {
        target,
        files,
        keys,
        workers,
        next_part: &next_part,
        state: &state,
        turn: &turn,
        abort: &abort,
    };
    let results: Vec<std::result::Result<u32, Option<Error>>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let shared = &shared;
                let start = (active_parts[w], initial_lengths[w]);
                s.spawn(move || shared.run_worker(w, start))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("merge worker panicked"))
            .collect()
    });

    let mut final_parts = Vec::with_capacity(workers);
    let mut first_error = None;
    for r in results {
        match r {
            Ok(part) => final_parts.push(part),
            Err(Some(e)) if first_error.is_none() => first_error = Some(e),
            Err(_) => {}
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    let st = state.into_inner().unwrap();
    Ok(MergeOutcome {
        directory: st.directory,
        changed: st.changed,
        parts: st.parts,
        active_parts: final_parts,
    })
}

struct Shared<'s, 'a> {
    target: &'s MergeTarget<'a>,
    files: &'s [InputFile],
    keys: &'s [FileKey],
    workers: usize,
    next_part: &'s AtomicU32,
    state: &'s Mutex<CommitState>,
    turn: &'s Condvar,
    abort: &'s AtomicBool,
}

impl Shared<'_, '_> {
    /// Returns the worker's last part, `Err(None)` if another worker failed.
    fn run_worker(&self, w: usize, start: (u32, u64)) -> std::result::Result<u32, Option<Error>> {
        let (mut part, mut len) = start;
        for i in (w..self.files.len()).step_by(self.workers) {
            if self.abort.load(Ordering::SeqCst) {
                return Err(None);
            }
            let record = match self.store_content(i, &mut part, &mut len) {
                Ok(r) => r,
                Err(e) => {
                    self.fail(self.state.lock().unwrap());
                    return Err(Some(e));
                }
            };
            let mut st = self.state.lock().unwrap();
            while st.next != i {
                if self.abort.load(Ordering::SeqCst) {
                    return Err(None);
                }
                st = self.turn.wait(st).unwrap();
            }
            if let Err(e) = self.commit(&mut st, i, record, len) {
                self.fail(st);
                return Err(Some(e));
            }
            st.next += 1;
            self.turn.notify_all();
        }
        Ok(part)
    }

    // Setting the flag under the lock keeps waiters from missing the wakeup.
    fn fail(&self, _guard: MutexGuard<'_, CommitState>) {
        self.abort.store(true, Ordering::SeqCst);
        self.turn.notify_all();
    }

    fn store_content(&self, i: usize, part: &mut u32, len: &mut u64) -> Result<MetadataRecord> {
        let t = self.target;
        let content = self.files[i].load()?;
        let frame = encode_frame(t.codec, &content)?;
        drop(content);
        if t.max_part_size > 0 && *len >= t.max_part_size {
            let id = self.next_part.fetch_add(1, Ordering::SeqCst);
            t.backend.create(&t.layout.part(id))?;
            *part = id;
            *len = 0;
        }
        let new_len = t.backend.append(&t.layout.part(*part), &frame)?;
        *len = new_len;
        Ok(MetadataRecord {
            key: self.keys[i],
            part_position: *part,
            offset: new_len - frame.len() as u64,
            stored_size: frame.len() as u32,
        })
    }

    fn commit(
        &self,
        st: &mut CommitState,
        i: usize,
        record: MetadataRecord,
        part_len: u64,
    ) -> Result<()> {
        let t = self.target;
        let mut entry = Vec::with_capacity(4 + self.files[i].name.len());
        encode_name(&self.files[i].name, &mut entry);
        t.backend.append(&t.layout.names(), &entry)?;
        t.backend
            .append(&t.layout.temporary_index(), &record.encode())?;

        let id = st.directory.locate_bucket(record.key);
        if !st.directory.bucket(id).is_some_and(|b| b.is_resident()) {
            let records = load_bucket_records(t.backend, t.layout, id)?;
            st.directory.load_bucket(id, records)?;
        }
        let changed = st.directory.insert(record)?;
        st.changed.extend(changed);
        let entry = st.parts.entry(record.part_position).or_insert(0);
        *entry = (*entry).max(part_len);
        Ok(())
    }
}

pub(crate) fn load_bucket_records(
    backend: &dyn Backend,
    layout: &Layout,
    id: BucketId,
) -> Result<Vec<MetadataRecord>> {
    let path = layout.index(id);
    let bytes = backend.read_all(&path)?;
    let file = decode_index_file(&bytes).map_err(|e| e.in_object(path.as_str()))?;
    Ok(file.records)
}
