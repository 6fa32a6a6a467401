//! The archive: a folder of objects holding many small files.
//!
//! ```text
//! <archive>/_manifest         canonical JSON: config, part roster, directory shape
//! <archive>/_names            every archived name, in commit order
//! <archive>/_temporaryIndex   records merged since the last commit (transient)
//! <archive>/part-<i>          concatenated content frames
//! <archive>/index-<id>        one bucket: monotone index header, then sorted records
//! ```
//!
//! A lookup hashes the name, routes the key through the directory to one
//! index file, ranks it with that file's header and reads exactly one
//! 24-byte record at `Υ + rank * 24`. The content is then one ranged read.

pub mod frame;
pub mod index_file;
pub mod layout;
pub mod manifest;
mod merge;
pub mod names;
pub mod record;
mod recovery;
mod verify;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, RwLock};

pub use frame::Codec;
pub use manifest::{max_records_per_index, ArchiveConfig, ArchiveManifest, PartEntry};
pub use merge::{ContentSource, InputFile};
pub use verify::{CheckOutcome, VerifyReport};

use self::index_file::encode_index_file;
use self::layout::{write_object, Layout, INDEX_PREFIX, PART_PREFIX};
use self::manifest::MANIFEST_FORMAT_VERSION;
use self::merge::{merge, unique_keys, MergeOutcome, MergeTarget};
use self::record::{MetadataRecord, RECORD_LEN};
use crate::directory::{BucketId, ExtendibleDirectory};
use crate::error::{Error, Result};
use crate::hashing::{name_hash, FileKey};
use crate::monotone::MonotoneIndex;
use crate::storage::{with_phase, Backend, ObjectPath, Phase};

/// A bucket's monotone index with the byte offset where its records start.
#[derive(Debug)]
pub struct BucketHeader {
    pub index: MonotoneIndex,
    pub upsilon: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketStats {
    pub id: BucketId,
    pub local_depth: u32,
    pub record_count: u64,
    pub header_bytes: u64,
    pub bits_per_key: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveStats {
    pub file_count: u64,
    pub part_count: usize,
    pub part_bytes: u64,
    pub codec: Codec,
    pub bucket_capacity: u64,
    pub global_depth: u32,
    pub buckets: Vec<BucketStats>,
}

/// An open archive. Reads may run concurrently; appends need `&mut self`.
pub struct Archive {
    backend: Arc<dyn Backend>,
    layout: Layout,
    manifest: ArchiveManifest,
    directory: ExtendibleDirectory,
    codec: Codec,
    headers: RwLock<HashMap<BucketId, Arc<BucketHeader>>>,
}

impl std::fmt::Debug for Archive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Archive")
            .field("root", self.layout.root())
            .field("file_count", &self.manifest.file_count)
            .finish_non_exhaustive()
    }
}

impl Archive {
    /// Builds a new archive at `root` from `files`.
    ///
    /// Write order: `_temporaryIndex`, initial `_manifest`, `_names` and one
    /// part per worker; then per file its frame, name and record; then the
    /// index files, the final `_manifest`, and deletion of
    /// `_temporaryIndex` as the commit.
    pub fn create(
        backend: Arc<dyn Backend>,
        root: &ObjectPath,
        files: Vec<InputFile>,
        config: ArchiveConfig,
    ) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(root.clone());
        if backend.exists(root)? || !backend.list(&layout.prefix())?.is_empty() {
            return Err(Error::Conflict(root.to_string()));
        }
        let keys = unique_keys(&files)?;
        let directory = ExtendibleDirectory::new(config.bucket_capacity)?;
        let workers = config.workers as u32;
        let mut manifest = ArchiveManifest {
            format_version: MANIFEST_FORMAT_VERSION,
            codec: config.codec.id(),
            bucket_capacity: config.bucket_capacity,
            block_size: config.block_size,
            max_part_size: config.max_part_size,
            workers,
            parts: (0..workers).map(|id| PartEntry { id, length: 0 }).collect(),
            active_parts: (0..workers).collect(),
            directory: directory.shape(),
            file_count: 0,
        };

        let b = backend.as_ref();
        b.create(&layout.temporary_index())?;
        write_object(b, &layout.manifest(), &manifest.to_bytes())?;
        b.create(&layout.names())?;
        for id in 0..workers {
            b.create(&layout.part(id))?;
        }

        let target = MergeTarget {
            backend: b,
            layout: &layout,
            codec: config.codec,
            max_part_size: config.max_part_size,
        };
        let parts = manifest.parts.iter().map(|p| (p.id, p.length)).collect();
        let active = manifest.active_parts.clone();
        let mut outcome = merge(&target, directory, &files, &keys, parts, &active)?;
        outcome.changed = (0..outcome.directory.buckets().len() as BucketId).collect();
        publish(b, &layout, &mut manifest, &mut outcome, 0)?;

        let mut directory = outcome.directory;
        directory.evict_all();
        Ok(Self {
            backend,
            layout,
            manifest,
            directory,
            codec: config.codec,
            headers: RwLock::default(),
        })
    }

    /// Opens an archive, first recovering it if a previous create or append
    /// did not commit. A clean open performs no writes.
    pub fn open(backend: Arc<dyn Backend>, root: &ObjectPath) -> Result<Self> {
        let layout = Layout::new(root.clone());
        let manifest_path = layout.manifest();
        if !backend.exists(&manifest_path)? {
            return Err(Error::NotAnArchive(root.to_string()));
        }
        let bytes = backend.read_all(&manifest_path)?;
        let mut manifest =
            ArchiveManifest::from_bytes(&bytes).map_err(|e| e.in_object(manifest_path.as_str()))?;
        if backend.exists(&layout.temporary_index())? {
            manifest = recovery::recover(backend.as_ref(), &layout, manifest)?;
        }
        let directory =
            ExtendibleDirectory::from_shape(&manifest.directory, manifest.bucket_capacity)
                .map_err(|e| e.in_object(manifest_path.as_str()))?;
        let codec = manifest.codec()?;
        Ok(Self {
            backend,
            layout,
            manifest,
            directory,
            codec,
            headers: RwLock::default(),
        })
    }

    /// Adds `files`. Only buckets receiving records have their index files
    /// rewritten.
    pub fn append_files(&mut self, files: Vec<InputFile>) -> Result<()> {
        let b = self.backend.as_ref();
        if b.exists(&self.layout.temporary_index())? {
            return Err(Error::NotClean(self.layout.root().to_string()));
        }
        let keys = unique_keys(&files)?;
        for (file, &key) in files.iter().zip(&keys) {
            if self.lookup_key(key)?.is_some() {
                return Err(Error::AlreadyArchived {
                    name: file.name.clone(),
                    key,
                });
            }
        }

        b.create(&self.layout.temporary_index())?;
        let target = MergeTarget {
            backend: b,
            layout: &self.layout,
            codec: self.codec,
            max_part_size: self.manifest.max_part_size,
        };
        let directory = ExtendibleDirectory::from_shape(
            &self.manifest.directory,
            self.manifest.bucket_capacity,
        )?;
        let bucket_count = directory.buckets().len() as BucketId;
        let parts = self
            .manifest
            .parts
            .iter()
            .map(|p| (p.id, p.length))
            .collect();
        let active = self.manifest.active_parts.clone();
        let mut outcome = merge(&target, directory, &files, &keys, parts, &active)?;
        let mut manifest = self.manifest.clone();
        publish(b, &self.layout, &mut manifest, &mut outcome, bucket_count)?;

        let mut headers = self.headers.write().unwrap();
        for id in &outcome.changed {
            headers.remove(id);
        }
        drop(headers);
        outcome.directory.evict_all();
        self.directory = outcome.directory;
        self.manifest = manifest;
        Ok(())
    }

    /// Looks up a file's metadata record: at most one header read per bucket
    /// per open, then exactly one 24-byte read for a member.
    pub fn get_metadata(&self, name: &str) -> Result<Option<MetadataRecord>> {
        self.lookup_key(name_hash(name))
    }

    pub fn lookup_key(&self, key: FileKey) -> Result<Option<MetadataRecord>> {
        with_phase(Phase::Metadata, || {
            let id = self.directory.locate_bucket(key);
            let header = self.header(id)?;
            let Some(rank) = header.index.rank(key) else {
                return Ok(None);
            };
            let path = self.layout.index(id);
            let offset = header.upsilon + rank * RECORD_LEN as u64;
            let bytes = self.backend.read_range(&path, offset, RECORD_LEN as u64)?;
            let record = MetadataRecord::decode(&bytes)?;
            Ok((record.key == key).then_some(record))
        })
    }

    pub fn get_file(&self, name: &str) -> Result<Option<Vec<u8>>> {
        match self.get_metadata(name)? {
            Some(record) => self.read_content(&record).map(Some),
            None => Ok(None),
        }
    }

    /// Reads and decodes the frame `record` points to.
    pub fn read_content(&self, record: &MetadataRecord) -> Result<Vec<u8>> {
        let path = self.layout.part(record.part_position);
        let integrity = |reason: String| Error::Integrity {
            object: path.to_string(),
            offset: record.offset,
            reason,
        };
        let frame = with_phase(Phase::Content, || {
            self.backend
                .read_range(&path, record.offset, record.stored_size as u64)
        })
        .map_err(|e| match e {
            Error::NotFound(_) | Error::Range { .. } => integrity(e.to_string()),
            other => other,
        })?;
        frame::decode_frame(self.codec, &frame).map_err(integrity)
    }

    /// Every archived name in commit order.
    pub fn list_names(&self) -> Result<Vec<String>> {
        let path = self.layout.names();
        let bytes = self.backend.read_all(&path)?;
        names::decode_names(&bytes).map_err(|e| e.in_object(path.as_str()))
    }

    /// Loads every bucket header (if needed) and summarizes the archive.
    pub fn stats(&self) -> Result<ArchiveStats> {
        let mut buckets = Vec::new();
        for b in self.directory.buckets() {
            let header = self.header(b.id())?;
            buckets.push(BucketStats {
                id: b.id(),
                local_depth: b.local_depth(),
                record_count: b.len(),
                header_bytes: header.upsilon,
                bits_per_key: header.index.bits_per_key(),
            });
        }
        Ok(ArchiveStats {
            file_count: self.manifest.file_count,
            part_count: self.manifest.parts.len(),
            part_bytes: self.manifest.parts.iter().map(|p| p.length).sum(),
            codec: self.codec,
            bucket_capacity: self.manifest.bucket_capacity,
            global_depth: self.directory.global_depth(),
            buckets,
        })
    }

    /// Makes every index object memory-resident on backends that cache.
    pub fn pin_indexes(&self) -> Result<()> {
        for b in self.directory.buckets() {
            self.backend.pin(&self.layout.index(b.id()))?;
        }
        Ok(())
    }

    pub fn unpin_indexes(&self) -> Result<()> {
        for b in self.directory.buckets() {
            self.backend.unpin(&self.layout.index(b.id()))?;
        }
        Ok(())
    }

    /// Loads every bucket header so later lookups read only records.
    pub fn load_headers(&self) -> Result<()> {
        for b in self.directory.buckets() {
            self.header(b.id())?;
        }
        Ok(())
    }

    pub fn verify(&self) -> Result<VerifyReport> {
        verify::verify(self)
    }

    pub fn manifest(&self) -> &ArchiveManifest {
        &self.manifest
    }

    pub fn directory(&self) -> &ExtendibleDirectory {
        &self.directory
    }

    pub fn root(&self) -> &ObjectPath {
        self.layout.root()
    }

    pub fn codec(&self) -> Codec {
        self.codec
    }

    pub fn backend(&self) -> &Arc<dyn Backend> {
        &self.backend
    }

    pub fn index_path(&self, id: BucketId) -> ObjectPath {
        self.layout.index(id)
    }

    pub fn part_path(&self, id: u32) -> ObjectPath {
        self.layout.part(id)
    }

    fn header(&self, id: BucketId) -> Result<Arc<BucketHeader>> {
        if let Some(h) = self.headers.read().unwrap().get(&id) {
            return Ok(Arc::clone(h));
        }
        let path = self.layout.index(id);
        let count = self
            .directory
            .bucket(id)
            .map(|b| b.len())
            .ok_or_else(|| Error::format(0, format!("no bucket {id}")))?;
        let header = with_phase(Phase::Metadata, || -> Result<BucketHeader> {
            let total = self.backend.length(&path)?;
            let body = count * RECORD_LEN as u64;
            let upsilon = total.checked_sub(body).ok_or_else(|| {
                Error::format(0, format!("{total} bytes cannot hold {count} records"))
            })?;
            let bytes = self.backend.read_range(&path, 0, upsilon)?;
            let (index, used) = MonotoneIndex::from_bytes(&bytes)?;
            if used as u64 != upsilon || index.len() != count {
                return Err(Error::format(
                    used as u64,
                    format!(
                        "header of {used} bytes for {} keys; expected {upsilon} bytes for {count}",
                        index.len()
                    ),
                ));
            }
            Ok(BucketHeader { index, upsilon })
        })
        .map_err(|e| e.in_object(path.as_str()))?;
        let header = Arc::new(header);
        self.headers
            .write()
            .unwrap()
            .insert(id, Arc::clone(&header));
        Ok(header)
    }
}

/// Writes the changed index files (new buckets first), then the manifest,
/// then deletes `_temporaryIndex` to commit.
fn publish(
    backend: &dyn Backend,
    layout: &Layout,
    manifest: &mut ArchiveManifest,
    outcome: &mut MergeOutcome,
    old_bucket_count: BucketId,
) -> Result<()> {
    let (fresh, existing): (Vec<BucketId>, Vec<BucketId>) = outcome
        .changed
        .iter()
        .partition(|&&id| id >= old_bucket_count);
    for id in fresh.into_iter().chain(existing) {
        let bucket = outcome.directory.bucket(id).expect("changed bucket exists");
        let records: Vec<MetadataRecord> = bucket
            .records()
            .expect("changed buckets are resident")
            .copied()
            .collect();
        write_object(backend, &layout.index(id), &encode_index_file(&records)?)?;
    }
    manifest.directory = outcome.directory.shape();
    manifest.file_count = outcome.directory.record_count();
    manifest.parts = outcome
        .parts
        .iter()
        .map(|(&id, &length)| PartEntry { id, length })
        .collect();
    manifest.active_parts = outcome.active_parts.clone();
    write_object(backend, &layout.manifest(), &manifest.to_bytes())?;
    backend.delete(&layout.temporary_index())
}

/// Part ids and lengths actually present on the backend.
fn part_roster(backend: &dyn Backend, layout: &Layout) -> Result<BTreeMap<u32, u64>> {
    layout
        .list_numbered(backend, PART_PREFIX)?
        .into_iter()
        .map(|id| Ok((id, backend.length(&layout.part(id))?)))
        .collect()
}

fn index_ids(backend: &dyn Backend, layout: &Layout) -> Result<BTreeSet<u32>> {
    Ok(layout
        .list_numbered(backend, INDEX_PREFIX)?
        .into_iter()
        .collect())
}
