//! Rebuilds a consistent archive after a create or append that did not
//! commit (its `_temporaryIndex` is still present).
//!
//! Every step is idempotent, so a crash during recovery is repaired by the
//! next open:
//!
//! 1. delete leftover `*.tmp` objects;
//! 2. gather the complete records of `_temporaryIndex` and every index
//!    file, keeping the `_temporaryIndex` copy of a repeated key;
//! 3. if anything came from index files or a partial record trails the
//!    log, rewrite `_temporaryIndex` with the full set, so the log alone
//!    describes the archive from here on;
//! 4. re-insert all records into a fresh directory and rewrite every index
//!    file, deleting index files the new directory does not use;
//! 5. rewrite `_names` keeping only names whose records were recovered;
//! 6. rewrite `_manifest` with the part roster found on the backend, then
//!    delete `_temporaryIndex`.

use std::collections::HashSet;

use super::index_file::{decode_index_file, encode_index_file};
use super::layout::{write_object, Layout, TMP_SUFFIX};
use super::manifest::ArchiveManifest;
use super::names::{decode_names_lenient, encode_name};
use super::record::MetadataRecord;
use super::{index_ids, part_roster, PartEntry};
use crate::directory::{BucketId, ExtendibleDirectory};
use crate::error::Result;
use crate::hashing::{name_hash, FileKey};
use crate::storage::Backend;

pub(crate) fn recover(
    backend: &dyn Backend,
    layout: &Layout,
    mut manifest: ArchiveManifest,
) -> Result<ArchiveManifest> {
    for path in backend.list(&layout.prefix())? {
        if path.as_str().ends_with(TMP_SUFFIX) {
            backend.delete(&path)?;
        }
    }

    let temp_path = layout.temporary_index();
    let (logged, trailing) = MetadataRecord::decode_all(&backend.read_all(&temp_path)?);
    let mut seen: HashSet<FileKey> = HashSet::new();
    let mut records = Vec::with_capacity(logged.len());
    for r in logged {
        if seen.insert(r.key) {
            records.push(r);
        }
    }
    let logged_count = records.len();
    let old_indexes = index_ids(backend, layout)?;
    for &id in &old_indexes {
        let path = layout.index(id);
        let file =
            decode_index_file(&backend.read_all(&path)?).map_err(|e| e.in_object(path.as_str()))?;
        for r in file.records {
            if seen.insert(r.key) {
                records.push(r);
            }
        }
    }
    if records.len() > logged_count || trailing > 0 {
        let bytes: Vec<u8> = records.iter().flat_map(|r| r.encode()).collect();
        write_object(backend, &temp_path, &bytes)?;
    }

    let mut directory = ExtendibleDirectory::new(manifest.bucket_capacity)?;
    for r in &records {
        directory.insert(*r)?;
    }
    for bucket in directory.buckets() {
        let bucket_records: Vec<MetadataRecord> = bucket
            .records()
            .expect("fresh directory is resident")
            .copied()
            .collect();
        write_object(
            backend,
            &layout.index(bucket.id()),
            &encode_index_file(&bucket_records)?,
        )?;
    }
    let bucket_count = directory.buckets().len() as BucketId;
    for &id in old_indexes.range(bucket_count..) {
        backend.delete(&layout.index(id))?;
    }

    let names_path = layout.names();
    let old_names = if backend.exists(&names_path)? {
        backend.read_all(&names_path)?
    } else {
        Vec::new()
    };
    let (names, _) = decode_names_lenient(&old_names);
    let mut kept = HashSet::new();
    let mut names_bytes = Vec::new();
    for name in names {
        let key = name_hash(&name);
        if seen.contains(&key) && kept.insert(key) {
            encode_name(&name, &mut names_bytes);
        }
    }
    write_object(backend, &names_path, &names_bytes)?;

    for &id in &manifest.active_parts {
        let path = layout.part(id);
        if !backend.exists(&path)? {
            backend.create(&path)?;
        }
    }
    manifest.parts = part_roster(backend, layout)?
        .into_iter()
        .map(|(id, length)| PartEntry { id, length })
        .collect();
    manifest.directory = directory.shape();
    manifest.file_count = records.len() as u64;
    write_object(backend, &layout.manifest(), &manifest.to_bytes())?;
    backend.delete(&temp_path)?;
    Ok(manifest)
}
