//! Full consistency check of an open archive.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::index_file::decode_index_file;
use super::layout::{Layout, INDEX_PREFIX};
use super::names::decode_names;
use super::record::{MetadataRecord, RECORD_LEN};
use super::{part_roster, Archive};
use crate::directory::BucketId;
use crate::error::Result;
use crate::hashing::{name_hash, FileKey};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckOutcome {
    pub name: &'static str,
    /// `None` when the check passed, otherwise what went wrong first.
    pub failure: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.failure {
            None => write!(f, "PASS {}", self.name),
            Some(why) => write!(f, "FAIL {}: {why}", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed())
    }

    fn record(&mut self, name: &'static str, failure: Option<String>) {
        self.checks.push(CheckOutcome { name, failure });
    }
}

pub(crate) fn verify(archive: &Archive) -> Result<VerifyReport> {
    let backend = archive.backend.as_ref();
    let layout: &Layout = &archive.layout;
    let mut report = VerifyReport::default();

    let dirty = backend.exists(&layout.temporary_index())?;
    report.record(
        "clean",
        dirty.then(|| "_temporaryIndex present".to_string()),
    );

    let roster = part_roster(backend, layout)?;
    let declared: Vec<(u32, u64)> = archive
        .manifest
        .parts
        .iter()
        .map(|p| (p.id, p.length))
        .collect();
    let found: Vec<(u32, u64)> = roster.iter().map(|(&i, &l)| (i, l)).collect();
    report.record(
        "part-roster",
        (declared != found).then(|| format!("manifest lists {declared:?}, backend has {found:?}")),
    );

    // index files: headers, ordering, rank consistency, routing
    let mut records: Vec<(BucketId, MetadataRecord)> = Vec::new();
    let mut index_failure = None;
    let mut routing_failure = None;
    let expected_ids: BTreeSet<u32> = archive.directory.buckets().iter().map(|b| b.id()).collect();
    let present: BTreeSet<u32> = layout
        .list_numbered(backend, INDEX_PREFIX)?
        .into_iter()
        .collect();
    if let Some(extra) = present.difference(&expected_ids).next() {
        index_failure = Some(format!("{} is not in the directory", layout.index(*extra)));
    }
    for bucket in archive.directory.buckets() {
        let path = layout.index(bucket.id());
        let bytes = match backend.read_all(&path) {
            Ok(b) => b,
            Err(e) => {
                index_failure.get_or_insert(format!("{path}: {e}"));
                continue;
            }
        };
        let file = match decode_index_file(&bytes) {
            Ok(f) => f,
            Err(e) => {
                index_failure.get_or_insert(format!("{path}: {e}"));
                continue;
            }
        };
        if file.records.len() as u64 != bucket.len() {
            index_failure.get_or_insert(format!(
                "{path}: {} records, directory expects {}",
                file.records.len(),
                bucket.len()
            ));
        }
        for (rank, r) in file.records.iter().enumerate() {
            if file.index.rank(r.key) != Some(rank as u64) {
                index_failure.get_or_insert(format!(
                    "{path} at offset {}: key {} does not rank to {rank}",
                    file.upsilon + (rank * RECORD_LEN) as u64,
                    r.key
                ));
            }
            let routed = archive.directory.locate_bucket(r.key);
            if routed != bucket.id() || !bucket.accepts(r.key) {
                routing_failure
                    .get_or_insert(format!("{path}: key {} routes to bucket {routed}", r.key));
            }
            records.push((bucket.id(), *r));
        }
    }
    report.record("index-files", index_failure);
    report.record("directory-agreement", routing_failure);

    let mut bounds_failure = None;
    let mut content_failure = None;
    for (id, r) in &records {
        match roster.get(&r.part_position) {
            None => {
                bounds_failure.get_or_insert(format!(
                    "{}: key {} names missing {}",
                    layout.index(*id),
                    r.key,
                    layout.part(r.part_position)
                ));
            }
            Some(&len) if r.end() > len => {
                bounds_failure.get_or_insert(format!(
                    "{}: key {} ends at {} past {} of {len} bytes",
                    layout.index(*id),
                    r.key,
                    r.end(),
                    layout.part(r.part_position)
                ));
            }
            Some(_) => {
                if let Err(e) = archive.read_content(r) {
                    content_failure.get_or_insert(format!(
                        "{}: key {}: {e}",
                        layout.index(*id),
                        r.key
                    ));
                }
            }
        }
    }
    report.record("record-bounds", bounds_failure);
    report.record("content-frames", content_failure);

    let names_path = layout.names();
    let names_failure = match backend
        .read_all(&names_path)
        .and_then(|b| decode_names(&b).map_err(|e| e.in_object(names_path.as_str())))
    {
        Err(e) => Some(e.to_string()),
        Ok(names) => check_names(archive, &names, &records),
    };
    report.record("names", names_failure);
    Ok(report)
}

fn check_names(
    archive: &Archive,
    names: &[String],
    records: &[(BucketId, MetadataRecord)],
) -> Option<String> {
    if names.len() as u64 != archive.manifest.file_count {
        return Some(format!(
            "{} names, manifest counts {} files",
            names.len(),
            archive.manifest.file_count
        ));
    }
    let by_key: HashMap<FileKey, &MetadataRecord> =
        records.iter().map(|(_, r)| (r.key, r)).collect();
    if by_key.len() != names.len() {
        return Some(format!(
            "{} names for {} records",
            names.len(),
            by_key.len()
        ));
    }
    for name in names {
        let key = name_hash(name);
        let Some(stored) = by_key.get(&key) else {
            return Some(format!("{name:?} has no record"));
        };
        match archive.get_metadata(name) {
            Ok(Some(found)) if found == **stored => {}
            Ok(other) => return Some(format!("lookup of {name:?} returned {other:?}")),
            Err(e) => return Some(format!("lookup of {name:?}: {e}")),
        }
    }
    None
}
