//! Object names inside an archive folder and the atomic whole-object write.

use crate::directory::BucketId;
use crate::error::Result;
use crate::storage::{Backend, ObjectPath};

pub const MANIFEST: &str = "_manifest";
pub const NAMES: &str = "_names";
pub const TEMPORARY_INDEX: &str = "_temporaryIndex";
pub const PART_PREFIX: &str = "part-";
pub const INDEX_PREFIX: &str = "index-";
pub const TMP_SUFFIX: &str = ".tmp";

#[derive(Debug, Clone)]
pub struct Layout {
    root: ObjectPath,
}

impl Layout {
    pub fn new(root: ObjectPath) -> Self {
        Self { root }
    }

    pub fn root(&self) -> &ObjectPath {
        &self.root
    }

    fn child(&self, name: &str) -> ObjectPath {
        self.root.join(name).expect("fixed object names are valid")
    }

    pub fn manifest(&self) -> ObjectPath {
        self.child(MANIFEST)
    }

    pub fn names(&self) -> ObjectPath {
        self.child(NAMES)
    }

    pub fn temporary_index(&self) -> ObjectPath {
        self.child(TEMPORARY_INDEX)
    }

    pub fn part(&self, id: u32) -> ObjectPath {
        self.child(&format!("{PART_PREFIX}{id}"))
    }

    pub fn index(&self, id: BucketId) -> ObjectPath {
        self.child(&format!("{INDEX_PREFIX}{id}"))
    }

    /// Prefix matching every object of the archive.
    pub fn prefix(&self) -> String {
        format!("{}/", self.root)
    }

    pub fn list_prefix(&self, name_prefix: &str) -> String {
        format!("{}/{name_prefix}", self.root)
    }

    /// Ids of the `<prefix><id>` objects present, sorted. Temporary
    /// `.tmp` objects and anything else are ignored.
    pub fn list_numbered(&self, backend: &dyn Backend, prefix: &str) -> Result<Vec<u32>> {
        let mut ids: Vec<u32> = backend
            .list(&self.list_prefix(prefix))?
            .iter()
            .filter_map(|p| parse_numbered(p.file_name(), prefix))
            .collect();
        ids.sort_unstable();
        Ok(ids)
    }
}

/// Parses `index-12` as 12 for prefix `index-`; rejects leading zeros and
/// suffixes.
pub fn parse_numbered(name: &str, prefix: &str) -> Option<u32> {
    let digits = name.strip_prefix(prefix)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if digits.len() > 1 && digits.starts_with('0') {
        return None;
    }
    digits.parse().ok()
}

pub fn tmp_path(path: &ObjectPath) -> ObjectPath {
    ObjectPath::new(format!("{path}{TMP_SUFFIX}")).expect("suffix keeps path valid")
}

/// Writes a whole object through `<path>.tmp` and an atomic rename, so
/// readers see either the old or the new contents.
pub fn write_object(backend: &dyn Backend, path: &ObjectPath, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    if backend.exists(&tmp)? {
        backend.delete(&tmp)?;
    }
    backend.create(&tmp)?;
    backend.append(&tmp, bytes)?;
    backend.replace(&tmp, path)
}
