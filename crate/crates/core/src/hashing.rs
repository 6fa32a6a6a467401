//! Name-to-key hashing and key-to-slot routing.
//!
//! Every on-disk structure identifies a file by the 64-bit FNV-1a digest of
//! its name's UTF-8 bytes. Directory routing reads the low-order bits of that
//! digest, so growing the directory by one bit never moves a key to a slot
//! that disagrees with its previous slot on the shared suffix.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FNV_OFFSET_BASIS: u64 = 14_695_981_039_346_656_037;
pub const FNV_PRIME: u64 = 1_099_511_628_211;

/// Fixed-width identity of an archived file.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct FileKey(pub u64);

impl FileKey {
    pub const fn value(self) -> u64 {
        self.0
    }
}

impl fmt::Display for FileKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#018x}", self.0)
    }
}

impl From<u64> for FileKey {
    fn from(value: u64) -> Self {
        FileKey(value)
    }
}

/// FNV-1a 64 over raw bytes.
pub const fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET_BASIS;
    let mut i = 0;
    while i < bytes.len() {
        hash ^= bytes[i] as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
        i += 1;
    }
    hash
}

pub fn name_hash(name: &str) -> FileKey {
    FileKey(fnv1a_64(name.as_bytes()))
}

/// Mask with the low `bits` bits set.
#[inline]
pub(crate) const fn low_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Directory slot of `key` at `global_depth`: its low `global_depth` bits.
pub fn bucket_slot(key: FileKey, global_depth: u32) -> Result<u64> {
    if global_depth > 64 {
        return Err(Error::InvalidDepth(global_depth));
    }
    Ok(key.0 & low_mask(global_depth))
}
