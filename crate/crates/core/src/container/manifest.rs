//! `_manifest`: canonical JSON holding the configuration, part roster and
//! directory shape. It is the commit point for directory changes.

use serde::{Deserialize, Serialize};

use super::frame::Codec;
use super::record::RECORD_LEN;
use crate::directory::DirectoryShape;
use crate::error::{Error, Result};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// Default size limit of one index file.
pub const DEFAULT_BLOCK_SIZE: u64 = 128 * 1024 * 1024;

pub const DEFAULT_BUCKET_CAPACITY: u64 = 200_000;

pub const DEFAULT_WORKERS: usize = 2;

/// Records that fit in one index file of `block_size` bytes.
pub const fn max_records_per_index(block_size: u64) -> u64 {
    block_size / RECORD_LEN as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveConfig {
    pub workers: usize,
    pub bucket_capacity: u64,
    /// Size at which a worker moves on to a fresh part; 0 disables rotation.
    pub max_part_size: u64,
    pub codec: Codec,
    pub block_size: u64,
}

impl Default for ArchiveConfig {
    fn default() -> Self {
        Self {
            workers: DEFAULT_WORKERS,
            bucket_capacity: DEFAULT_BUCKET_CAPACITY,
            max_part_size: 0,
            codec: Codec::Identity,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }
}

impl ArchiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 || self.workers > 1024 {
            return Err(Error::InvalidConfig(format!(
                "worker count {} outside 1..=1024",
                self.workers
            )));
        }
        if self.bucket_capacity < 1 {
            return Err(Error::InvalidConfig(
                "bucket capacity must be at least 1".into(),
            ));
        }
        let limit = max_records_per_index(self.block_size);
        if self.bucket_capacity > limit {
            return Err(Error::InvalidConfig(format!(
                "bucket capacity {} exceeds {limit} records per {}-byte block",
                self.bucket_capacity, self.block_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartEntry {
    pub id: u32,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveManifest {
    pub format_version: u32,
    pub codec: u8,
    pub bucket_capacity: u64,
    pub block_size: u64,
    pub max_part_size: u64,
    pub workers: u32,
    pub parts: Vec<PartEntry>,
    /// Part each merge worker appends to next.
    pub active_parts: Vec<u32>,
    pub directory: DirectoryShape,
    pub file_count: u64,
}

impl ArchiveManifest {
    pub fn codec(&self) -> Result<Codec> {
        Codec::from_id(self.codec)
            .ok_or_else(|| Error::format(0, format!("unknown codec id {}", self.codec)))
    }

    pub fn config(&self) -> Result<ArchiveConfig> {
        Ok(ArchiveConfig {
            workers: self.workers as usize,
            bucket_capacity: self.bucket_capacity,
            max_part_size: self.max_part_size,
            codec: self.codec()?,
            block_size: self.block_size,
        })
    }

    /// Serializes with object keys sorted and no insignificant whitespace.
    pub fn to_bytes(&self) -> Vec<u8> {
        let value = serde_json::to_value(self).expect("manifest serializes");
        serde_json::to_vec(&value).expect("value serializes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let m: Self = serde_json::from_slice(bytes)
            .map_err(|e| Error::format(e.column() as u64, format!("manifest: {e}")))?;
        if m.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::format(
                0,
                format!("unsupported manifest version {}", m.format_version),
            ));
        }
        m.codec()?;
        if m.active_parts.is_empty() || m.active_parts.len() != m.workers as usize {
            return Err(Error::format(
                0,
                "active part list does not match worker count",
            ));
        }
        Ok(m)
    }
}
