use crate::error::{Error, Result};
use crate::hashing::FileKey;

/// Encoded size of one [`MetadataRecord`].
pub const RECORD_LEN: usize = 24;

/// Fixed-size index entry locating one file's frame inside a part object.
///
/// Encoded big-endian as `key u64 | part_position u32 | offset u64 | stored_size u32`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MetadataRecord {
    pub key: FileKey,
    pub part_position: u32,
    pub offset: u64,
    /// Length of the whole on-disk frame, header included.
    pub stored_size: u32,
}

impl MetadataRecord {
    pub fn encode(&self) -> [u8; RECORD_LEN] {
        let mut out = [0u8; RECORD_LEN];
        out[0..8].copy_from_slice(&self.key.0.to_be_bytes());
        out[8..12].copy_from_slice(&self.part_position.to_be_bytes());
        out[12..20].copy_from_slice(&self.offset.to_be_bytes());
        out[20..24].copy_from_slice(&self.stored_size.to_be_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bytes: &[u8; RECORD_LEN] = bytes.try_into().map_err(|_| {
            Error::format(
                0,
                format!("record needs {RECORD_LEN} bytes, got {}", bytes.len()),
            )
        })?;
        Ok(Self {
            key: FileKey(u64::from_be_bytes(bytes[0..8].try_into().unwrap())),
            part_position: u32::from_be_bytes(bytes[8..12].try_into().unwrap()),
            offset: u64::from_be_bytes(bytes[12..20].try_into().unwrap()),
            stored_size: u32::from_be_bytes(bytes[20..24].try_into().unwrap()),
        })
    }

    /// Decodes every complete record in `bytes`; returns them with the number
    /// of trailing bytes that did not form a whole record.
    pub fn decode_all(bytes: &[u8]) -> (Vec<Self>, usize) {
        let chunks = bytes.chunks_exact(RECORD_LEN);
        let rest = chunks.remainder().len();
        let records = chunks
            .map(|c| Self::decode(c).expect("exact chunk"))
            .collect();
        (records, rest)
    }

    pub fn end(&self) -> u64 {
        self.offset + self.stored_size as u64
    }
}
