//! Index file layout: the serialized [`MonotoneIndex`] (Υ bytes) followed by
//! the bucket's records, sorted by key, 24 bytes each.

use super::record::{MetadataRecord, RECORD_LEN};
use crate::error::{Error, Result};
use crate::hashing::FileKey;
use crate::monotone::MonotoneIndex;

pub fn encode_index_file(records: &[MetadataRecord]) -> Result<Vec<u8>> {
    let keys: Vec<FileKey> = records.iter().map(|r| r.key).collect();
    let index = MonotoneIndex::build(&keys)?;
    let mut out = Vec::with_capacity(index.serialized_len() as usize + records.len() * RECORD_LEN);
    index.write_to(&mut out);
    for r in records {
        out.extend_from_slice(&r.encode());
    }
    Ok(out)
}

/// A fully decoded index file.
#[derive(Debug, Clone)]
pub struct IndexFile {
    pub index: MonotoneIndex,
    pub upsilon: u64,
    pub records: Vec<MetadataRecord>,
}

/// Decodes and cross-checks an index file: the body must hold exactly one
/// record per index entry, in rank order.
pub fn decode_index_file(bytes: &[u8]) -> Result<IndexFile> {
    let (index, upsilon) = MonotoneIndex::from_bytes(bytes)?;
    let body = &bytes[upsilon..];
    if body.len() % RECORD_LEN != 0 || (body.len() / RECORD_LEN) as u64 != index.len() {
        return Err(Error::format(
            upsilon as u64,
            format!(
                "body of {} bytes does not hold {} records",
                body.len(),
                index.len()
            ),
        ));
    }
    let (records, _) = MetadataRecord::decode_all(body);
    for (rank, (record, key)) in records.iter().zip(index.iter()).enumerate() {
        if record.key != key {
            return Err(Error::format(
                (upsilon + rank * RECORD_LEN) as u64,
                format!("record {rank} has key {}, index expects {key}", record.key),
            ));
        }
    }
    Ok(IndexFile {
        index,
        upsilon: upsilon as u64,
        records,
    })
}
