//! The `_names` roster: repeated `len u32 BE | UTF-8 bytes`.

use crate::error::{Error, Result};

pub fn encode_name(name: &str, out: &mut Vec<u8>) {
    out.extend_from_slice(&(name.len() as u32).to_be_bytes());
    out.extend_from_slice(name.as_bytes());
}

pub fn decode_names(bytes: &[u8]) -> Result<Vec<String>> {
    let (names, consumed) = decode_prefix(bytes)?;
    if consumed != bytes.len() {
        return Err(Error::format(
            consumed as u64,
            format!("truncated entry: {} trailing bytes", bytes.len() - consumed),
        ));
    }
    Ok(names)
}

/// Decodes whole entries until the first truncated or undecodable one;
/// returns them with the number of bytes consumed.
pub fn decode_names_lenient(bytes: &[u8]) -> (Vec<String>, usize) {
    let mut names = Vec::new();
    let mut pos = 0;
    while let Some(Ok((name, next))) = entry_at(bytes, pos) {
        names.push(name);
        pos = next;
    }
    (names, pos)
}

fn decode_prefix(bytes: &[u8]) -> Result<(Vec<String>, usize)> {
    let mut names = Vec::new();
    let mut pos = 0;
    while let Some(entry) = entry_at(bytes, pos) {
        let (name, next) = entry?;
        names.push(name);
        pos = next;
    }
    Ok((names, pos))
}

fn entry_at(bytes: &[u8], pos: usize) -> Option<Result<(String, usize)>> {
    let header = bytes.get(pos..pos + 4)?;
    let len = u32::from_be_bytes(header.try_into().unwrap()) as usize;
    let start = pos + 4;
    let body = bytes.get(start..start.checked_add(len)?)?;
    Some(
        String::from_utf8(body.to_vec())
            .map(|s| (s, start + len))
            .map_err(|e| Error::format(start as u64, format!("name is not UTF-8: {e}"))),
    )
}
