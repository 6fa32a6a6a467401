//! Content frames: `original_size u32 BE | payload`, where the payload is the
//! file content passed through the archive's codec.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const FRAME_HEADER_LEN: usize = 4;

// LZ4 cannot expand input by more than this factor.
const LZ4_MAX_RATIO: u64 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Codec {
    #[default]
    Identity,
    Lz4Block,
}

impl Codec {
    pub fn id(self) -> u8 {
        match self {
            Codec::Identity => 0,
            Codec::Lz4Block => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(Codec::Identity),
            1 => Some(Codec::Lz4Block),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Codec::Identity => "identity",
            Codec::Lz4Block => "lz4",
        }
    }
}

impl fmt::Display for Codec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Codec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "none" => Ok(Codec::Identity),
            "lz4" => Ok(Codec::Lz4Block),
            other => Err(Error::InvalidConfig(format!("unknown codec {other:?}"))),
        }
    }
}

pub fn encode_frame(codec: Codec, content: &[u8]) -> Result<Vec<u8>> {
    let original = u32::try_from(content.len())
        .map_err(|_| Error::InvalidConfig(format!("file of {} bytes too large", content.len())))?;
    let mut frame = Vec::with_capacity(FRAME_HEADER_LEN + content.len());
    frame.extend_from_slice(&original.to_be_bytes());
    match codec {
        Codec::Identity => frame.extend_from_slice(content),
        Codec::Lz4Block => frame.extend_from_slice(&lz4_flex::block::compress(content)),
    }
    if u32::try_from(frame.len()).is_err() {
        return Err(Error::InvalidConfig("encoded frame exceeds 4 GiB".into()));
    }
    Ok(frame)
}

/// Decodes a frame, describing what is wrong on failure.
pub fn decode_frame(codec: Codec, frame: &[u8]) -> std::result::Result<Vec<u8>, String> {
    if frame.len() < FRAME_HEADER_LEN {
        return Err(format!("frame of {} bytes has no header", frame.len()));
    }
    let original = u32::from_be_bytes(frame[..4].try_into().unwrap()) as usize;
    let payload = &frame[FRAME_HEADER_LEN..];
    match codec {
        Codec::Identity => {
            if payload.len() != original {
                return Err(format!(
                    "payload of {} bytes, header says {original}",
                    payload.len()
                ));
            }
            Ok(payload.to_vec())
        }
        Codec::Lz4Block => {
            if original as u64 > (payload.len() as u64 + 16) * LZ4_MAX_RATIO {
                return Err(format!("implausible original size {original}"));
            }
            let out =
                lz4_flex::block::decompress(payload, original).map_err(|e| format!("lz4: {e}"))?;
            if out.len() != original {
                return Err(format!(
                    "decoded {} bytes, header says {original}",
                    out.len()
                ));
            }
            Ok(out)
        }
    }
}
