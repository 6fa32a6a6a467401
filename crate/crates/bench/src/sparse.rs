//! Map-style baseline: frames sorted by name in a `data` object, plus an
//! `index` object holding the name and offset of every 128th frame.
//!
//! The sparse index is loaded once at open, like the resident headers of
//! the main container. A lookup binary-searches it and scans forward
//! through at most one 128-frame window.

use packhash_core::storage::{with_phase, Phase};
use packhash_core::{Backend, Error, FormatError, ObjectPath, Result};

use crate::corpus::CorpusFile;
use crate::stream::{encode_frame, FrameStream};

pub const SAMPLE_INTERVAL: usize = 128;

pub struct SparseContainer {
    data: ObjectPath,
    data_len: u64,
    samples: Vec<(String, u64)>,
}

impl SparseContainer {
    pub fn build(backend: &dyn Backend, root: &ObjectPath, files: &[CorpusFile]) -> Result<Self> {
        let mut sorted: Vec<&CorpusFile> = files.iter().collect();
        sorted.sort_by(|a, b| a.name.cmp(&b.name));
        let data = root.join("data")?;
        let index = root.join("index")?;
        backend.create(&data)?;
        backend.create(&index)?;
        let mut frame = Vec::new();
        let mut entry = Vec::new();
        let mut offset: u64 = 0;
        for (i, f) in sorted.iter().enumerate() {
            if i % SAMPLE_INTERVAL == 0 {
                entry.extend_from_slice(&(f.name.len() as u32).to_be_bytes());
                entry.extend_from_slice(f.name.as_bytes());
                entry.extend_from_slice(&offset.to_be_bytes());
            }
            frame.clear();
            encode_frame(&f.name, &f.content, &mut frame);
            offset = backend.append(&data, &frame)?;
        }
        backend.append(&index, &entry)?;
        Self::open(backend, root)
    }

    /// Loads the sparse index into memory.
    pub fn open(backend: &dyn Backend, root: &ObjectPath) -> Result<Self> {
        let data = root.join("data")?;
        let index = root.join("index")?;
        let bytes = backend.read_all(&index)?;
        let bad = |offset: usize| {
            Error::Format(FormatError {
                object: Some(index.to_string()),
                offset: offset as u64,
                reason: "truncated sample".into(),
            })
        };
        let mut samples = Vec::new();
        let mut pos = 0;
        while pos < bytes.len() {
            let len_bytes = bytes.get(pos..pos + 4).ok_or_else(|| bad(pos))?;
            let len = u32::from_be_bytes(len_bytes.try_into().unwrap()) as usize;
            let name = bytes.get(pos + 4..pos + 4 + len).ok_or_else(|| bad(pos))?;
            let off = bytes
                .get(pos + 4 + len..pos + 12 + len)
                .ok_or_else(|| bad(pos))?;
            samples.push((
                String::from_utf8_lossy(name).into_owned(),
                u64::from_be_bytes(off.try_into().unwrap()),
            ));
            pos += 12 + len;
        }
        Ok(Self {
            data_len: backend.length(&data)?,
            data,
            samples,
        })
    }

    pub fn get(&self, backend: &dyn Backend, name: &str) -> Result<Option<Vec<u8>>> {
        let after = self.samples.partition_point(|(s, _)| s.as_str() <= name);
        if after == 0 {
            return Ok(None);
        }
        let start = self.samples[after - 1].1;
        let end = self.samples.get(after).map_or(self.data_len, |s| s.1);
        with_phase(Phase::Content, || {
            let mut stream = FrameStream::new(backend, &self.data, start, end);
            while let Some(frame) = stream.next_frame()? {
                match frame.name.as_str().cmp(name) {
                    std::cmp::Ordering::Less => {}
                    std::cmp::Ordering::Equal => return Ok(Some(frame.content)),
                    std::cmp::Ordering::Greater => break,
                }
            }
            Ok(None)
        })
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }
}
