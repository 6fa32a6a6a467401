//! Sequence-style baseline: every file is a frame in one `data` object and a
//! lookup scans frames from the start.
//!
//! Two small objects, `_masterindex` and `_index`, are read in full before
//! every scan. They stand in for the two index levels of a Hadoop archive,
//! whose lookup cost this container approximates as a fixed two-read
//! overhead on top of a linear scan.

use packhash_core::storage::{with_phase, Phase};
use packhash_core::{Backend, ObjectPath, Result};

use crate::corpus::CorpusFile;
use crate::stream::{encode_frame, FrameStream};

pub struct ScanContainer {
    root: ObjectPath,
    data: ObjectPath,
    data_len: u64,
}

impl ScanContainer {
    pub fn build(backend: &dyn Backend, root: &ObjectPath, files: &[CorpusFile]) -> Result<Self> {
        let data = root.join("data")?;
        backend.create(&data)?;
        let mut frame = Vec::new();
        let mut data_len = 0;
        for f in files {
            frame.clear();
            encode_frame(&f.name, &f.content, &mut frame);
            data_len = backend.append(&data, &frame)?;
        }
        let mut summary = Vec::with_capacity(16);
        summary.extend_from_slice(&(files.len() as u64).to_be_bytes());
        summary.extend_from_slice(&data_len.to_be_bytes());
        for name in ["_masterindex", "_index"] {
            let p = root.join(name)?;
            backend.create(&p)?;
            backend.append(&p, &summary)?;
        }
        Ok(Self {
            root: root.clone(),
            data,
            data_len,
        })
    }

    pub fn get(&self, backend: &dyn Backend, name: &str) -> Result<Option<Vec<u8>>> {
        with_phase(Phase::Metadata, || -> Result<()> {
            for object in ["_masterindex", "_index"] {
                backend.read_all(&self.root.join(object)?)?;
            }
            Ok(())
        })?;
        with_phase(Phase::Content, || {
            let mut stream = FrameStream::new(backend, &self.data, 0, self.data_len);
            while let Some(frame) = stream.next_frame()? {
                if frame.name == name {
                    return Ok(Some(frame.content));
                }
            }
            Ok(None)
        })
    }
}
