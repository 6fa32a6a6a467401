//! Sequential buffered reads and the frame format shared by both baselines:
//! `name_len u32 | name | size u64 | content`, all big-endian.

use packhash_core::{Backend, Error, FormatError, ObjectPath, Result};

/// Read buffer size used while scanning, in bytes.
pub const SCAN_CHUNK: u64 = 64 * 1024;

pub fn encode_frame(name: &str, content: &[u8], out: &mut Vec<u8>) {
    out.extend_from_slice(&(name.len() as u32).to_be_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(content.len() as u64).to_be_bytes());
    out.extend_from_slice(content);
}

pub struct Frame {
    pub name: String,
    pub content: Vec<u8>,
}

/// Reads `[start, end)` of an object front to back in `SCAN_CHUNK` pieces.
pub struct FrameStream<'a> {
    backend: &'a dyn Backend,
    path: &'a ObjectPath,
    pos: u64,
    end: u64,
    buf: Vec<u8>,
    consumed: usize,
}

impl<'a> FrameStream<'a> {
    pub fn new(backend: &'a dyn Backend, path: &'a ObjectPath, start: u64, end: u64) -> Self {
        Self {
            backend,
            path,
            pos: start,
            end,
            buf: Vec::new(),
            consumed: 0,
        }
    }

    fn available(&self) -> usize {
        self.buf.len() - self.consumed
    }

    /// Buffers at least `n` unread bytes; false at end of range.
    fn ensure(&mut self, n: usize) -> Result<bool> {
        while self.available() < n {
            if self.pos >= self.end {
                return Ok(false);
            }
            let len = SCAN_CHUNK.min(self.end - self.pos);
            let chunk = self.backend.read_range(self.path, self.pos, len)?;
            self.pos += len;
            self.buf.drain(..self.consumed);
            self.consumed = 0;
            self.buf.extend_from_slice(&chunk);
        }
        Ok(true)
    }

    fn take(&mut self, n: usize) -> &[u8] {
        let s = &self.buf[self.consumed..self.consumed + n];
        self.consumed += n;
        s
    }

    /// Next whole frame, or `None` at the end of the range.
    pub fn next_frame(&mut self) -> Result<Option<Frame>> {
        if !self.ensure(4)? {
            return Ok(None);
        }
        let object = self.path.to_string();
        let offset = self.pos - self.available() as u64;
        let truncated = || {
            Error::Format(FormatError {
                object: Some(object.clone()),
                offset,
                reason: "truncated frame".into(),
            })
        };
        let name_len = u32::from_be_bytes(self.take(4).try_into().unwrap()) as usize;
        if !self.ensure(name_len + 8)? {
            return Err(truncated());
        }
        let name = String::from_utf8_lossy(self.take(name_len)).into_owned();
        let size = u64::from_be_bytes(self.take(8).try_into().unwrap()) as usize;
        if !self.ensure(size)? {
            return Err(truncated());
        }
        let content = self.take(size).to_vec();
        Ok(Some(Frame { name, content }))
    }
}
