//! Order-preserving minimal perfect hash over a sorted key set.
//!
//! The index stores the bucket's strictly increasing keys with Elias–Fano
//! encoding: each key is split into `low_width` low bits, packed verbatim,
//! and a high part written in unary into a bit vector where key `i` sets bit
//! `high(i) + i`. Ranking a key finds the run of ones belonging to its high
//! part and searches the packed low bits inside that run, so membership is
//! exact and the returned rank is the key's position in sorted order.
//!
//! Serialized layout (integers big-endian):
//!
//! ```text
//! "HPFM" | version u16 | n u64 | low_width u8 | high_len u64
//!        | high bits (ceil(high_len/8) bytes) | low bits (ceil(n*low_width/8) bytes)
//!        | sample_count u32 | sample_count * u64
//! ```
//!
//! Bit payloads put stream bit `i` in byte `i / 8` at bit position `i % 8`.
//! Low value `i` occupies stream bits `[i*low_width, (i+1)*low_width)`, least
//! significant bit first. Sample `j` is the position in the high bits of the
//! one belonging to key `512 * j`.

mod bits;

use bits::{bytes_for, mask, BitVec};

use crate::error::{Error, Result};
use crate::hashing::FileKey;

pub const MAGIC: [u8; 4] = *b"HPFM";
pub const FORMAT_VERSION: u16 = 1;
/// One select sample per this many set bits.
pub const SELECT_SAMPLE_RATE: u64 = 512;

const FIXED_HEADER_LEN: usize = 4 + 2 + 8 + 1 + 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotoneIndex {
    len: u64,
    low_width: u32,
    high: BitVec,
    low: BitVec,
    samples: Vec<u64>,
}

/// Low-bit width for `n` keys whose maximum is `max_key`.
pub fn low_width_for(n: u64, max_key: u64) -> u32 {
    if n == 0 {
        return 0;
    }
    let universe = max_key as u128 + 1;
    let quotient = (universe / n as u128).max(1);
    quotient.ilog2()
}

#[inline]
fn high_part(key: u64, low_width: u32) -> u64 {
    key.checked_shr(low_width).unwrap_or(0)
}

impl MonotoneIndex {
    /// Builds the index over `keys`, which must be strictly increasing.
    pub fn build(keys: &[FileKey]) -> Result<Self> {
        for (i, pair) in keys.windows(2).enumerate() {
            if pair[1] == pair[0] {
                return Err(Error::DuplicateKey(pair[1]));
            }
            if pair[1] < pair[0] {
                return Err(Error::NotSorted { position: i + 1 });
            }
        }
        let n = keys.len() as u64;
        let Some(max_key) = keys.last().map(|k| k.0) else {
            return Ok(Self::empty());
        };
        let low_width = low_width_for(n, max_key);
        let high_len = high_part(max_key, low_width) + n;

        let mut high = BitVec::zeroed(high_len);
        let mut low = BitVec::zeroed(n * low_width as u64);
        for (i, key) in keys.iter().enumerate() {
            let i = i as u64;
            high.set(high_part(key.0, low_width) + i);
            low.put_bits(i * low_width as u64, low_width, key.0);
        }
        let samples = sample_ones(&high, n);
        Ok(Self {
            len: n,
            low_width,
            high,
            low,
            samples,
        })
    }

    fn empty() -> Self {
        Self {
            len: 0,
            low_width: 0,
            high: BitVec::default(),
            low: BitVec::default(),
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn low_width(&self) -> u32 {
        self.low_width
    }

    #[inline]
    fn low_at(&self, i: u64) -> u64 {
        self.low.get_bits(i * self.low_width as u64, self.low_width)
    }

    /// Position of the `i`-th one in the high bits.
    fn select_one(&self, i: u64) -> u64 {
        let sample = (i / SELECT_SAMPLE_RATE) as usize;
        let from = self.samples[sample];
        self.high
            .select_one_from(from, i - sample as u64 * SELECT_SAMPLE_RATE)
            .expect("high bits hold one set bit per key")
    }

    /// Rank of `key` among the indexed keys, or `None` when it is not a member.
    pub fn rank(&self, key: FileKey) -> Option<u64> {
        if self.len == 0 {
            return None;
        }
        let high = high_part(key.0, self.low_width);
        let zeros = self.high.len() - self.len;
        if high > zeros {
            return None;
        }
        let start = if high == 0 {
            0
        } else {
            // the run for `high` starts right after the (high-1)-th zero
            let target = high - 1;
            let zeros_before = |j: usize| self.samples[j] - j as u64 * SELECT_SAMPLE_RATE;
            let (mut lo, mut hi) = (0usize, self.samples.len());
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if zeros_before(mid) <= target {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            let (from, zeros_before) = match lo.checked_sub(1) {
                Some(j) => (self.samples[j], zeros_before(j)),
                None => (0, 0),
            };
            self.high.select_zero_from(from, target - zeros_before)? + 1
        };
        let end = self.high.next_zero(start).unwrap_or(self.high.len());
        let first = start - high;
        let last = end - high;
        let wanted = key.0 & mask(self.low_width);
        // lows are strictly increasing inside one high run
        let (mut lo, mut hi) = (first, last);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            match self.low_at(mid).cmp(&wanted) {
                std::cmp::Ordering::Equal => return Some(mid),
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
            }
        }
        None
    }

    /// Key stored at rank `i`.
    pub fn get(&self, i: u64) -> Option<FileKey> {
        if i >= self.len {
            return None;
        }
        let high = self.select_one(i) - i;
        let high_bits = high.checked_shl(self.low_width).unwrap_or(0);
        Some(FileKey(high_bits | self.low_at(i)))
    }

    pub fn iter(&self) -> impl Iterator<Item = FileKey> + '_ {
        let mut pos = 0u64;
        (0..self.len).map(move |i| {
            while !self.high.get(pos) {
                pos += 1;
            }
            let high = pos - i;
            pos += 1;
            FileKey(high.checked_shl(self.low_width).unwrap_or(0) | self.low_at(i))
        })
    }

    /// Bits used by the high and low arrays, excluding the fixed header and
    /// the select samples.
    pub fn payload_bits(&self) -> u64 {
        self.high.len() + self.low.len()
    }

    /// Elias–Fano payload bits per key; `None` for an empty index.
    pub fn bits_per_key(&self) -> Option<f64> {
        (self.len > 0).then(|| self.payload_bits() as f64 / self.len as f64)
    }

    /// Exact byte length of [`MonotoneIndex::to_bytes`].
    pub fn serialized_len(&self) -> u64 {
        (FIXED_HEADER_LEN
            + bytes_for(self.high.len())
            + bytes_for(self.low.len())
            + 4
            + 8 * self.samples.len()) as u64
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len() as usize);
        self.write_to(&mut out);
        out
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_be_bytes());
        out.extend_from_slice(&self.len.to_be_bytes());
        out.push(self.low_width as u8);
        out.extend_from_slice(&self.high.len().to_be_bytes());
        out.extend_from_slice(&self.high.to_bytes());
        out.extend_from_slice(&self.low.to_bytes());
        out.extend_from_slice(&(self.samples.len() as u32).to_be_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    }

    /// Parses an index from the front of `bytes`, returning it together with
    /// the number of bytes consumed. Trailing bytes are left untouched.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::format(0, format!("bad magic {magic:02x?}")));
        }
        let version = u16::from_be_bytes(cur.array("version")?);
        if version != FORMAT_VERSION {
            return Err(Error::format(4, format!("unsupported version {version}")));
        }
        let len = u64::from_be_bytes(cur.array("key count")?);
        let low_width = cur.array::<1>("low width")?[0] as u32;
        if low_width > 64 {
            return Err(Error::format(
                14,
                format!("low width {low_width} exceeds 64"),
            ));
        }
        let high_len = u64::from_be_bytes(cur.array("high length")?);
        if high_len < len || (len == 0 && (high_len != 0 || low_width != 0)) {
            return Err(Error::format(
                15,
                format!("high length {high_len} inconsistent with {len} keys"),
            ));
        }
        if len > 0 && high_part(u64::MAX, low_width) < high_len - len {
            return Err(Error::format(15, "high parts overflow 64-bit keys"));
        }

        let high_at = cur.pos as u64;
        let high_bytes = cur.take(checked_bytes(high_len, high_at)?, "high bits")?;
        let high = BitVec::from_bytes(high_bytes, high_len)
            .ok_or_else(|| Error::format(high_at, "nonzero padding in high bits"))?;
        let low_len = len
            .checked_mul(low_width as u64)
            .ok_or_else(|| Error::format(14, "low bit length overflows"))?;
        let low_at = cur.pos as u64;
        let low_bytes = cur.take(checked_bytes(low_len, low_at)?, "low bits")?;
        let low = BitVec::from_bytes(low_bytes, low_len)
            .ok_or_else(|| Error::format(low_at, "nonzero padding in low bits"))?;

        let count_at = cur.pos as u64;
        let sample_count = u32::from_be_bytes(cur.array("sample count")?) as u64;
        let expected_samples = len.div_ceil(SELECT_SAMPLE_RATE);
        if sample_count != expected_samples {
            return Err(Error::format(
                count_at,
                format!("expected {expected_samples} select samples, found {sample_count}"),
            ));
        }
        let mut samples = Vec::with_capacity(sample_count as usize);
        for _ in 0..sample_count {
            samples.push(u64::from_be_bytes(cur.array("select sample")?));
        }

        if high.count_ones() != len || (len > 0 && !high.get(high_len - 1)) {
            return Err(Error::format(
                high_at,
                "high bits do not encode the key count",
            ));
        }
        if samples != sample_ones(&high, len) {
            return Err(Error::format(
                count_at + 4,
                "select samples disagree with high bits",
            ));
        }
        let index = Self {
            len,
            low_width,
            high,
            low,
            samples,
        };
        let mut prev: Option<FileKey> = None;
        for (i, key) in index.iter().enumerate() {
            if prev.is_some_and(|p| p >= key) {
                return Err(Error::format(
                    low_at,
                    format!("decoded keys not strictly increasing at rank {i}"),
                ));
            }
            prev = Some(key);
        }
        if let Some(max) = prev {
            if low_width_for(len, max.0) != low_width {
                return Err(Error::format(14, "low width is not canonical"));
            }
        }
        Ok((index, cur.pos))
    }
}

fn checked_bytes(bits: u64, at: u64) -> Result<usize> {
    usize::try_from(bits.div_ceil(8)).map_err(|_| Error::format(at, "bit payload too large"))
}

fn sample_ones(high: &BitVec, n: u64) -> Vec<u64> {
    let mut samples = Vec::with_capacity(n.div_ceil(SELECT_SAMPLE_RATE) as usize);
    let mut from = 0;
    for j in 0..n.div_ceil(SELECT_SAMPLE_RATE) {
        let skip = if j == 0 { 0 } else { SELECT_SAMPLE_RATE - 1 };
        let pos = high
            .select_one_from(from, skip)
            .expect("sample within key count");
        samples.push(pos);
        from = pos + 1;
    }
    samples
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::format(
                self.pos as u64,
                format!(
                    "truncated {what}: need {n} bytes, {} left",
                    self.bytes.len() - self.pos
                ),
            )),
        }
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("length checked"))
    }
}
