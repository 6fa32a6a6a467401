//! Fixed-length bit vector over 64-bit words, bit `i` at word `i / 64`,
//! position `i % 64` (least-significant first).

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct BitVec {
    words: Vec<u64>,
    len: u64,
}

impl BitVec {
    pub(crate) fn zeroed(len: u64) -> Self {
        Self {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub(crate) fn len(&self) -> u64 {
        self.len
    }

    #[inline]
    pub(crate) fn get(&self, pos: u64) -> bool {
        debug_assert!(pos < self.len);
        (self.words[(pos / 64) as usize] >> (pos % 64)) & 1 == 1
    }

    #[inline]
    pub(crate) fn set(&mut self, pos: u64) {
        debug_assert!(pos < self.len);
        self.words[(pos / 64) as usize] |= 1 << (pos % 64);
    }

    /// Reads `width` (<= 64) bits starting at `pos`.
    #[inline]
    pub(crate) fn get_bits(&self, pos: u64, width: u32) -> u64 {
        if width == 0 {
            return 0;
        }
        debug_assert!(width <= 64 && pos + width as u64 <= self.len);
        let word = (pos / 64) as usize;
        let shift = (pos % 64) as u32;
        let mut value = self.words[word] >> shift;
        if shift + width > 64 {
            value |= self.words[word + 1] << (64 - shift);
        }
        value & mask(width)
    }

    /// Writes the low `width` bits of `value` at `pos`; the target range must be zero.
    #[inline]
    pub(crate) fn put_bits(&mut self, pos: u64, width: u32, value: u64) {
        if width == 0 {
            return;
        }
        debug_assert!(width <= 64 && pos + width as u64 <= self.len);
        let value = value & mask(width);
        let word = (pos / 64) as usize;
        let shift = (pos % 64) as u32;
        self.words[word] |= value << shift;
        if shift + width > 64 {
            self.words[word + 1] |= value >> (64 - shift);
        }
    }

    pub(crate) fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Serialized payload: `ceil(len / 8)` bytes, bit `i` in byte `i / 8` at
    /// position `i % 8`.
    pub(crate) fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(bytes_for(self.len));
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(bytes_for(self.len));
        out
    }

    /// Inverse of [`BitVec::to_bytes`]. Returns `None` if any padding bit past
    /// `len` is set.
    pub(crate) fn from_bytes(bytes: &[u8], len: u64) -> Option<Self> {
        debug_assert_eq!(bytes.len(), bytes_for(len));
        let mut words = vec![0u64; words_for(len)];
        for (i, chunk) in bytes.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            words[i] = u64::from_le_bytes(buf);
        }
        let tail = len % 64;
        if tail != 0 {
            if let Some(last) = words.last() {
                if last >> tail != 0 {
                    return None;
                }
            }
        }
        Some(Self { words, len })
    }

    /// Position of the first zero bit at or after `from`, if any.
    pub(crate) fn next_zero(&self, from: u64) -> Option<u64> {
        let mut pos = from;
        while pos < self.len {
            let word = (pos / 64) as usize;
            let shift = pos % 64;
            let inverted = !self.words[word] >> shift;
            if inverted != 0 {
                let found = pos + inverted.trailing_zeros() as u64;
                return (found < self.len).then_some(found);
            }
            pos += 64 - shift;
        }
        None
    }

    /// Position of the `k`-th (0-based) one at or after `from`.
    pub(crate) fn select_one_from(&self, from: u64, mut k: u64) -> Option<u64> {
        self.select_from(from, &mut k, |w| w)
    }

    /// Position of the `k`-th (0-based) zero at or after `from`.
    pub(crate) fn select_zero_from(&self, from: u64, mut k: u64) -> Option<u64> {
        self.select_from(from, &mut k, |w| !w)
    }

    fn select_from(&self, from: u64, k: &mut u64, view: impl Fn(u64) -> u64) -> Option<u64> {
        if from >= self.len {
            return None;
        }
        let mut word_idx = (from / 64) as usize;
        let mut bits = view(self.words[word_idx]) & (u64::MAX << (from % 64));
        loop {
            let count = bits.count_ones() as u64;
            if *k < count {
                let pos = word_idx as u64 * 64 + select_in_word(bits, *k as u32) as u64;
                return (pos < self.len).then_some(pos);
            }
            *k -= count;
            word_idx += 1;
            if word_idx >= self.words.len() {
                return None;
            }
            bits = view(self.words[word_idx]);
        }
    }
}

#[inline]
pub(crate) fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

pub(crate) fn words_for(bits: u64) -> usize {
    bits.div_ceil(64) as usize
}

pub(crate) fn bytes_for(bits: u64) -> usize {
    bits.div_ceil(8) as usize
}

/// Position of the `k`-th set bit of `word`.
#[inline]
fn select_in_word(mut word: u64, k: u32) -> u32 {
    for _ in 0..k {
        word &= word - 1;
    }
    word.trailing_zeros()
}
