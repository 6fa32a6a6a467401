//! Deterministic synthetic corpora.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct CorpusFile {
    pub name: String,
    pub content: Vec<u8>,
}

/// `n` files with sizes uniform in `sizes`. The same seed always yields the
/// same corpus, and a corpus of `n` is a prefix of the corpus of `2n`.
pub fn generate_corpus(n: usize, sizes: RangeInclusive<usize>, seed: u64) -> Vec<CorpusFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(sizes.clone());
            let mut content = vec![0u8; len];
            rng.fill(&mut content[..]);
            CorpusFile {
                name: format!("small/{i:08}.bin"),
                content,
            }
        })
        .collect()
}

/// Parses `1KiB-64KiB`, `0-1MiB` or `512-4096` into a byte range.
pub fn parse_size_range(text: &str) -> Option<RangeInclusive<usize>> {
    let (lo, hi) = text.split_once('-')?;
    let (lo, hi) = (parse_size(lo)?, parse_size(hi)?);
    (lo <= hi).then_some(lo..=hi)
}

pub fn parse_size(text: &str) -> Option<usize> {
    let text = text.trim();
    let split = text
        .find(|c: char| !c.is_ascii_digit())
        .unwrap_or(text.len());
    let (digits, unit) = text.split_at(split);
    let value: usize = digits.parse().ok()?;
    let scale = match unit.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1,
        "k" | "kb" | "kib" => 1 << 10,
        "m" | "mb" | "mib" => 1 << 20,
        "g" | "gb" | "gib" => 1 << 30,
        _ => return None,
    };
    value.checked_mul(scale)
}
