//! IO-metered comparison of the container against two baselines: a linear
//! scan container and a sorted container with a sparse index.
//!
//! All costs are counted by [`MeteredBackend`], never timed, except for the
//! build time column.

pub mod corpus;
pub mod report;
pub mod scan;
pub mod sparse;
mod stream;

use std::ops::RangeInclusive;
use std::sync::Arc;
use std::time::Instant;

use packhash_core::storage::{MemoryBackend, MeteredBackend, Phase};
use packhash_core::{Archive, ArchiveConfig, Backend, Error, InputFile, ObjectPath, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use corpus::{generate_corpus, parse_size_range, CorpusFile};
pub use report::{BenchReport, StrategyReport};
pub use scan::ScanContainer;
pub use sparse::SparseContainer;

pub const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n: usize,
    pub sizes: RangeInclusive<usize>,
    pub accesses: usize,
    /// Pin the container's index objects before measuring.
    pub pin: bool,
    pub seed: u64,
    pub archive: ArchiveConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            sizes: 1024..=64 * 1024,
            accesses: 100,
            pin: false,
            seed: DEFAULT_SEED,
            archive: ArchiveConfig::default(),
        }
    }
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    let corpus = generate_corpus(config.n, config.sizes.clone(), config.seed);
    run_on_corpus(&corpus, config)
}

/// Uniformly random corpus positions to access, fixed by `seed`.
pub fn access_plan(n: usize, accesses: usize, seed: u64) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(17) ^ 0xACCE55);
    (0..accesses).map(|_| rng.gen_range(0..n)).collect()
}

/// Builds all three containers over `corpus` on separate metered backends
/// and measures the same random accesses against each. Every access is
/// checked against the corpus.
pub fn run_on_corpus(corpus: &[CorpusFile], config: &BenchConfig) -> Result<BenchReport> {
    let plan = access_plan(corpus.len(), config.accesses, config.seed);
    let root = ObjectPath::new("bench")?;
    let mut strategies = Vec::new();

    {
        let (metered, backend) = fresh_backend();
        let start = Instant::now();
        let files = corpus
            .iter()
            .map(|f| InputFile::from_bytes(f.name.clone(), f.content.clone()))
            .collect();
        let archive = Archive::create(backend, &root, files, config.archive.clone())?;
        let build = start.elapsed();
        if config.pin {
            archive.pin_indexes()?;
        }
        archive.load_headers()?;
        strategies.push(measure("hpf", &metered, build, corpus, &plan, |name| {
            archive.get_file(name)
        })?);
    }
    {
        let (metered, backend) = fresh_backend();
        let start = Instant::now();
        let container = SparseContainer::build(backend.as_ref(), &root, corpus)?;
        let build = start.elapsed();
        strategies.push(measure("sparse", &metered, build, corpus, &plan, |name| {
            container.get(backend.as_ref(), name)
        })?);
    }
    {
        let (metered, backend) = fresh_backend();
        let start = Instant::now();
        let container = ScanContainer::build(backend.as_ref(), &root, corpus)?;
        let build = start.elapsed();
        strategies.push(measure("scan", &metered, build, corpus, &plan, |name| {
            container.get(backend.as_ref(), name)
        })?);
    }

    Ok(BenchReport {
        n: corpus.len(),
        accesses: plan.len(),
        pinned: config.pin,
        strategies,
    })
}

type Metered = Arc<MeteredBackend<MemoryBackend>>;

fn fresh_backend() -> (Metered, Arc<dyn Backend>) {
    let metered = Arc::new(MeteredBackend::new(MemoryBackend::new()));
    let backend: Arc<dyn Backend> = metered.clone();
    (metered, backend)
}

fn measure(
    name: &'static str,
    metered: &Metered,
    build_time: std::time::Duration,
    corpus: &[CorpusFile],
    plan: &[usize],
    get: impl Fn(&str) -> Result<Option<Vec<u8>>>,
) -> Result<StrategyReport> {
    let container_bytes = metered.inner().total_bytes("");
    metered.meter().reset();
    for &i in plan {
        let file = &corpus[i];
        let got = get(&file.name)?;
        if got.as_deref() != Some(&file.content[..]) {
            return Err(Error::Integrity {
                object: name.to_string(),
                offset: 0,
                reason: format!("{} returned wrong bytes for {}", name, file.name),
            });
        }
    }
    let meter = metered.meter();
    Ok(StrategyReport {
        name,
        accesses: plan.len() as u64,
        total: meter.total(),
        metadata: meter.phase(Phase::Metadata),
        content: meter.phase(Phase::Content),
        build_time,
        container_bytes,
    })
}
