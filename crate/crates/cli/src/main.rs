//! `packhash`: create, extend, query and check small-file archives on the
//! local file system, and run the IO-counting benchmark.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use packhash_bench::{parse_size_range, run_bench, BenchConfig};
use packhash_core::storage::LocalDirBackend;
use packhash_core::{Archive, ArchiveConfig, Backend, Codec, InputFile, ObjectPath};
use walkdir::WalkDir;

const EXIT_OTHER: u8 = 1;
const EXIT_NOT_FOUND: u8 = 3;
const EXIT_DUPLICATE: u8 = 4;
const EXIT_FORMAT: u8 = 5;
const EXIT_INTEGRITY: u8 = 6;
const EXIT_VERIFY_FAILED: u8 = 7;

#[derive(Parser)]
#[command(
    name = "packhash",
    version,
    about = "Pack many small files into an archive with constant-read lookups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CodecArg {
    Identity,
    Lz4,
}

impl From<CodecArg> for Codec {
    fn from(c: CodecArg) -> Self {
        match c {
            CodecArg::Identity => Codec::Identity,
            CodecArg::Lz4 => Codec::Lz4Block,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Archive every file under a directory.
    Create {
        /// Directory whose files are archived under their relative paths
        #[arg(long)]
        input: PathBuf,
        /// Archive directory
        #[arg(long)]
        archive: PathBuf,
        #[arg(long, default_value_t = 2)]
        workers: usize,
        #[arg(long, default_value_t = packhash_core::container::manifest::DEFAULT_BUCKET_CAPACITY)]
        bucket_capacity: u64,
        /// Bytes after which a worker starts a new part; 0 never rotates.
        #[arg(long, default_value_t = 0)]
        max_part_size: u64,
        #[arg(long, value_enum, default_value_t = CodecArg::Identity)]
        codec: CodecArg,
        /// Size limit of one index file.
        #[arg(long, default_value_t = packhash_core::container::manifest::DEFAULT_BLOCK_SIZE)]
        block_size: u64,
    },
    /// Append every file under a directory to an existing archive.
    Add {
        /// Directory whose files are archived under their relative paths
        #[arg(long)]
        input: PathBuf,
        /// Archive directory
        #[arg(long)]
        archive: PathBuf,
    },
    /// Write one file's content to stdout or to --out.
    Get {
        /// Archive directory
        #[arg(long)]
        archive: PathBuf,
        /// Archived name, as listed by `ls`
        name: String,
        /// Write to this file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List archived names in commit order.
    Ls {
        /// Archive directory
        #[arg(long)]
        archive: PathBuf,
    },
    /// Show counts, sizes and per-bucket index statistics.
    Stat {
        /// Archive directory
        #[arg(long)]
        archive: PathBuf,
    },
    /// Check every invariant of the archive.
    Verify {
        /// Archive directory
        #[arg(long)]
        archive: PathBuf,
    },
    /// Compare IO costs against scan and sparse-index baselines in memory.
    Bench {
        /// Number of generated files
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        /// Inclusive file size range, e.g. 1KiB-64KiB
        #[arg(long, default_value = "1KiB-64KiB")]
        size_range: String,
        /// Random lookups measured per strategy
        #[arg(long, default_value_t = 100)]
        accesses: usize,
        /// Keep index headers in memory before measuring
        #[arg(long, value_enum, default_value_t = Switch::Off)]
        pin: Switch,
        #[arg(long, default_value_t = packhash_bench::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = packhash_core::container::manifest::DEFAULT_BUCKET_CAPACITY)]
        bucket_capacity: u64,
        /// Print only `strategy<TAB>metric<TAB>value` lines.
        #[arg(long)]
        machine: bool,
    },
}

/// A failure that has already been reported in full.
#[derive(Debug)]
struct VerifyFailed(String);

impl std::fmt::Display for VerifyFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for VerifyFailed {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (class, code) = classify(&err);
            let message = format!("{err:#}").replace('\n', " ");
            eprintln!("error: {class}: {message}");
            ExitCode::from(code)
        }
    }
}

fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    if err.downcast_ref::<VerifyFailed>().is_some() {
        return ("integrity", EXIT_VERIFY_FAILED);
    }
    let Some(core) = err
        .chain()
        .find_map(|e| e.downcast_ref::<packhash_core::Error>())
    else {
        return ("other", EXIT_OTHER);
    };
    let class = core.class();
    let code = match class {
        "not-found" => EXIT_NOT_FOUND,
        "duplicate-key" => EXIT_DUPLICATE,
        "format" | "not-an-archive" => EXIT_FORMAT,
        "integrity" => EXIT_INTEGRITY,
        _ => EXIT_OTHER,
    };
    (class, code)
}

/// Backend rooted at the archive's parent directory, and the archive's
/// object path within it.
fn locate(archive: &Path) -> anyhow::Result<(Arc<dyn Backend>, ObjectPath)> {
    let name = archive
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| {
            anyhow!(
                "archive path {} has no usable final component",
                archive.display()
            )
        })?;
    let parent = match archive.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let backend =
        LocalDirBackend::new(&parent).with_context(|| format!("opening {}", parent.display()))?;
    Ok((Arc::new(backend), ObjectPath::new(name)?))
}

fn open(archive: &Path) -> anyhow::Result<Archive> {
    let (backend, root) = locate(archive)?;
    Archive::open(backend, &root).with_context(|| format!("opening {}", archive.display()))
}

/// Every regular file under `dir`, named by its slash-separated relative
/// path, in sorted order.
fn collect_inputs(dir: &Path) -> anyhow::Result<Vec<InputFile>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.with_context(|| format!("walking {}", dir.display()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(dir)?;
        let name = rel
            .components()
            .map(|c| {
                c.as_os_str()
                    .to_str()
                    .ok_or_else(|| anyhow!("{} is not valid UTF-8", rel.display()))
            })
            .collect::<anyhow::Result<Vec<_>>>()?
            .join("/");
        files.push(InputFile::from_path(name, entry.path()));
    }
    Ok(files)
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Create {
            input,
            archive,
            workers,
            bucket_capacity,
            max_part_size,
            codec,
            block_size,
        } => {
            let files = collect_inputs(&input)?;
            let count = files.len();
            let config = ArchiveConfig {
                workers,
                bucket_capacity,
                max_part_size,
                codec: codec.into(),
                block_size,
            };
            let (backend, root) = locate(&archive)?;
            let created = Archive::create(backend, &root, files, config)
                .with_context(|| format!("creating {}", archive.display()))?;
            println!(
                "created {} with {count} files in {} buckets",
                archive.display(),
                created.directory().buckets().len()
            );
        }
        Command::Add { input, archive } => {
            let files = collect_inputs(&input)?;
            let count = files.len();
            let mut handle = open(&archive)?;
            handle
                .append_files(files)
                .with_context(|| format!("appending to {}", archive.display()))?;
            println!(
                "added {count} files; {} total",
                handle.manifest().file_count
            );
        }
        Command::Get { archive, name, out } => {
            let handle = open(&archive)?;
            let bytes = handle.get_file(&name)?.ok_or_else(|| {
                packhash_core::Error::NotFound(format!("{name} in {}", archive.display()))
            })?;
            match out {
                Some(path) => std::fs::write(&path, &bytes)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => std::io::stdout().lock().write_all(&bytes)?,
            }
        }
        Command::Ls { archive } => {
            let handle = open(&archive)?;
            let mut out = std::io::stdout().lock();
            for name in handle.list_names()? {
                writeln!(out, "{}", name.escape_debug())?;
            }
        }
        Command::Stat { archive } => {
            let handle = open(&archive)?;
            let s = handle.stats()?;
            println!("files          {}", s.file_count);
            println!("parts          {} ({} bytes)", s.part_count, s.part_bytes);
            println!("codec          {}", s.codec);
            println!("bucket cap     {}", s.bucket_capacity);
            println!("global depth   {}", s.global_depth);
            println!("buckets        {}", s.buckets.len());
            println!(
                "{:>8} {:>6} {:>10} {:>12} {:>9}",
                "bucket", "depth", "records", "header_bytes", "bits/key"
            );
            for b in &s.buckets {
                let bpk = b
                    .bits_per_key
                    .map_or("-".to_string(), |v| format!("{v:.2}"));
                println!(
                    "{:>8} {:>6} {:>10} {:>12} {:>9}",
                    b.id, b.local_depth, b.record_count, b.header_bytes, bpk
                );
            }
        }
        Command::Verify { archive } => {
            let handle = open(&archive)?;
            let report = handle.verify()?;
            for check in &report.checks {
                println!("{check}");
            }
            let failure = report.failures().next().map(|first| {
                format!(
                    "verification failed: {}: {}",
                    first.name,
                    first.failure.as_deref().unwrap_or_default()
                )
            });
            if let Some(message) = failure {
                return Err(VerifyFailed(message).into());
            }
        }
        Command::Bench {
            n,
            size_range,
            accesses,
            pin,
            seed,
            bucket_capacity,
            machine,
        } => {
            let Some(sizes) = parse_size_range(&size_range) else {
                bail!("cannot parse size range {size_range:?}; expected e.g. 1KiB-64KiB");
            };
            let config = BenchConfig {
                n,
                sizes,
                accesses,
                pin: matches!(pin, Switch::On),
                seed,
                archive: ArchiveConfig {
                    bucket_capacity,
                    ..Default::default()
                },
            };
            let report = run_bench(&config)?;
            if !machine {
                println!("{report}");
            }
            print!("{}", report.machine_lines());
        }
    }
    Ok(())
}
