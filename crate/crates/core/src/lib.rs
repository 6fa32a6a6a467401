//! Small-file container with constant-read lookups.
//!
//! Files are packed into a few large part objects. A lookup routes the
//! name's 64-bit hash through an extendible-hash directory to one index
//! file, ranks it with that file's monotone index, and reads one 24-byte
//! record and then the content frame.

pub mod container;
pub mod directory;
pub mod error;
pub mod hashing;
pub mod monotone;
pub mod storage;

pub use container::record::{MetadataRecord, RECORD_LEN};
pub use container::{
    max_records_per_index, Archive, ArchiveConfig, ArchiveManifest, ArchiveStats, BucketStats,
    CheckOutcome, Codec, ContentSource, InputFile, VerifyReport,
};
pub use directory::{BucketId, DirectoryShape, ExtendibleDirectory};
pub use error::{Error, FormatError, Result};
pub use hashing::{bucket_slot, name_hash, FileKey};
pub use monotone::MonotoneIndex;
pub use storage::{Backend, ObjectPath};
