use std::fmt;

use crate::hashing::FileKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by every layer of the container.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid depth {0}: must be at most 64")]
    InvalidDepth(u32),

    #[error("keys not strictly increasing at position {position}")]
    NotSorted { position: usize },

    #[error("duplicate key {0}")]
    DuplicateKey(FileKey),

    #[error("duplicate file name {0:?}")]
    DuplicateName(String),

    #[error("names {first:?} and {second:?} hash to the same key {key}")]
    KeyCollision {
        key: FileKey,
        first: String,
        second: String,
    },

    #[error("{name:?} is already archived under key {key}")]
    AlreadyArchived { name: String, key: FileKey },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bucket {0} is not full and cannot be split")]
    InvalidSplit(u32),

    #[error("bucket {0} records are not resident")]
    BucketNotResident(u32),

    #[error("directory depth limit {0} reached")]
    DirectoryTooDeep(u32),

    #[error("invalid object path {0:?}")]
    InvalidPath(String),

    #[error("object not found: {0}")]
    NotFound(String),

    #[error("object already exists: {0}")]
    Conflict(String),

    #[error("read of {path} at {offset}+{len} exceeds object length {object_len}")]
    Range {
        path: String,
        offset: u64,
        len: u64,
        object_len: u64,
    },

    #[error("injected failure at write #{0}")]
    InjectedFault(u64),

    #[error("{0}")]
    Format(FormatError),

    #[error("integrity failure in {object} at offset {offset}: {reason}")]
    Integrity {
        object: String,
        offset: u64,
        reason: String,
    },

    #[error("not an archive: {0}")]
    NotAnArchive(String),

    #[error("archive {0} has an unfinished operation; reopen it to recover")]
    NotClean(String),

    #[error("content source {name:?} could not be read: {source}")]
    Source {
        name: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A decoding failure at a byte offset, optionally attributed to an object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatError {
    pub object: Option<String>,
    pub offset: u64,
    pub reason: String,
}

impl FormatError {
    pub fn new(offset: u64, reason: impl Into<String>) -> Self {
        Self {
            object: None,
            offset,
            reason: reason.into(),
        }
    }
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.object {
            Some(object) => write!(
                f,
                "format error in {object} at offset {}: {}",
                self.offset, self.reason
            ),
            None => write!(f, "format error at offset {}: {}", self.offset, self.reason),
        }
    }
}

impl Error {
    pub(crate) fn format(offset: u64, reason: impl Into<String>) -> Self {
        Error::Format(FormatError::new(offset, reason))
    }

    /// Attaches an object name to a format error that lacks one.
    pub(crate) fn in_object(self, object: &str) -> Self {
        match self {
            Error::Format(mut e) if e.object.is_none() => {
                e.object = Some(object.to_string());
                Error::Format(e)
            }
            other => other,
        }
    }

    /// Short machine-readable class used by the command line front end.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidDepth(_)
            | Error::InvalidConfig(_)
            | Error::InvalidSplit(_)
            | Error::InvalidPath(_) => "invalid-argument",
            Error::NotSorted { .. } => "not-sorted",
            Error::DuplicateKey(_)
            | Error::DuplicateName(_)
            | Error::KeyCollision { .. }
            | Error::AlreadyArchived { .. } => "duplicate-key",
            Error::BucketNotResident(_) | Error::DirectoryTooDeep(_) => "internal",
            Error::NotFound(_) => "not-found",
            Error::Conflict(_) => "conflict",
            Error::Range { .. } => "range",
            Error::InjectedFault(_) => "injected-failure",
            Error::Format(_) => "format",
            Error::Integrity { .. } => "integrity",
            Error::NotAnArchive(_) => "not-an-archive",
            Error::NotClean(_) => "not-clean",
            Error::Source { .. } => "source-read",
            Error::Io(_) => "io",
        }
    }
}
