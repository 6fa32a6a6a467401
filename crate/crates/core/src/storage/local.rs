use std::fs::{self, File, OpenOptions};
use std::hash::{Hash, Hasher};
use std::io::{ErrorKind, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use super::{check_range, Backend, ObjectPath};
use crate::error::{Error, Result};

const LOCK_STRIPES: usize = 64;

/// Backend mapping each object path to a file beneath a root directory.
///
/// Mutations on one object are serialized through a striped lock table;
/// `replace` relies on the atomicity of `rename(2)`.
#[derive(Debug)]
pub struct LocalDirBackend {
    root: PathBuf,
    stripes: Vec<Mutex<()>>,
    lazy_persist: bool,
}

impl LocalDirBackend {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            stripes: (0..LOCK_STRIPES).map(|_| Mutex::new(())).collect(),
            lazy_persist: false,
        })
    }

    /// Deferred-flush hint; recorded only.
    pub fn with_lazy_persist(mut self, on: bool) -> Self {
        self.lazy_persist = on;
        self
    }

    pub fn lazy_persist(&self) -> bool {
        self.lazy_persist
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn file(&self, path: &ObjectPath) -> PathBuf {
        self.root.join(path.as_str())
    }

    fn stripe(&self, path: &ObjectPath) -> usize {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        path.hash(&mut h);
        (h.finish() % LOCK_STRIPES as u64) as usize
    }

    fn lock(&self, path: &ObjectPath) -> MutexGuard<'_, ()> {
        self.stripes[self.stripe(path)].lock().unwrap()
    }

    fn lock_pair(&self, a: &ObjectPath, b: &ObjectPath) -> Vec<MutexGuard<'_, ()>> {
        let (x, y) = (self.stripe(a), self.stripe(b));
        let mut order = vec![x.min(y), x.max(y)];
        order.dedup();
        order
            .into_iter()
            .map(|i| self.stripes[i].lock().unwrap())
            .collect()
    }

    fn not_found(path: &ObjectPath) -> impl FnOnce(std::io::Error) -> Error + '_ {
        move |e| {
            if e.kind() == ErrorKind::NotFound {
                Error::NotFound(path.to_string())
            } else {
                Error::Io(e)
            }
        }
    }
}

impl Backend for LocalDirBackend {
    fn create(&self, path: &ObjectPath) -> Result<()> {
        let _g = self.lock(path);
        let file = self.file(path);
        if let Some(parent) = file.parent() {
            fs::create_dir_all(parent)?;
        }
        match OpenOptions::new().write(true).create_new(true).open(&file) {
            Ok(_) => Ok(()),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => {
                Err(Error::Conflict(path.to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn append(&self, path: &ObjectPath, data: &[u8]) -> Result<u64> {
        let _g = self.lock(path);
        let mut f = OpenOptions::new()
            .append(true)
            .open(self.file(path))
            .map_err(Self::not_found(path))?;
        f.write_all(data)?;
        Ok(f.metadata()?.len())
    }

    fn read_range(&self, path: &ObjectPath, offset: u64, len: u64) -> Result<Vec<u8>> {
        let mut f = File::open(self.file(path)).map_err(Self::not_found(path))?;
        check_range(path, offset, len, f.metadata()?.len())?;
        f.seek(SeekFrom::Start(offset))?;
        let mut buf = vec![0; len as usize];
        f.read_exact(&mut buf)?;
        Ok(buf)
    }

    fn length(&self, path: &ObjectPath) -> Result<u64> {
        let meta = fs::metadata(self.file(path)).map_err(Self::not_found(path))?;
        if meta.is_file() {
            Ok(meta.len())
        } else {
            Err(Error::NotFound(path.to_string()))
        }
    }

    fn delete(&self, path: &ObjectPath) -> Result<()> {
        let _g = self.lock(path);
        fs::remove_file(self.file(path)).map_err(Self::not_found(path))
    }

    fn rename(&self, src: &ObjectPath, dst: &ObjectPath) -> Result<()> {
        let _g = self.lock_pair(src, dst);
        if !self.file(src).is_file() {
            return Err(Error::NotFound(src.to_string()));
        }
        if self.file(dst).exists() {
            return Err(Error::Conflict(dst.to_string()));
        }
        if let Some(parent) = self.file(dst).parent() {
            fs::create_dir_all(parent)?;
        }
        fs::rename(self.file(src), self.file(dst)).map_err(Self::not_found(src))
    }

    fn replace(&self, src: &ObjectPath, dst: &ObjectPath) -> Result<()> {
        let _g = self.lock_pair(src, dst);
        if let Some(parent) = self.file(dst).parent() {
            fs::create_dir_all(parent)?;
        }
        fs::rename(self.file(src), self.file(dst)).map_err(Self::not_found(src))
    }

    fn list(&self, prefix: &str) -> Result<Vec<ObjectPath>> {
        let mut out = Vec::new();
        for entry in walkdir::WalkDir::new(&self.root).min_depth(1) {
            let entry = entry.map_err(|e| Error::Io(e.into()))?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(&self.root)
                .expect("walk stays under root");
            let Some(rel) = rel.to_str() else { continue };
            let rel = rel.replace(std::path::MAIN_SEPARATOR, "/");
            if rel.starts_with(prefix) {
                out.push(ObjectPath::new(rel)?);
            }
        }
        out.sort();
        Ok(out)
    }

    fn exists(&self, path: &ObjectPath) -> Result<bool> {
        Ok(self.file(path).is_file())
    }
}
