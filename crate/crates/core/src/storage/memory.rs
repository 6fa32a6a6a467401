use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use super::{check_range, Backend, ObjectPath};
use crate::error::{Error, Result};

type Object = Arc<RwLock<Vec<u8>>>;

/// In-process backend. Each object has its own lock, so appends to distinct
/// objects proceed concurrently.
#[derive(Debug, Default)]
pub struct MemoryBackend {
    objects: RwLock<BTreeMap<String, Object>>,
    lazy_persist: bool,
}

impl MemoryBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Deferred-flush hint; recorded only.
    pub fn with_lazy_persist(mut self, on: bool) -> Self {
        self.lazy_persist = on;
        self
    }

    pub fn lazy_persist(&self) -> bool {
        self.lazy_persist
    }

    /// Deep copy of every object.
    pub fn snapshot(&self) -> Self {
        let objects = self
            .objects
            .read()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), Arc::new(RwLock::new(v.read().unwrap().clone()))))
            .collect();
        Self {
            objects: RwLock::new(objects),
            lazy_persist: self.lazy_persist,
        }
    }

    /// Sum of all object lengths under `prefix`.
    pub fn total_bytes(&self, prefix: &str) -> u64 {
        self.objects
            .read()
            .unwrap()
            .range(prefix.to_string()..)
            .take_while(|(k, _)| k.starts_with(prefix))
            .map(|(_, v)| v.read().unwrap().len() as u64)
            .sum()
    }

    fn object(&self, path: &ObjectPath) -> Result<Object> {
        self.objects
            .read()
            .unwrap()
            .get(path.as_str())
            .cloned()
            .ok_or_else(|| Error::NotFound(path.to_string()))
    }
}

impl Backend for MemoryBackend {
    fn create(&self, path: &ObjectPath) -> Result<()> {
        let mut objects = self.objects.write().unwrap();
        if objects.contains_key(path.as_str()) {
            return Err(Error::Conflict(path.to_string()));
        }
        objects.insert(path.to_string(), Object::default());
        Ok(())
    }

    fn append(&self, path: &ObjectPath, data: &[u8]) -> Result<u64> {
        let object = self.object(path)?;
        let mut bytes = object.write().unwrap();
        bytes.extend_from_slice(data);
        Ok(bytes.len() as u64)
    }

    fn read_range(&self, path: &ObjectPath, offset: u64, len: u64) -> Result<Vec<u8>> {
        let object = self.object(path)?;
        let bytes = object.read().unwrap();
        check_range(path, offset, len, bytes.len() as u64)?;
        Ok(bytes[offset as usize..(offset + len) as usize].to_vec())
    }

    fn length(&self, path: &ObjectPath) -> Result<u64> {
        Ok(self.object(path)?.read().unwrap().len() as u64)
    }

    fn delete(&self, path: &ObjectPath) -> Result<()> {
        self.objects
            .write()
            .unwrap()
            .remove(path.as_str())
            .map(drop)
            .ok_or_else(|| Error::NotFound(path.to_string()))
    }

    fn rename(&self, src: &ObjectPath, dst: &ObjectPath) -> Result<()> {
        let mut objects = self.objects.write().unwrap();
        if !objects.contains_key(src.as_str()) {
            return Err(Error::NotFound(src.to_string()));
        }
        if objects.contains_key(dst.as_str()) {
            return Err(Error::Conflict(dst.to_string()));
        }
        let object = objects.remove(src.as_str()).expect("checked");
        objects.insert(dst.to_string(), object);
        Ok(())
    }

    fn replace(&self, src: &ObjectPath, dst: &ObjectPath) -> Result<()> {
        let mut objects = self.objects.write().unwrap();
        let object = objects
            .remove(src.as_str())
            .ok_or_else(|| Error::NotFound(src.to_string()))?;
        objects.insert(dst.to_string(), object);
        Ok(())
    }

    fn list(&self, prefix: &str) -> Result<Vec<ObjectPath>> {
        self.objects
            .read()
            .unwrap()
            .range(prefix.to_string()..)
            .take_while(|(k, _)| k.starts_with(prefix))
            .map(|(k, _)| ObjectPath::new(k.clone()))
            .collect()
    }

    fn exists(&self, path: &ObjectPath) -> Result<bool> {
        Ok(self.objects.read().unwrap().contains_key(path.as_str()))
    }
}
