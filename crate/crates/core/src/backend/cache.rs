//! Content-addressed response cache.
//!
//! Key: SHA-256(profile id ∥ endpoint name ∥ canonical request). Entries live in
//! memory and, when a directory is configured, as `<dir>/<key[..2]>/<key>.json`.
//! A stored body that no longer decodes is evicted and refetched.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
}

#[derive(Debug, Default)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, String>>,
    key_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    hits: AtomicU64,
    misses: AtomicU64,
    evictions: AtomicU64,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir: Some(dir),
            ..Self::default()
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn key(profile_id: &str, endpoint_name: &str, canonical_request: &str) -> String {
        let mut h = Sha256::new();
        h.update(profile_id.as_bytes());
        h.update(endpoint_name.as_bytes());
        h.update(canonical_request.as_bytes());
        hex::encode(h.finalize())
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::SeqCst),
            misses: self.misses.load(Ordering::SeqCst),
            evictions: self.evictions.load(Ordering::SeqCst),
        }
    }

    /// Drops every entry, in memory and on disk.
    pub fn clear(&self) -> Result<()> {
        self.memory.lock().expect("cache lock").clear();
        if let Some(dir) = &self.dir {
            if dir.exists() {
                fs::remove_dir_all(dir)?;
            }
            fs::create_dir_all(dir)?;
        }
        Ok(())
    }

    /// Returns the decoded cached response for `key`, or fetches, decodes and
    /// stores it. Concurrent callers on one key are serialized, so a key is
    /// fetched at most once.
    pub fn get_or_fetch<T>(
        &self,
        key: &str,
        fetch: impl FnOnce() -> Result<String>,
        decode: impl Fn(&str) -> Result<T>,
    ) -> Result<T> {
        let lock = self.key_lock(key);
        let _guard = lock.lock().expect("cache key lock");

        if let Some(body) = self.lookup(key) {
            match decode(&body) {
                Ok(value) => {
                    self.hits.fetch_add(1, Ordering::SeqCst);
                    return Ok(value);
                }
                Err(e) => {
                    log::warn!("evicting corrupt cache entry {key}: {e}");
                    self.evict(key);
                }
            }
        }

        self.misses.fetch_add(1, Ordering::SeqCst);
        let body = fetch()?;
        let value = decode(&body)?;
        self.store(key, body)?;
        Ok(value)
    }

    fn key_lock(&self, key: &str) -> Arc<Mutex<()>> {
        self.key_locks
            .lock()
            .expect("cache lock table")
            .entry(key.to_owned())
            .or_default()
            .clone()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(&key[..2]).join(format!("{key}.json")))
    }

    fn lookup(&self, key: &str) -> Option<String> {
        if let Some(body) = self.memory.lock().expect("cache lock").get(key) {
            return Some(body.clone());
        }
        let path = self.path(key)?;
        match fs::read(&path) {
            Ok(bytes) => match String::from_utf8(bytes) {
                Ok(body) => Some(body),
                // Invalid UTF-8 is handed to the decoder as-is so it fails and evicts.
                Err(e) => Some(String::from_utf8_lossy(e.as_bytes()).into_owned()),
            },
            Err(_) => None,
        }
    }

    fn evict(&self, key: &str) {
        self.evictions.fetch_add(1, Ordering::SeqCst);
        self.memory.lock().expect("cache lock").remove(key);
        if let Some(path) = self.path(key) {
            let _ = fs::remove_file(path);
        }
    }

    fn store(&self, key: &str, body: String) -> Result<()> {
        if let Some(path) = self.path(key) {
            let parent = path.parent().expect("entry path has a parent");
            fs::create_dir_all(parent)?;
            let tmp = parent.join(format!("{key}.tmp"));
            fs::write(&tmp, body.as_bytes())?;
            fs::rename(&tmp, &path)?;
        }
        self.memory.lock().expect("cache lock").insert(key.to_owned(), body);
        Ok(())
    }
}
