//! Content-addressed record/replay cache for backend responses.
//!
//! Every backend request is keyed by a SHA-256 digest of the endpoint path
//! plus the canonical JSON serialization of the request body (object keys
//! sorted, which `serde_json` guarantees for `Value` maps). Responses are
//! stored verbatim as raw JSON. The on-disk format is an append-only JSONL
//! file of `{key, response}` entries, so interrupted runs lose at most the
//! entry being written and a rerun with a warm cache replays byte-identical
//! responses without touching the network.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    response: serde_json::Value,
}

/// An append-only response cache shared by the backend clients.
pub struct ReplayCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, serde_json::Value>>,
    writer: Mutex<Option<File>>,
}

impl ReplayCache {
    /// Open (or create) a cache file and load all existing entries. Later
    /// duplicate keys win, matching append order.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (idx, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheEntry =
                    serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                        line: idx + 1,
                        reason: format!("cache entry: {e}"),
                    })?;
                entries.insert(entry.key, entry.response);
            }
        }
        let writer = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ReplayCache {
            path: Some(path.to_path_buf()),
            entries: RwLock::new(entries),
            writer: Mutex::new(Some(writer)),
        })
    }

    /// An unpersisted cache. Useful for tests and one-shot runs.
    pub fn in_memory() -> Self {
        ReplayCache {
            path: None,
            entries: RwLock::new(HashMap::new()),
            writer: Mutex::new(None),
        }
    }

    /// Cache key for a request: SHA-256 over the endpoint and the canonical
    /// JSON body.
    pub fn request_key(endpoint: &str, body: &serde_json::Value) -> String {
        let mut hasher = Sha256::new();
        hasher.update(endpoint.as_bytes());
        hasher.update(b"\n");
        // `serde_json::Value` objects serialize with sorted keys, so this is
        // canonical regardless of how the body was assembled.
        hasher.update(body.to_string().as_bytes());
        hex::encode(hasher.finalize())
    }

    pub fn get(&self, key: &str) -> Option<serde_json::Value> {
        self.entries.read().unwrap().get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Record a response. The write is serialized and flushed before the
    /// in-memory map is updated, so a crash cannot leave the map ahead of the
    /// file.
    pub fn put(&self, key: &str, response: &serde_json::Value) -> Result<()> {
        {
            let mut guard = self.writer.lock().unwrap();
            if let Some(file) = guard.as_mut() {
                let entry = CacheEntry {
                    key: key.to_string(),
                    response: response.clone(),
                };
                serde_json::to_writer(&mut *file, &entry)?;
                file.write_all(b"\n")?;
                file.flush()?;
            }
        }
        self.entries
            .write()
            .unwrap()
            .insert(key.to_string(), response.clone());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn key_is_canonical_across_insertion_order() {
        // serde_json Value maps sort keys, so logically equal bodies hash
        // identically no matter how they were built.
        let a = json!({"model": "m", "prompt": "p", "max_tokens": 4});
        let b = json!({"max_tokens": 4, "prompt": "p", "model": "m"});
        assert_eq!(
            ReplayCache::request_key("/v1/completions", &a),
            ReplayCache::request_key("/v1/completions", &b)
        );
        assert_ne!(
            ReplayCache::request_key("/v1/completions", &a),
            ReplayCache::request_key("/v1/chat/completions", &a)
        );
    }

    #[test]
    fn entries_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let key = ReplayCache::request_key("/score", &json!({"claim": "c"}));
        {
            let cache = ReplayCache::open(&path).unwrap();
            cache.put(&key, &json!({"score": 0.5})).unwrap();
        }
        let cache = ReplayCache::open(&path).unwrap();
        assert_eq!(cache.get(&key), Some(json!({"score": 0.5})));
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn later_duplicate_keys_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let cache = ReplayCache::open(&path).unwrap();
        cache.put("k", &json!(1)).unwrap();
        cache.put("k", &json!(2)).unwrap();
        drop(cache);
        let cache = ReplayCache::open(&path).unwrap();
        assert_eq!(cache.get("k"), Some(json!(2)));
    }

    #[test]
    fn in_memory_cache_has_no_file() {
        let cache = ReplayCache::in_memory();
        cache.put("k", &json!(true)).unwrap();
        assert_eq!(cache.get("k"), Some(json!(true)));
        assert!(cache.path().is_none());
    }
}
