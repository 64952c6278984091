//! On-disk response cache, one JSON file per request.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ClientError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request: CachedRequest,
    pub response: String,
}

/// Reads go straight to the file system; writes land in a temp file that
/// is renamed into place under a lock, so readers never see partial data.
#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

pub fn cache_key(model: &str, system: &str, user: &str) -> String {
    let mut h = Sha256::new();
    for part in [model, system, user] {
        h.update(part.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

impl ResponseCache {
    pub fn open(dir: &Path) -> Result<Self, ClientError> {
        std::fs::create_dir_all(dir).map_err(|e| ClientError::Cache(format!("{}: {e}", dir.display())))?;
        Ok(ResponseCache {
            dir: dir.to_path_buf(),
            write_lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, request: &CachedRequest) -> Option<String> {
        let key = cache_key(&request.model, &request.system, &request.user);
        let text = std::fs::read_to_string(self.path(&key)).ok()?;
        match serde_json::from_str::<CacheEntry>(&text) {
            Ok(e) if e.request.model == request.model
                && e.request.system == request.system
                && e.request.user == request.user =>
            {
                Some(e.response)
            }
            Ok(_) => None,
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {key}: {e}");
                None
            }
        }
    }

    pub fn put(&self, request: &CachedRequest, response: &str) -> Result<(), ClientError> {
        let key = cache_key(&request.model, &request.system, &request.user);
        let entry = CacheEntry {
            request: request.clone(),
            response: response.to_string(),
        };
        let body = serde_json::to_vec_pretty(&entry).map_err(|e| ClientError::Cache(e.to_string()))?;
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        let err = |e: std::io::Error| ClientError::Cache(format!("{key}: {e}"));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(err)?;
        tmp.write_all(&body).map_err(err)?;
        tmp.persist(self.path(&key)).map_err(|e| err(e.error))?;
        Ok(())
    }
}
