use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ClientError, Usage};

/// One recorded response, stored as `<cache_dir>/<fingerprint>.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub fingerprint: String,
    pub raw_text: String,
    pub usage: Usage,
    /// Latency measured when the response was recorded; replayed verbatim.
    pub latency_ms: u64,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, fingerprint: &str) -> PathBuf {
        self.dir.join(format!("{fingerprint}.json"))
    }

    pub fn load(&self, fingerprint: &str) -> Result<Option<CacheEntry>, ClientError> {
        let path = self.path(fingerprint);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
            Err(source) => return Err(ClientError::Io { path, source }),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes).map_err(|e| ClientError::Io {
            path: path.clone(),
            source: std::io::Error::new(ErrorKind::InvalidData, e),
        })?;
        Ok(Some(entry))
    }

    /// Write-temp-then-rename; concurrent writers of the same key race benignly.
    pub fn store(&self, entry: &CacheEntry) -> Result<(), ClientError> {
        let io = |source| ClientError::Io {
            path: self.dir.clone(),
            source,
        };
        fs::create_dir_all(&self.dir).map_err(io)?;
        let mut json = serde_json::to_string_pretty(entry).expect("entry serializes");
        json.push('\n');
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(json.as_bytes()).map_err(io)?;
        tmp.persist(self.path(&entry.fingerprint)).map_err(|e| io(e.error))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|rd| {
                rd.filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
