//! Persistent execution cache keyed by content hashes.
//!
//! A cell is keyed by `(task_id, source hash, assertion hash)`. Pass, Fail and
//! Error outcomes are reused under any budget; a Timeout is reused only under
//! the budget it was observed with.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{Outcome, Status};
use crate::records::{read_jsonl_lenient, write_records, MatrixRecord};

type Key = (String, String, String);

#[derive(Debug, Default)]
pub struct MatrixCache {
    path: Option<PathBuf>,
    entries: HashMap<Key, MatrixRecord>,
    pending: Vec<MatrixRecord>,
}

/// Opens (or prepares to create) the cache file at `path`. Corrupt lines are
/// skipped with a warning; later lines override earlier ones.
pub fn warm_cache(path: &Path) -> Result<MatrixCache> {
    let mut cache = MatrixCache {
        path: Some(path.to_path_buf()),
        ..MatrixCache::default()
    };
    if path.exists() {
        for rec in read_jsonl_lenient::<MatrixRecord>(path)? {
            cache.entries.insert(key_of(&rec), rec);
        }
    } else {
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(cache)
}

fn key_of(rec: &MatrixRecord) -> Key {
    (
        rec.task_id.clone(),
        rec.source_hash.clone(),
        rec.assertion_hash.clone(),
    )
}

impl MatrixCache {
    /// In-memory cache that is never written to disk.
    pub fn in_memory() -> Self {
        MatrixCache::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(
        &self,
        task_id: &str,
        source_hash: &str,
        assertion_hash: &str,
        timeout_ms: u64,
    ) -> Option<Outcome> {
        let key = (
            task_id.to_string(),
            source_hash.to_string(),
            assertion_hash.to_string(),
        );
        let rec = self.entries.get(&key)?;
        if rec.status == Status::Timeout && rec.timeout_ms != Some(timeout_ms) {
            return None;
        }
        Some(rec.outcome())
    }

    pub fn insert(&mut self, rec: MatrixRecord) {
        self.entries.insert(key_of(&rec), rec.clone());
        self.pending.push(rec);
    }

    /// Appends records inserted since the last flush to the backing file.
    pub fn flush(&mut self) -> Result<()> {
        let Some(path) = &self.path else {
            self.pending.clear();
            return Ok(());
        };
        if self.pending.is_empty() {
            return Ok(());
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        write_records(&mut w, &self.pending).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
        self.pending.clear();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(status: Status, timeout_ms: u64) -> MatrixRecord {
        MatrixRecord {
            task_id: "t".into(),
            solution_id: 0,
            test_id: 0,
            status,
            duration_ms: 5,
            source_hash: "s".into(),
            assertion_hash: "a".into(),
            timeout_ms: Some(timeout_ms),
            detail: None,
        }
    }

    #[test]
    fn timeout_cells_are_budget_specific() {
        let mut c = MatrixCache::in_memory();
        c.insert(rec(Status::Timeout, 100));
        assert!(c.lookup("t", "s", "a", 100).is_some());
        assert!(c.lookup("t", "s", "a", 3000).is_none());
        c.insert(rec(Status::Pass, 100));
        assert_eq!(c.lookup("t", "s", "a", 3000).unwrap().status, Status::Pass);
    }

    #[test]
    fn flush_appends_and_warm_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let mut c = warm_cache(&path).unwrap();
        assert!(path.exists());
        c.insert(rec(Status::Fail, 100));
        c.flush().unwrap();
        std::fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .unwrap()
            .write_all(b"{broken\n")
            .unwrap();
        let again = warm_cache(&path).unwrap();
        assert_eq!(again.len(), 1);
        assert_eq!(again.lookup("t", "s", "a", 1).unwrap().status, Status::Fail);
        assert_eq!(again.lookup("t", "s", "a", 1).unwrap().duration_ms, 5);
    }
}
