//! Line-delimited JSON record formats and helpers for reading and writing
//! them. Every file is UTF-8 with one object per line.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Task;
use crate::error::{Error, Result};
use crate::model::{ExecutionMatrix, Outcome, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemRecord {
    pub task_id: String,
    pub prompt: String,
    pub entry_point: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_tests: Option<Vec<String>>,
}

/// A candidate solution line. `solution_id` may be an integer, a string, or
/// absent; ids are made dense at load time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub task_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution_id: Option<serde_json::Value>,
    pub completion: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub task_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_id: Option<serde_json::Value>,
    pub assertion: String,
}

/// One execution matrix cell. Also the on-disk format of the execution cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub task_id: String,
    pub solution_id: usize,
    pub test_id: usize,
    pub status: Status,
    pub duration_ms: u64,
    pub source_hash: String,
    pub assertion_hash: String,
    /// Budget the cell ran under; only consulted for `timeout` cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusRecord {
    pub task_id: String,
    pub set_index: usize,
    pub solution_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub task_id: String,
    pub order: Vec<usize>,
    pub solution_scores: BTreeMap<usize, f64>,
    pub best: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTraceRecord {
    pub task_id: String,
    pub order: Vec<usize>,
    pub solution_scores: BTreeMap<usize, f64>,
    pub generations_run: usize,
    pub best_fitness_trace: Vec<f64>,
}

/// Planted ground truth for a synthetic task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub task_id: String,
    pub correct_solution_ids: Vec<usize>,
    pub valid_test_ids: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdKind {
    Solution,
    Test,
}

/// Maps an id as written in an input file to the dense id used internally.
/// `external_id` is `null` when the input line carried no id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdMapRecord {
    pub task_id: String,
    pub kind: IdKind,
    pub external_id: serde_json::Value,
    pub id: usize,
}

impl MatrixRecord {
    pub fn outcome(&self) -> Outcome {
        Outcome::new(self.status, self.duration_ms, self.detail.clone())
    }
}

/// Records for every cell of `matrix`, whose rows and columns follow
/// `task`'s solutions and tests.
pub fn matrix_records(
    task: &Task,
    matrix: &ExecutionMatrix,
    timeout_ms: Option<u64>,
) -> Vec<MatrixRecord> {
    let task_id = task.task_id();
    let source_hashes: Vec<String> = task
        .solutions
        .iter()
        .map(|s| content_hash(&s.source))
        .collect();
    let assertion_hashes: Vec<String> = task
        .tests
        .iter()
        .map(|t| content_hash(&t.assertion))
        .collect();
    matrix
        .iter()
        .map(|((s, t), o)| MatrixRecord {
            task_id: task_id.to_string(),
            solution_id: task.solutions[s].solution_id,
            test_id: task.tests[t].test_id,
            status: o.status,
            duration_ms: o.duration_ms,
            source_hash: source_hashes[s].clone(),
            assertion_hash: assertion_hashes[t].clone(),
            timeout_ms,
            detail: o.detail.clone(),
        })
        .collect()
}

/// Rebuilds a task's matrix from id-keyed records. Records for other tasks
/// are ignored; the grid must be covered exactly once.
///
/// When `task` is given, each record's hashes must match the corpus texts.
pub fn matrix_from_records<'a>(
    task_id: &str,
    solutions: usize,
    tests: usize,
    records: impl IntoIterator<Item = &'a MatrixRecord>,
    task: Option<&Task>,
) -> Result<ExecutionMatrix> {
    let mut cells = Vec::new();
    for r in records.into_iter().filter(|r| r.task_id == task_id) {
        if let Some(task) = task {
            let stale = |what: &str| Error::Matrix {
                task_id: task_id.to_string(),
                message: format!(
                    "{what} hash of cell ({}, {}) does not match the corpus",
                    r.solution_id, r.test_id
                ),
            };
            match task.solutions.get(r.solution_id) {
                Some(s) if content_hash(&s.source) == r.source_hash => {}
                Some(_) => return Err(stale("source")),
                None => {}
            }
            match task.tests.get(r.test_id) {
                Some(t) if content_hash(&t.assertion) == r.assertion_hash => {}
                Some(_) => return Err(stale("assertion")),
                None => {}
            }
        }
        cells.push(((r.solution_id, r.test_id), r.outcome()));
    }
    ExecutionMatrix::from_cells(task_id, solutions, tests, cells)
}

/// Hex SHA-256 of a source or assertion text.
pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Reads every non-blank line of `path` as a `T`, returning each record with
/// its 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((idx + 1, record));
    }
    Ok(out)
}

/// Like [`read_jsonl`] but skips malformed lines, reporting each one through
/// `log::warn!`.
pub fn read_jsonl_lenient<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                log::warn!("{}:{}: unreadable line: {e}", path.display(), idx + 1);
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(r) => out.push(r),
            Err(e) => log::warn!("{}:{}: skipping corrupt line: {e}", path.display(), idx + 1),
        }
    }
    Ok(out)
}

pub fn write_jsonl<'a, T, I>(path: &Path, records: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_records(&mut w, records).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_records<'a, T, I, W>(w: &mut W, records: I) -> std::io::Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
    W: Write,
{
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_hex_sha256() {
        assert_eq!(
            content_hash(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn parse_error_names_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tests.jsonl");
        std::fs::write(
            &path,
            "{\"task_id\":\"a\",\"assertion\":\"assert 1\"}\n\n{not json}\n",
        )
        .unwrap();
        let err = read_jsonl::<TestRecord>(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tests.jsonl:3"), "{msg}");
    }

    #[test]
    fn lenient_reader_skips_corrupt_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        std::fs::write(
            &path,
            "{\"task_id\":\"a\",\"assertion\":\"x\"}\ngarbage\n{\"task_id\":\"b\",\"assertion\":\"y\"}\n",
        )
        .unwrap();
        let recs: Vec<TestRecord> = read_jsonl_lenient(&path).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].task_id, "b");
    }

    #[test]
    fn selection_scores_serialize_with_sorted_keys() {
        let rec = SelectionRecord {
            task_id: "t".into(),
            order: vec![1, 0],
            solution_scores: [(1, 2.0), (0, 1.0)].into_iter().collect(),
            best: Some(1),
        };
        let s = serde_json::to_string(&rec).unwrap();
        assert!(
            s.contains("\"solution_scores\":{\"0\":1.0,\"1\":2.0}"),
            "{s}"
        );
    }
}
