//! Out-of-process execution of every (solution, test) pair of a task.
//!
//! Each worker thread owns one runner process and keeps a single request in
//! flight, so a crash or hang is always attributable to one cell. The harness
//! enforces the budget by wall clock: a runner that has not answered by
//! `timeout_ms` plus a short grace period is killed, the cell is recorded as
//! Timeout and a fresh runner is started for the next cell.

mod cache;
mod process;
mod protocol;

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

pub use cache::{warm_cache, MatrixCache};
pub use protocol::{RunnerRequest, RunnerResponse};

use crate::corpus::Task;
use crate::error::{Error, Result};
use crate::model::{CandidateSolution, ExecutionMatrix, Outcome, Problem, Status, TestCase};
use crate::records::{content_hash, MatrixRecord};
use process::{Reply, RunnerProcess};

pub const DEFAULT_TIMEOUT_MS: u64 = 3000;

/// Extra wall-clock time granted past the budget before the runner is
/// killed, so a runner that enforces the budget itself can still answer.
pub const KILL_GRACE_MS: u64 = 250;

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    /// Program and arguments used to start a runner.
    pub runner_cmd: Vec<String>,
    pub workers: usize,
    pub timeout_ms: u64,
    pub cache_path: Option<std::path::PathBuf>,
}

impl HarnessConfig {
    pub fn new(runner_cmd: Vec<String>) -> Self {
        HarnessConfig {
            runner_cmd,
            workers: 1,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            cache_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Invalid("workers must be at least 1".into()));
        }
        if self.timeout_ms == 0 {
            return Err(Error::Invalid("timeout_ms must be at least 1".into()));
        }
        Ok(())
    }
}

/// Counters over the lifetime of a [`Harness`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HarnessStats {
    /// Cells sent to a runner.
    pub executed: usize,
    /// Cells answered from the cache.
    pub cache_hits: usize,
    /// Runner processes started.
    pub spawned: usize,
}

pub struct Harness {
    cfg: HarnessConfig,
    cache: MatrixCache,
    next_id: AtomicU64,
    stats: HarnessStats,
}

impl Harness {
    /// Builds a harness, loading the cache at `cfg.cache_path` if set.
    pub fn new(cfg: HarnessConfig) -> Result<Self> {
        cfg.validate()?;
        let cache = match &cfg.cache_path {
            Some(p) => warm_cache(p)?,
            None => MatrixCache::in_memory(),
        };
        Ok(Harness {
            cfg,
            cache,
            next_id: AtomicU64::new(0),
            stats: HarnessStats::default(),
        })
    }

    pub fn with_cache(mut self, cache: MatrixCache) -> Self {
        self.cache = cache;
        self
    }

    pub fn config(&self) -> &HarnessConfig {
        &self.cfg
    }

    pub fn stats(&self) -> HarnessStats {
        self.stats
    }

    pub fn execute_task(&mut self, task: &Task) -> Result<ExecutionMatrix> {
        self.execute_matrix(&task.problem, &task.solutions, &task.tests)
    }

    /// Runs `solutions` against `tests`. Row `i` of the result is
    /// `solutions[i]`, column `j` is `tests[j]`.
    pub fn execute_matrix(
        &mut self,
        problem: &Problem,
        solutions: &[CandidateSolution],
        tests: &[TestCase],
    ) -> Result<ExecutionMatrix> {
        let task_id = problem.task_id.as_str();
        let (n, m) = (solutions.len(), tests.len());
        let source_hashes: Vec<String> =
            solutions.iter().map(|s| content_hash(&s.source)).collect();
        let assertion_hashes: Vec<String> =
            tests.iter().map(|t| content_hash(&t.assertion)).collect();

        let mut cells: Vec<Option<Outcome>> = vec![None; n * m];
        let mut jobs = Vec::new();
        for s in 0..n {
            for t in 0..m {
                match self.cache.lookup(
                    task_id,
                    &source_hashes[s],
                    &assertion_hashes[t],
                    self.cfg.timeout_ms,
                ) {
                    Some(o) => {
                        self.stats.cache_hits += 1;
                        cells[s * m + t] = Some(o);
                    }
                    None => jobs.push((s, t)),
                }
            }
        }

        if !jobs.is_empty() {
            let requests: Vec<RunnerRequest> = jobs
                .iter()
                .map(|&(s, t)| RunnerRequest {
                    id: format!("r{}", self.next_id.fetch_add(1, Ordering::Relaxed)),
                    code: solutions[s].source.clone(),
                    test: tests[t].assertion.clone(),
                    entry_point: problem.entry_point.clone(),
                    timeout_ms: self.cfg.timeout_ms,
                })
                .collect();
            let (outcomes, spawned) = self.run_pool(&requests)?;
            self.stats.executed += jobs.len();
            self.stats.spawned += spawned;
            for (&(s, t), outcome) in jobs.iter().zip(outcomes) {
                self.cache.insert(MatrixRecord {
                    task_id: task_id.to_string(),
                    solution_id: solutions[s].solution_id,
                    test_id: tests[t].test_id,
                    status: outcome.status,
                    duration_ms: outcome.duration_ms,
                    source_hash: source_hashes[s].clone(),
                    assertion_hash: assertion_hashes[t].clone(),
                    timeout_ms: Some(self.cfg.timeout_ms),
                    detail: outcome.detail.clone(),
                });
                cells[s * m + t] = Some(outcome);
            }
            self.cache.flush()?;
        }

        ExecutionMatrix::new(
            task_id,
            n,
            m,
            cells
                .into_iter()
                .map(|c| c.expect("every cell filled"))
                .collect(),
        )
    }

    fn run_pool(&self, requests: &[RunnerRequest]) -> Result<(Vec<Outcome>, usize)> {
        let next = AtomicUsize::new(0);
        let spawned = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<Outcome>>> = Mutex::new(vec![None; requests.len()]);
        let failure: Mutex<Option<Error>> = Mutex::new(None);
        let workers = self.cfg.workers.min(requests.len());

        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| {
                    let mut runner: Option<RunnerProcess> = None;
                    loop {
                        if failure.lock().unwrap().is_some() {
                            break;
                        }
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= requests.len() {
                            break;
                        }
                        match self.run_one(&mut runner, &requests[i], &spawned) {
                            Ok(o) => results.lock().unwrap()[i] = Some(o),
                            Err(e) => {
                                failure.lock().unwrap().get_or_insert(e);
                                break;
                            }
                        }
                    }
                });
            }
        });

        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e);
        }
        let outcomes = results
            .into_inner()
            .unwrap()
            .into_iter()
            .map(|o| o.expect("every request answered"))
            .collect();
        Ok((outcomes, spawned.into_inner()))
    }

    /// Executes one request, respawning the runner as needed. A crash is
    /// retried once; only a failure to start a runner is an error.
    fn run_one(
        &self,
        runner: &mut Option<RunnerProcess>,
        req: &RunnerRequest,
        spawned: &AtomicUsize,
    ) -> Result<Outcome> {
        let deadline = Duration::from_millis(req.timeout_ms + KILL_GRACE_MS);
        let mut crashes = 0;
        loop {
            if runner.is_none() {
                *runner = Some(RunnerProcess::spawn(&self.cfg.runner_cmd)?);
                spawned.fetch_add(1, Ordering::Relaxed);
            }
            let started = Instant::now();
            let reply = runner.as_mut().unwrap().call(req, deadline);
            let elapsed = started.elapsed().as_millis() as u64;
            match reply {
                Reply::Response(r) => return Ok(Outcome::new(r.status, r.duration_ms, r.detail)),
                Reply::Overrun => {
                    runner.take().unwrap().kill();
                    return Ok(Outcome::new(
                        Status::Timeout,
                        elapsed,
                        Some(format!("no response within {} ms", req.timeout_ms)),
                    ));
                }
                Reply::Violation(msg) => {
                    runner.take().unwrap().kill();
                    log::warn!("runner protocol violation on {}: {msg}", req.id);
                    return Ok(Outcome::new(
                        Status::Error,
                        elapsed,
                        Some(format!("protocol violation: {msg}")),
                    ));
                }
                Reply::Crashed(msg) => {
                    runner.take().unwrap().kill();
                    crashes += 1;
                    if crashes > 1 {
                        return Ok(Outcome::new(
                            Status::Error,
                            elapsed,
                            Some(format!("runner crashed: {msg}")),
                        ));
                    }
                    log::debug!("runner crashed on {}, retrying: {msg}", req.id);
                }
            }
        }
    }
}

/// One-shot convenience: builds a harness from `cfg` and runs one matrix.
pub fn execute_matrix(
    problem: &Problem,
    solutions: &[CandidateSolution],
    tests: &[TestCase],
    cfg: &HarnessConfig,
) -> Result<ExecutionMatrix> {
    Harness::new(cfg.clone())?.execute_matrix(problem, solutions, tests)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut cfg = HarnessConfig::new(vec!["runner".into()]);
        assert_eq!(cfg.timeout_ms, 3000);
        assert!(cfg.validate().is_ok());
        cfg.workers = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn empty_grid_spawns_nothing() {
        let cfg = HarnessConfig::new(vec!["/definitely/not/a/runner".into()]);
        let mut h = Harness::new(cfg).unwrap();
        let p = Problem::new("t", "", "f");
        let sols = vec![CandidateSolution {
            task_id: "t".into(),
            solution_id: 0,
            source: "x".into(),
        }];
        let m = h.execute_matrix(&p, &sols, &[]).unwrap();
        assert_eq!((m.solutions(), m.tests()), (1, 0));
        assert_eq!(h.stats(), HarnessStats::default());
    }

    #[test]
    fn unspawnable_runner_is_a_runner_error() {
        let cfg = HarnessConfig::new(vec!["/definitely/not/a/runner".into()]);
        let p = Problem::new("t", "", "f");
        let sols = vec![CandidateSolution {
            task_id: "t".into(),
            solution_id: 0,
            source: "x".into(),
        }];
        let tests = vec![TestCase {
            task_id: "t".into(),
            test_id: 0,
            assertion: "assert f(1) == 1".into(),
        }];
        let err = execute_matrix(&p, &sols, &tests, &cfg).unwrap_err();
        assert_eq!(err.class(), crate::error::ErrorClass::Runner);
    }
}
