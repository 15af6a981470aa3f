//! pass@k evaluation, Table-style reports and supervised alpha/beta tuning.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::consensus::{group_exhaustive, ConsensusSet};
use crate::corpus::Task;
use crate::error::{Error, Result};
use crate::model::{ExecutionMatrix, ScoreParams};
use crate::rank::{rank, select_top_k, GaConfig, RankedSelection};

/// Unbiased pass@k estimate `1 - C(n-c, k) / C(n, k)`, evaluated as the
/// product `prod_{i<k} (n-c-i) / (n-i)`.
pub fn pass_at_k_unbiased(n: usize, c: usize, k: usize) -> Result<f64> {
    if n == 0 || k == 0 {
        return Err(Error::Invalid(format!(
            "pass@k needs n >= 1 and k >= 1 (n={n}, k={k})"
        )));
    }
    if c > n {
        return Err(Error::Invalid(format!("c={c} exceeds n={n}")));
    }
    if k > n {
        return Err(Error::KExceedsN { k, n });
    }
    if n - c < k {
        return Ok(1.0);
    }
    let miss: f64 = (0..k)
        .map(|i| (n - c - i) as f64 / (n - i) as f64)
        .product();
    Ok(1.0 - miss)
}

/// Solutions that pass every hidden test of a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectnessVector {
    pub task_id: String,
    pub correct: Vec<usize>,
}

impl CorrectnessVector {
    pub fn new(task_id: impl Into<String>, mut correct: Vec<usize>) -> Self {
        correct.sort_unstable();
        correct.dedup();
        CorrectnessVector {
            task_id: task_id.into(),
            correct,
        }
    }

    /// Derives correctness from a matrix of hidden-test outcomes. A task
    /// without hidden tests cannot be judged and is an error.
    pub fn from_hidden_matrix(hidden: &ExecutionMatrix) -> Result<Self> {
        if hidden.tests() == 0 {
            return Err(Error::NoHiddenTests(hidden.task_id().to_string()));
        }
        let correct = (0..hidden.solutions())
            .filter(|&s| (0..hidden.tests()).all(|t| hidden.passes(s, t)))
            .collect();
        Ok(CorrectnessVector::new(hidden.task_id(), correct))
    }

    pub fn is_correct(&self, solution: usize) -> bool {
        self.correct.binary_search(&solution).is_ok()
    }
}

/// 1.0 when any of the top `k` ranked solutions is correct, else 0.0.
pub fn pass_at_k_ranked(sel: &RankedSelection, correct: &CorrectnessVector, k: usize) -> f64 {
    debug_assert_eq!(sel.task_id, correct.task_id);
    if select_top_k(sel, k).iter().any(|&s| correct.is_correct(s)) {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Baseline,
    Ranked,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Baseline => "Baseline",
            Method::Ranked => "Ranked",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassAtKReport {
    pub method: Method,
    pub k_values: Vec<usize>,
    /// Per task and k: success indicator (ranked) or probability (baseline).
    pub per_task: BTreeMap<String, BTreeMap<usize, f64>>,
    /// Percentage over tasks, per k.
    pub aggregate: BTreeMap<usize, f64>,
}

/// Builds a report over `task_ids`.
///
/// Baseline rows use the unbiased estimator with `n` = number of ranked
/// solutions; `k > n` is evaluated at `k = n` and a task with no solutions
/// scores zero. Ranked rows use the ranked top-k indicator.
pub fn build_report(
    task_ids: &[String],
    selections: &[RankedSelection],
    correctness: &[CorrectnessVector],
    k_values: &[usize],
    method: Method,
) -> Result<PassAtKReport> {
    if k_values.is_empty() || k_values.contains(&0) {
        return Err(Error::Invalid(
            "k_values must be non-empty and positive".into(),
        ));
    }
    let sel: HashMap<&str, &RankedSelection> =
        selections.iter().map(|s| (s.task_id.as_str(), s)).collect();
    let cor: HashMap<&str, &CorrectnessVector> = correctness
        .iter()
        .map(|c| (c.task_id.as_str(), c))
        .collect();
    let missing: Vec<String> = task_ids
        .iter()
        .filter(|t| !sel.contains_key(t.as_str()) || !cor.contains_key(t.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingTasks(missing));
    }

    let mut per_task = BTreeMap::new();
    let mut sums: BTreeMap<usize, f64> = k_values.iter().map(|&k| (k, 0.0)).collect();
    for task in task_ids {
        let (s, c) = (sel[task.as_str()], cor[task.as_str()]);
        let mut row = BTreeMap::new();
        for &k in k_values {
            let v = match method {
                Method::Ranked => pass_at_k_ranked(s, c, k),
                Method::Baseline => {
                    let n = s.len();
                    if n == 0 {
                        0.0
                    } else {
                        pass_at_k_unbiased(n, c.correct.len(), k.min(n))?
                    }
                }
            };
            *sums.get_mut(&k).unwrap() += v;
            row.insert(k, v);
        }
        per_task.insert(task.clone(), row);
    }
    let count = task_ids.len().max(1) as f64;
    let aggregate = sums
        .into_iter()
        .map(|(k, sum)| (k, 100.0 * sum / count))
        .collect();
    Ok(PassAtKReport {
        method,
        k_values: k_values.to_vec(),
        per_task,
        aggregate,
    })
}

/// Aligned text table with one row per k and one column per report.
pub fn render_table(reports: &[PassAtKReport]) -> String {
    let mut ks: Vec<usize> = reports.iter().flat_map(|r| r.k_values.clone()).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut out = String::new();
    let _ = write!(out, "{:<8}", "k");
    for r in reports {
        let _ = write!(out, " {:>9}", r.method.label());
    }
    out.push('\n');
    for k in &ks {
        let _ = write!(out, "{:<8}", format!("pass@{k}"));
        for r in reports {
            match r.aggregate.get(k) {
                Some(v) => {
                    let _ = write!(out, " {v:>9.1}");
                }
                None => {
                    let _ = write!(out, " {:>9}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// What tuning sees of a development task: its consensus sets and the
/// labels used to judge a ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct DevTask {
    pub task_id: String,
    pub sets: Vec<ConsensusSet>,
    pub correct: CorrectnessVector,
}

impl DevTask {
    /// Assembles a dev task from its generated-test matrix and the matrix of
    /// its hidden tests. Fails when the problem has no hidden tests.
    pub fn from_matrices(
        task: &Task,
        matrix: &ExecutionMatrix,
        hidden: &ExecutionMatrix,
    ) -> Result<Self> {
        let id = task.task_id();
        match task.problem.hidden_tests() {
            Some(h) if !h.is_empty() => {}
            _ => return Err(Error::NoHiddenTests(id.to_string())),
        }
        Ok(DevTask {
            task_id: id.to_string(),
            sets: group_exhaustive(matrix),
            correct: CorrectnessVector::from_hidden_matrix(hidden)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub beta: f64,
    /// Mean ranked pass@1 over dev tasks, as a percentage.
    pub pass_at_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub params: ScoreParams,
    pub pass_at_1: f64,
    pub grid: Vec<GridPoint>,
}

/// Grid search for the `(alpha, beta)` maximizing mean ranked pass@1 over
/// `dev`. Ties go to the smaller beta, then the smaller alpha.
pub fn tune(
    dev: &[DevTask],
    alpha_grid: &[f64],
    beta_grid: &[f64],
    cfg: &GaConfig,
) -> Result<TuneResult> {
    if alpha_grid.is_empty() || beta_grid.is_empty() {
        return Err(Error::Invalid(
            "alpha and beta grids must be non-empty".into(),
        ));
    }
    let mut grid = Vec::with_capacity(alpha_grid.len() * beta_grid.len());
    let mut best: Option<(usize, ScoreParams)> = None;
    for &alpha in alpha_grid {
        for &beta in beta_grid {
            let params = ScoreParams::new(alpha, beta)?;
            let mut hits = 0usize;
            for task in dev {
                let sel = rank(&task.task_id, &task.sets, &params, cfg)?;
                if pass_at_k_ranked(&sel, &task.correct, 1) > 0.0 {
                    hits += 1;
                }
            }
            grid.push(GridPoint {
                alpha,
                beta,
                pass_at_1: 100.0 * hits as f64 / dev.len().max(1) as f64,
            });
            let better = match best {
                None => true,
                Some((h, p)) => {
                    hits > h
                        || (hits == h && (beta < p.beta || (beta == p.beta && alpha < p.alpha)))
                }
            };
            if better {
                best = Some((hits, params));
            }
        }
    }
    let (hits, params) = best.expect("grid is non-empty");
    Ok(TuneResult {
        params,
        pass_at_1: 100.0 * hits as f64 / dev.len().max(1) as f64,
        grid,
    })
}
