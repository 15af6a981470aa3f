//! Synthetic corpora with planted ground truth.
//!
//! Each task gets a block of correct solutions that pass exactly the valid
//! tests, optional clusters of agreeing wrong solutions, and wrong singletons.
//! Invalid tests model generated tests with wrong expected outputs: correct
//! solutions fail them. Wrong pass vectors are drawn test by test with
//! probability [`WRONG_PASS_PROB`] and resampled until every planted group
//! has a distinct vector, so consensus grouping recovers the plant exactly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Task};
use crate::error::{Error, Result};
use crate::model::{CandidateSolution, ExecutionMatrix, Problem, TestCase};
use crate::records::TruthRecord;

/// Chance that a wrong solution passes any given test.
pub const WRONG_PASS_PROB: f64 = 0.5;

const MAX_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub tasks: usize,
    pub solutions_per_task: usize,
    pub tests_per_task: usize,
    pub correct_solution_rate: f64,
    pub valid_test_rate: f64,
    #[serde(default)]
    pub wrong_cluster_sizes: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl SynthSpec {
    pub fn correct_count(&self) -> usize {
        (self.correct_solution_rate * self.solutions_per_task as f64).round() as usize
    }

    pub fn valid_count(&self) -> usize {
        (self.valid_test_rate * self.tests_per_task as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks == 0 || self.solutions_per_task == 0 || self.tests_per_task == 0 {
            return Err(Error::InfeasibleSpec(
                "tasks, solutions_per_task and tests_per_task must be positive".into(),
            ));
        }
        for (name, v) in [
            ("correct_solution_rate", self.correct_solution_rate),
            ("valid_test_rate", self.valid_test_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InfeasibleSpec(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        if self.wrong_cluster_sizes.contains(&0) {
            return Err(Error::InfeasibleSpec(
                "wrong cluster sizes must be positive".into(),
            ));
        }
        let incorrect = self.solutions_per_task - self.correct_count();
        let clustered: usize = self.wrong_cluster_sizes.iter().sum();
        if clustered > incorrect {
            return Err(Error::InfeasibleSpec(format!(
                "wrong clusters hold {clustered} solutions but only {incorrect} are incorrect"
            )));
        }
        Ok(())
    }
}

/// A generated corpus with its matrices and planted labels, all indexed by
/// task in the same order.
#[derive(Debug, Clone)]
pub struct SynthBundle {
    pub corpus: Corpus,
    pub matrices: Vec<ExecutionMatrix>,
    pub truth: Vec<TruthRecord>,
    /// Member ids of each planted wrong cluster, per task.
    pub wrong_clusters: Vec<Vec<Vec<usize>>>,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthBundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, m) = (spec.solutions_per_task, spec.tests_per_task);
    let (n_correct, n_valid) = (spec.correct_count(), spec.valid_count());

    let mut tasks = Vec::with_capacity(spec.tasks);
    let mut matrices = Vec::with_capacity(spec.tasks);
    let mut truth = Vec::with_capacity(spec.tasks);
    let mut wrong_clusters = Vec::with_capacity(spec.tasks);

    for i in 0..spec.tasks {
        let task_id = format!("synth/{i}");
        let mut solution_order: Vec<usize> = (0..n).collect();
        solution_order.shuffle(&mut rng);
        let mut test_order: Vec<usize> = (0..m).collect();
        test_order.shuffle(&mut rng);

        let mut valid = vec![false; m];
        for &t in &test_order[..n_valid] {
            valid[t] = true;
        }

        let mut rows: Vec<Vec<bool>> = vec![Vec::new(); n];
        let mut used: Vec<Vec<bool>> = Vec::new();
        let correct: Vec<usize> = sorted(&solution_order[..n_correct]);
        if n_correct > 0 {
            used.push(valid.clone());
        }
        for &s in &correct {
            rows[s] = valid.clone();
        }

        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut next = n_correct;
        for &size in &spec.wrong_cluster_sizes {
            groups.push(sorted(&solution_order[next..next + size]));
            next += size;
        }
        let clusters = groups.clone();
        groups.extend(solution_order[next..].iter().map(|&s| vec![s]));

        for group in &groups {
            let vector = draw_distinct(&mut rng, m, &used).ok_or_else(|| {
                Error::InfeasibleSpec(format!(
                    "task {task_id}: could not draw {} distinct pass vectors over {m} tests",
                    groups.len() + used.len()
                ))
            })?;
            used.push(vector.clone());
            for &s in group {
                rows[s] = vector.clone();
            }
        }

        matrices.push(ExecutionMatrix::from_bools(task_id.clone(), &rows)?);
        truth.push(TruthRecord {
            task_id: task_id.clone(),
            correct_solution_ids: correct,
            valid_test_ids: (0..m).filter(|&t| valid[t]).collect(),
        });
        wrong_clusters.push(clusters);
        tasks.push(Task {
            problem: Problem::new(task_id.clone(), format!("synthetic task {i}"), "f"),
            solutions: (0..n)
                .map(|s| CandidateSolution {
                    task_id: task_id.clone(),
                    solution_id: s,
                    source: format!("# synthetic solution {s} of {task_id}"),
                })
                .collect(),
            tests: (0..m)
                .map(|t| TestCase {
                    task_id: task_id.clone(),
                    test_id: t,
                    assertion: format!("assert synthetic_check({t})"),
                })
                .collect(),
        });
    }

    Ok(SynthBundle {
        corpus: Corpus::new(tasks)?,
        matrices,
        truth,
        wrong_clusters,
    })
}

fn sorted(ids: &[usize]) -> Vec<usize> {
    let mut v = ids.to_vec();
    v.sort_unstable();
    v
}

fn draw_distinct(rng: &mut impl Rng, m: usize, used: &[Vec<bool>]) -> Option<Vec<bool>> {
    for _ in 0..MAX_DRAWS {
        let v: Vec<bool> = (0..m).map(|_| rng.random_bool(WRONG_PASS_PROB)).collect();
        if !used.contains(&v) {
            return Some(v);
        }
    }
    None
}
