//! Consensus-set formation from an execution matrix.
//!
//! Two solutions agree when they pass exactly the same generated tests. A
//! consensus set is a maximal group of agreeing solutions paired with the
//! tests they all pass, so the sets partition the solutions of a task while
//! their test sets may overlap.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ExecutionMatrix;

/// Tests a single solution passes, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PassVector {
    pub solution_id: usize,
    pub passed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusSet {
    /// Ascending, non-empty.
    pub solutions: Vec<usize>,
    /// Ascending; the passed-test set shared by every member.
    pub tests: Vec<usize>,
    /// Filled in by scoring; zero until then.
    #[serde(default)]
    pub score: f64,
}

impl ConsensusSet {
    pub fn new(solutions: Vec<usize>, tests: Vec<usize>) -> Self {
        ConsensusSet {
            solutions,
            tests,
            score: 0.0,
        }
    }
}

pub fn pass_vectors(matrix: &ExecutionMatrix) -> Vec<PassVector> {
    (0..matrix.solutions())
        .map(|s| PassVector {
            solution_id: s,
            passed: (0..matrix.tests())
                .filter(|&t| matrix.passes(s, t))
                .collect(),
        })
        .collect()
}

/// Partitions the solutions by exact passed-test set.
///
/// Output is sorted by descending set size, then ascending smallest solution
/// id.
pub fn group_exhaustive(matrix: &ExecutionMatrix) -> Vec<ConsensusSet> {
    let mut groups: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for pv in pass_vectors(matrix) {
        groups.entry(pv.passed).or_default().push(pv.solution_id);
    }
    let mut sets: Vec<ConsensusSet> = groups
        .into_iter()
        .map(|(tests, solutions)| ConsensusSet::new(solutions, tests))
        .collect();
    sort_sets(&mut sets);
    sets
}

/// Counters from a sampled grouping run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RansacStats {
    pub inliers: usize,
    pub outliers: usize,
}

/// Randomized grouping: each iteration draws a `(solution, test)` pair. When
/// the solution passes the test the pair is an inlier, and every solution
/// sharing its pass vector is collected together with their shared tests.
/// Outlier draws contribute nothing.
///
/// Solutions that pass no test at all can never be drawn as inliers; they are
/// appended as one set with an empty test list so that, once enough
/// iterations have run, the result equals [`group_exhaustive`].
pub fn group_ransac(matrix: &ExecutionMatrix, iterations: usize, seed: u64) -> Vec<ConsensusSet> {
    group_ransac_with_stats(matrix, iterations, seed).0
}

pub fn group_ransac_with_stats(
    matrix: &ExecutionMatrix,
    iterations: usize,
    seed: u64,
) -> (Vec<ConsensusSet>, RansacStats) {
    let vectors = pass_vectors(matrix);
    let mut stats = RansacStats::default();
    let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
    let (n, m) = (matrix.solutions(), matrix.tests());

    if n > 0 && m > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..iterations {
            let s = rng.random_range(0..n);
            let t = rng.random_range(0..m);
            if matrix.passes(s, t) {
                stats.inliers += 1;
                found.insert(vectors[s].passed.clone());
            } else {
                stats.outliers += 1;
            }
        }
    }

    let mut sets: Vec<ConsensusSet> = found
        .into_iter()
        .map(|tests| {
            let solutions = vectors
                .iter()
                .filter(|pv| pv.passed == tests)
                .map(|pv| pv.solution_id)
                .collect();
            ConsensusSet::new(solutions, tests)
        })
        .collect();

    let never_pass: Vec<usize> = vectors
        .iter()
        .filter(|pv| pv.passed.is_empty())
        .map(|pv| pv.solution_id)
        .collect();
    if !never_pass.is_empty() {
        sets.push(ConsensusSet::new(never_pass, Vec::new()));
    }
    sort_sets(&mut sets);
    (sets, stats)
}

/// Descending size, then ascending smallest solution id.
pub fn sort_sets(sets: &mut [ConsensusSet]) {
    for set in sets.iter_mut() {
        set.solutions.sort_unstable();
        set.tests.sort_unstable();
    }
    sets.sort_by(|a, b| {
        b.solutions
            .len()
            .cmp(&a.solutions.len())
            .then(a.solutions.first().cmp(&b.solutions.first()))
    });
}

/// Checks that `sets` is a partition of `0..n` into non-empty groups and
/// returns `n`.
pub fn check_partition(sets: &[ConsensusSet]) -> Result<usize> {
    let n: usize = sets.iter().map(|s| s.solutions.len()).sum();
    let mut seen = vec![false; n];
    for (i, set) in sets.iter().enumerate() {
        if set.solutions.is_empty() {
            return Err(Error::InvalidPartition(format!("set {i} is empty")));
        }
        for &s in &set.solutions {
            if s >= n {
                return Err(Error::InvalidPartition(format!(
                    "solution {s} outside 0..{n}"
                )));
            }
            if std::mem::replace(&mut seen[s], true) {
                return Err(Error::InvalidPartition(format!(
                    "solution {s} appears in more than one set"
                )));
            }
        }
    }
    Ok(n)
}
