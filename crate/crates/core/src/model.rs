//! Domain types shared by every stage of the pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the diagnostic text kept per outcome.
pub const MAX_DETAIL_BYTES: usize = 512;

/// Ground-truth assertions for a problem.
///
/// Only evaluation code reads these. Consensus formation and ranking operate on
/// an [`ExecutionMatrix`] and never receive a [`Problem`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HiddenTests(Vec<String>);

impl HiddenTests {
    pub fn new(assertions: Vec<String>) -> Self {
        HiddenTests(assertions)
    }

    pub fn assertions(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub task_id: String,
    pub prompt: String,
    pub entry_point: String,
    hidden_tests: Option<HiddenTests>,
}

impl Problem {
    pub fn new(
        task_id: impl Into<String>,
        prompt: impl Into<String>,
        entry_point: impl Into<String>,
    ) -> Self {
        Problem {
            task_id: task_id.into(),
            prompt: prompt.into(),
            entry_point: entry_point.into(),
            hidden_tests: None,
        }
    }

    pub fn with_hidden_tests(mut self, tests: Vec<String>) -> Self {
        self.hidden_tests = Some(HiddenTests::new(tests));
        self
    }

    /// Reference tests used to judge correctness; `None` when the problem ships
    /// without them.
    pub fn hidden_tests(&self) -> Option<&HiddenTests> {
        self.hidden_tests.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSolution {
    pub task_id: String,
    pub solution_id: usize,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub task_id: String,
    pub test_id: usize,
    pub assertion: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    #[serde(alias = "Pass")]
    Pass,
    #[serde(alias = "Fail")]
    Fail,
    #[serde(alias = "Error")]
    Error,
    #[serde(alias = "Timeout")]
    Timeout,
}

impl Status {
    pub fn is_pass(self) -> bool {
        self == Status::Pass
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Error => "error",
            Status::Timeout => "timeout",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub status: Status,
    pub duration_ms: u64,
    pub detail: Option<String>,
}

impl Outcome {
    pub fn new(status: Status, duration_ms: u64, detail: Option<String>) -> Self {
        Outcome {
            status,
            duration_ms,
            detail: detail.map(truncate_detail),
        }
    }

    pub fn pass() -> Self {
        Outcome::new(Status::Pass, 0, None)
    }

    pub fn fail() -> Self {
        Outcome::new(Status::Fail, 0, None)
    }
}

/// Cuts `text` to at most [`MAX_DETAIL_BYTES`] on a char boundary.
pub fn truncate_detail(mut text: String) -> String {
    if text.len() > MAX_DETAIL_BYTES {
        let mut end = MAX_DETAIL_BYTES;
        while !text.is_char_boundary(end) {
            end -= 1;
        }
        text.truncate(end);
    }
    text
}

/// Total map from `(solution_id, test_id)` to [`Outcome`] for one task,
/// stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionMatrix {
    task_id: String,
    solutions: usize,
    tests: usize,
    cells: Vec<Outcome>,
}

impl ExecutionMatrix {
    pub fn new(
        task_id: impl Into<String>,
        solutions: usize,
        tests: usize,
        cells: Vec<Outcome>,
    ) -> Result<Self> {
        let task_id = task_id.into();
        if cells.len() != solutions * tests {
            return Err(Error::Matrix {
                task_id,
                message: format!(
                    "expected {} cells for {solutions}x{tests}, got {}",
                    solutions * tests,
                    cells.len()
                ),
            });
        }
        Ok(ExecutionMatrix {
            task_id,
            solutions,
            tests,
            cells,
        })
    }

    pub fn from_fn(
        task_id: impl Into<String>,
        solutions: usize,
        tests: usize,
        mut f: impl FnMut(usize, usize) -> Outcome,
    ) -> Self {
        let mut cells = Vec::with_capacity(solutions * tests);
        for s in 0..solutions {
            for t in 0..tests {
                cells.push(f(s, t));
            }
        }
        ExecutionMatrix {
            task_id: task_id.into(),
            solutions,
            tests,
            cells,
        }
    }

    /// Builds a Pass/Fail matrix from boolean rows.
    pub fn from_bools(task_id: impl Into<String>, rows: &[Vec<bool>]) -> Result<Self> {
        let task_id = task_id.into();
        let tests = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != tests) {
            return Err(Error::Matrix {
                task_id,
                message: "ragged rows".into(),
            });
        }
        Ok(Self::from_fn(task_id, rows.len(), tests, |s, t| {
            if rows[s][t] {
                Outcome::pass()
            } else {
                Outcome::fail()
            }
        }))
    }

    /// Assembles a matrix from keyed cells, rejecting duplicates and gaps.
    pub fn from_cells(
        task_id: impl Into<String>,
        solutions: usize,
        tests: usize,
        cells: impl IntoIterator<Item = ((usize, usize), Outcome)>,
    ) -> Result<Self> {
        let task_id = task_id.into();
        let mut slots: Vec<Option<Outcome>> = vec![None; solutions * tests];
        for ((s, t), outcome) in cells {
            if s >= solutions || t >= tests {
                return Err(Error::Matrix {
                    task_id,
                    message: format!("cell ({s}, {t}) outside {solutions}x{tests} grid"),
                });
            }
            let slot = &mut slots[s * tests + t];
            if slot.is_some() {
                return Err(Error::Matrix {
                    task_id,
                    message: format!("duplicate cell ({s}, {t})"),
                });
            }
            *slot = Some(outcome);
        }
        let missing: Vec<String> = slots
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_none())
            .take(8)
            .map(|(i, _)| format!("({}, {})", i / tests.max(1), i % tests.max(1)))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Matrix {
                task_id,
                message: format!("missing cells {}", missing.join(", ")),
            });
        }
        Ok(ExecutionMatrix {
            task_id,
            solutions,
            tests,
            cells: slots.into_iter().map(Option::unwrap).collect(),
        })
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn solutions(&self) -> usize {
        self.solutions
    }

    pub fn tests(&self) -> usize {
        self.tests
    }

    pub fn get(&self, solution: usize, test: usize) -> &Outcome {
        assert!(solution < self.solutions && test < self.tests);
        &self.cells[solution * self.tests + test]
    }

    pub fn passes(&self, solution: usize, test: usize) -> bool {
        self.get(solution, test).status.is_pass()
    }

    pub fn row(&self, solution: usize) -> &[Outcome] {
        &self.cells[solution * self.tests..(solution + 1) * self.tests]
    }

    /// Cells in row-major order with their coordinates.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &Outcome)> + '_ {
        let tests = self.tests;
        self.cells
            .iter()
            .enumerate()
            .map(move |(i, o)| ((i / tests, i % tests), o))
    }

    pub fn count(&self, status: Status) -> usize {
        self.cells.iter().filter(|o| o.status == status).count()
    }

    /// Tests whose outcome is `Error` for every solution. Empty when there
    /// are no solutions.
    pub fn all_error_tests(&self) -> Vec<usize> {
        if self.solutions == 0 {
            return Vec::new();
        }
        (0..self.tests)
            .filter(|&t| (0..self.solutions).all(|s| self.get(s, t).status == Status::Error))
            .collect()
    }

    /// Projects the matrix onto the given test columns, renumbering them
    /// densely in the order given.
    pub fn retain_tests(&self, keep: &[usize]) -> ExecutionMatrix {
        ExecutionMatrix::from_fn(self.task_id.clone(), self.solutions, keep.len(), |s, t| {
            self.get(s, keep[t]).clone()
        })
    }
}

/// Exponents for the consensus-set score `|S|^alpha * |T|^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    pub alpha: f64,
    pub beta: f64,
}

impl ScoreParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = ScoreParams { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Invalid(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for ScoreParams {
    fn default() -> Self {
        ScoreParams {
            alpha: 0.5,
            beta: 1.1,
        }
    }
}
