//! Corpus loading, id densification and serialization.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{CandidateSolution, Problem, TestCase};
use crate::records::{
    read_jsonl, write_jsonl, IdKind, IdMapRecord, ProblemRecord, SolutionRecord, TestRecord,
};

/// A problem with its candidate solutions and generated tests, both indexed
/// densely from zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub problem: Problem,
    pub solutions: Vec<CandidateSolution>,
    pub tests: Vec<TestCase>,
}

impl Task {
    pub fn task_id(&self) -> &str {
        &self.problem.task_id
    }
}

/// Immutable, cross-referenced set of tasks.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    tasks: Vec<Task>,
    index: HashMap<String, usize>,
    id_map: Vec<IdMapRecord>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.tasks == other.tasks
    }
}

impl Corpus {
    /// Builds a corpus from already-dense tasks.
    pub fn new(tasks: Vec<Task>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tasks.len());
        let mut id_map = Vec::new();
        for (i, task) in tasks.iter().enumerate() {
            let id = task.task_id();
            if task.problem.entry_point.is_empty() {
                return Err(Error::Data(format!("task {id} has an empty entry_point")));
            }
            if index.insert(id.to_string(), i).is_some() {
                return Err(Error::DuplicateTask(id.to_string()));
            }
            for (j, s) in task.solutions.iter().enumerate() {
                if s.solution_id != j || s.task_id != id {
                    return Err(Error::Data(format!(
                        "task {id}: solution at position {j} has id {} (task {})",
                        s.solution_id, s.task_id
                    )));
                }
                id_map.push(IdMapRecord {
                    task_id: id.to_string(),
                    kind: IdKind::Solution,
                    external_id: Value::from(j),
                    id: j,
                });
            }
            for (j, t) in task.tests.iter().enumerate() {
                if t.test_id != j || t.task_id != id {
                    return Err(Error::Data(format!(
                        "task {id}: test at position {j} has id {} (task {})",
                        t.test_id, t.task_id
                    )));
                }
                id_map.push(IdMapRecord {
                    task_id: id.to_string(),
                    kind: IdKind::Test,
                    external_id: Value::from(j),
                    id: j,
                });
            }
        }
        Ok(Corpus {
            tasks,
            index,
            id_map,
        })
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, task_id: &str) -> Option<&Task> {
        self.index.get(task_id).map(|&i| &self.tasks[i])
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// External-to-dense id table, one entry per solution and test.
    pub fn id_map(&self) -> &[IdMapRecord] {
        &self.id_map
    }

    /// Writes the corpus back out with dense ids.
    pub fn write(&self, problems: &Path, solutions: &Path, tests: &Path) -> Result<()> {
        let p: Vec<ProblemRecord> = self
            .tasks
            .iter()
            .map(|t| ProblemRecord {
                task_id: t.problem.task_id.clone(),
                prompt: t.problem.prompt.clone(),
                entry_point: t.problem.entry_point.clone(),
                hidden_tests: t.problem.hidden_tests().map(|h| h.assertions().to_vec()),
            })
            .collect();
        let s: Vec<SolutionRecord> = self
            .tasks
            .iter()
            .flat_map(|t| &t.solutions)
            .map(|s| SolutionRecord {
                task_id: s.task_id.clone(),
                solution_id: Some(Value::from(s.solution_id)),
                completion: s.source.clone(),
            })
            .collect();
        let ts: Vec<TestRecord> = self
            .tasks
            .iter()
            .flat_map(|t| &t.tests)
            .map(|t| TestRecord {
                task_id: t.task_id.clone(),
                test_id: Some(Value::from(t.test_id)),
                assertion: t.assertion.clone(),
            })
            .collect();
        write_jsonl(problems, &p)?;
        write_jsonl(solutions, &s)?;
        write_jsonl(tests, &ts)
    }
}

/// Loads problems, solutions and tests from line-delimited files and
/// cross-references them.
pub fn load_corpus(
    problems_path: &Path,
    solutions_path: &Path,
    tests_path: &Path,
) -> Result<Corpus> {
    let problems: Vec<(usize, ProblemRecord)> = read_jsonl(problems_path)?;
    let solutions: Vec<(usize, SolutionRecord)> = read_jsonl(solutions_path)?;
    let tests: Vec<(usize, TestRecord)> = read_jsonl(tests_path)?;

    let mut index = HashMap::new();
    let mut tasks = Vec::with_capacity(problems.len());
    for (line, rec) in problems {
        if rec.entry_point.is_empty() {
            return Err(Error::Parse {
                path: problems_path.to_path_buf(),
                line,
                message: "entry_point is empty".into(),
            });
        }
        if index.insert(rec.task_id.clone(), tasks.len()).is_some() {
            return Err(Error::DuplicateTask(rec.task_id));
        }
        let mut problem = Problem::new(rec.task_id, rec.prompt, rec.entry_point);
        if let Some(hidden) = rec.hidden_tests {
            problem = problem.with_hidden_tests(hidden);
        }
        tasks.push(Task {
            problem,
            solutions: Vec::new(),
            tests: Vec::new(),
        });
    }

    let mut orphans = BTreeSet::new();
    let mut sol_groups: Vec<Vec<(Option<Value>, String)>> = vec![Vec::new(); tasks.len()];
    for (_, rec) in solutions {
        match index.get(&rec.task_id) {
            Some(&i) => sol_groups[i].push((rec.solution_id, rec.completion)),
            None => {
                orphans.insert(rec.task_id);
            }
        }
    }
    let mut test_groups: Vec<Vec<(Option<Value>, String)>> = vec![Vec::new(); tasks.len()];
    for (_, rec) in tests {
        match index.get(&rec.task_id) {
            Some(&i) => test_groups[i].push((rec.test_id, rec.assertion)),
            None => {
                orphans.insert(rec.task_id);
            }
        }
    }
    if !orphans.is_empty() {
        return Err(Error::OrphanTasks(orphans.into_iter().collect()));
    }

    let mut id_map = Vec::new();
    for ((task, sols), tsts) in tasks.iter_mut().zip(sol_groups).zip(test_groups) {
        let task_id = task.problem.task_id.clone();
        for (dense, external, source) in densify(&task_id, "solution", sols)? {
            id_map.push(IdMapRecord {
                task_id: task_id.clone(),
                kind: IdKind::Solution,
                external_id: external,
                id: dense,
            });
            task.solutions.push(CandidateSolution {
                task_id: task_id.clone(),
                solution_id: dense,
                source,
            });
        }
        for (dense, external, assertion) in densify(&task_id, "test", tsts)? {
            id_map.push(IdMapRecord {
                task_id: task_id.clone(),
                kind: IdKind::Test,
                external_id: external,
                id: dense,
            });
            task.tests.push(TestCase {
                task_id: task_id.clone(),
                test_id: dense,
                assertion,
            });
        }
    }

    Ok(Corpus {
        tasks,
        index,
        id_map,
    })
}

/// Assigns dense ids to one task's items, returned sorted by dense id.
///
/// Items without ids are numbered in file order. Integer ids keep their
/// relative order (and stay unchanged when already `0..n`). Any other id
/// shape is numbered in file order.
fn densify(
    task_id: &str,
    kind: &'static str,
    items: Vec<(Option<Value>, String)>,
) -> Result<Vec<(usize, Value, String)>> {
    let with_ids = items.iter().filter(|(id, _)| id.is_some()).count();
    if with_ids == 0 {
        return Ok(items
            .into_iter()
            .enumerate()
            .map(|(i, (_, text))| (i, Value::Null, text))
            .collect());
    }
    if with_ids != items.len() {
        return Err(Error::Data(format!(
            "task {task_id}: some {kind} lines carry ids and some do not"
        )));
    }

    let mut seen = BTreeSet::new();
    for (id, _) in &items {
        let key = id.as_ref().unwrap().to_string();
        if !seen.insert(key.clone()) {
            return Err(Error::DuplicateId {
                kind,
                task_id: task_id.to_string(),
                id: key,
            });
        }
    }

    let ints: Option<Vec<u64>> = items
        .iter()
        .map(|(id, _)| id.as_ref().and_then(Value::as_u64))
        .collect();
    let mut out: Vec<(usize, Value, String)> = match ints {
        Some(ints) => {
            let mut sorted = ints.clone();
            sorted.sort_unstable();
            items
                .into_iter()
                .zip(ints)
                .map(|((id, text), raw)| {
                    let dense = sorted.binary_search(&raw).unwrap();
                    (dense, id.unwrap(), text)
                })
                .collect()
        }
        None => items
            .into_iter()
            .enumerate()
            .map(|(i, (id, text))| (i, id.unwrap(), text))
            .collect(),
    };
    out.sort_by_key(|(dense, _, _)| *dense);
    Ok(out)
}
