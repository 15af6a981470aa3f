#![allow(dead_code)]

use exrank_core::{CandidateSolution, Corpus, Problem, Task, TestCase};

pub const SQUARE_SOLUTIONS: [&str; 3] = [
    "def num_square(a):\n    return a**2",
    "def num_square(a):\n    return a*a",
    "def num_square(a):\n    return a",
];

pub const SQUARE_TESTS: [&str; 3] = [
    "assert num_square(1) == 1",
    "assert num_square(2) == 4",
    "assert num_square(0) == 0",
];

pub const SQUARE_HIDDEN: [&str; 2] = ["assert num_square(3) == 9", "assert num_square(4) == 16"];

pub fn stub_runner() -> Vec<String> {
    vec![env!("CARGO_BIN_EXE_exrank-stub-runner").to_string()]
}

pub fn task(task_id: &str, entry: &str, solutions: &[&str], tests: &[&str]) -> Task {
    Task {
        problem: Problem::new(task_id, "", entry),
        solutions: solutions
            .iter()
            .enumerate()
            .map(|(i, s)| CandidateSolution {
                task_id: task_id.into(),
                solution_id: i,
                source: s.to_string(),
            })
            .collect(),
        tests: tests
            .iter()
            .enumerate()
            .map(|(i, t)| TestCase {
                task_id: task_id.into(),
                test_id: i,
                assertion: t.to_string(),
            })
            .collect(),
    }
}

pub fn square_task() -> Task {
    let mut t = task("square", "num_square", &SQUARE_SOLUTIONS, &SQUARE_TESTS);
    t.problem = t
        .problem
        .with_hidden_tests(SQUARE_HIDDEN.iter().map(|s| s.to_string()).collect());
    t
}

pub fn square_corpus() -> Corpus {
    Corpus::new(vec![square_task()]).unwrap()
}
