//! Inputs shared by the benchmarks in `benches/`.

use exrank_core::{generate, group_exhaustive, ConsensusSet, ExecutionMatrix, SynthSpec};

/// One synthetic task with `solutions` rows and `tests` columns, including
/// a few agreeing wrong clusters.
pub fn matrix(solutions: usize, tests: usize) -> ExecutionMatrix {
    let spec = SynthSpec {
        tasks: 1,
        solutions_per_task: solutions,
        tests_per_task: tests,
        correct_solution_rate: 0.3,
        valid_test_rate: 0.9,
        wrong_cluster_sizes: vec![solutions / 10, solutions / 20]
            .into_iter()
            .filter(|&s| s > 0)
            .collect(),
        seed: 17,
    };
    generate(&spec)
        .expect("feasible bench spec")
        .matrices
        .remove(0)
}

pub fn sets(solutions: usize, tests: usize) -> Vec<ConsensusSet> {
    group_exhaustive(&matrix(solutions, tests))
}
