//! Selects among generated code solutions by execution agreement.
//!
//! Solutions are run against generated tests, grouped into consensus sets of
//! solutions that pass identical tests, scored by set size and test count,
//! and ranked with a seeded genetic algorithm.

pub mod consensus;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod rank;
pub mod records;
pub mod synth;

pub use consensus::{group_exhaustive, group_ransac, ConsensusSet, PassVector};
pub use corpus::{load_corpus, Corpus, Task};
pub use error::{Error, ErrorClass, Result};
pub use harness::{execute_matrix, warm_cache, Harness, HarnessConfig, MatrixCache};
pub use metrics::{
    build_report, pass_at_k_ranked, pass_at_k_unbiased, tune, CorrectnessVector, DevTask, Method,
    PassAtKReport,
};
pub use model::{
    CandidateSolution, ExecutionMatrix, HiddenTests, Outcome, Problem, ScoreParams, Status,
    TestCase,
};
pub use rank::{
    fitness, rank, rank_by_scores, rank_with_trace, score_set, select_top_k, GaConfig, RankRun,
    RankedSelection,
};
pub use synth::{generate, SynthBundle, SynthSpec};
