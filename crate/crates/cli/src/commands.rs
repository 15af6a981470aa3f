//! One function per subcommand. Each returns the core error type so `main`
//! can map it to an exit code.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use exrank_core::consensus::{check_partition, group_ransac};
use exrank_core::metrics::render_table;
use exrank_core::rank::score_sets;
use exrank_core::records::{
    matrix_from_records, matrix_records, read_jsonl, write_jsonl, ConsensusRecord, MatrixRecord,
    RankTraceRecord, SelectionRecord, TestRecord, TruthRecord,
};
use exrank_core::{
    build_report, generate, group_exhaustive, load_corpus, rank_with_trace, tune, ConsensusSet,
    Corpus, CorrectnessVector, DevTask, Error, ExecutionMatrix, GaConfig, Harness, Method,
    PassAtKReport, RankRun, RankedSelection, Result, ScoreParams, SynthSpec, Task, TestCase,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{
    k_values, EvalArgs, GroupArgs, GroupingArgs, RankArgs, RunConfig, Strategy, SynthArgs, TuneArgs,
};

/// Output file names inside a run directory.
pub mod files {
    pub const ID_MAP: &str = "id_map.jsonl";
    pub const MATRIX: &str = "matrix.jsonl";
    pub const HIDDEN_MATRIX: &str = "hidden_matrix.jsonl";
    pub const CONSENSUS: &str = "consensus.jsonl";
    pub const SELECTIONS: &str = "selections.jsonl";
    pub const RANK_TRACE: &str = "rank_trace.jsonl";
    pub const REPORT: &str = "report.jsonl";
    pub const REPORT_TABLE: &str = "report.txt";
    pub const STATUS: &str = "run_status.json";
    pub const PROBLEMS: &str = "problems.jsonl";
    pub const SOLUTIONS: &str = "solutions.jsonl";
    pub const TESTS: &str = "tests.jsonl";
    pub const TRUTH: &str = "truth.jsonl";
}

/// Contents of `run_status.json`. Rewritten as each stage starts, so after a
/// failure it names the stage that failed.
#[derive(Debug, Clone, Default, Serialize, serde::Deserialize, PartialEq)]
pub struct RunStatus {
    pub stage: String,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub executed: usize,
    pub cache_hits: usize,
    pub evaluated_tasks: usize,
}

struct StageMarker {
    path: PathBuf,
    status: RunStatus,
}

impl StageMarker {
    fn enter(&mut self, stage: &str) -> Result<()> {
        log::info!("stage {stage}");
        self.status.stage = stage.to_string();
        self.save()
    }

    fn save(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.status).expect("status serializes") + "\n";
        fs::write(&self.path, text).map_err(|e| Error::Io {
            path: self.path.clone(),
            source: e,
        })
    }
}

/// What `run` produced, for callers that want more than the files.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: RunStatus,
    pub reports: Vec<PassAtKReport>,
}

pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary> {
    let out = cfg.out_dir()?;
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    let mut marker = StageMarker {
        path: out.join(files::STATUS),
        status: RunStatus::default(),
    };
    match run_stages(cfg, out, &mut marker) {
        Ok(reports) => {
            marker.status.stage = "done".into();
            marker.status.complete = true;
            marker.save()?;
            Ok(RunSummary {
                status: marker.status,
                reports,
            })
        }
        Err(e) => {
            marker.status.error = Some(e.to_string());
            if let Err(save) = marker.save() {
                log::error!("cannot record failure: {save}");
            }
            Err(e)
        }
    }
}

fn run_stages(cfg: &RunConfig, out: &Path, marker: &mut StageMarker) -> Result<Vec<PassAtKReport>> {
    marker.enter("load")?;
    let (p, s, t) = cfg.corpus.paths()?;
    let mut corpus = load_corpus(p, s, t)?;
    if let Some(path) = &cfg.hidden_tests {
        corpus = attach_hidden_tests(corpus, path)?;
    }
    let truth = cfg.truth.as_deref().map(read_truth).transpose()?;
    let params = cfg.score.params()?;
    let ga = cfg.ga.config()?;
    let k_values = cfg.k_values()?;
    let harness_cfg = cfg.harness()?;
    write_jsonl(&out.join(files::ID_MAP), corpus.id_map())?;

    marker.enter("execute")?;
    let mut harness = Harness::new(harness_cfg)?;
    let timeout = Some(harness.config().timeout_ms);
    let mut matrices = Vec::with_capacity(corpus.len());
    let mut hidden = BTreeMap::new();
    let mut matrix_out = Vec::new();
    let mut hidden_out = Vec::new();
    for task in corpus.tasks() {
        let m = harness.execute_task(task)?;
        matrix_out.extend(matrix_records(task, &m, timeout));
        if let Some(h) = hidden_task(task) {
            let hm = harness.execute_task(&h)?;
            hidden_out.extend(matrix_records(&h, &hm, timeout));
            hidden.insert(task.task_id().to_string(), hm);
        }
        matrices.push(m);
    }
    let stats = harness.stats();
    marker.status.executed = stats.executed;
    marker.status.cache_hits = stats.cache_hits;
    log::info!(
        "executed {} cells, {} from cache",
        stats.executed,
        stats.cache_hits
    );
    write_jsonl(&out.join(files::MATRIX), &matrix_out)?;
    if !hidden_out.is_empty() {
        write_jsonl(&out.join(files::HIDDEN_MATRIX), &hidden_out)?;
    }

    marker.enter("group")?;
    let sets: Vec<Vec<ConsensusSet>> = matrices
        .par_iter()
        .map(|m| group_matrix(m, &cfg.grouping, ga.seed, &params))
        .collect::<Result<_>>()?;
    write_jsonl(
        &out.join(files::CONSENSUS),
        &consensus_records(&corpus_ids(&corpus), &sets),
    )?;

    marker.enter("rank")?;
    let runs = rank_all(&corpus_ids(&corpus), &sets, &params, &ga)?;
    write_rank_outputs(
        &runs,
        &out.join(files::SELECTIONS),
        Some(&out.join(files::RANK_TRACE)),
    )?;

    let correctness: Vec<CorrectnessVector> = match &truth {
        Some(truth) => corpus
            .tasks()
            .iter()
            .filter_map(|t| truth.get(t.task_id()).cloned())
            .collect(),
        None => corpus
            .tasks()
            .iter()
            .filter_map(|t| hidden.get(t.task_id()))
            .map(CorrectnessVector::from_hidden_matrix)
            .collect::<Result<_>>()?,
    };
    if correctness.is_empty() {
        log::info!("no hidden tests or labels; skipping evaluation");
        return Ok(Vec::new());
    }
    marker.enter("eval")?;
    marker.status.evaluated_tasks = correctness.len();
    let selections: Vec<RankedSelection> = runs.into_iter().map(|r| r.selection).collect();
    evaluate(&selections, &correctness, &k_values, out)
}

fn corpus_ids(corpus: &Corpus) -> Vec<String> {
    corpus
        .tasks()
        .iter()
        .map(|t| t.task_id().to_string())
        .collect()
}

/// The task's hidden tests posed as an ordinary test list, or `None` when it
/// has none.
fn hidden_task(task: &Task) -> Option<Task> {
    let hidden = task.problem.hidden_tests().filter(|h| !h.is_empty())?;
    Some(Task {
        problem: task.problem.clone(),
        solutions: task.solutions.clone(),
        tests: hidden
            .assertions()
            .iter()
            .enumerate()
            .map(|(i, a)| TestCase {
                task_id: task.task_id().to_string(),
                test_id: i,
                assertion: a.clone(),
            })
            .collect(),
    })
}

fn attach_hidden_tests(corpus: Corpus, path: &Path) -> Result<Corpus> {
    let mut by_task: HashMap<String, Vec<String>> = HashMap::new();
    for (_, r) in read_jsonl::<TestRecord>(path)? {
        by_task.entry(r.task_id).or_default().push(r.assertion);
    }
    let orphans: Vec<String> = {
        let mut v: Vec<String> = by_task
            .keys()
            .filter(|t| corpus.task(t).is_none())
            .cloned()
            .collect();
        v.sort();
        v
    };
    if !orphans.is_empty() {
        return Err(Error::OrphanTasks(orphans));
    }
    let tasks = corpus
        .tasks()
        .iter()
        .cloned()
        .map(|mut t| {
            if let Some(h) = by_task.remove(t.task_id()) {
                t.problem = t.problem.with_hidden_tests(h);
            }
            t
        })
        .collect();
    Corpus::new(tasks)
}

fn read_truth(path: &Path) -> Result<HashMap<String, CorrectnessVector>> {
    Ok(read_jsonl::<TruthRecord>(path)?
        .into_iter()
        .map(|(_, r)| {
            (
                r.task_id.clone(),
                CorrectnessVector::new(r.task_id, r.correct_solution_ids),
            )
        })
        .collect())
}

/// Groups one matrix and fills in set scores. Test ids in the result refer
/// to the full matrix even when all-error tests were left out.
fn group_matrix(
    m: &ExecutionMatrix,
    grouping: &GroupingArgs,
    seed: u64,
    params: &ScoreParams,
) -> Result<Vec<ConsensusSet>> {
    let keep: Option<Vec<usize>> = if grouping.drop_all_error_tests {
        let dropped = m.all_error_tests();
        if !dropped.is_empty() {
            log::info!("task {}: ignoring all-error tests {dropped:?}", m.task_id());
        }
        Some((0..m.tests()).filter(|t| !dropped.contains(t)).collect())
    } else {
        None
    };
    let projected;
    let m = match &keep {
        Some(keep) => {
            projected = m.retain_tests(keep);
            &projected
        }
        None => m,
    };
    let mut sets = match grouping.strategy.unwrap_or_default() {
        Strategy::Exhaustive => group_exhaustive(m),
        Strategy::Ransac => {
            let iterations = grouping
                .ransac_iterations
                .unwrap_or(10 * m.solutions() * m.tests().max(1));
            group_ransac(m, iterations, seed)
        }
    };
    if let Some(keep) = &keep {
        for set in &mut sets {
            set.tests = set.tests.iter().map(|&t| keep[t]).collect();
        }
    }
    score_sets(&mut sets, params)?;
    Ok(sets)
}

fn consensus_records(task_ids: &[String], sets: &[Vec<ConsensusSet>]) -> Vec<ConsensusRecord> {
    task_ids
        .iter()
        .zip(sets)
        .flat_map(|(task_id, sets)| {
            sets.iter().enumerate().map(move |(i, s)| ConsensusRecord {
                task_id: task_id.clone(),
                set_index: i,
                solution_ids: s.solutions.clone(),
                test_ids: s.tests.clone(),
                score: Some(s.score),
            })
        })
        .collect()
}

fn rank_all(
    task_ids: &[String],
    sets: &[Vec<ConsensusSet>],
    params: &ScoreParams,
    ga: &GaConfig,
) -> Result<Vec<RankRun>> {
    task_ids
        .par_iter()
        .zip(sets)
        .map(|(id, sets)| rank_with_trace(id, sets, params, ga))
        .collect()
}

fn selection_record(sel: &RankedSelection) -> SelectionRecord {
    SelectionRecord {
        task_id: sel.task_id.clone(),
        order: sel.order.clone(),
        solution_scores: sel.solution_scores.iter().copied().enumerate().collect(),
        best: sel.best,
    }
}

fn write_rank_outputs(runs: &[RankRun], selections: &Path, trace: Option<&Path>) -> Result<()> {
    let records: Vec<SelectionRecord> = runs
        .iter()
        .map(|r| selection_record(&r.selection))
        .collect();
    write_jsonl(selections, &records)?;
    if let Some(trace) = trace {
        let traces: Vec<RankTraceRecord> = runs
            .iter()
            .map(|r| RankTraceRecord {
                task_id: r.selection.task_id.clone(),
                order: r.raw_best.clone(),
                solution_scores: selection_record(&r.selection).solution_scores,
                generations_run: r.generations_run,
                best_fitness_trace: r.best_fitness_trace.clone(),
            })
            .collect();
        write_jsonl(trace, &traces)?;
    }
    Ok(())
}

/// Builds Baseline and Ranked reports over the tasks that have labels and
/// writes them to `out`.
fn evaluate(
    selections: &[RankedSelection],
    correctness: &[CorrectnessVector],
    k_values: &[usize],
    out: &Path,
) -> Result<Vec<PassAtKReport>> {
    let labeled: Vec<String> = correctness.iter().map(|c| c.task_id.clone()).collect();
    let skipped = selections.len().saturating_sub(labeled.len());
    if skipped > 0 {
        log::warn!("{skipped} task(s) have no labels and are left out of the report");
    }
    let reports = [Method::Baseline, Method::Ranked]
        .into_iter()
        .map(|m| build_report(&labeled, selections, correctness, k_values, m))
        .collect::<Result<Vec<_>>>()?;
    write_jsonl(&out.join(files::REPORT), &reports)?;
    let table = render_table(&reports);
    let path = out.join(files::REPORT_TABLE);
    fs::write(&path, &table).map_err(|e| Error::Io { path, source: e })?;
    Ok(reports)
}

fn read_matrix_records(path: &Path) -> Result<Vec<MatrixRecord>> {
    Ok(read_jsonl(path)?.into_iter().map(|(_, r)| r).collect())
}

fn corpus_matrices(corpus: &Corpus, records: &[MatrixRecord]) -> Result<Vec<ExecutionMatrix>> {
    corpus
        .tasks()
        .iter()
        .map(|t| {
            matrix_from_records(
                t.task_id(),
                t.solutions.len(),
                t.tests.len(),
                records,
                Some(t),
            )
        })
        .collect()
}

pub fn cmd_group(args: &GroupArgs) -> Result<()> {
    let (p, s, t) = args.corpus.paths()?;
    let corpus = load_corpus(p, s, t)?;
    let records = read_matrix_records(&args.matrix)?;
    let matrices = corpus_matrices(&corpus, &records)?;
    let params = args.score.params()?;
    let seed = args.seed.unwrap_or_default();
    let sets: Vec<Vec<ConsensusSet>> = matrices
        .par_iter()
        .map(|m| group_matrix(m, &args.grouping, seed, &params))
        .collect::<Result<_>>()?;
    write_jsonl(&args.out, &consensus_records(&corpus_ids(&corpus), &sets))
}

pub fn cmd_rank(args: &RankArgs) -> Result<()> {
    let mut by_task: BTreeMap<String, Vec<(usize, ConsensusSet)>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for (_, r) in read_jsonl::<ConsensusRecord>(&args.consensus)? {
        if !by_task.contains_key(&r.task_id) {
            order.push(r.task_id.clone());
        }
        by_task
            .entry(r.task_id)
            .or_default()
            .push((r.set_index, ConsensusSet::new(r.solution_ids, r.test_ids)));
    }
    if let Some(problems) = &args.problems {
        let listed: Vec<String> = read_jsonl::<exrank_core::records::ProblemRecord>(problems)?
            .into_iter()
            .map(|(_, p)| p.task_id)
            .collect();
        let unknown: Vec<String> = order
            .iter()
            .filter(|t| !listed.contains(t))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(Error::OrphanTasks(unknown));
        }
        order = listed;
    }
    let sets: Vec<Vec<ConsensusSet>> = order
        .iter()
        .map(|t| {
            let mut sets = by_task.remove(t).unwrap_or_default();
            sets.sort_by_key(|(i, _)| *i);
            let sets: Vec<ConsensusSet> = sets.into_iter().map(|(_, s)| s).collect();
            check_partition(&sets).map_err(|e| Error::Data(format!("task {t}: {e}")))?;
            Ok(sets)
        })
        .collect::<Result<_>>()?;
    let runs = rank_all(&order, &sets, &args.score.params()?, &args.ga.config()?)?;
    write_rank_outputs(&runs, &args.out, args.trace.as_deref())
}

fn selections_from_file(path: &Path) -> Result<Vec<RankedSelection>> {
    read_jsonl::<SelectionRecord>(path)?
        .into_iter()
        .map(|(line, r)| {
            let n = r.order.len();
            let scores: Vec<f64> = (0..n)
                .map(|i| r.solution_scores.get(&i).copied())
                .collect::<Option<_>>()
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: "solution_scores does not cover the order".into(),
                })?;
            Ok(RankedSelection {
                task_id: r.task_id,
                order: r.order,
                solution_scores: scores,
                best: r.best,
            })
        })
        .collect()
}

/// Correctness from hidden-test matrix records: a solution is correct when
/// it passes every hidden test recorded for its task.
fn correctness_from_hidden(
    path: &Path,
    tasks: &[(String, usize)],
) -> Result<HashMap<String, CorrectnessVector>> {
    let records = read_matrix_records(path)?;
    let mut tests: HashMap<&str, usize> = HashMap::new();
    for r in &records {
        let e = tests.entry(r.task_id.as_str()).or_default();
        *e = (*e).max(r.test_id + 1);
    }
    let mut out = HashMap::new();
    for (task_id, n) in tasks {
        if let Some(&m) = tests.get(task_id.as_str()) {
            let hm = matrix_from_records(task_id, *n, m, &records, None)?;
            out.insert(task_id.clone(), CorrectnessVector::from_hidden_matrix(&hm)?);
        }
    }
    Ok(out)
}

fn labels(
    hidden_matrix: Option<&Path>,
    truth: Option<&Path>,
    tasks: &[(String, usize)],
) -> Result<HashMap<String, CorrectnessVector>> {
    match (truth, hidden_matrix) {
        (Some(t), _) => read_truth(t),
        (None, Some(h)) => correctness_from_hidden(h, tasks),
        (None, None) => Err(Error::Invalid(
            "one of --hidden-matrix or --truth is required".into(),
        )),
    }
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Vec<PassAtKReport>> {
    let selections = selections_from_file(&args.selections)?;
    let tasks: Vec<(String, usize)> = selections
        .iter()
        .map(|s| (s.task_id.clone(), s.len()))
        .collect();
    let labels = labels(args.hidden_matrix.as_deref(), args.truth.as_deref(), &tasks)?;
    let correctness: Vec<CorrectnessVector> = selections
        .iter()
        .filter_map(|s| labels.get(&s.task_id).cloned())
        .collect();
    if correctness.is_empty() {
        return Err(Error::Data("no selected task has labels".into()));
    }
    fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    evaluate(
        &selections,
        &correctness,
        &k_values(&args.k_values)?,
        &args.out,
    )
}

pub fn cmd_tune(args: &TuneArgs) -> Result<exrank_core::metrics::TuneResult> {
    let (p, s, t) = args.corpus.paths()?;
    let corpus = load_corpus(p, s, t)?;
    let records = read_matrix_records(&args.matrix)?;
    let dev_ids: Vec<String> = match &args.dev_tasks {
        Some(ids) => ids.clone(),
        None => corpus_ids(&corpus),
    };
    let unknown: Vec<String> = dev_ids
        .iter()
        .filter(|id| corpus.task(id).is_none())
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::MissingTasks(unknown));
    }
    let sizes: Vec<(String, usize)> = dev_ids
        .iter()
        .map(|id| (id.clone(), corpus.task(id).unwrap().solutions.len()))
        .collect();
    let labels = labels(args.hidden_matrix.as_deref(), args.truth.as_deref(), &sizes)?;
    let dev: Vec<DevTask> = dev_ids
        .iter()
        .map(|id| {
            let task = corpus.task(id).unwrap();
            let m = matrix_from_records(
                id,
                task.solutions.len(),
                task.tests.len(),
                &records,
                Some(task),
            )?;
            let correct = labels
                .get(id)
                .cloned()
                .ok_or_else(|| Error::NoHiddenTests(id.clone()))?;
            Ok(DevTask {
                task_id: id.clone(),
                sets: group_exhaustive(&m),
                correct,
            })
        })
        .collect::<Result<_>>()?;
    let result = tune(&dev, &args.alpha_grid, &args.beta_grid, &args.ga.config()?)?;
    let text = serde_json::to_string_pretty(&result).expect("tune result serializes") + "\n";
    if let Some(path) = &args.out {
        fs::write(path, &text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    Ok(result)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        tasks: args.tasks,
        solutions_per_task: args.solutions_per_task,
        tests_per_task: args.tests_per_task,
        correct_solution_rate: args.correct_solution_rate,
        valid_test_rate: args.valid_test_rate,
        wrong_cluster_sizes: args.wrong_cluster_sizes.clone(),
        seed: args.seed,
    };
    let bundle = generate(&spec)?;
    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    bundle.corpus.write(
        &out.join(files::PROBLEMS),
        &out.join(files::SOLUTIONS),
        &out.join(files::TESTS),
    )?;
    let records: Vec<MatrixRecord> = bundle
        .corpus
        .tasks()
        .iter()
        .zip(&bundle.matrices)
        .flat_map(|(t, m)| matrix_records(t, m, None))
        .collect();
    write_jsonl(&out.join(files::MATRIX), &records)?;
    write_jsonl(&out.join(files::TRUTH), &bundle.truth)
}
