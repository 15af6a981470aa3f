//! Command-line and config-file options.
//!
//! `run` options can also come from a TOML file whose keys are the flag names
//! with underscores. Flags win over the environment, which wins over the file.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use exrank_core::harness::{HarnessConfig, DEFAULT_TIMEOUT_MS};
use exrank_core::{Error, GaConfig, Result, ScoreParams};
use serde::Deserialize;

pub const RUNNER_ENV: &str = "EXRANK_RUNNER";
pub const DEFAULT_K_VALUES: [usize; 3] = [1, 2, 10];

#[derive(Debug, Parser)]
#[command(
    name = "exrank",
    version,
    about = "Rank generated code solutions by execution agreement"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute, group, rank and (when labels exist) evaluate a corpus.
    Run(RunConfig),
    /// Form consensus sets from a matrix file.
    Group(GroupArgs),
    /// Rank solutions from a consensus file.
    Rank(RankArgs),
    /// Score selections against hidden-test results or planted labels.
    Eval(EvalArgs),
    /// Grid-search alpha and beta on labeled dev tasks.
    Tune(TuneArgs),
    /// Write a synthetic corpus with matrices and planted labels.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Exhaustive,
    Ransac,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
}

impl ScoreArgs {
    pub fn params(&self) -> Result<ScoreParams> {
        let d = ScoreParams::default();
        ScoreParams::new(self.alpha.unwrap_or(d.alpha), self.beta.unwrap_or(d.beta))
    }

    fn or(self, other: ScoreArgs) -> ScoreArgs {
        ScoreArgs {
            alpha: self.alpha.or(other.alpha),
            beta: self.beta.or(other.beta),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct GaArgs {
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub tournament_size: Option<usize>,
    #[arg(long)]
    pub crossover_rate: Option<f64>,
    #[arg(long)]
    pub mutation_rate: Option<f64>,
    #[arg(long)]
    pub elitism: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Seeds the GA and randomized grouping.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl GaArgs {
    pub fn config(&self) -> Result<GaConfig> {
        let d = GaConfig::default();
        let cfg = GaConfig {
            population: self.population.unwrap_or(d.population),
            generations: self.generations.unwrap_or(d.generations),
            tournament_size: self.tournament_size.unwrap_or(d.tournament_size),
            crossover_rate: self.crossover_rate.unwrap_or(d.crossover_rate),
            mutation_rate: self.mutation_rate.unwrap_or(d.mutation_rate),
            elitism: self.elitism.unwrap_or(d.elitism),
            gamma: self.gamma.unwrap_or(d.gamma),
            patience: self.patience.unwrap_or(d.patience),
            seed: self.seed.unwrap_or(d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn or(self, o: GaArgs) -> GaArgs {
        GaArgs {
            population: self.population.or(o.population),
            generations: self.generations.or(o.generations),
            tournament_size: self.tournament_size.or(o.tournament_size),
            crossover_rate: self.crossover_rate.or(o.crossover_rate),
            mutation_rate: self.mutation_rate.or(o.mutation_rate),
            elitism: self.elitism.or(o.elitism),
            gamma: self.gamma.or(o.gamma),
            patience: self.patience.or(o.patience),
            seed: self.seed.or(o.seed),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct GroupingArgs {
    #[arg(long, value_enum)]
    pub strategy: Option<Strategy>,
    /// Randomized grouping draws; defaults to 10 per matrix cell.
    #[arg(long)]
    pub ransac_iterations: Option<usize>,
    /// Ignore tests on which every solution errored.
    #[arg(long)]
    #[serde(default)]
    pub drop_all_error_tests: bool,
}

impl GroupingArgs {
    fn or(self, o: GroupingArgs) -> GroupingArgs {
        GroupingArgs {
            strategy: self.strategy.or(o.strategy),
            ransac_iterations: self.ransac_iterations.or(o.ransac_iterations),
            drop_all_error_tests: self.drop_all_error_tests || o.drop_all_error_tests,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct CorpusArgs {
    #[arg(long)]
    pub problems: Option<PathBuf>,
    #[arg(long)]
    pub solutions: Option<PathBuf>,
    #[arg(long)]
    pub tests: Option<PathBuf>,
}

impl CorpusArgs {
    pub fn paths(&self) -> Result<(&Path, &Path, &Path)> {
        Ok((
            required(&self.problems, "problems")?,
            required(&self.solutions, "solutions")?,
            required(&self.tests, "tests")?,
        ))
    }

    fn or(self, o: CorpusArgs) -> CorpusArgs {
        CorpusArgs {
            problems: self.problems.or(o.problems),
            solutions: self.solutions.or(o.solutions),
            tests: self.tests.or(o.tests),
        }
    }
}

/// Everything `run` needs. Every field is optional here so a config file
/// can fill what the flags leave out.
#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct RunConfig {
    /// TOML file with defaults for any of the other options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    #[serde(flatten)]
    pub corpus: CorpusArgs,
    /// Hidden tests as `{task_id, assertion}` lines; replaces any inline
    /// hidden tests of the listed tasks.
    #[arg(long)]
    pub hidden_tests: Option<PathBuf>,
    /// Planted labels `{task_id, correct_solution_ids, valid_test_ids}`;
    /// takes precedence over hidden tests for evaluation.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Execution cache; defaults to `cache.jsonl` in the output directory.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Runner command line, split shell-style.
    #[arg(long, env = RUNNER_ENV)]
    pub runner_cmd: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub timeout_ms: Option<u64>,

    #[command(flatten)]
    #[serde(flatten)]
    pub score: ScoreArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub ga: GaArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub grouping: GroupingArgs,
    #[arg(long, value_delimiter = ',')]
    pub k_values: Option<Vec<usize>>,
}

impl RunConfig {
    /// Fills unset options from the `--config` file, if any.
    pub fn resolve(self) -> Result<RunConfig> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let bad = |msg: String| Error::Invalid(format!("{}: {msg}", path.display()));
        let table: toml::Table = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let cmd = <RunConfig as Args>::augment_args(clap::Command::new("run"));
        for key in table.keys() {
            let known = key != "config" && cmd.get_arguments().any(|a| a.get_id() == key.as_str());
            if !known {
                return Err(bad(format!("unknown key {key:?}")));
            }
        }
        let file: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| bad(e.to_string()))?;
        Ok(self.or(file))
    }

    fn or(self, o: RunConfig) -> RunConfig {
        RunConfig {
            config: self.config,
            corpus: self.corpus.or(o.corpus),
            hidden_tests: self.hidden_tests.or(o.hidden_tests),
            truth: self.truth.or(o.truth),
            cache: self.cache.or(o.cache),
            out: self.out.or(o.out),
            runner_cmd: self.runner_cmd.or(o.runner_cmd),
            workers: self.workers.or(o.workers),
            timeout_ms: self.timeout_ms.or(o.timeout_ms),
            score: self.score.or(o.score),
            ga: self.ga.or(o.ga),
            grouping: self.grouping.or(o.grouping),
            k_values: self.k_values.or(o.k_values),
        }
    }

    pub fn out_dir(&self) -> Result<&Path> {
        required(&self.out, "out")
    }

    pub fn harness(&self) -> Result<HarnessConfig> {
        let runner_cmd = match &self.runner_cmd {
            Some(cmd) => shlex::split(cmd)
                .ok_or_else(|| Error::Invalid(format!("cannot split runner command {cmd:?}")))?,
            None => Vec::new(),
        };
        let cfg = HarnessConfig {
            runner_cmd,
            workers: self.workers.unwrap_or(1),
            timeout_ms: self.timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS),
            cache_path: Some(match &self.cache {
                Some(p) => p.clone(),
                None => self.out_dir()?.join("cache.jsonl"),
            }),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn k_values(&self) -> Result<Vec<usize>> {
        k_values(&self.k_values)
    }
}

#[derive(Debug, Clone, Args)]
pub struct GroupArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Matrix records covering every task of the corpus.
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub grouping: GroupingArgs,
    /// Used to fill the informational `score` of each set.
    #[command(flatten)]
    pub score: ScoreArgs,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub consensus: PathBuf,
    /// Lists tasks in corpus order, including tasks without solutions.
    #[arg(long)]
    pub problems: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-task GA traces here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub score: ScoreArgs,
    #[command(flatten)]
    pub ga: GaArgs,
}

#[derive(Debug, Clone, Args)]
#[command(group = clap::ArgGroup::new("labels").required(true).args(["hidden_matrix", "truth"]))]
pub struct EvalArgs {
    #[arg(long)]
    pub selections: PathBuf,
    /// Matrix records of the hidden tests.
    #[arg(long)]
    pub hidden_matrix: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Directory for `report.jsonl` and `report.txt`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub k_values: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Args)]
#[command(group = clap::ArgGroup::new("labels").required(true).args(["hidden_matrix", "truth"]))]
pub struct TuneArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub hidden_matrix: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Dev task ids; defaults to every task.
    #[arg(long, value_delimiter = ',')]
    pub dev_tasks: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1")]
    pub alpha_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.1,1.5,2")]
    pub beta_grid: Vec<f64>,
    #[command(flatten)]
    pub ga: GaArgs,
    /// Write the full result here as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    pub tasks: usize,
    #[arg(long, default_value_t = 20)]
    pub solutions_per_task: usize,
    #[arg(long, default_value_t = 20)]
    pub tests_per_task: usize,
    #[arg(long, default_value_t = 0.3)]
    pub correct_solution_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub valid_test_rate: f64,
    #[arg(long, value_delimiter = ',')]
    pub wrong_cluster_sizes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn required<'a>(value: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Invalid(format!("--{name} is required")))
}

pub fn k_values(k: &Option<Vec<usize>>) -> Result<Vec<usize>> {
    let ks = k.clone().unwrap_or_else(|| DEFAULT_K_VALUES.to_vec());
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Invalid(
            "k_values must be non-empty and positive".into(),
        ));
    }
    Ok(ks)
}
