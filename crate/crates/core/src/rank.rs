//! Consensus-set scoring and genetic-algorithm ranking of solutions.
//!
//! A set scores `|S|^alpha * |T|^beta` and every member inherits that score.
//! The GA searches permutations of solution ids; a permutation's fitness is
//! the `gamma`-discounted sum of the scores along it, so its optima are
//! exactly the score-descending orders. The GA's best genome is then
//! canonicalized by a stable re-sort on (score descending, id ascending), so
//! the returned order is deterministic and always led by a top-scoring
//! solution. [`RankRun`] keeps the uncanonicalized genome and its fitness for
//! inspection.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::consensus::{check_partition, ConsensusSet};
use crate::error::{Error, Result};
use crate::model::ScoreParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    /// Rank-discount base of the fitness, in `(0, 1)`.
    pub gamma: f64,
    /// Stop after this many generations without improvement.
    pub patience: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 50,
            generations: 100,
            tournament_size: 3,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            elitism: 2,
            gamma: 0.9,
            patience: 20,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invalid(msg));
        if self.population == 0 || self.generations == 0 || self.patience == 0 {
            return bad("population, generations and patience must be positive".into());
        }
        if self.tournament_size == 0 || self.tournament_size > self.population {
            return bad(format!(
                "tournament_size must be in 1..={}, got {}",
                self.population, self.tournament_size
            ));
        }
        if self.elitism >= self.population {
            return bad(format!(
                "elitism ({}) must be below population ({})",
                self.elitism, self.population
            ));
        }
        for (name, v) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        Ok(())
    }
}

/// `|solutions|^alpha * |tests|^beta`, with `0^0 = 1`.
pub fn score_set(set: &ConsensusSet, params: &ScoreParams) -> Result<f64> {
    score_sizes(set.solutions.len(), set.tests.len(), params)
}

pub fn score_sizes(solutions: usize, tests: usize, params: &ScoreParams) -> Result<f64> {
    params.validate()?;
    if solutions == 0 {
        return Err(Error::Invalid("consensus set has no solutions".into()));
    }
    // f64::powf already yields 0^0 = 1 and 0^b = 0 for b > 0.
    let score = (solutions as f64).powf(params.alpha) * (tests as f64).powf(params.beta);
    if !score.is_finite() {
        return Err(Error::NonFiniteScore { solutions, tests });
    }
    Ok(score)
}

/// Scores every set in place and returns the per-solution scores, indexed by
/// solution id.
pub fn score_sets(sets: &mut [ConsensusSet], params: &ScoreParams) -> Result<Vec<f64>> {
    let n = check_partition(sets)?;
    let mut scores = vec![0.0; n];
    for set in sets.iter_mut() {
        set.score = score_set(set, params)?;
        for &s in &set.solutions {
            scores[s] = set.score;
        }
    }
    Ok(scores)
}

/// `sum_r gamma^r * scores[order[r]]`.
pub fn fitness(order: &[usize], scores: &[f64], gamma: f64) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for &s in order {
        total += weight * scores[s];
        weight *= gamma;
    }
    total
}

/// Score descending, id ascending.
pub fn sorted_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| by_score_then_id(scores, a, b));
    order
}

fn by_score_then_id(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSelection {
    pub task_id: String,
    /// Best first.
    pub order: Vec<usize>,
    /// Indexed by solution id.
    pub solution_scores: Vec<f64>,
    pub best: Option<usize>,
}

impl RankedSelection {
    pub fn empty(task_id: impl Into<String>) -> Self {
        RankedSelection {
            task_id: task_id.into(),
            order: Vec::new(),
            solution_scores: Vec::new(),
            best: None,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// First `min(k, n)` entries of the ranking.
pub fn select_top_k(sel: &RankedSelection, k: usize) -> &[usize] {
    &sel.order[..k.min(sel.order.len())]
}

/// A ranking together with the GA run that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RankRun {
    pub selection: RankedSelection,
    pub generations_run: usize,
    /// Best fitness in the population, starting with the initial population.
    pub best_fitness_trace: Vec<f64>,
    /// The GA's best genome before canonicalization.
    pub raw_best: Vec<usize>,
    pub raw_best_fitness: f64,
    pub optimal_fitness: f64,
}

pub fn rank(
    task_id: &str,
    sets: &[ConsensusSet],
    params: &ScoreParams,
    cfg: &GaConfig,
) -> Result<RankedSelection> {
    rank_with_trace(task_id, sets, params, cfg).map(|run| run.selection)
}

pub fn rank_with_trace(
    task_id: &str,
    sets: &[ConsensusSet],
    params: &ScoreParams,
    cfg: &GaConfig,
) -> Result<RankRun> {
    let mut sets = sets.to_vec();
    let scores = score_sets(&mut sets, params)?;
    rank_by_scores(task_id, scores, cfg)
}

/// Runs the GA directly on per-solution scores (indexed by solution id).
pub fn rank_by_scores(task_id: &str, scores: Vec<f64>, cfg: &GaConfig) -> Result<RankRun> {
    cfg.validate()?;
    if let Some(bad) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
        return Err(Error::Invalid(format!(
            "solution score {bad} is not a finite non-negative value"
        )));
    }
    if scores.is_empty() {
        return Ok(RankRun {
            selection: RankedSelection::empty(task_id),
            generations_run: 0,
            best_fitness_trace: Vec::new(),
            raw_best: Vec::new(),
            raw_best_fitness: 0.0,
            optimal_fitness: 0.0,
        });
    }

    let ga = evolve(&scores, cfg);
    let order = canonicalize(&ga.best, &scores);
    let raw_best_fitness = fitness(&ga.best, &scores, cfg.gamma);
    let optimal_fitness = optimal_fitness(&scores, cfg.gamma);
    Ok(RankRun {
        selection: RankedSelection {
            task_id: task_id.to_string(),
            best: order.first().copied(),
            order,
            solution_scores: scores,
        },
        generations_run: ga.generations_run,
        best_fitness_trace: ga.trace,
        raw_best: ga.best,
        raw_best_fitness,
        optimal_fitness,
    })
}

/// Stable re-sort of a genome by score descending; equal scores end up in
/// ascending id order.
pub fn canonicalize(genome: &[usize], scores: &[f64]) -> Vec<usize> {
    let mut out = genome.to_vec();
    out.sort_by(|&a, &b| by_score_then_id(scores, a, b));
    out
}

/// Fitness of the score-sorted order, the maximum over all permutations.
pub fn optimal_fitness(scores: &[f64], gamma: f64) -> f64 {
    fitness(&sorted_order(scores), scores, gamma)
}

struct GaResult {
    best: Vec<usize>,
    trace: Vec<f64>,
    generations_run: usize,
}

fn evolve(scores: &[f64], cfg: &GaConfig) -> GaResult {
    let n = scores.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut population: Vec<Vec<usize>> = (0..cfg.population)
        .map(|_| {
            let mut g: Vec<usize> = (0..n).collect();
            g.shuffle(&mut rng);
            g
        })
        .collect();
    let mut fit: Vec<f64> = population
        .iter()
        .map(|g| fitness(g, scores, cfg.gamma))
        .collect();

    let (mut best_idx, mut best_fit) = argmax(&fit);
    let mut best = population[best_idx].clone();
    let mut trace = vec![best_fit];
    let mut stale = 0;
    let mut generations_run = 0;

    for _ in 0..cfg.generations {
        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by(|&a, &b| fit[b].total_cmp(&fit[a]).then(a.cmp(&b)));

        let mut next: Vec<Vec<usize>> = ranked[..cfg.elitism]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        while next.len() < cfg.population {
            let a = tournament(&fit, cfg.tournament_size, &mut rng);
            let b = tournament(&fit, cfg.tournament_size, &mut rng);
            let mut child = if rng.random_bool(cfg.crossover_rate) {
                order_crossover(&population[a], &population[b], &mut rng)
            } else {
                population[a].clone()
            };
            if rng.random_bool(cfg.mutation_rate) {
                swap_mutation(&mut child, &mut rng);
            }
            next.push(child);
        }
        population = next;
        fit = population
            .iter()
            .map(|g| fitness(g, scores, cfg.gamma))
            .collect();
        generations_run += 1;

        let gen_best;
        (best_idx, gen_best) = argmax(&fit);
        trace.push(gen_best);
        if gen_best > best_fit {
            best_fit = gen_best;
            best = population[best_idx].clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    GaResult {
        best,
        trace,
        generations_run,
    }
}

/// Index and value of the largest fitness; the lowest index wins ties.
fn argmax(fit: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, f) in fit.iter().enumerate().skip(1) {
        if f.total_cmp(&fit[best]) == Ordering::Greater {
            best = i;
        }
    }
    (best, fit[best])
}

fn tournament(fit: &[f64], size: usize, rng: &mut impl Rng) -> usize {
    let mut winner = rng.random_range(0..fit.len());
    for _ in 1..size {
        let c = rng.random_range(0..fit.len());
        if fit[c] > fit[winner] || (fit[c] == fit[winner] && c < winner) {
            winner = c;
        }
    }
    winner
}

/// OX1: copy a random slice from `first`, then fill the remaining positions
/// with the missing genes in `second`'s order, starting after the slice and
/// wrapping.
pub fn order_crossover(first: &[usize], second: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    let n = first.len();
    if n < 2 {
        return first.to_vec();
    }
    let a = rng.random_range(0..n);
    let b = rng.random_range(0..n);
    order_crossover_at(first, second, a.min(b), a.max(b))
}

/// OX1 with the slice `lo..=hi` fixed.
pub fn order_crossover_at(first: &[usize], second: &[usize], lo: usize, hi: usize) -> Vec<usize> {
    let n = first.len();
    let mut child = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for i in lo..=hi {
        child[i] = first[i];
        used[first[i]] = true;
    }
    let mut pos = (hi + 1) % n;
    for k in 0..n {
        let gene = second[(hi + 1 + k) % n];
        if !used[gene] {
            used[gene] = true;
            child[pos] = gene;
            pos = (pos + 1) % n;
        }
    }
    child
}

pub fn swap_mutation(genome: &mut [usize], rng: &mut impl Rng) {
    let n = genome.len();
    if n < 2 {
        return;
    }
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    genome.swap(i, j);
}
