//! Maximum-likelihood weight fitting.
//!
//! [`hill_climb`] is the production optimizer: coordinate-wise probes at
//! `±step`, moving to the best improving neighbour and halving the step when
//! none improves, restarted from deterministic and seeded random points.
//! [`grid_search_oracle`] enumerates a weight lattice exhaustively and is
//! only practical for a handful of modules; it exists to check the climber.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::merge::{floor_distribution, MergeError, Rule, WeightVector, LOG_SPACE_MODULES};
use crate::problem::{ForecastSet, QuestionInstance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("instance {0} has no answer")]
    MissingAnswer(String),
    #[error("instance {instance} has no forecast from module {module}")]
    MissingForecast { instance: String, module: String },
    #[error("instance {instance}: answer {answer} outside 1..={k}")]
    AnswerOutOfRange { instance: String, answer: usize, k: usize },
    #[error("instance {instance}: forecasts disagree on the number of choices")]
    RaggedForecasts { instance: String },
    #[error("no training instances")]
    NoInstances,
    #[error("no modules")]
    NoModules,
    #[error("grid search supports at most 4 modules, got {0}")]
    TooManyModules(usize),
    #[error("grid step {step} does not divide [0, {max}] evenly")]
    BadStep { step: f64, max: f64 },
    #[error("invalid optimizer configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Merge(#[from] MergeError),
}

/// Answer key (1-based) by instance id.
pub fn answer_key(questions: &[QuestionInstance]) -> HashMap<String, usize> {
    questions
        .iter()
        .filter_map(|q| q.answer().map(|a| (q.id().to_string(), a)))
        .collect()
}

struct Instance {
    k: usize,
    answer: usize,
    // module-major n*k
    probs: Vec<f64>,
    log_floored: Vec<f64>,
}

/// Forecasts and answers aligned for repeated likelihood evaluation.
pub struct TrainingData {
    n: usize,
    epsilon: f64,
    module_ids: Vec<String>,
    instances: Vec<Instance>,
}

impl TrainingData {
    pub fn new(
        fs: &ForecastSet,
        answers: &HashMap<String, usize>,
        epsilon: f64,
    ) -> Result<Self, TrainError> {
        let n = fs.n_modules();
        if n == 0 {
            return Err(TrainError::NoModules);
        }
        if fs.n_instances() == 0 {
            return Err(TrainError::NoInstances);
        }
        let mut instances = Vec::with_capacity(fs.n_instances());
        for (h, id) in fs.instance_ids().iter().enumerate() {
            let answer = *answers
                .get(id)
                .ok_or_else(|| TrainError::MissingAnswer(id.clone()))?;
            let mut probs = Vec::new();
            let mut log_floored = Vec::new();
            let mut k = None;
            for (i, module) in fs.module_ids().iter().enumerate() {
                let d = fs.get(h, i).ok_or_else(|| TrainError::MissingForecast {
                    instance: id.clone(),
                    module: module.clone(),
                })?;
                if *k.get_or_insert(d.k()) != d.k() {
                    return Err(TrainError::RaggedForecasts { instance: id.clone() });
                }
                probs.extend_from_slice(d.probs());
                let floored = floor_distribution(d, epsilon)?;
                log_floored.extend(floored.probs().iter().map(|p| p.ln()));
            }
            let k = k.unwrap_or(0);
            if answer == 0 || answer > k {
                return Err(TrainError::AnswerOutOfRange { instance: id.clone(), answer, k });
            }
            instances.push(Instance { k, answer: answer - 1, probs, log_floored });
        }
        Ok(Self {
            n,
            epsilon,
            module_ids: fs.module_ids().to_vec(),
            instances,
        })
    }

    pub fn n_modules(&self) -> usize {
        self.n
    }

    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn module_ids(&self) -> &[String] {
        &self.module_ids
    }

    /// `Σ_h ln D^{h,w}_{a(h)}`. Weights are not range-checked here; an
    /// all-zero mixture and any zero likelihood give `-inf`.
    pub fn log_likelihood(&self, rule: Rule, weights: &[f64]) -> f64 {
        debug_assert_eq!(weights.len(), self.n);
        if rule == Rule::Mixture && !weights.iter().any(|&w| w > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.instances
            .iter()
            .map(|inst| match rule {
                Rule::Mixture => mixture_log_prob(inst, weights),
                Rule::Logarithmic => logarithmic_log_prob(inst, weights),
                Rule::Product => product_log_prob(inst, weights),
            })
            .sum()
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn mixture_log_prob(inst: &Instance, w: &[f64]) -> f64 {
    let k = inst.k;
    let mut total = 0.0;
    let mut correct = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        let row = &inst.probs[i * k..(i + 1) * k];
        total += wi * row.iter().sum::<f64>();
        correct += wi * row[inst.answer];
    }
    (correct / total).ln()
}

fn logarithmic_log_prob(inst: &Instance, w: &[f64]) -> f64 {
    let k = inst.k;
    let mut s = [0.0f64; 16];
    let mut heap;
    let s: &mut [f64] = if k <= s.len() {
        &mut s[..k]
    } else {
        heap = vec![0.0; k];
        &mut heap
    };
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        for (sj, &lp) in s.iter_mut().zip(&inst.log_floored[i * k..(i + 1) * k]) {
            *sj += wi * lp;
        }
    }
    s[inst.answer] - log_sum_exp(s)
}

fn product_log_prob(inst: &Instance, w: &[f64]) -> f64 {
    let k = inst.k;
    let prior = 1.0 / k as f64;
    if w.len() <= LOG_SPACE_MODULES {
        let mut prod = vec![1.0; k];
        for (i, &wi) in w.iter().enumerate() {
            for (v, &p) in prod.iter_mut().zip(&inst.probs[i * k..(i + 1) * k]) {
                *v *= wi * p + (1.0 - wi) * prior;
            }
        }
        let total: f64 = prod.iter().sum();
        if total >= f64::MIN_POSITIVE || prod.iter().all(|&v| v > 0.0) {
            return (prod[inst.answer] / total).ln();
        }
    }
    let mut logs = vec![0.0; k];
    for (i, &wi) in w.iter().enumerate() {
        for (v, &p) in logs.iter_mut().zip(&inst.probs[i * k..(i + 1) * k]) {
            *v += (wi * p + (1.0 - wi) * prior).ln();
        }
    }
    let lse = log_sum_exp(&logs);
    if lse == f64::NEG_INFINITY {
        // every choice eliminated: the merged distribution is uniform
        return prior.ln();
    }
    logs[inst.answer] - lse
}

/// Log-likelihood of the answer key under `w`, via the rule's merge.
pub fn log_likelihood(
    w: &WeightVector,
    fs: &ForecastSet,
    answers: &HashMap<String, usize>,
) -> Result<f64, TrainError> {
    if w.len() != fs.n_modules() {
        return Err(MergeError::ModuleCountMismatch {
            expected: fs.n_modules(),
            found: w.len(),
        }
        .into());
    }
    let data = TrainingData::new(fs, answers, w.epsilon())?;
    Ok(data.log_likelihood(w.rule(), w.weights()))
}

/// Geometric mean of correct-answer probabilities from a log-likelihood.
pub fn mean_likelihood_from_log(log_likelihood: f64, m: usize) -> f64 {
    (log_likelihood / m as f64).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HillClimbConfig {
    pub restarts: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evaluations: usize,
    pub seed: u64,
    pub include_deterministic_starts: bool,
}

impl Default for HillClimbConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            initial_step: 0.05,
            min_step: 1e-4,
            max_evaluations: 100_000,
            seed: 0,
            include_deterministic_starts: true,
        }
    }
}

impl HillClimbConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.restarts == 0 {
            return Err(TrainError::BadConfig("restarts must be at least 1".into()));
        }
        if !(self.min_step > 0.0 && self.min_step <= self.initial_step) {
            return Err(TrainError::BadConfig(format!(
                "need 0 < min_step ({}) <= initial_step ({})",
                self.min_step, self.initial_step
            )));
        }
        if self.max_evaluations == 0 {
            return Err(TrainError::BadConfig("max_evaluations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartPoint {
    Uniform,
    /// Weight 1 on this module (0-based), 0 elsewhere.
    Basis(usize),
    /// Seeded random start, numbered from 0.
    Random(usize),
    /// Lattice maximizer from [`grid_search_oracle`].
    Grid,
}

impl fmt::Display for StartPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StartPoint::Uniform => f.write_str("uniform"),
            StartPoint::Basis(i) => write!(f, "basis:{i}"),
            StartPoint::Random(r) => write!(f, "random:{r}"),
            StartPoint::Grid => f.write_str("grid"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedWeights {
    pub weights: WeightVector,
    pub train_log_likelihood: f64,
    pub train_mean_likelihood: f64,
    pub evaluations_used: usize,
    pub best_start: StartPoint,
}

/// Outcome of a single restart.
#[derive(Debug, Clone, PartialEq)]
pub struct Climb {
    pub weights: Vec<f64>,
    pub log_likelihood: f64,
    pub evaluations: usize,
    /// Log-likelihood at the start and after every accepted move.
    pub trace: Vec<f64>,
}

/// Runs one discrete-gradient ascent from `start`.
pub fn climb(rule: Rule, data: &TrainingData, start: Vec<f64>, cfg: &HillClimbConfig) -> Climb {
    let max = rule.weight_max();
    let mut w = start;
    let mut current = data.log_likelihood(rule, &w);
    let mut evaluations = 1;
    let mut trace = vec![current];
    let mut step = cfg.initial_step;
    let mut probe = w.clone();

    'search: while step >= cfg.min_step {
        let mut best: Option<(usize, f64, f64)> = None;
        for i in 0..w.len() {
            for dir in [1.0, -1.0] {
                let candidate = (w[i] + dir * step).clamp(0.0, max);
                if candidate == w[i] {
                    continue;
                }
                if evaluations >= cfg.max_evaluations {
                    break 'search;
                }
                probe[i] = candidate;
                let ll = data.log_likelihood(rule, &probe);
                probe[i] = w[i];
                evaluations += 1;
                if best.is_none_or(|(_, _, b)| ll > b) {
                    best = Some((i, candidate, ll));
                }
            }
        }
        match best {
            Some((i, value, ll)) if ll > current => {
                w[i] = value;
                probe[i] = value;
                current = ll;
                trace.push(ll);
            }
            _ => step /= 2.0,
        }
    }
    Climb { weights: w, log_likelihood: current, evaluations, trace }
}

/// Start points in restart order: deterministic starts first (uniform, then
/// each basis vector), then seeded random points up to `cfg.restarts`.
pub fn start_points(rule: Rule, n: usize, cfg: &HillClimbConfig) -> Vec<(StartPoint, Vec<f64>)> {
    let mut starts = Vec::new();
    if cfg.include_deterministic_starts {
        let uniform = match rule {
            Rule::Logarithmic => 1.0,
            Rule::Mixture | Rule::Product => 0.5,
        };
        starts.push((StartPoint::Uniform, vec![uniform; n]));
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            starts.push((StartPoint::Basis(i), e));
        }
    }
    let random = cfg.restarts.saturating_sub(starts.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let max = rule.weight_max();
    for r in 0..random {
        let w = loop {
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=max)).collect();
            if rule != Rule::Mixture || w.iter().any(|&x| x > 0.0) {
                break w;
            }
        };
        starts.push((StartPoint::Random(r), w));
    }
    starts
}

/// Multi-restart hill climbing; returns the best restart (ties go to the
/// earliest).
pub fn hill_climb(
    rule: Rule,
    data: &TrainingData,
    cfg: &HillClimbConfig,
) -> Result<TrainedWeights, TrainError> {
    cfg.validate()?;
    let mut best: Option<(StartPoint, Climb)> = None;
    let mut evaluations = 0;
    for (start, w0) in start_points(rule, data.n_modules(), cfg) {
        let result = climb(rule, data, w0, cfg);
        evaluations += result.evaluations;
        if best
            .as_ref()
            .is_none_or(|(_, b)| result.log_likelihood > b.log_likelihood)
        {
            best = Some((start, result));
        }
    }
    let (best_start, result) = best.expect("at least one restart");
    Ok(TrainedWeights {
        weights: WeightVector::new(rule, result.weights, data.epsilon)?,
        train_log_likelihood: result.log_likelihood,
        train_mean_likelihood: mean_likelihood_from_log(result.log_likelihood, data.n_instances()),
        evaluations_used: evaluations,
        best_start,
    })
}

/// Exhaustive search over `{0, step, 2·step, ...}^n` within the rule's
/// weight box. Ties go to the lexicographically smallest weight vector.
pub fn grid_search_oracle(
    rule: Rule,
    data: &TrainingData,
    step: f64,
) -> Result<TrainedWeights, TrainError> {
    let n = data.n_modules();
    if n > 4 {
        return Err(TrainError::TooManyModules(n));
    }
    let max = rule.weight_max();
    let ratio = max / step;
    if !(step > 0.0) || ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-9 {
        return Err(TrainError::BadStep { step, max });
    }
    let count = ratio.round() as usize;
    let lattice: Vec<f64> = (0..=count)
        .map(|t| if t == count { max } else { t as f64 * step })
        .collect();

    let line = LineEvaluator::new(rule, data, &lattice);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluations = 0;
    let mut index = vec![0usize; n - 1];
    let mut lls = vec![0.0; lattice.len()];
    let mut w = vec![0.0; n];
    loop {
        for (wi, &t) in w.iter_mut().zip(&index) {
            *wi = lattice[t];
        }
        line.evaluate(&w[..n - 1], &mut lls);
        for (t, &ll) in lls.iter().enumerate() {
            evaluations += 1;
            w[n - 1] = lattice[t];
            if rule == Rule::Mixture && !w.iter().any(|&x| x > 0.0) {
                continue;
            }
            if best.as_ref().is_none_or(|(_, b)| ll > *b) {
                best = Some((w.clone(), ll));
            }
        }
        // odometer over the leading coordinates, last one fastest
        let mut pos = n - 1;
        loop {
            if pos == 0 {
                let (weights, ll) = best.expect("lattice has a valid point");
                return Ok(TrainedWeights {
                    weights: WeightVector::new(rule, weights, data.epsilon)?,
                    train_log_likelihood: ll,
                    train_mean_likelihood: mean_likelihood_from_log(ll, data.n_instances()),
                    evaluations_used: evaluations,
                    best_start: StartPoint::Grid,
                });
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < lattice.len() {
                break;
            }
            index[pos] = 0;
        }
    }
}

/// Evaluates the log-likelihood along the last weight coordinate for every
/// lattice value at once. The logarithmic rule uses a precomputed table of
/// `exp(v_t · ln p)` so each lattice point costs multiplications only.
struct LineEvaluator<'a> {
    rule: Rule,
    data: &'a TrainingData,
    lattice: &'a [f64],
    // [h][t*k + j] = exp(lattice[t] * log_floored[last][j])
    log_tables: Vec<Vec<f64>>,
}

impl<'a> LineEvaluator<'a> {
    fn new(rule: Rule, data: &'a TrainingData, lattice: &'a [f64]) -> Self {
        let last = data.n - 1;
        let log_tables = if rule == Rule::Logarithmic {
            data.instances
                .iter()
                .map(|inst| {
                    let lp = &inst.log_floored[last * inst.k..(last + 1) * inst.k];
                    lattice
                        .iter()
                        .flat_map(|&v| lp.iter().map(move |&l| (v * l).exp()))
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        Self { rule, data, lattice, log_tables }
    }

    fn evaluate(&self, prefix: &[f64], out: &mut [f64]) {
        if self.rule != Rule::Logarithmic {
            let mut w = prefix.to_vec();
            w.push(0.0);
            for (o, &v) in out.iter_mut().zip(self.lattice) {
                *w.last_mut().unwrap() = v;
                *o = self.data.log_likelihood(self.rule, &w);
            }
            return;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        let last = self.data.n - 1;
        let mut base = Vec::new();
        for (inst, table) in self.data.instances.iter().zip(&self.log_tables) {
            let k = inst.k;
            base.clear();
            base.resize(k, 0.0);
            for (i, &wi) in prefix.iter().enumerate() {
                for (b, &lp) in base.iter_mut().zip(&inst.log_floored[i * k..(i + 1) * k]) {
                    *b += wi * lp;
                }
            }
            let shift = base.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let scaled: Vec<f64> = base.iter().map(|b| (b - shift).exp()).collect();
            let lp_answer = inst.log_floored[last * k + inst.answer];
            for (t, o) in out.iter_mut().enumerate() {
                let row = &table[t * k..(t + 1) * k];
                let total: f64 = scaled.iter().zip(row).map(|(s, r)| s * r).sum();
                *o += base[inst.answer] - shift + self.lattice[t] * lp_answer - total.ln();
            }
        }
    }
}
