//! Solver scoring: accuracy, mean likelihood, penalty scoring with a skip
//! threshold, exact binomial intervals and tabular reports.

mod ci;
mod synthetic;

use std::fmt::Write as _;

use thiserror::Error;

use crate::problem::{argmax_choice, Distribution};

pub use ci::{beta_quantile, binomial_ci, regularized_incomplete_beta};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec, DEFAULT_BETA};

/// Confidence level used for report intervals.
pub const REPORT_CI_LEVEL: f64 = 0.95;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{dists} distributions but {answers} answers")]
    LengthMismatch { dists: usize, answers: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("answer {answer} outside 1..={k} at instance {index}")]
    AnswerOutOfRange { index: usize, answer: usize, k: usize },
    #[error("zero probability on the correct answer of instance {index}")]
    ZeroLikelihood { index: usize },
    #[error("bad arguments: {0}")]
    BadArguments(String),
    #[error("bad penalty policy: {0}")]
    BadPolicy(String),
    #[error("bad synthetic spec: {0}")]
    BadSpec(String),
}

fn aligned(dists: &[Distribution], answers: &[usize]) -> Result<(), EvalError> {
    if dists.len() != answers.len() {
        return Err(EvalError::LengthMismatch {
            dists: dists.len(),
            answers: answers.len(),
        });
    }
    if dists.is_empty() {
        return Err(EvalError::Empty);
    }
    for (index, (d, &answer)) in dists.iter().zip(answers).enumerate() {
        if answer == 0 || answer > d.k() {
            return Err(EvalError::AnswerOutOfRange { index, answer, k: d.k() });
        }
    }
    Ok(())
}

fn count_correct(dists: &[Distribution], answers: &[usize]) -> usize {
    dists
        .iter()
        .zip(answers)
        .filter(|(d, &a)| argmax_choice(d) == a)
        .count()
}

/// Fraction of instances whose argmax choice is the answer.
pub fn accuracy(dists: &[Distribution], answers: &[usize]) -> Result<f64, EvalError> {
    aligned(dists, answers)?;
    Ok(count_correct(dists, answers) as f64 / dists.len() as f64)
}

/// Geometric mean of the probabilities given to correct answers.
pub fn mean_likelihood(dists: &[Distribution], answers: &[usize]) -> Result<f64, EvalError> {
    aligned(dists, answers)?;
    let mut log_sum = 0.0;
    for (index, (d, &a)) in dists.iter().zip(answers).enumerate() {
        let p = d.prob(a);
        if p <= 0.0 {
            return Err(EvalError::ZeroLikelihood { index });
        }
        log_sum += p.ln();
    }
    Ok((log_sum / dists.len() as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyPolicy {
    pub reward: f64,
    pub penalty: f64,
    pub guess_threshold: f64,
}

impl Default for PenaltyPolicy {
    fn default() -> Self {
        Self {
            reward: 1.0,
            penalty: -0.5,
            guess_threshold: 1.0 / 3.0,
        }
    }
}

impl PenaltyPolicy {
    pub fn new(reward: f64, penalty: f64, guess_threshold: f64) -> Result<Self, EvalError> {
        let policy = Self { reward, penalty, guess_threshold };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.reward > 0.0) {
            return Err(EvalError::BadPolicy(format!("reward {} must be positive", self.reward)));
        }
        if !(self.penalty <= 0.0) {
            return Err(EvalError::BadPolicy(format!("penalty {} must be <= 0", self.penalty)));
        }
        if !(0.0..1.0).contains(&self.guess_threshold) {
            return Err(EvalError::BadPolicy(format!(
                "threshold {} must lie in [0, 1)",
                self.guess_threshold
            )));
        }
        Ok(())
    }

    /// Whether a solver should answer given its top probability.
    pub fn guesses(&self, d: &Distribution) -> bool {
        d.max_prob() > self.guess_threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyOutcome {
    pub score: f64,
    pub answered: usize,
    pub skipped: usize,
    pub correct: usize,
}

/// Reward for right answers, penalty for wrong ones, nothing for skips. A
/// question is answered only when its top probability strictly exceeds the
/// threshold.
pub fn penalty_score(
    dists: &[Distribution],
    answers: &[usize],
    policy: &PenaltyPolicy,
) -> Result<PenaltyOutcome, EvalError> {
    aligned(dists, answers)?;
    policy.validate()?;
    let mut out = PenaltyOutcome { score: 0.0, answered: 0, skipped: 0, correct: 0 };
    for (d, &a) in dists.iter().zip(answers) {
        if !policy.guesses(d) {
            out.skipped += 1;
            continue;
        }
        out.answered += 1;
        if argmax_choice(d) == a {
            out.correct += 1;
        }
    }
    let wrong = out.answered - out.correct;
    out.score = policy.reward * out.correct as f64 + policy.penalty * wrong as f64;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub accuracy: f64,
    pub mean_likelihood: f64,
    pub penalty_score: f64,
    pub answered: usize,
    pub skipped: usize,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvaluationReport {
    /// Free-form lines rendered as `# ...` above the table.
    pub header: Vec<String>,
    pub rows: Vec<ReportRow>,
}

pub const REPORT_COLUMNS: [&str; 8] = [
    "solver",
    "accuracy",
    "ci_low",
    "ci_high",
    "mean_likelihood",
    "penalty_score",
    "answered",
    "skipped",
];

impl EvaluationReport {
    /// Tab-separated rendering; percentages with two decimals, likelihoods
    /// with four.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for line in &self.header {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str(&REPORT_COLUMNS.join("\t"));
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{:.2}\t{:.2}\t{:.2}\t{:.4}\t{:.2}\t{}\t{}",
                r.name,
                100.0 * r.accuracy,
                100.0 * r.ci_low,
                100.0 * r.ci_high,
                r.mean_likelihood,
                r.penalty_score,
                r.answered,
                r.skipped
            );
        }
        out
    }
}

/// One report row per named solver, in the order given.
pub fn build_report(
    solvers: &[(String, Vec<Distribution>)],
    answers: &[usize],
    policy: &PenaltyPolicy,
) -> Result<EvaluationReport, EvalError> {
    let mut rows = Vec::with_capacity(solvers.len());
    for (name, dists) in solvers {
        aligned(dists, answers)?;
        let correct = count_correct(dists, answers);
        let m = dists.len();
        let (ci_low, ci_high) = binomial_ci(correct as u64, m as u64, REPORT_CI_LEVEL)?;
        let penalty = penalty_score(dists, answers, policy)?;
        rows.push(ReportRow {
            name: name.clone(),
            accuracy: correct as f64 / m as f64,
            mean_likelihood: mean_likelihood(dists, answers)?,
            penalty_score: penalty.score,
            answered: penalty.answered,
            skipped: penalty.skipped,
            ci_low,
            ci_high,
        });
    }
    Ok(EvaluationReport { header: Vec::new(), rows })
}
