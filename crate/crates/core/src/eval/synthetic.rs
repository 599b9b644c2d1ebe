//! Synthetic benchmark with planted per-module accuracies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EvalError;
use crate::problem::{Distribution, ForecastSet, QuestionInstance, QuestionKind, Term};

pub const DEFAULT_BETA: f64 = 0.7;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Probability that each module's favoured choice is the correct one.
    pub accuracies: Vec<f64>,
    pub m: usize,
    pub k: usize,
    /// Mass on the favoured choice; the rest is spread evenly.
    pub beta: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.accuracies.is_empty() {
            return Err(EvalError::BadSpec("need at least one module".into()));
        }
        if let Some(a) = self.accuracies.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(EvalError::BadSpec(format!("accuracy {a} outside [0, 1]")));
        }
        if self.k < 2 {
            return Err(EvalError::BadSpec(format!("k = {} (need k >= 2)", self.k)));
        }
        if self.m == 0 {
            return Err(EvalError::BadSpec("m must be positive".into()));
        }
        let floor = 1.0 / self.k as f64;
        if !(self.beta >= floor - 1e-12 && self.beta <= 1.0) {
            return Err(EvalError::BadSpec(format!(
                "beta {} outside [1/k, 1]",
                self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// Synonym-shaped questions carrying the answer key.
    pub questions: Vec<QuestionInstance>,
    pub forecasts: ForecastSet,
}

impl SyntheticData {
    pub fn answers(&self) -> Vec<usize> {
        self.questions.iter().filter_map(QuestionInstance::answer).collect()
    }
}

/// Module ids used by [`generate_synthetic`].
pub fn synthetic_module_id(i: usize) -> String {
    format!("m{}", i + 1)
}

/// Each instance draws from its own ChaCha stream, so output depends only on
/// the seed and the instance index.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData, EvalError> {
    spec.validate()?;
    let k = spec.k;
    let rest = (1.0 - spec.beta) / (k - 1) as f64;
    let mut questions = Vec::with_capacity(spec.m);
    let mut forecasts = ForecastSet::new();
    for h in 0..spec.m {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(h as u64);
        let answer = rng.random_range(0..k);
        let id = format!("s{h:05}");
        let stem = Term::Word(format!("w{h}"));
        let choices = (0..k).map(|j| Term::Word(format!("w{h}c{}", j + 1))).collect();
        let q = QuestionInstance::new(&id, QuestionKind::Synonym, stem, choices, Some(answer + 1))
            .map_err(|e| EvalError::BadSpec(e.to_string()))?;
        questions.push(q);
        for (i, &acc) in spec.accuracies.iter().enumerate() {
            let hit = rng.random::<f64>() < acc;
            let favoured = if hit {
                answer
            } else {
                let j = rng.random_range(0..k - 1);
                if j >= answer {
                    j + 1
                } else {
                    j
                }
            };
            let mut probs = vec![rest; k];
            probs[favoured] = spec.beta;
            forecasts
                .insert(&id, &synthetic_module_id(i), Distribution::from_raw(probs))
                .map_err(|e| EvalError::BadSpec(e.to_string()))?;
        }
    }
    Ok(SyntheticData { questions, forecasts })
}
