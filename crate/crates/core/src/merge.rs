//! The mixture, logarithmic and product merging rules.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::problem::{Distribution, ForecastSet};

/// Floor applied to forecasts inside the logarithmic rule.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Upper bound on logarithmic-rule weights.
pub const LOG_WEIGHT_MAX: f64 = 10.0;

/// Above this many modules the multiplicative rules work in log space.
pub const LOG_SPACE_MODULES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MergeError {
    #[error("mixture rule needs at least one positive weight")]
    AllZeroWeights,
    #[error("weight {index} = {value} outside [0, {max}] for the {rule} rule")]
    WeightOutOfRange { rule: Rule, index: usize, value: f64, max: f64 },
    #[error("epsilon {epsilon} must lie in (0, 1/k) for k = {k}")]
    BadEpsilon { epsilon: f64, k: usize },
    #[error("expected {expected} module forecasts, got {found}")]
    ModuleCountMismatch { expected: usize, found: usize },
    #[error("forecasts disagree on the number of choices ({expected} vs {found})")]
    ChoiceCountMismatch { expected: usize, found: usize },
    #[error("expected a {expected} weight vector, got {found}")]
    RuleMismatch { expected: Rule, found: Rule },
    #[error("instance {0} is out of range or has missing forecasts")]
    MissingForecasts(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Mixture,
    Logarithmic,
    Product,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Mixture, Rule::Logarithmic, Rule::Product];

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Mixture => "mixture",
            Rule::Logarithmic => "logarithmic",
            Rule::Product => "product",
        }
    }

    /// Upper end of the weight box; the lower end is always 0.
    pub fn weight_max(self) -> f64 {
        match self {
            Rule::Logarithmic => LOG_WEIGHT_MAX,
            Rule::Mixture | Rule::Product => 1.0,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mixture" => Ok(Rule::Mixture),
            "logarithmic" => Ok(Rule::Logarithmic),
            "product" => Ok(Rule::Product),
            other => Err(format!(
                "unknown rule {other:?} (expected mixture, logarithmic or product)"
            )),
        }
    }
}

/// Weights for one merging rule, one per module.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    rule: Rule,
    weights: Vec<f64>,
    epsilon: f64,
}

impl WeightVector {
    pub fn new(rule: Rule, weights: Vec<f64>, epsilon: f64) -> Result<Self, MergeError> {
        let max = rule.weight_max();
        for (index, &value) in weights.iter().enumerate() {
            if !(0.0..=max).contains(&value) {
                return Err(MergeError::WeightOutOfRange { rule, index, value, max });
            }
        }
        if rule == Rule::Mixture && !weights.iter().any(|&w| w > 0.0) {
            return Err(MergeError::AllZeroWeights);
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(MergeError::BadEpsilon { epsilon, k: 1 });
        }
        Ok(Self { rule, weights, epsilon })
    }

    pub fn with_default_epsilon(rule: Rule, weights: Vec<f64>) -> Result<Self, MergeError> {
        Self::new(rule, weights, DEFAULT_EPSILON)
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn expect_rule(&self, rule: Rule) -> Result<(), MergeError> {
        if self.rule != rule {
            return Err(MergeError::RuleMismatch { expected: rule, found: self.rule });
        }
        Ok(())
    }
}

fn check_shapes(w: &WeightVector, forecasts: &[&Distribution]) -> Result<usize, MergeError> {
    if forecasts.len() != w.len() {
        return Err(MergeError::ModuleCountMismatch {
            expected: w.len(),
            found: forecasts.len(),
        });
    }
    let k = forecasts.first().map(|d| d.k()).unwrap_or(0);
    for d in forecasts {
        if d.k() != k {
            return Err(MergeError::ChoiceCountMismatch { expected: k, found: d.k() });
        }
    }
    Ok(k)
}

fn normalized(values: Vec<f64>) -> Distribution {
    let sum: f64 = values.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        Distribution::from_raw(values.into_iter().map(|v| v / sum).collect())
    } else {
        // no choice survives: abstain
        Distribution::uniform(values.len())
    }
}

/// Normalizes `exp(log_values)` with a max shift. All `-inf` gives uniform.
fn softmax(log_values: Vec<f64>) -> Distribution {
    let max = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Distribution::uniform(log_values.len());
    }
    normalized(log_values.into_iter().map(|v| (v - max).exp()).collect())
}

/// True when a directly computed product vector has underflowed.
fn underflowed(values: &[f64]) -> bool {
    values.iter().sum::<f64>() < f64::MIN_POSITIVE && values.contains(&0.0)
}

/// Raises every entry below `epsilon` to `epsilon` and renormalizes.
pub fn floor_distribution(d: &Distribution, epsilon: f64) -> Result<Distribution, MergeError> {
    let k = d.k();
    if !(epsilon > 0.0 && epsilon < 1.0 / k as f64) {
        return Err(MergeError::BadEpsilon { epsilon, k });
    }
    if d.probs().iter().all(|&p| p >= epsilon) {
        return Ok(d.clone());
    }
    Ok(normalized(d.probs().iter().map(|&p| p.max(epsilon)).collect()))
}

/// `D_j ∝ Σ_i w_i p_ij`.
pub fn merge_mixture(w: &WeightVector, forecasts: &[&Distribution]) -> Result<Distribution, MergeError> {
    w.expect_rule(Rule::Mixture)?;
    let k = check_shapes(w, forecasts)?;
    if !w.weights.iter().any(|&x| x > 0.0) {
        return Err(MergeError::AllZeroWeights);
    }
    let mut mixed = vec![0.0; k];
    for (&wi, d) in w.weights.iter().zip(forecasts) {
        for (m, &p) in mixed.iter_mut().zip(d.probs()) {
            *m += wi * p;
        }
    }
    Ok(normalized(mixed))
}

/// `D_j ∝ Π_i p_ij^{w_i}` over floored forecasts.
pub fn merge_logarithmic(
    w: &WeightVector,
    forecasts: &[&Distribution],
) -> Result<Distribution, MergeError> {
    w.expect_rule(Rule::Logarithmic)?;
    let k = check_shapes(w, forecasts)?;
    let floored = forecasts
        .iter()
        .map(|d| floor_distribution(d, w.epsilon))
        .collect::<Result<Vec<_>, _>>()?;

    if w.len() <= LOG_SPACE_MODULES {
        let mut prod = vec![1.0; k];
        for (&wi, d) in w.weights.iter().zip(&floored) {
            for (l, &p) in prod.iter_mut().zip(d.probs()) {
                *l *= p.powf(wi);
            }
        }
        if !underflowed(&prod) {
            return Ok(normalized(prod));
        }
    }
    let mut log_l = vec![0.0; k];
    for (&wi, d) in w.weights.iter().zip(&floored) {
        for (l, &p) in log_l.iter_mut().zip(d.probs()) {
            *l += wi * p.ln();
        }
    }
    Ok(softmax(log_l))
}

/// `D_j ∝ Π_i (w_i p_ij + (1 - w_i)/k)`.
pub fn merge_product(
    w: &WeightVector,
    forecasts: &[&Distribution],
    k: usize,
) -> Result<Distribution, MergeError> {
    w.expect_rule(Rule::Product)?;
    let found = check_shapes(w, forecasts)?;
    if !forecasts.is_empty() && found != k {
        return Err(MergeError::ChoiceCountMismatch { expected: k, found });
    }
    let prior = 1.0 / k as f64;
    let factor = |wi: f64, p: f64| wi * p + (1.0 - wi) * prior;

    if w.len() <= LOG_SPACE_MODULES {
        let mut prod = vec![1.0; k];
        for (&wi, d) in w.weights.iter().zip(forecasts) {
            for (v, &p) in prod.iter_mut().zip(d.probs()) {
                *v *= factor(wi, p);
            }
        }
        if !underflowed(&prod) {
            return Ok(normalized(prod));
        }
    }
    let mut log_p = vec![0.0; k];
    for (&wi, d) in w.weights.iter().zip(forecasts) {
        for (v, &p) in log_p.iter_mut().zip(d.probs()) {
            *v += factor(wi, p).ln();
        }
    }
    Ok(softmax(log_p))
}

/// Applies the weight vector's rule to a list of module forecasts.
pub fn merge_forecasts(
    w: &WeightVector,
    forecasts: &[&Distribution],
) -> Result<Distribution, MergeError> {
    match w.rule {
        Rule::Mixture => merge_mixture(w, forecasts),
        Rule::Logarithmic => merge_logarithmic(w, forecasts),
        Rule::Product => {
            let k = check_shapes(w, forecasts)?;
            merge_product(w, forecasts, k)
        }
    }
}

/// Merged distribution for instance `h` (0-based position in `fs`).
pub fn merge(w: &WeightVector, fs: &ForecastSet, h: usize) -> Result<Distribution, MergeError> {
    if w.len() != fs.n_modules() {
        return Err(MergeError::ModuleCountMismatch {
            expected: fs.n_modules(),
            found: w.len(),
        });
    }
    let forecasts = fs.forecasts(h).ok_or(MergeError::MissingForecasts(h))?;
    merge_forecasts(w, &forecasts)
}
