//! Problem and forecast data: questions, choice distributions, forecast
//! tensors, score normalization and validation.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Tolerance used when constructing a [`Distribution`] directly.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

/// Tolerance used by [`validate_forecast_set`] on parsed forecast files.
pub const FORECAST_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("empty term")]
    EmptyTerm,
    #[error("term {0:?} contains whitespace")]
    WhitespaceInTerm(String),
    #[error("analogy term {0:?} must have the form A:B")]
    BadPairTerm(String),
    #[error("question {id}: needs at least 2 choices, got {k}")]
    TooFewChoices { id: String, k: usize },
    #[error("question {id}: duplicate choice {choice}")]
    DuplicateChoice { id: String, choice: String },
    #[error("question {id}: answer {answer} outside 1..={k}")]
    AnswerOutOfRange { id: String, answer: usize, k: usize },
    #[error("question {id}: term {term} does not match question kind {kind}")]
    KindMismatch { id: String, term: String, kind: QuestionKind },
    #[error("negative score {value} at choice {index}")]
    NegativeScore { index: usize, value: f64 },
    #[error("non-finite score at choice {index}")]
    NonFiniteScore { index: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("duplicate forecast for instance {instance}, module {module}")]
    DuplicateForecast { instance: String, module: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuestionKind {
    Synonym,
    Analogy,
}

impl QuestionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QuestionKind::Synonym => "synonym",
            QuestionKind::Analogy => "analogy",
        }
    }
}

impl fmt::Display for QuestionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for QuestionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "synonym" => Ok(QuestionKind::Synonym),
            "analogy" => Ok(QuestionKind::Analogy),
            other => Err(format!("unknown question kind {other:?}")),
        }
    }
}

/// A stem or choice: a single token for synonym questions, an ordered word
/// pair for analogy questions. Tokens are case-folded on construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Word(String),
    Pair(String, String),
}

fn token(raw: &str) -> Result<String, ProblemError> {
    if raw.is_empty() {
        return Err(ProblemError::EmptyTerm);
    }
    if raw.chars().any(char::is_whitespace) {
        return Err(ProblemError::WhitespaceInTerm(raw.to_string()));
    }
    Ok(raw.to_lowercase())
}

impl Term {
    pub fn word(raw: &str) -> Result<Self, ProblemError> {
        let t = token(raw)?;
        if t.contains(':') {
            return Err(ProblemError::BadPairTerm(raw.to_string()));
        }
        Ok(Term::Word(t))
    }

    pub fn pair(a: &str, b: &str) -> Result<Self, ProblemError> {
        let (a, b) = (token(a)?, token(b)?);
        if a.contains(':') || b.contains(':') {
            return Err(ProblemError::BadPairTerm(format!("{a}:{b}")));
        }
        Ok(Term::Pair(a, b))
    }

    /// Parses a term as written in question files (`word` or `a:b`).
    pub fn parse(raw: &str, kind: QuestionKind) -> Result<Self, ProblemError> {
        match kind {
            QuestionKind::Synonym => Term::word(raw),
            QuestionKind::Analogy => {
                let mut parts = raw.split(':');
                match (parts.next(), parts.next(), parts.next()) {
                    (Some(a), Some(b), None) => Term::pair(a, b),
                    _ => Err(ProblemError::BadPairTerm(raw.to_string())),
                }
            }
        }
    }

    pub fn kind(&self) -> QuestionKind {
        match self {
            Term::Word(_) => QuestionKind::Synonym,
            Term::Pair(..) => QuestionKind::Analogy,
        }
    }

    pub fn as_word(&self) -> Option<&str> {
        match self {
            Term::Word(w) => Some(w),
            Term::Pair(..) => None,
        }
    }

    pub fn as_pair(&self) -> Option<(&str, &str)> {
        match self {
            Term::Word(_) => None,
            Term::Pair(a, b) => Some((a, b)),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Word(w) => f.write_str(w),
            Term::Pair(a, b) => write!(f, "{a}:{b}"),
        }
    }
}

/// One multiple-choice problem. `answer` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionInstance {
    id: String,
    kind: QuestionKind,
    stem: Term,
    choices: Vec<Term>,
    answer: Option<usize>,
}

impl QuestionInstance {
    pub fn new(
        id: impl Into<String>,
        kind: QuestionKind,
        stem: Term,
        choices: Vec<Term>,
        answer: Option<usize>,
    ) -> Result<Self, ProblemError> {
        let id = id.into();
        let k = choices.len();
        if k < 2 {
            return Err(ProblemError::TooFewChoices { id, k });
        }
        for term in std::iter::once(&stem).chain(&choices) {
            if term.kind() != kind {
                return Err(ProblemError::KindMismatch {
                    id,
                    term: term.to_string(),
                    kind,
                });
            }
        }
        let mut seen = HashSet::new();
        for c in &choices {
            if !seen.insert(c) {
                return Err(ProblemError::DuplicateChoice {
                    id,
                    choice: c.to_string(),
                });
            }
        }
        if let Some(a) = answer {
            if a == 0 || a > k {
                return Err(ProblemError::AnswerOutOfRange { id, answer: a, k });
            }
        }
        Ok(Self {
            id,
            kind,
            stem,
            choices,
            answer,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> QuestionKind {
        self.kind
    }

    pub fn stem(&self) -> &Term {
        &self.stem
    }

    pub fn choices(&self) -> &[Term] {
        &self.choices
    }

    pub fn k(&self) -> usize {
        self.choices.len()
    }

    pub fn answer(&self) -> Option<usize> {
        self.answer
    }
}

/// A probability vector over the choices of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, ProblemError> {
        if probs.is_empty() {
            return Err(ProblemError::InvalidDistribution("no entries".into()));
        }
        if let Some((j, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(ProblemError::InvalidDistribution(format!(
                "entry {} is {p}",
                j + 1
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(ProblemError::InvalidDistribution(format!("sum={sum}")));
        }
        Ok(Self(probs))
    }

    /// Wraps a vector without checking it. Used for parsed forecast data,
    /// which is checked separately by [`validate_forecast_set`].
    pub fn from_raw(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    /// 1-based probability lookup.
    pub fn prob(&self, choice: usize) -> f64 {
        self.0[choice - 1]
    }

    pub fn max_prob(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Raw nonnegative solver scores prior to normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }
}

/// Scales scores to sum to one. An all-zero vector means the module has no
/// evidence and yields the uniform distribution.
pub fn normalize_scores(scores: &ScoreVector) -> Result<Distribution, ProblemError> {
    let k = scores.0.len();
    if k == 0 {
        return Err(ProblemError::InvalidDistribution("no entries".into()));
    }
    for (index, &value) in scores.0.iter().enumerate() {
        if !value.is_finite() {
            return Err(ProblemError::NonFiniteScore { index: index + 1 });
        }
        if value < 0.0 {
            return Err(ProblemError::NegativeScore {
                index: index + 1,
                value,
            });
        }
    }
    let sum: f64 = scores.0.iter().sum();
    if sum == 0.0 {
        return Ok(Distribution::uniform(k));
    }
    Ok(Distribution(scores.0.iter().map(|s| s / sum).collect()))
}

/// Smallest 1-based index attaining the maximum probability.
pub fn argmax_choice(d: &Distribution) -> usize {
    let mut best = 0;
    for (j, &p) in d.0.iter().enumerate() {
        if p > d.0[best] {
            best = j;
        }
    }
    best + 1
}

/// Per-module, per-instance forecasts. Cells may be missing until validated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForecastSet {
    module_ids: Vec<String>,
    instance_ids: Vec<String>,
    module_index: HashMap<String, usize>,
    instance_index: HashMap<String, usize>,
    // cells[h][i]
    cells: Vec<Vec<Option<Distribution>>>,
}

impl ForecastSet {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern_module(&mut self, id: &str) -> usize {
        if let Some(&i) = self.module_index.get(id) {
            return i;
        }
        let i = self.module_ids.len();
        self.module_ids.push(id.to_string());
        self.module_index.insert(id.to_string(), i);
        for row in &mut self.cells {
            row.push(None);
        }
        i
    }

    fn intern_instance(&mut self, id: &str) -> usize {
        if let Some(&h) = self.instance_index.get(id) {
            return h;
        }
        let h = self.instance_ids.len();
        self.instance_ids.push(id.to_string());
        self.instance_index.insert(id.to_string(), h);
        self.cells.push(vec![None; self.module_ids.len()]);
        h
    }

    /// Adds one forecast; ids are registered in first-seen order.
    pub fn insert(
        &mut self,
        instance: &str,
        module: &str,
        dist: Distribution,
    ) -> Result<(), ProblemError> {
        let i = self.intern_module(module);
        let h = self.intern_instance(instance);
        let cell = &mut self.cells[h][i];
        if cell.is_some() {
            return Err(ProblemError::DuplicateForecast {
                instance: instance.to_string(),
                module: module.to_string(),
            });
        }
        *cell = Some(dist);
        Ok(())
    }

    /// Merges another set into this one. Fails on overlapping cells.
    pub fn extend(&mut self, other: &ForecastSet) -> Result<(), ProblemError> {
        for (h, inst) in other.instance_ids.iter().enumerate() {
            for (i, module) in other.module_ids.iter().enumerate() {
                if let Some(d) = &other.cells[h][i] {
                    self.insert(inst, module, d.clone())?;
                }
            }
        }
        Ok(())
    }

    pub fn module_ids(&self) -> &[String] {
        &self.module_ids
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    pub fn n_modules(&self) -> usize {
        self.module_ids.len()
    }

    pub fn n_instances(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn module_position(&self, id: &str) -> Option<usize> {
        self.module_index.get(id).copied()
    }

    pub fn instance_position(&self, id: &str) -> Option<usize> {
        self.instance_index.get(id).copied()
    }

    pub fn get(&self, instance: usize, module: usize) -> Option<&Distribution> {
        self.cells.get(instance)?.get(module)?.as_ref()
    }

    /// All module forecasts for one instance, or `None` if any is missing.
    pub fn forecasts(&self, instance: usize) -> Option<Vec<&Distribution>> {
        self.cells.get(instance)?.iter().map(Option::as_ref).collect()
    }

    /// Restricts the set to the given instances (in the given order) and
    /// modules. Unknown ids are skipped.
    pub fn subset(&self, instances: &[&str], modules: &[&str]) -> ForecastSet {
        let mut out = ForecastSet::new();
        for m in modules {
            if self.module_index.contains_key(*m) {
                out.intern_module(m);
            }
        }
        for inst in instances {
            let Some(&h) = self.instance_index.get(*inst) else {
                continue;
            };
            out.intern_instance(inst);
            for m in modules {
                if let Some(&i) = self.module_index.get(*m) {
                    if let Some(d) = &self.cells[h][i] {
                        // ids are fresh in `out`, so this cannot collide
                        let _ = out.insert(inst, m, d.clone());
                    }
                }
            }
        }
        out
    }

    /// Rows in instance-major, module-minor order.
    pub fn rows(&self) -> impl Iterator<Item = (&str, &str, &Distribution)> + '_ {
        self.cells.iter().enumerate().flat_map(move |(h, row)| {
            row.iter().enumerate().filter_map(move |(i, d)| {
                d.as_ref()
                    .map(|d| (self.instance_ids[h].as_str(), self.module_ids[i].as_str(), d))
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    MissingCell { instance: String, module: String },
    BadSum { instance: String, module: String, sum: f64 },
    NegativeEntry { instance: String, module: String, choice: usize, value: f64 },
    ChoiceCountMismatch { instance: String, module: String, expected: usize, found: usize },
    UnknownInstance { instance: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingCell { instance, module } => {
                write!(f, "{instance}/{module}: missing forecast")
            }
            Violation::BadSum { instance, module, sum } => {
                write!(f, "{instance}/{module}: sum={sum}")
            }
            Violation::NegativeEntry { instance, module, choice, value } => {
                write!(f, "{instance}/{module}: negative entry {value} at choice {choice}")
            }
            Violation::ChoiceCountMismatch { instance, module, expected, found } => {
                write!(f, "{instance}/{module}: expected {expected} choices, found {found}")
            }
            Violation::UnknownInstance { instance } => {
                write!(f, "{instance}: unknown instance")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Lists every structural problem in `fs` relative to the question list.
pub fn validate_forecast_set(fs: &ForecastSet, questions: &[QuestionInstance]) -> ValidationReport {
    let by_id: HashMap<&str, &QuestionInstance> =
        questions.iter().map(|q| (q.id(), q)).collect();
    let mut violations = Vec::new();
    for (h, inst) in fs.instance_ids().iter().enumerate() {
        let question = by_id.get(inst.as_str());
        if question.is_none() {
            violations.push(Violation::UnknownInstance {
                instance: inst.clone(),
            });
        }
        for (i, module) in fs.module_ids().iter().enumerate() {
            let Some(d) = fs.get(h, i) else {
                violations.push(Violation::MissingCell {
                    instance: inst.clone(),
                    module: module.clone(),
                });
                continue;
            };
            if let Some(q) = question {
                if d.k() != q.k() {
                    violations.push(Violation::ChoiceCountMismatch {
                        instance: inst.clone(),
                        module: module.clone(),
                        expected: q.k(),
                        found: d.k(),
                    });
                }
            }
            for (j, &p) in d.probs().iter().enumerate() {
                if p < 0.0 {
                    violations.push(Violation::NegativeEntry {
                        instance: inst.clone(),
                        module: module.clone(),
                        choice: j + 1,
                        value: p,
                    });
                }
            }
            let sum: f64 = d.probs().iter().sum();
            if !sum.is_finite() || (sum - 1.0).abs() > FORECAST_SUM_TOLERANCE {
                violations.push(Violation::BadSum {
                    instance: inst.clone(),
                    module: module.clone(),
                    sum,
                });
            }
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn syn(id: &str, stem: &str, choices: &[&str], answer: Option<usize>) -> QuestionInstance {
        QuestionInstance::new(
            id,
            QuestionKind::Synonym,
            Term::word(stem).unwrap(),
            choices.iter().map(|c| Term::word(c).unwrap()).collect(),
            answer,
        )
        .unwrap()
    }

    #[test]
    fn normalize_examples() {
        let d = normalize_scores(&ScoreVector(vec![2.0, 3.0, 5.0])).unwrap();
        assert_abs_diff_eq!(d.probs(), &[0.2, 0.3, 0.5][..], epsilon = 1e-15);
        let d = normalize_scores(&ScoreVector(vec![0.0; 4])).unwrap();
        assert_eq!(d.probs(), &[0.25; 4]);
        let d = normalize_scores(&ScoreVector(vec![1.0, 0.0, 0.0])).unwrap();
        assert_eq!(d.probs(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_rejects_negative() {
        let err = normalize_scores(&ScoreVector(vec![1.0, -0.5])).unwrap_err();
        assert_eq!(err, ProblemError::NegativeScore { index: 2, value: -0.5 });
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(argmax_choice(&Distribution::from_raw(vec![0.1, 0.7, 0.2])), 2);
        assert_eq!(argmax_choice(&Distribution::from_raw(vec![0.5, 0.5])), 1);
        assert_eq!(argmax_choice(&Distribution::uniform(4)), 1);
    }

    #[test]
    fn terms_are_case_folded() {
        assert_eq!(Term::parse("Hidden", QuestionKind::Synonym).unwrap(), Term::Word("hidden".into()));
        assert_eq!(
            Term::parse("Cat:MEOW", QuestionKind::Analogy).unwrap(),
            Term::Pair("cat".into(), "meow".into())
        );
        assert!(Term::parse("a:b:c", QuestionKind::Analogy).is_err());
        assert!(Term::parse("cat", QuestionKind::Analogy).is_err());
        assert!(Term::parse("a:b", QuestionKind::Synonym).is_err());
        assert!(Term::word("two words").is_err());
    }

    #[test]
    fn question_invariants() {
        let w = |s: &str| Term::word(s).unwrap();
        let err = QuestionInstance::new("q", QuestionKind::Synonym, w("a"), vec![w("b")], None);
        assert!(matches!(err, Err(ProblemError::TooFewChoices { .. })));
        let err = QuestionInstance::new("q", QuestionKind::Synonym, w("a"), vec![w("b"), w("B")], None);
        assert!(matches!(err, Err(ProblemError::DuplicateChoice { .. })));
        let err = QuestionInstance::new("q", QuestionKind::Synonym, w("a"), vec![w("b"), w("c")], Some(3));
        assert!(matches!(err, Err(ProblemError::AnswerOutOfRange { .. })));
        let err = QuestionInstance::new(
            "q",
            QuestionKind::Analogy,
            w("a"),
            vec![Term::pair("b", "c").unwrap(), Term::pair("d", "e").unwrap()],
            None,
        );
        assert!(matches!(err, Err(ProblemError::KindMismatch { .. })));
    }

    fn two_module_set() -> (ForecastSet, Vec<QuestionInstance>) {
        let qs = vec![syn("q1", "a", &["b", "c"], Some(1)), syn("q2", "d", &["e", "f"], Some(2))];
        let mut fs = ForecastSet::new();
        for q in ["q1", "q2"] {
            for m in ["m1", "m2"] {
                fs.insert(q, m, Distribution::from_raw(vec![0.5, 0.5])).unwrap();
            }
        }
        (fs, qs)
    }

    #[test]
    fn validation_examples() {
        let (fs, qs) = two_module_set();
        assert!(validate_forecast_set(&fs, &qs).is_valid());

        let mut bad = ForecastSet::new();
        bad.insert("q1", "m1", Distribution::from_raw(vec![0.5, 0.6])).unwrap();
        let report = validate_forecast_set(&bad, &qs);
        assert_eq!(report.violations.len(), 1);
        assert!(report.to_string().contains("sum=1.1"));

        let mut unknown = ForecastSet::new();
        unknown.insert("q999", "m1", Distribution::uniform(2)).unwrap();
        let report = validate_forecast_set(&unknown, &qs);
        assert_eq!(
            report.violations,
            vec![Violation::UnknownInstance { instance: "q999".into() }]
        );
    }

    #[test]
    fn validation_finds_missing_negative_and_k_mismatch() {
        let qs = vec![syn("q1", "a", &["b", "c"], None), syn("q2", "d", &["e", "f"], None)];
        let mut fs = ForecastSet::new();
        fs.insert("q1", "m1", Distribution::from_raw(vec![1.2, -0.2])).unwrap();
        fs.insert("q1", "m2", Distribution::from_raw(vec![0.2, 0.3, 0.5])).unwrap();
        fs.insert("q2", "m1", Distribution::uniform(2)).unwrap();
        let report = validate_forecast_set(&fs, &qs);
        assert!(report.violations.contains(&Violation::MissingCell {
            instance: "q2".into(),
            module: "m2".into()
        }));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NegativeEntry { choice: 2, .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::ChoiceCountMismatch { expected: 2, found: 3, .. })));
    }

    #[test]
    fn duplicate_cell_rejected() {
        let (mut fs, _) = two_module_set();
        assert!(fs.insert("q1", "m1", Distribution::uniform(2)).is_err());
    }

    #[test]
    fn subset_keeps_requested_order() {
        let (fs, _) = two_module_set();
        let sub = fs.subset(&["q2", "q1"], &["m2"]);
        assert_eq!(sub.instance_ids(), &["q2".to_string(), "q1".to_string()]);
        assert_eq!(sub.module_ids(), &["m2".to_string()]);
        assert!(sub.forecasts(0).is_some());
    }

    proptest! {
        #[test]
        fn normalize_is_a_distribution(scores in prop::collection::vec(0.0f64..100.0, 2..8)) {
            let d = normalize_scores(&ScoreVector(scores)).unwrap();
            prop_assert!(Distribution::new(d.into_vec()).is_ok());
        }

        #[test]
        fn normalize_is_scale_invariant(
            scores in prop::collection::vec(0.0f64..100.0, 2..8),
            c in 1e-3f64..1e3,
        ) {
            let a = normalize_scores(&ScoreVector(scores.clone())).unwrap();
            let b = normalize_scores(&ScoreVector(scores.iter().map(|s| s * c).collect())).unwrap();
            for (x, y) in a.probs().iter().zip(b.probs()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn argmax_tracks_raw_maximum(scores in prop::collection::vec(0u32..5, 2..8)) {
            let raw: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
            prop_assume!(raw.iter().sum::<f64>() > 0.0);
            let max = raw.iter().copied().fold(f64::MIN, f64::max);
            let expected = raw.iter().position(|&s| s == max).unwrap() + 1;
            let d = normalize_scores(&ScoreVector(raw)).unwrap();
            prop_assert_eq!(argmax_choice(&d), expected);
        }
    }
}
