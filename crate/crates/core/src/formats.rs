//! Line-oriented text formats: question files, forecast files, weight files
//! and key-value config files.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::merge::{Rule, WeightVector, DEFAULT_EPSILON};
use crate::problem::{Distribution, ForecastSet, QuestionInstance, QuestionKind, Term};
use crate::train::TrainedWeights;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError { line, message: message.into() }
}

/// Non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionFile {
    pub kind: QuestionKind,
    pub k: usize,
    pub questions: Vec<QuestionInstance>,
}

/// Parses `#kind=<kind> k=<int>` followed by
/// `id<TAB>stem<TAB>choice_1..choice_k[<TAB>answer]` lines.
pub fn parse_questions(text: &str) -> Result<QuestionFile, FormatError> {
    let mut lines = content_lines(text);
    let (n, header) = lines.next().ok_or_else(|| err(1, "empty question file"))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| err(n, "expected header `#kind=<synonym|analogy> k=<int>`"))?;
    let mut kind = None;
    let mut k = None;
    for field in header.split_whitespace() {
        match field.split_once('=') {
            Some(("kind", v)) => kind = Some(v.parse::<QuestionKind>().map_err(|e| err(n, e))?),
            Some(("k", v)) => k = Some(v.parse::<usize>().map_err(|e| err(n, format!("bad k: {e}")))?),
            _ => return Err(err(n, format!("unexpected header field {field:?}"))),
        }
    }
    let kind = kind.ok_or_else(|| err(n, "header is missing kind="))?;
    let k = k.ok_or_else(|| err(n, "header is missing k="))?;
    if k < 2 {
        return Err(err(n, "k must be at least 2"));
    }

    let mut questions = Vec::new();
    let mut ids = HashSet::new();
    for (n, line) in lines {
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let answer = match fields.len() {
            len if len == k + 2 => None,
            len if len == k + 3 => Some(
                fields[k + 2]
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| err(n, format!("bad answer index: {e}")))?,
            ),
            len => {
                return Err(err(
                    n,
                    format!("expected {} or {} tab-separated fields, got {len}", k + 2, k + 3),
                ))
            }
        };
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(err(n, "empty question id"));
        }
        if !ids.insert(id.to_string()) {
            return Err(err(n, format!("duplicate question id {id}")));
        }
        let term = |s: &str| Term::parse(s.trim(), kind).map_err(|e| err(n, e.to_string()));
        let stem = term(fields[1])?;
        let choices = fields[2..k + 2].iter().map(|s| term(s)).collect::<Result<Vec<_>, _>>()?;
        let q = QuestionInstance::new(id, kind, stem, choices, answer)
            .map_err(|e| err(n, e.to_string()))?;
        questions.push(q);
    }
    Ok(QuestionFile { kind, k, questions })
}

pub fn write_questions(file: &QuestionFile) -> String {
    let mut out = format!("#kind={} k={}\n", file.kind, file.k);
    for q in &file.questions {
        out.push_str(q.id());
        let _ = write!(out, "\t{}", q.stem());
        for c in q.choices() {
            let _ = write!(out, "\t{c}");
        }
        if let Some(a) = q.answer() {
            let _ = write!(out, "\t{a}");
        }
        out.push('\n');
    }
    out
}

/// Parses `instance_id<TAB>module_id<TAB>p_1..p_k` rows. Values are not
/// checked for summing to one; see [`crate::problem::validate_forecast_set`].
pub fn parse_forecasts(text: &str) -> Result<ForecastSet, FormatError> {
    let mut fs = ForecastSet::new();
    for (n, line) in content_lines(text) {
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 4 {
            return Err(err(n, "expected instance, module and at least two probabilities"));
        }
        let probs = fields[2..]
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| err(n, format!("bad probability {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(err(n, "non-finite probability"));
        }
        fs.insert(fields[0].trim(), fields[1].trim(), Distribution::from_raw(probs))
            .map_err(|e| err(n, e.to_string()))?;
    }
    Ok(fs)
}

/// Rows in instance-major order with shortest round-trip float formatting.
pub fn write_forecasts(fs: &ForecastSet) -> String {
    let mut out = String::new();
    for (inst, module, d) in fs.rows() {
        let _ = write!(out, "{inst}\t{module}");
        for p in d.probs() {
            let _ = write!(out, "\t{p}");
        }
        out.push('\n');
    }
    out
}

/// Contents of a weight file: rule, floor and one weight per module id.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFile {
    pub rule: Rule,
    pub epsilon: f64,
    pub weights: Vec<(String, f64)>,
    pub train_mean_likelihood: Option<f64>,
    pub seed: Option<u64>,
}

impl WeightFile {
    pub fn from_trained(trained: &TrainedWeights, module_ids: &[String], seed: u64) -> Self {
        Self {
            rule: trained.weights.rule(),
            epsilon: trained.weights.epsilon(),
            weights: module_ids
                .iter()
                .cloned()
                .zip(trained.weights.weights().iter().copied())
                .collect(),
            train_mean_likelihood: Some(trained.train_mean_likelihood),
            seed: Some(seed),
        }
    }

    pub fn module_ids(&self) -> Vec<&str> {
        self.weights.iter().map(|(m, _)| m.as_str()).collect()
    }

    pub fn weight_vector(&self) -> Result<WeightVector, crate::merge::MergeError> {
        WeightVector::new(
            self.rule,
            self.weights.iter().map(|(_, w)| *w).collect(),
            self.epsilon,
        )
    }

    pub fn render(&self) -> String {
        let mut out = format!("rule={}\nepsilon={}\n", self.rule, self.epsilon);
        for (m, w) in &self.weights {
            let _ = writeln!(out, "weight.{m}={w}");
        }
        if let Some(ml) = self.train_mean_likelihood {
            let _ = writeln!(out, "train_mean_likelihood={ml}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed={seed}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut rule = None;
        let mut epsilon = DEFAULT_EPSILON;
        let mut weights = Vec::new();
        let mut train_mean_likelihood = None;
        let mut seed = None;
        let mut seen = HashSet::new();
        for (n, key, value) in parse_key_value_lines(text)? {
            let real = |v: &str| v.parse::<f64>().map_err(|e| err(n, format!("{key}: {e}")));
            if let Some(module) = key.strip_prefix("weight.") {
                if !seen.insert(module.to_string()) {
                    return Err(err(n, format!("duplicate weight for {module}")));
                }
                weights.push((module.to_string(), real(&value)?));
                continue;
            }
            match key.as_str() {
                "rule" => rule = Some(value.parse::<Rule>().map_err(|e| err(n, e))?),
                "epsilon" => epsilon = real(&value)?,
                "train_mean_likelihood" => train_mean_likelihood = Some(real(&value)?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| err(n, format!("seed: {e}")))?),
                // other diagnostics are informational
                _ => {}
            }
        }
        let rule = rule.ok_or_else(|| err(0, "weight file has no rule= line"))?;
        if weights.is_empty() {
            return Err(err(0, "weight file has no weight.<module> lines"));
        }
        Ok(Self { rule, epsilon, weights, train_mean_likelihood, seed })
    }
}

/// `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_value_lines(text: &str) -> Result<Vec<(usize, String, String)>, FormatError> {
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        let line = line.trim();
        if line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(n, format!("expected key=value, got {line:?}")))?;
        out.push((n, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Key-value config file as a map; later keys override earlier ones.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, FormatError> {
    Ok(parse_key_value_lines(text)?
        .into_iter()
        .map(|(_, k, v)| (k, v))
        .collect())
}
