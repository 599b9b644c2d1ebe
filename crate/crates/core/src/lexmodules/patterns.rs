use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use super::{cosine, LexError};
use crate::problem::{QuestionInstance, ScoreVector};

pub const DEFAULT_PATTERN_COUNT: usize = 128;

const DEFAULT_PATTERNS: &str = include_str!("../../data/patterns.txt");

/// The bundled joiner templates.
pub fn default_templates() -> Vec<String> {
    DEFAULT_PATTERNS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn check_template(t: &str) -> Result<(), String> {
    let toks: Vec<&str> = t.split_whitespace().collect();
    let xs = toks.iter().filter(|&&w| w == "X").count();
    let ys = toks.iter().filter(|&&w| w == "Y").count();
    if xs != 1 || ys != 1 {
        return Err(format!("template {t:?} must use X and Y exactly once each"));
    }
    Ok(())
}

/// Phrase templates plus hit counts for filled-in templates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternTable {
    templates: Vec<String>,
    hits: HashMap<(usize, String, String), u64>,
}

impl PatternTable {
    pub fn new(templates: Vec<String>) -> Result<Self, LexError> {
        let mut seen = HashSet::new();
        for (i, t) in templates.iter().enumerate() {
            check_template(t).map_err(|m| LexError::format("pattern file", i + 1, m))?;
            if !seen.insert(t.as_str()) {
                return Err(LexError::format("pattern file", i + 1, format!("duplicate template {t:?}")));
            }
        }
        Ok(Self { templates, hits: HashMap::new() })
    }

    pub fn with_default_templates() -> Self {
        Self::new(default_templates()).expect("bundled templates are valid")
    }

    /// One template per line.
    pub fn parse_templates(text: &str) -> Result<Vec<String>, LexError> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            check_template(line).map_err(|m| LexError::format("pattern file", i + 1, m))?;
            out.push(line.to_string());
        }
        Ok(out)
    }

    /// Reads `pattern_index<TAB>x<TAB>y<TAB>count` lines; the index is
    /// 1-based into the template list. Repeated keys are summed.
    pub fn load_hits(&mut self, text: &str) -> Result<(), LexError> {
        let what = "hits file";
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [p, x, y, c] = fields.as_slice() else {
                return Err(LexError::format(what, n, "expected pattern_index<TAB>x<TAB>y<TAB>count"));
            };
            let p: usize = p
                .parse()
                .map_err(|e| LexError::format(what, n, format!("bad pattern index: {e}")))?;
            if p == 0 || p > self.templates.len() {
                return Err(LexError::format(
                    what,
                    n,
                    format!("pattern index {p} outside 1..={}", self.templates.len()),
                ));
            }
            let c: u64 = c
                .parse()
                .map_err(|e| LexError::format(what, n, format!("bad count: {e}")))?;
            *self
                .hits
                .entry((p - 1, x.to_lowercase(), y.to_lowercase()))
                .or_default() += c;
        }
        Ok(())
    }

    pub fn templates(&self) -> &[String] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    /// `pattern` is 0-based here.
    pub fn hits(&self, pattern: usize, x: &str, y: &str) -> u64 {
        self.hits
            .get(&(pattern, x.to_string(), y.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn set_hits(&mut self, pattern: usize, x: &str, y: &str, count: u64) {
        assert!(pattern < self.templates.len(), "pattern index out of range");
        self.hits.insert((pattern, x.to_string(), y.to_string()), count);
    }

    /// Renders the hit table (1-based indices), sorted.
    pub fn render_hits(&self) -> String {
        let sorted: BTreeMap<_, _> = self.hits.iter().collect();
        let mut out = String::new();
        for ((p, x, y), c) in sorted {
            let _ = writeln!(out, "{}\t{x}\t{y}\t{c}", p + 1);
        }
        out
    }
}

/// Component p is `ln(1 + hits(p, x, y))`.
pub fn pair_signature(x: &str, y: &str, pt: &PatternTable) -> Vec<f64> {
    (0..pt.len())
        .map(|p| (pt.hits(p, x, y) as f64).ln_1p())
        .collect()
}

/// Cosine between the stem pair's signature and each choice pair's,
/// clamped at 0.
pub fn phrase_vector_score(q: &QuestionInstance, pt: &PatternTable) -> ScoreVector {
    let Some((a, b)) = q.stem().as_pair() else {
        return ScoreVector::zeros(q.k());
    };
    let r1 = pair_signature(a, b, pt);
    ScoreVector(
        q.choices()
            .iter()
            .map(|c| match c.as_pair() {
                Some((x, y)) => cosine(&r1, &pair_signature(x, y, pt)).max(0.0),
                None => 0.0,
            })
            .collect(),
    )
}
