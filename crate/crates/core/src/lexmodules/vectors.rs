use std::collections::{BTreeMap, HashMap, HashSet};

use super::{cosine, LexError};
use crate::problem::{QuestionInstance, ScoreVector};

/// Dense word vectors of a fixed dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// Parses `token<TAB>v1 v2 ... vd` lines.
    pub fn parse(text: &str) -> Result<Self, LexError> {
        let what = "embedding file";
        let mut table = Self::default();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (token, values) = line
                .split_once('\t')
                .ok_or_else(|| LexError::format(what, n, "expected token<TAB>values"))?;
            let v = values
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| LexError::format(what, n, format!("bad component: {e}")))?;
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(LexError::format(what, n, "vector must be non-empty and finite"));
            }
            if table.vectors.is_empty() {
                table.dim = v.len();
            } else if v.len() != table.dim {
                return Err(LexError::format(
                    what,
                    n,
                    format!("dimension {} differs from {}", v.len(), table.dim),
                ));
            }
            table.vectors.insert(token.trim().to_lowercase(), v);
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}

/// `max(0, cos(v(stem), v(choice)))`; missing vectors score 0.
pub fn embedding_similarity(q: &QuestionInstance, emb: &EmbeddingTable) -> ScoreVector {
    let stem = q.stem().as_word().and_then(|w| emb.get(w));
    ScoreVector(
        q.choices()
            .iter()
            .map(|c| match (stem, c.as_word().and_then(|w| emb.get(w))) {
                (Some(s), Some(v)) => cosine(s, v).max(0.0),
                _ => 0.0,
            })
            .collect(),
    )
}

type TermFrequencies = BTreeMap<String, f64>;

/// Word definitions, vectorized as raw term frequencies of their
/// alphabetic tokens.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DefinitionTable {
    definitions: HashMap<String, String>,
    stop_words: HashSet<String>,
}

impl DefinitionTable {
    /// Parses `token<TAB>definition text` lines; tokens must be unique.
    pub fn parse(text: &str) -> Result<Self, LexError> {
        let what = "definition file";
        let mut table = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (token, def) = line
                .split_once('\t')
                .ok_or_else(|| LexError::format(what, i + 1, "expected token<TAB>definition"))?;
            let token = token.trim().to_lowercase();
            if table.definitions.insert(token.clone(), def.to_string()).is_some() {
                return Err(LexError::format(what, i + 1, format!("duplicate entry for {token}")));
            }
        }
        Ok(table)
    }

    /// Tokens dropped before building definition vectors (none by default).
    pub fn with_stop_words<I: IntoIterator<Item = S>, S: Into<String>>(mut self, words: I) -> Self {
        self.stop_words = words.into_iter().map(|w| w.into().to_lowercase()).collect();
        self
    }

    pub fn definition(&self, token: &str) -> Option<&str> {
        self.definitions.get(token).map(String::as_str)
    }

    pub fn vector(&self, token: &str) -> Option<TermFrequencies> {
        let def = self.definitions.get(token)?;
        let mut tf = TermFrequencies::new();
        for word in def
            .split(|c: char| !c.is_alphabetic())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .filter(|w| !self.stop_words.contains(w))
        {
            *tf.entry(word).or_default() += 1.0;
        }
        Some(tf)
    }
}

fn sparse_cosine(a: &TermFrequencies, b: &TermFrequencies) -> f64 {
    let dot: f64 = a.iter().filter_map(|(w, x)| b.get(w).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum();
    let nb: f64 = b.values().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// For `A:B :: C:D`, `max(0, cos(A, C)) + max(0, cos(B, D))` over
/// definition vectors.
pub fn definition_similarity(q: &QuestionInstance, defs: &DefinitionTable) -> ScoreVector {
    let sim = |x: &str, y: &str| match (defs.vector(x), defs.vector(y)) {
        (Some(a), Some(b)) => sparse_cosine(&a, &b).max(0.0),
        _ => 0.0,
    };
    let Some((a, b)) = q.stem().as_pair() else {
        return ScoreVector::zeros(q.k());
    };
    ScoreVector(
        q.choices()
            .iter()
            .map(|choice| match choice.as_pair() {
                Some((c, d)) => sim(a, c) + sim(b, d),
                None => 0.0,
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{QuestionKind, Term};
    use approx::assert_abs_diff_eq;

    fn syn(stem: &str, choices: &[&str]) -> QuestionInstance {
        QuestionInstance::new(
            "q",
            QuestionKind::Synonym,
            Term::word(stem).unwrap(),
            choices.iter().map(|c| Term::word(c).unwrap()).collect(),
            None,
        )
        .unwrap()
    }

    fn analogy(stem: (&str, &str), choices: &[(&str, &str)]) -> QuestionInstance {
        QuestionInstance::new(
            "q",
            QuestionKind::Analogy,
            Term::pair(stem.0, stem.1).unwrap(),
            choices.iter().map(|(a, b)| Term::pair(a, b).unwrap()).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn embedding_extremes() {
        let emb = EmbeddingTable::parse("stem\t1 0 0\nc1\t1 0 0\nc2\t0 1 0\nc3\t-1 0 0\n").unwrap();
        assert_eq!(emb.dim(), 3);
        assert_eq!(embedding_similarity(&syn("stem", &["c1", "c2", "c3"]), &emb).0, vec![1.0, 0.0, 0.0]);
        assert_eq!(embedding_similarity(&syn("other", &["c1", "c2"]), &emb).0, vec![0.0, 0.0]);
    }

    #[test]
    fn embedding_hand_arithmetic() {
        let emb = EmbeddingTable::parse("s\t1 2 2\na\t2 1 2\nb\t0 3 4\n").unwrap();
        let s = embedding_similarity(&syn("s", &["a", "b"]), &emb);
        // |s| = 3, |a| = 3, |b| = 5
        assert_abs_diff_eq!(s.0[0], 8.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.0[1], 14.0 / 15.0, epsilon = 1e-15);
    }

    #[test]
    fn embedding_parse_errors() {
        assert!(EmbeddingTable::parse("a\t1 2\nb\t1 2 3\n").is_err());
        assert!(EmbeddingTable::parse("a\t1 x\n").is_err());
        assert!(EmbeddingTable::parse("a 1 2\n").is_err());
    }

    #[test]
    fn definition_examples() {
        let defs = DefinitionTable::parse(
            "a\tthe young of a cat\nc\tthe young of a cat\nb\tsmall animal\nd\tsmall animal\n",
        )
        .unwrap();
        let s = definition_similarity(&analogy(("a", "b"), &[("c", "d"), ("x", "y")]), &defs);
        assert_abs_diff_eq!(s.0[0], 2.0, epsilon = 1e-12);
        assert_eq!(s.0[1], 0.0);

        let empty = DefinitionTable::default();
        assert_eq!(definition_similarity(&analogy(("a", "b"), &[("c", "d"), ("x", "y")]), &empty).0, vec![0.0, 0.0]);
    }

    #[test]
    fn definition_term_frequency_cosine() {
        let defs = DefinitionTable::parse(
            "kitten\ta young cat, a small cat\npuppy\ta young dog\nmeow\tcry of a cat\n",
        )
        .unwrap();
        // kitten: a2 young1 cat2 small1 ; puppy: a1 young1 dog1
        let cos = (2.0 + 1.0) / ((4.0f64 + 1.0 + 4.0 + 1.0).sqrt() * 3.0f64.sqrt());
        let s = definition_similarity(&analogy(("kitten", "meow"), &[("puppy", "zzz"), ("meow", "kitten")]), &defs);
        assert_abs_diff_eq!(s.0[0], cos, epsilon = 1e-12);
        // kitten vs meow: a·a = 2, cat·cat = 2 ; |meow| = 2
        let km = 4.0 / (10.0f64.sqrt() * 2.0);
        assert_abs_diff_eq!(s.0[1], 2.0 * km, epsilon = 1e-12);
    }

    #[test]
    fn stop_words_are_optional() {
        let defs = DefinitionTable::parse("a\tthe cat\nb\tthe dog\n").unwrap();
        let q = analogy(("a", "x"), &[("b", "y"), ("c", "d")]);
        assert!(definition_similarity(&q, &defs).0[0] > 0.0);
        let defs = defs.with_stop_words(["the"]);
        assert_eq!(definition_similarity(&q, &defs).0[0], 0.0);
    }

    #[test]
    fn duplicate_definitions_rejected() {
        assert!(DefinitionTable::parse("a\tx\nA\ty\n").is_err());
    }
}
