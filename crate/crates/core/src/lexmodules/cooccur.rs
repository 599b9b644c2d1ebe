use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use super::LexError;
use crate::problem::{QuestionInstance, ScoreVector};

pub const DEFAULT_WINDOW: usize = 10;

/// Lowercased maximal runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn key(x: &str, y: &str) -> (String, String) {
    if x <= y {
        (x.to_string(), y.to_string())
    } else {
        (y.to_string(), x.to_string())
    }
}

/// Windowed co-occurrence counts over a corpus. Two token positions
/// co-occur when they are at most `window` tokens apart within the same
/// document; identical tokens are not paired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceTable {
    window: usize,
    tokens: u64,
    unigrams: HashMap<String, u64>,
    pairs: HashMap<(String, String), u64>,
}

impl CooccurrenceTable {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            tokens: 0,
            unigrams: HashMap::new(),
            pairs: HashMap::new(),
        }
    }

    /// Counts one document.
    pub fn ingest(&mut self, text: &str) {
        let toks = tokenize(text);
        self.tokens += toks.len() as u64;
        for (i, t) in toks.iter().enumerate() {
            *self.unigrams.entry(t.clone()).or_default() += 1;
            for u in toks.iter().skip(i + 1).take(self.window) {
                if u != t {
                    *self.pairs.entry(key(t, u)).or_default() += 1;
                }
            }
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn tokens(&self) -> u64 {
        self.tokens
    }

    pub fn pair_count(&self, x: &str, y: &str) -> u64 {
        self.pairs.get(&key(x, y)).copied().unwrap_or(0)
    }

    pub fn unigram_count(&self, x: &str) -> u64 {
        self.unigrams.get(x).copied().unwrap_or(0)
    }

    /// Sets a pair count directly (both orders).
    pub fn set_pair_count(&mut self, x: &str, y: &str, count: u64) {
        self.pairs.insert(key(x, y), count);
    }

    pub fn set_unigram_count(&mut self, x: &str, count: u64) {
        self.unigrams.insert(x.to_string(), count);
    }

    fn header(&self) -> String {
        format!("#window={} tokens={}\n", self.window, self.tokens)
    }

    /// `x<TAB>y<TAB>count` lines (x < y), sorted, after the header.
    pub fn render_pairs(&self) -> String {
        let mut out = self.header();
        let sorted: BTreeMap<_, _> = self.pairs.iter().collect();
        for ((x, y), c) in sorted {
            let _ = writeln!(out, "{x}\t{y}\t{c}");
        }
        out
    }

    /// `x<TAB>count` lines, sorted, after the header.
    pub fn render_unigrams(&self) -> String {
        let mut out = self.header();
        let sorted: BTreeMap<_, _> = self.unigrams.iter().collect();
        for (x, c) in sorted {
            let _ = writeln!(out, "{x}\t{c}");
        }
        out
    }

    /// Loads the pair and unigram files. Both carry the
    /// `#window=<int> tokens=<int>` header and the headers must agree.
    pub fn parse(pairs_text: &str, unigrams_text: &str) -> Result<Self, LexError> {
        let (window, tokens, pair_rows) = parse_counts(pairs_text, 3, "co-occurrence pair file")?;
        let (w2, t2, unigram_rows) = parse_counts(unigrams_text, 2, "unigram file")?;
        if (window, tokens) != (w2, t2) {
            return Err(LexError::format(
                "unigram file",
                1,
                "header does not match the pair file header",
            ));
        }
        let mut table = Self::new(window);
        table.tokens = tokens;
        for (fields, count) in pair_rows {
            *table.pairs.entry(key(&fields[0], &fields[1])).or_default() += count;
        }
        for (fields, count) in unigram_rows {
            *table.unigrams.entry(fields[0].clone()).or_default() += count;
        }
        Ok(table)
    }
}

type CountRows = Vec<(Vec<String>, u64)>;

fn parse_counts(text: &str, width: usize, what: &str) -> Result<(usize, u64, CountRows), LexError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let (n, header) = lines
        .next()
        .ok_or_else(|| LexError::format(what, 1, "empty file"))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| LexError::format(what, n, "expected `#window=<int> tokens=<int>` header"))?;
    let (mut window, mut tokens) = (None, None);
    for field in header.split_whitespace() {
        match field.split_once('=') {
            Some(("window", v)) => window = v.parse::<usize>().ok(),
            Some(("tokens", v)) => tokens = v.parse::<u64>().ok(),
            _ => return Err(LexError::format(what, n, format!("unexpected header field {field:?}"))),
        }
    }
    let (Some(window), Some(tokens)) = (window, tokens) else {
        return Err(LexError::format(what, n, "header needs window= and tokens="));
    };
    let mut rows = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != width || fields.iter().any(|f| f.is_empty()) {
            return Err(LexError::format(what, n, format!("expected {width} tab-separated fields")));
        }
        let count = fields[width - 1]
            .parse::<u64>()
            .map_err(|e| LexError::format(what, n, format!("bad count: {e}")))?;
        rows.push((
            fields[..width - 1].iter().map(|f| f.to_lowercase()).collect(),
            count,
        ));
    }
    Ok((window, tokens, rows))
}

/// `C(stem, choice) / (C(choice) + 1)` for each choice.
pub fn cooccurrence_score(q: &QuestionInstance, table: &CooccurrenceTable) -> ScoreVector {
    let Some(stem) = q.stem().as_word() else {
        return ScoreVector::zeros(q.k());
    };
    ScoreVector(
        q.choices()
            .iter()
            .map(|c| match c.as_word() {
                Some(w) => table.pair_count(stem, w) as f64 / (table.unigram_count(w) + 1) as f64,
                None => 0.0,
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{QuestionKind, Term};

    fn q(stem: &str, choices: &[&str]) -> QuestionInstance {
        QuestionInstance::new(
            "q",
            QuestionKind::Synonym,
            Term::word(stem).unwrap(),
            choices.iter().map(|c| Term::word(c).unwrap()).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn score_formula() {
        let mut t = CooccurrenceTable::new(10);
        t.set_pair_count("stem", "c1", 40);
        t.set_unigram_count("c1", 99);
        t.set_pair_count("c2", "stem", 10);
        t.set_unigram_count("c2", 199);
        let s = cooccurrence_score(&q("stem", &["c1", "c2", "c3"]), &t);
        assert_eq!(s.0, vec![0.4, 0.05, 0.0]);
    }

    #[test]
    fn window_boundaries() {
        let mut t = CooccurrenceTable::new(2);
        t.ingest("a b c d a");
        assert_eq!(t.pair_count("a", "c"), 2); // c sits two away from both a
        assert_eq!(t.pair_count("a", "d"), 1); // d and the last a
        assert_eq!(t.pair_count("b", "a"), 1);
        assert_eq!(t.unigram_count("a"), 2);
        assert_eq!(t.tokens(), 5);
    }

    #[test]
    fn documents_do_not_share_windows() {
        let mut t = CooccurrenceTable::new(5);
        t.ingest("alpha");
        t.ingest("beta");
        assert_eq!(t.pair_count("alpha", "beta"), 0);
    }

    #[test]
    fn ingestion_order_is_irrelevant() {
        let docs = ["The cat sat on the mat.", "A dog, a cat; a bird!", "mat cat dog"];
        let mut a = CooccurrenceTable::new(3);
        let mut b = CooccurrenceTable::new(3);
        for d in docs {
            a.ingest(d);
        }
        for d in docs.iter().rev() {
            b.ingest(d);
        }
        assert_eq!(a, b);
    }

    #[test]
    fn file_round_trip() {
        let mut t = CooccurrenceTable::new(4);
        t.ingest("Red apples and green apples, red wine");
        let back = CooccurrenceTable::parse(&t.render_pairs(), &t.render_unigrams()).unwrap();
        assert_eq!(back, t);
        assert!(CooccurrenceTable::parse("#window=4 tokens=1\n", "#window=5 tokens=1\n").is_err());
        assert!(CooccurrenceTable::parse("a\tb\t1\n", "#window=4 tokens=1\n").is_err());
    }

    #[test]
    fn tokenizer_folds_case_and_splits_punctuation() {
        assert_eq!(tokenize("Hello, World! it's 2x"), vec!["hello", "world", "it", "s", "2x"]);
    }
}
