use std::collections::{BTreeSet, HashMap, HashSet};

use super::{LexError, Relation};
use crate::problem::{normalize_scores, Distribution, QuestionInstance, ScoreVector};

pub(crate) type NodeId = u32;
pub(crate) type LabelId = u32;

/// Directed word graph with labelled edges.
#[derive(Debug, Clone, Default)]
pub struct LexicalGraph {
    nodes: Vec<String>,
    node_index: HashMap<String, NodeId>,
    labels: Vec<String>,
    label_index: HashMap<String, LabelId>,
    out_edges: Vec<Vec<(LabelId, NodeId)>>,
    in_edges: Vec<Vec<(LabelId, NodeId)>>,
    edge_set: HashSet<(NodeId, LabelId, NodeId)>,
}

impl LexicalGraph {
    pub fn new() -> Self {
        Self::default()
    }

    fn node(&mut self, word: &str) -> NodeId {
        if let Some(&id) = self.node_index.get(word) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(word.to_string());
        self.node_index.insert(word.to_string(), id);
        self.out_edges.push(Vec::new());
        self.in_edges.push(Vec::new());
        id
    }

    fn label(&mut self, label: &str) -> LabelId {
        if let Some(&id) = self.label_index.get(label) {
            return id;
        }
        let id = self.labels.len() as LabelId;
        self.labels.push(label.to_string());
        self.label_index.insert(label.to_string(), id);
        id
    }

    /// Adds `head -label-> tail` (words are case-folded). Returns false if
    /// the edge was already present.
    pub fn add_edge(&mut self, head: &str, label: &str, tail: &str) -> bool {
        let h = self.node(&head.to_lowercase());
        let t = self.node(&tail.to_lowercase());
        let l = self.label(label);
        if !self.edge_set.insert((h, l, t)) {
            return false;
        }
        self.out_edges[h as usize].push((l, t));
        self.in_edges[t as usize].push((l, h));
        true
    }

    /// Parses `head<TAB>relation<TAB>tail` lines; duplicate edges are merged.
    pub fn parse(text: &str) -> Result<Self, LexError> {
        let mut g = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            match fields.as_slice() {
                [h, r, t] if !h.is_empty() && !r.is_empty() && !t.is_empty() => {
                    g.add_edge(h, r, t);
                }
                _ => {
                    return Err(LexError::format(
                        "graph file",
                        i + 1,
                        "expected head<TAB>relation<TAB>tail",
                    ))
                }
            }
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_set.len()
    }

    pub fn has_edge(&self, head: &str, label: &str, tail: &str) -> bool {
        match (self.node_id(head), self.label_index.get(label), self.node_id(tail)) {
            (Some(h), Some(&l), Some(t)) => self.edge_set.contains(&(h, l, t)),
            _ => false,
        }
    }

    /// All edges as `(head, label, tail)`, sorted.
    pub fn edges(&self) -> BTreeSet<(&str, &str, &str)> {
        self.edge_set
            .iter()
            .map(|&(h, l, t)| (self.word(h), self.label_name(l), self.word(t)))
            .collect()
    }

    pub(crate) fn node_id(&self, word: &str) -> Option<NodeId> {
        self.node_index.get(word).copied()
    }

    pub(crate) fn word(&self, id: NodeId) -> &str {
        &self.nodes[id as usize]
    }

    pub(crate) fn label_name(&self, id: LabelId) -> &str {
        &self.labels[id as usize]
    }

    pub(crate) fn out_edges(&self, id: NodeId) -> &[(LabelId, NodeId)] {
        &self.out_edges[id as usize]
    }

    pub(crate) fn in_edges(&self, id: NodeId) -> &[(LabelId, NodeId)] {
        &self.in_edges[id as usize]
    }

    /// Words joined to `word` by a synonym edge in either direction.
    pub fn synonyms(&self, word: &str) -> HashSet<&str> {
        let (Some(id), Some(&syn)) = (
            self.node_id(word),
            self.label_index.get(Relation::Synonym.label()),
        ) else {
            return HashSet::new();
        };
        self.out_edges(id)
            .iter()
            .chain(self.in_edges(id))
            .filter(|(l, _)| *l == syn)
            .map(|&(_, n)| self.word(n))
            .collect()
    }
}

/// Scores each choice by the size of the overlap between its synonym set
/// and the stem's.
pub fn thesaurus_overlap(q: &QuestionInstance, graph: &LexicalGraph) -> ScoreVector {
    let stem = q.stem().as_word().map(|w| graph.synonyms(w)).unwrap_or_default();
    ScoreVector(
        q.choices()
            .iter()
            .map(|c| {
                let set = c.as_word().map(|w| graph.synonyms(w)).unwrap_or_default();
                stem.intersection(&set).count() as f64
            })
            .collect(),
    )
}

/// Abstains (uniform) unless the stem pair is linked by `rel`; otherwise
/// spreads mass evenly over the choice pairs that are also linked, or over
/// all choices if none is.
pub fn relation_filter(rel: Relation, q: &QuestionInstance, graph: &LexicalGraph) -> Distribution {
    let k = q.k();
    let linked = |t: &crate::problem::Term| {
        t.as_pair()
            .is_some_and(|(a, b)| graph.has_edge(a, rel.label(), b))
    };
    if !linked(q.stem()) {
        return Distribution::uniform(k);
    }
    let survivors: Vec<f64> = q
        .choices()
        .iter()
        .map(|c| if linked(c) { 1.0 } else { 0.0 })
        .collect();
    normalize_scores(&ScoreVector(survivors)).expect("indicator scores are nonnegative")
}
