use std::collections::{BTreeSet, HashMap};

use super::graph::{LabelId, LexicalGraph, NodeId};
use crate::problem::{QuestionInstance, ScoreVector};

/// Longest path considered when relating two words.
pub const MAX_PATH_LINKS: usize = 3;

/// Whether a step lies on a path from the first word of a pair to the
/// second (forward) or from the second to the first (backward).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathStep {
    pub direction: Direction,
    pub label: String,
}

impl PathStep {
    pub fn new(direction: Direction, label: &str) -> Self {
        Self { direction, label: label.to_string() }
    }
}

/// Multiset of the steps along one path, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathFeatureSet(Vec<PathStep>);

impl PathFeatureSet {
    pub fn new(mut steps: Vec<PathStep>) -> Self {
        steps.sort();
        Self(steps)
    }

    pub fn steps(&self) -> &[PathStep] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Size of the multiset intersection of two feature sets.
pub fn shared_features(a: &PathFeatureSet, b: &PathFeatureSet) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.0.len() && j < b.0.len() {
        match a.0[i].cmp(&b.0[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Label sequences of every shortest directed path `from -> to` with at
/// most [`MAX_PATH_LINKS`] edges.
fn shortest_label_paths(g: &LexicalGraph, from: NodeId, to: NodeId) -> Vec<Vec<LabelId>> {
    let mut dist: HashMap<NodeId, usize> = HashMap::from([(from, 0)]);
    let mut frontier = vec![from];
    let mut depth = 0;
    while depth < MAX_PATH_LINKS && !dist.contains_key(&to) && !frontier.is_empty() {
        depth += 1;
        let mut next = Vec::new();
        for &u in &frontier {
            for &(_, v) in g.out_edges(u) {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(v) {
                    e.insert(depth);
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    let Some(&length) = dist.get(&to) else {
        return Vec::new();
    };

    fn back(
        g: &LexicalGraph,
        dist: &HashMap<NodeId, usize>,
        node: NodeId,
        suffix: &mut Vec<LabelId>,
        out: &mut Vec<Vec<LabelId>>,
    ) {
        let d = dist[&node];
        if d == 0 {
            out.push(suffix.iter().rev().copied().collect());
            return;
        }
        for &(label, pred) in g.in_edges(node) {
            if dist.get(&pred) == Some(&(d - 1)) {
                suffix.push(label);
                back(g, dist, pred, suffix, out);
                suffix.pop();
            }
        }
    }

    let mut out = Vec::new();
    debug_assert!(length <= MAX_PATH_LINKS);
    back(g, &dist, to, &mut Vec::new(), &mut out);
    out
}

/// Feature sets of all shortest paths `x -> y` (forward steps) and
/// `y -> x` (backward steps) within [`MAX_PATH_LINKS`] links. Identical
/// words have no paths.
pub fn enumerate_paths(x: &str, y: &str, g: &LexicalGraph) -> BTreeSet<PathFeatureSet> {
    let mut out = BTreeSet::new();
    if x == y {
        return out;
    }
    let (Some(xi), Some(yi)) = (g.node_id(x), g.node_id(y)) else {
        return out;
    };
    for (from, to, direction) in [(xi, yi, Direction::Forward), (yi, xi, Direction::Backward)] {
        for labels in shortest_label_paths(g, from, to) {
            out.insert(PathFeatureSet::new(
                labels
                    .into_iter()
                    .map(|l| PathStep::new(direction, g.label_name(l)))
                    .collect(),
            ));
        }
    }
    out
}

/// Scores each choice pair by the best feature overlap between any of its
/// paths and any of the stem pair's paths.
pub fn thesaurus_path_score(q: &QuestionInstance, g: &LexicalGraph) -> ScoreVector {
    let paths = |t: &crate::problem::Term| {
        t.as_pair()
            .map(|(a, b)| enumerate_paths(a, b, g))
            .unwrap_or_default()
    };
    let stem = paths(q.stem());
    ScoreVector(
        q.choices()
            .iter()
            .map(|c| {
                let choice = paths(c);
                stem.iter()
                    .flat_map(|s| choice.iter().map(move |p| shared_features(s, p)))
                    .max()
                    .unwrap_or(0) as f64
            })
            .collect(),
    )
}
