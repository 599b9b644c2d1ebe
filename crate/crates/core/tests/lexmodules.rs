use std::collections::{BTreeMap, BTreeSet, HashSet};

use approx::assert_abs_diff_eq;
use lexfuse::formats::parse_questions;
use lexfuse::lexmodules::{
    analogy_suite, cooccurrence_score, definition_similarity, embedding_similarity,
    enumerate_paths, pair_signature, phrase_vector_score, relation_filter, run_module,
    synonym_suite, thesaurus_overlap, thesaurus_path_score, CooccurrenceTable, DataBundle,
    DefinitionTable, Direction, EmbeddingTable, LexicalGraph, PathFeatureSet, PathStep,
    PatternTable, Relation,
};
use lexfuse::{validate_forecast_set, QuestionInstance, QuestionKind, Term};
use proptest::prelude::*;

fn data(name: &str) -> String {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn questions(name: &str) -> Vec<QuestionInstance> {
    parse_questions(&data(name)).unwrap().questions
}

type Edge = (String, String, String);

fn raw_edges(text: &str) -> Vec<Edge> {
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].to_string(), f[1].to_string(), f[2].to_string())
        })
        .collect()
}

fn graph_from(edges: &[Edge]) -> LexicalGraph {
    let mut g = LexicalGraph::new();
    for (h, l, t) in edges {
        g.add_edge(h, l, t);
    }
    g
}

/// Every walk of 1..=3 edges from `x` to `y`, kept only at the minimal
/// length found.
fn dfs_label_paths(edges: &[Edge], x: &str, y: &str) -> Vec<Vec<String>> {
    fn walk(edges: &[Edge], at: &str, y: &str, depth: usize, labels: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
        if depth > 0 && at == y {
            out.push(labels.clone());
            return;
        }
        if depth == 3 {
            return;
        }
        for (h, l, t) in edges {
            if h == at {
                labels.push(l.clone());
                walk(edges, t, y, depth + 1, labels, out);
                labels.pop();
            }
        }
    }
    let mut all = Vec::new();
    walk(edges, x, y, 0, &mut Vec::new(), &mut all);
    let Some(min) = all.iter().map(Vec::len).min() else {
        return all;
    };
    all.retain(|p| p.len() == min);
    all
}

fn path_oracle(edges: &[Edge], x: &str, y: &str) -> BTreeSet<PathFeatureSet> {
    let mut out = BTreeSet::new();
    if x == y {
        return out;
    }
    for (from, to, dir) in [(x, y, Direction::Forward), (y, x, Direction::Backward)] {
        for labels in dfs_label_paths(edges, from, to) {
            out.insert(PathFeatureSet::new(
                labels.iter().map(|l| PathStep::new(dir, l)).collect(),
            ));
        }
    }
    out
}

fn multiset_overlap(a: &PathFeatureSet, b: &PathFeatureSet) -> usize {
    let mut rest: Vec<&PathStep> = b.steps().iter().collect();
    let mut n = 0;
    for s in a.steps() {
        if let Some(i) = rest.iter().position(|r| *r == s) {
            rest.swap_remove(i);
            n += 1;
        }
    }
    n
}

#[test]
fn g1_overlap_matches_brute_force_intersection() {
    let edges = raw_edges(&data("g1_graph.tsv"));
    let g = graph_from(&edges);
    let syn = |w: &str| -> HashSet<String> {
        let mut s = HashSet::new();
        for (h, l, t) in &edges {
            if l == "synonym" && h == w {
                s.insert(t.clone());
            }
            if l == "synonym" && t == w {
                s.insert(h.clone());
            }
        }
        s
    };
    for q in questions("synonym_questions.tsv") {
        let stem = syn(q.stem().as_word().unwrap());
        let expected: Vec<f64> = q
            .choices()
            .iter()
            .map(|c| stem.intersection(&syn(c.as_word().unwrap())).count() as f64)
            .collect();
        assert_eq!(thesaurus_overlap(&q, &g).0, expected, "{}", q.id());
    }
}

#[test]
fn t1_cooccurrence_matches_naive_recount() {
    let corpus = data("t1_corpus.txt");
    let mut table = CooccurrenceTable::new(10);
    table.ingest(&corpus);

    let tokens: Vec<String> = corpus
        .to_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect();
    assert_eq!(tokens.len(), 500);
    let count = |w: &str| tokens.iter().filter(|t| *t == w).count() as f64;
    let near = |a: &str, b: &str| {
        let mut n = 0;
        for i in 0..tokens.len() {
            for j in i + 1..tokens.len().min(i + 11) {
                if (tokens[i] == a && tokens[j] == b) || (tokens[i] == b && tokens[j] == a) {
                    n += 1;
                }
            }
        }
        n as f64
    };
    for q in questions("synonym_questions.tsv") {
        let stem = q.stem().as_word().unwrap();
        let expected: Vec<f64> = q
            .choices()
            .iter()
            .map(|c| {
                let c = c.as_word().unwrap();
                near(stem, c) / (count(c) + 1.0)
            })
            .collect();
        assert_eq!(cooccurrence_score(&q, &table).0, expected, "{}", q.id());
    }
    let back = CooccurrenceTable::parse(&table.render_pairs(), &table.render_unigrams()).unwrap();
    assert_eq!(back, table);
}

#[test]
fn three_dimensional_embedding_cosines() {
    let emb = EmbeddingTable::parse(&data("embeddings.tsv")).unwrap();
    let q = &questions("synonym_questions.tsv")[0];
    // big=(1,2,2): large=(2,1,2) -> 8/9, small -> negative, tiny -> negative,
    // grand=(0,1,0) -> 2/3
    let s = embedding_similarity(q, &emb);
    assert_abs_diff_eq!(s.0[0], 8.0 / 9.0, epsilon = 1e-15);
    assert_eq!(s.0[1], 0.0);
    assert_eq!(s.0[2], 0.0);
    assert_abs_diff_eq!(s.0[3], 2.0 / 3.0, epsilon = 1e-15);
}

fn h1() -> (PatternTable, BTreeMap<(String, String), Vec<f64>>) {
    let text = data("h1_hits.tsv");
    let mut pt = PatternTable::with_default_templates();
    pt.load_hits(&text).unwrap();
    let mut raw: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for line in text.lines().filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        let p: usize = f[0].parse().unwrap();
        let c: f64 = f[3].parse().unwrap();
        raw.entry((f[1].into(), f[2].into())).or_insert_with(|| vec![0.0; 128])[p - 1] = (1.0 + c).ln();
    }
    (pt, raw)
}

#[test]
fn h1_signatures_match_direct_formula() {
    let (pt, raw) = h1();
    for ((x, y), v) in &raw {
        for (got, want) in pair_signature(x, y, &pt).iter().zip(v) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-15);
        }
    }
    assert!(pair_signature("nothing", "here", &pt).iter().all(|&c| c == 0.0));
}

#[test]
fn h1_phrase_vectors_match_brute_force_cosine() {
    let (pt, raw) = h1();
    let zero = vec![0.0; 128];
    let sig = |a: &str, b: &str| raw.get(&(a.to_string(), b.to_string())).unwrap_or(&zero).clone();
    let cos = |u: &[f64], v: &[f64]| {
        let dot: f64 = (0..128).map(|i| u[i] * v[i]).sum();
        let nu: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nu == 0.0 || nv == 0.0 {
            0.0
        } else {
            (dot / (nu * nv)).max(0.0)
        }
    };
    for q in questions("analogy_questions.tsv") {
        let (a, b) = q.stem().as_pair().unwrap();
        let r1 = sig(a, b);
        let expected: Vec<f64> = q
            .choices()
            .iter()
            .map(|c| {
                let (x, y) = c.as_pair().unwrap();
                cos(&r1, &sig(x, y))
            })
            .collect();
        let got = phrase_vector_score(&q, &pt);
        for (g, e) in got.0.iter().zip(&expected) {
            assert_abs_diff_eq!(g, e, epsilon = 1e-12);
        }
    }
}

#[test]
fn g2_paths_match_exhaustive_dfs() {
    let edges = raw_edges(&data("g2_graph.tsv"));
    let g = graph_from(&edges);
    assert_eq!(g.node_count(), 10);
    let nodes: BTreeSet<&str> = edges.iter().flat_map(|(h, _, t)| [h.as_str(), t.as_str()]).collect();
    for x in &nodes {
        for y in &nodes {
            assert_eq!(enumerate_paths(x, y, &g), path_oracle(&edges, x, y), "{x} -> {y}");
        }
    }
}

#[test]
fn g2_path_scores_match_oracle() {
    let edges = raw_edges(&data("g2_graph.tsv"));
    let g = graph_from(&edges);
    for q in questions("analogy_questions.tsv") {
        let (a, b) = q.stem().as_pair().unwrap();
        let stem = path_oracle(&edges, a, b);
        let expected: Vec<f64> = q
            .choices()
            .iter()
            .map(|c| {
                let (x, y) = c.as_pair().unwrap();
                let choice = path_oracle(&edges, x, y);
                stem.iter()
                    .flat_map(|s| choice.iter().map(move |p| multiset_overlap(s, p)))
                    .max()
                    .unwrap_or(0) as f64
            })
            .collect();
        assert_eq!(thesaurus_path_score(&q, &g).0, expected, "{}", q.id());
    }
}

#[test]
fn three_entry_dictionary_by_hand() {
    let defs = DefinitionTable::parse("hot\twarm sun warm\ncold\twarm ice\nsun\tstar\n").unwrap();
    let q = QuestionInstance::new(
        "d1",
        QuestionKind::Analogy,
        Term::pair("hot", "sun").unwrap(),
        vec![Term::pair("cold", "sun").unwrap(), Term::pair("sun", "cold").unwrap()],
        None,
    )
    .unwrap();
    // hot = {warm:2, sun:1}, cold = {warm:1, ice:1}, sun = {star:1}
    let hot_cold = 2.0 / (5f64.sqrt() * 2f64.sqrt());
    let s = definition_similarity(&q, &defs);
    assert_abs_diff_eq!(s.0[0], hot_cold + 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(s.0[1], 0.0, epsilon = 1e-12);
}

fn analogy_bundle() -> DataBundle {
    let mut patterns = PatternTable::with_default_templates();
    patterns.load_hits(&data("h1_hits.tsv")).unwrap();
    DataBundle {
        graph: Some(LexicalGraph::parse(&data("g2_graph.tsv")).unwrap()),
        patterns: Some(patterns),
        definitions: BTreeMap::from([
            ("dict".to_string(), DefinitionTable::parse(&data("dict.tsv")).unwrap()),
            ("wordsmyth".to_string(), DefinitionTable::parse(&data("wordsmyth.tsv")).unwrap()),
        ]),
        ..Default::default()
    }
}

#[test]
fn full_analogy_bundle_validates_clean() {
    let qs = questions("analogy_questions.tsv");
    let bundle = analogy_bundle();
    let modules = analogy_suite(&["dict", "wordsmyth"]);
    assert_eq!(modules.len(), 13);
    let mut fs = lexfuse::ForecastSet::new();
    for m in &modules {
        fs.extend(&run_module(m, &qs, &bundle).unwrap()).unwrap();
    }
    assert_eq!((fs.n_instances(), fs.n_modules()), (5, 13));
    let report = validate_forecast_set(&fs, &qs);
    assert!(report.is_valid(), "{report}");
}

#[test]
fn synonym_suite_validates_clean() {
    let qs = questions("synonym_questions.tsv");
    let mut cooc = CooccurrenceTable::new(10);
    cooc.ingest(&data("t1_corpus.txt"));
    let bundle = DataBundle {
        graph: Some(LexicalGraph::parse(&data("g1_graph.tsv")).unwrap()),
        cooccurrence: Some(cooc),
        embeddings: Some(EmbeddingTable::parse(&data("embeddings.tsv")).unwrap()),
        ..Default::default()
    };
    let mut fs = lexfuse::ForecastSet::new();
    for m in synonym_suite() {
        fs.extend(&run_module(&m, &qs, &bundle).unwrap()).unwrap();
    }
    assert!(validate_forecast_set(&fs, &qs).is_valid());
    // s4's stem is unknown everywhere
    let h = fs.instance_position("s4").unwrap();
    for i in 0..fs.n_modules() {
        assert_eq!(fs.get(h, i).unwrap().probs(), &[0.25; 4]);
    }
}

#[test]
fn unknown_vocabulary_abstains_in_every_analogy_module() {
    let q = QuestionInstance::new(
        "u1",
        QuestionKind::Analogy,
        Term::pair("qwe", "rty").unwrap(),
        vec![
            Term::pair("asd", "fgh").unwrap(),
            Term::pair("zxc", "vbn").unwrap(),
            Term::pair("uio", "jkl").unwrap(),
        ],
        None,
    )
    .unwrap();
    let bundle = analogy_bundle();
    for m in analogy_suite(&["dict", "wordsmyth"]) {
        let fs = run_module(&m, std::slice::from_ref(&q), &bundle).unwrap();
        let p = fs.get(0, 0).unwrap().probs();
        for &x in p {
            assert_abs_diff_eq!(x, 1.0 / 3.0, epsilon = 1e-15);
        }
    }
}

fn relabel(w: &str) -> String {
    format!("n{}", w.chars().rev().collect::<String>())
}

fn relabel_term(t: &Term) -> Term {
    match t.as_pair() {
        Some((a, b)) => Term::pair(&relabel(a), &relabel(b)).unwrap(),
        None => Term::word(&relabel(t.as_word().unwrap())).unwrap(),
    }
}

fn relabel_question(q: &QuestionInstance) -> QuestionInstance {
    QuestionInstance::new(
        q.id(),
        q.kind(),
        relabel_term(q.stem()),
        q.choices().iter().map(relabel_term).collect(),
        q.answer(),
    )
    .unwrap()
}

fn relabel_graph(edges: &[Edge]) -> LexicalGraph {
    let mut g = LexicalGraph::new();
    // also reverse insertion order so interned ids differ
    for (h, l, t) in edges.iter().rev() {
        g.add_edge(&relabel(h), l, &relabel(t));
    }
    g
}

#[test]
fn graph_modules_are_equivariant_under_relabeling() {
    let e1 = raw_edges(&data("g1_graph.tsv"));
    let (g1, g1r) = (graph_from(&e1), relabel_graph(&e1));
    for q in questions("synonym_questions.tsv") {
        assert_eq!(thesaurus_overlap(&q, &g1), thesaurus_overlap(&relabel_question(&q), &g1r));
    }
    let e2 = raw_edges(&data("g2_graph.tsv"));
    let (g2, g2r) = (graph_from(&e2), relabel_graph(&e2));
    for q in questions("analogy_questions.tsv") {
        let r = relabel_question(&q);
        assert_eq!(thesaurus_path_score(&q, &g2), thesaurus_path_score(&r, &g2r));
        for rel in Relation::ALL {
            assert_eq!(relation_filter(rel, &q, &g2), relation_filter(rel, &r, &g2r));
        }
    }
}

fn random_graph() -> impl Strategy<Value = Vec<Edge>> {
    let labels = ["hypernym", "meronym-part", "antonym"];
    prop::collection::vec((0usize..12, 0usize..3, 0usize..12), 0..=30).prop_map(move |v| {
        let mut seen = HashSet::new();
        v.into_iter()
            .map(|(h, l, t)| (format!("w{h}"), labels[l].to_string(), format!("w{t}")))
            .filter(|e| seen.insert(e.clone()))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn paths_match_dfs_on_random_graphs(edges in random_graph(), x in 0usize..12, y in 0usize..12) {
        let g = graph_from(&edges);
        let (x, y) = (format!("w{x}"), format!("w{y}"));
        let got = enumerate_paths(&x, &y, &g);
        prop_assert_eq!(&got, &path_oracle(&edges, &x, &y));
        for p in &got {
            prop_assert!((1..=3).contains(&p.len()));
        }
    }
}
