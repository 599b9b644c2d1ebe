use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{
    cooccurrence_score, definition_similarity, embedding_similarity, phrase_vector_score,
    relation_filter, thesaurus_overlap, thesaurus_path_score, CooccurrenceTable, DefinitionTable,
    EmbeddingTable, LexError, LexicalGraph, PatternTable, Relation,
};
use crate::problem::{normalize_scores, ForecastSet, QuestionInstance, QuestionKind};

/// A runnable module, identified in files and on the command line by
/// `thesaurus`, `cooccurrence`, `embedding`, `phrase-vectors`,
/// `thesaurus-paths`, `relation:<label>` or `similarity:<dictionary>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModuleKind {
    Thesaurus,
    Cooccurrence,
    Embedding,
    PhraseVectors,
    ThesaurusPaths,
    Relation(Relation),
    Similarity(String),
}

impl ModuleKind {
    pub fn id(&self) -> String {
        self.to_string()
    }

    pub fn question_kind(&self) -> QuestionKind {
        match self {
            ModuleKind::Thesaurus | ModuleKind::Cooccurrence | ModuleKind::Embedding => {
                QuestionKind::Synonym
            }
            _ => QuestionKind::Analogy,
        }
    }
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModuleKind::Thesaurus => f.write_str("thesaurus"),
            ModuleKind::Cooccurrence => f.write_str("cooccurrence"),
            ModuleKind::Embedding => f.write_str("embedding"),
            ModuleKind::PhraseVectors => f.write_str("phrase-vectors"),
            ModuleKind::ThesaurusPaths => f.write_str("thesaurus-paths"),
            ModuleKind::Relation(r) => write!(f, "relation:{r}"),
            ModuleKind::Similarity(name) => write!(f, "similarity:{name}"),
        }
    }
}

impl FromStr for ModuleKind {
    type Err = LexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "thesaurus" => ModuleKind::Thesaurus,
            "cooccurrence" => ModuleKind::Cooccurrence,
            "embedding" => ModuleKind::Embedding,
            "phrase-vectors" => ModuleKind::PhraseVectors,
            "thesaurus-paths" => ModuleKind::ThesaurusPaths,
            _ => match s.split_once(':') {
                Some(("relation", r)) => ModuleKind::Relation(r.parse()?),
                Some(("similarity", name)) if !name.is_empty() => {
                    ModuleKind::Similarity(name.to_string())
                }
                _ => return Err(LexError::UnknownModule(s.to_string())),
            },
        })
    }
}

/// The synonym modules.
pub fn synonym_suite() -> Vec<ModuleKind> {
    vec![ModuleKind::Thesaurus, ModuleKind::Cooccurrence, ModuleKind::Embedding]
}

/// The analogy modules: phrase vectors, thesaurus paths, the nine relation
/// filters and one similarity module per named dictionary.
pub fn analogy_suite<S: AsRef<str>>(dictionaries: &[S]) -> Vec<ModuleKind> {
    let mut out = vec![ModuleKind::PhraseVectors, ModuleKind::ThesaurusPaths];
    out.extend(Relation::ALL.into_iter().map(ModuleKind::Relation));
    out.extend(
        dictionaries
            .iter()
            .map(|d| ModuleKind::Similarity(d.as_ref().to_string())),
    );
    out
}

/// Loaded data tables; modules whose table is absent cannot run.
#[derive(Debug, Clone, Default)]
pub struct DataBundle {
    pub graph: Option<LexicalGraph>,
    pub cooccurrence: Option<CooccurrenceTable>,
    pub embeddings: Option<EmbeddingTable>,
    pub patterns: Option<PatternTable>,
    pub definitions: BTreeMap<String, DefinitionTable>,
}

fn need<'a, T>(table: Option<&'a T>, module: &ModuleKind, what: &str) -> Result<&'a T, LexError> {
    table.ok_or_else(|| LexError::DataFileMissing {
        module: module.id(),
        what: what.to_string(),
    })
}

/// Runs one module over every question and returns its forecasts.
pub fn run_module(
    module: &ModuleKind,
    questions: &[QuestionInstance],
    data: &DataBundle,
) -> Result<ForecastSet, LexError> {
    let id = module.id();
    let expected = module.question_kind();
    if let Some(q) = questions.iter().find(|q| q.kind() != expected) {
        return Err(LexError::KindMismatch {
            module: id,
            id: q.id().to_string(),
            expected,
            found: q.kind(),
        });
    }

    type Scorer<'a> = Box<dyn Fn(&QuestionInstance) -> crate::problem::ScoreVector + 'a>;
    let scorer: Scorer<'_> = match module {
        ModuleKind::Thesaurus => {
            let g = need(data.graph.as_ref(), module, "a graph file")?;
            Box::new(move |q| thesaurus_overlap(q, g))
        }
        ModuleKind::Cooccurrence => {
            let t = need(data.cooccurrence.as_ref(), module, "co-occurrence files")?;
            Box::new(move |q| cooccurrence_score(q, t))
        }
        ModuleKind::Embedding => {
            let e = need(data.embeddings.as_ref(), module, "an embedding file")?;
            Box::new(move |q| embedding_similarity(q, e))
        }
        ModuleKind::PhraseVectors => {
            let p = need(data.patterns.as_ref(), module, "pattern and hits files")?;
            Box::new(move |q| phrase_vector_score(q, p))
        }
        ModuleKind::ThesaurusPaths => {
            let g = need(data.graph.as_ref(), module, "a graph file")?;
            Box::new(move |q| thesaurus_path_score(q, g))
        }
        ModuleKind::Similarity(name) => {
            let d = need(
                data.definitions.get(name),
                module,
                &format!("a definition file named {name}"),
            )?;
            Box::new(move |q| definition_similarity(q, d))
        }
        ModuleKind::Relation(rel) => {
            let g = need(data.graph.as_ref(), module, "a graph file")?;
            let mut fs = ForecastSet::new();
            for q in questions {
                fs.insert(q.id(), &id, relation_filter(*rel, q, g))?;
            }
            return Ok(fs);
        }
    };

    let mut fs = ForecastSet::new();
    for q in questions {
        fs.insert(q.id(), &id, normalize_scores(&scorer(q))?)?;
    }
    Ok(fs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Term;

    fn analogy(id: &str, stem: (&str, &str), choices: &[(&str, &str)]) -> QuestionInstance {
        QuestionInstance::new(
            id,
            QuestionKind::Analogy,
            Term::pair(stem.0, stem.1).unwrap(),
            choices.iter().map(|(a, b)| Term::pair(a, b).unwrap()).collect(),
            Some(1),
        )
        .unwrap()
    }

    #[test]
    fn module_ids_round_trip() {
        let mut all = synonym_suite();
        all.extend(analogy_suite(&["dict", "wordsmyth"]));
        assert_eq!(all.len(), 16);
        for m in &all {
            assert_eq!(&m.id().parse::<ModuleKind>().unwrap(), m);
        }
        assert!("relation:cousin".parse::<ModuleKind>().is_err());
        assert!("similarity:".parse::<ModuleKind>().is_err());
        assert!("lsa".parse::<ModuleKind>().is_err());
    }

    #[test]
    fn missing_data_and_kind_errors() {
        let qs = vec![analogy("q1", ("a", "b"), &[("c", "d"), ("e", "f")])];
        let empty = DataBundle::default();
        assert!(matches!(
            run_module(&ModuleKind::ThesaurusPaths, &qs, &empty),
            Err(LexError::DataFileMissing { .. })
        ));
        let data = DataBundle { graph: Some(LexicalGraph::new()), ..Default::default() };
        assert!(matches!(
            run_module(&ModuleKind::Thesaurus, &qs, &data),
            Err(LexError::KindMismatch { .. })
        ));
    }

    #[test]
    fn empty_questions_give_empty_fragment() {
        let data = DataBundle { graph: Some(LexicalGraph::new()), ..Default::default() };
        let fs = run_module(&ModuleKind::ThesaurusPaths, &[], &data).unwrap();
        assert_eq!(fs.n_instances(), 0);
    }

    #[test]
    fn relation_filter_output_is_unnormalized_distribution() {
        let mut g = LexicalGraph::new();
        g.add_edge("cat", "hypernym", "animal");
        g.add_edge("oak", "hypernym", "tree");
        let data = DataBundle { graph: Some(g), ..Default::default() };
        let qs = vec![analogy("q1", ("cat", "animal"), &[("x", "y"), ("oak", "tree")])];
        let fs = run_module(&ModuleKind::Relation(Relation::Hypernym), &qs, &data).unwrap();
        assert_eq!(fs.get(0, 0).unwrap().probs(), &[0.0, 1.0]);
    }
}
