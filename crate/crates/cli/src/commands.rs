use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use lexfuse::eval::{build_report, generate_synthetic, PenaltyPolicy, SyntheticSpec};
use lexfuse::formats::{
    parse_forecasts, parse_questions, write_forecasts, write_questions, QuestionFile, WeightFile,
};
use lexfuse::lexmodules::{
    analogy_suite, run_module, synonym_suite, CooccurrenceTable, DataBundle, DefinitionTable,
    EmbeddingTable, LexicalGraph, ModuleKind, PatternTable,
};
use lexfuse::merge::{floor_distribution, merge, DEFAULT_EPSILON};
use lexfuse::split::{explicit_split, random_split};
use lexfuse::train::{answer_key, hill_climb, HillClimbConfig, TrainingData};
use lexfuse::{argmax_choice, ForecastSet, QuestionKind, Rule};

use crate::{
    Command, EvalArgs, GenArgs, IngestArgs, ModulesCommand, ModulesRunArgs, SolveArgs, SplitArgs,
    TrainArgs,
};

pub fn dispatch(cli: crate::Cli) -> Result<()> {
    match cli.command {
        Command::Modules { command: ModulesCommand::Run(a) } => modules_run(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Solve(a) => solve(&a),
        Command::Gen(a) => gen(&a),
        Command::IngestCorpus(a) => ingest_corpus(&a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Writes to a temporary sibling, then renames over `path`.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| anyhow!("{} is not a file path", path.display()))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn load_questions(path: &Path) -> Result<QuestionFile> {
    parse_questions(&read(path)?).with_context(|| format!("{}", path.display()))
}

fn load_forecasts(paths: &[PathBuf]) -> Result<ForecastSet> {
    let mut fs = ForecastSet::new();
    for p in paths {
        let part = parse_forecasts(&read(p)?).with_context(|| format!("{}", p.display()))?;
        fs.extend(&part).with_context(|| format!("{}", p.display()))?;
    }
    Ok(fs)
}

fn read_ids(path: &Path) -> Result<Vec<String>> {
    Ok(read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

struct ResolvedSplit {
    train: Vec<String>,
    test: Vec<String>,
    description: String,
}

/// Without split flags every labelled question is both the training and
/// the test set.
fn resolve_split(args: &SplitArgs, labelled: &[String]) -> Result<ResolvedSplit> {
    if let Some(ratio) = args.split_ratio {
        let s = random_split(labelled, ratio, args.split_seed)?;
        let description = format!(
            "split: random seed={} ratio={} train={} test={}",
            args.split_seed,
            ratio,
            s.train.len(),
            s.test.len()
        );
        return Ok(ResolvedSplit { train: s.train, test: s.test, description });
    }
    if let (Some(tr), Some(te)) = (&args.train_ids, &args.test_ids) {
        let s = explicit_split(labelled, read_ids(tr)?, read_ids(te)?)?;
        let description = format!(
            "split: explicit train={} test={}",
            s.train.len(),
            s.test.len()
        );
        return Ok(ResolvedSplit { train: s.train, test: s.test, description });
    }
    Ok(ResolvedSplit {
        train: labelled.to_vec(),
        test: labelled.to_vec(),
        description: format!("split: none, all {} labelled questions", labelled.len()),
    })
}

fn labelled_ids(qf: &QuestionFile, path: &Path) -> Result<Vec<String>> {
    let ids: Vec<String> = qf
        .questions
        .iter()
        .filter(|q| q.answer().is_some())
        .map(|q| q.id().to_string())
        .collect();
    ensure!(!ids.is_empty(), "{}: no question has an answer", path.display());
    Ok(ids)
}

fn check_coverage(fs: &ForecastSet, ids: &[String], role: &str) -> Result<()> {
    if let Some(id) = ids.iter().find(|id| fs.instance_position(id).is_none()) {
        bail!("no forecasts for {role} question {id}");
    }
    Ok(())
}

fn modules_run(a: &ModulesRunArgs) -> Result<()> {
    let qf = load_questions(&a.questions)?;
    let mut bundle = DataBundle::default();
    if let Some(p) = &a.graph {
        bundle.graph = Some(LexicalGraph::parse(&read(p)?).with_context(|| format!("{}", p.display()))?);
    }
    if let (Some(pairs), Some(unigrams)) = (&a.cooc_pairs, &a.cooc_unigrams) {
        bundle.cooccurrence = Some(
            CooccurrenceTable::parse(&read(pairs)?, &read(unigrams)?)
                .with_context(|| format!("{} / {}", pairs.display(), unigrams.display()))?,
        );
    }
    if let Some(p) = &a.embeddings {
        bundle.embeddings = Some(EmbeddingTable::parse(&read(p)?).with_context(|| format!("{}", p.display()))?);
    }
    if let Some(hits) = &a.hits {
        let mut table = match &a.patterns {
            Some(p) => PatternTable::parse_templates(&read(p)?)
                .and_then(PatternTable::new)
                .with_context(|| format!("{}", p.display()))?,
            None => PatternTable::with_default_templates(),
        };
        table.load_hits(&read(hits)?).with_context(|| format!("{}", hits.display()))?;
        bundle.patterns = Some(table);
    }
    for (name, p) in &a.definitions {
        let table = DefinitionTable::parse(&read(p)?).with_context(|| format!("{}", p.display()))?;
        if bundle.definitions.insert(name.clone(), table).is_some() {
            bail!("dictionary name {name} given twice");
        }
    }

    let mut modules = Vec::new();
    for id in &a.modules {
        if id == "all" {
            modules.extend(match qf.kind {
                QuestionKind::Synonym => synonym_suite(),
                QuestionKind::Analogy => {
                    let names: Vec<&str> = a.definitions.iter().map(|(n, _)| n.as_str()).collect();
                    analogy_suite(&names)
                }
            });
        } else {
            modules.push(id.parse::<ModuleKind>()?);
        }
    }

    let mut fs = ForecastSet::new();
    for m in &modules {
        let part = run_module(m, &qf.questions, &bundle)?;
        fs.extend(&part).with_context(|| format!("module {m}"))?;
    }
    write_atomic(&a.out, &write_forecasts(&fs))
}

fn parse_rules(names: &[String]) -> Result<Vec<Rule>> {
    let mut rules = Vec::new();
    for n in names {
        let expanded = if n == "all" { Rule::ALL.to_vec() } else { vec![n.parse::<Rule>().map_err(|e| anyhow!(e))?] };
        for r in expanded {
            if !rules.contains(&r) {
                rules.push(r);
            }
        }
    }
    Ok(rules)
}

/// Weight file name for a module trained alone.
pub fn single_weights_name(module: &str) -> String {
    let safe: String = module
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("weights.single.{safe}.txt")
}

fn train(a: &TrainArgs) -> Result<()> {
    let qf = load_questions(&a.questions)?;
    let labelled = labelled_ids(&qf, &a.questions)?;
    let split = resolve_split(&a.split, &labelled)?;
    ensure!(!split.train.is_empty(), "the training split is empty");
    let fs = load_forecasts(&a.forecasts)?;
    check_coverage(&fs, &split.train, "training")?;

    let cfg = HillClimbConfig {
        restarts: a.restarts,
        initial_step: a.initial_step,
        min_step: a.min_step,
        max_evaluations: a.max_evaluations,
        seed: a.seed,
        include_deterministic_starts: !a.no_deterministic_starts,
    };
    cfg.validate()?;
    let rules = parse_rules(&a.rules)?;
    let individual: Rule = a.individual_rule.parse().map_err(|e: String| anyhow!(e))?;

    let answers = answer_key(&qf.questions);
    let ids: Vec<&str> = split.train.iter().map(String::as_str).collect();
    let modules: Vec<&str> = fs.module_ids().iter().map(String::as_str).collect();
    let train_fs = fs.subset(&ids, &modules);
    fs::create_dir_all(&a.out_dir).with_context(|| format!("cannot create {}", a.out_dir.display()))?;

    let data = TrainingData::new(&train_fs, &answers, DEFAULT_EPSILON)?;
    for rule in rules {
        let trained = hill_climb(rule, &data, &cfg)?;
        let file = WeightFile::from_trained(&trained, data.module_ids(), cfg.seed);
        write_atomic(&a.out_dir.join(format!("weights.{rule}.txt")), &file.render())?;
        println!("{rule}\ttrain_mean_likelihood={:.4}", trained.train_mean_likelihood);
    }

    let mut names = HashSet::new();
    for m in &modules {
        let name = single_weights_name(m);
        ensure!(names.insert(name.clone()), "modules map to the same file name {name}");
        let alone = TrainingData::new(&train_fs.subset(&ids, &[m]), &answers, DEFAULT_EPSILON)?;
        let trained = hill_climb(individual, &alone, &cfg)?;
        let file = WeightFile::from_trained(&trained, alone.module_ids(), cfg.seed);
        write_atomic(&a.out_dir.join(name), &file.render())?;
    }
    Ok(())
}

fn weight_files(a: &EvalArgs, fs: &ForecastSet) -> Result<Vec<WeightFile>> {
    let mut files = Vec::new();
    for p in &a.weights {
        files.push(WeightFile::parse(&read(p)?).with_context(|| format!("{}", p.display()))?);
    }
    if let Some(dir) = &a.weights_dir {
        let mut found = Vec::new();
        for entry in fs::read_dir(dir).with_context(|| format!("cannot read {}", dir.display()))? {
            let path = entry?.path();
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            if name.starts_with("weights.") && name.ends_with(".txt") {
                let wf = WeightFile::parse(&read(&path)?).with_context(|| format!("{}", path.display()))?;
                found.push((name, wf));
            }
        }
        ensure!(!found.is_empty(), "no weights.*.txt files in {}", dir.display());
        // individual modules first (in forecast order), then merged rules
        let key = |name: &str, wf: &WeightFile| {
            if name.starts_with("weights.single.") {
                let pos = fs.module_position(&wf.weights[0].0).unwrap_or(usize::MAX);
                (0, pos, name.to_string())
            } else {
                let pos = Rule::ALL.iter().position(|r| *r == wf.rule).unwrap_or(usize::MAX);
                (1, pos, name.to_string())
            }
        };
        found.sort_by_cached_key(|(name, wf)| key(name, wf));
        files.extend(found.into_iter().map(|(_, wf)| wf));
    }
    Ok(files)
}

fn solver_name(wf: &WeightFile) -> String {
    if wf.weights.len() == 1 {
        format!("{} only", wf.weights[0].0)
    } else {
        format!("all: {}", wf.rule)
    }
}

/// Merged distributions for `ids`, in order.
fn merged(wf: &WeightFile, fs: &ForecastSet, ids: &[&str]) -> Result<Vec<lexfuse::Distribution>> {
    let w = wf.weight_vector()?;
    let modules = wf.module_ids();
    if let Some(m) = modules.iter().find(|m| fs.module_position(m).is_none()) {
        bail!("the forecasts have no module {m}");
    }
    let sub = fs.subset(ids, &modules);
    (0..sub.n_instances())
        .map(|h| merge(&w, &sub, h).with_context(|| format!("instance {}", sub.instance_ids()[h])))
        .collect()
}

fn eval(a: &EvalArgs) -> Result<()> {
    let qf = load_questions(&a.questions)?;
    let labelled = labelled_ids(&qf, &a.questions)?;
    let split = resolve_split(&a.split, &labelled)?;
    ensure!(!split.test.is_empty(), "the test split is empty");
    let fs = load_forecasts(&a.forecasts)?;
    check_coverage(&fs, &split.test, "test")?;
    let policy = PenaltyPolicy::new(a.policy.reward, a.policy.penalty, a.policy.threshold)?;

    let key = answer_key(&qf.questions);
    let answers: Vec<usize> = split.test.iter().map(|id| key[id]).collect();
    let ids: Vec<&str> = split.test.iter().map(String::as_str).collect();

    let mut solvers = Vec::new();
    for wf in weight_files(a, &fs)? {
        let name = solver_name(&wf);
        let dists = merged(&wf, &fs, &ids)
            .with_context(|| format!("solver {name}"))?
            .iter()
            .map(|d| floor_distribution(d, wf.epsilon))
            .collect::<Result<Vec<_>, _>>()?;
        solvers.push((name, dists));
    }
    let mut report = build_report(&solvers, &answers, &policy)?;
    report.header = vec![
        split.description,
        format!(
            "policy: threshold={} reward={} penalty={}",
            policy.guess_threshold, policy.reward, policy.penalty
        ),
    ];
    emit(a.out.as_deref(), &report.to_tsv())
}

fn solve(a: &SolveArgs) -> Result<()> {
    ensure!(
        (0.0..1.0).contains(&a.threshold),
        "threshold {} must lie in [0, 1)",
        a.threshold
    );
    let wf = WeightFile::parse(&read(&a.weights)?).with_context(|| format!("{}", a.weights.display()))?;
    let fs = load_forecasts(&a.forecasts)?;
    let ids: Vec<String> = match &a.questions {
        Some(p) => load_questions(p)?.questions.iter().map(|q| q.id().to_string()).collect(),
        None => fs.instance_ids().to_vec(),
    };
    if let Some(id) = ids.iter().find(|id| fs.instance_position(id).is_none()) {
        bail!("unknown instance {id}: it has no forecasts");
    }
    let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let mut out = String::new();
    for (id, d) in ids.iter().zip(merged(&wf, &fs, &refs)?) {
        let p = d.max_prob();
        if a.skip && p <= a.threshold {
            let _ = writeln!(out, "{id}\tSKIP\t{p:.4}");
        } else {
            let _ = writeln!(out, "{id}\t{}\t{p:.4}", argmax_choice(&d));
        }
    }
    emit(a.out.as_deref(), &out)
}

fn gen(a: &GenArgs) -> Result<()> {
    let spec = SyntheticSpec {
        accuracies: a.accuracies.clone(),
        m: a.m,
        k: a.k,
        beta: a.beta,
        seed: a.seed,
    };
    let data = generate_synthetic(&spec)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    let mut answer_lines = String::new();
    for q in &data.questions {
        let _ = writeln!(answer_lines, "{}\t{}", q.id(), q.answer().unwrap_or(0));
    }
    let qf = QuestionFile { kind: QuestionKind::Synonym, k: a.k, questions: data.questions };
    write_atomic(&a.out_dir.join("questions.tsv"), &write_questions(&qf))?;
    write_atomic(&a.out_dir.join("forecasts.tsv"), &write_forecasts(&data.forecasts))?;
    write_atomic(&a.out_dir.join("answers.tsv"), &answer_lines)
}

fn ingest_corpus(a: &IngestArgs) -> Result<()> {
    ensure!(a.window > 0, "window must be positive");
    let mut table = CooccurrenceTable::new(a.window);
    for p in &a.inputs {
        table.ingest(&read(p)?);
    }
    write_atomic(&a.out_pairs, &table.render_pairs())?;
    write_atomic(&a.out_unigrams, &table.render_unigrams())
}
