//! Command-line front end: `preprocess`, `train`, `eval`, `explain`,
//! `delete-eval` and `docvec`.
//!
//! Settings come from an optional JSON config file; flags override it.
//! A single `seed` drives every stochastic component: training shuffles and
//! dropout use `seed`, weight initialization `seed + 100`, and the random
//! deletion baseline runs `seed + 0 ..= seed + 9`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{load_corpus, Dataset, PreprocessOptions, Split, DEFAULT_MAX_TOKENS};
use crate::embeddings::{EmbeddedDoc, EmbeddingTable, DEFAULT_DIM};
use crate::error::{Error, Result};
use crate::experiments::{
    deletion_experiment, doc_vector, pca_2d, select_population, silhouette, DeletionCurve, Order, Population, Ranking,
    Scheme, DEFAULT_HORIZON, DEFAULT_MIN_LEN, RANDOM_RUNS,
};
use crate::net::{train, Dims, EpochStats, Hyperparams, Model, DEFAULT_FILTERS};
use crate::persist::SavedModel;
use crate::relevance::{conservation_tolerance, explain, Method, DEFAULT_EPSILON};
use crate::report::{render_curves, render_heatmap, render_scatter, Heatmap, ScatterPanel};

pub const INIT_SEED_OFFSET: u64 = 100;

#[derive(Debug, Parser)]
#[command(name = "lrptext", version, about = "Train a word-embedding CNN text classifier and explain its predictions")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump a preprocessed split as JSON lines.
    Preprocess {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
    },
    /// Train a model and report train/test accuracy.
    Train(CommonArgs),
    /// Report test accuracy of a trained model.
    Eval(CommonArgs),
    /// Write a relevance heatmap (HTML) and JSON record for one document.
    Explain {
        #[command(flatten)]
        common: CommonArgs,
        /// Document id, e.g. `sci.space/61393`.
        #[arg(long = "doc")]
        doc_id: String,
        /// Target class name or index; defaults to the predicted class.
        #[arg(long = "target")]
        target: Option<String>,
        #[arg(long, default_value = "lrp")]
        method: Method,
    },
    /// Word-deletion curves for LRP, SA and random deletion.
    DeleteEval(CommonArgs),
    /// Relevance-weighted document vectors projected by PCA.
    Docvec(CommonArgs),
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

/// Flags shared by every subcommand. Each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train_dir: Option<PathBuf>,
    #[arg(long)]
    pub test_dir: Option<PathBuf>,
    /// word2vec text-format embedding file.
    #[arg(long, conflicts_with = "random_embeddings")]
    pub embeddings: Option<PathBuf>,
    /// Use seeded random embeddings instead of a file.
    #[arg(long, value_name = "SEED")]
    pub random_embeddings: Option<u64>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub filters: Option<usize>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long)]
    pub lowercase: bool,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Deletion horizon K.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Minimum document length for the deletion experiment.
    #[arg(long)]
    pub min_len: Option<usize>,
    /// JSON object mapping category names to group labels.
    #[arg(long)]
    pub label_groups: Option<PathBuf>,
}

/// Everything a run needs, validated before any work starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub train_dir: Option<PathBuf>,
    pub test_dir: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub random_embeddings: Option<u64>,
    pub embedding_dim: usize,
    pub filters: usize,
    pub max_tokens: usize,
    pub lowercase: bool,
    pub model: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub l2: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub epsilon: f64,
    pub horizon: usize,
    pub min_len: usize,
    pub label_groups: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let hp = Hyperparams::default();
        RunConfig {
            train_dir: None,
            test_dir: None,
            embeddings: None,
            random_embeddings: None,
            embedding_dim: DEFAULT_DIM,
            filters: DEFAULT_FILTERS,
            max_tokens: DEFAULT_MAX_TOKENS,
            lowercase: false,
            model: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
            learning_rate: hp.learning_rate,
            momentum: hp.momentum,
            l2: hp.l2,
            dropout: hp.dropout,
            batch_size: hp.batch_size,
            epochs: hp.epochs,
            epsilon: DEFAULT_EPSILON,
            horizon: DEFAULT_HORIZON,
            min_len: DEFAULT_MIN_LEN,
            label_groups: None,
        }
    }
}

macro_rules! override_fields {
    ($cfg:ident, $args:ident; $($field:ident),*) => {
        $(if let Some(v) = $args.$field.clone() { $cfg.$field = v; })*
    };
}

impl RunConfig {
    pub fn from_args(args: &CommonArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        override_fields!(cfg, args; embedding_dim, filters, max_tokens, output_dir, seed, learning_rate,
            momentum, l2, dropout, batch_size, epochs, epsilon, horizon, min_len);
        for (slot, flag) in [
            (&mut cfg.train_dir, &args.train_dir),
            (&mut cfg.test_dir, &args.test_dir),
            (&mut cfg.model, &args.model),
            (&mut cfg.label_groups, &args.label_groups),
        ] {
            if flag.is_some() {
                *slot = flag.clone();
            }
        }
        if args.embeddings.is_some() {
            cfg.embeddings = args.embeddings.clone();
            cfg.random_embeddings = None;
        }
        if args.random_embeddings.is_some() {
            cfg.random_embeddings = args.random_embeddings;
            cfg.embeddings = None;
        }
        cfg.lowercase |= args.lowercase;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embeddings.is_some() && self.random_embeddings.is_some() {
            return Err(Error::Config("choose either embeddings or random_embeddings, not both".into()));
        }
        if self.embedding_dim == 0 || self.filters == 0 || self.max_tokens == 0 {
            return Err(Error::Config("embedding_dim, filters and max_tokens must be positive".into()));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        self.hyperparams().validate()
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            l2: self.l2,
            dropout: self.dropout,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
        }
    }

    pub fn preprocess_options(&self) -> PreprocessOptions {
        PreprocessOptions { max_tokens: self.max_tokens, lowercase: self.lowercase }
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.output_dir.join("model.json"))
    }

    fn dir(&self, split: Split) -> Result<&Path> {
        let dir = match split {
            Split::Train => &self.train_dir,
            Split::Test => &self.test_dir,
        };
        dir.as_deref().ok_or_else(|| Error::Config(format!("no {split}_dir configured")))
    }

    pub fn load_split(&self, split: Split) -> Result<Dataset> {
        let dir = self.dir(split)?;
        if !dir.is_dir() {
            return Err(Error::Config(format!("corpus directory {} does not exist", dir.display())));
        }
        load_corpus(dir, split, &self.preprocess_options())
    }
}

/// Loaded corpora, embeddings and the encoded documents.
pub struct Workspace {
    pub config: RunConfig,
    pub train: Option<Dataset>,
    pub test: Dataset,
    pub table: EmbeddingTable,
}

fn encode_all(table: &EmbeddingTable, dataset: &Dataset) -> Vec<EmbeddedDoc> {
    let encoded: Vec<Result<EmbeddedDoc>> = dataset.documents.par_iter().map(|d| table.encode(d)).collect();
    let mut skipped = 0;
    let docs: Vec<EmbeddedDoc> = encoded.into_iter().filter_map(|r| r.map_err(|_| skipped += 1).ok()).collect();
    if skipped > 0 {
        log::warn!("{}: skipped {skipped} documents with fewer than 2 known words", dataset.split);
    }
    docs
}

impl Workspace {
    fn open(config: RunConfig, with_train: bool) -> Result<Self> {
        let test = config.load_split(Split::Test)?;
        let train = if with_train || config.random_embeddings.is_some() {
            Some(config.load_split(Split::Train)?)
        } else {
            None
        };
        if let Some(train) = &train {
            if train.labels != test.labels {
                return Err(Error::Config("train and test corpora have different categories".into()));
            }
        }
        let table = match (&config.embeddings, config.random_embeddings) {
            (Some(path), _) => EmbeddingTable::load(path)?,
            (None, Some(seed)) => {
                let vocabulary: BTreeSet<&str> = train
                    .iter()
                    .chain(std::iter::once(&test))
                    .flat_map(|d| d.documents.iter())
                    .flat_map(|d| d.tokens.iter().map(String::as_str))
                    .collect();
                EmbeddingTable::random(vocabulary, config.embedding_dim, seed)?
            }
            (None, None) => {
                return Err(Error::Config("configure --embeddings <path> or --random-embeddings <seed>".into()))
            }
        };
        Ok(Workspace { config, train, test, table })
    }

    fn load_model(&self) -> Result<SavedModel> {
        let path = self.config.model_path();
        let saved = SavedModel::load(&path)?;
        if saved.embedding_fingerprint != self.table.fingerprint() {
            return Err(Error::Config(format!("{} was trained with different embeddings", path.display())));
        }
        if saved.preprocess != self.config.preprocess_options() {
            return Err(Error::Config(format!("{} was trained with different preprocessing options", path.display())));
        }
        if saved.labels != self.test.labels {
            return Err(Error::Config(format!("{} was trained on different categories", path.display())));
        }
        if saved.model.dims().embedding != self.table.dim() {
            return Err(Error::DimMismatch { expected: saved.model.dims().embedding, found: self.table.dim() });
        }
        Ok(saved)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassCounts {
    pub label: String,
    pub documents: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub documents: usize,
    pub majority_baseline: f64,
    pub per_class: Vec<ClassCounts>,
}

pub fn evaluate(model: &Model, docs: &[EmbeddedDoc], labels: &[String]) -> Result<EvalReport> {
    let predictions =
        docs.par_iter().map(|d| model.predict(d.matrix.view()).map(|(c, _)| c)).collect::<Result<Vec<usize>>>()?;
    let mut per_class: Vec<ClassCounts> =
        labels.iter().map(|l| ClassCounts { label: l.clone(), documents: 0, correct: 0 }).collect();
    for (doc, &pred) in docs.iter().zip(&predictions) {
        per_class[doc.label_index].documents += 1;
        per_class[doc.label_index].correct += (pred == doc.label_index) as usize;
    }
    let n = docs.len().max(1) as f64;
    Ok(EvalReport {
        accuracy: per_class.iter().map(|c| c.correct).sum::<usize>() as f64 / n,
        documents: docs.len(),
        majority_baseline: per_class.iter().map(|c| c.documents).max().unwrap_or(0) as f64 / n,
        per_class,
    })
}

fn print_eval(name: &str, report: &EvalReport) {
    println!(
        "{name} accuracy: {:.4} ({} documents, majority baseline {:.4})",
        report.accuracy, report.documents, report.majority_baseline
    );
    for c in &report.per_class {
        println!("  {:<30} {:>5} / {:>5}", c.label, c.correct, c.documents);
    }
}

#[derive(Serialize)]
struct TrainReport<'a> {
    dims: Dims,
    hyperparams: Hyperparams,
    init_seed: u64,
    history: &'a [EpochStats],
    train: &'a EvalReport,
    test: &'a EvalReport,
}

pub fn cmd_preprocess(config: &RunConfig, split: Split) -> Result<PathBuf> {
    let dataset = config.load_split(split)?;
    let mut out = Vec::new();
    dataset.write_jsonl(&mut out)?;
    let path = config.output_dir.join(format!("{split}.jsonl"));
    write_file(&path, &String::from_utf8_lossy(&out))?;
    println!("{}: {} documents ({} dropped) -> {}", split, dataset.documents.len(), dataset.dropped, path.display());
    Ok(path)
}

pub fn cmd_train(config: &RunConfig) -> Result<(SavedModel, EvalReport)> {
    let ws = Workspace::open(config.clone(), true)?;
    let train_set = ws.train.as_ref().expect("train split loaded");
    let train_docs = encode_all(&ws.table, train_set);
    let test_docs = encode_all(&ws.table, &ws.test);
    let dims = Dims { embedding: ws.table.dim(), filters: config.filters, classes: train_set.labels.len() };
    if dims.classes < 2 {
        return Err(Error::Config("at least two categories are required".into()));
    }
    let init_seed = config.seed.wrapping_add(INIT_SEED_OFFSET);
    let init = Model::init(dims, init_seed)?;
    let hp = config.hyperparams();
    let (model, history) = train(init, &train_docs, &hp)?;

    let train_report = evaluate(&model, &train_docs, &train_set.labels)?;
    let test_report = evaluate(&model, &test_docs, &ws.test.labels)?;
    let saved = SavedModel {
        model,
        labels: train_set.labels.clone(),
        preprocess: config.preprocess_options(),
        embedding_fingerprint: ws.table.fingerprint(),
    };
    saved.save(&config.model_path())?;
    let report =
        TrainReport { dims, hyperparams: hp, init_seed, history: &history, train: &train_report, test: &test_report };
    write_file(&config.output_dir.join("train_metrics.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    print_eval("train", &train_report);
    print_eval("test", &test_report);
    println!("model written to {}", config.model_path().display());
    Ok((saved, test_report))
}

pub fn cmd_eval(config: &RunConfig) -> Result<EvalReport> {
    let ws = Workspace::open(config.clone(), false)?;
    let saved = ws.load_model()?;
    let docs = encode_all(&ws.table, &ws.test);
    let report = evaluate(&saved.model, &docs, &saved.labels)?;
    write_file(&config.output_dir.join("eval.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    print_eval("test", &report);
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WordRelevance {
    pub token: String,
    pub r: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainRecord {
    pub id: String,
    pub target_class: String,
    pub target_index: usize,
    pub predicted_class: String,
    pub target_is_predicted: bool,
    pub method: Method,
    pub f_value: f64,
    pub word_relevances: Vec<WordRelevance>,
    pub conservation_residual: f64,
    pub conservation_ok: bool,
}

fn resolve_class(labels: &[String], name: &str) -> Result<usize> {
    if let Some(i) = labels.iter().position(|l| l == name) {
        return Ok(i);
    }
    match name.parse::<usize>() {
        Ok(i) if i < labels.len() => Ok(i),
        _ => Err(Error::UnknownClass(name.to_owned())),
    }
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect()
}

pub fn cmd_explain(config: &RunConfig, doc_id: &str, target: Option<&str>, method: Method) -> Result<ExplainRecord> {
    let ws = Workspace::open(config.clone(), false)?;
    let saved = ws.load_model()?;
    let doc = ws
        .test
        .find(doc_id)
        .or_else(|| ws.train.as_ref().and_then(|t| t.find(doc_id)))
        .ok_or_else(|| Error::UnknownDocument(doc_id.to_owned()))?;
    let encoded = ws.table.encode(doc)?;
    let (predicted, _) = saved.model.predict(encoded.matrix.view())?;
    let target_index = match target {
        Some(name) => resolve_class(&saved.labels, name)?,
        None => predicted,
    };
    let relevance = explain(&saved.model, encoded.matrix.view(), target_index, method, config.epsilon)?;
    let residual = relevance.conservation_residual();
    let tolerance = match method {
        Method::Lrp => conservation_tolerance(relevance.f_value),
        Method::Sa | Method::SaL2 => 1e-12 * relevance.gradient_norm_sq.unwrap_or(0.0).abs() + 1e-15,
    };
    let record = ExplainRecord {
        id: doc.id.clone(),
        target_class: saved.labels[target_index].clone(),
        target_index,
        predicted_class: saved.labels[predicted].clone(),
        target_is_predicted: target.is_none(),
        method,
        f_value: relevance.f_value,
        word_relevances: encoded
            .tokens
            .iter()
            .zip(&relevance.per_word)
            .map(|(t, &r)| WordRelevance { token: t.clone(), r })
            .collect(),
        conservation_residual: residual,
        conservation_ok: residual.abs() <= tolerance,
    };
    let heatmap = render_heatmap(&Heatmap {
        tokens: encoded.tokens.clone(),
        relevances: relevance.per_word.clone(),
        target_class: record.target_class.clone(),
        method: method.label().to_owned(),
        title: doc.id.clone(),
    })?;
    let stem = format!(
        "{}.{}.{}",
        file_stem(&doc.id),
        file_stem(&method.label().to_ascii_lowercase()),
        file_stem(&record.target_class)
    );
    let dir = config.output_dir.join("explain");
    write_file(&dir.join(format!("{stem}.html")), &heatmap)?;
    write_file(&dir.join(format!("{stem}.json")), &(serde_json::to_string_pretty(&record)? + "\n"))?;
    println!(
        "{} target {} ({}) f = {:.6}, residual {:.3e} -> {}",
        method,
        record.target_class,
        if record.target_is_predicted { "predicted" } else { "requested" },
        record.f_value,
        residual,
        dir.join(format!("{stem}.html")).display()
    );
    Ok(record)
}

fn curve_file(curve: &DeletionCurve) -> String {
    let method = match curve.method.as_str() {
        "SA(l2)" => "sa-l2".to_owned(),
        m => m.to_ascii_lowercase(),
    };
    format!("deletion_{}_{}_{}.csv", curve.population, method, curve.order)
}

/// Runs every deletion curve, writes CSV + SVG, and returns the curves by population.
pub fn cmd_delete_eval(config: &RunConfig) -> Result<Vec<DeletionCurve>> {
    let ws = Workspace::open(config.clone(), false)?;
    let saved = ws.load_model()?;
    let docs = encode_all(&ws.table, &ws.test);
    let model = &saved.model;
    let k = config.horizon;
    let epsilon = config.epsilon;
    let mut all = Vec::new();
    for (population, order) in
        [(Population::CorrectInitial, Order::Decreasing), (Population::WrongInitial, Order::Increasing)]
    {
        let members = select_population(model, &docs, config.min_len, population)?;
        if members.is_empty() {
            log::warn!("{population}-initial population is empty, skipping");
            eprintln!("warning: no {population}-initially classified documents with at least {} words", config.min_len);
            continue;
        }
        println!("{population}-initial population: {} documents", members.len());
        let rankings = [
            Ranking::Relevance { method: Method::Lrp, order, epsilon },
            Ranking::Relevance { method: Method::Sa, order, epsilon },
            Ranking::Random { seed: config.seed, runs: RANDOM_RUNS },
        ];
        let mut curves = Vec::new();
        for ranking in rankings {
            let curve = deletion_experiment(model, &members, population, ranking, k)?;
            write_file(&config.output_dir.join(curve_file(&curve)), &curve.to_csv())?;
            println!("  {:<20} accuracy at k={k}: {:.4}", curve.label(), curve.accuracies[k]);
            curves.push(curve);
        }
        let title = format!("word deletion, initially {population} documents");
        write_file(&config.output_dir.join(format!("deletion_{population}.svg")), &render_curves(&curves, &title)?)?;
        all.extend(curves);
    }
    Ok(all)
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub method: Option<Method>,
    pub silhouette: f64,
    pub explained_variance: [f64; 2],
}

impl SchemeSummary {
    pub fn name(&self) -> String {
        match self.method {
            Some(m) => format!("{m} {}", self.scheme),
            None => self.scheme.to_string(),
        }
    }
}

pub const DOCVEC_SCHEMES: [(Option<Method>, Scheme); 6] = [
    (Some(Method::Lrp), Scheme::WordLevel),
    (Some(Method::Lrp), Scheme::ElementWise),
    (Some(Method::Sa), Scheme::WordLevel),
    (Some(Method::SaL2), Scheme::WordLevel),
    (Some(Method::Sa), Scheme::ElementWise),
    (None, Scheme::Sum),
];

fn load_groups(path: Option<&Path>, labels: &[String]) -> Result<Vec<String>> {
    let Some(path) = path else {
        return Ok(labels.to_vec());
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let map: BTreeMap<String, String> =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    labels
        .iter()
        .map(|l| {
            map.get(l)
                .cloned()
                .ok_or_else(|| Error::Config(format!("{} has no group for category {l:?}", path.display())))
        })
        .collect()
}

pub fn cmd_docvec(config: &RunConfig) -> Result<Vec<SchemeSummary>> {
    let ws = Workspace::open(config.clone(), false)?;
    let saved = ws.load_model()?;
    let model = &saved.model;
    let docs = encode_all(&ws.table, &ws.test);
    let groups = load_groups(config.label_groups.as_deref(), &saved.labels)?;
    let mut group_names: Vec<&String> = groups.iter().collect();
    group_names.sort();
    group_names.dedup();
    let group_index = |label: usize| group_names.binary_search(&&groups[label]).unwrap();

    let mut csv = String::from("id,group_label,pc1,pc2,scheme,method\n");
    let mut panels = Vec::new();
    let mut summaries = Vec::new();
    for (method, scheme) in DOCVEC_SCHEMES {
        let vectors = docs
            .par_iter()
            .map(|doc| {
                let relevance = match method {
                    Some(m) => {
                        let (predicted, _) = model.predict(doc.matrix.view())?;
                        Some(explain(model, doc.matrix.view(), predicted, m, config.epsilon)?)
                    }
                    None => None,
                };
                doc_vector(doc, relevance.as_ref(), scheme)
            })
            .collect::<Result<Vec<_>>>()?;
        let projection = pca_2d(&vectors.iter().map(|v| v.vector.clone()).collect::<Vec<_>>())?;
        let labels: Vec<usize> = docs.iter().map(|d| group_index(d.label_index)).collect();
        let score = silhouette(&projection.coords, &labels)?;
        let method_name = method.map_or("none", Method::label);
        for (doc, p) in docs.iter().zip(&projection.coords) {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                doc.id, groups[doc.label_index], p[0], p[1], scheme, method_name
            ));
        }
        let summary =
            SchemeSummary { scheme, method, silhouette: score, explained_variance: projection.explained_variance };
        panels.push(ScatterPanel {
            title: summary.name(),
            points: projection.coords,
            groups: docs.iter().map(|d| groups[d.label_index].clone()).collect(),
        });
        summaries.push(summary);
    }
    write_file(&config.output_dir.join("docvec.csv"), &csv)?;
    write_file(&config.output_dir.join("docvec.svg"), &render_scatter(&panels)?)?;
    let mut report = String::from("scheme,silhouette\n");
    for s in &summaries {
        println!("{:<20} silhouette {:.4}", s.name(), s.silhouette);
        report.push_str(&format!("{},{:.4}\n", s.name(), s.silhouette));
    }
    write_file(&config.output_dir.join("docvec_silhouette.csv"), &report)?;
    Ok(summaries)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess { common, split } => {
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            };
            cmd_preprocess(&RunConfig::from_args(&common)?, split).map(drop)
        }
        Command::Train(common) => cmd_train(&RunConfig::from_args(&common)?).map(drop),
        Command::Eval(common) => cmd_eval(&RunConfig::from_args(&common)?).map(drop),
        Command::Explain { common, doc_id, target, method } => {
            cmd_explain(&RunConfig::from_args(&common)?, &doc_id, target.as_deref(), method).map(drop)
        }
        Command::DeleteEval(common) => cmd_delete_eval(&RunConfig::from_args(&common)?).map(drop),
        Command::Docvec(common) => cmd_docvec(&RunConfig::from_args(&common)?).map(drop),
    }
}
