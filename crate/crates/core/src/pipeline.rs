//! Stage orchestration over file artifacts.
//!
//! Each stage reads the artifacts of earlier stages from disk and writes its
//! own, so any stage can be rerun alone. Outputs are deterministic given
//! inputs and configuration.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{
    CompletionApi, CompletionClient, EmbeddingClient, HashingEmbedder, HttpCompletionClient, HttpEmbeddingClient,
    RetryPolicy, ENV_EMBED_URL, ENV_LLM_KEY, ENV_LLM_URL, ENV_MODEL_URL,
};
use crate::concepts::{generate_concepts, load_concepts, load_precomputed_embeddings, save_concepts, ConceptError, ConceptSet, EmbeddingStore};
use crate::corpus::{ingest_snapshot, CorpusStore, IngestError, CORPUS_FILE};
use crate::eval::{evaluate_suite, EvalConfig, EvalError, EvalStatus, Scorer, ScorerKind};
use crate::graph::{build_subgraph, graph_stats, holdout_split, top_indegree, CitationGraph, GraphError};
use crate::jsonl::{read_jsonl, write_jsonl};
use crate::latex::{paper_id_from_name, process_tree, Blocklist, LatexConfig, LatexError, ProcessedDoc, SourceTree};
use crate::retriever::{retrieve_top_k, similarity_histogram, Method, Query, RetrievalResult, RetrieveError};
use crate::taskgen::{assemble_dataset, write_datasets, TaskConfig, TaskDataset, TaskError, Templates, BENCH_FILE, TRAIN_FILE};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("missing input {path}: run `litgraph {producer}` first")]
    MissingInput { path: PathBuf, producer: Stage },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("evaluation failed on every instance")]
    AllFailed,
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Concept(#[from] ConceptError),
    #[error(transparent)]
    Retrieve(#[from] RetrieveError),
    #[error(transparent)]
    Latex(#[from] LatexError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Concepts,
    Embed,
    Retrieve,
    Histogram,
    Process,
    BuildGraph,
    Influential,
    GenDatasets,
    Evaluate,
    Stats,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Ingest,
        Stage::Concepts,
        Stage::Embed,
        Stage::Retrieve,
        Stage::Histogram,
        Stage::Process,
        Stage::BuildGraph,
        Stage::Influential,
        Stage::GenDatasets,
        Stage::Evaluate,
        Stage::Stats,
    ];

    /// Stages of a full run.
    pub const DEFAULT_RUN: [Stage; 8] = [
        Stage::Ingest,
        Stage::Concepts,
        Stage::Embed,
        Stage::Retrieve,
        Stage::Process,
        Stage::BuildGraph,
        Stage::GenDatasets,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Concepts => "concepts",
            Stage::Embed => "embed",
            Stage::Retrieve => "retrieve",
            Stage::Histogram => "histogram",
            Stage::Process => "process",
            Stage::BuildGraph => "build-graph",
            Stage::Influential => "influential",
            Stage::GenDatasets => "gen-datasets",
            Stage::Evaluate => "evaluate",
            Stage::Stats => "stats",
        }
    }

    fn samples(self) -> bool {
        matches!(self, Stage::GenDatasets)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    #[default]
    Http,
    Hashing,
}

impl FromStr for EmbedderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(EmbedderKind::Http),
            "hashing" => Ok(EmbedderKind::Hashing),
            _ => Err(format!("unknown embedder {s:?} (http, hashing)")),
        }
    }
}

/// Persistent pipeline settings, read from a JSON file. Fields left out
/// take their defaults; URLs left out fall back to environment variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub snapshot: Option<PathBuf>,
    pub source_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Use this embeddings file instead of the `embed` stage output.
    pub embeddings: Option<PathBuf>,
    pub query: Option<String>,
    pub k: usize,
    pub method: Method,
    pub bins: usize,
    pub holdout: f64,
    pub seed: Option<u64>,
    pub jobs: usize,
    pub llm_url: Option<String>,
    pub llm_model: String,
    pub llm_api: CompletionApi,
    pub embedder: EmbedderKind,
    pub embed_url: Option<String>,
    pub embed_model: String,
    pub hashing_dim: usize,
    pub model_url: Option<String>,
    pub model_name: String,
    pub scorer: ScorerKind,
    pub blocklist: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub completion_fraction: f64,
    pub plain_related_work: bool,
    pub influential_n: usize,
    pub retry_attempts: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            snapshot: None,
            source_dir: None,
            out_dir: PathBuf::from("litgraph-out"),
            embeddings: None,
            query: None,
            k: crate::retriever::DEFAULT_K,
            method: Method::Concept,
            bins: crate::retriever::DEFAULT_BINS,
            holdout: crate::graph::DEFAULT_HOLDOUT,
            seed: None,
            jobs: 4,
            llm_url: None,
            llm_model: "default".into(),
            llm_api: CompletionApi::Chat,
            embedder: EmbedderKind::Http,
            embed_url: None,
            embed_model: "default".into(),
            hashing_dim: 256,
            model_url: None,
            model_name: "default".into(),
            scorer: ScorerKind::TokenOverlap,
            blocklist: None,
            templates: None,
            completion_fraction: crate::taskgen::DEFAULT_COMPLETION_FRACTION,
            plain_related_work: false,
            influential_n: 10,
            retry_attempts: 3,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self, stages: &[Stage]) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return bad(format!("holdout must be in (0, 1), got {}", self.holdout));
        }
        if !(self.completion_fraction > 0.0 && self.completion_fraction < 1.0) {
            return bad(format!(
                "completion_fraction must be in (0, 1), got {}",
                self.completion_fraction
            ));
        }
        if self.bins == 0 {
            return bad("bins must be at least 1".into());
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        if self.hashing_dim == 0 {
            return bad("hashing_dim must be at least 1".into());
        }
        if self.influential_n == 0 {
            return bad("influential_n must be at least 1".into());
        }
        if self.seed.is_none() && stages.iter().any(|s| s.samples()) {
            return bad("a seed is required for sampling stages (--seed or \"seed\")".into());
        }
        for &stage in stages {
            match stage {
                Stage::Ingest if self.snapshot.is_none() => return bad("ingest needs a snapshot path".into()),
                Stage::Process if self.source_dir.is_none() => return bad("process needs a source directory".into()),
                Stage::Retrieve | Stage::Histogram if self.query.as_deref().is_none_or(|q| q.trim().is_empty()) => {
                    return bad(format!("{stage} needs a query"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            attempts: self.retry_attempts.max(1),
            ..RetryPolicy::default()
        }
    }
}

/// Where each artifact lives. Defaults are file names under `out_dir`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifacts {
    pub corpus_dir: PathBuf,
    pub concepts: PathBuf,
    pub embeddings: PathBuf,
    pub subset: PathBuf,
    pub histogram: PathBuf,
    pub processed: PathBuf,
    pub graph: PathBuf,
    pub influential: PathBuf,
    pub data_dir: PathBuf,
    pub bench: PathBuf,
    pub report: PathBuf,
    pub stats: PathBuf,
}

impl Artifacts {
    pub fn under(dir: &Path) -> Self {
        let data_dir = dir.join("data");
        Self {
            corpus_dir: dir.to_path_buf(),
            concepts: dir.join("concepts.jsonl"),
            embeddings: dir.join("embeddings.jsonl"),
            subset: dir.join("subset.json"),
            histogram: dir.join("hist.csv"),
            processed: dir.join("processed.jsonl"),
            graph: dir.join("graph.json"),
            influential: dir.join("influential.json"),
            bench: data_dir.join(BENCH_FILE),
            data_dir,
            report: dir.join("report.csv"),
            stats: dir.join("stats.json"),
        }
    }

    /// `(inputs, outputs)` of a stage; inputs carry their producing stage.
    pub fn io(&self, stage: Stage, cfg: &PipelineConfig) -> (Vec<(PathBuf, Option<Stage>)>, Vec<PathBuf>) {
        let corpus = (self.corpus_dir.join(CORPUS_FILE), Some(Stage::Ingest));
        let embeddings = match &cfg.embeddings {
            Some(p) => (p.clone(), None),
            None => (self.embeddings.clone(), Some(Stage::Embed)),
        };
        let graph = (self.graph.clone(), Some(Stage::BuildGraph));
        match stage {
            Stage::Ingest => (
                cfg.snapshot.iter().map(|p| (p.clone(), None)).collect(),
                vec![self.corpus_dir.join(CORPUS_FILE), self.corpus_dir.join(crate::corpus::INDEX_FILE)],
            ),
            Stage::Concepts => (vec![corpus], vec![self.concepts.clone()]),
            Stage::Embed => (
                vec![corpus, (self.concepts.clone(), Some(Stage::Concepts))],
                vec![self.embeddings.clone()],
            ),
            Stage::Retrieve => (vec![embeddings], vec![self.subset.clone()]),
            Stage::Histogram => (vec![embeddings], vec![self.histogram.clone()]),
            Stage::Process => (
                vec![(self.subset.clone(), Some(Stage::Retrieve))]
                    .into_iter()
                    .chain(cfg.source_dir.iter().map(|p| (p.clone(), None)))
                    .collect(),
                vec![self.processed.clone()],
            ),
            Stage::BuildGraph => (
                vec![
                    corpus,
                    (self.subset.clone(), Some(Stage::Retrieve)),
                    (self.processed.clone(), Some(Stage::Process)),
                ],
                vec![self.graph.clone()],
            ),
            Stage::Influential => (vec![graph], vec![self.influential.clone()]),
            Stage::GenDatasets => (
                vec![graph],
                vec![self.data_dir.join(TRAIN_FILE), self.data_dir.join(BENCH_FILE)],
            ),
            Stage::Evaluate => (vec![(self.bench.clone(), Some(Stage::GenDatasets))], vec![self.report.clone()]),
            Stage::Stats => (vec![graph], vec![self.stats.clone()]),
        }
    }
}

/// Endpoint clients a run may need.
#[derive(Default)]
pub struct Services {
    pub llm: Option<Box<dyn CompletionClient>>,
    pub embedder: Option<Box<dyn EmbeddingClient>>,
    pub model: Option<Box<dyn CompletionClient>>,
}

fn env_or(value: &Option<String>, var: &str) -> Option<String> {
    value
        .clone()
        .or_else(|| std::env::var(var).ok())
        .filter(|s| !s.trim().is_empty())
}

impl Services {
    /// HTTP clients for every configured URL (config, then environment);
    /// the hashing embedder when selected. Nothing connects here.
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        let key = std::env::var(ENV_LLM_KEY).ok();
        let llm = env_or(&cfg.llm_url, ENV_LLM_URL).map(|url| {
            Box::new(HttpCompletionClient::new(url, cfg.llm_model.clone(), cfg.llm_api).with_api_key(key.clone()))
                as Box<dyn CompletionClient>
        });
        let embedder: Option<Box<dyn EmbeddingClient>> = match cfg.embedder {
            EmbedderKind::Hashing => Some(Box::new(HashingEmbedder::new(cfg.hashing_dim))),
            EmbedderKind::Http => env_or(&cfg.embed_url, ENV_EMBED_URL).map(|url| {
                Box::new(HttpEmbeddingClient::new(url, cfg.embed_model.clone()).with_api_key(key.clone()))
                    as Box<dyn EmbeddingClient>
            }),
        };
        let model = env_or(&cfg.model_url, ENV_MODEL_URL).map(|url| {
            Box::new(HttpCompletionClient::new(url, cfg.model_name.clone(), CompletionApi::Completions).with_api_key(key.clone()))
                as Box<dyn CompletionClient>
        });
        Self { llm, embedder, model }
    }

    fn llm(&self) -> Result<&dyn CompletionClient, PipelineError> {
        self.llm
            .as_deref()
            .ok_or_else(|| PipelineError::Config(format!("concepts needs an LLM endpoint (llm_url or {ENV_LLM_URL})")))
    }

    fn embedder(&self, stage: Stage) -> Result<&dyn EmbeddingClient, PipelineError> {
        self.embedder.as_deref().ok_or_else(|| {
            PipelineError::Config(format!(
                "{stage} needs an embedder (embed_url, {ENV_EMBED_URL}, or embedder \"hashing\")"
            ))
        })
    }

    fn model(&self) -> Result<&dyn CompletionClient, PipelineError> {
        self.model
            .as_deref()
            .ok_or_else(|| PipelineError::Config(format!("evaluate needs a model endpoint (model_url or {ENV_MODEL_URL})")))
    }
}

/// Human-readable stage plan, one line per stage.
pub fn plan(cfg: &PipelineConfig, art: &Artifacts, stages: &[Stage]) -> String {
    let mut out = String::new();
    for (i, &stage) in stages.iter().enumerate() {
        let (inputs, outputs) = art.io(stage, cfg);
        let show = |ps: Vec<PathBuf>| ps.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ");
        out.push_str(&format!(
            "{}. {stage}: {} -> {}\n",
            i + 1,
            show(inputs.into_iter().map(|(p, _)| p).collect()),
            show(outputs)
        ));
    }
    out
}

fn require(path: &Path, producer: Option<Stage>) -> Result<(), PipelineError> {
    if path.exists() {
        return Ok(());
    }
    match producer {
        Some(producer) => Err(PipelineError::MissingInput {
            path: path.to_path_buf(),
            producer,
        }),
        None => Err(PipelineError::Config(format!("input {} does not exist", path.display()))),
    }
}

fn ensure_parent(path: &Path) -> std::io::Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p),
        _ => Ok(()),
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))
}

/// Validates, then runs `stages` in the given order. Returns one summary
/// line per stage.
pub fn run_pipeline(cfg: &PipelineConfig, art: &Artifacts, stages: &[Stage], services: &Services) -> Result<Vec<String>, PipelineError> {
    cfg.validate(stages)?;
    stages.iter().map(|&s| run_stage(s, cfg, art, services)).collect()
}

pub fn run_stage(stage: Stage, cfg: &PipelineConfig, art: &Artifacts, services: &Services) -> Result<String, PipelineError> {
    cfg.validate(&[stage])?;
    let (inputs, outputs) = art.io(stage, cfg);
    for (path, producer) in &inputs {
        require(path, *producer)?;
    }
    for out in &outputs {
        ensure_parent(out)?;
    }
    log::info!("stage {stage}");
    match stage {
        Stage::Ingest => stage_ingest(cfg, art),
        Stage::Concepts => stage_concepts(cfg, art, services.llm()?),
        Stage::Embed => stage_embed(cfg, art, services.embedder(stage)?),
        Stage::Retrieve => stage_retrieve(cfg, art, services.embedder(stage)?),
        Stage::Histogram => stage_histogram(cfg, art, services.embedder(stage)?),
        Stage::Process => stage_process(cfg, art),
        Stage::BuildGraph => stage_build_graph(art),
        Stage::Influential => stage_influential(cfg, art),
        Stage::GenDatasets => stage_gen_datasets(cfg, art),
        Stage::Evaluate => stage_evaluate(cfg, art, services),
        Stage::Stats => stage_stats(art),
    }
}

fn stage_ingest(cfg: &PipelineConfig, art: &Artifacts) -> Result<String, PipelineError> {
    let snapshot = cfg.snapshot.as_deref().expect("validated");
    let s = ingest_snapshot(snapshot, &art.corpus_dir)?;
    Ok(format!(
        "ingest: {} records, {} duplicates, {} malformed lines skipped",
        s.records, s.duplicates, s.malformed
    ))
}

fn stage_concepts(cfg: &PipelineConfig, art: &Artifacts, llm: &dyn CompletionClient) -> Result<String, PipelineError> {
    let corpus = CorpusStore::open(&art.corpus_dir)?;
    let mut done: HashMap<String, ConceptSet> = if art.concepts.exists() {
        load_concepts(&art.concepts)?
            .into_iter()
            .map(|c| (c.paper_id.clone(), c))
            .collect()
    } else {
        HashMap::new()
    };
    let todo: Vec<_> = corpus.iter().filter(|r| !done.contains_key(&r.paper_id)).collect();
    let retry = cfg.retry();
    let results: Vec<_> = pool(cfg.jobs)?.install(|| {
        todo.par_iter()
            .map(|r| (r.paper_id.clone(), generate_concepts(r, llm, &retry)))
            .collect()
    });
    let (mut made, mut failed) = (0, 0);
    for (id, res) in results {
        match res {
            Ok(set) => {
                done.insert(id, set);
                made += 1;
            }
            Err(e) => {
                log::warn!("concepts for {id} failed: {e}");
                failed += 1;
            }
        }
    }
    let mut sets: Vec<ConceptSet> = done.into_values().collect();
    sets.sort_by(|a, b| a.paper_id.cmp(&b.paper_id));
    save_concepts(&art.concepts, &sets)?;
    Ok(format!(
        "concepts: {made} generated, {} reused, {failed} failed",
        sets.len() - made
    ))
}

fn stage_embed(cfg: &PipelineConfig, art: &Artifacts, embedder: &dyn EmbeddingClient) -> Result<String, PipelineError> {
    let corpus = CorpusStore::open(&art.corpus_dir)?;
    let concepts: HashMap<String, ConceptSet> = load_concepts(&art.concepts)?
        .into_iter()
        .map(|c| (c.paper_id.clone(), c))
        .collect();
    let records: Vec<_> = corpus.iter().collect();
    let retry = cfg.retry();
    let vectors: Vec<_> = pool(cfg.jobs)?.install(|| {
        records
            .par_iter()
            .map(|r| {
                let mut texts = vec![format!("{} {}", r.title, r.abstract_text)];
                if let Some(c) = concepts.get(&r.paper_id) {
                    texts.extend(c.levels.iter().map(|l| l.join("; ")));
                }
                let out = retry.run(|| embedder.embed(&texts));
                (r.paper_id.clone(), texts.len(), out)
            })
            .collect()
    });
    let mut store = EmbeddingStore::new();
    let mut failed = 0;
    for (id, expected, res) in vectors {
        match res {
            Ok(v) if v.len() == expected => {
                let mut it = v.into_iter();
                store.insert_text(id.clone(), it.next().expect("one text vector"))?;
                if expected == 4 {
                    let levels = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
                    store.insert_levels(id, levels)?;
                }
            }
            Ok(v) => {
                log::warn!("embedder returned {} vectors for {expected} texts of {id}", v.len());
                failed += 1;
            }
            Err(e) => {
                log::warn!("embedding {id} failed: {e}");
                failed += 1;
            }
        }
    }
    store.save(&art.embeddings)?;
    Ok(format!("embed: {} papers, {failed} failed", store.len()))
}

fn load_store(cfg: &PipelineConfig, art: &Artifacts) -> Result<EmbeddingStore, PipelineError> {
    let path = cfg.embeddings.as_deref().unwrap_or(&art.embeddings);
    let (store, warnings) = load_precomputed_embeddings(path)?;
    for w in warnings {
        log::warn!("{w:?}");
    }
    Ok(store)
}

fn query_vector(cfg: &PipelineConfig, embedder: &dyn EmbeddingClient) -> Result<Query, PipelineError> {
    let text = cfg.query.clone().expect("validated");
    let mut v = cfg
        .retry()
        .run(|| embedder.embed(std::slice::from_ref(&text)))
        .map_err(ConceptError::Embedding)?;
    let vector = v
        .pop()
        .ok_or_else(|| PipelineError::Config("embedder returned no vector for the query".into()))?;
    Ok(Query::new(text, vector))
}

fn stage_retrieve(cfg: &PipelineConfig, art: &Artifacts, embedder: &dyn EmbeddingClient) -> Result<String, PipelineError> {
    let store = load_store(cfg, art)?;
    let query = query_vector(cfg, embedder)?;
    let result = retrieve_top_k(&query, &store, cfg.k, cfg.method)?;
    std::fs::write(&art.subset, serde_json::to_string_pretty(&result)?)?;
    Ok(format!(
        "retrieve: {} papers for {:?} ({:?})",
        result.ranked.len(),
        result.query,
        result.method
    ))
}

fn stage_histogram(cfg: &PipelineConfig, art: &Artifacts, embedder: &dyn EmbeddingClient) -> Result<String, PipelineError> {
    let store = load_store(cfg, art)?;
    let query = query_vector(cfg, embedder)?;
    let hist = similarity_histogram(&query, &store, cfg.bins, cfg.method)?;
    hist.write_csv(std::io::BufWriter::new(std::fs::File::create(&art.histogram)?))?;
    Ok(format!("histogram: {} scores in {} bins", hist.total(), cfg.bins))
}

fn load_subset(art: &Artifacts) -> Result<BTreeSet<String>, PipelineError> {
    let result: RetrievalResult = serde_json::from_str(&std::fs::read_to_string(&art.subset)?)?;
    Ok(result.ids().map(str::to_owned).collect())
}

fn latex_config(cfg: &PipelineConfig) -> Result<LatexConfig, PipelineError> {
    let blocklist = match &cfg.blocklist {
        Some(path) => Blocklist::default().extend_from_file(path)?,
        None => Blocklist::default(),
    };
    Ok(LatexConfig {
        blocklist,
        ..LatexConfig::default()
    })
}

fn stage_process(cfg: &PipelineConfig, art: &Artifacts) -> Result<String, PipelineError> {
    let subset = load_subset(art)?;
    let src = cfg.source_dir.as_deref().expect("validated");
    let latex = latex_config(cfg)?;
    let mut entries: Vec<(String, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(src)? {
        let path = entry?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let id = paper_id_from_name(&name);
        if subset.contains(&id) {
            entries.push((id, path));
        }
    }
    entries.sort();
    entries.dedup_by(|a, b| a.0 == b.0);
    let results: Vec<_> = pool(cfg.jobs)?.install(|| {
        entries
            .par_iter()
            .map(|(id, path)| (id, SourceTree::load(path).and_then(|t| process_tree(&t, id, &latex))))
            .collect()
    });
    let mut docs = Vec::new();
    let mut failed = 0;
    for (id, res) in results {
        match res {
            Ok(doc) => {
                for w in &doc.warnings {
                    log::warn!("{id}: {w}");
                }
                docs.push(doc);
            }
            Err(e) => {
                log::warn!("processing {id} failed: {e}");
                failed += 1;
            }
        }
    }
    write_jsonl(&art.processed, &docs)?;
    Ok(format!(
        "process: {} processed, {failed} failed, {} without sources",
        docs.len(),
        subset.len() - entries.len()
    ))
}

fn stage_build_graph(art: &Artifacts) -> Result<String, PipelineError> {
    let corpus = CorpusStore::open(&art.corpus_dir)?;
    let subset = load_subset(art)?;
    let docs: Vec<ProcessedDoc> = read_jsonl(&art.processed)?;
    let concepts: HashMap<String, ConceptSet> = if art.concepts.exists() {
        load_concepts(&art.concepts)?
            .into_iter()
            .map(|c| (c.paper_id.clone(), c))
            .collect()
    } else {
        HashMap::new()
    };
    let (graph, report) = build_subgraph(&subset, &docs, &corpus, &concepts);
    graph.save(&art.graph)?;
    Ok(format!(
        "build-graph: {} nodes, {} edges; {} of {} mentions dropped (unresolved {}, unmatched {}, outside {}, self {})",
        graph.node_count(),
        graph.edge_count(),
        report.dropped(),
        report.mentions,
        report.unresolved,
        report.unmatched,
        report.outside_selection,
        report.self_citations
    ))
}

#[derive(Serialize)]
struct Influential<'a> {
    paper_id: &'a str,
    title: &'a str,
    indegree: usize,
}

fn stage_influential(cfg: &PipelineConfig, art: &Artifacts) -> Result<String, PipelineError> {
    let graph = CitationGraph::load(&art.graph)?;
    let top = top_indegree(&graph, cfg.influential_n);
    let rows: Vec<Influential> = top
        .iter()
        .map(|(id, d)| Influential {
            paper_id: id,
            title: graph.node(id).map_or("", |n| n.title.as_str()),
            indegree: *d,
        })
        .collect();
    std::fs::write(&art.influential, serde_json::to_string_pretty(&rows)?)?;
    let mut out = format!("influential: top {}", rows.len());
    for r in &rows {
        out.push_str(&format!("\n  {:>5}  {}  {}", r.indegree, r.paper_id, r.title));
    }
    Ok(out)
}

fn stage_gen_datasets(cfg: &PipelineConfig, art: &Artifacts) -> Result<String, PipelineError> {
    let graph = CitationGraph::load(&art.graph)?;
    let seed = cfg.seed.expect("validated");
    let split = holdout_split(&graph, cfg.holdout, seed)?;
    let templates = match &cfg.templates {
        Some(p) => Templates::from_file(p)?,
        None => Templates::default(),
    };
    let task_cfg = TaskConfig {
        completion_fraction: cfg.completion_fraction,
        plain_related_work: cfg.plain_related_work,
        templates,
    };
    let (train, bench) = assemble_dataset(&split, seed, &task_cfg)?;
    write_datasets(&art.data_dir, &train, &bench)?;
    let counts = |d: &TaskDataset| {
        d.counts()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    Ok(format!(
        "gen-datasets: train {} ({}), bench {} ({})",
        train.len(),
        counts(&train),
        bench.len(),
        counts(&bench)
    ))
}

fn stage_evaluate(cfg: &PipelineConfig, art: &Artifacts, services: &Services) -> Result<String, PipelineError> {
    let bench = TaskDataset::load(&art.bench)?;
    let model = services.model()?;
    let scorer = match cfg.scorer {
        ScorerKind::TokenOverlap => Scorer::TokenOverlap,
        ScorerKind::EmbeddingGreedy => Scorer::EmbeddingGreedy(services.embedder(Stage::Evaluate)?),
    };
    let eval_cfg = EvalConfig {
        scorer,
        retry: cfg.retry(),
        jobs: cfg.jobs,
        ..EvalConfig::default()
    };
    let report = evaluate_suite(&bench, model, &eval_cfg)?;
    std::fs::write(&art.report, report.to_csv())?;
    if report.status == EvalStatus::AllFailed {
        return Err(PipelineError::AllFailed);
    }
    Ok(format!("evaluate:\n{}", report.to_table()))
}

fn stage_stats(art: &Artifacts) -> Result<String, PipelineError> {
    let graph = CitationGraph::load(&art.graph)?;
    let stats = graph_stats(&graph);
    std::fs::write(&art.stats, serde_json::to_string_pretty(&stats)?)?;
    Ok(format!(
        "stats: {} nodes, {} edges, ~{} tokens",
        stats.nodes, stats.edges, stats.token_estimate
    ))
}
