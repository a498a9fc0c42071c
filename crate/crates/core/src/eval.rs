//! Benchmark evaluation against a completion endpoint.
//!
//! Predictive tasks are scored by accuracy; generative tasks by
//! precision/recall/F1 from a token-overlap or greedy embedding-matching
//! scorer. Failed requests are excluded from metrics and counted.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{ClientError, CompletionClient, CompletionRequest, EmbeddingClient, RetryPolicy};
use crate::retriever::cosine;
use crate::taskgen::{TaskDataset, TaskInstance, TaskKind};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{preds} predictions for {targets} targets")]
    LengthMismatch { preds: usize, targets: usize },
    #[error("nothing to score")]
    Empty,
    #[error("scorer endpoint failed: {0}")]
    Scorer(#[source] ClientError),
    #[error("scorer returned {got} vectors for {expected} tokens")]
    ScorerShape { expected: usize, got: usize },
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

/// Greedy decoding with a per-task cap on new tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub max_new_tokens: BTreeMap<TaskKind, u32>,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            max_new_tokens: BTreeMap::from([
                (TaskKind::LinkPred, 2),
                (TaskKind::TitleGen, 100),
                (TaskKind::AbstractCompletion, 256),
                (TaskKind::IntroToAbstract, 256),
                (TaskKind::CitationSentence, 64),
                (TaskKind::Recommendation, 4),
                (TaskKind::RelatedWorkGen, 512),
            ]),
        }
    }
}

impl DecodeConfig {
    pub fn cap(&self, task: TaskKind) -> Option<u32> {
        self.max_new_tokens.get(&task).copied()
    }

    pub fn request(&self, instance: &TaskInstance) -> CompletionRequest {
        CompletionRequest::greedy(instance.prompt.clone(), self.cap(instance.task))
    }
}

/// Sends one prompt at temperature 0 with the task's cap.
pub fn run_inference(
    instance: &TaskInstance,
    model: &dyn CompletionClient,
    cfg: &DecodeConfig,
    retry: &RetryPolicy,
) -> Result<String, ClientError> {
    let request = cfg.request(instance);
    retry.run(|| model.complete(&request))
}

fn first_alpha_token(text: &str) -> Option<String> {
    text.split(|c: char| !c.is_alphabetic())
        .find(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn first_integer(text: &str) -> Option<u64> {
    text.split(|c: char| !c.is_ascii_digit())
        .find(|t| !t.is_empty())
        .and_then(|t| t.parse().ok())
}

fn normalize_label(text: &str) -> String {
    text.trim()
        .trim_end_matches(|c: char| c.is_ascii_punctuation())
        .trim()
        .to_lowercase()
}

/// Whether `pred` answers `target`: yes/no targets compare the first
/// alphabetic token, integer targets the first integer, anything else the
/// trimmed lowercase text.
pub fn is_correct(pred: &str, target: &str) -> bool {
    let t = normalize_label(target);
    if t == "yes" || t == "no" {
        return first_alpha_token(pred).as_deref() == Some(t.as_str());
    }
    if let Ok(idx) = t.parse::<u64>() {
        return first_integer(pred) == Some(idx);
    }
    normalize_label(pred) == t
}

pub fn score_accuracy<P: AsRef<str>, T: AsRef<str>>(preds: &[P], targets: &[T]) -> Result<f64, EvalError> {
    if preds.len() != targets.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            targets: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let hits = preds
        .iter()
        .zip(targets)
        .filter(|(p, t)| is_correct(p.as_ref(), t.as_ref()))
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f1 }
    }
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub enum Scorer<'a> {
    TokenOverlap,
    /// Greedy max-cosine matching over per-token vectors. No IDF weighting
    /// and no baseline rescaling.
    EmbeddingGreedy(&'a dyn EmbeddingClient),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    #[default]
    TokenOverlap,
    EmbeddingGreedy,
}

impl std::str::FromStr for ScorerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "token-overlap" => Ok(ScorerKind::TokenOverlap),
            "embedding-greedy" => Ok(ScorerKind::EmbeddingGreedy),
            _ => Err(format!("unknown scorer {s:?} (token-overlap, embedding-greedy)")),
        }
    }
}

fn token_overlap(pred: &[String], target: &[String]) -> Prf {
    if pred.is_empty() || target.is_empty() {
        return Prf::default();
    }
    let mut bag: HashMap<&str, usize> = HashMap::new();
    for t in target {
        *bag.entry(t).or_insert(0) += 1;
    }
    let mut common = 0usize;
    for p in pred {
        if let Some(c) = bag.get_mut(p.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    Prf::new(common as f64 / pred.len() as f64, common as f64 / target.len() as f64)
}

fn greedy_match(pred: &[String], target: &[String], embedder: &dyn EmbeddingClient) -> Result<Prf, EvalError> {
    if pred.is_empty() || target.is_empty() {
        return Ok(Prf::default());
    }
    let mut vocab: Vec<String> = pred.iter().chain(target).cloned().collect();
    vocab.sort();
    vocab.dedup();
    let vectors = embedder.embed(&vocab).map_err(EvalError::Scorer)?;
    if vectors.len() != vocab.len() {
        return Err(EvalError::ScorerShape {
            expected: vocab.len(),
            got: vectors.len(),
        });
    }
    let lookup: HashMap<&str, &[f32]> = vocab.iter().map(String::as_str).zip(vectors.iter().map(Vec::as_slice)).collect();
    let sim = |a: &str, b: &str| -> f64 { cosine(lookup[a], lookup[b]).unwrap_or(0.0) };
    let side = |from: &[String], to: &[String]| -> f64 {
        from.iter()
            .map(|a| to.iter().map(|b| sim(a, b)).fold(f64::NEG_INFINITY, f64::max))
            .sum::<f64>()
            / from.len() as f64
    };
    Ok(Prf::new(side(pred, target), side(target, pred)))
}

/// Precision/recall/F1 of `pred` against `target`. Empty text scores zero.
pub fn score_similarity(pred: &str, target: &str, scorer: &Scorer<'_>) -> Result<Prf, EvalError> {
    let (p, t) = (tokenize(pred), tokenize(target));
    match scorer {
        Scorer::TokenOverlap => Ok(token_overlap(&p, &t)),
        Scorer::EmbeddingGreedy(e) => greedy_match(&p, &t, *e),
    }
}

pub struct EvalConfig<'a> {
    pub decode: DecodeConfig,
    pub scorer: Scorer<'a>,
    pub retry: RetryPolicy,
    /// Concurrent requests in flight.
    pub jobs: usize,
}

impl Default for EvalConfig<'_> {
    fn default() -> Self {
        Self {
            decode: DecodeConfig::default(),
            scorer: Scorer::TokenOverlap,
            retry: RetryPolicy::default(),
            jobs: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub task: TaskKind,
    pub metric: &'static str,
    /// `None` when every instance of the task failed.
    pub value: Option<f64>,
    pub n: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStatus {
    Ok,
    AllFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<MetricRow>,
    pub evaluated: usize,
    pub failed: usize,
    pub status: EvalStatus,
    pub runtime_secs: f64,
}

impl EvalReport {
    pub fn get(&self, task: TaskKind, metric: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.task == task && r.metric == metric)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,metric,value,n,failed\n");
        for r in &self.rows {
            let value = r.value.map(|v| format!("{v:.6}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{}", r.task, r.metric, value, r.n, r.failed);
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<20} {:<10} {:>8} {:>6} {:>6}\n", "task", "metric", "value", "n", "failed");
        for r in &self.rows {
            let value = r.value.map(|v| format!("{:.2}", v * 100.0)).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<20} {:<10} {:>8} {:>6} {:>6}",
                r.task.as_str(),
                r.metric,
                value,
                r.n,
                r.failed
            );
        }
        let _ = writeln!(
            out,
            "evaluated {} failed {} in {:.1}s{}",
            self.evaluated,
            self.failed,
            self.runtime_secs,
            if self.status == EvalStatus::AllFailed { " (ALL FAILED)" } else { "" }
        );
        out
    }
}

enum Outcome {
    Accuracy(bool),
    Similarity(Prf),
    Failed,
}

/// Runs every instance and aggregates per task, in task order.
pub fn evaluate_suite(dataset: &TaskDataset, model: &dyn CompletionClient, cfg: &EvalConfig<'_>) -> Result<EvalReport, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::Empty);
    }
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    let completions: Vec<Option<String>> = pool.install(|| {
        dataset
            .instances
            .par_iter()
            .map(|inst| match run_inference(inst, model, &cfg.decode, &cfg.retry) {
                Ok(text) => Some(text),
                Err(e) => {
                    log::warn!("{} instance failed: {e}", inst.task);
                    None
                }
            })
            .collect()
    });

    let mut outcomes = Vec::with_capacity(completions.len());
    for (inst, pred) in dataset.instances.iter().zip(&completions) {
        outcomes.push(match pred {
            None => Outcome::Failed,
            Some(p) if inst.task.is_predictive() => Outcome::Accuracy(is_correct(p, &inst.target)),
            Some(p) => Outcome::Similarity(score_similarity(p, &inst.target, &cfg.scorer)?),
        });
    }

    let mut by_task: BTreeMap<TaskKind, Vec<&Outcome>> = BTreeMap::new();
    for (inst, o) in dataset.instances.iter().zip(&outcomes) {
        by_task.entry(inst.task).or_default().push(o);
    }
    let mut rows = Vec::new();
    for (task, outs) in by_task {
        let failed = outs.iter().filter(|o| matches!(o, Outcome::Failed)).count();
        let n = outs.len() - failed;
        let mean = |f: &dyn Fn(&Outcome) -> Option<f64>| -> Option<f64> {
            (n > 0).then(|| outs.iter().filter_map(|o| f(o)).sum::<f64>() / n as f64)
        };
        let row = |metric, value| MetricRow { task, metric, value, n, failed };
        if task.is_predictive() {
            rows.push(row(
                "accuracy",
                mean(&|o| match o {
                    Outcome::Accuracy(hit) => Some(if *hit { 1.0 } else { 0.0 }),
                    _ => None,
                }),
            ));
        } else {
            let field = |pick: fn(&Prf) -> f64| {
                mean(&move |o| match o {
                    Outcome::Similarity(prf) => Some(pick(prf)),
                    _ => None,
                })
            };
            rows.push(row("precision", field(|p| p.precision)));
            rows.push(row("recall", field(|p| p.recall)));
            rows.push(row("f1", field(|p| p.f1)));
        }
    }
    let failed = outcomes.iter().filter(|o| matches!(o, Outcome::Failed)).count();
    let evaluated = outcomes.len() - failed;
    Ok(EvalReport {
        rows,
        evaluated,
        failed,
        status: if evaluated == 0 { EvalStatus::AllFailed } else { EvalStatus::Ok },
        runtime_secs: started.elapsed().as_secs_f64(),
    })
}
