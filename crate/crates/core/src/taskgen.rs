//! Instruction and benchmark datasets from a citation graph.
//!
//! Node tasks: title generation, abstract completion, introduction to
//! abstract, related-work generation. Edge tasks: link prediction (one
//! negative per positive), citation sentence, recommendation (one positive
//! among ten sampled non-citations).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::fnv1a;
use crate::graph::{CitationGraph, GraphSplit, NodeAttrs};
use crate::jsonl::{read_jsonl, write_jsonl};
use crate::latex::split_sentences;

pub const TRAIN_FILE: &str = "train.jsonl";
pub const BENCH_FILE: &str = "bench.jsonl";
pub const RECOMMENDATION_NEGATIVES: usize = 10;
pub const DEFAULT_COMPLETION_FRACTION: f64 = 0.5;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("completion fraction must be in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("template for {0} is empty")]
    EmptyTemplate(TaskKind),
    #[error("invalid templates: {0}")]
    Templates(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    TitleGen,
    AbstractCompletion,
    RelatedWorkGen,
    IntroToAbstract,
    LinkPred,
    CitationSentence,
    Recommendation,
}

impl TaskKind {
    pub const ALL: [TaskKind; 7] = [
        TaskKind::TitleGen,
        TaskKind::AbstractCompletion,
        TaskKind::RelatedWorkGen,
        TaskKind::IntroToAbstract,
        TaskKind::LinkPred,
        TaskKind::CitationSentence,
        TaskKind::Recommendation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::TitleGen => "title_gen",
            TaskKind::AbstractCompletion => "abstract_completion",
            TaskKind::RelatedWorkGen => "related_work_gen",
            TaskKind::IntroToAbstract => "intro_to_abstract",
            TaskKind::LinkPred => "link_pred",
            TaskKind::CitationSentence => "citation_sentence",
            TaskKind::Recommendation => "recommendation",
        }
    }

    /// Scored by accuracy rather than text similarity.
    pub fn is_predictive(self) -> bool {
        matches!(self, TaskKind::LinkPred | TaskKind::Recommendation)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown task {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Bench,
}

impl Split {
    fn tag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Bench => "bench",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub task: TaskKind,
    pub prompt: String,
    pub target: String,
    /// Node ids the instance was built from; edge tasks list `[src, dst]`.
    pub provenance: Vec<String>,
    pub split: Split,
    /// Recommendation candidate ids in prompt order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<String>>,
}

impl TaskInstance {
    /// Every node id the instance mentions.
    pub fn referenced_ids(&self) -> impl Iterator<Item = &str> {
        self.provenance
            .iter()
            .chain(self.candidates.iter().flatten())
            .map(String::as_str)
    }
}

/// Prompt wording per task. `{name}` placeholders are filled from the node
/// or edge; unknown placeholders are left as written.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub title_gen: String,
    pub abstract_completion: String,
    pub related_work_gen: String,
    pub intro_to_abstract: String,
    pub link_pred: String,
    pub citation_sentence: String,
    pub recommendation: String,
}

impl Default for Templates {
    fn default() -> Self {
        serde_json::from_str(include_str!("../data/templates.json")).expect("bundled templates parse")
    }
}

impl Templates {
    pub fn from_file(path: &Path) -> Result<Self, TaskError> {
        let t: Templates = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        t.validate()?;
        Ok(t)
    }

    pub fn get(&self, kind: TaskKind) -> &str {
        match kind {
            TaskKind::TitleGen => &self.title_gen,
            TaskKind::AbstractCompletion => &self.abstract_completion,
            TaskKind::RelatedWorkGen => &self.related_work_gen,
            TaskKind::IntroToAbstract => &self.intro_to_abstract,
            TaskKind::LinkPred => &self.link_pred,
            TaskKind::CitationSentence => &self.citation_sentence,
            TaskKind::Recommendation => &self.recommendation,
        }
    }

    fn validate(&self) -> Result<(), TaskError> {
        match TaskKind::ALL.into_iter().find(|&k| self.get(k).trim().is_empty()) {
            Some(k) => Err(TaskError::EmptyTemplate(k)),
            None => Ok(()),
        }
    }
}

/// Single-pass `{name}` substitution, so inserted text is never re-scanned.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let name_len = after
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(after.len());
        let value = (after[name_len..].starts_with('}'))
            .then(|| vars.iter().find(|(k, _)| *k == &after[..name_len]))
            .flatten();
        match value {
            Some((_, v)) => {
                out.push_str(v);
                rest = &after[name_len + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    /// Share of abstract sentences given as the completion prompt.
    pub completion_fraction: f64,
    /// Also emit related-work instances without cited titles.
    pub plain_related_work: bool,
    #[serde(skip)]
    pub templates: Templates,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            completion_fraction: DEFAULT_COMPLETION_FRACTION,
            plain_related_work: false,
            templates: Templates::default(),
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<(), TaskError> {
        if !(self.completion_fraction > 0.0 && self.completion_fraction < 1.0) {
            return Err(TaskError::BadFraction(self.completion_fraction));
        }
        self.templates.validate()
    }
}

/// RNG stream for one instance, independent of generation order.
fn instance_rng(seed: u64, split: Split, task: TaskKind, ids: &[&str]) -> ChaCha8Rng {
    let mut key = Vec::with_capacity(64);
    key.extend_from_slice(&seed.to_le_bytes());
    key.extend_from_slice(split.tag().as_bytes());
    key.push(0);
    key.extend_from_slice(task.as_str().as_bytes());
    for id in ids {
        key.push(0);
        key.extend_from_slice(id.as_bytes());
    }
    ChaCha8Rng::seed_from_u64(fnv1a(&key))
}

fn instance(task: TaskKind, prompt: String, target: String, provenance: Vec<String>, split: Split) -> Option<TaskInstance> {
    if prompt.trim().is_empty() || target.trim().is_empty() {
        return None;
    }
    Some(TaskInstance {
        task,
        prompt,
        target,
        provenance,
        split,
        candidates: None,
    })
}

/// Sentence count of the completion prompt: `floor(n * fraction)` kept
/// within `[1, n - 1]`.
pub fn completion_cut(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).floor() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Title, abstract-completion, intro-to-abstract and related-work instances
/// for one node.
pub fn gen_node_tasks(node: &NodeAttrs, g: &CitationGraph, cfg: &TaskConfig, split: Split) -> Vec<TaskInstance> {
    let t = &cfg.templates;
    let mut out = Vec::new();
    if node.title.trim().is_empty() || node.abstract_text.trim().is_empty() {
        log::warn!("node {} lacks title or abstract; no node tasks", node.id);
        return out;
    }
    let prov = || vec![node.id.clone()];

    out.extend(instance(
        TaskKind::TitleGen,
        render(&t.title_gen, &[("abstract", &node.abstract_text), ("title", &node.title)]),
        node.title.clone(),
        prov(),
        split,
    ));

    let sentences = split_sentences(&node.abstract_text);
    if sentences.len() >= 2 {
        let cut = completion_cut(sentences.len(), cfg.completion_fraction);
        let prefix = sentences[..cut].join(" ");
        out.extend(instance(
            TaskKind::AbstractCompletion,
            render(
                &t.abstract_completion,
                &[("title", &node.title), ("abstract_prefix", &prefix)],
            ),
            sentences[cut..].join(" "),
            prov(),
            split,
        ));
    }

    if let Some(intro) = node.introduction.as_deref().filter(|s| !s.trim().is_empty()) {
        out.extend(instance(
            TaskKind::IntroToAbstract,
            render(&t.intro_to_abstract, &[("introduction", intro), ("title", &node.title)]),
            node.abstract_text.clone(),
            prov(),
            split,
        ));
    }

    if let Some(related) = node.related_work.as_deref().filter(|s| !s.trim().is_empty()) {
        let cited: Vec<&str> = g
            .out_neighbors(&node.id)
            .into_iter()
            .filter_map(|id| g.node(id))
            .map(|n| n.title.as_str())
            .collect();
        let listing = if cited.is_empty() {
            String::new()
        } else {
            let mut s = String::from("Cited papers:\n");
            for title in &cited {
                s.push_str("- ");
                s.push_str(title);
                s.push('\n');
            }
            s
        };
        let vars = |cited_titles: &str| {
            render(
                &t.related_work_gen,
                &[
                    ("title", &node.title),
                    ("abstract", &node.abstract_text),
                    ("cited_titles", cited_titles),
                ],
            )
        };
        out.extend(instance(TaskKind::RelatedWorkGen, vars(&listing), related.to_owned(), prov(), split));
        if cfg.plain_related_work && !cited.is_empty() {
            out.extend(instance(TaskKind::RelatedWorkGen, vars(""), related.to_owned(), prov(), split));
        }
    }
    out
}

fn pair_vars<'a>(src: &'a NodeAttrs, dst: &'a NodeAttrs) -> [(&'static str, &'a str); 4] {
    [
        ("src_title", &src.title),
        ("src_abstract", &src.abstract_text),
        ("dst_title", &dst.title),
        ("dst_abstract", &dst.abstract_text),
    ]
}

fn endpoints<'g>(g: &'g CitationGraph, src: &str, dst: &str) -> Option<(&'g NodeAttrs, &'g NodeAttrs)> {
    Some((g.node(src)?, g.node(dst)?))
}

/// Positive `(u, v)` and negative `(u, w)` link-prediction instances.
///
/// `w` is uniform over nodes other than `u`, `v` and everything `u` cites.
/// When no such node exists both are skipped so the 1:1 balance holds.
pub fn gen_link_prediction(
    src: &str,
    dst: &str,
    g: &CitationGraph,
    cfg: &TaskConfig,
    rng: &mut ChaCha8Rng,
    split: Split,
) -> Option<(TaskInstance, TaskInstance)> {
    let (u, v) = endpoints(g, src, dst)?;
    let cited = g.out_neighbors(src);
    let pool: Vec<&str> = g
        .node_ids()
        .filter(|&id| id != src && id != dst && !cited.contains(id))
        .collect();
    let Some(&neg) = pool.choose(rng) else {
        log::warn!("no negative available for edge ({src}, {dst}); link_pred pair skipped");
        return None;
    };
    let w = g.node(neg)?;
    let template = &cfg.templates.link_pred;
    let pos = instance(
        TaskKind::LinkPred,
        render(template, &pair_vars(u, v)),
        "yes".into(),
        vec![src.to_owned(), dst.to_owned()],
        split,
    )?;
    let neg = instance(
        TaskKind::LinkPred,
        render(template, &pair_vars(u, w)),
        "no".into(),
        vec![src.to_owned(), neg.to_owned()],
        split,
    )?;
    Some((pos, neg))
}

/// One instance per sentence stored on the edge.
pub fn gen_citation_sentence(
    src: &str,
    dst: &str,
    sentences: &[String],
    g: &CitationGraph,
    cfg: &TaskConfig,
    split: Split,
) -> Vec<TaskInstance> {
    let Some((u, v)) = endpoints(g, src, dst) else {
        return Vec::new();
    };
    let prompt = render(&cfg.templates.citation_sentence, &pair_vars(u, v));
    sentences
        .iter()
        .filter_map(|s| {
            instance(
                TaskKind::CitationSentence,
                prompt.clone(),
                s.clone(),
                vec![src.to_owned(), dst.to_owned()],
                split,
            )
        })
        .collect()
}

/// `v` among ten distinct papers `u` does not cite, shuffled; the target is
/// the position of `v`.
pub fn gen_recommendation(
    src: &str,
    dst: &str,
    g: &CitationGraph,
    cfg: &TaskConfig,
    rng: &mut ChaCha8Rng,
    split: Split,
) -> Option<TaskInstance> {
    let (u, _) = endpoints(g, src, dst)?;
    let cited = g.out_neighbors(src);
    let pool: Vec<&str> = g
        .node_ids()
        .filter(|&id| id != src && !cited.contains(id))
        .collect();
    if pool.len() < RECOMMENDATION_NEGATIVES {
        log::warn!(
            "only {} non-cited papers for ({src}, {dst}); recommendation skipped",
            pool.len()
        );
        return None;
    }
    let mut candidates: Vec<&str> = pool.choose_multiple(rng, RECOMMENDATION_NEGATIVES).copied().collect();
    candidates.push(dst);
    candidates.shuffle(rng);
    let target = candidates.iter().position(|&c| c == dst).expect("dst was pushed");

    let mut listing = String::new();
    for (i, id) in candidates.iter().enumerate() {
        let title = g.node(id).map_or("", |n| n.title.as_str());
        listing.push_str(&format!("{i}. {title}\n"));
    }
    let prompt = render(
        &cfg.templates.recommendation,
        &[
            ("src_title", &u.title),
            ("src_abstract", &u.abstract_text),
            ("candidates", listing.trim_end()),
        ],
    );
    let mut inst = instance(
        TaskKind::Recommendation,
        prompt,
        target.to_string(),
        vec![src.to_owned(), dst.to_owned()],
        split,
    )?;
    inst.candidates = Some(candidates.into_iter().map(str::to_owned).collect());
    Some(inst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDataset {
    pub instances: Vec<TaskInstance>,
    pub seed: u64,
}

impl TaskDataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn counts(&self) -> BTreeMap<TaskKind, usize> {
        let mut counts = BTreeMap::new();
        for inst in &self.instances {
            *counts.entry(inst.task).or_insert(0) += 1;
        }
        counts
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for inst in &self.instances {
            out.push_str(&serde_json::to_string(inst).expect("instances serialize"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        write_jsonl(path, &self.instances)
    }

    /// Reads instances; the seed is not stored in the file and reads as 0.
    pub fn load(path: &Path) -> std::io::Result<Self> {
        Ok(Self {
            instances: read_jsonl(path)?,
            seed: 0,
        })
    }
}

/// All tasks over one graph. Node tasks come first in id order, then edge
/// tasks in edge order; per-instance RNG streams make the output
/// independent of thread count.
pub fn generate_dataset(g: &CitationGraph, seed: u64, split: Split, cfg: &TaskConfig) -> TaskDataset {
    let nodes: Vec<&NodeAttrs> = g.nodes().collect();
    let mut instances: Vec<TaskInstance> = nodes
        .par_iter()
        .map(|n| gen_node_tasks(n, g, cfg, split))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let edges: Vec<(&str, &str, &[String])> = g.edges().collect();
    let edge_tasks: Vec<Vec<TaskInstance>> = edges
        .par_iter()
        .map(|&(src, dst, sentences)| {
            let mut out = Vec::new();
            let mut rng = instance_rng(seed, split, TaskKind::LinkPred, &[src, dst]);
            if let Some((pos, neg)) = gen_link_prediction(src, dst, g, cfg, &mut rng, split) {
                out.push(pos);
                out.push(neg);
            }
            out.extend(gen_citation_sentence(src, dst, sentences, g, cfg, split));
            let mut rng = instance_rng(seed, split, TaskKind::Recommendation, &[src, dst]);
            out.extend(gen_recommendation(src, dst, g, cfg, &mut rng, split));
            out
        })
        .collect();
    instances.extend(edge_tasks.into_iter().flatten());
    TaskDataset { instances, seed }
}

/// Train instances from the train side, bench instances from the held-out
/// side.
pub fn assemble_dataset(split: &GraphSplit, seed: u64, cfg: &TaskConfig) -> Result<(TaskDataset, TaskDataset), TaskError> {
    cfg.validate()?;
    for (side, g) in [("train", &split.train), ("held-out", &split.heldout)] {
        if g.node_count() == 0 {
            log::warn!("{side} graph is empty; its dataset will be empty");
        }
    }
    Ok((
        generate_dataset(&split.train, seed, Split::Train, cfg),
        generate_dataset(&split.heldout, seed, Split::Bench, cfg),
    ))
}

/// Writes `train.jsonl` and `bench.jsonl` under `dir`.
pub fn write_datasets(dir: &Path, train: &TaskDataset, bench: &TaskDataset) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    train.save(&dir.join(TRAIN_FILE))?;
    bench.save(&dir.join(BENCH_FILE))
}

/// Node ids referenced by a dataset.
pub fn referenced_nodes(ds: &TaskDataset) -> BTreeSet<&str> {
    ds.instances.iter().flat_map(|i| i.referenced_ids()).collect()
}
