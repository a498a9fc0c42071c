//! Domain citation subgraph: assembly, hold-out split, in-degree ranking.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::ConceptSet;
use crate::corpus::CorpusStore;
use crate::latex::ProcessedDoc;

pub const DEFAULT_HOLDOUT: f64 = 0.1;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("hold-out fraction must be in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("split of {nodes} nodes at fraction {fraction} leaves one side empty")]
    DegenerateSplit { nodes: usize, fraction: f64 },
    #[error("edge ({0}, {1}) references a missing node")]
    DanglingEdge(String, String),
    #[error("self-loop on {0}")]
    SelfLoop(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lowercased title with LaTeX commands, braces, math shifts and
/// punctuation removed and whitespace collapsed.
pub fn normalize_title(title: &str) -> String {
    let mut cleaned = String::with_capacity(title.len());
    let mut chars = title.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\\' {
            // control word or control symbol
            match chars.peek() {
                Some(n) if n.is_ascii_alphabetic() => {
                    while chars.peek().is_some_and(|n| n.is_ascii_alphabetic()) {
                        chars.next();
                    }
                }
                Some(_) => {
                    chars.next();
                }
                None => {}
            }
            cleaned.push(' ');
            continue;
        }
        if c.is_alphanumeric() {
            cleaned.extend(c.to_lowercase());
        } else if c.is_whitespace() || !(c == '{' || c == '}' || c == '\'' || c == '’') {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeAttrs {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub introduction: Option<String>,
    pub related_work: Option<String>,
    /// Level-major 3x3 labels.
    pub concepts: Option<[[String; 3]; 3]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src: String,
    pub dst: String,
    pub sentences: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    nodes: Vec<NodeAttrs>,
    edges: Vec<EdgeRecord>,
}

/// Directed citation graph; an edge `(u, v)` means `u` cites `v`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CitationGraph {
    nodes: BTreeMap<String, NodeAttrs>,
    edges: BTreeMap<(String, String), Vec<String>>,
}

impl CitationGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: NodeAttrs) {
        self.nodes.insert(node.id.clone(), node);
    }

    /// Adds `sentences` to edge `(src, dst)`, creating it if needed;
    /// sentences already on the edge are not duplicated.
    pub fn add_edge(&mut self, src: &str, dst: &str, sentences: &[String]) -> Result<(), GraphError> {
        if src == dst {
            return Err(GraphError::SelfLoop(src.to_owned()));
        }
        if !self.nodes.contains_key(src) || !self.nodes.contains_key(dst) {
            return Err(GraphError::DanglingEdge(src.to_owned(), dst.to_owned()));
        }
        let entry = self.edges.entry((src.to_owned(), dst.to_owned())).or_default();
        for s in sentences {
            if !entry.contains(s) {
                entry.push(s.clone());
            }
        }
        Ok(())
    }

    pub fn node(&self, id: &str) -> Option<&NodeAttrs> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeAttrs> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, src: &str, dst: &str) -> bool {
        self.edges.contains_key(&(src.to_owned(), dst.to_owned()))
    }

    /// `(src, dst, sentences)` in `(src, dst)` order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, &[String])> {
        self.edges
            .iter()
            .map(|((s, d), sent)| (s.as_str(), d.as_str(), sent.as_slice()))
    }

    /// Targets cited by `src`.
    pub fn out_neighbors(&self, src: &str) -> BTreeSet<&str> {
        self.edges
            .range((src.to_owned(), String::new())..)
            .take_while(|((s, _), _)| s == src)
            .map(|((_, d), _)| d.as_str())
            .collect()
    }

    pub fn to_json(&self) -> Result<String, GraphError> {
        let file = GraphFile {
            nodes: self.nodes.values().cloned().collect(),
            edges: self
                .edges
                .iter()
                .map(|((s, d), sent)| EdgeRecord {
                    src: s.clone(),
                    dst: d.clone(),
                    sentences: sent.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parses `graph.json`, checking closure and the no-self-loop rule.
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(text)?;
        let mut g = CitationGraph::new();
        for n in file.nodes {
            g.add_node(n);
        }
        for e in file.edges {
            g.add_edge(&e.src, &e.dst, &e.sentences)?;
        }
        Ok(g)
    }

    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Subgraph induced by `ids`: those nodes and the edges between them.
    pub fn induced(&self, ids: &BTreeSet<&str>) -> CitationGraph {
        let nodes = self
            .nodes
            .iter()
            .filter(|(id, _)| ids.contains(id.as_str()))
            .map(|(id, n)| (id.clone(), n.clone()))
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|((s, d), _)| ids.contains(s.as_str()) && ids.contains(d.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        CitationGraph { nodes, edges }
    }
}

/// Counters for mentions that did not become edges.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildReport {
    pub mentions: usize,
    pub unresolved: usize,
    pub unmatched: usize,
    pub outside_selection: usize,
    pub self_citations: usize,
    pub missing_docs: usize,
}

impl BuildReport {
    pub fn dropped(&self) -> usize {
        self.unresolved + self.unmatched + self.outside_selection + self.self_citations
    }
}

/// Builds the subgraph over `selected`.
///
/// Each selected paper becomes a node with corpus metadata, processed
/// sections and concepts. A mention in `u` whose resolved title normalizes
/// to the title of selected paper `v != u` adds edge `(u, v)` carrying the
/// mention's sentence. Selected ids absent from the corpus are skipped.
pub fn build_subgraph(
    selected: &BTreeSet<String>,
    docs: &[ProcessedDoc],
    corpus: &CorpusStore,
    concepts: &HashMap<String, ConceptSet>,
) -> (CitationGraph, BuildReport) {
    let mut graph = CitationGraph::new();
    let mut report = BuildReport::default();
    let docs_by_id: HashMap<&str, &ProcessedDoc> =
        docs.iter().map(|d| (d.paper_id.as_str(), d)).collect();

    for id in selected {
        let Some(record) = corpus.get(id) else {
            log::warn!("selected paper {id} is not in the corpus; skipped");
            continue;
        };
        let doc = docs_by_id.get(id.as_str());
        if doc.is_none() {
            report.missing_docs += 1;
        }
        graph.add_node(NodeAttrs {
            id: id.clone(),
            title: record.title.clone(),
            abstract_text: record.abstract_text.clone(),
            introduction: doc.and_then(|d| d.introduction.clone()),
            related_work: doc.and_then(|d| d.related_work.clone()),
            concepts: concepts.get(id).map(|c| c.levels.clone()),
        });
    }

    let sources: Vec<String> = graph.node_ids().map(str::to_owned).collect();
    for src in &sources {
        let src = src.as_str();
        let Some(doc) = docs_by_id.get(src) else {
            continue;
        };
        for mention in &doc.citations {
            report.mentions += 1;
            let Some(title) = &mention.resolved_title else {
                report.unresolved += 1;
                continue;
            };
            let Some(target) = corpus.get_by_title(title) else {
                report.unmatched += 1;
                continue;
            };
            if target.paper_id == src {
                report.self_citations += 1;
                continue;
            }
            if !graph.nodes.contains_key(&target.paper_id) {
                report.outside_selection += 1;
                continue;
            }
            let dst = target.paper_id.clone();
            graph
                .add_edge(src, &dst, std::slice::from_ref(&mention.sentence))
                .expect("both endpoints are nodes and distinct");
        }
    }
    (graph, report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSplit {
    pub train: CitationGraph,
    pub heldout: CitationGraph,
    pub fraction: f64,
    pub seed: u64,
}

/// Node-level hold-out: `round(fraction * n)` nodes chosen by a seeded
/// shuffle go to the held-out side; cross-partition edges are dropped.
pub fn holdout_split(g: &CitationGraph, fraction: f64, seed: u64) -> Result<GraphSplit, GraphError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(GraphError::BadFraction(fraction));
    }
    let n = g.node_count();
    let held = (fraction * n as f64).round() as usize;
    if held == 0 || held >= n {
        return Err(GraphError::DegenerateSplit { nodes: n, fraction });
    }
    let mut ids: Vec<&str> = g.node_ids().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let heldout_ids: BTreeSet<&str> = ids[..held].iter().copied().collect();
    let train_ids: BTreeSet<&str> = ids[held..].iter().copied().collect();
    Ok(GraphSplit {
        train: g.induced(&train_ids),
        heldout: g.induced(&heldout_ids),
        fraction,
        seed,
    })
}

/// Nodes by descending in-degree, ties by ascending id.
pub fn top_indegree(g: &CitationGraph, n: usize) -> Vec<(String, usize)> {
    let mut degree: BTreeMap<&str, usize> = g.node_ids().map(|id| (id, 0)).collect();
    for (_, dst, _) in g.edges() {
        *degree.get_mut(dst).expect("edge targets are nodes") += 1;
    }
    let mut ranked: Vec<(String, usize)> = degree.into_iter().map(|(id, d)| (id.to_owned(), d)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(n);
    ranked
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub token_estimate: usize,
}

fn words(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Node/edge counts and a whitespace-token count over every text attribute
/// (title, abstract, introduction, related work, concept labels, edge
/// sentences).
pub fn graph_stats(g: &CitationGraph) -> GraphStats {
    let node_tokens: usize = g
        .nodes()
        .map(|n| {
            words(&n.title)
                + words(&n.abstract_text)
                + n.introduction.as_deref().map_or(0, words)
                + n.related_work.as_deref().map_or(0, words)
                + n.concepts
                    .as_ref()
                    .map_or(0, |c| c.iter().flatten().map(|l| words(l)).sum())
        })
        .sum();
    let edge_tokens: usize = g
        .edges()
        .map(|(_, _, s)| s.iter().map(|x| words(x)).sum::<usize>())
        .sum();
    GraphStats {
        nodes: g.node_count(),
        edges: g.edge_count(),
        token_estimate: node_tokens + edge_tokens,
    }
}
