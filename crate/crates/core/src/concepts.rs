//! Three-level concept annotation and concept embeddings.
//!
//! Each paper is annotated with nine labels: three per abstraction level,
//! level 1 being broad disciplines and level 3 fine-grained themes. Labels
//! come from an LLM prompted once per level; each level's three labels are
//! joined with `"; "` and embedded as a single vector.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{
    ClientError, CompletionClient, CompletionRequest, EmbeddingClient, RetryPolicy,
};
use crate::corpus::PaperRecord;

pub const LEVELS: usize = 3;
pub const LABELS_PER_LEVEL: usize = 3;

/// Level used in `embeddings.jsonl` rows for the title+abstract vector.
pub const TEXT_LEVEL: u8 = 0;

const LEVEL_1_TEMPLATE: &str = "Given a scientific paper, identify the three major academic disciplines or broad scientific fields that are most relevant to the paper's content. Avoid sub-disciplines or specific research areas. Focus on the fundamental scientific domains that encompass the paper's core concepts and methodologies. Present these disciplines in a simple numbered list. Here is the title and abstract of the paper: {Title}{Abstract}";
const LEVEL_2_TEMPLATE: &str = "Given a scientific paper, identify the three major scientific fields that are most relevant to the paper's content. Present these disciplines in a simple numbered list. Here is the title and abstract of the paper: {Title}{Abstract}";
const LEVEL_3_TEMPLATE: &str = "Given a scientific paper, generate a list of three very high-level topics of maximum three words that summarize the main areas covered in the paper. These topics should be broad categories that capture the key themes of the paper. Present these disciplines in a simple numbered list. Here is the title and abstract of the paper: {Title}{Abstract}";

#[derive(Debug, Error)]
pub enum ConceptError {
    #[error("concept level must be 1, 2 or 3, got {0}")]
    BadLevel(u8),
    #[error("could not find three numbered items in completion: {raw:?}")]
    Parse { raw: String },
    #[error("level {level}: {source}")]
    AtLevel {
        level: u8,
        #[source]
        source: Box<ConceptError>,
    },
    #[error("generation failed: {0}")]
    Generation(#[from] ClientError),
    #[error("embedding failed: {0}")]
    Embedding(ClientError),
    #[error("embedding dimension {got} does not match store dimension {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("embedding has non-finite entries")]
    NonFinite,
    #[error("empty concept label")]
    EmptyLabel,
    #[error("row {index}: {message}")]
    Row { index: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Abstraction level of a concept annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(u8);

impl Level {
    pub const ALL: [Level; 3] = [Level(1), Level(2), Level(3)];

    pub fn new(level: u8) -> Result<Self, ConceptError> {
        if (1..=3).contains(&level) {
            Ok(Level(level))
        } else {
            Err(ConceptError::BadLevel(level))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    fn index(self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn template(self) -> &'static str {
        match self.0 {
            1 => LEVEL_1_TEMPLATE,
            2 => LEVEL_2_TEMPLATE,
            _ => LEVEL_3_TEMPLATE,
        }
    }
}

/// Nine labels per paper: three for each of the three levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptSet {
    pub paper_id: String,
    pub levels: [[String; LABELS_PER_LEVEL]; LEVELS],
}

impl ConceptSet {
    pub fn level(&self, level: Level) -> &[String; LABELS_PER_LEVEL] {
        &self.levels[level.index()]
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.levels.iter().flatten().map(String::as_str)
    }
}

/// Fills the level's prompt template with the paper's title and abstract.
pub fn build_concept_prompt(record: &PaperRecord, level: Level) -> String {
    level
        .template()
        .replace("{Title}", &record.title)
        .replace("{Abstract}", &record.abstract_text)
}

fn list_item_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*\d+[.)]\s*(.*?)\s*$").unwrap())
}

/// Extracts the first three items of a numbered list (`1.` or `1)` prefixes).
pub fn parse_numbered_list(completion: &str) -> Result<[String; 3], ConceptError> {
    let mut items = Vec::with_capacity(3);
    for line in completion.lines() {
        let Some(caps) = list_item_re().captures(line) else {
            continue;
        };
        let label = caps[1].trim_end_matches('.').trim();
        if label.is_empty() {
            continue;
        }
        items.push(label.to_owned());
        if items.len() == 3 {
            break;
        }
    }
    items.try_into().map_err(|_| ConceptError::Parse {
        raw: completion.to_owned(),
    })
}

/// Prompts once per level and parses each completion into three labels.
pub fn generate_concepts(
    record: &PaperRecord,
    llm: &dyn CompletionClient,
    retry: &RetryPolicy,
) -> Result<ConceptSet, ConceptError> {
    let mut levels: [[String; 3]; 3] = Default::default();
    for level in Level::ALL {
        let request = CompletionRequest::greedy(build_concept_prompt(record, level), None);
        let at_level = |e: ConceptError| ConceptError::AtLevel {
            level: level.get(),
            source: Box::new(e),
        };
        let completion = retry
            .run(|| llm.complete(&request))
            .map_err(|e| at_level(e.into()))?;
        levels[level.index()] = parse_numbered_list(&completion).map_err(at_level)?;
    }
    Ok(ConceptSet {
        paper_id: record.paper_id.clone(),
        levels,
    })
}

/// Embeds the `"; "`-joined labels of one level as a single vector.
pub fn level_embedding(
    labels: &[String],
    embedder: &dyn EmbeddingClient,
    expected_dim: Option<usize>,
) -> Result<Vec<f32>, ConceptError> {
    if labels.iter().any(|l| l.trim().is_empty()) {
        return Err(ConceptError::EmptyLabel);
    }
    let joined = labels.join("; ");
    let mut vectors = embedder
        .embed(std::slice::from_ref(&joined))
        .map_err(ConceptError::Embedding)?;
    let vector = vectors.pop().ok_or_else(|| {
        ConceptError::Embedding(ClientError::Other("embedder returned no vectors".into()))
    })?;
    check_vector(&vector, expected_dim)?;
    Ok(vector)
}

fn check_vector(vector: &[f32], expected_dim: Option<usize>) -> Result<(), ConceptError> {
    if let Some(expected) = expected_dim {
        if vector.len() != expected {
            return Err(ConceptError::DimMismatch {
                expected,
                got: vector.len(),
            });
        }
    }
    if vector.is_empty() {
        return Err(ConceptError::DimMismatch {
            expected: expected_dim.unwrap_or(1),
            got: 0,
        });
    }
    if vector.iter().any(|x| !x.is_finite()) {
        return Err(ConceptError::NonFinite);
    }
    Ok(())
}

/// `concepts.jsonl` row.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConceptRow {
    paper_id: String,
    level: u8,
    labels: Vec<String>,
}

pub fn save_concepts(path: &Path, sets: &[ConceptSet]) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for set in sets {
        for level in Level::ALL {
            let row = ConceptRow {
                paper_id: set.paper_id.clone(),
                level: level.get(),
                labels: set.level(level).to_vec(),
            };
            serde_json::to_writer(&mut out, &row)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()
}

/// Loads `concepts.jsonl`; papers lacking any of the three levels are skipped.
pub fn load_concepts(path: &Path) -> Result<Vec<ConceptSet>, ConceptError> {
    let reader = BufReader::new(File::open(path)?);
    let mut partial: BTreeMap<String, [Option<[String; 3]>; 3]> = BTreeMap::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ConceptRow = serde_json::from_str(&line).map_err(|e| ConceptError::Row {
            index,
            message: e.to_string(),
        })?;
        let level = Level::new(row.level).map_err(|e| ConceptError::Row {
            index,
            message: e.to_string(),
        })?;
        let labels: [String; 3] = row.labels.try_into().map_err(|v: Vec<String>| ConceptError::Row {
            index,
            message: format!("expected 3 labels, got {}", v.len()),
        })?;
        partial.entry(row.paper_id).or_default()[level.index()] = Some(labels);
    }
    let mut sets = Vec::with_capacity(partial.len());
    for (paper_id, levels) in partial {
        match levels {
            [Some(a), Some(b), Some(c)] => sets.push(ConceptSet {
                paper_id,
                levels: [a, b, c],
            }),
            _ => log::warn!("concepts for {paper_id} are incomplete; skipped"),
        }
    }
    Ok(sets)
}

/// Vectors held for one paper.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PaperEmbeddings {
    pub levels: Option<[Vec<f32>; 3]>,
    pub text: Option<Vec<f32>>,
}

/// Per-paper level vectors and optional title+abstract vector, all one dim.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    dim: Option<usize>,
    entries: BTreeMap<String, PaperEmbeddings>,
}

impl EmbeddingStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_dim(dim: usize) -> Self {
        Self {
            dim: Some(dim),
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, paper_id: &str) -> Option<&PaperEmbeddings> {
        self.entries.get(paper_id)
    }

    /// Entries in ascending id order.
    pub fn entries(&self) -> &BTreeMap<String, PaperEmbeddings> {
        &self.entries
    }

    fn admit(&mut self, vector: &[f32]) -> Result<(), ConceptError> {
        check_vector(vector, self.dim)?;
        self.dim.get_or_insert(vector.len());
        Ok(())
    }

    pub fn insert_levels(
        &mut self,
        paper_id: impl Into<String>,
        levels: [Vec<f32>; 3],
    ) -> Result<(), ConceptError> {
        for v in &levels {
            self.admit(v)?;
        }
        self.entries.entry(paper_id.into()).or_default().levels = Some(levels);
        Ok(())
    }

    pub fn insert_text(
        &mut self,
        paper_id: impl Into<String>,
        vector: Vec<f32>,
    ) -> Result<(), ConceptError> {
        self.admit(&vector)?;
        self.entries.entry(paper_id.into()).or_default().text = Some(vector);
        Ok(())
    }

    /// Writes `embeddings.jsonl`: a `{"dim":N}` header then one row per vector.
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut out, &serde_json::json!({ "dim": self.dim }))?;
        out.write_all(b"\n")?;
        let mut row = |paper_id: &str, level: u8, vector: &[f32]| -> std::io::Result<()> {
            serde_json::to_writer(
                &mut out,
                &EmbeddingRowRef {
                    paper_id,
                    level,
                    vector,
                },
            )?;
            out.write_all(b"\n")
        };
        for (id, emb) in &self.entries {
            if let Some(text) = &emb.text {
                row(id, TEXT_LEVEL, text)?;
            }
            if let Some(levels) = &emb.levels {
                for (i, v) in levels.iter().enumerate() {
                    row(id, i as u8 + 1, v)?;
                }
            }
        }
        out.flush()
    }
}

#[derive(Serialize)]
struct EmbeddingRowRef<'a> {
    paper_id: &'a str,
    level: u8,
    vector: &'a [f32],
}

#[derive(Deserialize)]
struct EmbeddingRow {
    paper_id: String,
    level: u8,
    vector: Vec<f32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingHeader {
    dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    PartialLevels { paper_id: String },
}

/// Loads `embeddings.jsonl` rows `{paper_id, level, vector}`.
///
/// Level 0 is the title+abstract vector, 1..=3 the concept levels. Papers
/// with some but not all concept levels are skipped with a warning. A
/// dimension mismatch anywhere is fatal.
pub fn load_precomputed_embeddings(
    path: &Path,
) -> Result<(EmbeddingStore, Vec<LoadWarning>), ConceptError> {
    let reader = BufReader::new(File::open(path)?);
    let mut dim: Option<usize> = None;
    let mut grouped: BTreeMap<String, ([Option<Vec<f32>>; 3], Option<Vec<f32>>)> = BTreeMap::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if index == 0 {
            if let Ok(header) = serde_json::from_str::<EmbeddingHeader>(&line) {
                dim = header.dim;
                continue;
            }
        }
        let row_err = |message: String| ConceptError::Row { index, message };
        let row: EmbeddingRow = serde_json::from_str(&line).map_err(|e| row_err(e.to_string()))?;
        if row.level > 3 {
            return Err(row_err(format!("level {} out of range", row.level)));
        }
        match dim {
            Some(d) if d != row.vector.len() => {
                return Err(ConceptError::DimMismatch {
                    expected: d,
                    got: row.vector.len(),
                })
            }
            None => dim = Some(row.vector.len()),
            _ => {}
        }
        check_vector(&row.vector, dim)?;
        let entry = grouped.entry(row.paper_id.clone()).or_default();
        let slot = if row.level == TEXT_LEVEL {
            &mut entry.1
        } else {
            &mut entry.0[usize::from(row.level - 1)]
        };
        if slot.is_some() {
            return Err(row_err(format!(
                "duplicate level {} for {}",
                row.level, row.paper_id
            )));
        }
        *slot = Some(row.vector);
    }

    let mut store = match dim {
        Some(d) => EmbeddingStore::with_dim(d),
        None => EmbeddingStore::new(),
    };
    let mut warnings = Vec::new();
    for (paper_id, (levels, text)) in grouped {
        let present = levels.iter().filter(|l| l.is_some()).count();
        if present != 0 && present != 3 {
            log::warn!("{paper_id} has {present}/3 level embeddings; skipped");
            warnings.push(LoadWarning::PartialLevels { paper_id });
            continue;
        }
        if let [Some(a), Some(b), Some(c)] = levels {
            store.insert_levels(paper_id.clone(), [a, b, c])?;
        }
        if let Some(t) = text {
            store.insert_text(paper_id, t)?;
        }
    }
    Ok((store, warnings))
}
