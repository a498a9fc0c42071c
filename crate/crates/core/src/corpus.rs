//! Metadata snapshot ingestion.
//!
//! The snapshot is JSON-lines, one paper per line, in the layout of the public
//! arXiv metadata dump (`id`, `title`, `abstract`, space-separated
//! `categories`, `versions`). Parsing is a pure per-line function; index
//! construction is single-writer and keeps the first occurrence of a
//! duplicated id.
//!
//! On disk a corpus is `corpus.jsonl` (one normalized record per line) and
//! `corpus.idx`, a little-endian binary table of `id -> (offset, length)`
//! into the JSONL file.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::normalize_title;

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const INDEX_FILE: &str = "corpus.idx";

const INDEX_MAGIC: &[u8; 8] = b"LGCIDX01";
const PARSE_CHUNK: usize = 8192;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed JSON: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: field `{field}` is empty after normalization")]
    EmptyField { line: usize, field: &'static str },
    #[error("corrupt corpus index: {0}")]
    BadIndex(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl IngestError {
    /// Line-level errors leave the rest of the snapshot usable.
    pub fn is_recoverable(&self) -> bool {
        !matches!(self, IngestError::Io(_) | IngestError::BadIndex(_))
    }
}

/// One paper's metadata after normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PaperRecord {
    #[serde(rename = "id")]
    pub paper_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub categories: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
}

impl PaperRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization is infallible")
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCategories {
    Joined(String),
    List(Vec<String>),
}

#[derive(Deserialize)]
struct RawVersion {
    version: String,
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    title: Option<String>,
    #[serde(rename = "abstract")]
    abstract_text: Option<String>,
    categories: Option<RawCategories>,
    version: Option<String>,
    versions: Option<Vec<RawVersion>>,
}

/// Collapses every whitespace run (including newlines) to one space and trims.
pub fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Parses one snapshot line. `line_no` is 1-based and only used in errors.
pub fn parse_metadata_line(line: &str, line_no: usize) -> Result<PaperRecord, IngestError> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| IngestError::Json {
        line: line_no,
        message: e.to_string(),
    })?;
    let required = |value: Option<String>, field: &'static str| -> Result<String, IngestError> {
        let value = value.ok_or(IngestError::MissingField { line: line_no, field })?;
        let value = collapse_whitespace(&value);
        if value.is_empty() {
            return Err(IngestError::EmptyField { line: line_no, field });
        }
        Ok(value)
    };
    let paper_id = required(raw.id, "id")?;
    let title = required(raw.title, "title")?;
    let abstract_text = required(raw.abstract_text, "abstract")?;
    let categories = match raw.categories {
        Some(RawCategories::Joined(s)) => s.split_whitespace().map(str::to_owned).collect(),
        Some(RawCategories::List(v)) => v
            .iter()
            .flat_map(|s| s.split_whitespace())
            .map(str::to_owned)
            .collect(),
        None => Vec::new(),
    };
    let version = raw
        .version
        .or_else(|| raw.versions.and_then(|v| v.into_iter().last().map(|v| v.version)))
        .map(|v| v.trim().to_owned())
        .filter(|v| !v.is_empty());
    Ok(PaperRecord {
        paper_id,
        title,
        abstract_text,
        categories,
        version,
    })
}

/// Emitted for records skipped during indexing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestWarning {
    DuplicateId { paper_id: String },
}

/// In-memory corpus keyed by paper id and by normalized title.
#[derive(Debug, Default)]
pub struct CorpusStore {
    records: Vec<PaperRecord>,
    by_id: HashMap<String, usize>,
    by_title: HashMap<String, usize>,
    warnings: Vec<IngestWarning>,
}

impl CorpusStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a record unless its id is already present (keep-first).
    /// Returns false and records a warning on duplicates.
    pub fn insert(&mut self, record: PaperRecord) -> bool {
        if self.by_id.contains_key(&record.paper_id) {
            log::warn!("duplicate paper id {}; keeping first", record.paper_id);
            self.warnings.push(IngestWarning::DuplicateId {
                paper_id: record.paper_id,
            });
            return false;
        }
        let idx = self.records.len();
        let key = normalize_title(&record.title);
        if !key.is_empty() {
            self.by_title.entry(key).or_insert(idx);
        }
        self.by_id.insert(record.paper_id.clone(), idx);
        self.records.push(record);
        true
    }

    pub fn count(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, paper_id: &str) -> Option<&PaperRecord> {
        self.by_id.get(paper_id).map(|&i| &self.records[i])
    }

    /// Looks up by title; the argument is normalized before lookup.
    pub fn get_by_title(&self, title: &str) -> Option<&PaperRecord> {
        self.by_title
            .get(&normalize_title(title))
            .map(|&i| &self.records[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &PaperRecord> {
        self.records.iter()
    }

    pub fn warnings(&self) -> &[IngestWarning] {
        &self.warnings
    }

    /// Reads `corpus.jsonl` from `dir`.
    pub fn open(dir: &Path) -> Result<Self, IngestError> {
        let reader = BufReader::new(File::open(dir.join(CORPUS_FILE))?);
        let mut store = CorpusStore::new();
        for record in SnapshotReader::new(reader) {
            store.insert(record?);
        }
        Ok(store)
    }

    /// Writes `corpus.jsonl` and `corpus.idx` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), IngestError> {
        let mut writer = CorpusWriter::create(dir)?;
        for record in &self.records {
            writer.append(record)?;
        }
        writer.finish()?;
        Ok(())
    }
}

/// Builds a store from a record stream; duplicates are dropped with a warning.
pub fn build_corpus_index<I>(records: I) -> CorpusStore
where
    I: IntoIterator<Item = PaperRecord>,
{
    let mut store = CorpusStore::new();
    for record in records {
        store.insert(record);
    }
    store
}

/// Streams records from a JSON-lines reader, skipping blank lines.
pub struct SnapshotReader<R> {
    lines: io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> SnapshotReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
        }
    }
}

impl<R: BufRead> Iterator for SnapshotReader<R> {
    type Item = Result<PaperRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            match line {
                Err(e) => return Some(Err(e.into())),
                Ok(l) if l.trim().is_empty() => continue,
                Ok(l) => return Some(parse_metadata_line(&l, self.line_no)),
            }
        }
    }
}

/// Appends records to `corpus.jsonl` while tracking the offset index.
pub struct CorpusWriter {
    data: BufWriter<File>,
    index_path: std::path::PathBuf,
    offsets: Vec<(String, u64, u32)>,
    seen: HashSet<String>,
    position: u64,
}

impl CorpusWriter {
    pub fn create(dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            data: BufWriter::new(File::create(dir.join(CORPUS_FILE))?),
            index_path: dir.join(INDEX_FILE),
            offsets: Vec::new(),
            seen: HashSet::new(),
            position: 0,
        })
    }

    /// Returns false if the id was already written.
    pub fn append(&mut self, record: &PaperRecord) -> io::Result<bool> {
        if !self.seen.insert(record.paper_id.clone()) {
            return Ok(false);
        }
        let mut line = record.to_json_line();
        line.push('\n');
        self.data.write_all(line.as_bytes())?;
        let len = u32::try_from(line.len())
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "record exceeds 4 GiB"))?;
        self.offsets
            .push((record.paper_id.clone(), self.position, len));
        self.position += line.len() as u64;
        Ok(true)
    }

    pub fn finish(mut self) -> io::Result<usize> {
        self.data.flush()?;
        let mut idx = BufWriter::new(File::create(&self.index_path)?);
        idx.write_all(INDEX_MAGIC)?;
        idx.write_all(&(self.offsets.len() as u64).to_le_bytes())?;
        for (id, offset, len) in &self.offsets {
            idx.write_all(&(id.len() as u32).to_le_bytes())?;
            idx.write_all(id.as_bytes())?;
            idx.write_all(&offset.to_le_bytes())?;
            idx.write_all(&len.to_le_bytes())?;
        }
        idx.flush()?;
        Ok(self.offsets.len())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub records: usize,
    pub duplicates: usize,
    pub malformed: usize,
}

/// Streams a snapshot into `out_dir` without holding records in memory.
///
/// Lines are parsed in parallel chunks; insertion order follows the
/// snapshot. Malformed lines are skipped and counted.
pub fn ingest_snapshot(snapshot: &Path, out_dir: &Path) -> Result<IngestSummary, IngestError> {
    let reader = BufReader::new(File::open(snapshot)?);
    ingest_reader(reader, out_dir)
}

pub fn ingest_reader<R: BufRead>(reader: R, out_dir: &Path) -> Result<IngestSummary, IngestError> {
    let mut writer = CorpusWriter::create(out_dir)?;
    let mut summary = IngestSummary::default();
    let mut chunk: Vec<(usize, String)> = Vec::with_capacity(PARSE_CHUNK);
    let flush = |chunk: &mut Vec<(usize, String)>,
                     writer: &mut CorpusWriter,
                     summary: &mut IngestSummary|
     -> Result<(), IngestError> {
        let parsed: Vec<_> = chunk
            .par_iter()
            .map(|(no, line)| parse_metadata_line(line, *no))
            .collect();
        for result in parsed {
            match result {
                Ok(record) => {
                    if writer.append(&record)? {
                        summary.records += 1;
                    } else {
                        log::warn!("duplicate paper id {}; keeping first", record.paper_id);
                        summary.duplicates += 1;
                    }
                }
                Err(e) => {
                    log::warn!("skipping snapshot {e}");
                    summary.malformed += 1;
                }
            }
        }
        chunk.clear();
        Ok(())
    };
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        chunk.push((idx + 1, line));
        if chunk.len() == PARSE_CHUNK {
            flush(&mut chunk, &mut writer, &mut summary)?;
        }
    }
    flush(&mut chunk, &mut writer, &mut summary)?;
    writer.finish()?;
    Ok(summary)
}

/// Random access to an on-disk corpus through `corpus.idx`.
pub struct DiskCorpus {
    data: File,
    offsets: HashMap<String, (u64, u32)>,
}

impl DiskCorpus {
    pub fn open(dir: &Path) -> Result<Self, IngestError> {
        let mut raw = Vec::new();
        File::open(dir.join(INDEX_FILE))?.read_to_end(&mut raw)?;
        let offsets = decode_index(&raw)?;
        Ok(Self {
            data: File::open(dir.join(CORPUS_FILE))?,
            offsets,
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn contains(&self, paper_id: &str) -> bool {
        self.offsets.contains_key(paper_id)
    }

    pub fn get(&mut self, paper_id: &str) -> Result<Option<PaperRecord>, IngestError> {
        let Some(&(offset, len)) = self.offsets.get(paper_id) else {
            return Ok(None);
        };
        self.data.seek(SeekFrom::Start(offset))?;
        let mut buf = vec![0u8; len as usize];
        self.data.read_exact(&mut buf)?;
        let line = String::from_utf8(buf)
            .map_err(|_| IngestError::BadIndex(format!("non-UTF-8 record for {paper_id}")))?;
        parse_metadata_line(line.trim_end(), 0).map(Some)
    }
}

fn decode_index(raw: &[u8]) -> Result<HashMap<String, (u64, u32)>, IngestError> {
    let bad = |what: &str| IngestError::BadIndex(what.to_owned());
    if raw.len() < 16 || &raw[..8] != INDEX_MAGIC {
        return Err(bad("missing header"));
    }
    let count = u64::from_le_bytes(raw[8..16].try_into().unwrap()) as usize;
    let mut pos = 16;
    let mut take = |n: usize| -> Result<&[u8], IngestError> {
        let slice = raw.get(pos..pos + n).ok_or_else(|| bad("truncated entry"))?;
        pos += n;
        Ok(slice)
    };
    let mut offsets = HashMap::with_capacity(count);
    for _ in 0..count {
        let id_len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let id = std::str::from_utf8(take(id_len)?)
            .map_err(|_| bad("non-UTF-8 id"))?
            .to_owned();
        let offset = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let len = u32::from_le_bytes(take(4)?.try_into().unwrap());
        offsets.insert(id, (offset, len));
    }
    Ok(offsets)
}
