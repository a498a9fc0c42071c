//! LaTeX source processing.
//!
//! Per paper: strip comments, unify imports to `\input`, locate the main
//! file, flatten, expand author macros, drop non-informative environments
//! and commands, standardize citation commands, then pull out the
//! introduction, related work, and every citing sentence with the cited
//! title resolved from the bibliography.
//!
//! The whole pipeline is a pure function of the [`SourceTree`].

mod bib;
mod cite;
mod clean;
mod flatten;
mod macros;
mod scan;
mod sections;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bib::{bibitem_title, clean_bib_text, parse_bib, parse_bibitems, resolve_bibliography, BibEntry};
pub use cite::{
    cite_keys, extract_citation_sentences, sentence_spans, split_sentences, standardize_citations,
    CITE_COMMANDS,
};
pub use clean::{strip_comments, strip_noninformative, unify_imports, Blocklist};
pub use flatten::{find_main_file, flatten, MAX_INPUT_DEPTH};
pub use macros::{demacro, expand_once, extract_definitions, MacroDef, MAX_EXPANSION_PASSES};
pub use sections::{extract_section, tidy_text, SectionKind, SectionPatterns};

#[derive(Debug, Error)]
pub enum LatexError {
    #[error("no main file: no un-imported .tex file declares \\documentclass")]
    NoMain,
    #[error("ambiguous main file, candidates: {0:?}")]
    AmbiguousMain(Vec<String>),
    #[error("import cycle: {}", .0.join(" -> "))]
    ImportCycle(Vec<String>),
    #[error("\\input nesting deeper than {MAX_INPUT_DEPTH} at {0}")]
    DepthExceeded(String),
    #[error("file not in source tree: {0}")]
    MissingFile(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

const TEXT_EXTENSIONS: &[&str] = &["tex", "ltx", "bib", "bbl"];

/// A paper's source files keyed by `/`-separated relative path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceTree {
    pub files: BTreeMap<String, String>,
    pub root: Option<String>,
}

impl SourceTree {
    pub fn from_files<I: IntoIterator<Item = (String, String)>>(files: I) -> Self {
        Self {
            files: files.into_iter().collect(),
            root: None,
        }
    }

    fn wanted(path: &str) -> bool {
        Path::new(path)
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| TEXT_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
    }

    /// Reads `.tex`, `.ltx`, `.bib` and `.bbl` files under `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, LatexError> {
        let mut files = BTreeMap::new();
        let mut pending = vec![dir.to_path_buf()];
        while let Some(d) = pending.pop() {
            for entry in std::fs::read_dir(&d)? {
                let path = entry?.path();
                if path.is_dir() {
                    pending.push(path);
                    continue;
                }
                let rel = path
                    .strip_prefix(dir)
                    .expect("walked paths are under dir")
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                if Self::wanted(&rel) {
                    let bytes = std::fs::read(&path)?;
                    files.insert(rel, String::from_utf8_lossy(&bytes).into_owned());
                }
            }
        }
        Ok(Self { files, root: None })
    }

    /// Reads an e-print archive: a tar, a gzipped tar, or a single gzipped
    /// `.tex` file (stored as `main.tex`).
    pub fn from_archive(path: &Path) -> Result<Self, LatexError> {
        let mut raw = Vec::new();
        File::open(path)?.read_to_end(&mut raw)?;
        if raw.starts_with(&[0x1f, 0x8b]) {
            let mut inflated = Vec::new();
            flate2::read::GzDecoder::new(&raw[..]).read_to_end(&mut inflated)?;
            raw = inflated;
        }
        if raw.len() > 262 && &raw[257..262] == b"ustar" {
            let mut files = BTreeMap::new();
            let mut archive = tar::Archive::new(&raw[..]);
            for entry in archive.entries()? {
                let mut entry = entry?;
                if !entry.header().entry_type().is_file() {
                    continue;
                }
                let rel = entry
                    .path()?
                    .components()
                    .filter(|c| matches!(c, std::path::Component::Normal(_)))
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect::<Vec<_>>()
                    .join("/");
                if Self::wanted(&rel) {
                    let mut bytes = Vec::new();
                    entry.read_to_end(&mut bytes)?;
                    files.insert(rel, String::from_utf8_lossy(&bytes).into_owned());
                }
            }
            return Ok(Self { files, root: None });
        }
        Ok(Self::from_files([(
            "main.tex".to_string(),
            String::from_utf8_lossy(&raw).into_owned(),
        )]))
    }

    /// Directory or archive, chosen by what `path` is.
    pub fn load(path: &Path) -> Result<Self, LatexError> {
        if path.is_dir() {
            Self::from_dir(path)
        } else {
            Self::from_archive(path)
        }
    }
}

/// One citing sentence for one bibliography key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationMention {
    pub key: String,
    pub sentence: String,
    pub resolved_title: Option<String>,
    /// Byte offset of the sentence in the processed body.
    #[serde(skip)]
    pub offset: usize,
}

/// A processed paper as written to `processed.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessedDoc {
    pub paper_id: String,
    pub introduction: Option<String>,
    pub related_work: Option<String>,
    pub citations: Vec<CitationMention>,
    /// Cleaned, flattened text; only serialized when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatexConfig {
    #[serde(default)]
    pub blocklist: Blocklist,
    #[serde(default)]
    pub sections: SectionPatterns,
    /// Keep the cleaned body in the output.
    #[serde(default)]
    pub keep_body: bool,
}

/// Cleaned, flattened body text of a tree (before section extraction).
pub fn clean_body(tree: &SourceTree, config: &LatexConfig) -> Result<(String, Vec<String>), LatexError> {
    let mut prepared = tree.clone();
    for (path, text) in prepared.files.iter_mut() {
        if path.ends_with(".tex") || path.ends_with(".ltx") {
            *text = unify_imports(&strip_comments(text));
        }
    }
    let root = match &tree.root {
        Some(r) if prepared.files.contains_key(r) => r.clone(),
        Some(r) => return Err(LatexError::MissingFile(r.clone())),
        None => find_main_file(&prepared)?,
    };
    let (flat, mut warnings) = flatten(&prepared, &root)?;
    let (expanded, w) = demacro(&flat);
    warnings.extend(w);
    let (stripped, w) = strip_noninformative(&expanded, &config.blocklist);
    warnings.extend(w);
    Ok((standardize_citations(&stripped), warnings))
}

/// Runs the full per-paper pipeline.
pub fn process_tree(tree: &SourceTree, paper_id: &str, config: &LatexConfig) -> Result<ProcessedDoc, LatexError> {
    let (body, warnings) = clean_body(tree, config)?;
    let introduction = extract_section(&body, SectionKind::Introduction, &config.sections);
    let related_work = extract_section(&body, SectionKind::RelatedWork, &config.sections);

    let keys: BTreeSet<String> = cite_keys(&body).into_iter().collect();
    let titles = resolve_bibliography(tree, &keys);

    let mut citations = Vec::new();
    for (start, end) in sentence_spans(&body) {
        let raw = &body[start..end];
        let mut seen = BTreeSet::new();
        for key in cite_keys(raw) {
            if !seen.insert(key.clone()) {
                continue;
            }
            citations.push(CitationMention {
                resolved_title: titles.get(&key).cloned(),
                key,
                sentence: cite::clean_sentence(raw),
                offset: start,
            });
        }
    }
    Ok(ProcessedDoc {
        paper_id: paper_id.to_owned(),
        introduction,
        related_work,
        citations,
        body: config.keep_body.then_some(body),
        warnings,
    })
}

/// Paper id for a source entry named after the paper; old-style ids store
/// `/` as `_` (`hep-th_9901001` is `hep-th/9901001`).
pub fn paper_id_from_name(name: &str) -> String {
    let stem = name
        .strip_suffix(".tar.gz")
        .or_else(|| name.strip_suffix(".tgz"))
        .or_else(|| name.strip_suffix(".tar"))
        .or_else(|| name.strip_suffix(".gz"))
        .unwrap_or(name);
    stem.replacen('_', "/", 1)
}
