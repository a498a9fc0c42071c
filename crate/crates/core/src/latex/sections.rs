use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::scan::{bracket_at, group_at, skip_ws};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Introduction,
    RelatedWork,
}

/// Case-insensitive substrings matched against section titles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionPatterns {
    pub introduction: Vec<String>,
    pub related_work: Vec<String>,
}

impl Default for SectionPatterns {
    fn default() -> Self {
        Self {
            introduction: vec!["introduction".into()],
            related_work: vec![
                "related work".into(),
                "prior work".into(),
                "background".into(),
            ],
        }
    }
}

impl SectionPatterns {
    fn for_kind(&self, kind: SectionKind) -> &[String] {
        match kind {
            SectionKind::Introduction => &self.introduction,
            SectionKind::RelatedWork => &self.related_work,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Heading {
    /// Lower is higher in the hierarchy; document-level stops are -10.
    pub level: i32,
    pub title: String,
    pub start: usize,
    pub body_start: usize,
}

fn heading_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"\\(part|chapter|section|subsection|subsubsection|paragraph|subparagraph)\b\*?|\\end\{document\}|\\begin\{thebibliography\}|\\bibliography\{|\\printbibliography\b|\\appendix\b",
        )
        .unwrap()
    })
}

fn level_of(cmd: &str) -> i32 {
    match cmd {
        "part" => -1,
        "chapter" => 0,
        "section" => 1,
        "subsection" => 2,
        "subsubsection" => 3,
        "paragraph" => 4,
        _ => 5,
    }
}

/// Sectioning commands and document-level stops, in order.
pub(crate) fn headings(body: &str) -> Vec<Heading> {
    let mut out = Vec::new();
    for m in heading_re().find_iter(body) {
        let text = m.as_str();
        match heading_re().captures(text).and_then(|c| c.get(1)) {
            Some(cmd) => {
                let mut i = skip_ws(body, m.end());
                if let Some((_, _, after)) = bracket_at(body, i) {
                    i = skip_ws(body, after);
                }
                let Some((a, z, after)) = group_at(body, i) else {
                    continue;
                };
                out.push(Heading {
                    level: level_of(cmd.as_str()),
                    title: body[a..z].to_owned(),
                    start: m.start(),
                    body_start: after,
                });
            }
            None => out.push(Heading {
                level: -10,
                title: String::new(),
                start: m.start(),
                body_start: m.end(),
            }),
        }
    }
    out
}

fn normalize_heading(title: &str) -> String {
    title
        .replace('~', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Text between the first heading matching `kind` and the next heading of
/// the same or higher level (or the end of the document body).
pub fn extract_section(body: &str, kind: SectionKind, patterns: &SectionPatterns) -> Option<String> {
    let heads = headings(body);
    let wanted = patterns.for_kind(kind);
    let (idx, head) = heads.iter().enumerate().find(|(_, h)| {
        h.level > -10 && {
            let t = normalize_heading(&h.title);
            wanted.iter().any(|w| t.contains(&w.to_lowercase()))
        }
    })?;
    let end = heads[idx + 1..]
        .iter()
        .find(|h| h.level <= head.level)
        .map_or(body.len(), |h| h.start);
    let text = tidy_text(&body[head.body_start..end]);
    (!text.is_empty()).then_some(text)
}

/// Collapses whitespace inside paragraphs; paragraphs are joined by one blank line.
pub fn tidy_text(text: &str) -> String {
    let mut paragraphs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                paragraphs.push(current.join(" "));
                current.clear();
            }
        } else {
            current.extend(line.split_whitespace());
        }
    }
    if !current.is_empty() {
        paragraphs.push(current.join(" "));
    }
    paragraphs.join("\n\n")
}
