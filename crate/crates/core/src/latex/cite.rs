//! Citation command normalization and citing-sentence extraction.

use super::scan::{bracket_at, control_word_at, group_at, skip_ws};

/// Citation commands rewritten to plain `\cite`.
pub const CITE_COMMANDS: &[&str] = &[
    "cite",
    "citep",
    "citet",
    "citealp",
    "citealt",
    "citeauthor",
    "citeyear",
    "citeyearpar",
    "citenum",
    "parencite",
    "textcite",
    "autocite",
    "footcite",
    "smartcite",
    "supercite",
    "Cite",
    "Citep",
    "Citet",
    "Citealp",
    "Citealt",
    "Citeauthor",
    "Parencite",
    "Textcite",
    "Autocite",
];

fn split_keys(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(',').map(str::trim).filter(|k| !k.is_empty())
}

/// Rewrites every citation command to `\cite{k1,k2}`: star and optional
/// arguments are dropped, keys trimmed, key order kept.
pub fn standardize_citations(body: &str) -> String {
    let b = body.as_bytes();
    let mut out = String::with_capacity(body.len());
    let mut i = 0;
    let mut copied = 0;
    while i < b.len() {
        if b[i] != b'\\' {
            i += 1;
            continue;
        }
        let Some((name, end)) = control_word_at(body, i) else {
            i += 2;
            continue;
        };
        if !CITE_COMMANDS.contains(&name) {
            i = end;
            continue;
        }
        let mut j = end;
        if b.get(j) == Some(&b'*') {
            j += 1;
        }
        let mut opt = 0;
        loop {
            let at = skip_ws(body, j);
            match bracket_at(body, at) {
                Some((_, _, after)) if opt < 2 => {
                    j = after;
                    opt += 1;
                }
                _ => break,
            }
        }
        let at = skip_ws(body, j);
        let Some((a, z, after)) = group_at(body, at) else {
            i = end;
            continue;
        };
        out.push_str(&body[copied..i]);
        out.push_str("\\cite{");
        out.push_str(&split_keys(&body[a..z]).collect::<Vec<_>>().join(","));
        out.push('}');
        copied = after;
        i = after;
    }
    out.push_str(&body[copied.min(body.len())..]);
    out
}

/// Keys of every `\cite{...}` in order of appearance (duplicates kept).
pub fn cite_keys(body: &str) -> Vec<String> {
    let mut keys = Vec::new();
    let mut from = 0;
    while let Some(rel) = body[from..].find("\\cite{") {
        let brace = from + rel + "\\cite".len();
        match group_at(body, brace) {
            Some((a, z, after)) => {
                keys.extend(split_keys(&body[a..z]).map(str::to_owned));
                from = after;
            }
            None => from = brace + 1,
        }
    }
    keys
}

/// Words that end with a period without ending the sentence.
const ABBREVIATIONS: &[&str] = &[
    "al", "fig", "figs", "eq", "eqs", "eqn", "eqns", "e.g", "i.e", "cf", "vs", "sec", "secs",
    "ref", "refs", "tab", "thm", "lem", "prop", "def", "ch", "dr", "mr", "ms", "prof", "resp",
    "approx", "vol", "pp",
];

/// Commands that always start a new sentence, with the number of brace
/// arguments that belong to the marker itself.
const STRUCTURAL: &[(&str, usize)] = &[
    ("part", 1),
    ("chapter", 1),
    ("section", 1),
    ("subsection", 1),
    ("subsubsection", 1),
    ("paragraph", 1),
    ("subparagraph", 1),
    ("item", 0),
    ("begin", 1),
    ("end", 1),
    ("appendix", 0),
    ("maketitle", 0),
    ("bibliography", 1),
];

const STRUCTURAL_ENVS: &[&str] = &[
    "itemize",
    "enumerate",
    "description",
    "abstract",
    "document",
    "thebibliography",
    "quote",
    "quotation",
    "center",
    "theorem",
    "lemma",
    "proof",
    "definition",
    "proposition",
    "corollary",
    "remark",
];

fn is_abbreviation(text: &str, dot: usize) -> bool {
    let before = &text[..dot];
    let word_start = before
        .rfind(|c: char| c.is_whitespace() || c == '(' || c == '[' || c == '~' || c == '{')
        .map_or(0, |i| i + 1);
    let word = &before[word_start..];
    if word.is_empty() {
        return false;
    }
    let mut chars = word.chars();
    let first = chars.next().unwrap();
    if first.is_uppercase() && chars.next().is_none() {
        return true;
    }
    ABBREVIATIONS.contains(&word.to_lowercase().as_str())
}

/// If `pos` starts a structural marker, returns the marker's end offset.
fn structural_at(text: &str, pos: usize) -> Option<usize> {
    let (name, end) = control_word_at(text, pos)?;
    let &(_, nargs) = STRUCTURAL.iter().find(|(n, _)| *n == name)?;
    let mut j = end;
    if text.as_bytes().get(j) == Some(&b'*') {
        j += 1;
    }
    if name == "begin" || name == "end" {
        let (a, z, after) = group_at(text, skip_ws(text, j))?;
        let env = text[a..z].trim_end_matches('*');
        return STRUCTURAL_ENVS.contains(&env).then_some(after);
    }
    if let Some((_, _, after)) = bracket_at(text, skip_ws(text, j)) {
        j = after;
    }
    for _ in 0..nargs {
        match group_at(text, skip_ws(text, j)) {
            Some((_, _, after)) => j = after,
            None => break,
        }
    }
    Some(j)
}

/// Byte spans of sentences.
///
/// Boundaries: `.`/`?`/`!` followed by whitespace (no split after a single
/// capital letter or a listed abbreviation such as "et al.", "Fig.",
/// "Eq."), blank lines, and structural commands (sectioning, `\item`,
/// list/document environments), which form no sentence of their own.
pub fn sentence_spans(text: &str) -> Vec<(usize, usize)> {
    let b = text.as_bytes();
    let mut spans = Vec::new();
    let mut start = 0;
    let push = |from: usize, to: usize, spans: &mut Vec<(usize, usize)>| {
        let seg = &text[from..to];
        let lead = seg.len() - seg.trim_start().len();
        let trail = seg.len() - seg.trim_end().len();
        if from + lead < to - trail {
            spans.push((from + lead, to - trail));
        }
    };
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'\\' => {
                if let Some(end) = structural_at(text, i) {
                    push(start, i, &mut spans);
                    start = end;
                    i = end;
                    continue;
                }
                i += 2;
                continue;
            }
            b'.' | b'?' | b'!' => {
                let next = b.get(i + 1);
                let at_break = next.is_none_or(|c| c.is_ascii_whitespace());
                if at_break && !(b[i] == b'.' && is_abbreviation(text, i)) {
                    push(start, i + 1, &mut spans);
                    start = i + 1;
                }
            }
            b'\n' => {
                let mut j = i + 1;
                while j < b.len() && (b[j] == b' ' || b[j] == b'\t' || b[j] == b'\r') {
                    j += 1;
                }
                if b.get(j) == Some(&b'\n') {
                    push(start, i, &mut spans);
                    start = j;
                    i = j;
                    continue;
                }
            }
            _ => {}
        }
        i += 1;
    }
    push(start, b.len().max(start), &mut spans);
    spans
}

pub(crate) fn clean_sentence(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace-collapsed sentences of `text`.
pub fn split_sentences(text: &str) -> Vec<String> {
    sentence_spans(text)
        .into_iter()
        .map(|(a, z)| clean_sentence(&text[a..z]))
        .collect()
}

/// Every sentence citing `key`, once per sentence, in document order.
pub fn extract_citation_sentences(body: &str, key: &str) -> Vec<String> {
    sentence_spans(body)
        .into_iter()
        .map(|(a, z)| &body[a..z])
        .filter(|s| cite_keys(s).iter().any(|k| k == key))
        .map(clean_sentence)
        .collect()
}
