//! Bibliography title resolution from `.bib`, `.bbl` and inline
//! `thebibliography` environments.

use std::collections::{BTreeMap, BTreeSet};

use super::scan::{bracket_at, control_word_at, group_at, skip_ws};
use super::SourceTree;

/// Raw field values of one `.bib` entry, keyed by lowercase field name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BibEntry {
    pub entry_type: String,
    pub key: String,
    pub fields: BTreeMap<String, String>,
}

/// Parses BibTeX text. Malformed entries are skipped.
pub fn parse_bib(text: &str) -> Vec<BibEntry> {
    let b = text.as_bytes();
    let mut entries = Vec::new();
    let mut i = 0;
    while let Some(rel) = text[i..].find('@') {
        let at = i + rel;
        let mut j = at + 1;
        while j < b.len() && (b[j].is_ascii_alphanumeric() || b[j] == b'_') {
            j += 1;
        }
        let entry_type = text[at + 1..j].to_lowercase();
        j = skip_ws(text, j);
        let (open, close) = match b.get(j) {
            Some(b'{') => (b'{', b'}'),
            Some(b'(') => (b'(', b')'),
            _ => {
                i = at + 1;
                continue;
            }
        };
        let Some(end) = entry_end(text, j, open, close) else {
            i = at + 1;
            continue;
        };
        i = end;
        if matches!(entry_type.as_str(), "comment" | "string" | "preamble") || entry_type.is_empty() {
            continue;
        }
        if let Some(entry) = parse_entry_body(&text[j + 1..end - 1], entry_type) {
            entries.push(entry);
        }
    }
    entries
}

fn entry_end(text: &str, pos: usize, open: u8, close: u8) -> Option<usize> {
    let b = text.as_bytes();
    let mut depth = 0usize;
    for (k, &c) in b.iter().enumerate().skip(pos) {
        if c == open || (open == b'(' && c == b'{') {
            depth += 1;
        } else if c == close || (open == b'(' && c == b'}') {
            depth = depth.checked_sub(1)?;
            if depth == 0 {
                return (c == close).then_some(k + 1);
            }
        }
    }
    None
}

fn parse_entry_body(body: &str, entry_type: String) -> Option<BibEntry> {
    let comma = body.find(',')?;
    let key = body[..comma].trim().to_owned();
    if key.is_empty() || key.contains(char::is_whitespace) {
        return None;
    }
    let b = body.as_bytes();
    let mut fields = BTreeMap::new();
    let mut i = comma + 1;
    loop {
        while i < b.len() && (b[i].is_ascii_whitespace() || b[i] == b',') {
            i += 1;
        }
        if i >= b.len() {
            break;
        }
        let name_start = i;
        while i < b.len() && (b[i].is_ascii_alphanumeric() || matches!(b[i], b'_' | b'-' | b':' | b'.')) {
            i += 1;
        }
        let name = body[name_start..i].to_lowercase();
        i = skip_ws(body, i);
        if name.is_empty() || b.get(i) != Some(&b'=') {
            break;
        }
        i = skip_ws(body, i + 1);
        let mut value = String::new();
        loop {
            match b.get(i) {
                Some(b'{') => {
                    let (a, z, after) = group_at(body, i)?;
                    value.push_str(&body[a..z]);
                    i = after;
                }
                Some(b'"') => {
                    let close = quoted_end(body, i)?;
                    value.push_str(&body[i + 1..close]);
                    i = close + 1;
                }
                Some(_) => {
                    let start = i;
                    while i < b.len() && !matches!(b[i], b',' | b'#') && !b[i].is_ascii_whitespace() {
                        i += 1;
                    }
                    value.push_str(&body[start..i]);
                }
                None => break,
            }
            i = skip_ws(body, i);
            if b.get(i) == Some(&b'#') {
                i = skip_ws(body, i + 1);
                continue;
            }
            break;
        }
        fields.insert(name, value);
    }
    Some(BibEntry {
        entry_type,
        key,
        fields,
    })
}

/// Closing `"` of a BibTeX quoted value; quotes inside braces don't count.
fn quoted_end(s: &str, pos: usize) -> Option<usize> {
    let b = s.as_bytes();
    let mut depth = 0i32;
    let mut i = pos + 1;
    while i < b.len() {
        match b[i] {
            b'\\' => i += 1,
            b'{' => depth += 1,
            b'}' => depth -= 1,
            b'"' if depth == 0 => return Some(i),
            _ => {}
        }
        i += 1;
    }
    None
}

/// Drops braces and command names (keeping their arguments' text), maps
/// `~` and `\&`-style escapes, and collapses whitespace.
pub fn clean_bib_text(raw: &str) -> String {
    let b = raw.as_bytes();
    let mut out = String::with_capacity(raw.len());
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'{' | b'}' => i += 1,
            b'~' => {
                out.push(' ');
                i += 1;
            }
            b'\\' => match control_word_at(raw, i) {
                Some((_, end)) => i = end,
                None => {
                    // `\&`, `\%`, `\"o`, ... keep the symbol for escapes, drop accent marks
                    if let Some(c) = raw[i + 1..].chars().next() {
                        if matches!(c, '&' | '%' | '$' | '#' | '_') {
                            out.push(c);
                        }
                        i += 1 + c.len_utf8();
                    } else {
                        i += 1;
                    }
                }
            },
            _ => {
                let c = raw[i..].chars().next().unwrap();
                out.push(c);
                i += c.len_utf8();
            }
        }
    }
    let collapsed = out.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches([',', '.', ';', ':'])
        .trim()
        .to_owned()
}

/// `\bibitem[label]{key} text` blocks, in order.
pub fn parse_bibitems(text: &str) -> Vec<(String, String)> {
    let mut items = Vec::new();
    let mut starts = Vec::new();
    let mut from = 0;
    while let Some(rel) = text[from..].find("\\bibitem") {
        let pos = from + rel;
        let mut i = pos + "\\bibitem".len();
        if text.as_bytes().get(i).is_some_and(u8::is_ascii_alphabetic) {
            from = i;
            continue;
        }
        i = skip_ws(text, i);
        if let Some((_, _, after)) = bracket_at(text, i) {
            i = skip_ws(text, after);
        }
        match group_at(text, i) {
            Some((a, z, after)) => {
                starts.push((pos, text[a..z].trim().to_owned(), after));
                from = after;
            }
            None => from = i,
        }
    }
    for (n, (_, key, body_start)) in starts.iter().enumerate() {
        let mut end = starts.get(n + 1).map_or(text.len(), |s| s.0);
        if let Some(stop) = text[*body_start..end].find("\\end{thebibliography}") {
            end = body_start + stop;
        }
        items.push((key.clone(), text[*body_start..end].to_owned()));
    }
    items
}

/// biblatex `.bbl` entries: `\entry{key}...\field{title}{...}...\endentry`.
fn parse_biblatex_entries(text: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(rel) = text[from..].find("\\entry{") {
        let pos = from + rel + "\\entry".len();
        let Some((a, z, after)) = group_at(text, pos) else {
            from = pos;
            continue;
        };
        let key = text[a..z].trim().to_owned();
        let end = text[after..].find("\\endentry").map_or(text.len(), |e| after + e);
        if let Some(t) = text[after..end].find("\\field{title}") {
            let at = skip_ws(text, after + t + "\\field{title}".len());
            if let Some((ta, tz, _)) = group_at(text, at) {
                out.push((key, clean_bib_text(&text[ta..tz])));
            }
        }
        from = end;
    }
    out
}

/// Title heuristic for a bibitem: the first emphasized (`\emph`, `\textit`,
/// `\textsl`, `{\em ...}`, `{\it ...}`) or quoted (``...'' or "...") span.
pub fn bibitem_title(item: &str) -> Option<String> {
    let b = item.as_bytes();
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'\\' => {
                if let Some((name, end)) = control_word_at(item, i) {
                    if matches!(name, "emph" | "textit" | "textsl") {
                        if let Some((a, z, _)) = group_at(item, skip_ws(item, end)) {
                            return non_empty(clean_bib_text(&item[a..z]));
                        }
                    }
                    i = end;
                    continue;
                }
                i += 2;
                continue;
            }
            b'{' => {
                let rest = &item[i + 1..];
                let trimmed = rest.trim_start();
                if trimmed.starts_with("\\em") || trimmed.starts_with("\\it") {
                    let tail = &trimmed[3..];
                    if !tail.starts_with(|c: char| c.is_ascii_alphabetic()) {
                        if let Some((a, z, _)) = group_at(item, i) {
                            let inner = item[a..z].trim_start();
                            return non_empty(clean_bib_text(&inner[3..]));
                        }
                    }
                }
            }
            b'`' if item[i..].starts_with("``") => {
                if let Some(close) = item[i + 2..].find("''") {
                    return non_empty(clean_bib_text(&item[i + 2..i + 2 + close]));
                }
            }
            b'"' => {
                if let Some(close) = item[i + 1..].find('"') {
                    return non_empty(clean_bib_text(&item[i + 1..i + 1 + close]));
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

fn non_empty(s: String) -> Option<String> {
    (!s.is_empty()).then_some(s)
}

/// Maps each requested key to a title: `.bib` first, then `.bbl`, then
/// inline `thebibliography` items. Unresolved keys are absent.
pub fn resolve_bibliography(tree: &SourceTree, keys: &BTreeSet<String>) -> BTreeMap<String, String> {
    let mut resolved = BTreeMap::new();
    let wanted = |k: &str, r: &BTreeMap<String, String>| keys.contains(k) && !r.contains_key(k);

    for (path, text) in &tree.files {
        if !path.ends_with(".bib") {
            continue;
        }
        for entry in parse_bib(text) {
            if !wanted(&entry.key, &resolved) {
                continue;
            }
            if let Some(title) = entry.fields.get("title").map(|t| clean_bib_text(t)) {
                if !title.is_empty() {
                    resolved.insert(entry.key, title);
                }
            }
        }
    }
    for (path, text) in &tree.files {
        if !path.ends_with(".bbl") {
            continue;
        }
        for (key, title) in parse_biblatex_entries(text) {
            if wanted(&key, &resolved) && !title.is_empty() {
                resolved.insert(key, title);
            }
        }
        for (key, item) in parse_bibitems(text) {
            if wanted(&key, &resolved) {
                if let Some(title) = bibitem_title(&item) {
                    resolved.insert(key, title);
                }
            }
        }
    }
    for (path, text) in &tree.files {
        if !(path.ends_with(".tex") || path.ends_with(".ltx")) {
            continue;
        }
        let Some(start) = text.find("\\begin{thebibliography}") else {
            continue;
        };
        for (key, item) in parse_bibitems(&text[start..]) {
            if wanted(&key, &resolved) {
                if let Some(title) = bibitem_title(&item) {
                    resolved.insert(key, title);
                }
            }
        }
    }
    resolved
}
