use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::scan::{bracket_at, char_len_at, control_word_at, group_at, skip_ws};
use super::LatexError;

/// Environments whose bodies are copied verbatim by the comment stripper.
const VERBATIM_ENVS: &[&str] = &["verbatim", "Verbatim", "lstlisting", "minted", "alltt"];

/// Removes `%` comments up to end of line, keeping the newline.
///
/// A line holding nothing but a comment is removed with its newline, so it
/// does not turn into a paragraph break. `\%` is kept, as is anything
/// inside verbatim-like environments or `\verb` spans.
pub fn strip_comments(source: &str) -> String {
    let b = source.as_bytes();
    let mut out = String::with_capacity(source.len());
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'\\' => {
                if let Some(end) = verbatim_env_end(source, i) {
                    out.push_str(&source[i..end]);
                    i = end;
                    continue;
                }
                if let Some(end) = verb_end(source, i) {
                    out.push_str(&source[i..end]);
                    i = end;
                    continue;
                }
                let next = i + 1;
                let end = if next < b.len() {
                    next + char_len_at(source, next)
                } else {
                    next
                };
                out.push_str(&source[i..end]);
                i = end;
            }
            b'%' => {
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
                let line_start = out.rfind('\n').map_or(0, |n| n + 1);
                if out[line_start..].trim().is_empty() && i < b.len() {
                    out.truncate(line_start);
                    i += 1;
                }
            }
            _ => {
                let end = i + char_len_at(source, i);
                out.push_str(&source[i..end]);
                i = end;
            }
        }
    }
    out
}

/// At `\begin{<verbatim env>}`, the offset after the matching `\end{...}`
/// (or end of input if unterminated).
fn verbatim_env_end(s: &str, pos: usize) -> Option<usize> {
    let rest = s[pos..].strip_prefix("\\begin{")?;
    let name_end = rest.find('}')?;
    let name = &rest[..name_end];
    if !VERBATIM_ENVS.contains(&name) {
        return None;
    }
    let closing = format!("\\end{{{name}}}");
    let body_start = pos + "\\begin{".len() + name_end + 1;
    Some(
        s[body_start..]
            .find(&closing)
            .map_or(s.len(), |off| body_start + off + closing.len()),
    )
}

/// At `\verb<d>...<d>` (or `\verb*`), the offset after the closing delimiter.
fn verb_end(s: &str, pos: usize) -> Option<usize> {
    let (name, mut i) = control_word_at(s, pos)?;
    if name != "verb" {
        return None;
    }
    if s.as_bytes().get(i) == Some(&b'*') {
        i += 1;
    }
    let delim = s[i..].chars().next()?;
    if delim.is_whitespace() || delim.is_alphabetic() {
        return None;
    }
    let body = i + delim.len_utf8();
    let line_end = s[body..].find('\n').map_or(s.len(), |o| body + o);
    s[body..line_end]
        .find(delim)
        .map(|o| body + o + delim.len_utf8())
}

fn import_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\\(?:include|subfile)(\s*\{)").unwrap())
}

/// Rewrites `\include{x}` and `\subfile{x}` to `\input{x}`.
pub fn unify_imports(source: &str) -> String {
    import_re().replace_all(source, r"\input$1").into_owned()
}

/// Environments and commands removed as non-informative.
///
/// `commands` maps a command name to the number of mandatory brace
/// arguments removed with it; optional `[...]` arguments and a `*` suffix
/// are always consumed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocklist {
    pub environments: Vec<String>,
    pub commands: BTreeMap<String, usize>,
}

const DEFAULT_BLOCKLIST: &str = include_str!("../../data/blocklist.json");

impl Default for Blocklist {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_BLOCKLIST).expect("bundled blocklist is valid JSON")
    }
}

impl Blocklist {
    /// Reads a blocklist file and merges it over the defaults.
    pub fn extend_from_file(mut self, path: &Path) -> Result<Self, LatexError> {
        let text = std::fs::read_to_string(path)?;
        let extra: Blocklist = serde_json::from_str(&text)
            .map_err(|e| LatexError::Config(format!("{}: {e}", path.display())))?;
        for env in extra.environments {
            if !self.environments.contains(&env) {
                self.environments.push(env);
            }
        }
        self.commands.extend(extra.commands);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.environments.len() + self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Removes blocklisted environments and commands; math is left alone.
/// Unbalanced environments are left in place and reported.
pub fn strip_noninformative(source: &str, blocklist: &Blocklist) -> (String, Vec<String>) {
    let mut warnings = Vec::new();
    let mut text = source.to_owned();
    for env in &blocklist.environments {
        text = remove_environment(&text, env, &mut warnings);
        if !env.ends_with('*') {
            text = remove_environment(&text, &format!("{env}*"), &mut warnings);
        }
    }
    (remove_commands(&text, &blocklist.commands), warnings)
}

fn remove_environment(s: &str, env: &str, warnings: &mut Vec<String>) -> String {
    let open = format!("\\begin{{{env}}}");
    let close = format!("\\end{{{env}}}");
    if !s.contains(&open) {
        return s.to_owned();
    }
    let mut out = String::with_capacity(s.len());
    let mut cursor = 0;
    while let Some(rel) = s[cursor..].find(&open) {
        let start = cursor + rel;
        out.push_str(&s[cursor..start]);
        match matching_end(s, start + open.len(), &open, &close) {
            Some(end) => cursor = end,
            None => {
                warnings.push(format!("unbalanced environment `{env}` at byte {start}; kept"));
                out.push_str(&open);
                cursor = start + open.len();
            }
        }
    }
    out.push_str(&s[cursor..]);
    out
}

fn matching_end(s: &str, mut pos: usize, open: &str, close: &str) -> Option<usize> {
    let mut depth = 1usize;
    loop {
        let next_open = s[pos..].find(open).map(|o| pos + o);
        let next_close = s[pos..].find(close).map(|o| pos + o)?;
        match next_open {
            Some(o) if o < next_close => {
                depth += 1;
                pos = o + open.len();
            }
            _ => {
                depth -= 1;
                pos = next_close + close.len();
                if depth == 0 {
                    return Some(pos);
                }
            }
        }
    }
}

fn remove_commands(s: &str, commands: &BTreeMap<String, usize>) -> String {
    let b = s.as_bytes();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    let mut copied = 0;
    while i < b.len() {
        if b[i] != b'\\' {
            i += 1;
            continue;
        }
        let Some((name, mut end)) = control_word_at(s, i) else {
            // control symbol: skip both bytes so `\\label` is not read as `\label`
            i += 1 + if i + 1 < b.len() { char_len_at(s, i + 1) } else { 0 };
            continue;
        };
        let Some(&nargs) = commands.get(name) else {
            i = end;
            continue;
        };
        if b.get(end) == Some(&b'*') {
            end += 1;
        }
        let mut remaining = nargs;
        loop {
            let at = skip_ws(s, end);
            if let Some((_, _, after)) = bracket_at(s, at) {
                end = after;
                continue;
            }
            if remaining == 0 {
                break;
            }
            match group_at(s, at) {
                Some((_, _, after)) => {
                    end = after;
                    remaining -= 1;
                }
                None => break,
            }
        }
        out.push_str(&s[copied..i]);
        copied = end;
        i = end;
    }
    out.push_str(&s[copied..]);
    out
}
