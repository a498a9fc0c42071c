//! Author macro expansion.
//!
//! `\def`, `\gdef`, `\edef`, `\xdef`, `\DeclareMathOperator`,
//! `\renewcommand`, `\providecommand` and `\DeclareRobustCommand` are
//! normalized to the `\newcommand` form, every definition is removed from
//! the text, and uses are expanded pass by pass until nothing changes.
//! Definitions with an optional-argument default or delimited parameters
//! are not supported; they are left in place untouched.

use std::collections::HashMap;

use super::scan::{argument_at, bracket_at, control_word_at, group_at, skip_inline_ws, skip_ws};

pub const MAX_EXPANSION_PASSES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroDef {
    pub name: String,
    pub nargs: usize,
    pub body: String,
}

impl MacroDef {
    /// The definition rendered in `\newcommand` form.
    pub fn to_newcommand(&self) -> String {
        if self.nargs == 0 {
            format!("\\newcommand{{\\{}}}{{{}}}", self.name, self.body)
        } else {
            format!(
                "\\newcommand{{\\{}}}[{}]{{{}}}",
                self.name, self.nargs, self.body
            )
        }
    }

    fn apply(&self, args: &[&str]) -> String {
        let b = self.body.as_bytes();
        let mut out = String::with_capacity(self.body.len());
        let mut i = 0;
        let mut copied = 0;
        while i < b.len() {
            if b[i] == b'#' && i + 1 < b.len() {
                let next = b[i + 1];
                if next == b'#' {
                    out.push_str(&self.body[copied..i + 1]);
                    i += 2;
                    copied = i;
                    continue;
                }
                if next.is_ascii_digit() && next != b'0' {
                    let n = usize::from(next - b'0');
                    if n <= args.len() {
                        out.push_str(&self.body[copied..i]);
                        out.push_str(args[n - 1]);
                        i += 2;
                        copied = i;
                        continue;
                    }
                }
            }
            i += 1;
        }
        out.push_str(&self.body[copied..]);
        out
    }
}

const NEWCOMMAND_LIKE: &[&str] = &[
    "newcommand",
    "renewcommand",
    "providecommand",
    "DeclareRobustCommand",
];
const DEF_LIKE: &[&str] = &["def", "gdef", "edef", "xdef"];

enum Parsed {
    Def(MacroDef, usize),
    Unsupported,
}

/// Parses a definition starting at `pos` (which points at `\`).
fn parse_definition(s: &str, pos: usize) -> Option<Parsed> {
    let (cmd, after_cmd) = control_word_at(s, pos)?;
    if NEWCOMMAND_LIKE.contains(&cmd) {
        let mut i = after_cmd;
        if s.as_bytes().get(i) == Some(&b'*') {
            i += 1;
        }
        let (name, mut i) = macro_name(s, skip_ws(s, i))?;
        let mut nargs = 0;
        i = skip_ws(s, i);
        if let Some((a, z, after)) = bracket_at(s, i) {
            nargs = s[a..z].trim().parse().ok().filter(|n| *n <= 9)?;
            i = skip_ws(s, after);
            if bracket_at(s, i).is_some() {
                return Some(Parsed::Unsupported);
            }
        }
        let (a, z, after) = group_at(s, i)?;
        return Some(Parsed::Def(
            MacroDef {
                name,
                nargs,
                body: s[a..z].to_owned(),
            },
            after,
        ));
    }
    if DEF_LIKE.contains(&cmd) {
        let i = skip_ws(s, after_cmd);
        let (name, end) = control_word_at(s, i)?;
        let mut j = end;
        let mut nargs = 0;
        let b = s.as_bytes();
        while b.get(j) == Some(&b'#') {
            let digit = *b.get(j + 1)?;
            if digit != b'1' + nargs as u8 {
                return Some(Parsed::Unsupported);
            }
            nargs += 1;
            j += 2;
        }
        if b.get(j) != Some(&b'{') {
            return Some(Parsed::Unsupported);
        }
        let (a, z, after) = group_at(s, j)?;
        return Some(Parsed::Def(
            MacroDef {
                name: name.to_owned(),
                nargs,
                body: s[a..z].to_owned(),
            },
            after,
        ));
    }
    if cmd == "DeclareMathOperator" {
        let mut i = after_cmd;
        let star = s.as_bytes().get(i) == Some(&b'*');
        if star {
            i += 1;
        }
        let (name, i) = macro_name(s, skip_ws(s, i))?;
        let (a, z, after) = group_at(s, skip_ws(s, i))?;
        let op = if star { "\\operatorname*" } else { "\\operatorname" };
        return Some(Parsed::Def(
            MacroDef {
                name,
                nargs: 0,
                body: format!("{op}{{{}}}", &s[a..z]),
            },
            after,
        ));
    }
    None
}

/// `{\name}` or `\name`.
fn macro_name(s: &str, pos: usize) -> Option<(String, usize)> {
    if let Some((a, z, after)) = group_at(s, pos) {
        let inner = s[a..z].trim();
        let (name, end) = control_word_at(inner, 0)?;
        return (end == inner.len()).then(|| (name.to_owned(), after));
    }
    control_word_at(s, pos).map(|(n, end)| (n.to_owned(), end))
}

/// Collects definitions and returns the text with them removed. Trailing
/// spaces and one newline after each removed definition go with it.
pub fn extract_definitions(s: &str) -> (String, Vec<MacroDef>) {
    let b = s.as_bytes();
    let mut out = String::with_capacity(s.len());
    let mut defs = Vec::new();
    let mut i = 0;
    let mut copied = 0;
    while i < b.len() {
        if b[i] != b'\\' {
            i += 1;
            continue;
        }
        match parse_definition(s, i) {
            Some(Parsed::Def(def, after)) => {
                out.push_str(&s[copied..i]);
                let mut end = skip_inline_ws(s, after);
                if b.get(end) == Some(&b'\n') {
                    end += 1;
                }
                defs.push(def);
                copied = end;
                i = end;
            }
            Some(Parsed::Unsupported) | None => {
                i = control_word_at(s, i).map_or(i + 2, |(_, end)| end);
            }
        }
    }
    out.push_str(&s[copied.min(s.len())..]);
    (out, defs)
}

/// One expansion pass: every use of a known macro is replaced once.
/// Returns the new text and whether anything changed.
pub fn expand_once(s: &str, table: &HashMap<String, MacroDef>) -> (String, bool) {
    let b = s.as_bytes();
    let mut out = String::with_capacity(s.len());
    let mut changed = false;
    let mut i = 0;
    let mut copied = 0;
    while i < b.len() {
        if b[i] != b'\\' {
            i += 1;
            continue;
        }
        let Some((name, end)) = control_word_at(s, i) else {
            i += 2;
            continue;
        };
        let Some(def) = table.get(name) else {
            i = end;
            continue;
        };
        let mut args = Vec::with_capacity(def.nargs);
        let mut j = end;
        for _ in 0..def.nargs {
            match argument_at(s, j) {
                Some((arg, after)) => {
                    args.push(arg);
                    j = after;
                }
                None => break,
            }
        }
        if args.len() < def.nargs {
            i = end;
            continue;
        }
        if def.nargs == 0 && s[j..].starts_with("{}") {
            // `\name{}` is the usual way to keep the following space
            j += 2;
        }
        out.push_str(&s[copied..i]);
        out.push_str(&def.apply(&args));
        changed = true;
        copied = j;
        i = j;
    }
    out.push_str(&s[copied.min(s.len())..]);
    (out, changed)
}

/// Removes definitions and expands their uses to a fixed point.
pub fn demacro(source: &str) -> (String, Vec<String>) {
    let (mut text, defs) = extract_definitions(source);
    let mut warnings = Vec::new();
    if defs.is_empty() {
        return (text, warnings);
    }
    let table: HashMap<String, MacroDef> = defs.into_iter().map(|d| (d.name.clone(), d)).collect();
    for pass in 0.. {
        let (next, changed) = expand_once(&text, &table);
        text = next;
        if !changed {
            break;
        }
        if pass + 1 == MAX_EXPANSION_PASSES {
            let (_, still) = expand_once(&text, &table);
            if still {
                warnings.push(format!(
                    "macro expansion did not converge after {MAX_EXPANSION_PASSES} passes; remaining uses left unexpanded"
                ));
            }
            break;
        }
    }
    (text, warnings)
}
