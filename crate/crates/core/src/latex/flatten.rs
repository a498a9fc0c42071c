use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;

use super::{LatexError, SourceTree};

pub const MAX_INPUT_DEPTH: usize = 32;

fn input_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\\input\s*\{([^{}]*)\}|\\input\s+([^\s{}\\%]+)").unwrap())
}

fn documentclass_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\\documentclass\b").unwrap())
}

fn is_tex(path: &str) -> bool {
    path.ends_with(".tex") || path.ends_with(".ltx")
}

fn parent_dir(path: &str) -> &str {
    path.rfind('/').map_or("", |i| &path[..i])
}

/// Joins and normalizes `.` / `..` segments.
fn join(dir: &str, target: &str) -> String {
    let mut parts: Vec<&str> = if target.starts_with('/') {
        Vec::new()
    } else {
        dir.split('/').filter(|p| !p.is_empty()).collect()
    };
    for seg in target.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop();
            }
            s => parts.push(s),
        }
    }
    parts.join("/")
}

/// Resolves an `\input` target against the tree: relative to the importing
/// file first, then to the tree root; `.tex` is tried when missing.
pub(crate) fn resolve_input(tree: &SourceTree, from: &str, target: &str) -> Option<String> {
    let target = target.trim();
    let mut bases = vec![parent_dir(from)];
    if !bases.contains(&"") {
        bases.push("");
    }
    for base in bases {
        let joined = join(base, target);
        for candidate in [joined.clone(), format!("{joined}.tex")] {
            if tree.files.contains_key(&candidate) {
                return Some(candidate);
            }
        }
    }
    None
}

fn input_targets(text: &str) -> impl Iterator<Item = (std::ops::Range<usize>, &str)> {
    input_re().captures_iter(text).map(|c| {
        let whole = c.get(0).unwrap();
        let target = c.get(1).or_else(|| c.get(2)).unwrap().as_str();
        (whole.range(), target)
    })
}

/// The unique `.tex` file with a `\documentclass` that no other file inputs.
pub fn find_main_file(tree: &SourceTree) -> Result<String, LatexError> {
    let tex: Vec<&String> = tree.files.keys().filter(|p| is_tex(p)).collect();
    if tex.is_empty() {
        return Err(LatexError::NoMain);
    }
    let mut graph: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for path in &tex {
        let deps = input_targets(&tree.files[*path])
            .filter_map(|(_, t)| resolve_input(tree, path, t))
            .collect();
        graph.insert(path.as_str(), deps);
    }
    if let Some(cycle) = find_cycle(&graph) {
        return Err(LatexError::ImportCycle(cycle));
    }
    let imported: BTreeSet<&str> = graph.values().flatten().map(String::as_str).collect();
    let candidates: Vec<String> = tex
        .iter()
        .filter(|p| !imported.contains(p.as_str()))
        .filter(|p| documentclass_re().is_match(&tree.files[**p]))
        .map(|p| (*p).clone())
        .collect();
    match candidates.len() {
        0 => Err(LatexError::NoMain),
        1 => Ok(candidates.into_iter().next().unwrap()),
        _ => Err(LatexError::AmbiguousMain(candidates)),
    }
}

fn find_cycle(graph: &BTreeMap<&str, BTreeSet<String>>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit<'a>(
        node: &'a str,
        graph: &'a BTreeMap<&str, BTreeSet<String>>,
        marks: &mut BTreeMap<&'a str, Mark>,
        stack: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        match marks.get(node) {
            Some(Mark::Done) => return None,
            Some(Mark::Active) => {
                let start = stack.iter().position(|n| *n == node).unwrap_or(0);
                let mut cycle: Vec<String> = stack[start..].iter().map(|s| s.to_string()).collect();
                cycle.push(node.to_owned());
                return Some(cycle);
            }
            None => {}
        }
        marks.insert(node, Mark::Active);
        stack.push(node);
        if let Some(deps) = graph.get(node) {
            for dep in deps {
                if let Some(c) = visit(dep, graph, marks, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        marks.insert(node, Mark::Done);
        None
    }
    let mut marks = BTreeMap::new();
    for node in graph.keys() {
        let mut stack = Vec::new();
        if let Some(c) = visit(node, graph, &mut marks, &mut stack) {
            return Some(c);
        }
    }
    None
}

/// Recursively inlines every `\input` starting from `root`.
///
/// Missing targets become empty text plus a warning. Nesting deeper than
/// [`MAX_INPUT_DEPTH`] is an error.
pub fn flatten(tree: &SourceTree, root: &str) -> Result<(String, Vec<String>), LatexError> {
    let text = tree
        .files
        .get(root)
        .ok_or_else(|| LatexError::MissingFile(root.to_owned()))?;
    let mut warnings = Vec::new();
    let out = inline(tree, root, text, 0, &mut warnings)?;
    Ok((out, warnings))
}

fn inline(
    tree: &SourceTree,
    path: &str,
    text: &str,
    depth: usize,
    warnings: &mut Vec<String>,
) -> Result<String, LatexError> {
    if depth > MAX_INPUT_DEPTH {
        return Err(LatexError::DepthExceeded(path.to_owned()));
    }
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for (range, target) in input_targets(text) {
        out.push_str(&text[cursor..range.start]);
        cursor = range.end;
        match resolve_input(tree, path, target) {
            Some(child) => {
                let body = inline(tree, &child, &tree.files[&child], depth + 1, warnings)?;
                out.push_str(&body);
            }
            None => warnings.push(format!("{path}: \\input{{{target}}} not found; spliced empty")),
        }
    }
    out.push_str(&text[cursor..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(files: &[(&str, &str)]) -> SourceTree {
        SourceTree::from_files(files.iter().map(|(p, t)| (p.to_string(), t.to_string())))
    }

    #[test]
    fn main_found() {
        let t = tree(&[
            ("main.tex", "\\documentclass{article}\\input{a}"),
            ("a.tex", "X"),
        ]);
        assert_eq!(find_main_file(&t).unwrap(), "main.tex");
    }

    #[test]
    fn ambiguous_main() {
        let t = tree(&[
            ("a.tex", "\\documentclass{article}"),
            ("b.tex", "\\documentclass{article}"),
        ]);
        match find_main_file(&t) {
            Err(LatexError::AmbiguousMain(c)) => assert_eq!(c, ["a.tex", "b.tex"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn imported_documentclass_file_is_not_main() {
        let t = tree(&[
            ("main.tex", "\\documentclass{article}\\input{standalone}"),
            ("standalone.tex", "\\documentclass{standalone} x"),
        ]);
        assert_eq!(find_main_file(&t).unwrap(), "main.tex");
    }

    #[test]
    fn cycle_detected() {
        let t = tree(&[("a.tex", "\\input{b}"), ("b.tex", "\\input{a}")]);
        assert!(matches!(find_main_file(&t), Err(LatexError::ImportCycle(_))));
    }

    #[test]
    fn no_main() {
        let t = tree(&[("a.tex", "hello")]);
        assert!(matches!(find_main_file(&t), Err(LatexError::NoMain)));
    }

    #[test]
    fn flatten_inline_and_missing() {
        let t = tree(&[
            ("main.tex", "[\\input{a}][\\input{missing}]"),
            ("a.tex", "X"),
        ]);
        let (out, warnings) = flatten(&t, "main.tex").unwrap();
        assert_eq!(out, "[X][]");
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn flatten_relative_to_importer() {
        let t = tree(&[
            ("main.tex", "\\input{sec/intro}"),
            ("sec/intro.tex", "I \\input{detail}"),
            ("sec/detail.tex", "D"),
        ]);
        assert_eq!(flatten(&t, "main.tex").unwrap().0, "I D");
    }

    #[test]
    fn self_input_hits_depth_cap() {
        let t = tree(&[("main.tex", "\\input{main}")]);
        assert!(matches!(
            flatten(&t, "main.tex"),
            Err(LatexError::DepthExceeded(_))
        ));
    }

    #[test]
    fn path_join_handles_dots() {
        assert_eq!(join("a/b", "../c"), "a/c");
        assert_eq!(join("", "./x"), "x");
    }
}
