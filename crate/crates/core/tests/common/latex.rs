use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use litgraph::latex::{
    cite_keys, demacro, find_main_file, flatten, process_tree, standardize_citations, strip_comments,
    strip_noninformative, unify_imports, Blocklist, LatexConfig, ProcessedDoc, SourceTree,
};
use regex::Regex;
use serde::Deserialize;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/latex")
}

#[derive(Debug, Deserialize, PartialEq)]
pub struct ExpectedMention {
    pub key: String,
    pub sentence: String,
    pub resolved_title: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct Expected {
    pub introduction: Option<String>,
    pub related_work: Option<String>,
    pub citations: Vec<ExpectedMention>,
    #[serde(default)]
    pub min_warnings: usize,
}

pub struct Fixture {
    pub name: String,
    pub tree: SourceTree,
    pub expected: Expected,
}

pub fn load_fixtures() -> Vec<Fixture> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(fixtures_dir())
        .expect("fixture dir")
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    dirs.into_iter()
        .map(|d| Fixture {
            name: d.file_name().unwrap().to_string_lossy().into_owned(),
            tree: SourceTree::from_dir(&d.join("src")).unwrap(),
            expected: serde_json::from_str(&std::fs::read_to_string(d.join("expected.json")).unwrap()).unwrap(),
        })
        .collect()
}

/// Differences between a processed document and its golden, empty when equal.
pub fn golden_diff(doc: &ProcessedDoc, exp: &Expected) -> Vec<String> {
    let mut out = Vec::new();
    if doc.introduction != exp.introduction {
        out.push(format!("introduction: got {:?}, want {:?}", doc.introduction, exp.introduction));
    }
    if doc.related_work != exp.related_work {
        out.push(format!("related_work: got {:?}, want {:?}", doc.related_work, exp.related_work));
    }
    let got: Vec<ExpectedMention> = doc
        .citations
        .iter()
        .map(|m| ExpectedMention {
            key: m.key.clone(),
            sentence: m.sentence.clone(),
            resolved_title: m.resolved_title.clone(),
        })
        .collect();
    if got != exp.citations {
        out.push(format!("citations: got {got:#?}, want {:#?}", exp.citations));
    }
    if doc.warnings.len() < exp.min_warnings {
        out.push(format!("warnings: got {:?}, want at least {}", doc.warnings, exp.min_warnings));
    }
    out
}

/// Body after flattening, macro expansion and stripping, before citation rewriting.
pub fn pre_standardization_body(tree: &SourceTree) -> String {
    let mut prepared = tree.clone();
    for (path, text) in prepared.files.iter_mut() {
        if path.ends_with(".tex") {
            *text = unify_imports(&strip_comments(text));
        }
    }
    let root = find_main_file(&prepared).unwrap();
    let (flat, _) = flatten(&prepared, &root).unwrap();
    let (expanded, _) = demacro(&flat);
    strip_noninformative(&expanded, &Blocklist::default()).0
}

/// Keys of every citation command, found with a regular expression.
pub fn oracle_keys(text: &str) -> BTreeMap<String, usize> {
    let re = Regex::new(
        r"\\(?:[cC]ite[a-z]*|[pP]arencite|[tT]extcite|[aA]utocite|footcite|smartcite|supercite)\*?\s*(?:\[[^\]]*\]\s*){0,2}\{([^{}]*)\}",
    )
    .unwrap();
    let mut counts = BTreeMap::new();
    for c in re.captures_iter(text) {
        for k in c[1].split(',').map(str::trim).filter(|k| !k.is_empty()) {
            *counts.entry(k.to_owned()).or_insert(0) += 1;
        }
    }
    counts
}

pub fn multiset(keys: Vec<String>) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for k in keys {
        *counts.entry(k).or_insert(0) += 1;
    }
    counts
}

/// Checks one fixture; returns the list of failures.
pub fn check_fixture(f: &Fixture) -> Vec<String> {
    let cfg = LatexConfig::default();
    let doc = match process_tree(&f.tree, "fixture", &cfg) {
        Ok(d) => d,
        Err(e) => return vec![format!("processing failed: {e}")],
    };
    let mut failures = golden_diff(&doc, &f.expected);

    let pre = pre_standardization_body(&f.tree);
    let before = oracle_keys(&pre);
    let after = multiset(cite_keys(&standardize_citations(&pre)));
    if before != after {
        failures.push(format!("key multiset changed: {before:?} -> {after:?}"));
    }

    let again = process_tree(&f.tree, "fixture", &cfg).unwrap();
    if again != doc {
        failures.push("second run differs".into());
    }
    let keep = LatexConfig {
        keep_body: true,
        ..LatexConfig::default()
    };
    let body = process_tree(&f.tree, "fixture", &keep).unwrap().body.unwrap();
    let mut reprocessed_tree = f.tree.clone();
    reprocessed_tree.files.retain(|p, _| !p.ends_with(".tex"));
    reprocessed_tree.files.insert("main.tex".into(), body.clone());
    reprocessed_tree.root = Some("main.tex".into());
    match process_tree(&reprocessed_tree, "fixture", &keep) {
        Ok(re) if re.body.as_deref() == Some(body.as_str()) => {
            if mentions(&re) != mentions(&doc) {
                failures.push("reprocessing the cleaned body changes citations".into());
            }
        }
        Ok(_) => failures.push("cleaning is not idempotent".into()),
        Err(e) => failures.push(format!("reprocessing failed: {e}")),
    }
    failures
}

fn mentions(doc: &ProcessedDoc) -> Vec<(String, String, Option<String>)> {
    doc.citations
        .iter()
        .map(|m| (m.key.clone(), m.sentence.clone(), m.resolved_title.clone()))
        .collect()
}
