//! Synthetic corpora and graphs with planted structure.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use litgraph::client::{ClientError, CompletionClient, CompletionRequest};
use litgraph::concepts::{build_concept_prompt, Level};
use litgraph::graph::NodeAttrs;
use litgraph::{CitationGraph, PaperRecord};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ne", "tu", "ra", "si", "po", "de", "vu", "ba", "ze", "fo", "gi", "hu", "ja",
];

/// Distinct pronounceable pseudo-words; the same `tag` always gives the same words.
pub fn pseudo_words(tag: u64, count: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(tag);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    while out.len() < count {
        let n = rng.random_range(3..=4);
        let w: String = (0..n).map(|_| *SYLLABLES.choose(&mut rng).unwrap()).collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn record(id: &str, title: &str, abstract_text: &str) -> PaperRecord {
    PaperRecord {
        paper_id: id.to_owned(),
        title: title.to_owned(),
        abstract_text: abstract_text.to_owned(),
        categories: vec!["cs.DL".into()],
        version: None,
    }
}

/// Answers concept prompts from a table of planted labels.
pub struct PlantedLlm {
    pub answers: HashMap<String, [String; 3]>,
}

impl PlantedLlm {
    pub fn new(records: &[PaperRecord], concepts: &HashMap<String, [[String; 3]; 3]>) -> Self {
        let mut answers = HashMap::new();
        for r in records {
            if let Some(levels) = concepts.get(&r.paper_id) {
                for level in Level::ALL {
                    answers.insert(build_concept_prompt(r, level), levels[usize::from(level.get() - 1)].clone());
                }
            }
        }
        Self { answers }
    }
}

impl CompletionClient for PlantedLlm {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        let labels = self
            .answers
            .get(&request.prompt)
            .ok_or_else(|| ClientError::Other("unplanted prompt".into()))?;
        Ok(format!("Here you go:\n1. {}\n2) {}\n 3. {}\n", labels[0], labels[1], labels[2]))
    }
}

/// Papers grouped into fields; concepts carry the field, abstracts mostly noise.
pub struct ConceptCorpus {
    pub records: Vec<PaperRecord>,
    pub concepts: HashMap<String, [[String; 3]; 3]>,
    pub query: String,
    pub relevant: HashSet<String>,
}

pub const FIELDS: usize = 10;

/// `n` papers in [`FIELDS`] equal fields. The query names field `seed % FIELDS`.
pub fn concept_corpus(n: usize, seed: u64) -> ConceptCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filler = pseudo_words(1_000 + seed, 400);
    let field_words: Vec<Vec<String>> = (0..FIELDS).map(|f| pseudo_words(2_000 + seed * 100 + f as u64, 10)).collect();
    let discipline_words: Vec<Vec<String>> = (0..FIELDS / 2).map(|d| pseudo_words(3_000 + seed * 100 + d as u64, 6)).collect();
    let theme_words: Vec<Vec<String>> = (0..FIELDS * 5).map(|t| pseudo_words(4_000 + seed * 1_000 + t as u64, 6)).collect();
    let phrase = |words: &[String], i: usize| format!("{} {}", words[2 * i], words[2 * i + 1]);

    let target = (seed as usize) % FIELDS;
    let mut records = Vec::with_capacity(n);
    let mut concepts = HashMap::new();
    let mut relevant = HashSet::new();
    for i in 0..n {
        let field = i % FIELDS;
        let theme = field * 5 + rng.random_range(0..5);
        let id = format!("{seed:02}{i:05}");
        let title: Vec<&str> = (0..6).map(|_| filler.choose(&mut rng).unwrap().as_str()).collect();
        let mut words: Vec<String> = (0..40).map(|_| filler.choose(&mut rng).unwrap().clone()).collect();
        for _ in 0..3 {
            let from = if rng.random_bool(0.3) { field } else { rng.random_range(0..FIELDS) };
            let w = field_words[from].choose(&mut rng).unwrap().clone();
            let at = rng.random_range(0..=words.len());
            words.insert(at, w);
        }
        let abstract_text = words
            .chunks(11)
            .map(|c| format!("{}.", c.join(" ")))
            .collect::<Vec<_>>()
            .join(" ");
        records.push(record(&id, &format!("{} {i}", title.join(" ")), &abstract_text));

        let mut field_phrases: Vec<usize> = (0..5).collect();
        field_phrases.shuffle_with(&mut rng);
        let levels = [
            std::array::from_fn(|k| phrase(&discipline_words[field / 2], k)),
            std::array::from_fn(|k| phrase(&field_words[field], field_phrases[k])),
            std::array::from_fn(|k| phrase(&theme_words[theme], k)),
        ];
        concepts.insert(id.clone(), levels);
        if field == target {
            relevant.insert(id);
        }
    }
    let query = (0..5).map(|k| phrase(&field_words[target], k)).collect::<Vec<_>>().join(" ");
    ConceptCorpus {
        records,
        concepts,
        query,
        relevant,
    }
}

trait ShuffleWith {
    fn shuffle_with(&mut self, rng: &mut ChaCha8Rng);
}

impl<T> ShuffleWith for Vec<T> {
    fn shuffle_with(&mut self, rng: &mut ChaCha8Rng) {
        use rand::seq::SliceRandom;
        self.shuffle(rng);
    }
}

fn text_node(id: &str, rng: &mut ChaCha8Rng, vocab: &[String]) -> NodeAttrs {
    let mut sentence = |len: usize| {
        let words: Vec<&str> = (0..len).map(|_| vocab.choose(rng).unwrap().as_str()).collect();
        let mut s = words.join(" ");
        s.push('.');
        let mut c = s.chars();
        let first = c.next().unwrap().to_uppercase().collect::<String>();
        first + c.as_str()
    };
    let title = format!("{} {id}", sentence(4).trim_end_matches('.'));
    let abstract_text = (0..4).map(|_| sentence(8)).collect::<Vec<_>>().join(" ");
    let introduction = Some((0..3).map(|_| sentence(10)).collect::<Vec<_>>().join(" "));
    let related = (0..2).map(|_| sentence(9)).collect::<Vec<_>>().join(" ");
    let related_work = rng.random_bool(0.7).then_some(related);
    NodeAttrs {
        id: id.to_owned(),
        title,
        abstract_text,
        introduction,
        related_work,
        concepts: None,
    }
}

/// Random directed graph: `n` text-bearing nodes, each ordered pair an edge
/// with probability `p`, one to three sentences per edge.
pub fn random_graph(n: usize, p: f64, seed: u64) -> CitationGraph {
    random_graph_with(n, p, seed, 3)
}

pub fn random_graph_with(n: usize, p: f64, seed: u64, max_sentences: usize) -> CitationGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = pseudo_words(5_000, 200);
    let mut g = CitationGraph::new();
    let ids: Vec<String> = (0..n).map(|i| format!("n{i:04}")).collect();
    for id in &ids {
        g.add_node(text_node(id, &mut rng, &vocab));
    }
    for src in &ids {
        for dst in &ids {
            if src != dst && rng.random_bool(p) {
                let k = rng.random_range(1..=max_sentences);
                let sentences: Vec<String> = (0..k).map(|j| format!("{src} cites {dst} in sentence {j}.")).collect();
                g.add_edge(src, dst, &sentences).unwrap();
            }
        }
    }
    g
}

/// Brute-force in-degree of every node.
pub fn indegrees(g: &CitationGraph) -> BTreeMap<String, usize> {
    let mut deg: BTreeMap<String, usize> = g.node_ids().map(|id| (id.to_owned(), 0)).collect();
    for (_, dst, _) in g.edges() {
        *deg.get_mut(dst).unwrap() += 1;
    }
    deg
}

/// A corpus whose LaTeX sources cite each other by title, with the expected
/// edges and citing sentences recorded alongside.
pub struct CitationCorpus {
    /// The papers whose sources exist (the selection).
    pub papers: Vec<PaperRecord>,
    /// Corpus papers that are cited but never selected.
    pub outside: Vec<PaperRecord>,
    pub sources: BTreeMap<String, BTreeMap<String, String>>,
    pub edges: BTreeMap<(String, String), Vec<String>>,
    /// Cited by every other selected paper.
    pub hub: String,
    pub concepts: HashMap<String, [[String; 3]; 3]>,
}

pub const CITATION_QUERY: &str = "citation graph analysis of scholarly literature";

fn corpus_title(i: usize, words: &[String]) -> String {
    format!("{} {} Networks for {} Study {i}", cap(&words[i % words.len()]), cap(&words[(i * 7 + 3) % words.len()]), cap(&words[(i * 3 + 1) % words.len()]))
}

fn cap(w: &str) -> String {
    let mut c = w.chars();
    c.next().unwrap().to_uppercase().collect::<String>() + c.as_str()
}

/// How a cited title is written in the bibliography.
fn decorate_title(title: &str, style: usize) -> String {
    match style % 3 {
        0 => title.to_owned(),
        1 => {
            let mut words: Vec<String> = title.split(' ').map(str::to_owned).collect();
            words[0] = format!("{{{}}}", words[0]);
            words.join(" ").to_lowercase()
        }
        _ => format!("{{{title}}}."),
    }
}

pub fn citation_corpus(n: usize, seed: u64) -> CitationCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = pseudo_words(6_000 + seed, 60);
    let id = |i: usize| format!("2401.{:05}", i + 1);
    let papers: Vec<PaperRecord> = (0..n)
        .map(|i| {
            let abstract_text = format!(
                "We study {} in citation graphs. The method scales to large corpora. Results hold across {} venues.",
                vocab[i % vocab.len()],
                vocab[(i + 5) % vocab.len()]
            );
            record(&id(i), &corpus_title(i, &vocab), &abstract_text)
        })
        .collect();
    let outside: Vec<PaperRecord> = (0..3)
        .map(|j| {
            record(
                &format!("2402.{:05}", j + 1),
                &format!("Marine Survey of Coastal Reefs {j}"),
                "Reef fish counts over ten years. Surveys used divers.",
            )
        })
        .collect();
    let hub = id(0);
    let cite_forms = ["\\cite{K}", "\\citep{K}", "\\citet[p.~2]{K}", "\\parencite{K}", "\\citealp*{K}"];

    let mut sources = BTreeMap::new();
    let mut edges: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
    for i in 0..n {
        let src = id(i);
        let mut intro: Vec<String> = Vec::new();
        let mut related: Vec<String> = Vec::new();
        let mut bib: Vec<(String, String)> = Vec::new();
        let mut cited: BTreeSet<usize> = BTreeSet::new();
        let expect = |dst: &str, sentence: &str, edges: &mut BTreeMap<(String, String), Vec<String>>| {
            let list = edges.entry((src.clone(), dst.to_owned())).or_default();
            if !list.iter().any(|s| s == sentence) {
                list.push(sentence.to_owned());
            }
        };
        let form = |k: &str, rng: &mut ChaCha8Rng| cite_forms.choose(rng).unwrap().replace('K', k);

        intro.push(format!("Paper {i} opens with a broad motivation."));
        if i != 0 {
            let s = format!("Work {i} adopts the standard benchmark {}.", form("k0", &mut rng));
            expect(&hub, &format!("Work {i} adopts the standard benchmark \\cite{{k0}}."), &mut edges);
            intro.push(s);
            cited.insert(0);
        }
        for j in 1..n {
            if j == i || !rng.random_bool(0.12) {
                continue;
            }
            cited.insert(j);
            let key = format!("k{j}");
            let s = format!("Work {i} builds on result {j} {}.", form(&key, &mut rng));
            expect(&id(j), &format!("Work {i} builds on result {j} \\cite{{{key}}}."), &mut edges);
            related.push(s);
            if rng.random_bool(0.3) {
                related.push(format!("Result {j} also motivates part {i} {}.", form(&key, &mut rng)));
                expect(&id(j), &format!("Result {j} also motivates part {i} \\cite{{{key}}}."), &mut edges);
            }
        }
        let pair: Vec<usize> = cited.iter().copied().filter(|&j| j != 0).take(2).collect();
        if pair.len() == 2 {
            let (a, b) = (pair[0], pair[1]);
            related.push(format!("Work {i} compares {a} and {b} \\citep{{k{a}, k{b}}}."));
            let s = format!("Work {i} compares {a} and {b} \\cite{{k{a},k{b}}}.");
            expect(&id(a), &s, &mut edges);
            expect(&id(b), &s, &mut edges);
        }
        // self-citation, an unmatched external title, an unresolved key and a selection outsider
        related.push(format!("Our earlier version appears in \\cite{{self{i}}}."));
        related.push("A classic survey covers the area \\cite{ext1}.".into());
        related.push("Unpublished notes exist \\cite{nobib}.".into());
        let out = &outside[i % outside.len()];
        related.push("Reef studies are unrelated \\cite{reef}.".into());
        bib.push(("reef".into(), out.title.clone()));
        bib.push((format!("self{i}"), papers[i].title.clone()));
        bib.push(("ext1".into(), "A Survey Nobody Indexed".into()));
        for &j in &cited {
            bib.push((format!("k{j}"), papers[j].title.clone()));
        }
        // a citation only inside a float creates no edge
        let uncited = (1..n).find(|j| *j != i && !cited.contains(j));
        let float = match uncited {
            Some(j) => {
                bib.push((format!("k{j}"), papers[j].title.clone()));
                format!("\\begin{{figure}}[t]\n\\centering\n\\caption{{Adapted from \\cite{{k{j}}}.}}\n\\end{{figure}}\n")
            }
            None => String::new(),
        };

        let mut files = BTreeMap::new();
        let related_text = related.join("\n");
        let intro_text = intro.join("\n");
        let body_intro = if i % 4 == 1 {
            files.insert("sections/intro.tex".to_string(), format!("{intro_text}\n"));
            "\\input{sections/intro}".to_string()
        } else {
            intro_text
        };
        let use_bbl = i % 3 == 2;
        let bib_cmd = if use_bbl { "" } else { "\\bibliographystyle{plain}\n\\bibliography{refs}\n" };
        let main = format!(
            "\\documentclass{{article}}\n\\usepackage{{natbib}}\n% generated paper {i}\n\\begin{{document}}\n\\title{{{}}}\n\\maketitle\n\\begin{{abstract}}\n{}\n\\end{{abstract}}\n\\section{{Introduction}}\n{body_intro}\n{float}\\section{{Related Work}}\n{related_text}\n\\section{{Conclusion}}\nPaper {i} ends here.\n{bib_cmd}\\end{{document}}\n",
            papers[i].title, papers[i].abstract_text
        );
        files.insert("main.tex".to_string(), main);
        if use_bbl {
            let mut bbl = String::from("\\begin{thebibliography}{99}\n");
            for (k, t) in &bib {
                bbl.push_str(&format!("\\bibitem{{{k}}} A.~Writer.\n\\newblock \\emph{{{t}}}.\n\\newblock Venue, 2020.\n\n"));
            }
            bbl.push_str("\\end{thebibliography}\n");
            files.insert("main.bbl".to_string(), bbl);
        } else {
            let mut text = String::new();
            for (n_, (k, t)) in bib.iter().enumerate() {
                text.push_str(&format!("@article{{{k},\n  author = {{Writer, A.}},\n  title = {{{}}},\n  year = {{2020}}\n}}\n\n", decorate_title(t, n_)));
            }
            files.insert("refs.bib".to_string(), text);
        }
        sources.insert(src, files);
    }

    let mut concepts = HashMap::new();
    let planted = [
        ["computer science".to_string(), "information science".into(), "data science".into()],
        ["citation graph analysis".into(), "scholarly literature".into(), "graph mining".into()],
        ["citation networks".into(), "bibliometric indicators".into(), "literature graphs".into()],
    ];
    for p in &papers {
        concepts.insert(p.paper_id.clone(), planted.clone());
    }
    for p in &outside {
        concepts.insert(
            p.paper_id.clone(),
            [
                ["biology".into(), "ecology".into(), "earth science".into()],
                ["marine biology".into(), "coral reefs".into(), "fisheries".into()],
                ["reef surveys".into(), "diver counts".into(), "coastal habitats".into()],
            ],
        );
    }
    CitationCorpus {
        papers,
        outside,
        sources,
        edges,
        hub,
        concepts,
    }
}

impl CitationCorpus {
    pub fn all_records(&self) -> Vec<PaperRecord> {
        self.papers.iter().chain(&self.outside).cloned().collect()
    }

    /// Writes `snapshot.jsonl` and one source entry per paper under `dir`;
    /// every fifth paper as a gzipped tarball.
    pub fn write(&self, dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
        let snapshot = dir.join("snapshot.jsonl");
        let mut f = std::fs::File::create(&snapshot).unwrap();
        for r in self.all_records() {
            writeln!(f, "{}", r.to_json_line()).unwrap();
        }
        let src_dir = dir.join("sources");
        for (n, (id, files)) in self.sources.iter().enumerate() {
            if n % 5 == 4 {
                std::fs::create_dir_all(&src_dir).unwrap();
                let out = std::fs::File::create(src_dir.join(format!("{id}.tar.gz"))).unwrap();
                let gz = flate2::write::GzEncoder::new(out, flate2::Compression::fast());
                let mut tar = tar::Builder::new(gz);
                for (rel, text) in files {
                    let mut header = tar::Header::new_gnu();
                    header.set_size(text.len() as u64);
                    header.set_mode(0o644);
                    header.set_cksum();
                    tar.append_data(&mut header, rel, text.as_bytes()).unwrap();
                }
                tar.into_inner().unwrap().finish().unwrap();
            } else {
                for (rel, text) in files {
                    let p = src_dir.join(id).join(rel);
                    std::fs::create_dir_all(p.parent().unwrap()).unwrap();
                    std::fs::write(p, text).unwrap();
                }
            }
        }
        (snapshot, src_dir)
    }
}
