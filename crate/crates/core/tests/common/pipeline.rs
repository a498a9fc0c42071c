use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use litgraph::client::{ClientError, CompletionClient, CompletionRequest, HashingEmbedder};
use litgraph::corpus::build_corpus_index;
use litgraph::graph::build_subgraph;
use litgraph::latex::{process_tree, LatexConfig};
use litgraph::pipeline::{run_pipeline, Artifacts, PipelineConfig, PipelineError, Services, Stage};

use litgraph::{CitationGraph, SourceTree};

use super::synth::{citation_corpus, CitationCorpus, PlantedLlm, CITATION_QUERY};

/// Model endpoint that answers every prompt the same way.
pub struct ConstantModel(pub &'static str);

impl CompletionClient for ConstantModel {
    fn complete(&self, _: &CompletionRequest) -> Result<String, ClientError> {
        Ok(self.0.to_owned())
    }
}

pub struct FixtureRun {
    pub corpus: CitationCorpus,
    pub cfg: PipelineConfig,
    pub art: Artifacts,
    pub lines: Result<Vec<String>, PipelineError>,
}

/// The full default pipeline over a planted `n`-paper corpus, all endpoints in-process.
pub fn run_fixture_pipeline(dir: &Path, n: usize, jobs: usize) -> FixtureRun {
    let corpus = citation_corpus(n, 42);
    let (snapshot, source_dir) = corpus.write(dir);
    let out = dir.join("out");
    let cfg = PipelineConfig {
        snapshot: Some(snapshot),
        source_dir: Some(source_dir),
        out_dir: out.clone(),
        query: Some(CITATION_QUERY.into()),
        k: n,
        seed: Some(17),
        jobs,
        holdout: 0.2,
        retry_attempts: 1,
        ..PipelineConfig::default()
    };
    let art = Artifacts::under(&out);
    let services = Services {
        llm: Some(Box::new(PlantedLlm::new(&corpus.all_records(), &corpus.concepts))),
        embedder: Some(Box::new(HashingEmbedder::new(cfg.hashing_dim))),
        model: Some(Box::new(ConstantModel("yes"))),
    };
    let lines = run_pipeline(&cfg, &art, &Stage::DEFAULT_RUN, &services);
    FixtureRun { corpus, cfg, art, lines }
}

/// Processes every planted source tree and builds the graph over the planted papers.
pub fn build_planted_graph(corpus: &CitationCorpus) -> CitationGraph {
    let store = build_corpus_index(corpus.all_records());
    let docs: Vec<_> = corpus
        .sources
        .iter()
        .map(|(id, files)| {
            let tree = SourceTree::from_files(files.clone());
            process_tree(&tree, id, &LatexConfig::default()).unwrap()
        })
        .collect();
    let selected: BTreeSet<String> = corpus.papers.iter().map(|p| p.paper_id.clone()).collect();
    build_subgraph(&selected, &docs, &store, &HashMap::new()).0
}
