mod common;

use std::collections::BTreeMap;

use common::pipeline::build_planted_graph as build;
use common::synth::{citation_corpus, indegrees, random_graph};
use litgraph::graph::top_indegree;
use litgraph::CitationGraph;
use proptest::prelude::*;

fn edge_map(g: &CitationGraph) -> BTreeMap<(String, String), Vec<String>> {
    g.edges()
        .map(|(s, d, sent)| ((s.to_owned(), d.to_owned()), sent.to_vec()))
        .collect()
}

#[test]
fn planted_edges_and_sentences_reproduced() {
    for seed in 0..3 {
        let corpus = citation_corpus(50, seed);
        assert!(corpus.edges.len() > 100);
        assert!(corpus.edges.values().any(|s| s.len() > 1));
        let g = build(&corpus);
        assert_eq!(g.node_count(), 50);
        assert_eq!(edge_map(&g), corpus.edges, "seed {seed}");
    }
}

#[test]
fn hub_ranks_first() {
    let corpus = citation_corpus(50, 7);
    let g = build(&corpus);
    let top = top_indegree(&g, 3);
    assert_eq!(top[0], (corpus.hub.clone(), 49));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn top_indegree_matches_brute_force(n in 1usize..60, p in 0.0f64..0.3, seed in any::<u64>(), k in 1usize..20) {
        let g = random_graph(n, p, seed);
        let deg = indegrees(&g);
        let mut oracle: Vec<(String, usize)> = deg.into_iter().collect();
        oracle.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        oracle.truncate(k);
        prop_assert_eq!(top_indegree(&g, k), oracle);
    }

    #[test]
    fn json_round_trip(n in 1usize..30, p in 0.0f64..0.4, seed in any::<u64>()) {
        let g = random_graph(n, p, seed);
        let back = CitationGraph::from_json(&g.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, g);
    }
}
