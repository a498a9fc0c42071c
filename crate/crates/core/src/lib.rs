//! Literature-graph curation and benchmarking.
//!
//! The crate turns a JSON-lines scholarly metadata snapshot plus per-paper
//! LaTeX sources into a domain-specific citation subgraph whose nodes carry
//! title, abstract, introduction, related work and three-level concept
//! annotations, and whose edges carry the citing sentences. From that graph
//! it generates seven instruction/benchmark task datasets and evaluates a
//! model endpoint on them.
//!
//! Stages hand off through files so a long crawl can resume:
//!
//! ```text
//! ingest -> concepts -> embed -> retrieve -> process -> build-graph -> gen-datasets -> evaluate
//! ```
//!
//! - [`corpus`]: streaming snapshot ingestion and the on-disk corpus store
//! - [`concepts`]: concept prompts, completion parsing, embeddings store
//! - [`client`]: completion / embedding endpoint contracts and HTTP clients
//! - [`retriever`]: cosine top-k retrieval, histograms, recall
//! - [`latex`]: LaTeX source cleaning, flattening, citation extraction
//! - [`graph`]: subgraph assembly, hold-out split, in-degree queries
//! - [`taskgen`]: instruction dataset generation with negative sampling
//! - [`eval`]: inference harness and metrics
//! - [`pipeline`]: configuration and stage orchestration

pub mod client;
pub mod concepts;
pub mod corpus;
pub mod eval;
pub mod graph;
pub mod latex;
pub mod pipeline;
pub mod retriever;
pub mod taskgen;

mod jsonl;

pub use client::{CompletionClient, CompletionRequest, EmbeddingClient};
pub use concepts::{ConceptSet, EmbeddingStore};
pub use corpus::{CorpusStore, PaperRecord};
pub use graph::{CitationGraph, GraphSplit};
pub use latex::{ProcessedDoc, SourceTree};
pub use retriever::{Method, Query, RetrievalResult};
pub use taskgen::{TaskDataset, TaskInstance, TaskKind};
