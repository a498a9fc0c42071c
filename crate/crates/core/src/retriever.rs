//! Cosine top-k retrieval over an [`EmbeddingStore`].
//!
//! Two scorers: the concept method compares the query to the mean of a
//! paper's three level vectors; the baseline compares it to the
//! title+abstract vector. Top-k is exact, ties ordered by ascending id.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{EmbeddingStore, PaperEmbeddings};

pub const DEFAULT_K: usize = 10_000;
pub const DEFAULT_BINS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum RetrieveError {
    #[error("vector dimensions differ: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("paper {0} has no embedding for this method")]
    MissingEmbedding(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no scorable papers in the store")]
    EmptyStore,
    #[error("histogram needs at least one bin")]
    ZeroBins,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Mean of the three concept-level vectors.
    #[default]
    Concept,
    /// Title+abstract vector.
    Baseline,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "concept" => Ok(Method::Concept),
            "baseline" => Ok(Method::Baseline),
            other => Err(format!("unknown method `{other}` (expected concept|baseline)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub text: String,
    pub vector: Vec<f32>,
}

impl Query {
    pub fn new(text: impl Into<String>, vector: Vec<f32>) -> Self {
        Self {
            text: text.into(),
            vector,
        }
    }
}

/// Cosine similarity accumulated in f64, clamped to [-1, 1].
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64, RetrieveError> {
    if u.len() != v.len() {
        return Err(RetrieveError::DimMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0f64, 0f64, 0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(RetrieveError::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Component-wise mean of the three level vectors, in f64.
pub fn level_mean(levels: &[Vec<f32>; 3]) -> Vec<f64> {
    (0..levels[0].len())
        .map(|i| {
            (f64::from(levels[0][i]) + f64::from(levels[1][i]) + f64::from(levels[2][i])) / 3.0
        })
        .collect()
}

fn cosine_f64(u: &[f32], v: &[f64]) -> Result<f64, RetrieveError> {
    if u.len() != v.len() {
        return Err(RetrieveError::DimMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0f64, 0f64, 0f64);
    for (&a, &b) in u.iter().zip(v) {
        let a = f64::from(a);
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(RetrieveError::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

fn score_entry(query: &Query, entry: &PaperEmbeddings, method: Method) -> Option<Result<f64, RetrieveError>> {
    match method {
        Method::Concept => entry
            .levels
            .as_ref()
            .map(|levels| cosine_f64(&query.vector, &level_mean(levels))),
        Method::Baseline => entry.text.as_ref().map(|t| cosine(&query.vector, t)),
    }
}

/// `cos(q, (l1 + l2 + l3) / 3)` for one paper.
pub fn concept_score(query: &Query, paper_id: &str, store: &EmbeddingStore) -> Result<f64, RetrieveError> {
    store
        .get(paper_id)
        .and_then(|e| score_entry(query, e, Method::Concept))
        .unwrap_or_else(|| Err(RetrieveError::MissingEmbedding(paper_id.to_owned())))
}

/// `cos(q, title+abstract vector)` for one paper.
pub fn baseline_score(query: &Query, paper_id: &str, store: &EmbeddingStore) -> Result<f64, RetrieveError> {
    store
        .get(paper_id)
        .and_then(|e| score_entry(query, e, Method::Baseline))
        .unwrap_or_else(|| Err(RetrieveError::MissingEmbedding(paper_id.to_owned())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub paper_id: String,
    pub score: f64,
}

/// Descending by score, then ascending by id.
pub fn rank_order(a: &Scored, b: &Scored) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.paper_id.cmp(&b.paper_id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    #[serde(default)]
    pub query: String,
    #[serde(default)]
    pub method: Method,
    pub k: usize,
    pub ranked: Vec<Scored>,
    /// Set when `k` exceeded the number of scorable papers.
    #[serde(default)]
    pub truncated: bool,
}

impl RetrievalResult {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.ranked.iter().map(|s| s.paper_id.as_str())
    }
}

/// Scores every paper that has the method's vector, in id order.
pub fn score_all(query: &Query, store: &EmbeddingStore, method: Method) -> Result<Vec<Scored>, RetrieveError> {
    if let Some(dim) = store.dim() {
        if dim != query.vector.len() {
            return Err(RetrieveError::DimMismatch(query.vector.len(), dim));
        }
    }
    let entries: Vec<_> = store.entries().iter().collect();
    entries
        .par_iter()
        .filter_map(|(id, entry)| {
            score_entry(query, entry, method).map(|r| {
                r.map(|score| Scored {
                    paper_id: (*id).clone(),
                    score,
                })
            })
        })
        .collect()
}

/// Exact top-k by selection over all scores.
pub fn retrieve_top_k(
    query: &Query,
    store: &EmbeddingStore,
    k: usize,
    method: Method,
) -> Result<RetrievalResult, RetrieveError> {
    if k == 0 {
        return Err(RetrieveError::ZeroK);
    }
    let mut scored = score_all(query, store, method)?;
    if scored.is_empty() {
        return Err(RetrieveError::EmptyStore);
    }
    let truncated = k > scored.len();
    if truncated {
        log::warn!(
            "k = {k} exceeds the {} scorable papers; returning all",
            scored.len()
        );
    } else if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_by(rank_order);
    Ok(RetrievalResult {
        query: query.text.clone(),
        method,
        k,
        ranked: scored,
        truncated,
    })
}

/// `|retrieved ∩ truth| / |truth|`.
pub fn recall_at_k(result: &RetrievalResult, ground_truth: &HashSet<String>) -> f64 {
    if ground_truth.is_empty() {
        return 0.0;
    }
    let hits = result
        .ids()
        .collect::<HashSet<_>>()
        .into_iter()
        .filter(|id| ground_truth.contains(*id))
        .count();
    hits as f64 / ground_truth.len() as f64
}

/// Equal-width bins over the observed `[min, max]` score range.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn from_scores(scores: &[f64], bins: usize) -> Result<Self, RetrieveError> {
        if bins == 0 {
            return Err(RetrieveError::ZeroBins);
        }
        if scores.is_empty() {
            return Err(RetrieveError::EmptyStore);
        }
        let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0usize; bins];
        let width = hi - lo;
        for &s in scores {
            let idx = if width > 0.0 {
                (((s - lo) / width) * bins as f64) as usize
            } else {
                0
            };
            counts[idx.min(bins - 1)] += 1;
        }
        Ok(Self { lo, hi, counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `(bin_lo, bin_hi, count)` per bin.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        let n = self.counts.len() as f64;
        let width = (self.hi - self.lo) / n;
        self.counts.iter().enumerate().map(move |(i, &c)| {
            let lo = self.lo + width * i as f64;
            let hi = if i + 1 == self.counts.len() {
                self.hi
            } else {
                self.lo + width * (i + 1) as f64
            };
            (lo, hi, c)
        })
    }

    /// CSV with header `bin_lo,bin_hi,count`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_lo,bin_hi,count")?;
        for (lo, hi, c) in self.bins() {
            writeln!(out, "{lo},{hi},{c}")?;
        }
        out.flush()
    }
}

pub fn similarity_histogram(
    query: &Query,
    store: &EmbeddingStore,
    bins: usize,
    method: Method,
) -> Result<Histogram, RetrieveError> {
    if bins == 0 {
        return Err(RetrieveError::ZeroBins);
    }
    let scores: Vec<f64> = score_all(query, store, method)?
        .into_iter()
        .map(|s| s.score)
        .collect();
    Histogram::from_scores(&scores, bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::assert_close;

    mod approx_eq {
        macro_rules! assert_close {
            ($a:expr, $b:expr) => {
                assert!((($a) - ($b)).abs() < 1e-8, "{} != {}", $a, $b)
            };
        }
        pub(crate) use assert_close;
    }

    #[test]
    fn cosine_closed_forms() {
        assert_close!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_close!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_close!(cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap(), 0.70710678);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(RetrieveError::ZeroVector));
        assert_eq!(cosine(&[1.0], &[1.0, 0.0]), Err(RetrieveError::DimMismatch(1, 2)));
    }

    fn store_with(levels: &[(&str, [Vec<f32>; 3])]) -> EmbeddingStore {
        let mut s = EmbeddingStore::new();
        for (id, l) in levels {
            s.insert_levels(*id, l.clone()).unwrap();
        }
        s
    }

    #[test]
    fn identical_levels_score_one() {
        let q = Query::new("q", vec![0.3, -0.2, 0.9]);
        let store = store_with(&[("a", [q.vector.clone(), q.vector.clone(), q.vector.clone()])]);
        assert_close!(concept_score(&q, "a", &store).unwrap(), 1.0);
    }

    #[test]
    fn basis_levels_against_their_mean() {
        let store = store_with(&[(
            "a",
            [vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        )]);
        let q = Query::new("q", vec![1.0, 1.0, 1.0]);
        assert_close!(concept_score(&q, "a", &store).unwrap(), 1.0);
    }

    #[test]
    fn missing_embeddings() {
        let mut store = EmbeddingStore::new();
        store.insert_text("t", vec![1.0, 0.0]).unwrap();
        let q = Query::new("q", vec![1.0, 0.0]);
        assert_eq!(
            concept_score(&q, "t", &store),
            Err(RetrieveError::MissingEmbedding("t".into()))
        );
        assert!(baseline_score(&q, "zzz", &store).is_err());
        assert_close!(baseline_score(&q, "t", &store).unwrap(), 1.0);
    }

    #[test]
    fn single_paper_any_k() {
        let store = store_with(&[("only", [vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]])]);
        let q = Query::new("q", vec![1.0, 0.0]);
        let r = retrieve_top_k(&q, &store, 50, Method::Concept).unwrap();
        assert_eq!(r.ranked.len(), 1);
        assert!(r.truncated);
        assert_close!(r.ranked[0].score, concept_score(&q, "only", &store).unwrap());
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let v = [vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]];
        let store = store_with(&[("b", v.clone()), ("a", v.clone()), ("c", v)]);
        let q = Query::new("q", vec![1.0, 0.0]);
        let r = retrieve_top_k(&q, &store, 2, Method::Concept).unwrap();
        let ids: Vec<_> = r.ids().collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn zero_k_and_empty_store() {
        let q = Query::new("q", vec![1.0]);
        assert_eq!(
            retrieve_top_k(&q, &EmbeddingStore::new(), 0, Method::Concept),
            Err(RetrieveError::ZeroK)
        );
        assert_eq!(
            retrieve_top_k(&q, &EmbeddingStore::new(), 1, Method::Concept),
            Err(RetrieveError::EmptyStore)
        );
    }

    #[test]
    fn histogram_identical_scores_single_bin() {
        let h = Histogram::from_scores(&[0.4; 17], 10).unwrap();
        assert_eq!(h.counts[0], 17);
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
    }

    #[test]
    fn histogram_csv_layout() {
        let h = Histogram::from_scores(&[0.0, 0.5, 1.0], 2).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "bin_lo,bin_hi,count\n0,0.5,1\n0.5,1,2\n"
        );
    }

    #[test]
    fn recall_cases() {
        let result = |ids: &[&str]| RetrievalResult {
            query: String::new(),
            method: Method::Concept,
            k: ids.len(),
            ranked: ids
                .iter()
                .map(|id| Scored {
                    paper_id: id.to_string(),
                    score: 0.0,
                })
                .collect(),
            truncated: false,
        };
        let truth: HashSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        assert_eq!(recall_at_k(&result(&["a", "b"]), &truth), 1.0);
        assert_eq!(recall_at_k(&result(&["c", "d"]), &truth), 0.0);
    }
}
