#ifndef LITGRAPH_H
#define LITGRAPH_H

#include <stddef.h>
#include <stdint.h>

typedef enum LgStatus {
  LG_STATUS_OK = 0,
  LG_STATUS_NULL_ARGUMENT = 1,
  LG_STATUS_INVALID_UTF8 = 2,
  LG_STATUS_INVALID_ARGUMENT = 3,
  LG_STATUS_NOT_FOUND = 4,
  LG_STATUS_IO = 5,
  LG_STATUS_PARSE = 6,
  LG_STATUS_PANIC = 7,
} LgStatus;

typedef enum LgMethod {
  LG_METHOD_CONCEPT = 0,
  LG_METHOD_BASELINE = 1,
} LgMethod;

typedef struct LgCorpus LgCorpus;

typedef struct LgEmbeddingStore LgEmbeddingStore;

typedef struct LgGraph LgGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until the
// next failing call on the same thread; do not free.
const char *lg_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void lg_string_free(char *s);

// Cosine similarity of two `dim`-length vectors.
//
// # Safety
// `a` and `b` must point to `dim` floats; `out` must be writable.
enum LgStatus lg_cosine(const float *a, const float *b, size_t dim, double *out);

// Opens an ingested corpus directory (`corpus.jsonl`).
//
// # Safety
// `dir` must be a nul-terminated string; `out` must be writable.
enum LgStatus lg_corpus_open(const char *dir, struct LgCorpus **out);

// Number of records; 0 for a null handle.
//
// # Safety
// `corpus` must be null or a live handle.
size_t lg_corpus_count(const struct LgCorpus *corpus);

// One record as JSON (`id`, `title`, `abstract`, `categories`, `version`).
//
// # Safety
// `corpus` must be a live handle, `paper_id` a nul-terminated string and
// `out_json` writable.
enum LgStatus lg_corpus_get_json(const struct LgCorpus *corpus,
                                 const char *paper_id,
                                 char **out_json);

// # Safety
// `corpus` must be null or a handle not yet freed.
void lg_corpus_free(struct LgCorpus *corpus);

// Loads an `embeddings.jsonl` file.
//
// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
enum LgStatus lg_embeddings_load(const char *path, struct LgEmbeddingStore **out);

// Number of papers with any vector; 0 for a null handle.
//
// # Safety
// `store` must be null or a live handle.
size_t lg_embeddings_len(const struct LgEmbeddingStore *store);

// Vector dimension, or 0 when unknown.
//
// # Safety
// `store` must be null or a live handle.
size_t lg_embeddings_dim(const struct LgEmbeddingStore *store);

// Top-`k` papers for a query vector as retrieval-result JSON.
//
// # Safety
// `query` must point to `dim` floats, `store` must be a live handle and
// `out_json` writable.
enum LgStatus lg_retrieve_top_k(const struct LgEmbeddingStore *store,
                                const float *query,
                                size_t dim,
                                size_t k,
                                enum LgMethod method,
                                char **out_json);

// # Safety
// `store` must be null or a handle not yet freed.
void lg_embeddings_free(struct LgEmbeddingStore *store);

// Loads a `graph.json` file.
//
// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
enum LgStatus lg_graph_load(const char *path, struct LgGraph **out);

// # Safety
// `graph` must be null or a live handle.
size_t lg_graph_node_count(const struct LgGraph *graph);

// # Safety
// `graph` must be null or a live handle.
size_t lg_graph_edge_count(const struct LgGraph *graph);

// `[[paper_id, indegree], ...]` for the `n` most-cited nodes.
//
// # Safety
// `graph` must be a live handle and `out_json` writable.
enum LgStatus lg_graph_top_indegree_json(const struct LgGraph *graph, size_t n, char **out_json);

// `{nodes, edges, token_estimate}`.
//
// # Safety
// `graph` must be a live handle and `out_json` writable.
enum LgStatus lg_graph_stats_json(const struct LgGraph *graph, char **out_json);

// # Safety
// `graph` must be null or a handle not yet freed.
void lg_graph_free(struct LgGraph *graph);

// Processes one paper's LaTeX source (directory or archive) with default
// settings and returns the processed document as JSON.
//
// # Safety
// `source` and `paper_id` must be nul-terminated strings and `out_json`
// writable.
enum LgStatus lg_process_latex(const char *source, const char *paper_id, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LITGRAPH_H */
