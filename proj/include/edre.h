#ifndef EDRE_H
#define EDRE_H

/* C interface to the edre shared library. Operations take an options JSON
 * string and return a result JSON string allocated by the library; release
 * results with edre_free. Errors come back as a status code, with a
 * thread-local message from edre_last_error. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum edre_status {
  EDRE_OK = 0,
  EDRE_ERR_IO = 1,
  EDRE_ERR_PARSE = 2,
  EDRE_ERR_INVALID = 3,
  EDRE_ERR_DUPLICATE = 4,
  EDRE_ERR_NOT_FOUND = 5,
  EDRE_ERR_AUTH = 6,
  EDRE_ERR_RATE_LIMIT = 7,
  EDRE_ERR_NETWORK = 8,
  EDRE_ERR_VERSION = 9,
  EDRE_ERR_FINGERPRINT = 10,
  EDRE_ERR_INTERNAL = 11
} edre_status;

/* Lowercase class name for a status ("io", "parse", ...); "ok" for EDRE_OK. */
const char* edre_status_name(edre_status status);

/* Message from the last failing call on this thread; empty if none. */
const char* edre_last_error(void);

void edre_free(char* p);

const char* edre_library_version(void);

typedef struct edre_model edre_model;
typedef struct edre_index edre_index;
typedef struct edre_server edre_server;

/* ---- Corpus ----
 * ingest options: {"store": path, "base_url": url, "repos": [..],
 *   "since": rfc3339, "until": rfc3339, "per_page"?: n, "token"?: s}
 *   result: {"fetched": n, "added": n}
 * apply_labels options: {"store": path, "labels": csv_path, "min_votes"?: n}
 *   result: {"reviews": n, "labeled": n}
 * stats options: {"store": path}
 *   result: {"text": rendered, "n_reviews": n, "avg_words": x,
 *            "avg_chars": x, "label_distribution": [4]} */
edre_status edre_ingest(const char* options_json, char** result_json);
edre_status edre_apply_labels(const char* options_json, char** result_json);
edre_status edre_corpus_stats(const char* options_json, char** result_json);

/* ---- Training and evaluation ----
 * Shared fields: "embedding": {"kind": "tfidf"|"external", "min_df"?: n,
 * "vectors"?: path}; "params": per-algorithm hyperparameters by field name
 * (alpha; lambda/step/max_iters/tolerance; C/epochs; trees/max_depth/
 * bootstrap; rounds/shrinkage/max_depth/subsample).
 *
 * train options: {"store", "algorithm", "seed", "model_out",
 *   "embedding"?, "params"?}
 *   result: {"model": path, "algorithm": s, "classes": [..],
 *            "dimension": n, "fingerprint": hex, "config": s}
 * evaluate options: {"store", "algorithms": [..] | "algorithm": s,
 *   "protocol": "repeated-kfold"|"holdout", "k"?, "repeats"?,
 *   "test_fraction"?, "seed", "embedding"?, "params"?, "out"?: path,
 *   "format"?: "text"|"csv"}
 *   result: {"text": s, "csv": s, "out": path|null}
 * grid_search options: {"store", "algorithm", "k"?, "repeats"?, "seed",
 *   "embedding"?}
 *   result: {"best": s, "best_macro_f1": x, "best_accuracy": x,
 *            "table": [{"config", "macro_f1", "accuracy"}]}
 * render_report options: {"in": csv_path}
 *   result: {"text": s} */
edre_status edre_train(const char* options_json, char** result_json);
edre_status edre_evaluate(const char* options_json, char** result_json);
edre_status edre_grid_search(const char* options_json, char** result_json);
edre_status edre_render_report(const char* options_json, char** result_json);

/* ---- Retrieval ----
 * build_index options: {"store", "model", "out", "min_similarity"?: x,
 *   "project"?: s}
 *   result: {"out": path, "indexed": n, "skipped_unclear": n,
 *            "skipped_empty_vector": n, "skipped_project": n,
 *            "fingerprint": hex} */
edre_status edre_build_index(const char* options_json, char** result_json);

edre_status edre_model_load(const char* path, edre_model** out);
edre_status edre_model_info(const edre_model* model, char** result_json);
/* result: {"label": s, "low_confidence": b, "classes": [..], "scores": [..]} */
edre_status edre_model_predict(const edre_model* model, const char* text, char** result_json);
void edre_model_free(edre_model* model);

edre_status edre_index_load(const char* path, edre_index** out);
edre_status edre_index_info(const edre_index* index, char** result_json);
void edre_index_free(edre_index* index);

/* result: {"clarity": s, "low_confidence": b, "classes": [..],
 *          "scores": [..], "hits": [{"rank", "review_id", "similarity",
 *          "body", "thread_url"}]} */
edre_status edre_explain(const edre_model* model, const edre_index* index, const char* text,
                         char** result_json);

/* ---- Service ----
 * options: {"model": path, "index": path, "posted_log": path,
 *   "host"?: s, "port"?: n (0 picks a free port), "base_url": url,
 *   "token"?: s, "secret"?: s, "per_page"?: n}
 * Missing token/secret fall back to EDRE_TOKEN / EDRE_WEBHOOK_SECRET. */
edre_status edre_serve_start(const char* options_json, edre_server** out, int* bound_port);
/* Reposts queued post failures, once each; *posted gets the success count. */
edre_status edre_serve_flush(edre_server* server, size_t* posted);
edre_status edre_serve_stop(edre_server* server);
void edre_serve_free(edre_server* server);

#ifdef __cplusplus
}
#endif

#endif /* EDRE_H */
