#ifndef LONGSYNTH_H
#define LONGSYNTH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LsSelection {
  LS_SELECTION_SELF_REPEAT = 0,
  LS_SELECTION_TOP_K = 1,
  LS_SELECTION_RANDOM_R = 2,
  LS_SELECTION_TAIL_K = 3,
  LS_SELECTION_RANDOM_D = 4,
} LsSelection;

typedef enum LsPosition {
  LS_POSITION_HEAD = 0,
  LS_POSITION_TAIL = 1,
  LS_POSITION_RANDOM = 2,
} LsPosition;

typedef enum LsStatus {
  LS_STATUS_OK = 0,
  LS_STATUS_NULL_ARGUMENT = 1,
  LS_STATUS_INVALID_UTF8 = 2,
  LS_STATUS_CONFIG = 3,
  LS_STATUS_IO = 4,
  LS_STATUS_RECORD = 5,
  LS_STATUS_INDEX_FORMAT = 6,
  LS_STATUS_EMBEDDING = 7,
  LS_STATUS_DIMENSION = 8,
  LS_STATUS_EMPTY_POOL = 9,
  LS_STATUS_INTEGRITY = 10,
  LS_STATUS_NOT_FOUND = 11,
  LS_STATUS_INTERRUPTED = 12,
  LS_STATUS_BUFFER_TOO_SMALL = 13,
  LS_STATUS_PANIC = 14,
} LsStatus;

typedef enum LsRejectReason {
  LS_REJECT_REASON_NONE = 0,
  LS_REJECT_REASON_BELOW_TARGET = 1,
  LS_REJECT_REASON_POOL_EXHAUSTED = 2,
  LS_REJECT_REASON_EMPTY_DOCUMENT = 3,
  LS_REJECT_REASON_FAILED = 4,
} LsRejectReason;

/**
 * A loaded chunk index together with the embedder that produced it.
 */
typedef struct LsIndex LsIndex;

/**
 * Synthesis settings. Granularity is always taken from the index.
 */
typedef struct LsSynthesisConfig {
  size_t target_tokens;
  /**
   * Characters per token.
   */
  double encoding_rate;
  double adjustment;
  enum LsSelection selection;
  enum LsPosition position;
  size_t candidate_pool;
  uint64_t seed;
  bool truncate_to_target;
  /**
   * 0 uses every core.
   */
  size_t workers;
} LsSynthesisConfig;

typedef struct LsBudget {
  uint64_t total_chars;
  uint64_t meta_chars;
  int64_t remaining_chars;
  double chars_per_meta_chunk;
  size_t k;
  bool skip;
} LsBudget;

typedef struct LsHit {
  uint64_t chunk_id;
  float score;
} LsHit;

typedef struct LsReport {
  size_t attempted;
  size_t accepted;
  size_t rejected;
  /**
   * NaN when nothing was accepted.
   */
  double min_extension_ratio;
  /**
   * NaN when no negatives were placed.
   */
  double similarity_mean;
} LsReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *ls_version(void);

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ls_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void ls_string_free(char *s);

/**
 * Defaults: 8192 tokens, 4.0 chars/token, w = 1.5, TopK, Head, pool 512.
 */
struct LsSynthesisConfig ls_synthesis_config_default(void);

/**
 * Negative budget for a meta-document of `meta_chars` characters split into
 * `meta_chunks` chunks at `granularity`.
 *
 * # Safety
 * `config` must point to a valid config; `out` must be writable.
 */
enum LsStatus ls_negative_budget(uint64_t meta_chars,
                                 size_t meta_chunks,
                                 size_t granularity,
                                 const struct LsSynthesisConfig *config,
                                 struct LsBudget *out);

/**
 * Characters per token of a JSONL corpus under the whitespace tokenizer.
 *
 * # Safety
 * `corpus_path` must be a NUL-terminated string; `out` must be writable.
 */
enum LsStatus ls_measure_encoding_rate(const char *corpus_path, double *out);

/**
 * Chunks a JSONL corpus at `granularity` and indexes it with the local
 * embedder of dimension `dimension`.
 *
 * # Safety
 * `corpus_path` must be a NUL-terminated string; `out` must be writable.
 * On success `*out` owns a handle to release with [`ls_index_free`].
 */
enum LsStatus ls_index_build(const char *corpus_path,
                             size_t granularity,
                             size_t dimension,
                             struct LsIndex **out);

/**
 * Loads an index snapshot. `endpoint` is required only for indexes built
 * with the remote embedder and may be NULL otherwise.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `endpoint` NULL or one; `out`
 * must be writable.
 */
enum LsStatus ls_index_load(const char *path, const char *endpoint, struct LsIndex **out);

/**
 * # Safety
 * `index` must be a live handle; `path` a NUL-terminated string.
 */
enum LsStatus ls_index_save(const struct LsIndex *index, const char *path);

/**
 * # Safety
 * `index` must be NULL or a handle from this library not yet freed.
 */
void ls_index_free(struct LsIndex *index);

/**
 * Number of chunks; 0 for NULL.
 *
 * # Safety
 * `index` must be NULL or a live handle.
 */
size_t ls_index_len(const struct LsIndex *index);

/**
 * # Safety
 * `index` must be NULL or a live handle.
 */
size_t ls_index_dimension(const struct LsIndex *index);

/**
 * # Safety
 * `index` must be NULL or a live handle.
 */
size_t ls_index_granularity(const struct LsIndex *index);

/**
 * Top-`k` chunks for `query_text`, best first, skipping chunks of
 * `exclude_doc_id` when it is not NULL. Writes up to `k` hits into `hits`
 * (capacity `capacity`, which must be at least `k`) and the count to
 * `out_len`.
 *
 * # Safety
 * `index` must be a live handle; strings NUL-terminated; `hits` must have
 * room for `capacity` entries; `out_len` writable.
 */
enum LsStatus ls_index_query(const struct LsIndex *index,
                             const char *query_text,
                             size_t k,
                             const char *exclude_doc_id,
                             struct LsHit *hits,
                             size_t capacity,
                             size_t *out_len);

/**
 * Text and origin of one chunk. `out_text` receives a string to release
 * with [`ls_string_free`]; `out_doc_id` likewise when not NULL;
 * `out_ordinal` (1-based) when not NULL.
 *
 * # Safety
 * `index` must be a live handle; `out_text` writable; the optional
 * pointers NULL or writable.
 */
enum LsStatus ls_index_chunk(const struct LsIndex *index,
                             uint64_t chunk_id,
                             char **out_text,
                             char **out_doc_id,
                             size_t *out_ordinal);

/**
 * Extends one document. On acceptance `*out_json` receives the dataset
 * record as a JSON string (release with [`ls_string_free`]) and
 * `*out_reason` is `None`; otherwise `*out_json` is NULL and `*out_reason`
 * says why.
 *
 * # Safety
 * `index` and `config` must be valid; strings NUL-terminated; out-pointers
 * writable.
 */
enum LsStatus ls_extend_document(const struct LsIndex *index,
                                 const struct LsSynthesisConfig *config,
                                 const char *doc_id,
                                 const char *doc_text,
                                 char **out_json,
                                 enum LsRejectReason *out_reason);

/**
 * Extends every document of a JSONL corpus, writing accepted records to
 * `dataset_path` and rejects to `rejects_path`.
 *
 * # Safety
 * `index` and `config` must be valid; paths NUL-terminated; `out_report`
 * NULL or writable.
 */
enum LsStatus ls_synthesize_file(const struct LsIndex *index,
                                 const struct LsSynthesisConfig *config,
                                 const char *corpus_path,
                                 const char *dataset_path,
                                 const char *rejects_path,
                                 struct LsReport *out_report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LONGSYNTH_H */
