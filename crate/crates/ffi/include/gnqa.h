#ifndef GNQA_H
#define GNQA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GnqaStatus {
  GNQA_STATUS_OK = 0,
  GNQA_STATUS_NULL_POINTER = 1,
  GNQA_STATUS_INVALID_UTF8 = 2,
  GNQA_STATUS_IO = 3,
  GNQA_STATUS_PARSE = 4,
  GNQA_STATUS_VALIDATION = 5,
  GNQA_STATUS_SHAPE = 6,
  GNQA_STATUS_CONFIG = 7,
  GNQA_STATUS_CHECKPOINT = 8,
  GNQA_STATUS_RUNTIME = 9,
  GNQA_STATUS_PANIC = 10,
} GnqaStatus;

// A trained model together with the word vectors it was trained with.
typedef struct GnqaModel GnqaModel;

// A parsed, validated scene graph.
typedef struct GnqaSceneGraph GnqaSceneGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// The message of the last failed call on this thread, or NULL. Valid
// until the next failing call on the same thread.
const char *gnqa_last_error(void);

// Library version as a static NUL-terminated string.
const char *gnqa_version(void);

// # Safety
// `s` must be NULL or a string returned by this library.
void gnqa_string_free(char *s);

// Parses and validates one scene graph in JSON.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum GnqaStatus gnqa_scene_graph_parse(const char *json, struct GnqaSceneGraph **out);

// # Safety
// `g` must be NULL or a handle from [`gnqa_scene_graph_parse`].
void gnqa_scene_graph_free(struct GnqaSceneGraph *g);

// Node count, or 0 for NULL.
//
// # Safety
// `g` must be NULL or a live scene-graph handle.
size_t gnqa_scene_graph_num_nodes(const struct GnqaSceneGraph *g);

// Edge count, or 0 for NULL.
//
// # Safety
// `g` must be NULL or a live scene-graph handle.
size_t gnqa_scene_graph_num_edges(const struct GnqaSceneGraph *g);

// Loads a checkpoint and the word-vector file it should be used with.
//
// # Safety
// Both paths must be NUL-terminated strings and `out` writable.
enum GnqaStatus gnqa_model_load(const char *checkpoint_path,
                                const char *embeddings_path,
                                struct GnqaModel **out);

// # Safety
// `m` must be NULL or a handle from [`gnqa_model_load`].
void gnqa_model_free(struct GnqaModel *m);

// GN forward passes run by this model since load or the last reset.
//
// # Safety
// `m` must be NULL or a live model handle.
uint64_t gnqa_model_gn_evaluations(const struct GnqaModel *m);

// # Safety
// `m` must be NULL or a live model handle.
void gnqa_model_reset_gn_evaluations(const struct GnqaModel *m);

// Writes one logit per candidate into `out_scores[0..n_candidates]`.
// `image` may be NULL for models that do not use image features.
//
// # Safety
// Pointers must be valid for the stated lengths; `candidates` holds
// `n_candidates` NUL-terminated strings.
enum GnqaStatus gnqa_model_score(const struct GnqaModel *m,
                                 const struct GnqaSceneGraph *graph,
                                 const char *question,
                                 const char *const *candidates,
                                 size_t n_candidates,
                                 const double *image,
                                 size_t image_len,
                                 double *out_scores);

// Index of the highest-scoring candidate, lowest on ties.
//
// # Safety
// As for [`gnqa_model_score`]; `out_index` must be writable.
enum GnqaStatus gnqa_model_predict(const struct GnqaModel *m,
                                   const struct GnqaSceneGraph *graph,
                                   const char *question,
                                   const char *const *candidates,
                                   size_t n_candidates,
                                   const double *image,
                                   size_t image_len,
                                   size_t *out_index);

// Graphviz text of the graph with the top `q` fraction of nodes and
// edges by updated-feature norm drawn solid. Free with
// [`gnqa_string_free`].
//
// # Safety
// As for [`gnqa_model_score`]; `out_dot` must be writable.
enum GnqaStatus gnqa_model_explain_dot(const struct GnqaModel *m,
                                       const struct GnqaSceneGraph *graph,
                                       const char *question,
                                       const char *const *candidates,
                                       size_t n_candidates,
                                       const double *image,
                                       size_t image_len,
                                       double q,
                                       char **out_dot);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GNQA_H */
