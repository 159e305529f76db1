#ifndef CGNN_H_
#define CGNN_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define CGNN_API __attribute__((visibility("default")))
#else
#define CGNN_API
#endif

typedef enum {
  CGNN_OK = 0,
  CGNN_E_USAGE = 1,
  CGNN_E_DATA = 2,
  CGNN_E_IO = 3,
  CGNN_E_NOT_FOUND = 4,
  CGNN_E_INTERNAL = 5,
} cgnn_status;

typedef struct cgnn_graph cgnn_graph;
typedef struct cgnn_edges cgnn_edges;
typedef struct cgnn_model cgnn_model;
typedef struct cgnn_service cgnn_service;

/* Strings returned through char** out-parameters are owned by the caller and
   released with cgnn_string_free. */
CGNN_API const char* cgnn_version(void);
/* Message of the last failed call on this thread, "" if none. */
CGNN_API const char* cgnn_last_error(void);
CGNN_API void cgnn_string_free(char* s);
/* "fnv1a64:<hex>" digest of a file's bytes. */
CGNN_API cgnn_status cgnn_file_digest(const char* path, char** digest);

/* Graphs. options_json may be NULL or an object with any of: include, exclude
   (glob lists), prune_kinds (list, replaces the default set), semantic
   (bool, default true), seed. */
CGNN_API cgnn_status cgnn_graph_build(const char* project_dir, const char* options_json,
                                      cgnn_graph** out, char** report_json);
CGNN_API cgnn_status cgnn_graph_load(const char* path, cgnn_graph** out);
CGNN_API cgnn_status cgnn_graph_save(const cgnn_graph* g, const char* path);
CGNN_API cgnn_status cgnn_graph_stats(const cgnn_graph* g, char** json);
/* Canonical digest of the graph text. */
CGNN_API cgnn_status cgnn_graph_digest(const cgnn_graph* g, char** digest);
/* spec is "FILE:START" (innermost call site starting there) or
   "FILE:START:END" (exact span). */
CGNN_API cgnn_status cgnn_graph_find_callsite(const cgnn_graph* g, const char* spec,
                                              uint32_t* id);
CGNN_API void cgnn_graph_free(cgnn_graph* g);

/* Call edges. ingest tolerates up to half unresolvable records; load requires
   every record to resolve. */
CGNN_API cgnn_status cgnn_edges_ingest(const cgnn_graph* g, const char* path,
                                       cgnn_edges** out, char** report_json);
CGNN_API cgnn_status cgnn_edges_load(const cgnn_graph* g, const char* path,
                                     cgnn_edges** out);
CGNN_API cgnn_status cgnn_edges_heuristic(const cgnn_graph* g, cgnn_edges** out);
CGNN_API cgnn_status cgnn_edges_merge(const cgnn_graph* g, const cgnn_edges* const* sets,
                                      size_t n, cgnn_edges** out);
/* meta_json is the object written on the leading {"meta":...} line. */
CGNN_API cgnn_status cgnn_edges_save(const cgnn_graph* g, const cgnn_edges* e,
                                     const char* path, const char* meta_json);
CGNN_API size_t cgnn_edges_count(const cgnn_edges* e);
CGNN_API void cgnn_edges_free(cgnn_edges* e);

/* Dynamic ground truth. options_json as for cgnn_graph_build (globs, seed).
   source_root may be NULL to use the graph's project directory. */
CGNN_API cgnn_status cgnn_instrument(const char* project_dir, const char* out_dir,
                                     const char* options_json, char** report_json);
CGNN_API cgnn_status cgnn_trace_parse(const cgnn_graph* g, const char* trace_path,
                                      const char* sitemap_path, const char* source_root,
                                      cgnn_edges** out, char** report_json);

/* Training writes the checkpoint blob at checkpoint_path, its JSON sidecar at
   checkpoint_path + ".json" and the edge splits next to it. The callback,
   when set, receives one JSON object per epoch. */
typedef void (*cgnn_epoch_callback)(const char* epoch_json, void* user);
CGNN_API cgnn_status cgnn_train(const cgnn_graph* g, const cgnn_edges* positives,
                                const char* hyperparams_json, const char* checkpoint_path,
                                const char* meta_json, cgnn_epoch_callback cb, void* user,
                                char** report_json);
/* The graph must be the one the checkpoint was trained on and must outlive
   the model. */
CGNN_API cgnn_status cgnn_model_load(const char* checkpoint_path, const cgnn_graph* g,
                                     cgnn_model** out);
CGNN_API void cgnn_model_free(cgnn_model* m);
CGNN_API cgnn_status cgnn_rank(const cgnn_model* m, uint32_t callsite, size_t k,
                               char** json);
/* test may be NULL to use the checkpoint's test split. predictions_path may
   be NULL. */
CGNN_API cgnn_status cgnn_evaluate(const cgnn_model* m, const cgnn_edges* test, size_t k,
                                   const char* predictions_path, const char* meta_json,
                                   char** summary_json);
CGNN_API cgnn_status cgnn_categorize(const cgnn_graph* g, const cgnn_edges* e,
                                     char** json);
/* Manifest: {"projects":[{"name","graph","edges"}...], "hyperparams":{...}}
   with paths relative to the manifest. hyperparams_json, when set, overrides
   the manifest's hyperparameters key by key. */
CGNN_API cgnn_status cgnn_transfer(const char* manifest_path, const char* hyperparams_json,
                                   char** report_json);

/* Triage service. model may be NULL (candidate queries then fail). */
CGNN_API cgnn_status cgnn_service_open(const cgnn_graph* g, const cgnn_edges* static_edges,
                                       const cgnn_model* m, const char* log_path,
                                       cgnn_service** out);
CGNN_API cgnn_status cgnn_service_unresolved(cgnn_service* s, char** json);
CGNN_API cgnn_status cgnn_service_candidates(cgnn_service* s, uint32_t callsite, size_t k,
                                             char** json);
CGNN_API cgnn_status cgnn_service_decide(cgnn_service* s, const char* decision_json,
                                         char** json);
CGNN_API cgnn_status cgnn_service_export(cgnn_service* s, char** json);
/* Blocks serving HTTP. ui_dir may be NULL. ready, when set, is called with
   the bound port once the socket is listening. */
CGNN_API cgnn_status cgnn_service_serve(cgnn_service* s, const char* host, int port,
                                        const char* ui_dir, void (*ready)(int port, void* user),
                                        void* user);
CGNN_API void cgnn_service_free(cgnn_service* s);

#ifdef __cplusplus
}
#endif

#endif  // CGNN_H_
