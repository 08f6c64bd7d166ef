/* C interface to libcrowdrel.
 *
 * Handles are opaque and owned by the caller; release them with the
 * matching *_free function. Every call that can fail returns a
 * crowdrel_status, and crowdrel_last_error() holds the message for the
 * most recent failure on the calling thread.
 */
#ifndef CROWDREL_H
#define CROWDREL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(CROWDREL_BUILDING_LIBRARY)
#    define CROWDREL_API __declspec(dllexport)
#  else
#    define CROWDREL_API __declspec(dllimport)
#  endif
#else
#  define CROWDREL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum crowdrel_status {
  CROWDREL_OK = 0,
  CROWDREL_E_PARSE = 1,
  CROWDREL_E_DIMENSION = 2,
  CROWDREL_E_LABEL = 3,
  CROWDREL_E_DUPLICATE = 4,
  CROWDREL_E_VALIDATION = 5,
  CROWDREL_E_NUMERICAL = 6,
  CROWDREL_E_IO = 7,
  CROWDREL_E_ARGUMENT = 8,
  CROWDREL_E_INTERNAL = 9
} crowdrel_status;

typedef struct crowdrel_config crowdrel_config;
typedef struct crowdrel_dataset crowdrel_dataset;
typedef struct crowdrel_model crowdrel_model;

/* Receives one progress line per call; user is passed through untouched. */
typedef void (*crowdrel_log_fn)(const char* line, void* user);

CROWDREL_API const char* crowdrel_version(void);
CROWDREL_API const char* crowdrel_last_error(void);
CROWDREL_API const char* crowdrel_status_name(crowdrel_status status);

/* ---- experiment configuration (key = value) ---- */

CROWDREL_API crowdrel_status crowdrel_config_new(crowdrel_config** out);
CROWDREL_API void crowdrel_config_free(crowdrel_config* config);
CROWDREL_API crowdrel_status crowdrel_config_set(crowdrel_config* config, const char* key,
                                                 const char* value);
CROWDREL_API crowdrel_status crowdrel_config_load_file(crowdrel_config* config,
                                                       const char* path);
/* Copies the value (or built-in default) into buf, truncating to cap-1 bytes.
 * *needed, when non-null, receives the full length plus the terminator. */
CROWDREL_API crowdrel_status crowdrel_config_get(const crowdrel_config* config, const char* key,
                                                 char* buf, size_t cap, size_t* needed);
/* 16 hex digits plus terminator: buf must hold at least 17 bytes. */
CROWDREL_API crowdrel_status crowdrel_config_hash(const crowdrel_config* config, char* buf,
                                                  size_t cap);

/* ---- pipelines ---- */

CROWDREL_API crowdrel_status crowdrel_simulate(const crowdrel_config* config,
                                               crowdrel_log_fn log, void* user);
CROWDREL_API crowdrel_status crowdrel_train(const crowdrel_config* config,
                                            crowdrel_log_fn log, void* user);
/* Metric table text goes to log as a single multi-line message. */
CROWDREL_API crowdrel_status crowdrel_eval(const crowdrel_config* config,
                                           crowdrel_log_fn log, void* user);

/* ---- datasets ---- */

/* Loads instances, annotations and optional gold as named by the config
 * (a simulate output directory via "data", or explicit paths). */
CROWDREL_API crowdrel_status crowdrel_dataset_load(const crowdrel_config* config,
                                                   crowdrel_dataset** out);
/* Generates a 2-D dataset ("moon", "circle", "three-class") or "text" and
 * annotates it with panel ("standard", "graded", or comma-separated
 * profile names). noise < 0 selects the dataset default. */
CROWDREL_API crowdrel_status crowdrel_dataset_generate(const char* dataset, size_t n,
                                                       double noise, const char* panel,
                                                       uint64_t seed, crowdrel_dataset** out);
CROWDREL_API void crowdrel_dataset_free(crowdrel_dataset* dataset);

CROWDREL_API size_t crowdrel_dataset_instances(const crowdrel_dataset* dataset);
CROWDREL_API size_t crowdrel_dataset_annotators(const crowdrel_dataset* dataset);
CROWDREL_API size_t crowdrel_dataset_labels(const crowdrel_dataset* dataset);
CROWDREL_API size_t crowdrel_dataset_annotations(const crowdrel_dataset* dataset);
CROWDREL_API size_t crowdrel_dataset_feature_dim(const crowdrel_dataset* dataset);

/* Annotation k as (instance, annotator, label) indices; ordered by
 * instance, then annotator. */
CROWDREL_API crowdrel_status crowdrel_dataset_annotation(const crowdrel_dataset* dataset,
                                                         size_t k, size_t* instance,
                                                         size_t* annotator, size_t* label);
/* Gold label per instance, SIZE_MAX where unknown. */
CROWDREL_API crowdrel_status crowdrel_dataset_gold(const crowdrel_dataset* dataset,
                                                   size_t* labels, size_t n);

/* ---- baselines and metrics ---- */

CROWDREL_API crowdrel_status crowdrel_majority_vote(const crowdrel_dataset* dataset,
                                                    size_t* labels, size_t n);
/* soft may be null; otherwise it receives n x |T| row-major posteriors. */
CROWDREL_API crowdrel_status crowdrel_dawid_skene(const crowdrel_dataset* dataset,
                                                  size_t* labels, double* soft, size_t n);
CROWDREL_API crowdrel_status crowdrel_f1(const crowdrel_dataset* dataset,
                                         const size_t* predicted, size_t n, double* micro,
                                         double* macro);
/* Fleiss kappa on a complete panel, Krippendorff alpha otherwise.
 * *is_kappa (nullable) reports which one was computed. */
CROWDREL_API crowdrel_status crowdrel_agreement(const crowdrel_dataset* dataset, double* value,
                                                int* is_kappa);

/* ---- model ---- */

/* Pretrains and trains with the model settings from config. */
CROWDREL_API crowdrel_status crowdrel_model_train(const crowdrel_dataset* dataset,
                                                  const crowdrel_config* config,
                                                  crowdrel_model** out);
CROWDREL_API crowdrel_status crowdrel_model_load(const char* path, crowdrel_model** out);
CROWDREL_API crowdrel_status crowdrel_model_save(const crowdrel_model* model, const char* path);
CROWDREL_API void crowdrel_model_free(crowdrel_model* model);

CROWDREL_API size_t crowdrel_model_outer_iterations(const crowdrel_model* model);

/* posterior may be null; otherwise n x |T| row-major. */
CROWDREL_API crowdrel_status crowdrel_model_predict(const crowdrel_model* model,
                                                    const crowdrel_dataset* dataset,
                                                    size_t* labels, double* posterior,
                                                    size_t n);
/* One posterior reliability per annotation, in crowdrel_dataset_annotation order. */
CROWDREL_API crowdrel_status crowdrel_model_reliability(const crowdrel_model* model,
                                                        const crowdrel_dataset* dataset,
                                                        double* scores, size_t n);

#ifdef __cplusplus
}
#endif

#endif
