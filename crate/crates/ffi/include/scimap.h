#ifndef SCIMAP_H
#define SCIMAP_H

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status code of every fallible call.
typedef enum ScimapStatus {
  SCIMAP_STATUS_OK = 0,
  // File system failure.
  SCIMAP_STATUS_IO = 1,
  // A file exists but could not be parsed.
  SCIMAP_STATUS_PARSE = 2,
  // Input data violates a structural invariant.
  SCIMAP_STATUS_DATA = 3,
  // Strict validation rejected the corpus.
  SCIMAP_STATUS_VALIDATION = 4,
  // Invalid configuration or parameter.
  SCIMAP_STATUS_CONFIG = 5,
  // Missing upstream artifact or locked work directory.
  SCIMAP_STATUS_STATE = 6,
  // A required pointer argument was null.
  SCIMAP_STATUS_NULL_POINTER = 7,
  // A string argument was not valid UTF-8.
  SCIMAP_STATUS_INVALID_UTF8 = 8,
  // The callee panicked; this is a bug worth reporting.
  SCIMAP_STATUS_PANIC = 9,
} ScimapStatus;

// Pipeline stage selector for [`scimap_run_stage`].
typedef enum ScimapStage {
  SCIMAP_STAGE_BUILD_NETWORKS = 0,
  SCIMAP_STAGE_CLUSTER = 1,
  SCIMAP_STAGE_PREPARE_TOPICS = 2,
  SCIMAP_STAGE_EVALUATE = 3,
  SCIMAP_STAGE_REPORT = 4,
} ScimapStage;

// Opaque pipeline configuration handle.
typedef struct ScimapConfig ScimapConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread. The pointer stays valid
// until the next failing call on the same thread. Never null.
const char *scimap_last_error_message(void);

// Library version as a static string.
const char *scimap_version(void);

// Load a pipeline configuration file. On success `*out` owns a new handle
// that must be released with [`scimap_config_free`].
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` must be a valid
// pointer to write a handle into.
enum ScimapStatus scimap_config_load(const char *path, struct ScimapConfig **out);

// Release a configuration handle. Null is a no-op.
//
// # Safety
// `cfg` must be a handle returned by [`scimap_config_load`] that has not
// been freed yet, or null.
void scimap_config_free(struct ScimapConfig *cfg);

// Override the clustering seed of a loaded configuration.
//
// # Safety
// `cfg` must be a live handle from [`scimap_config_load`].
enum ScimapStatus scimap_config_set_seed(struct ScimapConfig *cfg, uint64_t seed);

// Run one pipeline stage against the configuration's work directory.
//
// # Safety
// `cfg` must be a live handle from [`scimap_config_load`].
enum ScimapStatus scimap_run_stage(const struct ScimapConfig *cfg, enum ScimapStage stage);

// Generate a synthetic corpus from a spec file into `out_dir`.
//
// # Safety
// Both arguments must be valid NUL-terminated strings.
enum ScimapStatus scimap_synth(const char *spec_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCIMAP_H */
