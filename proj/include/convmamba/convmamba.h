/* C interface to the ConvMambaNet library. All functions return a
 * cm_status; on failure cm_last_error() describes the problem for the
 * calling thread until the next call on that thread. */
#ifndef CONVMAMBA_CONVMAMBA_H_
#define CONVMAMBA_CONVMAMBA_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CM_API __declspec(dllexport)
#else
#define CM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cm_status {
  CM_OK = 0,
  CM_ERR_USAGE = 1,       /* missing or invalid user input */
  CM_ERR_CONFIG = 2,      /* unknown key or malformed config value */
  CM_ERR_IO = 3,
  CM_ERR_PARSE = 4,       /* EDF, summary or CSV syntax */
  CM_ERR_FORMAT = 5,      /* NPY, checkpoint or split file layout */
  CM_ERR_DATA = 6,        /* unusable data, e.g. no recordings found */
  CM_ERR_DIMENSION = 7,
  CM_ERR_NUMERIC = 8,     /* non-finite loss */
  CM_ERR_CHECK_FAILED = 9,/* gradcheck rows failed */
  CM_ERR_INVALID_ARGUMENT = 10,
  CM_ERR_INTERNAL = 11
} cm_status;

typedef struct cm_config cm_config;
typedef struct cm_model cm_model;

/* Called with one diagnostic line (no trailing newline). */
typedef void (*cm_log_fn)(const char* line, void* user);

CM_API const char* cm_version(void);
CM_API const char* cm_status_name(cm_status status);
CM_API const char* cm_last_error(void);
/* NULL restores logging to standard error. */
CM_API void cm_set_log_callback(cm_log_fn fn, void* user);

CM_API cm_status cm_config_create(cm_config** out);
CM_API void cm_config_destroy(cm_config* config);
/* Applies a TOML-style file on top of the current values. */
CM_API cm_status cm_config_load_file(cm_config* config, const char* path);
/* key is "section.key", e.g. "model.d_model", or a top-level key ("seed"). */
CM_API cm_status cm_config_set(cm_config* config, const char* key, const char* value);
/* Copies the value of key into buf (NUL-terminated). *needed receives the
 * size including the terminator; buf may be NULL to query it. */
CM_API cm_status cm_config_get(const cm_config* config, const char* key, char* buf,
                               size_t size, size_t* needed);
/* Full TOML rendering; same buffer convention as cm_config_get. */
CM_API cm_status cm_config_to_toml(const cm_config* config, char* buf, size_t size,
                                   size_t* needed);

CM_API cm_status cm_run_preprocess(const cm_config* config);
CM_API cm_status cm_run_split(const cm_config* config);
CM_API cm_status cm_run_train(const cm_config* config);
CM_API cm_status cm_run_eval(const cm_config* config);
/* CM_ERR_CHECK_FAILED when any finite-difference check fails. */
CM_API cm_status cm_run_gradcheck(const cm_config* config);
CM_API cm_status cm_run_bench(const cm_config* config);
CM_API cm_status cm_run_synth(const cm_config* config);

/* Loads a checkpoint for the model described by config (in_channels and
 * window_len included). */
CM_API cm_status cm_model_load(const cm_config* config, const char* checkpoint,
                               cm_model** out);
CM_API void cm_model_destroy(cm_model* model);
CM_API size_t cm_model_param_count(const cm_model* model);
/* x holds n windows as [n x in_channels x window_len] row-major; probs
 * receives [n x n_classes] softmax probabilities. */
CM_API cm_status cm_model_predict(const cm_model* model, const double* x, size_t n,
                                  double* probs);

#ifdef __cplusplus
}
#endif

#endif /* CONVMAMBA_CONVMAMBA_H_ */
