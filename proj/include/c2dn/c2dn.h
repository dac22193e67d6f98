#ifndef C2DN_C2DN_H
#define C2DN_C2DN_H

/* C interface to the C2 denoising toolkit.
 *
 * Conventions:
 *  - Every fallible call returns a c2dn_status; on failure the message is
 *    available from c2dn_last_error() (thread-local, valid until the next
 *    call on the same thread).
 *  - Objects are opaque handles released with their *_free function.
 *  - Strings returned through char** are owned by the caller and released
 *    with c2dn_string_free.
 *  - Configuration and reports are JSON documents. A NULL or empty config
 *    string means "all defaults". Unknown keys are rejected.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define C2DN_API __declspec(dllexport)
#else
#define C2DN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum c2dn_status {
  C2DN_OK = 0,
  C2DN_E_CONFIG = 1,   /* invalid configuration value or unknown key */
  C2DN_E_FORMAT = 2,   /* malformed or foreign file contents */
  C2DN_E_SHAPE = 3,    /* incompatible dimensions */
  C2DN_E_NUMERIC = 4,  /* degenerate numerical condition */
  C2DN_E_IO = 5,       /* file system failure */
  C2DN_E_ARGUMENT = 6, /* NULL handle or bad pointer argument */
  C2DN_E_INTERNAL = 7
} c2dn_status;

typedef struct c2dn_c2 c2dn_c2;
typedef struct c2dn_series c2dn_series;
typedef struct c2dn_model c2dn_model;

C2DN_API const char* c2dn_version(void);
C2DN_API const char* c2dn_last_error(void);
/* "OK", "E_CONFIG", ... */
C2DN_API const char* c2dn_status_name(c2dn_status status);
C2DN_API void c2dn_string_free(char* s);

/* --- C2 maps ------------------------------------------------------------ */

/* Copies n*n row-major values. */
C2DN_API c2dn_status c2dn_c2_from_values(size_t n, const double* values,
                                         c2dn_c2** out);
C2DN_API c2dn_status c2dn_c2_read(const char* path, c2dn_c2** out);
/* Writes C2F1 plus the .meta sidecar, atomically. */
C2DN_API c2dn_status c2dn_c2_write(const c2dn_c2* c2, const char* path);
C2DN_API size_t c2dn_c2_size(const c2dn_c2* c2);
/* capacity must be >= n*n. */
C2DN_API c2dn_status c2dn_c2_values(const c2dn_c2* c2, double* out,
                                    size_t capacity);
C2DN_API void c2dn_c2_free(c2dn_c2* c2);

/* --- pixel series ------------------------------------------------------- */

C2DN_API c2dn_status c2dn_series_read(const char* path, c2dn_series** out);
/* compute_c2 followed by diagonal repair when repair != 0. */
C2DN_API c2dn_status c2dn_series_compute_c2(const c2dn_series* series,
                                            int repair, c2dn_c2** out);
C2DN_API void c2dn_series_free(c2dn_series* series);

/* --- synthetic data ----------------------------------------------------- */

/* Builds the training dataset described by config_json under out_dir;
 * summary_json receives split counts and manifest paths. */
C2DN_API c2dn_status c2dn_synth_dataset(const char* config_json,
                                        const char* out_dir,
                                        char** summary_json);

/* --- models ------------------------------------------------------------- */

C2DN_API c2dn_status c2dn_model_build(const char* architecture_json,
                                      uint64_t seed, c2dn_model** out);
C2DN_API c2dn_status c2dn_model_load(const char* path, c2dn_model** out);
C2DN_API c2dn_status c2dn_model_save(const c2dn_model* model,
                                     const char* path);
C2DN_API c2dn_status c2dn_model_info(const c2dn_model* model, char** json);
/* Trains on the "train" split of a manifest. history_json (may be NULL)
 * receives {"epoch_losses": [...]}. */
C2DN_API c2dn_status c2dn_model_train(c2dn_model* model, const char* manifest,
                                      const char* train_json,
                                      char** history_json);
C2DN_API c2dn_status c2dn_model_denoise(const c2dn_model* model,
                                        const c2dn_c2* input, c2dn_c2** out);
C2DN_API void c2dn_model_free(c2dn_model* model);

/* --- analysis ----------------------------------------------------------- */

C2DN_API c2dn_status c2dn_evaluate(const c2dn_c2* raw, const c2dn_c2* denoised,
                                   const char* options_json,
                                   char** report_json);
/* options: {"model", "half_window", "edge_exclusion"}. Any output pointer
 * may be NULL. */
C2DN_API c2dn_status c2dn_fit_slices(const c2dn_c2* c2,
                                     const char* options_json,
                                     char** trace_csv, char** trace_svg,
                                     char** summary_json);
C2DN_API c2dn_status c2dn_bootstrap_study(const c2dn_model* model,
                                          const char* scenario_json,
                                          const char* out_dir,
                                          char** report_json);
/* config: {"architecture", "train", "seeds", "split",
 * "allow_duplicate_seeds"}. Trains one model per seed on the manifest's
 * train split and scores the chosen split. out_dir may be NULL; otherwise
 * checkpoints and ensemble.json are written there. */
C2DN_API c2dn_status c2dn_ensemble(const char* config_json,
                                   const char* manifest, const char* out_dir,
                                   char** report_json);

#ifdef __cplusplus
}
#endif

#endif /* C2DN_C2DN_H */
