#ifndef LAPIS_LAPIS_H
#define LAPIS_LAPIS_H

#include <stddef.h>
#include <stdint.h>

#if defined(LAPIS_BUILDING)
#define LAPIS_API __attribute__((visibility("default")))
#else
#define LAPIS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every function returning lapis_status sets the thread-local
   message read by lapis_last_error() when it fails. */
typedef int lapis_status;
#define LAPIS_OK 0
#define LAPIS_ERR_INTERNAL 1
#define LAPIS_ERR_USAGE 2     /* bad argument, shape or call order */
#define LAPIS_ERR_NUMERICAL 3 /* blow-up or non-finite loss */
#define LAPIS_ERR_IO 4

#define LAPIS_BACKWARD 0
#define LAPIS_FORWARD 1

typedef struct lapis_config lapis_config;
typedef struct lapis_dataset lapis_dataset;
typedef struct lapis_models lapis_models;
typedef struct lapis_result lapis_result;

LAPIS_API const char* lapis_version(void);
/* Message of the last failure on this thread, "" if none. */
LAPIS_API const char* lapis_last_error(void);

/* ---- configuration ---- */

/* Defaults for "ks2d", "kolmogorov2d", "kvs" or "linear_toy". */
LAPIS_API lapis_status lapis_config_new(const char* system, lapis_config** out);
LAPIS_API lapis_status lapis_config_load(const char* path, lapis_config** out);
LAPIS_API lapis_status lapis_config_parse(const char* text, lapis_config** out);
/* key is "section.name", e.g. "shred.lag". */
LAPIS_API lapis_status lapis_config_set(lapis_config* cfg, const char* key, const char* value);
/* Copies the value with its terminator into buf when it fits; *needed gets
   the full length including the terminator. */
LAPIS_API lapis_status lapis_config_get(const lapis_config* cfg, const char* key, char* buf, size_t cap,
                                        size_t* needed);
LAPIS_API lapis_status lapis_config_validate(const lapis_config* cfg);
LAPIS_API lapis_status lapis_config_save(const lapis_config* cfg, const char* path);
LAPIS_API void lapis_config_free(lapis_config* cfg);

/* ---- datasets ---- */

/* Simulates the configured ensemble plus a held-out truth member. */
LAPIS_API lapis_status lapis_simulate(const lapis_config* cfg, lapis_dataset** out);
LAPIS_API lapis_status lapis_dataset_load(const char* dir, lapis_dataset** out);
LAPIS_API lapis_status lapis_dataset_save(const lapis_dataset* ds, const char* dir);

typedef struct {
  size_t members;
  size_t frames;
  size_t frame_size;
  size_t sensors;
  long truth_index; /* -1 without a truth member */
} lapis_dataset_info;

LAPIS_API lapis_status lapis_dataset_describe(const lapis_dataset* ds, lapis_dataset_info* info);
/* Raw sensor series of one member, frames x sensors, row-major. */
LAPIS_API lapis_status lapis_dataset_sensors(const lapis_dataset* ds, size_t member, float* buf, size_t cap);
LAPIS_API void lapis_dataset_free(lapis_dataset* ds);

/* ---- training ---- */

typedef struct {
  size_t shred_epochs;
  size_t shred_best_epoch;
  double shred_best_val;
  size_t temporal_epochs;
  size_t temporal_best_epoch;
  double temporal_best_val;
  double shred_seconds;
  double temporal_seconds;
} lapis_train_summary;

/* Writes the frozen SHRED model, latent cache and temporal model under
   out_dir. summary may be NULL. */
LAPIS_API lapis_status lapis_train(const lapis_config* cfg, const lapis_dataset* ds, const char* out_dir,
                                   lapis_train_summary* summary);

LAPIS_API lapis_status lapis_models_load(const char* dir, lapis_models** out);

typedef struct {
  size_t sensors;
  size_t frame_size;
  size_t latent_dim;
  size_t frames;          /* trajectory length the models were trained on */
  size_t observed_frames; /* configured window */
  int direction;
} lapis_models_info;

LAPIS_API lapis_status lapis_models_describe(const lapis_models* m, lapis_models_info* info);
LAPIS_API void lapis_models_free(lapis_models* m);

/* ---- inference ---- */

/* sensors: rows x p raw readings covering frames [start, start + rows) of a
   trajectory with total_frames frames. Backward reconstructs [0, start + rows)
   and ignores horizon; forward reconstructs the window plus horizon frames. */
LAPIS_API lapis_status lapis_infer(lapis_models* m, const float* sensors, size_t rows, size_t p, size_t start,
                                   size_t total_frames, int direction, size_t horizon, lapis_result** out);
LAPIS_API lapis_status lapis_result_load(const char* dir, lapis_result** out);
LAPIS_API lapis_status lapis_result_save(const lapis_result* r, const char* dir);

typedef struct {
  size_t frames;
  size_t frame_size;
  size_t latent_dim;
  size_t first_frame;
  size_t observed_frames;
  double seconds;
} lapis_result_info;

LAPIS_API lapis_status lapis_result_describe(const lapis_result* r, lapis_result_info* info);
LAPIS_API lapis_status lapis_result_field(const lapis_result* r, float* buf, size_t cap);
LAPIS_API lapis_status lapis_result_latents(const lapis_result* r, float* buf, size_t cap);
LAPIS_API lapis_status lapis_result_observed(const lapis_result* r, uint8_t* buf, size_t cap);

typedef struct {
  double rmse;
  double nrmse;
  double delta;
  double ssim; /* NaN when not computed */
  int has_generated;
  double generated_rmse;
  double generated_nrmse;
  int has_observed;
  double observed_nrmse;
} lapis_metrics;

/* Scores the result against the fields of a dataset member. */
LAPIS_API lapis_status lapis_result_evaluate(lapis_result* r, const lapis_dataset* ds, size_t member, int with_ssim,
                                             lapis_metrics* out);
LAPIS_API void lapis_result_free(lapis_result* r);

/* ---- ablation ---- */

/* axis: "p", "d_z", "d_h", "W" or "L". Writes rows.csv and summary.csv into
   out_dir along with one run directory per (value, seed). */
LAPIS_API lapis_status lapis_ablate(const lapis_config* base, const char* axis, const size_t* values,
                                    size_t n_values, const uint64_t* seeds, size_t n_seeds, size_t workers,
                                    const char* out_dir);

/* ---- plots (PNG plus CSV) ---- */

/* Truth / reconstruction / error strip for `columns` evenly spaced frames. */
LAPIS_API lapis_status lapis_plot_snapshots(const lapis_result* r, const lapis_dataset* ds, size_t member,
                                            size_t columns, size_t channel, const char* png_path,
                                            const char* csv_path);
/* Needs lapis_result_evaluate first. */
LAPIS_API lapis_status lapis_plot_frame_errors(const lapis_result* r, const char* png_path, const char* csv_path);
/* Train and validation curves from a training history CSV. */
LAPIS_API lapis_status lapis_plot_history(const char* history_csv, const char* png_path, const char* csv_path);
/* Mean NRMSE with a one-std band from an ablation summary CSV. */
LAPIS_API lapis_status lapis_plot_sweep(const char* summary_csv, const char* png_path, const char* csv_path);

#ifdef __cplusplus
}
#endif

#endif
