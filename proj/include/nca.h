#ifndef NCA_H
#define NCA_H

/* C interface to the NCA engine. Objects are opaque handles released with
 * their matching *_free function. Every call returning nca_status leaves a
 * message for the calling thread in nca_last_error() when it fails. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define NCA_API __declspec(dllexport)
#else
#define NCA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nca_status {
  NCA_OK = 0,
  NCA_ERR_INVALID_ARGUMENT = 1,
  NCA_ERR_IO = 2,
  NCA_ERR_NUMERIC = 3,
  NCA_ERR_BAD_MAGIC = 4,
  NCA_ERR_VERSION_MISMATCH = 5,
  NCA_ERR_TRUNCATED = 6,
  NCA_ERR_DIMENSION_MISMATCH = 7,
  NCA_ERR_OUT_OF_BOUNDS = 8,
  NCA_ERR_INTERNAL = 9
} nca_status;

typedef struct nca_model nca_model;
typedef struct nca_grid nca_grid;
typedef struct nca_image nca_image;

NCA_API const char* nca_last_error(void);
NCA_API const char* nca_status_name(nca_status status);
NCA_API void nca_string_free(char* s);

/* ---- models ---------------------------------------------------------- */

/* variant is 'A', 'B' or 'C'. */
NCA_API nca_status nca_model_new(char variant, double fire_rate, uint64_t seed, nca_model** out);
NCA_API nca_status nca_model_load(const char* path, nca_model** out);
NCA_API nca_status nca_model_save(const nca_model* model, const char* path, const char* metadata);
NCA_API void nca_model_free(nca_model* model);
NCA_API char nca_model_variant(const nca_model* model);
NCA_API double nca_model_fire_rate(const nca_model* model);
/* Owned by the model; valid until it is freed. */
NCA_API const char* nca_model_metadata(const nca_model* model);

/* ---- target images --------------------------------------------------- */

/* 8-bit RGBA PNG, premultiplied, resampled to desired_width (<= 0 keeps it). */
NCA_API nca_status nca_image_load(const char* path, int desired_width, nca_image** out);
NCA_API void nca_image_free(nca_image* image);
NCA_API int nca_image_width(const nca_image* image);
NCA_API int nca_image_height(const nca_image* image);
/* Copies width * height * 4 floats (row-major RGBA). */
NCA_API nca_status nca_image_read(const nca_image* image, float* buffer, size_t count);

/* ---- grids ----------------------------------------------------------- */

/* The grid owns the random stream used by nca_grid_step. */
NCA_API nca_status nca_grid_new(int width, int height, uint64_t rng_seed, nca_grid** out);
NCA_API void nca_grid_free(nca_grid* grid);
NCA_API int nca_grid_width(const nca_grid* grid);
NCA_API int nca_grid_height(const nca_grid* grid);
NCA_API nca_status nca_grid_place_seed(nca_grid* grid, int x, int y, double identity);
NCA_API nca_status nca_grid_step(nca_grid* grid, const nca_model* model, int steps);
NCA_API size_t nca_grid_alive_count(const nca_grid* grid);
/* box = {x_min, y_min, x_max, y_max}; *found is 0 for a dead grid. */
NCA_API nca_status nca_grid_bbox(const nca_grid* grid, int box[4], int* found);
/* Copies width * height * 17 floats (row-major cells, channels innermost). */
NCA_API nca_status nca_grid_read(const nca_grid* grid, float* buffer, size_t count);
NCA_API nca_status nca_grid_write_png(const nca_grid* grid, const char* path);

/* ---- training -------------------------------------------------------- */

typedef struct nca_train_config {
  char variant;
  int grid_width;
  int grid_height;
  int batch_size;
  int pool_size;
  int iterations;
  int min_rollout;
  int max_rollout;
  double learning_rate;
  int lr_halve_at;
  double fire_rate;
  double identity_weight;
  uint64_t seed;
  int workers;
} nca_train_config;

typedef struct nca_iteration {
  int iteration;
  double loss;
  double learning_rate;
  int rollout;
} nca_iteration;

typedef void (*nca_train_callback)(const nca_iteration* it, void* user);

NCA_API void nca_train_config_default(nca_train_config* config);
/* Applies a key=value file (keys named as the struct fields). */
NCA_API nca_status nca_train_config_load(nca_train_config* config, const char* path);
/* loss_csv may be NULL. */
NCA_API nca_status nca_train(const nca_train_config* config, const nca_image* target, const char* loss_csv,
                             nca_train_callback callback, void* user, nca_model** out);

/* ---- growth ---------------------------------------------------------- */

typedef struct nca_seed {
  int x;
  int y;
  int time;
  double identity;
} nca_seed;

/* Grows for `steps` updates. For every t listed in frame_steps the grid is
 * written as a PNG to the path produced by substituting t into
 * frame_pattern (a printf pattern with one %d). final may be NULL. */
NCA_API nca_status nca_grow(const nca_model* model, const nca_seed* seeds, size_t seed_count, int width, int height,
                            int steps, uint64_t rng_seed, const int* frame_steps, size_t frame_count,
                            const char* frame_pattern, nca_grid** final);

/* ---- experiments ----------------------------------------------------- */

typedef struct nca_experiment_options {
  int grid_width;
  int grid_height;
  int anchor_x;
  int anchor_y;
  int total_steps;
  int workers;
  uint64_t master_seed;
  double seed_identity_a; /* identity of the first organism */
} nca_experiment_options;

typedef void (*nca_progress_callback)(size_t done, size_t total, void* user);

NCA_API void nca_experiment_options_default(nca_experiment_options* options);

/* models holds one model of each variant, in any order. traces_csv may be
 * NULL. Writes 1680 rows sorted by config index. */
NCA_API nca_status nca_experiment(const nca_model* const models[3], const nca_image* target,
                                  const nca_experiment_options* options, const char* results_csv,
                                  const char* traces_csv, nca_progress_callback progress, void* user);

/* The 3360-run sweep over first-organism identities 0.0 and 0.5, seeds
 * paired with the main experiment. Needs all three variants. */
NCA_API nca_status nca_sweep_seed(const nca_model* const models[3], const nca_image* target,
                                  const nca_experiment_options* options, const char* results_csv,
                                  const char* traces_csv, nca_progress_callback progress, void* user);

/* Nine variant-C runs over identity pairs in {0, 0.5, 1}^2 at distance 6,
 * relative offset 5, seed time 0. */
NCA_API nca_status nca_spot_grid(const nca_model* model_c, const nca_image* target,
                                 const nca_experiment_options* options, const char* results_csv);

/* Re-runs one experiment config (index as in the results CSV, 0..1679) and
 * writes frames like nca_grow plus the idealized comparison image. */
NCA_API nca_status nca_render_config(const nca_model* const models[3], const nca_image* target,
                                     const nca_experiment_options* options, int config_index, const int* frame_steps,
                                     size_t frame_count, const char* frame_pattern, const char* ideal_path);

/* ---- statistics ------------------------------------------------------ */

/* group_by: "lateral_distance", "seed_time", "relative_offset" or "none".
 * metric: "rmse" or "area_ratio". stats_csv may be NULL. The aligned table
 * is returned in *table (release with nca_string_free) when table is not
 * NULL. */
NCA_API nca_status nca_stats_report(const char* results_csv, const char* group_by, const char* metric, double alpha,
                                    const char* stats_csv, char** table);

#ifdef __cplusplus
}
#endif

#endif
