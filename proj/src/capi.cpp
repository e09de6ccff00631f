#include "nca.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "nca/experiment.hpp"
#include "nca/io.hpp"

struct nca_model {
  nca::ModelWeights weights;
  std::string metadata;
};

struct nca_grid {
  nca::CellGrid grid;
  nca::StepRng rng;
  nca::Stepper<float> stepper;
};

struct nca_image {
  nca::IdealImage image;
};

namespace {

thread_local std::string g_last_error;

nca_status fail(nca_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename Fn>
nca_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return NCA_OK;
  } catch (const nca::Error& e) {
    return fail(static_cast<nca_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(NCA_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(NCA_ERR_INTERNAL, e.what());
  }
}

void require(bool ok, const char* message) {
  if (!ok) throw nca::Error(nca::ErrorCode::kInvalidArgument, message);
}

std::string frame_path(const char* pattern, int t) {
  const int n = std::snprintf(nullptr, 0, pattern, t);
  std::string out(static_cast<size_t>(n), '\0');
  std::snprintf(out.data(), out.size() + 1, pattern, t);
  return out;
}

void check_pattern(const char* pattern) {
  require(pattern != nullptr, "frame pattern is required when frames are requested");
  const char* p = std::strstr(pattern, "%d");
  require(p != nullptr && std::strstr(p + 2, "%") == nullptr && std::strchr(pattern, '%') == p,
          "frame pattern must contain exactly one %d");
}

nca::ModelSet model_set(const nca_model* const models[3], bool need_all) {
  require(models != nullptr, "models array is null");
  nca::ModelSet set{};
  for (int i = 0; i < 3; ++i) {
    if (!models[i]) continue;
    const int slot = nca::variant_index(models[i]->weights.variant);
    if (set[slot]) {
      throw nca::Error(nca::ErrorCode::kInvalidArgument,
                       std::string("two models of variant ") + nca::to_char(models[i]->weights.variant));
    }
    set[slot] = &models[i]->weights;
  }
  if (need_all) {
    for (int i = 0; i < 3; ++i) {
      if (!set[i]) {
        throw nca::Error(nca::ErrorCode::kInvalidArgument,
                         std::string("missing a model of variant ") + static_cast<char>('A' + i));
      }
    }
  }
  return set;
}

nca::RunContext run_context(const nca_image* target, const nca_experiment_options* options) {
  require(target != nullptr, "target image is null");
  require(options != nullptr, "experiment options are null");
  require(options->total_steps >= 1, "total_steps must be positive");
  nca::RunContext ctx;
  ctx.target = &target->image;
  ctx.layout.grid_width = options->grid_width;
  ctx.layout.grid_height = options->grid_height;
  ctx.layout.anchor = {options->anchor_x, options->anchor_y};
  return ctx;
}

std::vector<nca::ExperimentConfig> with_options(std::vector<nca::ExperimentConfig> configs,
                                                const nca_experiment_options* options) {
  for (auto& c : configs) c.total_steps = options->total_steps;
  return configs;
}

void write_outputs(const std::vector<nca::MetricRecord>& records, const char* results_csv, const char* traces_csv) {
  require(results_csv != nullptr, "results CSV path is null");
  nca::write_text_file(results_csv, nca::format_results_csv(records));
  if (traces_csv) nca::write_text_file(traces_csv, nca::format_traces_csv(records));
}

std::function<void(size_t, size_t)> progress_fn(nca_progress_callback progress, void* user) {
  if (!progress) return {};
  return [progress, user](size_t done, size_t total) { progress(done, total, user); };
}

void dump_frames(const nca::ModelWeights& weights, const nca::GrowOptions& grow_options, const int* frame_steps,
                 size_t frame_count, const char* frame_pattern, nca::CellGrid* final_grid) {
  std::vector<int> frames(frame_steps, frame_steps + frame_count);
  for (int t : frames) {
    if (t < 0 || t > grow_options.steps) {
      throw nca::Error(nca::ErrorCode::kInvalidArgument, "frame step " + std::to_string(t) + " outside 0.." +
                                                             std::to_string(grow_options.steps));
    }
  }
  if (!frames.empty()) check_pattern(frame_pattern);
  nca::CellGrid grid = nca::grow(weights, grow_options, [&](int t, const nca::CellGrid& g) {
    for (int f : frames) {
      if (f == t) nca::write_png(frame_path(frame_pattern, t), nca::render_rgba(g));
    }
  });
  if (final_grid) *final_grid = std::move(grid);
}

}  // namespace

extern "C" {

const char* nca_last_error(void) { return g_last_error.c_str(); }

const char* nca_status_name(nca_status status) {
  switch (status) {
    case NCA_OK: return "ok";
    case NCA_ERR_INVALID_ARGUMENT: return "invalid argument";
    case NCA_ERR_IO: return "i/o error";
    case NCA_ERR_NUMERIC: return "numeric failure";
    case NCA_ERR_BAD_MAGIC: return "bad magic";
    case NCA_ERR_VERSION_MISMATCH: return "version mismatch";
    case NCA_ERR_TRUNCATED: return "truncated";
    case NCA_ERR_DIMENSION_MISMATCH: return "dimension mismatch";
    case NCA_ERR_OUT_OF_BOUNDS: return "out of bounds";
    case NCA_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void nca_string_free(char* s) { std::free(s); }

nca_status nca_model_new(char variant, double fire_rate, uint64_t seed, nca_model** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = new nca_model{nca::ModelWeights::initialized(nca::parse_variant(variant), fire_rate, seed), {}};
  });
}

nca_status nca_model_load(const char* path, nca_model** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out are required");
    nca::Checkpoint cp = nca::load_checkpoint(path);
    *out = new nca_model{std::move(cp.weights), std::move(cp.metadata)};
  });
}

nca_status nca_model_save(const nca_model* model, const char* path, const char* metadata) {
  return guarded([&] {
    require(model != nullptr && path != nullptr, "model and path are required");
    nca::save_checkpoint(model->weights, path, metadata ? std::string_view(metadata) : model->metadata);
  });
}

void nca_model_free(nca_model* model) { delete model; }
char nca_model_variant(const nca_model* model) { return model ? nca::to_char(model->weights.variant) : '\0'; }
double nca_model_fire_rate(const nca_model* model) { return model ? model->weights.fire_rate : 0.0; }
const char* nca_model_metadata(const nca_model* model) { return model ? model->metadata.c_str() : ""; }

nca_status nca_image_load(const char* path, int desired_width, nca_image** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out are required");
    *out = new nca_image{nca::load_target(path, desired_width)};
  });
}

void nca_image_free(nca_image* image) { delete image; }
int nca_image_width(const nca_image* image) { return image ? image->image.width() : 0; }
int nca_image_height(const nca_image* image) { return image ? image->image.height() : 0; }

nca_status nca_image_read(const nca_image* image, float* buffer, size_t count) {
  return guarded([&] {
    require(image != nullptr && buffer != nullptr, "image and buffer are required");
    const auto& data = image->image.data();
    if (count != data.size()) throw nca::Error(nca::ErrorCode::kDimensionMismatch, "buffer size differs from image");
    std::copy(data.begin(), data.end(), buffer);
  });
}

nca_status nca_grid_new(int width, int height, uint64_t rng_seed, nca_grid** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    *out = new nca_grid{nca::new_grid(width, height), nca::StepRng(rng_seed), {}};
  });
}

void nca_grid_free(nca_grid* grid) { delete grid; }
int nca_grid_width(const nca_grid* grid) { return grid ? grid->grid.width() : 0; }
int nca_grid_height(const nca_grid* grid) { return grid ? grid->grid.height() : 0; }

nca_status nca_grid_place_seed(nca_grid* grid, int x, int y, double identity) {
  return guarded([&] {
    require(grid != nullptr, "grid is null");
    nca::place_seed(grid->grid, nca::SeedSpec{x, y, 0, identity});
  });
}

nca_status nca_grid_step(nca_grid* grid, const nca_model* model, int steps) {
  return guarded([&] {
    require(grid != nullptr && model != nullptr, "grid and model are required");
    require(steps >= 0, "steps must be non-negative");
    nca::CellGrid next = grid->grid;
    for (int i = 0; i < steps; ++i) {
      grid->stepper.step(grid->grid, model->weights, grid->rng, next);
      std::swap(grid->grid, next);
    }
  });
}

size_t nca_grid_alive_count(const nca_grid* grid) { return grid ? nca::alive_mask(grid->grid).count() : 0; }

nca_status nca_grid_bbox(const nca_grid* grid, int box[4], int* found) {
  return guarded([&] {
    require(grid != nullptr && box != nullptr && found != nullptr, "grid, box and found are required");
    const auto r = nca::bounding_box(nca::alive_mask(grid->grid));
    *found = r ? 1 : 0;
    if (r) {
      box[0] = r->x_min;
      box[1] = r->y_min;
      box[2] = r->x_max;
      box[3] = r->y_max;
    }
  });
}

nca_status nca_grid_read(const nca_grid* grid, float* buffer, size_t count) {
  return guarded([&] {
    require(grid != nullptr && buffer != nullptr, "grid and buffer are required");
    const auto data = grid->grid.data();
    if (count != data.size()) throw nca::Error(nca::ErrorCode::kDimensionMismatch, "buffer size differs from grid");
    std::copy(data.begin(), data.end(), buffer);
  });
}

nca_status nca_grid_write_png(const nca_grid* grid, const char* path) {
  return guarded([&] {
    require(grid != nullptr && path != nullptr, "grid and path are required");
    nca::write_png(path, nca::render_rgba(grid->grid));
  });
}

void nca_train_config_default(nca_train_config* config) {
  if (!config) return;
  const nca::TrainConfig d;
  *config = {nca::to_char(d.variant), d.grid_width,  d.grid_height,   d.batch_size,      d.pool_size,
             d.iterations,           d.min_rollout, d.max_rollout,   d.learning_rate,   d.lr_halve_at,
             d.fire_rate,            d.identity_weight, d.seed,      d.workers};
}

namespace {

nca::TrainConfig to_cpp(const nca_train_config& c) {
  nca::TrainConfig t;
  t.variant = nca::parse_variant(c.variant);
  t.grid_width = c.grid_width;
  t.grid_height = c.grid_height;
  t.batch_size = c.batch_size;
  t.pool_size = c.pool_size;
  t.iterations = c.iterations;
  t.min_rollout = c.min_rollout;
  t.max_rollout = c.max_rollout;
  t.learning_rate = c.learning_rate;
  t.lr_halve_at = c.lr_halve_at;
  t.fire_rate = c.fire_rate;
  t.identity_weight = c.identity_weight;
  t.seed = c.seed;
  t.workers = c.workers;
  return t;
}

std::string config_echo(const nca::TrainConfig& c) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "variant=%c\ngrid_width=%d\ngrid_height=%d\nbatch_size=%d\npool_size=%d\niterations=%d\n"
                "min_rollout=%d\nmax_rollout=%d\nlearning_rate=%g\nlr_halve_at=%d\nfire_rate=%g\n"
                "identity_weight=%g\nseed=%llu\n",
                nca::to_char(c.variant), c.grid_width, c.grid_height, c.batch_size, c.pool_size, c.iterations,
                c.min_rollout, c.max_rollout, c.learning_rate, c.lr_halve_at, c.fire_rate, c.identity_weight,
                static_cast<unsigned long long>(c.seed));
  return buf;
}

}  // namespace

nca_status nca_train_config_load(nca_train_config* config, const char* path) {
  return guarded([&] {
    require(config != nullptr && path != nullptr, "config and path are required");
    nca::TrainConfig t = to_cpp(*config);
    nca::apply_train_settings(t, nca::parse_key_values(nca::read_text_file(path)));
    *config = {nca::to_char(t.variant), t.grid_width,  t.grid_height,     t.batch_size,    t.pool_size,
               t.iterations,           t.min_rollout, t.max_rollout,     t.learning_rate, t.lr_halve_at,
               t.fire_rate,            t.identity_weight, t.seed,        t.workers};
  });
}

nca_status nca_train(const nca_train_config* config, const nca_image* target, const char* loss_csv,
                     nca_train_callback callback, void* user, nca_model** out) {
  return guarded([&] {
    require(config != nullptr && target != nullptr && out != nullptr, "config, target and out are required");
    const nca::TrainConfig cfg = to_cpp(*config);
    nca::TrainResult result = nca::train(cfg, target->image, [&](const nca::IterationStats& s) {
      if (callback) {
        const nca_iteration it{s.iteration, s.loss, s.learning_rate, s.rollout};
        callback(&it, user);
      }
    });
    if (loss_csv) nca::write_text_file(loss_csv, nca::format_loss_csv(result.history, cfg.variant));
    *out = new nca_model{std::move(result.weights), config_echo(cfg)};
  });
}

nca_status nca_grow(const nca_model* model, const nca_seed* seeds, size_t seed_count, int width, int height,
                    int steps, uint64_t rng_seed, const int* frame_steps, size_t frame_count,
                    const char* frame_pattern, nca_grid** final) {
  return guarded([&] {
    require(model != nullptr, "model is null");
    require(seed_count == 0 || seeds != nullptr, "seeds are null");
    require(frame_count == 0 || frame_steps != nullptr, "frame steps are null");
    nca::GrowOptions opts{width, height, steps, {}, rng_seed};
    for (size_t i = 0; i < seed_count; ++i) {
      opts.seeds.push_back({seeds[i].x, seeds[i].y, seeds[i].time, seeds[i].identity});
    }
    nca::CellGrid grid = nca::new_grid(std::max(width, 3), std::max(height, 3));
    dump_frames(model->weights, opts, frame_steps, frame_count, frame_pattern, &grid);
    if (final) *final = new nca_grid{std::move(grid), nca::StepRng(nca::derive_seed(rng_seed, 1)), {}};
  });
}

void nca_experiment_options_default(nca_experiment_options* options) {
  if (!options) return;
  const nca::ExperimentLayout layout;
  *options = {layout.grid_width, layout.grid_height, layout.anchor.x, layout.anchor.y, nca::kTotalSteps, 1, 1, 1.0};
}

nca_status nca_experiment(const nca_model* const models[3], const nca_image* target,
                          const nca_experiment_options* options, const char* results_csv, const char* traces_csv,
                          nca_progress_callback progress, void* user) {
  return guarded([&] {
    const nca::ModelSet set = model_set(models, true);
    const nca::RunContext ctx = run_context(target, options);
    auto configs = with_options(nca::enumerate_all_configs(options->seed_identity_a), options);
    nca::assign_seeds(configs, options->master_seed);
    const auto records = nca::run_experiments(configs, set, ctx, options->workers, progress_fn(progress, user));
    write_outputs(records, results_csv, traces_csv);
  });
}

nca_status nca_sweep_seed(const nca_model* const models[3], const nca_image* target,
                          const nca_experiment_options* options, const char* results_csv, const char* traces_csv,
                          nca_progress_callback progress, void* user) {
  return guarded([&] {
    const nca::ModelSet set = model_set(models, true);
    const nca::RunContext ctx = run_context(target, options);
    const auto configs = with_options(nca::sweep_configs(options->master_seed), options);
    const auto records = nca::run_experiments(configs, set, ctx, options->workers, progress_fn(progress, user));
    write_outputs(records, results_csv, traces_csv);
  });
}

nca_status nca_spot_grid(const nca_model* model_c, const nca_image* target, const nca_experiment_options* options,
                         const char* results_csv) {
  return guarded([&] {
    require(model_c != nullptr, "model is null");
    require(model_c->weights.variant == nca::Variant::kC, "the spot grid needs a variant C model");
    const nca_model* const models[3] = {model_c, nullptr, nullptr};
    const nca::ModelSet set = model_set(models, false);
    const nca::RunContext ctx = run_context(target, options);
    const auto configs = with_options(nca::spot_grid_configs(options->master_seed), options);
    const auto records = nca::run_experiments(configs, set, ctx, options->workers);
    write_outputs(records, results_csv, nullptr);
  });
}

nca_status nca_render_config(const nca_model* const models[3], const nca_image* target,
                             const nca_experiment_options* options, int config_index, const int* frame_steps,
                             size_t frame_count, const char* frame_pattern, const char* ideal_path) {
  return guarded([&] {
    const nca::ModelSet set = model_set(models, false);
    const nca::RunContext ctx = run_context(target, options);
    require(config_index >= 0 && config_index < 3 * nca::kConfigsPerVariant, "config index outside 0..1679");
    require(frame_count == 0 || frame_steps != nullptr, "frame steps are null");
    auto configs = with_options(nca::enumerate_all_configs(options->seed_identity_a), options);
    nca::assign_seeds(configs, options->master_seed);
    const nca::ExperimentConfig& config = configs[static_cast<size_t>(config_index)];
    const nca::ModelWeights* weights = set[nca::variant_index(config.variant)];
    if (!weights) {
      throw nca::Error(nca::ErrorCode::kInvalidArgument,
                       std::string("config needs a model of variant ") + nca::to_char(config.variant));
    }
    const auto [a, b] = nca::seed_pair(config, ctx.layout);
    if (ideal_path) {
      const nca::IdealImage ideal = nca::composite_ideal(*ctx.target, {a.x, a.y}, {b.x, b.y}, ctx.layout.grid_width,
                                                         ctx.layout.grid_height);
      nca::write_png(ideal_path, nca::render_rgba(ideal));
    }
    const nca::GrowOptions opts{ctx.layout.grid_width, ctx.layout.grid_height, config.total_steps, {a, b},
                                config.rng_seed};
    dump_frames(*weights, opts, frame_steps, frame_count, frame_pattern, nullptr);
  });
}

nca_status nca_stats_report(const char* results_csv, const char* group_by, const char* metric, double alpha,
                            const char* stats_csv, char** table) {
  return guarded([&] {
    require(results_csv != nullptr, "results CSV path is null");
    const std::string group = group_by ? group_by : "lateral_distance";
    const std::string value = metric ? metric : "rmse";
    require(group == "lateral_distance" || group == "seed_time" || group == "relative_offset" || group == "none",
            "group_by must be lateral_distance, seed_time, relative_offset or none");
    require(value == "rmse" || value == "area_ratio", "metric must be rmse or area_ratio");
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    const auto records = nca::parse_results_csv(nca::read_text_file(results_csv));
    std::vector<nca::Observation> obs;
    obs.reserve(records.size());
    for (const nca::MetricRecord& r : records) {
      int g = 0;
      if (group == "lateral_distance") g = r.config.lateral_distance;
      if (group == "seed_time") g = r.config.seed_time_delta;
      if (group == "relative_offset") g = r.config.relative_offset();
      obs.push_back({g, nca::to_char(r.config.variant), value == "rmse" ? r.rmse : r.area_ratio});
    }
    const nca::GroupedReport report = nca::grouped_comparisons(obs, alpha);
    if (stats_csv) nca::write_text_file(stats_csv, nca::format_stats_csv(report));
    if (table) {
      const std::string text = nca::format_stats_table(report);
      char* copy = static_cast<char*>(std::malloc(text.size() + 1));
      if (!copy) throw std::bad_alloc();
      std::memcpy(copy, text.c_str(), text.size() + 1);
      *table = copy;
    }
  });
}

}  // extern "C"
