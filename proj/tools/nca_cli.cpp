// Command-line front end over the C API.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nca.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

int exit_code(nca_status status) {
  switch (status) {
    case NCA_OK: return 0;
    case NCA_ERR_INVALID_ARGUMENT:
    case NCA_ERR_OUT_OF_BOUNDS: return kExitUsage;
    case NCA_ERR_NUMERIC:
    case NCA_ERR_INTERNAL: return kExitNumeric;
    default: return kExitIo;
  }
}

// Throws out of the subcommand with the mapped exit code.
struct Failure {
  int code;
};

void check(nca_status status) {
  if (status == NCA_OK) return;
  std::fprintf(stderr, "nca: %s: %s\n", nca_status_name(status), nca_last_error());
  throw Failure{exit_code(status)};
}

struct Model {
  nca_model* ptr = nullptr;
  explicit Model(const std::string& path) { check(nca_model_load(path.c_str(), &ptr)); }
  Model(Model&& o) noexcept : ptr(o.ptr) { o.ptr = nullptr; }
  Model(const Model&) = delete;
  ~Model() { nca_model_free(ptr); }
};

struct Image {
  nca_image* ptr = nullptr;
  Image(const std::string& path, int width) { check(nca_image_load(path.c_str(), width, &ptr)); }
  ~Image() { nca_image_free(ptr); }
};

std::vector<Model> load_models(const std::vector<std::string>& paths) {
  std::vector<Model> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.emplace_back(p);
  return out;
}

std::vector<int> parse_frames(const std::string& spec) {
  std::vector<int> out;
  if (spec.empty()) return out;
  size_t start = 0;
  while (start <= spec.size()) {
    const size_t comma = spec.find(',', start);
    const std::string item = spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw CLI::ValidationError("--frames", "bad frame step '" + item + "'");
    out.push_back(value);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

nca_seed parse_seed(const std::string& spec) {
  nca_seed s{};
  char tail = 0;
  if (std::sscanf(spec.c_str(), "%d,%d,%d,%lf%c", &s.x, &s.y, &s.time, &s.identity, &tail) != 4) {
    throw CLI::ValidationError("--seed", "expected x,y,t,identity but got '" + spec + "'");
  }
  return s;
}

void progress(size_t done, size_t total, void* user) {
  const bool* quiet = static_cast<const bool*>(user);
  if (*quiet) return;
  if (done == total || done % 20 == 0) std::fprintf(stderr, "\r%zu/%zu runs", done, total);
  if (done == total) std::fputc('\n', stderr);
}

struct TrainArgs {
  std::string config_file;
  std::string target;
  int target_width = 22;
  std::string out;
  std::string loss_csv;
  char variant = 0;
  int iterations = -1;
  long long seed = -1;
  int workers = 0;
  int log_every = 100;
};

void train_progress(const nca_iteration* it, void* user) {
  const int every = *static_cast<const int*>(user);
  if (every > 0 && it->iteration % every == 0) {
    std::fprintf(stderr, "iteration %d  loss %.6f  lr %g\n", it->iteration, it->loss, it->learning_rate);
  }
}

void run_train(const TrainArgs& a) {
  nca_train_config cfg;
  nca_train_config_default(&cfg);
  if (!a.config_file.empty()) check(nca_train_config_load(&cfg, a.config_file.c_str()));
  if (a.variant) cfg.variant = a.variant;
  if (a.iterations >= 0) cfg.iterations = a.iterations;
  if (a.seed >= 0) cfg.seed = static_cast<uint64_t>(a.seed);
  if (a.workers > 0) cfg.workers = a.workers;
  Image target(a.target, a.target_width);
  nca_model* model = nullptr;
  int every = a.log_every;
  check(nca_train(&cfg, target.ptr, a.loss_csv.empty() ? nullptr : a.loss_csv.c_str(), train_progress, &every,
                  &model));
  const nca_status saved = nca_model_save(model, a.out.c_str(), nullptr);
  nca_model_free(model);
  check(saved);
}

struct ExperimentArgs {
  std::vector<std::string> models;
  std::string target;
  int target_width = 22;
  std::string out;
  std::string traces;
  std::string spot_grid;
  long long seed = 1;
  double seed_identity = 1.0;
  int workers = 1;
  int steps = 1000;
  int config_index = 0;
  std::string frames;
  std::string pattern = "frame_%04d.png";
  std::string ideal;
  bool quiet = false;
};

nca_experiment_options experiment_options(const ExperimentArgs& a) {
  nca_experiment_options opt;
  nca_experiment_options_default(&opt);
  opt.master_seed = static_cast<uint64_t>(a.seed);
  opt.seed_identity_a = a.seed_identity;
  opt.workers = a.workers;
  opt.total_steps = a.steps;
  return opt;
}

void run_experiment(const ExperimentArgs& a, bool sweep) {
  const auto models = load_models(a.models);
  const nca_model* const set[3] = {models[0].ptr, models[1].ptr, models[2].ptr};
  Image target(a.target, a.target_width);
  const nca_experiment_options opt = experiment_options(a);
  const char* traces = a.traces.empty() ? nullptr : a.traces.c_str();
  bool quiet = a.quiet;
  if (sweep) {
    check(nca_sweep_seed(set, target.ptr, &opt, a.out.c_str(), traces, progress, &quiet));
    if (!a.spot_grid.empty()) {
      const nca_model* c = nullptr;
      for (const nca_model* m : set) {
        if (nca_model_variant(m) == 'C') c = m;
      }
      check(nca_spot_grid(c, target.ptr, &opt, a.spot_grid.c_str()));
    }
  } else {
    check(nca_experiment(set, target.ptr, &opt, a.out.c_str(), traces, progress, &quiet));
  }
}

void run_render(const ExperimentArgs& a) {
  const auto models = load_models(a.models);
  const nca_model* set[3] = {nullptr, nullptr, nullptr};
  for (size_t i = 0; i < models.size(); ++i) set[i] = models[i].ptr;
  Image target(a.target, a.target_width);
  const nca_experiment_options opt = experiment_options(a);
  const auto frames = parse_frames(a.frames);
  check(nca_render_config(set, target.ptr, &opt, a.config_index, frames.data(), frames.size(), a.pattern.c_str(),
                          a.ideal.empty() ? nullptr : a.ideal.c_str()));
}

struct GrowArgs {
  std::string model;
  std::vector<std::string> seeds;
  int steps = 1000;
  int width = 96;
  int height = 64;
  long long rng_seed = 1;
  std::string frames;
  std::string pattern = "frame_%04d.png";
  std::string final_png;
};

void run_grow(const GrowArgs& a) {
  Model model(a.model);
  std::vector<nca_seed> seeds;
  for (const auto& s : a.seeds) seeds.push_back(parse_seed(s));
  const auto frames = parse_frames(a.frames);
  nca_grid* final = nullptr;
  check(nca_grow(model.ptr, seeds.data(), seeds.size(), a.width, a.height, a.steps, static_cast<uint64_t>(a.rng_seed),
                 frames.data(), frames.size(), a.pattern.c_str(), &final));
  const nca_status st = a.final_png.empty() ? NCA_OK : nca_grid_write_png(final, a.final_png.c_str());
  std::printf("alive cells after %d steps: %zu\n", a.steps, nca_grid_alive_count(final));
  nca_grid_free(final);
  check(st);
}

struct StatsArgs {
  std::string results;
  std::string group_by = "lateral_distance";
  std::string metric = "rmse";
  double alpha = 0.05;
  std::string out;
};

void run_stats(const StatsArgs& a) {
  char* table = nullptr;
  check(nca_stats_report(a.results.c_str(), a.group_by.c_str(), a.metric.c_str(), a.alpha,
                         a.out.empty() ? nullptr : a.out.c_str(), &table));
  std::fputs(table, stdout);
  nca_string_free(table);
}

void add_experiment_options(CLI::App* cmd, ExperimentArgs& a, bool three_models) {
  auto* models = cmd->add_option("--models", a.models, "Checkpoints, one per variant")->check(CLI::ExistingFile);
  models->required();
  if (three_models) models->expected(3);
  else models->expected(1, 3);
  cmd->add_option("--target", a.target, "Target PNG")->required()->check(CLI::ExistingFile);
  cmd->add_option("--target-width", a.target_width, "Target width in cells")->capture_default_str();
  cmd->add_option("--seed", a.seed, "Master seed")->capture_default_str();
  cmd->add_option("--seed-identity", a.seed_identity, "Identity of the first organism")->capture_default_str();
  cmd->add_option("--workers", a.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--steps", a.steps, "Update steps per run")->capture_default_str()->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural cellular automata with an identity channel"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a target image");
  train_cmd->add_option("--config", train.config_file, "key=value training settings")->check(CLI::ExistingFile);
  train_cmd->add_option("--variant", train.variant, "A, B or C")->check(CLI::IsMember({'A', 'B', 'C'}));
  train_cmd->add_option("--target", train.target, "Target PNG")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--target-width", train.target_width, "Target width in cells")->capture_default_str();
  train_cmd->add_option("--iterations", train.iterations, "Training iterations");
  train_cmd->add_option("--seed", train.seed, "Random seed");
  train_cmd->add_option("--workers", train.workers, "Worker threads");
  train_cmd->add_option("--out", train.out, "Output checkpoint")->required();
  train_cmd->add_option("--loss-csv", train.loss_csv, "Per-iteration loss CSV");
  train_cmd->add_option("--log-every", train.log_every, "Progress interval (0 = silent)")->capture_default_str();

  GrowArgs grow;
  auto* grow_cmd = app.add_subcommand("grow", "Grow organisms from seeds and dump frames");
  grow_cmd->add_option("--model", grow.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  grow_cmd->add_option("--seed", grow.seeds, "x,y,t,identity (repeatable)")->required();
  grow_cmd->add_option("--steps", grow.steps, "Update steps")->capture_default_str();
  grow_cmd->add_option("--width", grow.width, "Grid width")->capture_default_str();
  grow_cmd->add_option("--height", grow.height, "Grid height")->capture_default_str();
  grow_cmd->add_option("--rng-seed", grow.rng_seed, "Random seed")->capture_default_str();
  grow_cmd->add_option("--frames", grow.frames, "Comma-separated steps to dump, e.g. 100,900");
  grow_cmd->add_option("--frame-pattern", grow.pattern, "printf pattern with one %d")->capture_default_str();
  grow_cmd->add_option("--final", grow.final_png, "Write the final grid as PNG");

  ExperimentArgs experiment;
  auto* experiment_cmd = app.add_subcommand("experiment", "Run the 1680 two-organism configurations");
  add_experiment_options(experiment_cmd, experiment, true);
  experiment_cmd->add_option("--out", experiment.out, "Results CSV")->required();
  experiment_cmd->add_option("--traces", experiment.traces, "Per-step RMSE CSV");
  experiment_cmd->add_flag("--quiet", experiment.quiet, "No progress output");

  ExperimentArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep-seed", "Run the 3360-run first-organism identity sweep");
  add_experiment_options(sweep_cmd, sweep, true);
  sweep_cmd->add_option("--out", sweep.out, "Results CSV")->required();
  sweep_cmd->add_option("--traces", sweep.traces, "Per-step RMSE CSV");
  sweep_cmd->add_option("--spot-grid", sweep.spot_grid, "Also write the nine variant-C identity pairs here");
  sweep_cmd->add_flag("--quiet", sweep.quiet, "No progress output");

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "Pairwise Mann-Whitney / Vargha-Delaney report");
  stats_cmd->add_option("--results", stats.results, "Results CSV")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--group-by", stats.group_by, "lateral_distance, seed_time, relative_offset or none")
      ->capture_default_str();
  stats_cmd->add_option("--metric", stats.metric, "rmse or area_ratio")->capture_default_str();
  stats_cmd->add_option("--alpha", stats.alpha, "Family-wise significance level")->capture_default_str();
  stats_cmd->add_option("--out", stats.out, "Stats CSV");

  ExperimentArgs render;
  auto* render_cmd = app.add_subcommand("render", "Re-run one experiment config and write frames");
  add_experiment_options(render_cmd, render, false);
  render_cmd->add_option("--config-index", render.config_index, "Row index in the results CSV")->required();
  render_cmd->add_option("--frames", render.frames, "Comma-separated steps, e.g. 100,900")->required();
  render_cmd->add_option("--frame-pattern", render.pattern, "printf pattern with one %d")->capture_default_str();
  render_cmd->add_option("--ideal", render.ideal, "Write the idealized comparison image here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train_cmd) run_train(train);
    if (*grow_cmd) run_grow(grow);
    if (*experiment_cmd) run_experiment(experiment, false);
    if (*sweep_cmd) run_experiment(sweep, true);
    if (*stats_cmd) run_stats(stats);
    if (*render_cmd) run_render(render);
  } catch (const Failure& f) {
    return f.code;
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "nca: %s\n", e.what());
    return kExitUsage;
  }
  return 0;
}
