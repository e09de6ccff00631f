#include "nca/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <atomic>
#include <mutex>
#include <string>

#include "parallel.hpp"

namespace nca {

std::vector<ExperimentConfig> enumerate_configs(Variant variant, double seed_identity_a, int first_index) {
  std::vector<ExperimentConfig> out;
  out.reserve(kConfigsPerVariant);
  int index = first_index;
  for (int t : kSeedTimes) {
    for (int d : kLateralDistances) {
      for (int oa : kVerticalOffsets) {
        for (int ob : kVerticalOffsets) {
          ExperimentConfig c;
          c.index = index++;
          c.variant = variant;
          c.seed_time_delta = t;
          c.lateral_distance = d;
          c.offset_a = oa;
          c.offset_b = ob;
          c.seed_identity_a = seed_identity_a;
          c.seed_identity_b = 1.0;
          out.push_back(c);
        }
      }
    }
  }
  return out;
}

std::vector<ExperimentConfig> enumerate_all_configs(double seed_identity_a) {
  std::vector<ExperimentConfig> out;
  out.reserve(3 * kConfigsPerVariant);
  for (Variant v : kAllVariants) {
    auto part = enumerate_configs(v, seed_identity_a, variant_index(v) * kConfigsPerVariant);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

void assign_seeds(std::span<ExperimentConfig> configs, std::uint64_t master_seed) {
  for (ExperimentConfig& c : configs) c.rng_seed = derive_seed(master_seed, static_cast<std::uint64_t>(c.index));
}

std::vector<ExperimentConfig> sweep_configs(std::uint64_t master_seed) {
  std::vector<ExperimentConfig> out;
  out.reserve(6 * kConfigsPerVariant);
  const double identities[] = {0.0, 0.5};
  int block = 1;
  for (double identity : identities) {
    for (Variant v : kAllVariants) {
      const int base = variant_index(v) * kConfigsPerVariant;
      auto part = enumerate_configs(v, identity, block * 3 * kConfigsPerVariant + base);
      for (size_t i = 0; i < part.size(); ++i) part[i].rng_seed = derive_seed(master_seed, base + i);
      out.insert(out.end(), part.begin(), part.end());
    }
    ++block;
  }
  return out;
}

std::vector<ExperimentConfig> spot_grid_configs(std::uint64_t master_seed) {
  // Position of (t = 0, d = 6, offset_a = 0, offset_b = 5) in the variant-C block.
  const auto base = enumerate_configs(Variant::kC, 1.0, variant_index(Variant::kC) * kConfigsPerVariant);
  const auto it = std::find_if(base.begin(), base.end(), [](const ExperimentConfig& c) {
    return c.seed_time_delta == 0 && c.lateral_distance == 6 && c.offset_a == 0 && c.offset_b == 5;
  });
  const std::uint64_t seed = derive_seed(master_seed, static_cast<std::uint64_t>(it->index));
  const double values[] = {0.0, 0.5, 1.0};
  std::vector<ExperimentConfig> out;
  int index = 0;
  for (double a : values) {
    for (double b : values) {
      ExperimentConfig c = *it;
      c.index = index++;
      c.seed_identity_a = a;
      c.seed_identity_b = b;
      c.rng_seed = seed;
      out.push_back(c);
    }
  }
  return out;
}

std::pair<SeedSpec, SeedSpec> seed_pair(const ExperimentConfig& config, const ExperimentLayout& layout) {
  const SeedSpec a{layout.anchor.x, layout.anchor.y + config.offset_a, 0, config.seed_identity_a};
  const SeedSpec b{layout.anchor.x + config.lateral_distance, layout.anchor.y + config.offset_b,
                   config.seed_time_delta, config.seed_identity_b};
  return {a, b};
}

template <typename T>
double rmse_rgba(const BasicCellGrid<T>& grid, const IdealImage& ideal) {
  if (grid.width() != ideal.width() || grid.height() != ideal.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "rmse_rgba: grid and ideal image sizes differ");
  }
  double sum = 0.0;
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      for (int c = 0; c < 4; ++c) {
        const double d = static_cast<double>(grid.at(x, y, c)) - ideal.at(x, y, c);
        sum += d * d;
      }
    }
  }
  return std::sqrt(sum / (4.0 * grid.cell_count()));
}

template double rmse_rgba(const BasicCellGrid<float>&, const IdealImage&);
template double rmse_rgba(const BasicCellGrid<double>&, const IdealImage&);

double rmse_rgba(const IdealImage& a, const IdealImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "rmse_rgba: image sizes differ");
  }
  double sum = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(a.data().size()));
}

BoxMetrics bbox_metrics(const CellGrid& grid, const IdealImage& ideal) {
  const auto expected = bounding_box(alive_mask(ideal));
  if (!expected) throw Error(ErrorCode::kInvalidArgument, "ideal image has no cell with alpha above 0.1");
  const auto grown = bounding_box(alive_mask(grid));
  BoxMetrics m;
  if (!grown) {
    m.died = true;
    return m;
  }
  m.dx = grown->x_min - expected->x_min;
  m.dy = grown->y_min - expected->y_min;
  m.area_ratio = static_cast<double>(grown->area()) / static_cast<double>(expected->area());
  return m;
}

bool classify_movement(const MetricRecord& record, const MovementThresholds& thresholds) {
  if (record.died) return false;
  const int shift = std::max(std::abs(record.bbox_dx), std::abs(record.bbox_dy));
  return shift > thresholds.displacement && record.area_ratio >= thresholds.area_min &&
         record.area_ratio <= thresholds.area_max;
}

MetricRecord run_pair(const ExperimentConfig& config, const ModelWeights& weights, const RunContext& context) {
  if (!context.target) throw Error(ErrorCode::kInvalidArgument, "run_pair: no target image");
  if (weights.variant != config.variant) {
    throw Error(ErrorCode::kInvalidArgument, std::string("run_pair: config wants model ") + to_char(config.variant) +
                                                 " but weights are model " + to_char(weights.variant));
  }
  if (config.total_steps < 1) throw Error(ErrorCode::kInvalidArgument, "run_pair: total_steps must be positive");
  const ExperimentLayout& layout = context.layout;
  const auto [a, b] = seed_pair(config, layout);
  for (const SeedSpec& s : {a, b}) {
    if (s.x < 0 || s.y < 0 || s.x >= layout.grid_width || s.y >= layout.grid_height) {
      throw Error(ErrorCode::kOutOfBounds, "seed (" + std::to_string(s.x) + ", " + std::to_string(s.y) +
                                               ") outside the experiment grid");
    }
  }
  const IdealImage ideal =
      composite_ideal(*context.target, {a.x, a.y}, {b.x, b.y}, layout.grid_width, layout.grid_height);

  MetricRecord record;
  record.config = config;
  record.error_trace.reserve(config.total_steps);
  const GrowOptions options{layout.grid_width, layout.grid_height, config.total_steps, {a, b}, config.rng_seed};
  const CellGrid final_grid = grow(weights, options, [&](int t, const CellGrid& g) {
    if (t > 0) record.error_trace.push_back(rmse_rgba(g, ideal));
    if (context.observer) context.observer(t, g);
  });
  record.rmse = record.error_trace.back();
  const BoxMetrics box = bbox_metrics(final_grid, ideal);
  record.bbox_dx = box.dx;
  record.bbox_dy = box.dy;
  record.area_ratio = box.area_ratio;
  record.died = box.died;
  record.moved = classify_movement(record, context.thresholds);
  return record;
}

std::vector<MetricRecord> run_experiments(std::span<const ExperimentConfig> configs, const ModelSet& models,
                                          const RunContext& context, int workers,
                                          const std::function<void(size_t, size_t)>& progress) {
  for (const ExperimentConfig& c : configs) {
    if (!models[variant_index(c.variant)]) {
      throw Error(ErrorCode::kInvalidArgument, std::string("no weights supplied for model ") + to_char(c.variant));
    }
  }
  std::vector<MetricRecord> records(configs.size());
  std::atomic<size_t> done{0};
  std::mutex progress_mutex;
  detail::parallel_for(configs.size(), workers, [&](size_t i) {
    RunContext local = context;
    local.observer = {};
    records[i] = run_pair(configs[i], *models[variant_index(configs[i].variant)], local);
    const size_t finished = ++done;
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(finished, configs.size());
    }
  });
  std::stable_sort(records.begin(), records.end(),
                   [](const MetricRecord& x, const MetricRecord& y) { return x.config.index < y.config.index; });
  return records;
}

std::vector<MetricRecord> seed_value_sweep(const ModelSet& models, const RunContext& context,
                                           std::uint64_t master_seed, int workers) {
  const auto configs = sweep_configs(master_seed);
  return run_experiments(configs, models, context, workers);
}

}  // namespace nca
