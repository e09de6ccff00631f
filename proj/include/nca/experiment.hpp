#pragma once

// Two-organism proximity experiments: configuration enumeration, single runs
// with RMSE and bounding-box metrics, and the seed-identity sweep.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "nca/grid.hpp"
#include "nca/model.hpp"

namespace nca {

inline constexpr std::array<int, 7> kSeedTimes = {0, 10, 50, 100, 150, 200, 250};
inline constexpr std::array<int, 5> kLateralDistances = {6, 9, 12, 15, 18};
inline constexpr std::array<int, 4> kVerticalOffsets = {0, 5, 10, 15};
inline constexpr int kConfigsPerVariant = 7 * 5 * 4 * 4;
inline constexpr int kTotalSteps = 1000;

struct ExperimentConfig {
  int index = 0;  // global row index; results are sorted on it
  Variant variant = Variant::kA;
  int seed_time_delta = 0;
  int lateral_distance = 6;
  int offset_a = 0;
  int offset_b = 0;
  double seed_identity_a = 1.0;
  double seed_identity_b = 1.0;
  int total_steps = kTotalSteps;
  std::uint64_t rng_seed = 0;

  int relative_offset() const { return offset_b - offset_a; }
};

struct ExperimentLayout {
  int grid_width = 96;
  int grid_height = 64;
  Point anchor{39, 24};  // seed A before its vertical offset
};

struct MovementThresholds {
  int displacement = 3;
  double area_min = 0.6;
  double area_max = 1.7;
};

struct MetricRecord {
  ExperimentConfig config;
  double rmse = 0.0;
  int bbox_dx = 0;
  int bbox_dy = 0;
  double area_ratio = 0.0;
  bool moved = false;
  bool died = false;
  std::vector<double> error_trace;  // RMSE after each of the total_steps updates
};

// Cartesian product of seed times x distances x offset_a x offset_b in that
// nesting order. Indices run from `first_index`; rng seeds are left at 0.
std::vector<ExperimentConfig> enumerate_configs(Variant variant, double seed_identity_a = 1.0, int first_index = 0);

// 1680 configs: variants A, B, C in order, indices 0..1679.
std::vector<ExperimentConfig> enumerate_all_configs(double seed_identity_a = 1.0);

// 3360 configs: seed_identity_a in {0.0, 0.5}, each over all three variants,
// indices 1680..5039. Each config's rng seed is derived from its paired
// seed-1.0 config so the sweep is matched with the main experiment.
std::vector<ExperimentConfig> sweep_configs(std::uint64_t master_seed);

// Variant C, lateral distance 6, relative offset 5, seed time 0, every
// (seed_a, seed_b) in {0.0, 0.5, 1.0}^2.
std::vector<ExperimentConfig> spot_grid_configs(std::uint64_t master_seed);

// Fills rng_seed = derive_seed(master_seed, index) for every config.
void assign_seeds(std::span<ExperimentConfig> configs, std::uint64_t master_seed);

// Seed positions for a config under a layout.
std::pair<SeedSpec, SeedSpec> seed_pair(const ExperimentConfig& config, const ExperimentLayout& layout);

template <typename T>
double rmse_rgba(const BasicCellGrid<T>& grid, const IdealImage& ideal);

double rmse_rgba(const IdealImage& a, const IdealImage& b);

struct BoxMetrics {
  int dx = 0;
  int dy = 0;
  double area_ratio = 0.0;
  bool died = false;  // grown grid has no living cells
};

// Living-cell box of the grown grid against the living-cell box of the ideal
// image (alive test applied to the ideal's alpha).
BoxMetrics bbox_metrics(const CellGrid& grid, const IdealImage& ideal);

bool classify_movement(const MetricRecord& record, const MovementThresholds& thresholds = {});

struct RunContext {
  const IdealImage* target = nullptr;
  ExperimentLayout layout;
  MovementThresholds thresholds;
  // Optional hook receiving (t, grid) for t = 0..total_steps.
  GrowObserver observer;
};

MetricRecord run_pair(const ExperimentConfig& config, const ModelWeights& weights, const RunContext& context);

// Models indexed by variant_index(); entries may be null when no config
// needs that variant. Returns records sorted by config index.
using ModelSet = std::array<const ModelWeights*, 3>;

std::vector<MetricRecord> run_experiments(std::span<const ExperimentConfig> configs, const ModelSet& models,
                                          const RunContext& context, int workers,
                                          const std::function<void(size_t done, size_t total)>& progress = {});

std::vector<MetricRecord> seed_value_sweep(const ModelSet& models, const RunContext& context,
                                           std::uint64_t master_seed, int workers);

}  // namespace nca
