#pragma once

// Pool-based training with backpropagation through time, the three
// identity-loss variants, per-tensor gradient normalization and Adam.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "nca/grid.hpp"
#include "nca/model.hpp"

namespace nca {

// Seed identities a variant trains on: {1.0} for A and B, {0.0, 0.5, 1.0} for C.
std::span<const double> training_identities(Variant variant);

struct LossOptions {
  Variant variant = Variant::kA;
  double seed_identity = 1.0;
  double identity_weight = 1.0;
};

// Mean squared RGBA error over every cell, plus for B/C the weighted mean
// squared identity error over cells where target alpha > 0.1.
template <typename T>
double loss(const BasicCellGrid<T>& state, const IdealImage& target, const LossOptions& options);

// Same value as loss(); also writes dL/dstate into `gradient`.
template <typename T>
double loss_with_gradient(const BasicCellGrid<T>& state, const IdealImage& target, const LossOptions& options,
                          BasicCellGrid<T>& gradient);

template <typename T>
struct BpttResult {
  double loss = 0.0;
  Parameters<T> gradients;
  BasicCellGrid<T> final_state;
};

// Exact gradient of loss(final state) through `steps` update steps. Fire
// masks and alive masks are treated as constants.
template <typename T>
BpttResult<T> bptt_gradients(const BasicModelWeights<T>& weights, const BasicCellGrid<T>& start, int steps,
                             const IdealImage& target, const LossOptions& options, StepRng& rng);

// Each tensor scaled to unit L2 norm; all-zero tensors pass through.
template <typename T>
Parameters<T> normalize_gradients(Parameters<T> grads);

struct AdamOptions {
  double learning_rate = 2e-3;
  int halve_at = 2000;  // learning rate halves once this many updates are done
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
class BasicOptimizerState {
 public:
  explicit BasicOptimizerState(AdamOptions options = {});

  const AdamOptions& options() const { return options_; }
  long step_count() const { return step_; }
  double learning_rate() const;

  void apply(Parameters<T>& params, const Parameters<T>& grads);

 private:
  AdamOptions options_;
  Parameters<T> m_;
  Parameters<T> v_;
  long step_ = 0;
};

using OptimizerState = BasicOptimizerState<float>;

template <typename T>
void adam_step(BasicOptimizerState<T>& opt, BasicModelWeights<T>& weights, const Parameters<T>& grads) {
  opt.apply(weights.params, grads);
}

struct PoolEntry {
  CellGrid state;
  double seed_identity = 1.0;
};

struct TrainConfig {
  Variant variant = Variant::kB;
  int grid_width = 48;
  int grid_height = 48;
  int batch_size = 12;
  int pool_size = 1024;
  int iterations = 8000;
  int min_rollout = 64;
  int max_rollout = 96;
  double learning_rate = 2e-3;
  int lr_halve_at = 2000;
  double fire_rate = 0.5;
  double identity_weight = 0.1;
  std::uint64_t seed = 1;
  int workers = 1;
};

class SamplePool {
 public:
  SamplePool(const TrainConfig& config, StepRng& rng);

  size_t size() const { return entries_.size(); }
  PoolEntry& operator[](size_t i) { return entries_[i]; }
  const PoolEntry& operator[](size_t i) const { return entries_[i]; }

  // Fresh single-seed grid centered in the pool's grid.
  PoolEntry seed_entry(StepRng& rng) const;

 private:
  Variant variant_;
  int width_;
  int height_;
  std::vector<PoolEntry> entries_;
};

struct IterationStats {
  int iteration = 0;
  double loss = 0.0;
  double learning_rate = 0.0;
  int rollout = 0;
  std::vector<size_t> batch;  // pool indices used
  size_t reseeded = 0;        // pool index replaced by a fresh seed
};

// `target` must already match the training grid (see pad_target).
IterationStats train_iteration(SamplePool& pool, ModelWeights& weights, OptimizerState& opt, const TrainConfig& config,
                               const IdealImage& target, StepRng& rng);

IdealImage pad_target(const IdealImage& target, int width, int height);

struct TrainResult {
  ModelWeights weights;
  std::vector<IterationStats> history;
};

// Runs `config.iterations` iterations. Throws ErrorCode::kNumeric when the
// loss stops being finite.
TrainResult train(const TrainConfig& config, const IdealImage& target,
                  const std::function<void(const IterationStats&)>& on_iteration = {});

}  // namespace nca
