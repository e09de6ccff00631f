#include "nca/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "parallel.hpp"

namespace nca {

std::span<const double> training_identities(Variant variant) {
  static const double kSingle[] = {1.0};
  static const double kTriple[] = {0.0, 0.5, 1.0};
  if (variant == Variant::kC) return kTriple;
  return kSingle;
}

template <typename T>
double loss_with_gradient(const BasicCellGrid<T>& state, const IdealImage& target, const LossOptions& options,
                          BasicCellGrid<T>& gradient) {
  if (state.width() != target.width() || state.height() != target.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "loss: target " + std::to_string(target.width()) + "x" +
                                                   std::to_string(target.height()) + " does not match grid " +
                                                   std::to_string(state.width()) + "x" +
                                                   std::to_string(state.height()));
  }
  if (gradient.width() != state.width() || gradient.height() != state.height()) {
    gradient = BasicCellGrid<T>(state.width(), state.height());
  } else {
    std::fill(gradient.data().begin(), gradient.data().end(), T(0));
  }

  const double rgba_scale = 1.0 / (4.0 * state.cell_count());
  double rgba = 0.0;
  size_t masked = 0;
  for (int y = 0; y < state.height(); ++y) {
    for (int x = 0; x < state.width(); ++x) {
      for (int c = 0; c < 4; ++c) {
        const double diff = static_cast<double>(state.at(x, y, c)) - target.at(x, y, c);
        rgba += diff * diff;
        gradient.at(x, y, c) = static_cast<T>(2.0 * diff * rgba_scale);
      }
      if (target.at(x, y, 3) > kAliveThreshold) ++masked;
    }
  }
  double total = rgba * rgba_scale;

  if (options.variant == Variant::kA || masked == 0) return total;
  const double wanted = options.variant == Variant::kB ? 1.0 : options.seed_identity;
  const double id_scale = options.identity_weight / static_cast<double>(masked);
  double identity = 0.0;
  for (int y = 0; y < state.height(); ++y) {
    for (int x = 0; x < state.width(); ++x) {
      if (!(target.at(x, y, 3) > kAliveThreshold)) continue;
      const double diff = static_cast<double>(state.at(x, y, kIdentity)) - wanted;
      identity += diff * diff;
      gradient.at(x, y, kIdentity) = static_cast<T>(2.0 * diff * id_scale);
    }
  }
  return total + identity * id_scale;
}

template <typename T>
double loss(const BasicCellGrid<T>& state, const IdealImage& target, const LossOptions& options) {
  BasicCellGrid<T> scratch;
  return loss_with_gradient(state, target, options, scratch);
}

template double loss(const BasicCellGrid<float>&, const IdealImage&, const LossOptions&);
template double loss(const BasicCellGrid<double>&, const IdealImage&, const LossOptions&);
template double loss_with_gradient(const BasicCellGrid<float>&, const IdealImage&, const LossOptions&,
                                   BasicCellGrid<float>&);
template double loss_with_gradient(const BasicCellGrid<double>&, const IdealImage&, const LossOptions&,
                                   BasicCellGrid<double>&);

namespace {

// Adds the transpose of perceive() for one cell's perception gradient.
template <typename T>
void scatter_perception(BasicCellGrid<T>& grad, int x, int y, const T* dp) {
  static const PerceptionKernels& k = PerceptionKernels::standard();
  auto center = grad.cell(x, y);
  for (int c = 0; c < kChannels; ++c) center[c] += dp[c];
  const T* dsx = dp + kChannels;
  const T* dsy = dp + 2 * kChannels;
  for (int dy = -1; dy <= 1; ++dy) {
    const int ny = y + dy;
    if (ny < 0 || ny >= grad.height()) continue;
    for (int dx = -1; dx <= 1; ++dx) {
      const int nx = x + dx;
      if (nx < 0 || nx >= grad.width()) continue;
      const T kx = static_cast<T>(k.sobel_x[dy + 1][dx + 1]);
      const T ky = static_cast<T>(k.sobel_y[dy + 1][dx + 1]);
      if (kx == T(0) && ky == T(0)) continue;
      auto v = grad.cell(nx, ny);
      for (int c = 0; c < kChannels; ++c) v[c] += kx * dsx[c] + ky * dsy[c];
    }
  }
}

}  // namespace

template <typename T>
BpttResult<T> bptt_gradients(const BasicModelWeights<T>& weights, const BasicCellGrid<T>& start, int steps,
                             const IdealImage& target, const LossOptions& options, StepRng& rng) {
  if (steps < 1) throw Error(ErrorCode::kInvalidArgument, "BPTT needs at least one step");
  std::vector<StepRecord<T>> records(steps);
  Stepper<T> stepper;
  BasicCellGrid<T> state = start;
  BasicCellGrid<T> next(start.width(), start.height());
  for (int t = 0; t < steps; ++t) {
    stepper.step(state, weights, rng, next, &records[t]);
    std::swap(state, next);
  }

  BpttResult<T> result;
  BasicCellGrid<T> grad;
  result.loss = loss_with_gradient(state, target, options, grad);
  result.final_state = std::move(state);
  result.gradients = Parameters<T>::zeros();
  Parameters<T>& g = result.gradients;
  const Parameters<T>& p = weights.params;
  const int width = start.width();

  RowMatrix<T> d_delta;
  RowMatrix<T> d_hidden;
  RowMatrix<T> d_perception;
  for (int t = steps - 1; t >= 0; --t) {
    const StepRecord<T>& rec = records[t];
    auto gd = grad.data();
    for (size_t c = 0; c < rec.survives.size(); ++c) {
      if (!rec.survives[c]) std::fill_n(gd.data() + c * kChannels, kChannels, T(0));
    }
    const auto m = static_cast<Eigen::Index>(rec.rows.size());
    if (m == 0) continue;
    d_delta.resize(m, kChannels);
    for (Eigen::Index j = 0; j < m; ++j) {
      std::copy_n(gd.data() + static_cast<size_t>(rec.rows[j]) * kChannels, kChannels, d_delta.row(j).data());
    }
    g.w2.noalias() += rec.hidden.transpose() * d_delta;
    g.b2 += d_delta.colwise().sum();
    d_hidden.noalias() = d_delta * p.w2.transpose();
    d_hidden = (rec.hidden.array() > T(0)).select(d_hidden, T(0));
    g.w1.noalias() += rec.perception.transpose() * d_hidden;
    g.b1 += d_hidden.colwise().sum();
    d_perception.noalias() = d_hidden * p.w1.transpose();
    // The direct path (state_in -> state_out) is already in `grad`.
    for (Eigen::Index j = 0; j < m; ++j) {
      scatter_perception(grad, rec.rows[j] % width, rec.rows[j] / width, d_perception.row(j).data());
    }
  }
  return result;
}

template BpttResult<float> bptt_gradients(const BasicModelWeights<float>&, const BasicCellGrid<float>&, int,
                                          const IdealImage&, const LossOptions&, StepRng&);
template BpttResult<double> bptt_gradients(const BasicModelWeights<double>&, const BasicCellGrid<double>&, int,
                                           const IdealImage&, const LossOptions&, StepRng&);

template <typename T>
Parameters<T> normalize_gradients(Parameters<T> grads) {
  grads.for_each([](std::span<T> tensor) {
    double sq = 0.0;
    for (T v : tensor) sq += static_cast<double>(v) * v;
    if (sq == 0.0) return;
    const double inv = 1.0 / std::sqrt(sq);
    for (T& v : tensor) v = static_cast<T>(v * inv);
  });
  return grads;
}

template Parameters<float> normalize_gradients(Parameters<float>);
template Parameters<double> normalize_gradients(Parameters<double>);

template <typename T>
BasicOptimizerState<T>::BasicOptimizerState(AdamOptions options)
    : options_(options), m_(Parameters<T>::zeros()), v_(Parameters<T>::zeros()) {}

template <typename T>
double BasicOptimizerState<T>::learning_rate() const {
  return step_ < options_.halve_at ? options_.learning_rate : 0.5 * options_.learning_rate;
}

template <typename T>
void BasicOptimizerState<T>::apply(Parameters<T>& params, const Parameters<T>& grads) {
  const double lr = learning_rate();
  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double eps = options_.epsilon;

  std::vector<std::span<T>> ps, ms, vs;
  std::vector<std::span<const T>> gs;
  params.for_each([&](std::span<T> s) { ps.push_back(s); });
  m_.for_each([&](std::span<T> s) { ms.push_back(s); });
  v_.for_each([&](std::span<T> s) { vs.push_back(s); });
  grads.for_each([&](std::span<const T> s) { gs.push_back(s); });
  for (size_t k = 0; k < ps.size(); ++k) {
    for (size_t i = 0; i < ps[k].size(); ++i) {
      const double g = gs[k][i];
      const double m = b1 * ms[k][i] + (1.0 - b1) * g;
      const double v = b2 * vs[k][i] + (1.0 - b2) * g * g;
      ms[k][i] = static_cast<T>(m);
      vs[k][i] = static_cast<T>(v);
      const double update = lr * (m / c1) / (std::sqrt(v / c2) + eps);
      ps[k][i] = static_cast<T>(ps[k][i] - update);
    }
  }
}

template class BasicOptimizerState<float>;
template class BasicOptimizerState<double>;

SamplePool::SamplePool(const TrainConfig& config, StepRng& rng)
    : variant_(config.variant), width_(config.grid_width), height_(config.grid_height) {
  if (config.pool_size < 1) throw Error(ErrorCode::kInvalidArgument, "pool size must be positive");
  entries_.reserve(config.pool_size);
  for (int i = 0; i < config.pool_size; ++i) entries_.push_back(seed_entry(rng));
}

PoolEntry SamplePool::seed_entry(StepRng& rng) const {
  const auto ids = training_identities(variant_);
  const double identity = ids.size() == 1 ? ids[0] : ids[rng.uniform_int(0, static_cast<int>(ids.size()) - 1)];
  PoolEntry entry{CellGrid(width_, height_), identity};
  place_seed(entry.state, SeedSpec{width_ / 2, height_ / 2, 0, identity});
  return entry;
}

IdealImage pad_target(const IdealImage& target, int width, int height) {
  if (target.width() == width && target.height() == height) return target;
  if (target.width() > width || target.height() > height) {
    throw Error(ErrorCode::kDimensionMismatch, "target larger than the training grid");
  }
  return paste_centered(target, Point{width / 2, height / 2}, width, height);
}

IterationStats train_iteration(SamplePool& pool, ModelWeights& weights, OptimizerState& opt, const TrainConfig& config,
                               const IdealImage& target, StepRng& rng) {
  const size_t batch = static_cast<size_t>(config.batch_size);
  if (batch < 1 || batch > pool.size()) throw Error(ErrorCode::kInvalidArgument, "batch size must lie in [1, pool]");

  IterationStats stats;
  stats.learning_rate = opt.learning_rate();

  // Partial Fisher-Yates draw of distinct pool indices.
  std::vector<size_t> order(pool.size());
  std::iota(order.begin(), order.end(), size_t{0});
  for (size_t i = 0; i < batch; ++i) {
    const size_t j = i + static_cast<size_t>(rng.uniform_int(0, static_cast<int>(pool.size() - i) - 1));
    std::swap(order[i], order[j]);
  }
  stats.batch.assign(order.begin(), order.begin() + batch);

  size_t worst = 0;
  double worst_loss = -1.0;
  for (size_t i = 0; i < batch; ++i) {
    const PoolEntry& e = pool[stats.batch[i]];
    const double l = loss(e.state, target, LossOptions{config.variant, e.seed_identity, config.identity_weight});
    if (l > worst_loss) {
      worst_loss = l;
      worst = i;
    }
  }
  stats.reseeded = stats.batch[worst];
  pool[stats.reseeded] = pool.seed_entry(rng);

  stats.rollout = rng.uniform_int(config.min_rollout, config.max_rollout);
  std::vector<std::uint64_t> stream_seeds(batch);
  for (auto& s : stream_seeds) s = rng.next();

  std::vector<BpttResult<float>> results(batch);
  detail::parallel_for(batch, config.workers, [&](size_t i) {
    const PoolEntry& e = pool[stats.batch[i]];
    StepRng stream(stream_seeds[i]);
    results[i] = bptt_gradients(weights, e.state, stats.rollout, target,
                                LossOptions{config.variant, e.seed_identity, config.identity_weight}, stream);
  });

  Parameters<float> total = Parameters<float>::zeros();
  double loss_sum = 0.0;
  for (const auto& r : results) {
    total.w1 += r.gradients.w1;
    total.b1 += r.gradients.b1;
    total.w2 += r.gradients.w2;
    total.b2 += r.gradients.b2;
    loss_sum += r.loss;
  }
  stats.loss = loss_sum / static_cast<double>(batch);
  if (!std::isfinite(stats.loss)) {
    throw Error(ErrorCode::kNumeric, "training diverged: batch loss is not finite at update " +
                                         std::to_string(opt.step_count() + 1));
  }
  const float inv = 1.0f / static_cast<float>(batch);
  total.w1 *= inv;
  total.b1 *= inv;
  total.w2 *= inv;
  total.b2 *= inv;
  adam_step(opt, weights, normalize_gradients(std::move(total)));

  for (size_t i = 0; i < batch; ++i) pool[stats.batch[i]].state = std::move(results[i].final_state);
  return stats;
}

TrainResult train(const TrainConfig& config, const IdealImage& target,
                  const std::function<void(const IterationStats&)>& on_iteration) {
  if (config.iterations < 0) throw Error(ErrorCode::kInvalidArgument, "iteration count must be non-negative");
  if (config.min_rollout < 1 || config.max_rollout < config.min_rollout) {
    throw Error(ErrorCode::kInvalidArgument, "invalid rollout range");
  }
  const IdealImage padded = pad_target(target, config.grid_width, config.grid_height);
  StepRng rng(config.seed);
  TrainResult result{ModelWeights::initialized(config.variant, config.fire_rate, rng.next()), {}};
  SamplePool pool(config, rng);
  OptimizerState opt(AdamOptions{config.learning_rate, config.lr_halve_at});
  result.history.reserve(config.iterations);
  for (int i = 1; i <= config.iterations; ++i) {
    IterationStats stats = train_iteration(pool, result.weights, opt, config, padded, rng);
    stats.iteration = i;
    if (on_iteration) on_iteration(stats);
    result.history.push_back(std::move(stats));
  }
  return result;
}

}  // namespace nca
