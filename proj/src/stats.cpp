#include "nca/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "nca/error.hpp"

namespace nca {

namespace {

void require_sample(std::span<const double> s, const char* what) {
  if (s.empty()) throw Error(ErrorCode::kInvalidArgument, std::string(what) + ": empty sample");
  for (double v : s) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, std::string(what) + ": non-finite value");
  }
}

struct Ranked {
  std::vector<long> doubled_ranks;  // 2 * midrank, first sample then second
  double tie_term = 0.0;            // sum over tie groups of t^3 - t
};

Ranked rank_pooled(std::span<const double> a, std::span<const double> b) {
  const size_t n = a.size() + b.size();
  std::vector<std::pair<double, size_t>> pooled;
  pooled.reserve(n);
  for (size_t i = 0; i < a.size(); ++i) pooled.emplace_back(a[i], i);
  for (size_t i = 0; i < b.size(); ++i) pooled.emplace_back(b[i], a.size() + i);
  std::sort(pooled.begin(), pooled.end());

  Ranked r;
  r.doubled_ranks.resize(n);
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    // ranks i+1 .. j share the midrank (i + j + 1) / 2
    const long doubled = static_cast<long>(i + j + 1);
    for (size_t k = i; k < j; ++k) r.doubled_ranks[pooled[k].second] = doubled;
    const double t = static_cast<double>(j - i);
    r.tie_term += t * t * t - t;
    i = j;
  }
  return r;
}

// Two-sided exact p from the permutation distribution of the first sample's
// rank sum, counted by dynamic programming over (items chosen, doubled sum).
double exact_p(const Ranked& r, size_t n1, long observed_sum) {
  const size_t n = r.doubled_ranks.size();
  const long max_sum = std::accumulate(r.doubled_ranks.begin(), r.doubled_ranks.end(), 0L);
  std::vector<std::vector<double>> ways(n1 + 1, std::vector<double>(static_cast<size_t>(max_sum) + 1, 0.0));
  ways[0][0] = 1.0;
  for (size_t item = 0; item < n; ++item) {
    const long w = r.doubled_ranks[item];
    for (size_t k = std::min(n1, item + 1); k >= 1; --k) {
      for (long s = max_sum; s >= w; --s) ways[k][s] += ways[k - 1][s - w];
    }
  }
  double total = 0.0;
  double le = 0.0;
  double ge = 0.0;
  for (long s = 0; s <= max_sum; ++s) {
    const double c = ways[n1][s];
    total += c;
    if (s <= observed_sum) le += c;
    if (s >= observed_sum) ge += c;
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / total);
}

double normal_p(double u, double n1, double n2, double tie_term) {
  const double n = n1 + n2;
  const double mu = 0.5 * n1 * n2;
  double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (n < 2.0 || !(var > 0.0)) return 1.0;
  const double z = std::max(std::abs(u - mu) - 0.5, 0.0) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

}  // namespace

MannWhitney mann_whitney(std::span<const double> a, std::span<const double> b, MwMethod method) {
  require_sample(a, "mann_whitney");
  require_sample(b, "mann_whitney");
  const Ranked r = rank_pooled(a, b);
  const long sum = std::accumulate(r.doubled_ranks.begin(), r.doubled_ranks.begin() + static_cast<long>(a.size()), 0L);
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());

  MannWhitney out;
  out.u = 0.5 * static_cast<double>(sum) - n1 * (n1 + 1.0) / 2.0;
  out.exact = method == MwMethod::kExact ||
              (method == MwMethod::kAuto && a.size() <= kExactMaxSize && b.size() <= kExactMaxSize);
  out.p = out.exact ? exact_p(r, a.size(), sum) : normal_p(out.u, n1, n2, r.tie_term);
  return out;
}

double vargha_delaney_a(std::span<const double> a, std::span<const double> b) {
  require_sample(a, "vargha_delaney_a");
  require_sample(b, "vargha_delaney_a");
  const double u = mann_whitney(a, b, MwMethod::kNormal).u;
  return u / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

double bonferroni_threshold(double alpha, int comparisons) {
  if (comparisons < 1) throw Error(ErrorCode::kInvalidArgument, "Bonferroni correction needs at least one comparison");
  return alpha / comparisons;
}

double error_range(std::span<const double> values) {
  require_sample(values, "error_range");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *hi - *lo;
}

double median(std::span<const double> values) {
  require_sample(values, "median");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::string_view to_string(Magnitude m) {
  switch (m) {
    case Magnitude::kNegligible:
      return "negligible";
    case Magnitude::kSmall:
      return "small";
    case Magnitude::kMedium:
      return "medium";
    case Magnitude::kLarge:
      return "large";
  }
  return "negligible";
}

Magnitude effect_magnitude(double a_measure) {
  const double d = std::max(a_measure, 1.0 - a_measure);
  if (d > 0.75) return Magnitude::kLarge;
  if (d > 0.67) return Magnitude::kMedium;
  if (d > 0.526) return Magnitude::kSmall;
  return Magnitude::kNegligible;
}

StatResult compare(std::span<const double> a, std::span<const double> b, double threshold) {
  const MannWhitney mw = mann_whitney(a, b);
  StatResult r;
  r.u_statistic = mw.u;
  r.p_value = mw.p;
  r.exact = mw.exact;
  r.a_measure = vargha_delaney_a(a, b);
  r.significant = mw.p < threshold;
  r.magnitude = effect_magnitude(r.a_measure);
  return r;
}

GroupedReport grouped_comparisons(std::span<const Observation> observations, double alpha) {
  std::set<char> models;
  std::map<int, std::map<char, std::vector<double>>> groups;
  for (const Observation& o : observations) {
    models.insert(o.model);
    groups[o.group][o.model].push_back(o.value);
  }
  GroupedReport report;
  const int pairs = static_cast<int>(models.size() * (models.size() - 1) / 2);
  if (pairs < 1) {
    report.warnings.push_back("fewer than two models present; nothing to compare");
    return report;
  }
  report.threshold = bonferroni_threshold(alpha, pairs);
  const std::vector<char> order(models.begin(), models.end());
  for (const auto& [group, by_model] : groups) {
    for (size_t i = 0; i < order.size(); ++i) {
      for (size_t j = i + 1; j < order.size(); ++j) {
        const auto fa = by_model.find(order[i]);
        const auto fb = by_model.find(order[j]);
        if (fa == by_model.end() || fb == by_model.end()) {
          report.warnings.push_back("group " + std::to_string(group) + ": no samples for model " +
                                    (fa == by_model.end() ? order[i] : order[j]) + ", comparison skipped");
          continue;
        }
        report.rows.push_back({group, order[i], order[j], fa->second.size(), fb->second.size(),
                               compare(fa->second, fb->second, report.threshold)});
      }
    }
  }
  return report;
}

}  // namespace nca
