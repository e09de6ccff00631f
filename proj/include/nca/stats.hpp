#pragma once

// Mann-Whitney rank-sum tests, Vargha-Delaney A, Bonferroni thresholds and
// grouped model comparisons.

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nca {

enum class MwMethod { kAuto, kExact, kNormal };

// Both samples at most this size -> exact enumeration under kAuto.
inline constexpr size_t kExactMaxSize = 8;

struct MannWhitney {
  double u = 0.0;  // U of the first sample: #(a > b) + 0.5 #(a == b)
  double p = 1.0;  // two-sided
  bool exact = false;
};

MannWhitney mann_whitney(std::span<const double> a, std::span<const double> b, MwMethod method = MwMethod::kAuto);

double vargha_delaney_a(std::span<const double> a, std::span<const double> b);

double bonferroni_threshold(double alpha, int comparisons);

double error_range(std::span<const double> values);

double median(std::span<const double> values);

enum class Magnitude { kNegligible, kSmall, kMedium, kLarge };

std::string_view to_string(Magnitude m);

// Labels use max(A, 1 - A): > 0.526 small, > 0.67 medium, > 0.75 large.
Magnitude effect_magnitude(double a_measure);

struct StatResult {
  double u_statistic = 0.0;
  double p_value = 1.0;
  double a_measure = 0.5;
  bool significant = false;
  Magnitude magnitude = Magnitude::kNegligible;
  bool exact = false;
};

StatResult compare(std::span<const double> a, std::span<const double> b, double threshold);

// One labelled sample: `group` (e.g. lateral distance), `model` (e.g. 'A')
// and the compared value (e.g. RMSE).
struct Observation {
  int group = 0;
  char model = 'A';
  double value = 0.0;
};

struct ComparisonRow {
  int group = 0;
  char first = 'A';
  char second = 'B';
  size_t first_n = 0;
  size_t second_n = 0;
  StatResult result;
};

struct GroupedReport {
  std::vector<ComparisonRow> rows;
  std::vector<std::string> warnings;
  double threshold = 0.0;
};

// For each group, every pair of models present (in model order) is compared;
// the Bonferroni family size is the number of model pairs per group.
GroupedReport grouped_comparisons(std::span<const Observation> observations, double alpha = 0.05);

}  // namespace nca
