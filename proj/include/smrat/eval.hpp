#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smrat/corpus.hpp"

namespace smrat {

using ConfusionMatrix = std::vector<std::vector<std::int64_t>>;

// Maps label names to positions in `labels`; throws on unknown names.
std::vector<int> encode_labels(std::span<const std::string> names, std::span<const std::string> labels);

// Rows gold, columns predicted.
ConfusionMatrix confusion_matrix(std::span<const std::string> gold, std::span<const std::string> pred,
                                 std::span<const std::string> labels);
ConfusionMatrix confusion_matrix_ids(std::span<const int> gold, std::span<const int> pred, size_t n_labels);

// Unweighted mean of per-class 2TP / (2TP + FP + FN) over every label in
// `labels`; a class with a zero denominator scores 0.
double macro_f1(std::span<const std::string> gold, std::span<const std::string> pred,
                std::span<const std::string> labels);
double macro_f1_ids(std::span<const int> gold, std::span<const int> pred, size_t n_labels);
double macro_f1_from_confusion(const ConfusionMatrix& cm);
double accuracy_ids(std::span<const int> gold, std::span<const int> pred);

using Metric = std::function<double(std::span<const int> gold, std::span<const int> pred)>;

struct BootstrapResult {
  double delta_observed = 0.0;
  std::size_t b = 0;
  std::size_t exceed_count = 0;
  double p_value = 1.0;
  std::uint64_t seed = 0;
  bool degenerate = false;

  Json to_json() const;
};

inline constexpr std::size_t kDefaultBootstrapSamples = 10000;
inline constexpr double kDefaultAlpha = 0.05;

// Paired bootstrap: delta = metric(A) - metric(B) on the full set; over `b`
// resamples of the index set (with replacement, same size) count how often
// the resampled delta exceeds 2 * delta. delta <= 0 is degenerate: p = 1 and
// nothing is sampled. Work is split into fixed-size chunks with their own
// derived generators, so the count does not depend on `threads`.
BootstrapResult paired_bootstrap(std::span<const int> gold, std::span<const int> pred_a,
                                 std::span<const int> pred_b, const Metric& metric, std::size_t b,
                                 std::uint64_t seed, unsigned threads = 0);

BootstrapResult paired_bootstrap_macro_f1(std::span<const std::string> gold, std::span<const std::string> pred_a,
                                          std::span<const std::string> pred_b, std::span<const std::string> labels,
                                          std::size_t b, std::uint64_t seed);

struct SeedAggregate {
  double mean = 0.0;
  double std = 0.0;  // n - 1 denominator
  std::size_t n = 0;
  // "mean±std" in percentage points, one decimal.
  std::string formatted() const;
};

SeedAggregate aggregate_seeds(const std::map<std::uint64_t, double>& per_seed);

struct IRRReport {
  int scale_points = 5;
  std::vector<double> per_item_variance;
  double mean_variance = 0.0;
  double null_variance = 0.0;
  double r_wg = 1.0;

  Json to_json() const;
};

// Lindell's multi-item r*_wg(j): 1 - mean item variance / ((A^2 - 1) / 12).
// `ratings` is items x raters; every rating must lie in [1, A].
IRRReport lindell_irr(const std::vector<std::vector<int>>& ratings, int scale_points);

double uniform_null_variance(int scale_points);

struct EvalReport {
  std::vector<std::string> labels;
  std::map<std::uint64_t, double> per_seed_f1;
  double mean = 0.0;
  double std = 0.0;
  ConfusionMatrix confusion;  // pooled over seeds
  std::size_t n = 0;
  std::optional<BootstrapResult> bootstrap;
  std::map<std::uint64_t, double> per_seed_p;
  std::string bootstrap_vs = "baseline";
  double alpha = kDefaultAlpha;

  Json to_json() const;
};

}  // namespace smrat
