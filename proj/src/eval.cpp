#include "smrat/eval.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

namespace smrat {

std::vector<int> encode_labels(std::span<const std::string> names, std::span<const std::string> labels) {
  std::map<std::string_view, int> index;
  for (size_t i = 0; i < labels.size(); ++i) index.emplace(labels[i], static_cast<int>(i));
  std::vector<int> out;
  out.reserve(names.size());
  for (const auto& n : names) {
    auto it = index.find(n);
    if (it == index.end()) throw Error("unknown label '" + n + "'");
    out.push_back(it->second);
  }
  return out;
}

namespace {
void check_pair(size_t gold, size_t pred) {
  if (gold != pred) {
    throw Error("gold and predicted lengths differ (" + std::to_string(gold) + " vs " + std::to_string(pred) + ")");
  }
  if (gold == 0) throw Error("no examples to score");
}
}  // namespace

ConfusionMatrix confusion_matrix_ids(std::span<const int> gold, std::span<const int> pred, size_t n_labels) {
  check_pair(gold.size(), pred.size());
  ConfusionMatrix cm(n_labels, std::vector<std::int64_t>(n_labels, 0));
  for (size_t i = 0; i < gold.size(); ++i) {
    const auto g = static_cast<size_t>(gold[i]);
    const auto p = static_cast<size_t>(pred[i]);
    if (g >= n_labels || p >= n_labels) throw Error("label id out of range");
    ++cm[g][p];
  }
  return cm;
}

ConfusionMatrix confusion_matrix(std::span<const std::string> gold, std::span<const std::string> pred,
                                 std::span<const std::string> labels) {
  check_pair(gold.size(), pred.size());
  const auto g = encode_labels(gold, labels);
  const auto p = encode_labels(pred, labels);
  return confusion_matrix_ids(g, p, labels.size());
}

double macro_f1_from_confusion(const ConfusionMatrix& cm) {
  const size_t n = cm.size();
  if (n == 0) throw Error("empty label set");
  double sum = 0.0;
  for (size_t c = 0; c < n; ++c) {
    std::int64_t tp = cm[c][c], fp = 0, fn = 0;
    for (size_t o = 0; o < n; ++o) {
      if (o == c) continue;
      fp += cm[o][c];
      fn += cm[c][o];
    }
    const std::int64_t denom = 2 * tp + fp + fn;
    if (denom > 0) sum += 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return sum / static_cast<double>(n);
}

double macro_f1_ids(std::span<const int> gold, std::span<const int> pred, size_t n_labels) {
  check_pair(gold.size(), pred.size());
  // Counts only; avoids materializing the matrix inside bootstrap loops.
  std::vector<std::int64_t> tp(n_labels, 0), gold_n(n_labels, 0), pred_n(n_labels, 0);
  for (size_t i = 0; i < gold.size(); ++i) {
    const auto g = static_cast<size_t>(gold[i]);
    const auto p = static_cast<size_t>(pred[i]);
    if (g >= n_labels || p >= n_labels) throw Error("label id out of range");
    ++gold_n[g];
    ++pred_n[p];
    if (g == p) ++tp[g];
  }
  double sum = 0.0;
  for (size_t c = 0; c < n_labels; ++c) {
    const std::int64_t denom = gold_n[c] + pred_n[c];  // = 2TP + FP + FN
    if (denom > 0) sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
  }
  return sum / static_cast<double>(n_labels);
}

double macro_f1(std::span<const std::string> gold, std::span<const std::string> pred,
                std::span<const std::string> labels) {
  check_pair(gold.size(), pred.size());
  return macro_f1_ids(encode_labels(gold, labels), encode_labels(pred, labels), labels.size());
}

double accuracy_ids(std::span<const int> gold, std::span<const int> pred) {
  check_pair(gold.size(), pred.size());
  size_t hit = 0;
  for (size_t i = 0; i < gold.size(); ++i) hit += gold[i] == pred[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(gold.size());
}

Json BootstrapResult::to_json() const {
  return {{"delta_observed", delta_observed}, {"b", b},       {"exceed_count", exceed_count},
          {"p_value", p_value},               {"seed", seed}, {"degenerate", degenerate}};
}

BootstrapResult paired_bootstrap(std::span<const int> gold, std::span<const int> pred_a,
                                 std::span<const int> pred_b, const Metric& metric, std::size_t b,
                                 std::uint64_t seed, unsigned threads) {
  if (gold.empty() || pred_a.empty() || pred_b.empty()) throw Error("paired_bootstrap: empty input");
  if (gold.size() != pred_a.size() || gold.size() != pred_b.size()) {
    throw Error("paired_bootstrap: inputs differ in length");
  }
  if (b < 1) throw Error("paired_bootstrap: b must be at least 1");

  BootstrapResult r;
  r.b = b;
  r.seed = seed;
  r.delta_observed = metric(gold, pred_a) - metric(gold, pred_b);
  if (r.delta_observed <= 0.0) {
    r.degenerate = true;
    r.p_value = 1.0;
    return r;
  }

  constexpr std::size_t kChunk = 1024;
  const std::size_t n = gold.size();
  const std::size_t n_chunks = (b + kChunk - 1) / kChunk;
  const double threshold = 2.0 * r.delta_observed;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> total{0};

  auto worker = [&] {
    std::vector<int> g(n), a(n), bb(n);
    std::size_t local = 0;
    for (std::size_t c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) {
      std::mt19937_64 rng(util::mix_seed(seed, c));
      const std::size_t iters = std::min(kChunk, b - c * kChunk);
      for (std::size_t it = 0; it < iters; ++it) {
        for (std::size_t k = 0; k < n; ++k) {
          const auto idx = static_cast<std::size_t>(util::uniform_below(rng, n));
          g[k] = gold[idx];
          a[k] = pred_a[idx];
          bb[k] = pred_b[idx];
        }
        if (metric(g, a) - metric(g, bb) > threshold) ++local;
      }
    }
    total.fetch_add(local);
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_chunks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  r.exceed_count = total.load();
  r.p_value = static_cast<double>(r.exceed_count) / static_cast<double>(b);
  return r;
}

BootstrapResult paired_bootstrap_macro_f1(std::span<const std::string> gold, std::span<const std::string> pred_a,
                                          std::span<const std::string> pred_b, std::span<const std::string> labels,
                                          std::size_t b, std::uint64_t seed) {
  const auto g = encode_labels(gold, labels);
  const auto a = encode_labels(pred_a, labels);
  const auto p = encode_labels(pred_b, labels);
  const size_t n_labels = labels.size();
  return paired_bootstrap(
      g, a, p, [n_labels](std::span<const int> x, std::span<const int> y) { return macro_f1_ids(x, y, n_labels); },
      b, seed);
}

std::string SeedAggregate::formatted() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f\xC2\xB1%.1f", mean * 100.0, std * 100.0);
  return buf;
}

SeedAggregate aggregate_seeds(const std::map<std::uint64_t, double>& per_seed) {
  if (per_seed.size() < 2) {
    throw Error("aggregate_seeds needs at least 2 seeds, got " + std::to_string(per_seed.size()));
  }
  SeedAggregate s;
  s.n = per_seed.size();
  for (const auto& [seed, v] : per_seed) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  double ss = 0.0;
  for (const auto& [seed, v] : per_seed) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  return s;
}

double uniform_null_variance(int scale_points) {
  if (scale_points < 2) throw Error("scale must have at least 2 points");
  const double a = scale_points;
  return (a * a - 1.0) / 12.0;
}

Json IRRReport::to_json() const {
  return {{"scale_points", scale_points},
          {"per_item_variance", per_item_variance},
          {"mean_variance", mean_variance},
          {"null_variance", null_variance},
          {"r_wg", r_wg}};
}

IRRReport lindell_irr(const std::vector<std::vector<int>>& ratings, int scale_points) {
  if (ratings.empty()) throw Error("lindell_irr: no items");
  IRRReport r;
  r.scale_points = scale_points;
  r.null_variance = uniform_null_variance(scale_points);
  for (size_t i = 0; i < ratings.size(); ++i) {
    const auto& item = ratings[i];
    if (item.size() < 2) throw Error("lindell_irr: item " + std::to_string(i) + " has fewer than 2 raters");
    double mean = 0.0;
    for (int v : item) {
      if (v < 1 || v > scale_points) {
        throw Error("lindell_irr: rating " + std::to_string(v) + " on item " + std::to_string(i) +
                    " is outside [1, " + std::to_string(scale_points) + "]");
      }
      mean += v;
    }
    mean /= static_cast<double>(item.size());
    double ss = 0.0;
    for (int v : item) ss += (v - mean) * (v - mean);
    r.per_item_variance.push_back(ss / static_cast<double>(item.size() - 1));
  }
  r.mean_variance = std::accumulate(r.per_item_variance.begin(), r.per_item_variance.end(), 0.0) /
                    static_cast<double>(r.per_item_variance.size());
  r.r_wg = 1.0 - r.mean_variance / r.null_variance;
  return r;
}

Json EvalReport::to_json() const {
  Json per = Json::object();
  for (const auto& [seed, f1] : per_seed_f1) per[std::to_string(seed)] = f1;
  // A single seed has no spread to report.
  const Json spread = per_seed_f1.size() >= 2 ? Json(std) : Json(nullptr);
  Json j = {{"metric", "macro_f1"}, {"labels", labels}, {"per_seed", per}, {"mean", mean},
            {"std", spread},        {"n", n},           {"confusion", confusion}};
  if (bootstrap) {
    Json ps = Json::object();
    for (const auto& [seed, p] : per_seed_p) ps[std::to_string(seed)] = p;
    j["bootstrap"] = {{"vs", bootstrap_vs},
                      {"p_value", bootstrap->p_value},
                      {"b", bootstrap->b},
                      {"seed", bootstrap->seed},
                      {"delta_observed", bootstrap->delta_observed},
                      {"degenerate", bootstrap->degenerate},
                      {"alpha", alpha},
                      {"significant", !bootstrap->degenerate && bootstrap->p_value < alpha},
                      {"per_seed_p", ps}};
  }
  return j;
}

}  // namespace smrat
