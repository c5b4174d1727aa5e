#pragma once

// Helpers and independent reference implementations shared by the unit and
// acceptance tests. Nothing here calls into the library's own math.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "smrat/util.hpp"

namespace smrat::testing {

inline std::filesystem::path source_dir() { return SMRAT_SOURCE_DIR; }
inline std::filesystem::path fixture(const std::string& rel) { return source_dir() / rel; }

// Fresh directory under the build tree, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("smrat_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Per-class precision and recall counted the long way, then F1 = 2PR/(P+R).
inline double oracle_macro_f1(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                              const std::vector<std::string>& labels) {
  double sum = 0.0;
  for (const auto& c : labels) {
    double tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
      const bool g = gold[i] == c, p = pred[i] == c;
      if (g && p) tp += 1;
      if (!g && p) fp += 1;
      if (g && !p) fn += 1;
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    sum += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
  return sum / static_cast<double>(labels.size());
}

inline double oracle_accuracy(const std::vector<int>& gold, const std::vector<int>& pred) {
  double hit = 0;
  for (size_t i = 0; i < gold.size(); ++i) hit += gold[i] == pred[i] ? 1 : 0;
  return hit / static_cast<double>(gold.size());
}

// Exact bootstrap p: every one of the n^n equally likely index tuples.
inline double oracle_exact_bootstrap_p(
    const std::vector<int>& gold, const std::vector<int>& a, const std::vector<int>& b,
    const std::function<double(const std::vector<int>&, const std::vector<int>&)>& metric) {
  const size_t n = gold.size();
  const double delta = metric(gold, a) - metric(gold, b);
  size_t total = 1;
  for (size_t i = 0; i < n; ++i) total *= n;
  size_t exceed = 0;
  std::vector<int> g(n), pa(n), pb(n);
  for (size_t code = 0; code < total; ++code) {
    size_t c = code;
    for (size_t i = 0; i < n; ++i) {
      const size_t idx = c % n;
      c /= n;
      g[i] = gold[idx];
      pa[i] = a[idx];
      pb[i] = b[idx];
    }
    if (metric(g, pa) - metric(g, pb) > 2 * delta) ++exceed;
  }
  return static_cast<double>(exceed) / static_cast<double>(total);
}

inline std::string slurp(const std::filesystem::path& p) { return util::read_file(p); }

// Every regular file under `root`, relative path -> bytes.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = util::read_file(e.path());
  }
  return out;
}

}  // namespace smrat::testing
