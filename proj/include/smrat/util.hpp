#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace smrat {

using Json = nlohmann::json;

// Base for every error this library throws on bad input or I/O.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace util {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

// CRLF and lone CR become LF.
std::string normalize_newlines(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// True when `needle` occurs in `haystack` case-insensitively and is not
// glued to an alphanumeric character on either side.
bool contains_word_ci(std::string_view haystack, std::string_view needle);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

// Sorted-key compact serialization; the basis for every digest.
std::string canonical_json(const Json& j);

std::string read_file(const std::filesystem::path& path);

// Writes via a sibling temp file and rename so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

std::vector<Json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records);

// Unbiased draw from [0, n). std::uniform_int_distribution is
// implementation-defined, which would break cross-platform reproducibility.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

// SplitMix64 finalizer, used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace util
}  // namespace smrat
