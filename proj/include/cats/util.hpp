#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cats {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Collapses every whitespace run to a single space and trims the ends.
std::string normalize_ws(std::string_view s);

// Case-folded + whitespace-collapsed form used for lenient text comparison.
std::string normalize_loose(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

size_t word_count(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);
bool contains(std::string_view haystack, std::string_view needle);

// FNV-1a, 64-bit. `seed` selects an independent stream.
uint64_t fnv1a64(std::string_view data, uint64_t seed = 14695981039346656037ull);
std::string hex64(uint64_t v);

// 128-bit content address rendered as 32 hex chars (two FNV streams).
std::string content_hash(std::string_view data);

// SplitMix64: the portable deterministic generator used for seeded shuffles.
// State advances by the golden-gamma constant; output is the finalizer mix.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}
  uint64_t next();
  // Unbiased draw from [0, bound) via rejection sampling.
  uint64_t next_below(uint64_t bound);

 private:
  uint64_t state_;
};

// Fisher-Yates driven by SplitMix64; documented so splits reproduce anywhere.
template <typename T>
void deterministic_shuffle(std::vector<T>& items, uint64_t seed) {
  SplitMix64 rng(seed);
  for (size_t i = items.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

// Timestamp handling. Dates are ISO-8601 with possibly reduced precision
// ("2023", "2023-03", "2023-03-05"); absence is always an empty optional.
bool is_iso8601_date(std::string_view s);
std::optional<std::string> parse_date_to_iso(std::string_view raw);

}  // namespace cats
