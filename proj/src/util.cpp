#include "cats/util.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>

namespace cats {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string normalize_ws(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_ws = false;
  for (char c : s) {
    if (is_space(c)) {
      in_ws = true;
      continue;
    }
    if (in_ws && !out.empty()) out.push_back(' ');
    in_ws = false;
    out.push_back(c);
  }
  return out;
}

std::string normalize_loose(std::string_view s) { return to_lower(normalize_ws(s)); }

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '\n') {
      std::string_view line = s.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.emplace_back(line);
      start = i + 1;
    }
  }
  return lines;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

size_t word_count(std::string_view s) {
  size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

bool contains(std::string_view haystack, std::string_view needle) {
  return haystack.find(needle) != std::string_view::npos;
}

uint64_t fnv1a64(std::string_view data, uint64_t seed) {
  uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

std::string content_hash(std::string_view data) {
  return hex64(fnv1a64(data)) + hex64(fnv1a64(data, 0x9e3779b97f4a7c15ull));
}

uint64_t SplitMix64::next() {
  state_ += 0x9e3779b97f4a7c15ull;
  uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t SplitMix64::next_below(uint64_t bound) {
  if (bound <= 1) return 0;
  uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  uint64_t v;
  do {
    v = next();
  } while (v >= limit);
  return v % bound;
}

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

int days_in_month(int year, int month) {
  static const int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2) {
    bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    return leap ? 29 : 28;
  }
  return kDays[month - 1];
}

std::optional<int> to_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

const std::array<std::string_view, 12> kMonthNames = {
    "january", "february", "march",     "april",   "may",      "june",
    "july",    "august",   "september", "october", "november", "december"};

std::optional<int> month_from_name(std::string_view name) {
  std::string lower = to_lower(name);
  for (size_t i = 0; i < kMonthNames.size(); ++i) {
    if (lower == kMonthNames[i] || (lower.size() == 3 && kMonthNames[i].substr(0, 3) == lower)) {
      return static_cast<int>(i) + 1;
    }
  }
  return std::nullopt;
}

std::string format_date(int y, std::optional<int> m, std::optional<int> d) {
  char buf[16];
  if (m && d) {
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, *m, *d);
  } else if (m) {
    std::snprintf(buf, sizeof(buf), "%04d-%02d", y, *m);
  } else {
    std::snprintf(buf, sizeof(buf), "%04d", y);
  }
  return std::string(buf);
}

bool valid_ymd(int y, std::optional<int> m, std::optional<int> d) {
  if (y < 1000 || y > 9999) return false;
  if (m && (*m < 1 || *m > 12)) return false;
  if (d) {
    if (!m) return false;
    if (*d < 1 || *d > days_in_month(y, *m)) return false;
  }
  return true;
}

std::vector<std::string> tokenize_date(std::string_view s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

}  // namespace

bool is_iso8601_date(std::string_view s) {
  if (s.size() == 4 && all_digits(s)) {
    auto y = to_int(s);
    return y && valid_ymd(*y, std::nullopt, std::nullopt);
  }
  if (s.size() == 7 && s[4] == '-' && all_digits(s.substr(0, 4)) && all_digits(s.substr(5))) {
    auto y = to_int(s.substr(0, 4));
    auto m = to_int(s.substr(5));
    return y && m && valid_ymd(*y, m, std::nullopt);
  }
  if (s.size() == 10 && s[4] == '-' && s[7] == '-' && all_digits(s.substr(0, 4)) &&
      all_digits(s.substr(5, 2)) && all_digits(s.substr(8, 2))) {
    auto y = to_int(s.substr(0, 4));
    auto m = to_int(s.substr(5, 2));
    auto d = to_int(s.substr(8, 2));
    return y && m && d && valid_ymd(*y, m, d);
  }
  return false;
}

std::optional<std::string> parse_date_to_iso(std::string_view raw) {
  std::string s = trim(raw);
  if (s.empty()) return std::nullopt;

  // Already ISO (possibly with a time part to strip).
  if (s.size() >= 10 && is_iso8601_date(std::string_view(s).substr(0, 10)) &&
      (s.size() == 10 || s[10] == 'T' || s[10] == ' ')) {
    return s.substr(0, 10);
  }
  if (is_iso8601_date(s)) return s;

  auto tokens = tokenize_date(s);
  if (tokens.empty()) return std::nullopt;

  // "March 5, 2023" / "Mar 5 2023"
  if (tokens.size() == 3) {
    if (auto m = month_from_name(tokens[0])) {
      auto d = to_int(tokens[1]);
      auto y = to_int(tokens[2]);
      if (d && y && valid_ymd(*y, m, d)) return format_date(*y, m, d);
    }
    // "5 March 2023"
    if (auto m = month_from_name(tokens[1])) {
      auto d = to_int(tokens[0]);
      auto y = to_int(tokens[2]);
      if (d && y && valid_ymd(*y, m, d)) return format_date(*y, m, d);
    }
    // "2023/03/05" or "03/05/2023" (month-first when ambiguous)
    auto a = to_int(tokens[0]), b = to_int(tokens[1]), c = to_int(tokens[2]);
    if (a && b && c) {
      if (tokens[0].size() == 4 && valid_ymd(*a, b, c)) return format_date(*a, b, c);
      if (tokens[2].size() == 4 && valid_ymd(*c, a, b)) return format_date(*c, a, b);
    }
  }

  // "March 2023"
  if (tokens.size() == 2) {
    if (auto m = month_from_name(tokens[0])) {
      auto y = to_int(tokens[1]);
      if (y && valid_ymd(*y, m, std::nullopt)) return format_date(*y, m, std::nullopt);
    }
    if (auto m = month_from_name(tokens[1])) {
      auto y = to_int(tokens[0]);
      if (y && valid_ymd(*y, m, std::nullopt)) return format_date(*y, m, std::nullopt);
    }
  }

  // Bare year.
  if (tokens.size() == 1 && tokens[0].size() == 4) {
    auto y = to_int(tokens[0]);
    if (y && valid_ymd(*y, std::nullopt, std::nullopt))
      return format_date(*y, std::nullopt, std::nullopt);
  }

  return std::nullopt;
}

}  // namespace cats
