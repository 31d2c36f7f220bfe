#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cats/schema.hpp"

namespace cats {

class DatasetError : public std::runtime_error {
 public:
  explicit DatasetError(const std::string& msg) : std::runtime_error(msg) {}
};

class IdCollisionError : public DatasetError {
 public:
  explicit IdCollisionError(const std::string& msg) : DatasetError(msg) {}
};

struct LineError {
  int line = 0;  // 1-based
  std::string message;
};

struct LoadResult {
  std::vector<QueryRecord> records;
  std::vector<LineError> malformed;
  std::vector<Violation> violations;  // attached, not fatal
};

// One record per non-empty line. With strict=true the first malformed line
// aborts; otherwise it is reported and skipped.
LoadResult read_jsonl(const std::filesystem::path& path, bool strict = false);

void write_jsonl(const std::filesystem::path& path, const std::vector<QueryRecord>& records);

// Raw lines, useful for non-record JSONL files.
std::vector<ojson> read_jsonl_values(const std::filesystem::path& path);

// Source-domain category table: news / academic / encyclopedic / other.
std::string domain_for_source(std::string_view source);

struct NormalizeResult {
  QueryRecord record;
  std::vector<Violation> notes;  // unparseable dates, dropped duplicates, ...
};

// Raw-schema record -> normalized record: sequential doc_ids, ISO-8601
// timestamps (absent when unparseable), domain categorization, exact
// duplicate docs dropped, unknown fields preserved in the extras bag.
// Idempotent on already-normalized input.
NormalizeResult normalize_record(const ojson& raw, const std::string& assigned_id);

struct NormalizeCorpusResult {
  std::vector<QueryRecord> records;
  std::vector<Violation> notes;
};

NormalizeCorpusResult normalize_corpus(const std::vector<ojson>& raw_records,
                                       const std::string& id_prefix = "#");

// Concatenates the corpora, re-establishing global id uniqueness. Refusal
// records get provenance tagged in metadata. Explicitly colliding ids throw.
std::vector<QueryRecord> merge_refusals(const std::vector<QueryRecord>& records,
                                        const std::vector<QueryRecord>& refusal_records);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct StratumCounts {
  std::string stratum;
  int train = 0;
  int val = 0;
  int test = 0;
};

struct SplitResult {
  std::vector<QueryRecord> train;
  std::vector<QueryRecord> val;
  std::vector<QueryRecord> test;
  std::vector<StratumCounts> strata;
  std::vector<std::string> warnings;
  uint64_t seed = 0;
  SplitFractions fractions;

  ojson manifest() const;
};

// Stratified split keyed on conflict type (refusal records form their own
// stratum). Within each stratum records are shuffled by SplitMix64 seeded
// with `seed ^ fnv1a64(stratum key)` and apportioned by largest remainder
// with ties preferring test, then val. Same seed, same input => identical
// output, byte for byte.
SplitResult stratified_split(const std::vector<QueryRecord>& records,
                             const SplitFractions& fractions, uint64_t seed);

std::string split_stratum_key(const QueryRecord& record);

}  // namespace cats
