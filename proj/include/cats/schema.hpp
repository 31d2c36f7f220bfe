#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cats {

using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Conflict taxonomy
// ---------------------------------------------------------------------------

enum class ConflictLabel {
  kNoConflict,
  kComplementary,
  kConflictingOpinions,
  kOutdated,
  kMisinformation,
};

// One of the five canonical taxonomy labels. The canonical constructor
// accepts byte-equal text only; `from_text` additionally maps case/whitespace
// variants and a few short-form aliases and reports that it normalized.
class ConflictType {
 public:
  static const std::array<std::string, 5>& labels();

  static std::optional<ConflictType> from_canonical(std::string_view text);

  explicit ConflictType(ConflictLabel v) : value_(v) {}

  ConflictLabel value() const { return value_; }
  const std::string& label() const;

  bool operator==(const ConflictType& o) const { return value_ == o.value_; }
  bool operator!=(const ConflictType& o) const { return value_ != o.value_; }

 private:
  ConflictLabel value_;
};

struct NormalizedConflict {
  ConflictType type;
  bool normalization_applied = false;
};

// Maps case/whitespace variants and short-form aliases onto the canonical
// labels, reporting whether normalization was applied.
std::optional<NormalizedConflict> conflict_from_text(std::string_view text);

// ---------------------------------------------------------------------------
// Record types
// ---------------------------------------------------------------------------

struct RetrievedDoc {
  std::string doc_id;
  std::string title;
  std::string source;
  std::string snippet;
  std::optional<std::string> timestamp;  // ISO-8601, never empty string
  ojson extra = ojson::object();         // unknown input fields, re-emitted verbatim
};

inline constexpr std::string_view kVerdictSupports = "supports";
inline constexpr std::string_view kVerdictPartial = "partially supports";
inline constexpr std::string_view kVerdictIrrelevant = "irrelevant";

bool is_known_verdict(std::string_view v);
bool is_supporting_verdict(std::string_view v);  // supports | partially supports

struct PerDocNote {
  std::string doc_id;
  std::string verdict;
  std::string verdict_reason;
  std::string key_fact;
  std::optional<std::string> quote;
  std::string source_quality;  // "high" | "low"
  ojson extra = ojson::object();
};

struct ExpectedResponse {
  std::string answer;
  std::vector<std::string> evidence;
  bool abstain = false;
  std::string abstain_reason;
  ojson extra = ojson::object();
};

struct RecordMetadata {
  std::string category;
  std::string domain;
  ojson extra = ojson::object();

  bool empty() const { return category.empty() && domain.empty() && extra.empty(); }
};

struct QueryRecord {
  std::string id;
  std::string query;
  std::vector<RetrievedDoc> retrieved_docs;
  std::optional<std::vector<PerDocNote>> per_doc_notes;
  std::optional<ConflictType> conflict_type;
  std::string conflict_type_raw;  // as read; kept when not canonical
  std::string conflict_reason;
  std::optional<std::string> gold_answer;
  std::optional<ExpectedResponse> expected_response;
  std::optional<std::string> think;
  RecordMetadata metadata;
  ojson extra = ojson::object();

  int source_line = -1;  // 1-based line in the file it was read from, if any

  bool is_refusal() const {
    return expected_response.has_value() && expected_response->abstain;
  }
  std::string conflict_label_text() const {
    return conflict_type ? conflict_type->label() : conflict_type_raw;
  }
};

// ---------------------------------------------------------------------------
// Judge results
// ---------------------------------------------------------------------------

struct JudgeVerdict {
  bool adherent = false;
  std::string rationale;
};

enum class EntailmentRelation { kEntails, kContradicts, kNeutral };

std::string to_string(EntailmentRelation r);
std::optional<EntailmentRelation> entailment_from_string(std::string_view s);

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class Severity { kError, kWarning };

struct Violation {
  std::string record_id;
  std::string field;
  std::string rule;
  std::string message;
  Severity severity = Severity::kError;
};

// Word-count bounds differ by context: annotation text uses 60, the
// inference output contract uses 80.
struct WordLimits {
  size_t verdict_reason_max = 60;
  size_t key_fact_max = 60;
  size_t conflict_reason_max = 60;
};

inline WordLimits annotation_limits() { return WordLimits{60, 60, 60}; }
inline WordLimits inference_limits() { return WordLimits{80, 80, 60}; }

// Returns the empty list iff every schema invariant holds. Violations are
// data, not failures; order is deterministic for identical input.
std::vector<Violation> validate_record(const QueryRecord& record,
                                       const WordLimits& limits = annotation_limits());

bool has_errors(const std::vector<Violation>& violations);

// True iff `needle` occurs contiguously in `haystack` after whitespace
// normalization on both sides.
bool is_normalized_substring(std::string_view needle, std::string_view haystack);

// Citation markers "[dX]" appearing anywhere in `text`, in order.
std::vector<std::string> citation_markers(std::string_view text);

// doc_id of the form d1..dN, no leading zeros.
bool is_valid_doc_id(std::string_view id);
std::optional<int> doc_id_index(std::string_view id);  // "d3" -> 3

// ---------------------------------------------------------------------------
// JSONL (de)serialization — Appendix-A.2/A.3 field layout
// ---------------------------------------------------------------------------

ojson doc_to_json(const RetrievedDoc& doc);
RetrievedDoc doc_from_json(const ojson& j);

ojson note_to_json(const PerDocNote& note);
PerDocNote note_from_json(const ojson& j);

ojson expected_response_to_json(const ExpectedResponse& er);
ExpectedResponse expected_response_from_json(const ojson& j);

ojson record_to_json(const QueryRecord& record);
QueryRecord record_from_json(const ojson& j);

std::string record_to_jsonl_line(const QueryRecord& record);

bool records_equal(const QueryRecord& a, const QueryRecord& b);

}  // namespace cats
