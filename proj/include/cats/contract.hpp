#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cats/schema.hpp"

namespace cats {

// The strict text-mode output contract: one <think> block holding a JSON
// verdict array, conflict reasoning, a single em-dash label line and a
// bridge, then one blank line and the final answer (or the abstention
// sentinel), terminated by the end-of-answer sentinel.

inline constexpr std::string_view kEndOfAnswerSentinel = "[[END-OF-ANSWER]]";
inline constexpr std::string_view kAbstainSentinel = "CANNOT ANSWER, INSUFFICIENT EVIDENCE";
inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kEmDash = "—";
inline constexpr std::string_view kEnDash = "–";

enum class DiagCode {
  kMissingSentinel,
  kNoThinkBlock,
  kMultipleThinkOpen,
  kNestedThink,
  kPreambleText,
  kVerdictArrayMissing,
  kVerdictArrayInvalidJson,
  kTrailingComma,
  kDocIdRange,
  kDocIdGap,
  kDocIdDuplicate,
  kDocIdOrder,
  kDocIdFabricated,
  kVerdictOutOfLexicon,
  kSourceQualityOutOfLexicon,
  kKeyFactOnIrrelevant,
  kMissingLabelLine,
  kMissingDash,
  kWrongDashEnDash,
  kWrongDashHyphen,
  kLabelOutOfLexicon,
  kMultipleLabelLines,
  kMissingBlankLine,
  kMissingFinalAnswer,
  kCitationOutOfBounds,
  kCitationMalformed,
  kCitedWhileAbstaining,
  kAbstainExtraText,
  kUncitedSentence,
  kAnswerLength,
  kWordLimit,
};

std::string_view to_string(DiagCode code);

// strict: breaches of the output contract (structural-validity counts).
// lenient: advisory notes no metric may fail an output for.
enum class DiagTier { kStrict, kLenient };

struct Diagnostic {
  DiagCode code;
  std::string message;
  size_t begin = 0;  // byte offsets into the sanitized text, [begin, end)
  size_t end = 0;
  DiagTier tier = DiagTier::kStrict;
};

DiagTier tier_for(DiagCode code);

struct VerdictEntry {
  std::string doc_id;
  std::string verdict;
  std::string verdict_reason;
  std::string key_fact;
  std::string source_quality;
};

struct ParsedOutput {
  bool unparseable = false;

  std::string think_body;
  bool has_think_block = false;

  std::vector<VerdictEntry> verdicts;
  bool verdict_array_valid = false;  // syntactically valid JSON array of objects

  std::optional<ConflictType> conflict_label;
  std::string conflict_label_raw;  // label-line prefix as written
  std::string conflict_reason;     // label-line text after the dash
  std::string analysis;            // reasoning before the label line
  std::string bridge;              // reasoning after the label line

  bool abstain = false;
  std::string final_answer;  // empty when abstaining
  std::vector<std::string> citations;

  std::vector<Diagnostic> diagnostics;

  bool has_diag(DiagCode code) const;
  size_t strict_diag_count() const;
  // Fully contract-conformant: parsed and zero strict diagnostics.
  bool strictly_valid() const;
  // The Table-3 coverage notion: a delimited think block whose verdict
  // array parsed as JSON.
  bool valid_think_block() const { return has_think_block && verdict_array_valid; }
};

struct SanitizeResult {
  std::string text;
  bool sentinel_found = false;
};

// Cuts the completion at the first end-of-answer sentinel line, trims
// leading/trailing blank lines and normalizes line endings to LF.
SanitizeResult sanitize(std::string_view raw);

// Full contract parse of sanitized text. Never throws on arbitrary input;
// when no think block can be delimited the result is marked unparseable.
ParsedOutput parse_output(std::string_view sanitized, int n_docs);

// sanitize + parse_output, with a missing-sentinel diagnostic when the raw
// completion never emits the end-of-answer line.
ParsedOutput parse_completion(std::string_view raw, int n_docs);

struct CitationScan {
  std::vector<std::string> citations;  // in order, duplicates preserved
  std::vector<Diagnostic> diagnostics;
};

// Extracts [dX] citations in order and checks bounds plus the
// every-sentence-cites rule (the latter only when `abstaining` is false).
CitationScan extract_citations(std::string_view answer, int n_docs, bool abstaining = false);

// Sentence segmentation shared by the citation rule and the grounded-citation
// metric: split on terminal punctuation followed by whitespace; bracketed
// citations attach to the sentence they terminate.
struct Sentence {
  std::string text;
  size_t begin = 0;
  size_t end = 0;
};
std::vector<Sentence> split_sentences(std::string_view text);

// Renders a ParsedOutput back into contract text (sanitized form, no
// end-of-answer sentinel). parse_output(emit_output(p)) is semantically
// idempotent for conformant outputs.
std::string emit_output(const ParsedOutput& out);
// Same, plus the trailing sentinel line — the shape a model would return.
std::string emit_completion(const ParsedOutput& out);

// Semantic equality of the parsed fields (ignores diagnostics/offsets).
bool semantically_equal(const ParsedOutput& a, const ParsedOutput& b);

struct StructuralReport {
  int total = 0;
  int valid = 0;        // strictly conformant
  int recoverable = 0;  // parsed with strict diagnostics
  int unparseable = 0;
  std::vector<std::pair<std::string, int>> diagnostic_frequencies;  // code -> count, sorted

  ojson to_json() const;
};

StructuralReport validate_corpus(const std::vector<std::string>& completions,
                                 const std::vector<int>& n_docs);

ojson diagnostic_to_json(const std::string& record_id, const Diagnostic& d);

}  // namespace cats
