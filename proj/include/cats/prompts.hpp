#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cats/schema.hpp"

namespace cats {

class PromptError : public std::runtime_error {
 public:
  explicit PromptError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class PromptMode {
  kStage1,
  kStage2,
  kStage3,
  kOracle,
  kEndToEnd,
  kJudgeBehavior,
  kJudgeEntailment,
  kJudgeRecall,
};

std::string to_string(PromptMode mode);
std::optional<PromptMode> prompt_mode_from_string(std::string_view s);

struct PromptBundle {
  std::string system;
  std::string user;
  PromptMode mode = PromptMode::kEndToEnd;
  std::vector<std::string> placeholders_resolved;

  ojson to_json(const std::string& record_id) const;
};

// {placeholder} substitution. A placeholder is "{" + identifier + "}"; all
// other braces pass through untouched. Rendering fails on any placeholder the
// map does not resolve, and on any map entry the template never uses.
std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& values,
                            std::vector<std::string>* resolved = nullptr);

// Placeholder names as they appear in a template, in order of appearance.
std::vector<std::string> scan_placeholders(const std::string& tmpl);

// Table-1 expected-behaviour rubric per conflict type.
const std::string& behavior_rubric(const ConflictType& type);

// Loads the template assets from a directory and renders prompt bundles.
// Templates are data: swapping the directory swaps every prompt without a
// code change. Checksums are pinned in MANIFEST.json next to the templates.
class PromptLibrary {
 public:
  // Resolution order: explicit argument, CATS_TEMPLATE_DIR, built-in default.
  static std::filesystem::path default_dir();
  static PromptLibrary load(const std::filesystem::path& dir = default_dir());

  const std::string& text(PromptMode mode, bool system) const;
  const std::filesystem::path& dir() const { return dir_; }

  // filename -> fnv1a64 hex of the file content, as loaded.
  const std::map<std::string, std::string>& checksums() const { return checksums_; }
  // Mismatches against the pinned MANIFEST.json; empty means intact.
  std::vector<std::string> verify_manifest() const;

  struct InferenceProfile {
    bool include_notes = false;  // evaluation default: gold notes withheld
  };

  PromptBundle build_inference_prompt(const QueryRecord& record, PromptMode mode,
                                      const InferenceProfile& profile) const;
  PromptBundle build_inference_prompt(const QueryRecord& record, PromptMode mode) const {
    return build_inference_prompt(record, mode, InferenceProfile{});
  }

  struct PriorStages {
    std::optional<std::vector<PerDocNote>> notes;
    std::optional<std::string> conflict_reason;
  };

  PromptBundle build_annotation_prompt(const QueryRecord& record, int stage,
                                       const PriorStages& prior = {}) const;

  struct JudgeInputs {
    std::string query;
    std::string answer;
    std::optional<ConflictType> conflict_type;
    std::string premise;
    std::string hypothesis;
    std::string gold;
    std::string candidate;
  };

  PromptBundle build_judge_prompt(PromptMode kind, const JudgeInputs& inputs) const;

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::string> files_;      // filename -> content
  std::map<std::string, std::string> checksums_;  // filename -> fnv1a64 hex
  ojson manifest_;
};

// Serialization of record pieces into prompt placeholders. One labeled block
// per doc; notes render as one JSON object per line.
std::string serialize_docs(const std::vector<RetrievedDoc>& docs);
std::string serialize_notes(const std::vector<PerDocNote>& notes);
inline constexpr std::string_view kNotesNotProvided = "not provided";

// Exactly-one-span check used by the oracle-mode invariant.
int count_tag_spans_equal(const std::string& text, const std::string& tag,
                          const std::string& content);

}  // namespace cats
