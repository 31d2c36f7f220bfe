#include "cats/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "cats/util.hpp"

namespace cats {

std::string to_string(PromptMode mode) {
  switch (mode) {
    case PromptMode::kStage1: return "stage1";
    case PromptMode::kStage2: return "stage2";
    case PromptMode::kStage3: return "stage3";
    case PromptMode::kOracle: return "oracle";
    case PromptMode::kEndToEnd: return "end_to_end";
    case PromptMode::kJudgeBehavior: return "judge_behavior";
    case PromptMode::kJudgeEntailment: return "judge_entailment";
    case PromptMode::kJudgeRecall: return "judge_recall";
  }
  return "end_to_end";
}

std::optional<PromptMode> prompt_mode_from_string(std::string_view s) {
  static const std::map<std::string, PromptMode, std::less<>> kModes = {
      {"stage1", PromptMode::kStage1},
      {"stage2", PromptMode::kStage2},
      {"stage3", PromptMode::kStage3},
      {"oracle", PromptMode::kOracle},
      {"end_to_end", PromptMode::kEndToEnd},
      {"e2e", PromptMode::kEndToEnd},
      {"judge_behavior", PromptMode::kJudgeBehavior},
      {"judge_entailment", PromptMode::kJudgeEntailment},
      {"judge_recall", PromptMode::kJudgeRecall},
  };
  auto it = kModes.find(s);
  if (it == kModes.end()) return std::nullopt;
  return it->second;
}

ojson PromptBundle::to_json(const std::string& record_id) const {
  ojson j;
  j["record_id"] = record_id;
  j["mode"] = to_string(mode);
  j["system"] = system;
  j["user"] = user;
  return j;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool is_ident(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Finds "{name}" at pos; returns the name or nullopt.
std::optional<std::string> placeholder_at(const std::string& s, size_t pos, size_t* end) {
  if (s[pos] != '{' || pos + 1 >= s.size() || !is_ident_start(s[pos + 1])) return std::nullopt;
  size_t i = pos + 1;
  while (i < s.size() && is_ident(s[i])) ++i;
  if (i >= s.size() || s[i] != '}') return std::nullopt;
  *end = i + 1;
  return s.substr(pos + 1, i - pos - 1);
}

}  // namespace

std::vector<std::string> scan_placeholders(const std::string& tmpl) {
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (size_t i = 0; i < tmpl.size(); ++i) {
    size_t end = 0;
    if (auto name = placeholder_at(tmpl, i, &end)) {
      if (seen.insert(*name).second) names.push_back(*name);
      i = end - 1;
    }
  }
  return names;
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& values,
                            std::vector<std::string>* resolved) {
  std::string out;
  out.reserve(tmpl.size());
  std::set<std::string> used;
  for (size_t i = 0; i < tmpl.size(); ++i) {
    size_t end = 0;
    if (auto name = placeholder_at(tmpl, i, &end)) {
      auto it = values.find(*name);
      if (it == values.end()) {
        throw PromptError("unresolved placeholder {" + *name + "}");
      }
      out += it->second;
      used.insert(*name);
      i = end - 1;
      continue;
    }
    out.push_back(tmpl[i]);
  }
  for (const auto& [key, _] : values) {
    if (!used.count(key)) {
      throw PromptError("substitution '" + key + "' is not a placeholder in the template");
    }
  }
  if (resolved) resolved->assign(used.begin(), used.end());
  return out;
}

// ---------------------------------------------------------------------------
// Behavior rubrics (Table-1 expected behaviours)
// ---------------------------------------------------------------------------

const std::string& behavior_rubric(const ConflictType& type) {
  static const std::map<ConflictLabel, std::string> kRubrics = {
      {ConflictLabel::kNoConflict,
       "Return a unified and concise answer that synthesizes all content accurately."},
      {ConflictLabel::kComplementary,
       "Integrate all valid details to produce a richer, more comprehensive response."},
      {ConflictLabel::kConflictingOpinions,
       "Present each viewpoint clearly, describe the nature of the disagreement, and avoid "
       "choosing a side unless supported by strong evidence."},
      {ConflictLabel::kOutdated,
       "Prioritize newer, verified information while explicitly noting that certain sources "
       "are outdated."},
      {ConflictLabel::kMisinformation,
       "Reject or correct the misinformation, provide verified facts, and briefly explain why "
       "the misinformation is inaccurate."},
  };
  return kRubrics.at(type.value());
}

// ---------------------------------------------------------------------------
// Serialization of docs and notes
// ---------------------------------------------------------------------------

std::string serialize_docs(const std::vector<RetrievedDoc>& docs) {
  std::string out;
  for (size_t i = 0; i < docs.size(); ++i) {
    const auto& d = docs[i];
    if (i) out += "\n";
    out += "[" + d.doc_id + "] title=" + d.title + "\n";
    out += "source=" + d.source + "\n";
    out += "timestamp=" + (d.timestamp ? *d.timestamp : std::string("unknown")) + "\n";
    out += "snippet=" + d.snippet + "\n";
  }
  return out;
}

std::string serialize_notes(const std::vector<PerDocNote>& notes) {
  std::string out;
  for (size_t i = 0; i < notes.size(); ++i) {
    if (i) out += "\n";
    out += note_to_json(notes[i]).dump();
  }
  return out;
}

int count_tag_spans_equal(const std::string& text, const std::string& tag,
                          const std::string& content) {
  const std::string open = "<" + tag + ">";
  const std::string close = "</" + tag + ">";
  int count = 0;
  size_t pos = 0;
  while ((pos = text.find(open, pos)) != std::string::npos) {
    size_t start = pos + open.size();
    size_t end = text.find(close, start);
    if (end == std::string::npos) break;
    if (text.compare(start, end - start, content) == 0) ++count;
    pos = end + close.size();
  }
  return count;
}

// ---------------------------------------------------------------------------
// PromptLibrary
// ---------------------------------------------------------------------------

namespace {

std::string template_file(PromptMode mode, bool system) {
  return to_string(mode) + (system ? "_system.txt" : "_user.txt");
}

std::string read_file_or_throw(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw PromptError("cannot read template " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::filesystem::path PromptLibrary::default_dir() {
  if (const char* env = std::getenv("CATS_TEMPLATE_DIR"); env && *env) {
    return env;
  }
#ifdef CATS_DEFAULT_TEMPLATE_DIR
  return CATS_DEFAULT_TEMPLATE_DIR;
#else
  return "assets/templates";
#endif
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  PromptLibrary lib;
  lib.dir_ = dir;
  const PromptMode kAll[] = {
      PromptMode::kStage1,         PromptMode::kStage2,      PromptMode::kStage3,
      PromptMode::kOracle,         PromptMode::kEndToEnd,    PromptMode::kJudgeBehavior,
      PromptMode::kJudgeEntailment, PromptMode::kJudgeRecall,
  };
  for (PromptMode mode : kAll) {
    for (bool system : {true, false}) {
      std::string name = template_file(mode, system);
      std::string text = read_file_or_throw(dir / name);
      lib.checksums_[name] = hex64(fnv1a64(text));
      lib.files_[name] = std::move(text);
    }
  }
  std::filesystem::path manifest_path = dir / "MANIFEST.json";
  if (std::filesystem::exists(manifest_path)) {
    lib.manifest_ = ojson::parse(read_file_or_throw(manifest_path), nullptr, false);
    if (lib.manifest_.is_discarded()) {
      throw PromptError("MANIFEST.json is not valid JSON in " + dir.string());
    }
  }
  return lib;
}

const std::string& PromptLibrary::text(PromptMode mode, bool system) const {
  return files_.at(template_file(mode, system));
}

std::vector<std::string> PromptLibrary::verify_manifest() const {
  std::vector<std::string> mismatches;
  if (manifest_.is_null()) {
    mismatches.push_back("MANIFEST.json missing");
    return mismatches;
  }
  for (const auto& [name, sum] : checksums_) {
    if (!manifest_.contains(name)) {
      mismatches.push_back(name + ": not pinned in MANIFEST.json");
    } else if (manifest_[name].get<std::string>() != sum) {
      mismatches.push_back(name + ": checksum " + sum + " != pinned " +
                           manifest_[name].get<std::string>());
    }
  }
  return mismatches;
}

PromptBundle PromptLibrary::build_inference_prompt(const QueryRecord& record, PromptMode mode,
                                                   const InferenceProfile& profile) const {
  if (mode != PromptMode::kOracle && mode != PromptMode::kEndToEnd) {
    throw PromptError("inference mode must be oracle or end_to_end");
  }
  if (record.retrieved_docs.empty()) {
    throw PromptError("record '" + record.id + "' has no retrieved_docs");
  }

  std::map<std::string, std::string> values;
  values["query"] = record.query;
  values["retrieved_docs"] = serialize_docs(record.retrieved_docs);
  if (profile.include_notes && record.per_doc_notes && !record.per_doc_notes->empty()) {
    values["per_doc_notes"] = serialize_notes(*record.per_doc_notes);
  } else {
    values["per_doc_notes"] = std::string(kNotesNotProvided);
  }
  if (mode == PromptMode::kOracle) {
    if (!record.conflict_type) {
      throw PromptError("oracle mode requires a gold conflict_type on record '" + record.id +
                        "'");
    }
    values["conflict_type"] = record.conflict_type->label();
  }

  PromptBundle bundle;
  bundle.mode = mode;
  bundle.system = render_template(text(mode, true), values, &bundle.placeholders_resolved);
  bundle.user = render_template(text(mode, false), values, nullptr);

  if (mode == PromptMode::kOracle) {
    int spans = count_tag_spans_equal(bundle.user, "CONFLICT_LABEL",
                                      record.conflict_type->label());
    if (spans != 1) {
      throw PromptError("oracle render must contain exactly one gold-label span, found " +
                        std::to_string(spans));
    }
  }
  return bundle;
}

PromptBundle PromptLibrary::build_annotation_prompt(const QueryRecord& record, int stage,
                                                    const PriorStages& prior) const {
  PromptMode mode;
  std::map<std::string, std::string> values;
  values["query"] = record.query;
  switch (stage) {
    case 1:
      mode = PromptMode::kStage1;
      if (record.retrieved_docs.empty()) {
        throw PromptError("stage 1 requires retrieved_docs on record '" + record.id + "'");
      }
      values["retrieved_docs"] = serialize_docs(record.retrieved_docs);
      break;
    case 2: {
      mode = PromptMode::kStage2;
      if (!prior.notes || prior.notes->empty()) {
        throw PromptError("stage 2 requires stage-1 notes for record '" + record.id + "'");
      }
      if (!record.conflict_type) {
        throw PromptError("stage 2 requires the record's conflict_type ('" + record.id + "')");
      }
      values["per_doc_notes"] = serialize_notes(*prior.notes);
      values["conflict_type"] = record.conflict_type->label();
      break;
    }
    case 3: {
      mode = PromptMode::kStage3;
      if (!prior.notes || prior.notes->empty() || !prior.conflict_reason) {
        throw PromptError("stage 3 requires stage-1 notes and the stage-2 conflict reason ('" +
                          record.id + "')");
      }
      if (!record.conflict_type) {
        throw PromptError("stage 3 requires the record's conflict_type ('" + record.id + "')");
      }
      values["retrieved_docs"] = serialize_docs(record.retrieved_docs);
      values["per_doc_notes"] = serialize_notes(*prior.notes);
      values["conflict_type"] = record.conflict_type->label();
      values["conflict_reason"] = *prior.conflict_reason;
      break;
    }
    default:
      throw PromptError("annotation stage must be 1, 2 or 3");
  }

  PromptBundle bundle;
  bundle.mode = mode;
  std::map<std::string, std::string> system_values;  // stage system prompts are static
  bundle.system = render_template(text(mode, true), system_values, nullptr);
  bundle.user = render_template(text(mode, false), values, &bundle.placeholders_resolved);
  return bundle;
}

PromptBundle PromptLibrary::build_judge_prompt(PromptMode kind, const JudgeInputs& inputs) const {
  std::map<std::string, std::string> values;
  switch (kind) {
    case PromptMode::kJudgeBehavior: {
      if (!inputs.conflict_type) {
        throw PromptError("behavior judge requires a known conflict type");
      }
      values["query"] = inputs.query;
      values["answer"] = inputs.answer;
      values["conflict_type"] = inputs.conflict_type->label();
      values["behavior_rubric"] = behavior_rubric(*inputs.conflict_type);
      break;
    }
    case PromptMode::kJudgeEntailment:
      values["premise"] = inputs.premise;
      values["hypothesis"] = inputs.hypothesis;
      break;
    case PromptMode::kJudgeRecall:
      values["gold_answer"] = inputs.gold;
      values["candidate_answer"] = inputs.candidate;
      break;
    default:
      throw PromptError("not a judge prompt kind");
  }

  PromptBundle bundle;
  bundle.mode = kind;
  std::map<std::string, std::string> system_values;
  bundle.system = render_template(text(kind, true), system_values, nullptr);
  bundle.user = render_template(text(kind, false), values, &bundle.placeholders_resolved);
  return bundle;
}

}  // namespace cats
