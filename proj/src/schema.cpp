#include "cats/schema.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "cats/util.hpp"

namespace cats {

// ---------------------------------------------------------------------------
// ConflictType
// ---------------------------------------------------------------------------

const std::array<std::string, 5>& ConflictType::labels() {
  static const std::array<std::string, 5> kLabels = {
      "No conflict",
      "Complementary information",
      "Conflicting opinions or research outcomes",
      "Conflict due to outdated information",
      "Conflict due to misinformation",
  };
  return kLabels;
}

const std::string& ConflictType::label() const {
  return labels()[static_cast<size_t>(value_)];
}

std::optional<ConflictType> ConflictType::from_canonical(std::string_view text) {
  const auto& all = labels();
  for (size_t i = 0; i < all.size(); ++i) {
    if (text == all[i]) return ConflictType(static_cast<ConflictLabel>(i));
  }
  return std::nullopt;
}

std::optional<NormalizedConflict> conflict_from_text(std::string_view text) {
  if (auto exact = ConflictType::from_canonical(text)) return NormalizedConflict{*exact, false};

  std::string loose = normalize_loose(text);
  const auto& all = ConflictType::labels();
  for (size_t i = 0; i < all.size(); ++i) {
    if (loose == normalize_loose(all[i]))
      return NormalizedConflict{ConflictType(static_cast<ConflictLabel>(i)), true};
  }

  // Short forms seen in raw upstream data.
  static const std::vector<std::pair<std::string, ConflictLabel>> kAliases = {
      {"conflicting opinions", ConflictLabel::kConflictingOpinions},
      {"conflicting opinion", ConflictLabel::kConflictingOpinions},
      {"complementary", ConflictLabel::kComplementary},
      {"outdated information", ConflictLabel::kOutdated},
      {"outdated", ConflictLabel::kOutdated},
      {"freshness", ConflictLabel::kOutdated},
      {"misinformation", ConflictLabel::kMisinformation},
      {"none", ConflictLabel::kNoConflict},
  };
  for (const auto& [alias, label] : kAliases) {
    if (loose == alias) return NormalizedConflict{ConflictType(label), true};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Verdicts / entailment
// ---------------------------------------------------------------------------

bool is_known_verdict(std::string_view v) {
  return v == kVerdictSupports || v == kVerdictPartial || v == kVerdictIrrelevant;
}

bool is_supporting_verdict(std::string_view v) {
  return v == kVerdictSupports || v == kVerdictPartial;
}

std::string to_string(EntailmentRelation r) {
  switch (r) {
    case EntailmentRelation::kEntails:
      return "entails";
    case EntailmentRelation::kContradicts:
      return "contradicts";
    case EntailmentRelation::kNeutral:
      return "neutral";
  }
  return "neutral";
}

std::optional<EntailmentRelation> entailment_from_string(std::string_view s) {
  if (s == "entails") return EntailmentRelation::kEntails;
  if (s == "contradicts") return EntailmentRelation::kContradicts;
  if (s == "neutral") return EntailmentRelation::kNeutral;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

bool is_valid_doc_id(std::string_view id) {
  if (id.size() < 2 || id[0] != 'd') return false;
  if (id[1] == '0') return false;
  return std::all_of(id.begin() + 1, id.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

std::optional<int> doc_id_index(std::string_view id) {
  if (!is_valid_doc_id(id)) return std::nullopt;
  int v = 0;
  for (size_t i = 1; i < id.size(); ++i) {
    if (v > 1000000) return std::nullopt;
    v = v * 10 + (id[i] - '0');
  }
  return v;
}

bool is_normalized_substring(std::string_view needle, std::string_view haystack) {
  std::string n = normalize_ws(needle);
  if (n.empty()) return true;
  return contains(normalize_ws(haystack), n);
}

std::vector<std::string> citation_markers(std::string_view text) {
  std::vector<std::string> out;
  for (size_t i = 0; i + 3 < text.size() + 1; ++i) {
    if (text[i] != '[') continue;
    size_t j = text.find(']', i);
    if (j == std::string_view::npos) break;
    std::string_view inner = text.substr(i + 1, j - i - 1);
    if (inner.size() >= 2 && inner[0] == 'd' &&
        std::all_of(inner.begin() + 1, inner.end(),
                    [](unsigned char c) { return std::isdigit(c); })) {
      out.emplace_back(inner);
      i = j;
    }
  }
  return out;
}

bool has_errors(const std::vector<Violation>& violations) {
  return std::any_of(violations.begin(), violations.end(),
                     [](const Violation& v) { return v.severity == Severity::kError; });
}

// ---------------------------------------------------------------------------
// validate_record
// ---------------------------------------------------------------------------

namespace {

void add(std::vector<Violation>& out, const std::string& id, std::string field,
         std::string rule, std::string message, Severity sev = Severity::kError) {
  out.push_back(Violation{id, std::move(field), std::move(rule), std::move(message), sev});
}

// Pulls "<label> — <reason>" out of a serialized think trace, if present.
std::optional<std::pair<std::string, std::string>> label_line_in_think(
    const std::string& think) {
  for (const auto& line : split_lines(think)) {
    size_t dash = line.find(" — ");
    if (dash == std::string::npos) continue;
    std::string label = trim(line.substr(0, dash));
    if (ConflictType::from_canonical(label)) {
      return std::make_pair(label, trim(line.substr(dash + std::string(" — ").size())));
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<Violation> validate_record(const QueryRecord& record, const WordLimits& limits) {
  std::vector<Violation> out;
  const std::string& id = record.id;

  if (record.id.empty()) add(out, id, "id", "id-missing", "record has no id");
  if (record.query.empty()) add(out, id, "query", "query-missing", "record has no query");

  // Docs: pattern, contiguity d1..dN, timestamps.
  for (size_t i = 0; i < record.retrieved_docs.size(); ++i) {
    const auto& doc = record.retrieved_docs[i];
    std::string field = "retrieved_docs[" + std::to_string(i) + "]";
    if (!is_valid_doc_id(doc.doc_id)) {
      add(out, id, field + ".doc_id", "doc-id-pattern",
          "doc_id '" + doc.doc_id + "' is not d<positive integer> without leading zeros");
    } else if (doc_id_index(doc.doc_id) != static_cast<int>(i) + 1) {
      add(out, id, field + ".doc_id", "doc-ids-not-contiguous",
          "doc_ids must be exactly d1..dN in order; found '" + doc.doc_id +
              "' at position " + std::to_string(i + 1));
    }
    if (doc.timestamp) {
      if (doc.timestamp->empty()) {
        add(out, id, field + ".timestamp", "timestamp-empty-string",
            "absent timestamps must be omitted, not empty strings");
      } else if (!is_iso8601_date(*doc.timestamp)) {
        add(out, id, field + ".timestamp", "timestamp-not-iso8601",
            "timestamp '" + *doc.timestamp + "' does not parse as ISO-8601");
      }
    }
  }

  // Notes: coverage and per-note invariants.
  if (record.per_doc_notes) {
    const auto& notes = *record.per_doc_notes;
    if (notes.size() != record.retrieved_docs.size()) {
      add(out, id, "per_doc_notes", "notes-doc-coverage",
          "notes count " + std::to_string(notes.size()) + " != docs count " +
              std::to_string(record.retrieved_docs.size()));
    }
    for (size_t i = 0; i < notes.size(); ++i) {
      const auto& note = notes[i];
      std::string field = "per_doc_notes[" + std::to_string(i) + "]";
      if (i < record.retrieved_docs.size() &&
          note.doc_id != record.retrieved_docs[i].doc_id) {
        add(out, id, field + ".doc_id", "notes-doc-coverage",
            "note doc_id '" + note.doc_id + "' does not match doc '" +
                record.retrieved_docs[i].doc_id + "' at the same position");
      }
      if (!is_known_verdict(note.verdict)) {
        add(out, id, field + ".verdict", "verdict-out-of-lexicon",
            "verdict '" + note.verdict + "' is not supports/partially supports/irrelevant");
      }
      if (note.verdict == kVerdictIrrelevant && !note.key_fact.empty()) {
        add(out, id, field + ".key_fact", "key-fact-not-empty-on-irrelevant",
            "key_fact must be empty when verdict is 'irrelevant'");
      }
      if (!note.source_quality.empty() && note.source_quality != "high" &&
          note.source_quality != "low") {
        add(out, id, field + ".source_quality", "source-quality-out-of-lexicon",
            "source_quality '" + note.source_quality + "' is not high/low");
      }
      if (word_count(note.verdict_reason) > limits.verdict_reason_max) {
        add(out, id, field + ".verdict_reason", "verdict-reason-too-long",
            "verdict_reason exceeds " + std::to_string(limits.verdict_reason_max) + " words");
      }
      if (word_count(note.key_fact) > limits.key_fact_max) {
        add(out, id, field + ".key_fact", "key-fact-too-long",
            "key_fact exceeds " + std::to_string(limits.key_fact_max) + " words");
      }
      if (note.quote && !note.quote->empty()) {
        const RetrievedDoc* doc = nullptr;
        for (const auto& d : record.retrieved_docs) {
          if (d.doc_id == note.doc_id) {
            doc = &d;
            break;
          }
        }
        if (doc && !is_normalized_substring(*note.quote, doc->snippet)) {
          add(out, id, field + ".quote", "quote-not-in-snippet",
              "quote is not a contiguous span of the snippet for " + note.doc_id);
        }
      }
    }
  }

  // Conflict type and reason.
  if (!record.conflict_type) {
    if (record.conflict_type_raw.empty()) {
      add(out, id, "conflict_type", "conflict-type-missing", "record has no conflict_type");
    } else {
      add(out, id, "conflict_type", "conflict-type-unknown",
          "conflict_type '" + record.conflict_type_raw + "' is not one of the five labels");
    }
  }
  if (word_count(record.conflict_reason) > limits.conflict_reason_max) {
    add(out, id, "conflict_reason", "conflict-reason-too-long",
        "conflict_reason exceeds " + std::to_string(limits.conflict_reason_max) + " words");
  }

  // Expected response.
  if (record.expected_response) {
    const auto& er = *record.expected_response;
    auto cites = citation_markers(er.answer);
    if (er.abstain) {
      if (!cites.empty()) {
        add(out, id, "expected_response.answer", "citation-in-abstain",
            "abstaining answers must carry no [dX] citations");
      }
      if (!er.evidence.empty()) {
        add(out, id, "expected_response.evidence", "evidence-nonempty-on-abstain",
            "evidence must be empty when abstain is true");
      }
    } else {
      if (er.evidence.empty()) {
        add(out, id, "expected_response.evidence", "evidence-empty",
            "evidence must be nonempty when abstain is false");
      }
      for (const auto& ev : er.evidence) {
        bool known = std::any_of(record.retrieved_docs.begin(), record.retrieved_docs.end(),
                                 [&](const RetrievedDoc& d) { return d.doc_id == ev; });
        if (!known) {
          add(out, id, "expected_response.evidence", "evidence-unknown-doc",
              "evidence doc_id '" + ev + "' is not in retrieved_docs");
        }
      }
    }
  }

  // Refusal provenance implies abstention.
  std::string provenance;
  if (record.metadata.extra.contains("provenance") &&
      record.metadata.extra["provenance"].is_string()) {
    provenance = record.metadata.extra["provenance"].get<std::string>();
  }
  if ((provenance == "refusal" || record.metadata.category == "refusal") &&
      (!record.expected_response || !record.expected_response->abstain)) {
    add(out, id, "expected_response.abstain", "refusal-not-abstaining",
        "refusal-sourced record must have expected_response.abstain == true");
  }

  // Divergence between conflict_reason and the think trace's label line is
  // flagged, never reconciled.
  if (record.think && !record.conflict_reason.empty()) {
    if (auto ll = label_line_in_think(*record.think)) {
      if (normalize_loose(ll->second) != normalize_loose(record.conflict_reason)) {
        add(out, id, "conflict_reason", "conflict-reason-divergence",
            "conflict_reason differs from the think trace label line",
            Severity::kWarning);
      }
    }
  }

  return out;
}

// ---------------------------------------------------------------------------
// JSON (de)serialization
// ---------------------------------------------------------------------------

namespace {

// Copies every key of `j` not in `known` into an extras bag.
ojson collect_extras(const ojson& j, const std::set<std::string>& known) {
  ojson extra = ojson::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) extra[it.key()] = it.value();
  }
  return extra;
}

std::string get_string(const ojson& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return {};
  if (j[key].is_string()) return j[key].get<std::string>();
  return j[key].dump();
}

}  // namespace

ojson doc_to_json(const RetrievedDoc& doc) {
  ojson j;
  j["doc_id"] = doc.doc_id;
  j["title"] = doc.title;
  j["source"] = doc.source;
  j["snippet"] = doc.snippet;
  if (doc.timestamp) j["timestamp"] = *doc.timestamp;
  for (auto it = doc.extra.begin(); it != doc.extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

RetrievedDoc doc_from_json(const ojson& j) {
  RetrievedDoc doc;
  doc.doc_id = get_string(j, "doc_id");
  doc.title = get_string(j, "title");
  doc.source = get_string(j, "source");
  doc.snippet = get_string(j, "snippet");
  if (j.contains("timestamp") && j["timestamp"].is_string()) {
    std::string ts = j["timestamp"].get<std::string>();
    doc.timestamp = ts;  // empty strings surface as violations, not silently dropped
  }
  doc.extra = collect_extras(j, {"doc_id", "title", "source", "snippet", "timestamp"});
  return doc;
}

ojson note_to_json(const PerDocNote& note) {
  ojson j;
  j["doc_id"] = note.doc_id;
  j["verdict"] = note.verdict;
  j["verdict_reason"] = note.verdict_reason;
  j["key_fact"] = note.key_fact;
  if (note.quote) j["quote"] = *note.quote;
  j["source_quality"] = note.source_quality;
  for (auto it = note.extra.begin(); it != note.extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

PerDocNote note_from_json(const ojson& j) {
  PerDocNote note;
  note.doc_id = get_string(j, "doc_id");
  if (note.doc_id.empty() && j.contains("id")) note.doc_id = get_string(j, "id");
  note.verdict = get_string(j, "verdict");
  note.verdict_reason = get_string(j, "verdict_reason");
  note.key_fact = get_string(j, "key_fact");
  if (j.contains("quote") && j["quote"].is_string())
    note.quote = j["quote"].get<std::string>();
  note.source_quality = get_string(j, "source_quality");
  note.extra = collect_extras(
      j, {"doc_id", "id", "verdict", "verdict_reason", "key_fact", "quote", "source_quality"});
  return note;
}

ojson expected_response_to_json(const ExpectedResponse& er) {
  ojson j;
  j["answer"] = er.answer;
  j["evidence"] = er.evidence;
  j["abstain"] = er.abstain;
  j["abstain_reason"] = er.abstain_reason;
  for (auto it = er.extra.begin(); it != er.extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

ExpectedResponse expected_response_from_json(const ojson& j) {
  ExpectedResponse er;
  er.answer = get_string(j, "answer");
  if (j.contains("evidence") && j["evidence"].is_array()) {
    for (const auto& e : j["evidence"]) {
      er.evidence.push_back(e.is_string() ? e.get<std::string>() : e.dump());
    }
  }
  if (j.contains("abstain") && j["abstain"].is_boolean()) er.abstain = j["abstain"].get<bool>();
  er.abstain_reason = get_string(j, "abstain_reason");
  er.extra = collect_extras(j, {"answer", "evidence", "abstain", "abstain_reason"});
  return er;
}

ojson record_to_json(const QueryRecord& record) {
  ojson j;
  j["id"] = record.id;
  j["query"] = record.query;
  j["retrieved_docs"] = ojson::array();
  for (const auto& d : record.retrieved_docs) j["retrieved_docs"].push_back(doc_to_json(d));
  if (record.per_doc_notes) {
    j["per_doc_notes"] = ojson::array();
    for (const auto& n : *record.per_doc_notes) j["per_doc_notes"].push_back(note_to_json(n));
  }
  j["conflict_type"] = record.conflict_label_text();
  if (!record.conflict_reason.empty()) j["conflict_reason"] = record.conflict_reason;
  if (record.gold_answer) j["gold_answer"] = *record.gold_answer;
  if (record.expected_response)
    j["expected_response"] = expected_response_to_json(*record.expected_response);
  if (record.think) j["think"] = *record.think;
  if (!record.metadata.empty()) {
    ojson m;
    m["category"] = record.metadata.category;
    m["domain"] = record.metadata.domain;
    for (auto it = record.metadata.extra.begin(); it != record.metadata.extra.end(); ++it)
      m[it.key()] = it.value();
    j["metadata"] = m;
  }
  for (auto it = record.extra.begin(); it != record.extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

QueryRecord record_from_json(const ojson& j) {
  QueryRecord record;
  record.id = get_string(j, "id");
  record.query = get_string(j, "query");
  if (j.contains("retrieved_docs") && j["retrieved_docs"].is_array()) {
    for (const auto& d : j["retrieved_docs"]) record.retrieved_docs.push_back(doc_from_json(d));
  }
  if (j.contains("per_doc_notes") && j["per_doc_notes"].is_array()) {
    std::vector<PerDocNote> notes;
    for (const auto& n : j["per_doc_notes"]) notes.push_back(note_from_json(n));
    record.per_doc_notes = std::move(notes);
  }
  record.conflict_type_raw = get_string(j, "conflict_type");
  if (auto ct = ConflictType::from_canonical(record.conflict_type_raw)) {
    record.conflict_type = *ct;
  }
  record.conflict_reason = get_string(j, "conflict_reason");
  if (j.contains("gold_answer") && j["gold_answer"].is_string()) {
    std::string g = j["gold_answer"].get<std::string>();
    if (!g.empty()) record.gold_answer = g;
  }
  if (j.contains("expected_response") && j["expected_response"].is_object()) {
    record.expected_response = expected_response_from_json(j["expected_response"]);
  }
  if (j.contains("think") && j["think"].is_string())
    record.think = j["think"].get<std::string>();
  if (j.contains("metadata") && j["metadata"].is_object()) {
    const auto& m = j["metadata"];
    record.metadata.category = get_string(m, "category");
    record.metadata.domain = get_string(m, "domain");
    record.metadata.extra = collect_extras(m, {"category", "domain"});
  }
  record.extra = collect_extras(
      j, {"id", "query", "retrieved_docs", "per_doc_notes", "conflict_type", "conflict_reason",
          "gold_answer", "expected_response", "think", "metadata"});
  return record;
}

std::string record_to_jsonl_line(const QueryRecord& record) {
  return record_to_json(record).dump();
}

bool records_equal(const QueryRecord& a, const QueryRecord& b) {
  return record_to_json(a) == record_to_json(b);
}

}  // namespace cats
