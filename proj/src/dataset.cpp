#include "cats/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <cmath>
#include <set>

#include "cats/util.hpp"

namespace cats {

// ---------------------------------------------------------------------------
// JSONL IO
// ---------------------------------------------------------------------------

LoadResult read_jsonl(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());

  LoadResult result;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ojson j = ojson::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      std::string msg = "malformed record at line " + std::to_string(line_no);
      if (strict) throw DatasetError(path.string() + ": " + msg);
      result.malformed.push_back(LineError{line_no, msg});
      continue;
    }
    QueryRecord record = record_from_json(j);
    record.source_line = line_no;
    auto violations = validate_record(record);
    result.violations.insert(result.violations.end(), violations.begin(), violations.end());
    result.records.push_back(std::move(record));
  }
  return result;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<QueryRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + path.string());
  for (const auto& r : records) out << record_to_jsonl_line(r) << "\n";
}

std::vector<ojson> read_jsonl_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  std::vector<ojson> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ojson j = ojson::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw DatasetError(path.string() + ": malformed JSON at line " + std::to_string(line_no));
    }
    out.push_back(std::move(j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

namespace {

struct DomainRule {
  const char* needle;
  const char* domain;
};

// Substring table checked in order; first hit wins.
const DomainRule kDomainRules[] = {
    {"wikipedia", "encyclopedic"}, {"britannica", "encyclopedic"},
    {"encyclopedia", "encyclopedic"}, {"wiktionary", "encyclopedic"},
    {"nature.com", "academic"},    {"arxiv", "academic"},
    {"pubmed", "academic"},        {"ncbi", "academic"},
    {"sciencedirect", "academic"}, {"springer", "academic"},
    {"ieee", "academic"},          {"acm.org", "academic"},
    {"jstor", "academic"},         {"scholar", "academic"},
    {".edu", "academic"},          {"journal", "academic"},
    {"science.org", "academic"},   {"mayoclinic", "academic"},
    {"who.int", "academic"},       {"cdc.gov", "academic"},
    {"nih.gov", "academic"},       {"reuters", "news"},
    {"bbc.", "news"},              {"bbc.com", "news"},
    {"cnn.com", "news"},           {"nytimes", "news"},
    {"theguardian", "news"},       {"guardian", "news"},
    {"apnews", "news"},            {"washingtonpost", "news"},
    {"wsj.com", "news"},           {"bloomberg", "news"},
    {"forbes", "news"},            {"aljazeera", "news"},
    {"news", "news"},              {"times", "news"},
    {"post", "news"},              {"herald", "news"},
};

// Strips scheme/path from a URL-ish source, keeping the host.
std::string host_of(std::string_view source) {
  std::string s = trim(source);
  size_t scheme = s.find("://");
  if (scheme != std::string::npos) s = s.substr(scheme + 3);
  size_t slash = s.find('/');
  if (slash != std::string::npos) s = s.substr(0, slash);
  if (starts_with(s, "www.")) s = s.substr(4);
  return s;
}

std::string dedup_key(const RetrievedDoc& doc) {
  return normalize_loose(doc.snippet) + "\x1f" + normalize_loose(doc.source);
}

void note(std::vector<Violation>& notes, const std::string& id, std::string field,
          std::string rule, std::string message) {
  notes.push_back(
      Violation{id, std::move(field), std::move(rule), std::move(message), Severity::kWarning});
}

}  // namespace

std::string domain_for_source(std::string_view source) {
  std::string lower = to_lower(source);
  for (const auto& rule : kDomainRules) {
    if (contains(lower, rule.needle)) return rule.domain;
  }
  return "other";
}

NormalizeResult normalize_record(const ojson& raw, const std::string& assigned_id) {
  NormalizeResult result;
  QueryRecord base = record_from_json(raw);
  QueryRecord& rec = result.record;

  rec.id = base.id.empty() ? assigned_id : base.id;
  rec.query = base.query;
  rec.conflict_reason = base.conflict_reason;
  rec.gold_answer = base.gold_answer;
  rec.expected_response = base.expected_response;
  rec.per_doc_notes = base.per_doc_notes;
  rec.think = base.think;
  rec.metadata = base.metadata;
  rec.extra = base.extra;

  // Conflict label: canonicalize, recording when normalization was needed.
  if (base.conflict_type) {
    rec.conflict_type = base.conflict_type;
    rec.conflict_type_raw = base.conflict_type_raw;
  } else if (auto norm = conflict_from_text(base.conflict_type_raw)) {
    rec.conflict_type = norm->type;
    rec.conflict_type_raw = norm->type.label();
    if (norm->normalization_applied) {
      note(result.notes, rec.id, "conflict_type", "conflict-type-normalized",
           "'" + base.conflict_type_raw + "' normalized to '" + norm->type.label() + "'");
    }
  } else {
    rec.conflict_type_raw = base.conflict_type_raw;
    if (!base.conflict_type_raw.empty()) {
      note(result.notes, rec.id, "conflict_type", "conflict-type-unknown",
           "conflict_type '" + base.conflict_type_raw + "' left as-is");
    }
  }

  // Docs: drop exact duplicates, then re-assign sequential ids.
  std::set<std::string> seen;
  for (auto doc : base.retrieved_docs) {
    std::string key = dedup_key(doc);
    if (seen.count(key)) {
      note(result.notes, rec.id, "retrieved_docs", "duplicate-doc-dropped",
           "duplicate of an earlier snippet+source dropped (was '" + doc.doc_id + "')");
      continue;
    }
    seen.insert(key);

    // A.1 records carry source_url instead of source.
    if (doc.source.empty() && doc.extra.contains("source_url") &&
        doc.extra["source_url"].is_string()) {
      doc.source = host_of(doc.extra["source_url"].get<std::string>());
      doc.extra.erase("source_url");
    } else {
      doc.source = trim(doc.source);
    }

    if (doc.timestamp) {
      std::string raw_ts = *doc.timestamp;
      auto iso = parse_date_to_iso(raw_ts);
      if (iso) {
        doc.timestamp = *iso;
      } else {
        doc.timestamp.reset();
        if (!trim(raw_ts).empty()) {
          note(result.notes, rec.id, "retrieved_docs.timestamp", "timestamp-unparseable",
               "timestamp '" + raw_ts + "' dropped (not a parseable date)");
        }
      }
    }
    rec.retrieved_docs.push_back(std::move(doc));
  }
  for (size_t i = 0; i < rec.retrieved_docs.size(); ++i) {
    rec.retrieved_docs[i].doc_id = "d" + std::to_string(i + 1);
  }

  // Domain categorization from the first doc's source; keeps an existing tag.
  if (rec.metadata.domain.empty()) {
    std::string source;
    for (const auto& d : rec.retrieved_docs) {
      if (!d.source.empty()) {
        source = d.source;
        break;
      }
    }
    rec.metadata.domain = domain_for_source(source);
  }

  return result;
}

NormalizeCorpusResult normalize_corpus(const std::vector<ojson>& raw_records,
                                       const std::string& id_prefix) {
  NormalizeCorpusResult result;
  for (size_t i = 0; i < raw_records.size(); ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu", i + 1);
    auto one = normalize_record(raw_records[i], id_prefix + buf);
    result.records.push_back(std::move(one.record));
    result.notes.insert(result.notes.end(), one.notes.begin(), one.notes.end());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Refusal merge
// ---------------------------------------------------------------------------

std::vector<QueryRecord> merge_refusals(const std::vector<QueryRecord>& records,
                                        const std::vector<QueryRecord>& refusal_records) {
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (!r.id.empty() && !ids.insert(r.id).second) {
      throw IdCollisionError("duplicate id '" + r.id + "' in the base corpus");
    }
  }

  std::vector<QueryRecord> merged = records;
  int next = static_cast<int>(records.size());
  for (auto r : refusal_records) {
    if (r.id.empty()) {
      std::string candidate;
      do {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "#%04d", ++next);
        candidate = buf;
      } while (ids.count(candidate));
      r.id = candidate;
    } else if (!ids.insert(r.id).second) {
      throw IdCollisionError("refusal record id '" + r.id + "' collides with the base corpus");
    }
    ids.insert(r.id);
    r.metadata.extra["provenance"] = "refusal";
    merged.push_back(std::move(r));
  }
  return merged;
}

// ---------------------------------------------------------------------------
// Stratified split
// ---------------------------------------------------------------------------

std::string split_stratum_key(const QueryRecord& record) {
  if (record.is_refusal()) return "refusal";
  return record.conflict_label_text();
}

SplitResult stratified_split(const std::vector<QueryRecord>& records,
                             const SplitFractions& fractions, uint64_t seed) {
  double sum = fractions.train + fractions.val + fractions.test;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw DatasetError("split fractions must sum to 1");
  }
  for (const auto& r : records) {
    if (!r.conflict_type && r.conflict_type_raw.empty()) {
      throw DatasetError("record '" + r.id + "' has no conflict_type; cannot stratify");
    }
  }

  SplitResult result;
  result.seed = seed;
  result.fractions = fractions;

  // Strata keep first-seen order of input; record order inside a stratum is
  // input order before the seeded shuffle.
  std::vector<std::string> stratum_order;
  std::map<std::string, std::vector<size_t>> strata;
  for (size_t i = 0; i < records.size(); ++i) {
    std::string key = split_stratum_key(records[i]);
    auto [it, inserted] = strata.try_emplace(key);
    if (inserted) stratum_order.push_back(key);
    it->second.push_back(i);
  }
  std::sort(stratum_order.begin(), stratum_order.end());

  std::vector<size_t> train_idx, val_idx, test_idx;
  for (const auto& key : stratum_order) {
    auto indices = strata[key];
    StratumCounts counts;
    counts.stratum = key;

    if (indices.size() < 3) {
      result.warnings.push_back("stratum '" + key + "' has " +
                                std::to_string(indices.size()) +
                                " record(s), fewer than the number of splits; all to train");
      train_idx.insert(train_idx.end(), indices.begin(), indices.end());
      counts.train = static_cast<int>(indices.size());
      result.strata.push_back(counts);
      continue;
    }

    deterministic_shuffle(indices, seed ^ fnv1a64(key));

    // Largest remainder; ties prefer test, then val, then train.
    size_t n = indices.size();
    struct Part {
      double exact;
      size_t base;
      double frac;
      int pref;  // lower wins ties
      std::vector<size_t>* out;
      int* count;
    };
    double exact_train = n * fractions.train;
    double exact_val = n * fractions.val;
    double exact_test = n * fractions.test;
    Part parts[3] = {
        {exact_test, static_cast<size_t>(exact_test), 0.0, 0, &test_idx, &counts.test},
        {exact_val, static_cast<size_t>(exact_val), 0.0, 1, &val_idx, &counts.val},
        {exact_train, static_cast<size_t>(exact_train), 0.0, 2, &train_idx, &counts.train},
    };
    size_t assigned = 0;
    for (auto& p : parts) {
      p.frac = p.exact - static_cast<double>(p.base);
      assigned += p.base;
    }
    size_t leftover = n - assigned;
    std::vector<Part*> order = {&parts[0], &parts[1], &parts[2]};
    std::stable_sort(order.begin(), order.end(), [](const Part* a, const Part* b) {
      if (a->frac != b->frac) return a->frac > b->frac;
      return a->pref < b->pref;
    });
    for (size_t i = 0; i < leftover; ++i) ++order[i % order.size()]->base;

    size_t cursor = 0;
    // Assignment order is train, then val, then test.
    for (Part* p : {&parts[2], &parts[1], &parts[0]}) {
      for (size_t i = 0; i < p->base; ++i) p->out->push_back(indices[cursor++]);
      *p->count = static_cast<int>(p->base);
    }
    result.strata.push_back(counts);
  }

  // Output order inside each split follows the input corpus.
  auto emit = [&](std::vector<size_t>& idx) {
    std::sort(idx.begin(), idx.end());
    std::vector<QueryRecord> out;
    out.reserve(idx.size());
    for (size_t i : idx) out.push_back(records[i]);
    return out;
  };
  result.train = emit(train_idx);
  result.val = emit(val_idx);
  result.test = emit(test_idx);
  return result;
}

ojson SplitResult::manifest() const {
  ojson j;
  j["seed"] = seed;
  j["fractions"] = ojson::array({fractions.train, fractions.val, fractions.test});
  j["generator"] = "splitmix64-fisher-yates";
  j["counts"] = ojson::object();
  j["counts"]["train"] = train.size();
  j["counts"]["val"] = val.size();
  j["counts"]["test"] = test.size();
  ojson per = ojson::object();
  for (const auto& s : strata) {
    per[s.stratum] = ojson::object(
        {{"train", s.train}, {"val", s.val}, {"test", s.test}});
  }
  j["per_stratum"] = per;
  if (!warnings.empty()) j["warnings"] = warnings;
  return j;
}

}  // namespace cats
