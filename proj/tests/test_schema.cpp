#include <doctest.h>

#include <algorithm>

#include "cats/schema.hpp"
#include "cats/util.hpp"
#include "support/builders.hpp"

using namespace cats;

namespace {
bool has_rule(const std::vector<Violation>& vs, const std::string& rule) {
  return std::any_of(vs.begin(), vs.end(),
                     [&](const Violation& v) { return v.rule == rule; });
}
}  // namespace

TEST_CASE("conflict labels: canonical constructor is byte-exact") {
  CHECK(ConflictType::from_canonical("No conflict").has_value());
  CHECK_FALSE(ConflictType::from_canonical("no conflict").has_value());
  CHECK_FALSE(ConflictType::from_canonical("No conflict ").has_value());
  CHECK_FALSE(ConflictType::from_canonical("Temporal conflict").has_value());

  auto norm = conflict_from_text("  no CONFLICT ");
  REQUIRE(norm.has_value());
  CHECK(norm->type.label() == "No conflict");
  CHECK(norm->normalization_applied);

  auto exact = conflict_from_text("Conflict due to misinformation");
  REQUIRE(exact.has_value());
  CHECK_FALSE(exact->normalization_applied);

  auto alias = conflict_from_text("Conflicting opinions");
  REQUIRE(alias.has_value());
  CHECK(alias->type.value() == ConflictLabel::kConflictingOpinions);
  CHECK(alias->normalization_applied);
}

TEST_CASE("doc id pattern") {
  CHECK(is_valid_doc_id("d1"));
  CHECK(is_valid_doc_id("d12"));
  CHECK_FALSE(is_valid_doc_id("d0"));
  CHECK_FALSE(is_valid_doc_id("d01"));
  CHECK_FALSE(is_valid_doc_id("x1"));
  CHECK_FALSE(is_valid_doc_id("d"));
  CHECK(doc_id_index("d7") == 7);
}

TEST_CASE("validate_record: conformant record yields no violations") {
  QueryRecord rec = testsupport::make_annotated_record("#0001");
  CHECK(validate_record(rec).empty());
}

TEST_CASE("validate_record: non-contiguous doc ids") {
  QueryRecord rec = testsupport::make_annotated_record("#0002");
  rec.retrieved_docs[1].doc_id = "d4";
  rec.per_doc_notes->at(1).doc_id = "d4";
  CHECK(has_rule(validate_record(rec), "doc-ids-not-contiguous"));
}

TEST_CASE("validate_record: key_fact must be empty on irrelevant") {
  QueryRecord rec = testsupport::make_annotated_record("#0003");
  rec.per_doc_notes->at(1).verdict = "irrelevant";
  rec.per_doc_notes->at(1).key_fact = "Paris";
  rec.per_doc_notes->at(1).quote.reset();
  auto violations = validate_record(rec);
  REQUIRE(has_rule(violations, "key-fact-not-empty-on-irrelevant"));
  for (const auto& v : violations) {
    if (v.rule == "key-fact-not-empty-on-irrelevant") {
      CHECK(v.record_id == "#0003");
      CHECK(v.field == "per_doc_notes[1].key_fact");
    }
  }
}

TEST_CASE("validate_record: timestamp rules") {
  QueryRecord rec = testsupport::make_annotated_record("#0004");
  rec.retrieved_docs[0].timestamp = "March 5, 2023";
  CHECK(has_rule(validate_record(rec), "timestamp-not-iso8601"));

  rec.retrieved_docs[0].timestamp = "";
  CHECK(has_rule(validate_record(rec), "timestamp-empty-string"));

  rec.retrieved_docs[0].timestamp.reset();
  CHECK(validate_record(rec).empty());

  // Reduced-precision ISO dates are accepted.
  rec.retrieved_docs[0].timestamp = "2023-03";
  CHECK(validate_record(rec).empty());
}

TEST_CASE("validate_record: quote must be a snippet substring") {
  QueryRecord rec = testsupport::make_annotated_record("#0005");
  rec.per_doc_notes->at(0).quote = "text that appears nowhere";
  CHECK(has_rule(validate_record(rec), "quote-not-in-snippet"));

  // Whitespace differences are tolerated.
  rec.per_doc_notes->at(0).quote = "Paris  is the\ncapital";
  CHECK(validate_record(rec).empty());
}

TEST_CASE("validate_record: abstention invariants") {
  QueryRecord rec = testsupport::make_annotated_record("#0006");
  rec.expected_response->abstain = true;
  rec.expected_response->abstain_reason = "nothing relevant";
  auto violations = validate_record(rec);
  CHECK(has_rule(violations, "citation-in-abstain"));
  CHECK(has_rule(violations, "evidence-nonempty-on-abstain"));

  rec.expected_response->answer = "";
  rec.expected_response->evidence.clear();
  CHECK(validate_record(rec).empty());

  rec.expected_response->abstain = false;
  CHECK(has_rule(validate_record(rec), "evidence-empty"));
}

TEST_CASE("validate_record: evidence must name real docs") {
  QueryRecord rec = testsupport::make_annotated_record("#0011");
  rec.expected_response->evidence = {"d1", "d9"};
  CHECK(has_rule(validate_record(rec), "evidence-unknown-doc"));
}

TEST_CASE("validate_record: refusal provenance forces abstain") {
  QueryRecord rec = testsupport::make_annotated_record("#0007");
  rec.metadata.extra["provenance"] = "refusal";
  CHECK(has_rule(validate_record(rec), "refusal-not-abstaining"));
}

TEST_CASE("validate_record: divergent think label line is flagged, not fixed") {
  QueryRecord rec = testsupport::make_annotated_record("#0008");
  rec.think = "<think>\n[]\nNo conflict — a different reason entirely\n</think>";
  auto violations = validate_record(rec);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].rule == "conflict-reason-divergence");
  CHECK(violations[0].severity == Severity::kWarning);
  CHECK_FALSE(has_errors(violations));
}

TEST_CASE("validate_record: word bounds follow the profile") {
  QueryRecord rec = testsupport::make_annotated_record("#0012");
  std::string long_reason;
  for (int i = 0; i < 70; ++i) long_reason += "word ";
  rec.per_doc_notes->at(0).verdict_reason = long_reason;
  CHECK(has_rule(validate_record(rec), "verdict-reason-too-long"));
  CHECK_FALSE(has_rule(validate_record(rec, inference_limits()), "verdict-reason-too-long"));
}

TEST_CASE("validate_record is deterministic and order-stable") {
  QueryRecord rec = testsupport::make_annotated_record("#0009");
  rec.retrieved_docs[1].doc_id = "d5";
  rec.per_doc_notes->at(1).doc_id = "d5";
  rec.per_doc_notes->at(0).verdict = "maybe";
  auto a = validate_record(rec);
  auto b = validate_record(rec);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].rule == b[i].rule);
    CHECK(a[i].field == b[i].field);
  }
}

TEST_CASE("serialization round-trip is identity on conformant records") {
  SplitMix64 rng(2024);
  for (int i = 0; i < 50; ++i) {
    QueryRecord rec = testsupport::random_record(rng);
    ojson j = record_to_json(rec);
    QueryRecord back = record_from_json(j);
    CHECK(records_equal(rec, back));
    CHECK(record_to_json(back) == j);
  }
}

TEST_CASE("unknown extra fields survive a round-trip") {
  ojson j = ojson::parse(R"({
    "id": "#0042", "query": "q?",
    "retrieved_docs": [{"doc_id": "d1", "title": "t", "source": "s.com",
                        "snippet": "body text", "timestamp": "2023-01-02",
                        "crawler_score": 0.93}],
    "conflict_type": "No conflict",
    "surprise": {"nested": [1, 2, 3]}
  })");
  QueryRecord rec = record_from_json(j);
  CHECK(rec.extra.contains("surprise"));
  CHECK(rec.retrieved_docs[0].extra.contains("crawler_score"));
  ojson out = record_to_json(rec);
  CHECK(out["surprise"] == j["surprise"]);
  CHECK(out["retrieved_docs"][0]["crawler_score"] == j["retrieved_docs"][0]["crawler_score"]);
}

TEST_CASE("absent timestamp stays absent, never an empty string") {
  QueryRecord rec = testsupport::make_annotated_record("#0010");
  rec.retrieved_docs[0].timestamp.reset();
  ojson j = record_to_json(rec);
  CHECK_FALSE(j["retrieved_docs"][0].contains("timestamp"));
  QueryRecord back = record_from_json(j);
  CHECK_FALSE(back.retrieved_docs[0].timestamp.has_value());
}

TEST_CASE("citation markers") {
  auto cites = citation_markers("A [d1]. B [d3][d1], C [x2] [d12]");
  REQUIRE(cites.size() == 4);
  CHECK(cites[0] == "d1");
  CHECK(cites[1] == "d3");
  CHECK(cites[2] == "d1");
  CHECK(cites[3] == "d12");
}

TEST_CASE("date parsing table") {
  CHECK(parse_date_to_iso("March 5, 2023") == "2023-03-05");
  CHECK(parse_date_to_iso("5 March 2023") == "2023-03-05");
  CHECK(parse_date_to_iso("2023-03-05T12:30:00Z") == "2023-03-05");
  CHECK(parse_date_to_iso("2023/03/05") == "2023-03-05");
  CHECK(parse_date_to_iso("03/05/2023") == "2023-03-05");
  CHECK(parse_date_to_iso("March 2023") == "2023-03");
  CHECK(parse_date_to_iso("2023") == "2023");
  CHECK_FALSE(parse_date_to_iso("not a date").has_value());
  CHECK_FALSE(parse_date_to_iso("Feb 30, 2023").has_value());
}
