#include <doctest.h>

#include <set>

#include "cats/prompts.hpp"
#include "cats/util.hpp"
#include "support/builders.hpp"

using namespace cats;

namespace {

const PromptLibrary& library() {
  static PromptLibrary lib = PromptLibrary::load();
  return lib;
}

}  // namespace

TEST_CASE("render_template: placeholders resolve, braces pass through") {
  std::string out = render_template("Q: {query} J: {\"k\":1} D: {query}", {{"query", "x"}});
  CHECK(out == "Q: x J: {\"k\":1} D: x");

  CHECK_THROWS_AS(render_template("hello {name}", {}), PromptError);
  CHECK_THROWS_AS(render_template("hello", {{"name", "x"}}), PromptError);
}

TEST_CASE("scan_placeholders ignores non-identifier braces") {
  auto names = scan_placeholders("{a} {\"json\":2} {a} {b_c} {1x} {{d}}");
  REQUIRE(names.size() == 3);
  CHECK(names[0] == "a");
  CHECK(names[1] == "b_c");
  CHECK(names[2] == "d");  // inner braces of {{d}} carry an identifier
}

TEST_CASE("template integrity: checksums match the pinned manifest") {
  CHECK(library().verify_manifest().empty());
}

TEST_CASE("placeholder closure: template placeholders equal the resolved set") {
  struct Case {
    PromptMode mode;
    std::vector<std::string> expected;  // union over system+user
  };
  const Case cases[] = {
      {PromptMode::kOracle, {"query", "retrieved_docs", "per_doc_notes", "conflict_type"}},
      {PromptMode::kEndToEnd, {"query", "retrieved_docs", "per_doc_notes"}},
      {PromptMode::kStage1, {"query", "retrieved_docs"}},
      {PromptMode::kStage2, {"query", "per_doc_notes", "conflict_type"}},
      {PromptMode::kStage3,
       {"query", "retrieved_docs", "per_doc_notes", "conflict_type", "conflict_reason"}},
      {PromptMode::kJudgeBehavior, {"conflict_type", "behavior_rubric", "query", "answer"}},
      {PromptMode::kJudgeEntailment, {"premise", "hypothesis"}},
      {PromptMode::kJudgeRecall, {"gold_answer", "candidate_answer"}},
  };
  for (const auto& c : cases) {
    CAPTURE(to_string(c.mode));
    std::set<std::string> in_template;
    for (bool system : {true, false}) {
      for (const auto& n : scan_placeholders(library().text(c.mode, system))) {
        in_template.insert(n);
      }
    }
    std::set<std::string> expected(c.expected.begin(), c.expected.end());
    CHECK(in_template == expected);
  }
}

TEST_CASE("oracle render carries exactly one gold-label span") {
  QueryRecord rec = testsupport::make_annotated_record("#0001");
  auto bundle = library().build_inference_prompt(rec, PromptMode::kOracle);
  CHECK(count_tag_spans_equal(bundle.user, "CONFLICT_LABEL", "No conflict") == 1);
  CHECK(contains(bundle.user, "<CONFLICT_LABEL>No conflict</CONFLICT_LABEL>"));
  CHECK(bundle.mode == PromptMode::kOracle);
}

TEST_CASE("end-to-end render has no gold-label tag") {
  QueryRecord rec = testsupport::make_annotated_record("#0001");
  auto bundle = library().build_inference_prompt(rec, PromptMode::kEndToEnd);
  CHECK_FALSE(contains(bundle.user, "<CONFLICT_LABEL>"));
  CHECK_FALSE(contains(bundle.system, "<CONFLICT_LABEL>"));
}

TEST_CASE("inference render is deterministic") {
  QueryRecord rec = testsupport::make_annotated_record("#0001");
  auto a = library().build_inference_prompt(rec, PromptMode::kOracle);
  auto b = library().build_inference_prompt(rec, PromptMode::kOracle);
  CHECK(a.system == b.system);
  CHECK(a.user == b.user);
}

TEST_CASE("notes profile: included or explicitly withheld") {
  QueryRecord rec = testsupport::make_annotated_record("#0001");
  PromptLibrary::InferenceProfile withheld{false};
  PromptLibrary::InferenceProfile included{true};

  auto without = library().build_inference_prompt(rec, PromptMode::kEndToEnd, withheld);
  CHECK(contains(without.user, std::string(kNotesNotProvided)));
  CHECK_FALSE(contains(without.user, "\"verdict\":\"supports\""));

  auto with = library().build_inference_prompt(rec, PromptMode::kEndToEnd, included);
  CHECK(contains(with.user, "\"verdict\":\"supports\""));
}

TEST_CASE("doc serialization: labeled block per doc in d1..dN order") {
  QueryRecord rec = testsupport::make_annotated_record("#0001");
  std::string docs = serialize_docs(rec.retrieved_docs);
  CHECK(contains(docs, "[d1] title=France overview"));
  CHECK(contains(docs, "source=britannica.com"));
  CHECK(contains(docs, "timestamp=2023-03-05"));
  CHECK(docs.find("[d1]") < docs.find("[d2]"));

  rec.retrieved_docs[0].timestamp.reset();
  CHECK(contains(serialize_docs(rec.retrieved_docs), "timestamp=unknown"));
}

TEST_CASE("oracle mode requires gold label and docs") {
  QueryRecord rec = testsupport::make_annotated_record("#0001");
  rec.conflict_type.reset();
  CHECK_THROWS_AS(library().build_inference_prompt(rec, PromptMode::kOracle), PromptError);

  QueryRecord empty = testsupport::make_annotated_record("#0002");
  empty.retrieved_docs.clear();
  CHECK_THROWS_AS(library().build_inference_prompt(empty, PromptMode::kEndToEnd), PromptError);
}

TEST_CASE("annotation prompts: stage prerequisites enforced") {
  QueryRecord rec = testsupport::make_annotated_record("#0001");
  auto s1 = library().build_annotation_prompt(rec, 1);
  CHECK(contains(s1.user, "[d1] title="));
  CHECK(s1.mode == PromptMode::kStage1);

  CHECK_THROWS_AS(library().build_annotation_prompt(rec, 2), PromptError);

  PromptLibrary::PriorStages prior;
  prior.notes = rec.per_doc_notes;
  auto s2 = library().build_annotation_prompt(rec, 2, prior);
  CHECK(contains(s2.user, "<CONFLICT_LABEL>No conflict</CONFLICT_LABEL>"));
  CHECK(contains(s2.system, "No additional"));

  CHECK_THROWS_AS(library().build_annotation_prompt(rec, 3, prior), PromptError);
  prior.conflict_reason = rec.conflict_reason;
  auto s3 = library().build_annotation_prompt(rec, 3, prior);
  CHECK(contains(s3.user, rec.conflict_reason));
}

TEST_CASE("stage 2 embeds every note") {
  QueryRecord rec = testsupport::make_annotated_record("#0001");
  while (rec.retrieved_docs.size() < 9) {
    RetrievedDoc d = rec.retrieved_docs[0];
    d.doc_id = "d" + std::to_string(rec.retrieved_docs.size() + 1);
    rec.retrieved_docs.push_back(d);
    PerDocNote n = rec.per_doc_notes->at(0);
    n.doc_id = d.doc_id;
    rec.per_doc_notes->push_back(n);
  }
  PromptLibrary::PriorStages prior;
  prior.notes = rec.per_doc_notes;
  auto s2 = library().build_annotation_prompt(rec, 2, prior);
  for (int i = 1; i <= 9; ++i) {
    CHECK(contains(s2.user, "\"doc_id\":\"d" + std::to_string(i) + "\""));
  }
}

TEST_CASE("judge prompts: rubric table and kinds") {
  PromptLibrary::JudgeInputs inputs;
  inputs.query = "q";
  inputs.answer = "a";
  inputs.conflict_type = ConflictType(ConflictLabel::kOutdated);
  auto behavior = library().build_judge_prompt(PromptMode::kJudgeBehavior, inputs);
  CHECK(contains(behavior.user, "Prioritize newer, verified information"));

  PromptLibrary::JudgeInputs ent;
  ent.premise = "Bologna hosts the oldest university.";
  ent.hypothesis = "The University of Bologna is the oldest.";
  auto entailment = library().build_judge_prompt(PromptMode::kJudgeEntailment, ent);
  CHECK(contains(entailment.system, "Do not add knowledge"));
  CHECK(contains(entailment.user, ent.premise));

  PromptLibrary::JudgeInputs rec;
  rec.gold = "Bologna";
  rec.candidate = "The University of Bologna";
  auto recall = library().build_judge_prompt(PromptMode::kJudgeRecall, rec);
  CHECK(contains(recall.user, "Bologna"));

  PromptLibrary::JudgeInputs missing;
  missing.query = "q";
  missing.answer = "a";
  CHECK_THROWS_AS(library().build_judge_prompt(PromptMode::kJudgeBehavior, missing),
                  PromptError);
}

TEST_CASE("bundles export as JSONL rows") {
  QueryRecord rec = testsupport::make_annotated_record("#0001");
  auto bundle = library().build_inference_prompt(rec, PromptMode::kEndToEnd);
  ojson j = bundle.to_json("#0001");
  CHECK(j["record_id"] == "#0001");
  CHECK(j["mode"] == "end_to_end");
  CHECK(j["system"] == bundle.system);
}
