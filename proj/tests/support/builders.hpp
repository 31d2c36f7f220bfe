#pragma once

// Shared record builders for the test suites.

#include <string>
#include <vector>

#include "cats/schema.hpp"
#include "cats/util.hpp"

namespace testsupport {

using namespace cats;

// Two-doc annotated record that satisfies every schema invariant.
inline QueryRecord make_annotated_record(const std::string& id) {
  QueryRecord rec;
  rec.id = id;
  rec.query = "What is the capital of France?";

  RetrievedDoc d1;
  d1.doc_id = "d1";
  d1.title = "France overview";
  d1.source = "britannica.com";
  d1.snippet = "Paris is the capital of France and its largest city.";
  d1.timestamp = "2023-03-05";

  RetrievedDoc d2;
  d2.doc_id = "d2";
  d2.title = "European capitals";
  d2.source = "travelblog.net";
  d2.snippet = "The capital of France is Paris, famous for the Eiffel Tower.";
  d2.timestamp = "2021-07-12";

  rec.retrieved_docs = {d1, d2};

  PerDocNote n1;
  n1.doc_id = "d1";
  n1.verdict = "supports";
  n1.verdict_reason = "Names Paris as the capital directly.";
  n1.key_fact = "Paris is the capital of France.";
  n1.quote = "Paris is the capital of France";
  n1.source_quality = "high";

  PerDocNote n2;
  n2.doc_id = "d2";
  n2.verdict = "supports";
  n2.verdict_reason = "Also states the capital.";
  n2.key_fact = "The capital of France is Paris.";
  n2.quote = "The capital of France is Paris";
  n2.source_quality = "low";

  rec.per_doc_notes = std::vector<PerDocNote>{n1, n2};
  rec.conflict_type = ConflictType(ConflictLabel::kNoConflict);
  rec.conflict_type_raw = rec.conflict_type->label();
  rec.conflict_reason = "Both documents agree that Paris is the capital.";
  rec.gold_answer = "Paris";

  ExpectedResponse er;
  er.answer = "Paris is the capital of France [d1][d2].";
  er.evidence = {"d1", "d2"};
  er.abstain = false;
  rec.expected_response = er;

  rec.think =
      "<think>\n"
      "[\n"
      "  {\"doc_id\":\"d1\",\"verdict\":\"supports\",\"verdict_reason\":\"Names Paris as the "
      "capital directly.\",\"key_fact\":\"Paris is the capital of France.\","
      "\"source_quality\":\"high\"},\n"
      "  {\"doc_id\":\"d2\",\"verdict\":\"supports\",\"verdict_reason\":\"Also states the "
      "capital.\",\"key_fact\":\"The capital of France is Paris.\","
      "\"source_quality\":\"low\"}\n"
      "]\n"
      "d1 and d2 agree on the same fact; the mechanism is simple agreement.\n"
      "No conflict — Both documents agree that Paris is the capital.\n"
      "Both supporting documents state the answer outright, so it can be given directly.\n"
      "</think>";

  rec.metadata.category = "factual";
  rec.metadata.domain = "encyclopedic";
  return rec;
}

// Seeded conformant record generator for round-trip properties.
inline QueryRecord random_record(SplitMix64& rng) {
  const char* words[] = {"alpha", "beta",  "gamma", "delta", "sigma",
                         "omega", "lunar", "tidal", "vexed", "quartz"};
  auto word = [&]() { return std::string(words[rng.next_below(10)]); };
  auto sentence = [&](size_t n) {
    std::string s;
    for (size_t i = 0; i < n; ++i) {
      if (i) s += " ";
      s += word();
    }
    return s + ".";
  };

  QueryRecord rec;
  rec.id = "#" + std::to_string(1000 + rng.next_below(9000));
  rec.query = "What is " + word() + "?";

  size_t n_docs = 1 + rng.next_below(4);
  bool abstain = rng.next_below(5) == 0;
  std::vector<PerDocNote> notes;
  for (size_t i = 0; i < n_docs; ++i) {
    RetrievedDoc d;
    d.doc_id = "d" + std::to_string(i + 1);
    d.title = word() + " " + word();
    d.source = word() + ".com";
    d.snippet = sentence(8) + " " + sentence(6);
    if (rng.next_below(3) != 0) {
      d.timestamp = "20" + std::to_string(10 + rng.next_below(15)) + "-03-0" +
                    std::to_string(1 + rng.next_below(9));
    }
    rec.retrieved_docs.push_back(d);

    PerDocNote n;
    n.doc_id = d.doc_id;
    n.verdict = abstain ? "irrelevant"
                        : (rng.next_below(3) == 0 ? "partially supports" : "supports");
    n.verdict_reason = sentence(5);
    n.key_fact = n.verdict == "irrelevant" ? "" : sentence(4);
    if (n.verdict != "irrelevant") n.quote = d.snippet.substr(0, 11);
    n.source_quality = rng.next_below(2) ? "high" : "low";
    notes.push_back(n);
  }
  rec.per_doc_notes = notes;

  rec.conflict_type = ConflictType(static_cast<ConflictLabel>(rng.next_below(5)));
  rec.conflict_type_raw = rec.conflict_type->label();
  rec.conflict_reason = sentence(6);

  ExpectedResponse er;
  er.abstain = abstain;
  if (!abstain) {
    er.answer = sentence(5);
    er.answer.pop_back();
    er.answer += " [d1].";
    er.evidence = {"d1"};
  } else {
    er.abstain_reason = sentence(4);
  }
  rec.expected_response = er;

  if (rng.next_below(2)) {
    rec.metadata.category = word();
    rec.metadata.domain = "other";
  }
  return rec;
}

}  // namespace testsupport
