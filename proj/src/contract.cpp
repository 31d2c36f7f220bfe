#include "cats/contract.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "cats/util.hpp"

namespace cats {

std::string_view to_string(DiagCode code) {
  switch (code) {
    case DiagCode::kMissingSentinel: return "missing-sentinel";
    case DiagCode::kNoThinkBlock: return "no-think-block";
    case DiagCode::kMultipleThinkOpen: return "multiple-think-open";
    case DiagCode::kNestedThink: return "nested-think";
    case DiagCode::kPreambleText: return "preamble-text";
    case DiagCode::kVerdictArrayMissing: return "verdict-array-missing";
    case DiagCode::kVerdictArrayInvalidJson: return "verdict-array-invalid-json";
    case DiagCode::kTrailingComma: return "trailing-comma";
    case DiagCode::kDocIdRange: return "doc-id-range";
    case DiagCode::kDocIdGap: return "doc-id-gap";
    case DiagCode::kDocIdDuplicate: return "doc-id-duplicate";
    case DiagCode::kDocIdOrder: return "doc-id-order";
    case DiagCode::kDocIdFabricated: return "doc-id-fabricated";
    case DiagCode::kVerdictOutOfLexicon: return "verdict-out-of-lexicon";
    case DiagCode::kSourceQualityOutOfLexicon: return "source-quality-out-of-lexicon";
    case DiagCode::kKeyFactOnIrrelevant: return "key-fact-on-irrelevant";
    case DiagCode::kMissingLabelLine: return "missing-label-line";
    case DiagCode::kMissingDash: return "missing-dash";
    case DiagCode::kWrongDashEnDash: return "wrong-dash-en-dash";
    case DiagCode::kWrongDashHyphen: return "wrong-dash-hyphen";
    case DiagCode::kLabelOutOfLexicon: return "label-out-of-lexicon";
    case DiagCode::kMultipleLabelLines: return "multiple-label-lines";
    case DiagCode::kMissingBlankLine: return "missing-blank-line";
    case DiagCode::kMissingFinalAnswer: return "missing-final-answer";
    case DiagCode::kCitationOutOfBounds: return "citation-out-of-bounds";
    case DiagCode::kCitationMalformed: return "citation-malformed";
    case DiagCode::kCitedWhileAbstaining: return "cited-while-abstaining";
    case DiagCode::kAbstainExtraText: return "abstain-extra-text";
    case DiagCode::kUncitedSentence: return "uncited-sentence";
    case DiagCode::kAnswerLength: return "answer-length";
    case DiagCode::kWordLimit: return "word-limit";
  }
  return "unknown";
}

DiagTier tier_for(DiagCode code) {
  switch (code) {
    case DiagCode::kUncitedSentence:
    case DiagCode::kAnswerLength:
    case DiagCode::kWordLimit:
      return DiagTier::kLenient;
    default:
      return DiagTier::kStrict;
  }
}

bool ParsedOutput::has_diag(DiagCode code) const {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [&](const Diagnostic& d) { return d.code == code; });
}

size_t ParsedOutput::strict_diag_count() const {
  return static_cast<size_t>(
      std::count_if(diagnostics.begin(), diagnostics.end(),
                    [](const Diagnostic& d) { return d.tier == DiagTier::kStrict; }));
}

bool ParsedOutput::strictly_valid() const {
  return !unparseable && strict_diag_count() == 0;
}

// ---------------------------------------------------------------------------
// sanitize
// ---------------------------------------------------------------------------

SanitizeResult sanitize(std::string_view raw) {
  std::string lf;
  lf.reserve(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\r') {
      if (i + 1 >= raw.size() || raw[i + 1] != '\n') lf.push_back('\n');
      continue;
    }
    lf.push_back(raw[i]);
  }

  auto lines = split_lines(lf);
  SanitizeResult result;
  size_t cut = lines.size();
  for (size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]) == kEndOfAnswerSentinel) {
      cut = i;
      result.sentinel_found = true;
      break;
    }
  }
  lines.resize(cut);

  size_t first = 0, last = lines.size();
  while (first < last && trim(lines[first]).empty()) ++first;
  while (last > first && trim(lines[last - 1]).empty()) --last;

  std::string out;
  for (size_t i = first; i < last; ++i) {
    if (i > first) out.push_back('\n');
    out += lines[i];
  }
  result.text = std::move(out);
  return result;
}

// ---------------------------------------------------------------------------
// Sentences and citations
// ---------------------------------------------------------------------------

namespace {

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

// Matches a citation token "[d<digits>]" at `pos`; returns one past ']'.
size_t match_citation_token(std::string_view text, size_t pos, std::string* inner) {
  if (pos >= text.size() || text[pos] != '[') return pos;
  size_t j = pos + 1;
  if (j >= text.size() || text[j] != 'd') return pos;
  ++j;
  size_t digits_start = j;
  while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
  if (j == digits_start || j >= text.size() || text[j] != ']') return pos;
  if (inner) *inner = std::string(text.substr(pos + 1, j - pos - 1));
  return j + 1;
}

}  // namespace

std::vector<Sentence> split_sentences(std::string_view text) {
  std::vector<Sentence> sentences;
  size_t start = 0;
  size_t i = 0;
  auto flush = [&](size_t end) {
    std::string body = trim(text.substr(start, end - start));
    if (!body.empty()) sentences.push_back(Sentence{std::move(body), start, end});
    start = end;
  };
  while (i < text.size()) {
    if (is_terminal(text[i])) {
      size_t j = i;
      while (j < text.size() && is_terminal(text[j])) ++j;
      bool boundary = j >= text.size() ||
                      std::isspace(static_cast<unsigned char>(text[j]));
      if (boundary) {
        // Citations directly after the punctuation attach to this sentence.
        size_t k = j;
        while (true) {
          size_t ws = k;
          while (ws < text.size() && text[ws] == ' ') ++ws;
          size_t next = match_citation_token(text, ws, nullptr);
          if (next == ws) break;
          k = next;
        }
        flush(k);
        while (start < text.size() &&
               std::isspace(static_cast<unsigned char>(text[start]))) {
          ++start;
        }
        i = start;
        continue;
      }
    }
    ++i;
  }
  if (start < text.size()) flush(text.size());
  return sentences;
}

CitationScan extract_citations(std::string_view answer, int n_docs, bool abstaining) {
  CitationScan scan;
  for (size_t i = 0; i < answer.size(); ++i) {
    if (answer[i] != '[') continue;
    std::string inner;
    size_t next = match_citation_token(answer, i, &inner);
    if (next == i) continue;
    std::string_view digits = std::string_view(inner).substr(1);
    if (digits.size() > 1 && digits[0] == '0') {
      scan.diagnostics.push_back(Diagnostic{
          DiagCode::kCitationMalformed,
          "citation [" + inner + "] has a leading zero", i, next,
          tier_for(DiagCode::kCitationMalformed)});
      i = next - 1;
      continue;
    }
    scan.citations.push_back(inner);
    long idx = std::strtol(std::string(digits).c_str(), nullptr, 10);
    if (idx < 1 || idx > n_docs) {
      scan.diagnostics.push_back(Diagnostic{
          DiagCode::kCitationOutOfBounds,
          "citation [" + inner + "] is outside d1..d" + std::to_string(n_docs), i, next,
          tier_for(DiagCode::kCitationOutOfBounds)});
    }
    i = next - 1;
  }

  if (!abstaining) {
    for (const auto& sentence : split_sentences(answer)) {
      if (citation_markers(sentence.text).empty()) {
        scan.diagnostics.push_back(Diagnostic{
            DiagCode::kUncitedSentence,
            "sentence lacks a [dX] citation: \"" + sentence.text + "\"", sentence.begin,
            sentence.end, tier_for(DiagCode::kUncitedSentence)});
      }
    }
  }
  return scan;
}

// ---------------------------------------------------------------------------
// parse_output
// ---------------------------------------------------------------------------

namespace {

struct Line {
  std::string text;
  size_t begin;
  size_t end;
};

std::vector<Line> index_lines(std::string_view s) {
  std::vector<Line> lines;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '\n') {
      lines.push_back(Line{std::string(s.substr(start, i - start)), start, i});
      start = i + 1;
    }
  }
  return lines;
}

void diag(ParsedOutput& out, DiagCode code, std::string message, size_t begin = 0,
          size_t end = 0) {
  out.diagnostics.push_back(Diagnostic{code, std::move(message), begin, end, tier_for(code)});
}

// Balanced-bracket scan for the verdict array, skipping string literals.
std::optional<std::pair<size_t, size_t>> find_array_span(std::string_view body) {
  size_t open = body.find('[');
  if (open == std::string_view::npos) return std::nullopt;
  int depth = 0;
  bool in_string = false;
  for (size_t i = open; i < body.size(); ++i) {
    char c = body[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[') {
      ++depth;
    } else if (c == ']') {
      --depth;
      if (depth == 0) return std::make_pair(open, i + 1);
    }
  }
  return std::make_pair(open, body.size());  // unbalanced; parse will flag it
}

std::string strip_trailing_commas(std::string_view text, bool* changed) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < text.size()) {
        out.push_back(text[++i]);
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    if (c == ',') {
      size_t j = i + 1;
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && (text[j] == ']' || text[j] == '}')) {
        if (changed) *changed = true;
        continue;  // drop the comma
      }
    }
    out.push_back(c);
  }
  return out;
}

bool find_doc_id_range_token(std::string_view text, size_t* pos) {
  for (size_t i = 0; i + 3 < text.size(); ++i) {
    if (text[i] != 'd' || !std::isdigit(static_cast<unsigned char>(text[i + 1]))) continue;
    size_t j = i + 1;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    size_t dash_len = 0;
    if (j < text.size() && text[j] == '-') {
      dash_len = 1;
    } else if (j + 2 < text.size() && text.substr(j, 3) == kEnDash) {
      dash_len = 3;
    } else if (j + 2 < text.size() && text.substr(j, 3) == kEmDash) {
      dash_len = 3;
    }
    if (dash_len == 0) continue;
    size_t k = j + dash_len;
    if (k + 1 < text.size() && text[k] == 'd' &&
        std::isdigit(static_cast<unsigned char>(text[k + 1]))) {
      if (pos) *pos = i;
      return true;
    }
  }
  return false;
}

std::string json_field(const ojson& obj, const char* key) {
  if (obj.contains(key) && obj[key].is_string()) return obj[key].get<std::string>();
  return {};
}

struct LabelCandidate {
  size_t line_index;
  std::string prefix;
  std::string reason;
  std::optional<DiagCode> dash_diag;  // set when a fallback separator matched
  bool in_lexicon = false;
};

// A label line is short; prose lines with dashes are not mistaken for it.
constexpr size_t kMaxLabelWords = 6;

std::optional<LabelCandidate> match_label_line(const std::string& line, size_t index) {
  struct Sep {
    std::string_view token;
    std::optional<DiagCode> diag;
  };
  static const Sep kSeps[] = {
      {" — ", std::nullopt},
      {"—", std::nullopt},
      {" – ", DiagCode::kWrongDashEnDash},
      {" - ", DiagCode::kWrongDashHyphen},
  };
  for (const auto& sep : kSeps) {
    size_t pos = line.find(sep.token);
    if (pos == std::string::npos) continue;
    std::string prefix = trim(line.substr(0, pos));
    if (prefix.empty() || word_count(prefix) > kMaxLabelWords) continue;
    LabelCandidate cand;
    cand.line_index = index;
    cand.prefix = prefix;
    cand.reason = trim(line.substr(pos + sep.token.size()));
    cand.dash_diag = sep.diag;
    cand.in_lexicon = conflict_from_text(prefix).has_value();
    return cand;
  }
  // Known label at the start of the line but no separator at all.
  std::string loose = normalize_loose(line);
  for (const auto& label : ConflictType::labels()) {
    std::string ll = normalize_loose(label);
    bool prefix_match =
        loose == ll || (starts_with(loose, ll) &&
                        !std::isalnum(static_cast<unsigned char>(loose[ll.size()])));
    if (prefix_match) {
      LabelCandidate cand;
      cand.line_index = index;
      cand.prefix = trim(line).substr(0, label.size());
      cand.reason = trim(line.size() > label.size() ? trim(line).substr(label.size()) : "");
      cand.dash_diag = DiagCode::kMissingDash;
      cand.in_lexicon = true;
      return cand;
    }
  }
  return std::nullopt;
}

}  // namespace

ParsedOutput parse_output(std::string_view sanitized, int n_docs) {
  ParsedOutput out;
  auto lines = index_lines(sanitized);

  // Delimit the think block.
  std::optional<size_t> open_line, close_line;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i].text) == kThinkOpen) {
      open_line = i;
      break;
    }
  }
  if (!open_line) {
    // Lenient fallback: an opening tag embedded in a line.
    for (size_t i = 0; i < lines.size(); ++i) {
      if (contains(lines[i].text, kThinkOpen)) {
        open_line = i;
        break;
      }
    }
  }
  if (open_line) {
    for (size_t i = *open_line + 1; i < lines.size(); ++i) {
      if (trim(lines[i].text) == kThinkClose || contains(lines[i].text, kThinkClose)) {
        close_line = i;
        break;
      }
    }
  }

  if (!open_line || !close_line) {
    out.unparseable = true;
    diag(out, DiagCode::kNoThinkBlock,
         !open_line ? "no <think> block could be delimited"
                    : "<think> block is never closed",
         0, sanitized.size());
    // Sentinel-exact abstention detection still applies to the raw tail.
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
      if (trim(it->text).empty()) continue;
      out.abstain = it->text == kAbstainSentinel;
      break;
    }
    return out;
  }

  out.has_think_block = true;
  size_t body_begin = lines[*open_line].end + 1;
  size_t body_end = lines[*close_line].begin;
  if (body_begin > body_end) body_begin = body_end;
  out.think_body = std::string(sanitized.substr(body_begin, body_end - body_begin));

  // The opening tag must appear exactly once, and never inside the block.
  size_t scan = 0;
  int opens_inside = 0, opens_outside = 0;
  size_t open_tag_pos = lines[*open_line].begin;
  while ((scan = sanitized.find(kThinkOpen, scan)) != std::string_view::npos) {
    if (scan != open_tag_pos + lines[*open_line].text.find(kThinkOpen)) {
      if (scan >= body_begin && scan < body_end) {
        ++opens_inside;
      } else {
        ++opens_outside;
      }
    }
    scan += kThinkOpen.size();
  }
  if (opens_inside > 0) {
    diag(out, DiagCode::kNestedThink, "the literal string <think> appears inside the block",
         body_begin, body_end);
  }
  if (opens_outside > 0) {
    diag(out, DiagCode::kMultipleThinkOpen, "<think> appears more than once", 0,
         sanitized.size());
  }

  for (size_t i = 0; i < *open_line; ++i) {
    if (!trim(lines[i].text).empty()) {
      diag(out, DiagCode::kPreambleText, "text precedes the <think> block", lines[i].begin,
           lines[*open_line].begin);
      break;
    }
  }

  // --- Verdict array ---
  auto span = find_array_span(out.think_body);
  size_t array_end_in_body = 0;
  if (!span) {
    diag(out, DiagCode::kVerdictArrayMissing, "no JSON verdict array inside the think block",
         body_begin, body_end);
  } else {
    size_t abs_begin = body_begin + span->first;
    size_t abs_end = body_begin + span->second;
    std::string array_text = out.think_body.substr(span->first, span->second - span->first);
    array_end_in_body = span->second;

    size_t range_pos = 0;
    if (find_doc_id_range_token(array_text, &range_pos)) {
      diag(out, DiagCode::kDocIdRange, "doc-id range written inside the verdict array",
           abs_begin + range_pos, abs_end);
    }

    ojson parsed = ojson::parse(array_text, nullptr, false);
    if (parsed.is_discarded()) {
      bool stripped = false;
      std::string repaired = strip_trailing_commas(array_text, &stripped);
      if (stripped) {
        parsed = ojson::parse(repaired, nullptr, false);
        if (!parsed.is_discarded()) {
          diag(out, DiagCode::kTrailingComma, "trailing comma inside the verdict array",
               abs_begin, abs_end);
        }
      }
    }

    if (parsed.is_discarded() || !parsed.is_array() ||
        std::any_of(parsed.begin(), parsed.end(),
                    [](const ojson& e) { return !e.is_object(); })) {
      diag(out, DiagCode::kVerdictArrayInvalidJson,
           "verdict array is not syntactically valid JSON", abs_begin, abs_end);
    } else {
      out.verdict_array_valid = true;
      for (const auto& entry : parsed) {
        VerdictEntry v;
        v.doc_id = json_field(entry, "doc_id");
        if (v.doc_id.empty()) v.doc_id = json_field(entry, "id");
        v.verdict = json_field(entry, "verdict");
        v.verdict_reason = json_field(entry, "verdict_reason");
        v.key_fact = json_field(entry, "key_fact");
        v.source_quality = json_field(entry, "source_quality");
        out.verdicts.push_back(std::move(v));
      }

      // Doc-id discipline: d1..dN, in order, no gaps/dupes/fabrications.
      std::vector<int> indices;
      bool fabricated = false;
      for (const auto& v : out.verdicts) {
        auto idx = doc_id_index(v.doc_id);
        if (!idx || *idx > n_docs) {
          diag(out, DiagCode::kDocIdFabricated,
               "verdict entry names unknown doc '" + v.doc_id + "'", abs_begin, abs_end);
          fabricated = true;
          continue;
        }
        indices.push_back(*idx);
      }
      std::vector<int> sorted = indices;
      std::sort(sorted.begin(), sorted.end());
      bool dup = std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
      if (dup) {
        diag(out, DiagCode::kDocIdDuplicate, "duplicate doc_id in the verdict array",
             abs_begin, abs_end);
      } else if (!std::is_sorted(indices.begin(), indices.end())) {
        diag(out, DiagCode::kDocIdOrder, "verdict array is not in d1..dN order", abs_begin,
             abs_end);
      }
      if (!fabricated && !dup) {
        std::vector<int> expected(static_cast<size_t>(n_docs));
        for (int i = 0; i < n_docs; ++i) expected[static_cast<size_t>(i)] = i + 1;
        if (sorted != expected) {
          std::string missing;
          size_t si = 0;
          for (int want = 1; want <= n_docs; ++want) {
            while (si < sorted.size() && sorted[si] < want) ++si;
            if (si >= sorted.size() || sorted[si] != want) {
              if (!missing.empty()) missing += ", ";
              missing += "d" + std::to_string(want);
            }
          }
          diag(out, DiagCode::kDocIdGap,
               "verdict array does not cover d1..d" + std::to_string(n_docs) +
                   (missing.empty() ? "" : " (missing " + missing + ")"),
               abs_begin, abs_end);
        }
      }

      for (const auto& v : out.verdicts) {
        if (!is_known_verdict(v.verdict)) {
          diag(out, DiagCode::kVerdictOutOfLexicon,
               "verdict '" + v.verdict + "' for " + v.doc_id + " is out of lexicon",
               abs_begin, abs_end);
        }
        if (v.source_quality != "high" && v.source_quality != "low") {
          diag(out, DiagCode::kSourceQualityOutOfLexicon,
               "source_quality '" + v.source_quality + "' for " + v.doc_id +
                   " is not high/low",
               abs_begin, abs_end);
        }
        if (v.verdict == kVerdictIrrelevant && !v.key_fact.empty()) {
          diag(out, DiagCode::kKeyFactOnIrrelevant,
               "key_fact must be empty when " + v.doc_id + " is irrelevant", abs_begin,
               abs_end);
        }
        if (word_count(v.verdict_reason) > inference_limits().verdict_reason_max) {
          diag(out, DiagCode::kWordLimit, "verdict_reason for " + v.doc_id + " exceeds 80 words",
               abs_begin, abs_end);
        }
        if (word_count(v.key_fact) > inference_limits().key_fact_max) {
          diag(out, DiagCode::kWordLimit, "key_fact for " + v.doc_id + " exceeds 80 words",
               abs_begin, abs_end);
        }
      }
    }
  }

  // --- Label line, analysis, bridge ---
  auto body_lines = index_lines(out.think_body);
  std::vector<LabelCandidate> candidates;
  for (size_t i = 0; i < body_lines.size(); ++i) {
    if (body_lines[i].begin < array_end_in_body) continue;
    if (auto cand = match_label_line(body_lines[i].text, i)) {
      candidates.push_back(std::move(*cand));
    }
  }
  const LabelCandidate* chosen = nullptr;
  for (const auto& c : candidates) {
    if (c.in_lexicon) {
      chosen = &c;
      break;
    }
  }
  if (!chosen && !candidates.empty()) chosen = &candidates[0];

  size_t lexicon_count = static_cast<size_t>(
      std::count_if(candidates.begin(), candidates.end(),
                    [](const LabelCandidate& c) { return c.in_lexicon; }));
  if (lexicon_count > 1) {
    diag(out, DiagCode::kMultipleLabelLines, "more than one label line in the think block",
         body_begin, body_end);
  }

  if (!chosen) {
    diag(out, DiagCode::kMissingLabelLine, "no label line found in the think block",
         body_begin, body_end);
    std::string tail = array_end_in_body < out.think_body.size()
                           ? out.think_body.substr(array_end_in_body)
                           : std::string();
    out.analysis = trim(tail);
  } else {
    const auto& line = body_lines[chosen->line_index];
    size_t abs_line_begin = body_begin + line.begin;
    size_t abs_line_end = body_begin + line.end;
    if (chosen->dash_diag) {
      const char* what = *chosen->dash_diag == DiagCode::kWrongDashEnDash
                             ? "label line uses an en dash instead of an em dash"
                         : *chosen->dash_diag == DiagCode::kWrongDashHyphen
                             ? "label line uses a hyphen instead of an em dash"
                             : "label line has no dash separator";
      diag(out, *chosen->dash_diag, what, abs_line_begin, abs_line_end);
    }
    out.conflict_label_raw = chosen->prefix;
    out.conflict_reason = chosen->reason;
    if (auto norm = conflict_from_text(chosen->prefix)) {
      out.conflict_label = norm->type;
    } else {
      diag(out, DiagCode::kLabelOutOfLexicon,
           "label '" + chosen->prefix + "' is not one of the five conflict types",
           abs_line_begin, abs_line_end);
    }
    std::string analysis, bridge;
    for (size_t i = 0; i < body_lines.size(); ++i) {
      if (body_lines[i].begin < array_end_in_body) continue;
      if (i == chosen->line_index) continue;
      std::string& target = i < chosen->line_index ? analysis : bridge;
      if (!target.empty()) target += "\n";
      target += body_lines[i].text;
    }
    out.analysis = trim(analysis);
    out.bridge = trim(bridge);
  }

  // --- Final answer after the closing tag ---
  size_t after = *close_line + 1;
  size_t first_content = after;
  while (first_content < lines.size() && trim(lines[first_content].text).empty()) {
    ++first_content;
  }
  if (first_content >= lines.size()) {
    diag(out, DiagCode::kMissingFinalAnswer, "no final answer after </think>",
         lines[*close_line].end, sanitized.size());
    return out;
  }
  if (first_content == after) {
    diag(out, DiagCode::kMissingBlankLine, "no blank line between </think> and the answer",
         lines[after].begin, lines[after].end);
  }

  size_t answer_begin = lines[first_content].begin;
  std::string answer_region = std::string(sanitized.substr(answer_begin));

  if (lines[first_content].text == kAbstainSentinel) {
    out.abstain = true;
    for (size_t i = first_content + 1; i < lines.size(); ++i) {
      std::string rest = trim(lines[i].text);
      if (rest.empty()) continue;
      // Lines that are nothing but citations are covered by the
      // cited-while-abstaining diagnostic below.
      std::string no_cites = rest;
      for (const auto& c : citation_markers(rest)) {
        size_t pos;
        while ((pos = no_cites.find("[" + c + "]")) != std::string::npos) {
          no_cites.erase(pos, c.size() + 2);
        }
      }
      if (!trim(no_cites).empty()) {
        diag(out, DiagCode::kAbstainExtraText, "text follows the abstention sentinel",
             lines[i].begin, sanitized.size());
        break;
      }
    }
    auto cites = citation_markers(answer_region);
    if (!cites.empty()) {
      out.citations = cites;
      diag(out, DiagCode::kCitedWhileAbstaining, "abstaining answer carries citations",
           answer_begin, sanitized.size());
    }
    return out;
  }

  out.final_answer = trim(answer_region);
  auto scan_result = extract_citations(out.final_answer, n_docs, false);
  out.citations = scan_result.citations;
  for (auto d : scan_result.diagnostics) {
    d.begin += answer_begin;
    d.end += answer_begin;
    out.diagnostics.push_back(std::move(d));
  }

  size_t n_sentences = split_sentences(out.final_answer).size();
  if (n_sentences > 5) {
    diag(out, DiagCode::kAnswerLength,
         "answer has " + std::to_string(n_sentences) + " sentences (contract allows at most 5)",
         answer_begin, sanitized.size());
  }

  return out;
}

ParsedOutput parse_completion(std::string_view raw, int n_docs) {
  SanitizeResult s = sanitize(raw);
  ParsedOutput out = parse_output(s.text, n_docs);
  if (!s.sentinel_found) {
    out.diagnostics.push_back(Diagnostic{DiagCode::kMissingSentinel,
                                         "completion lacks the end-of-answer sentinel", 0,
                                         s.text.size(),
                                         tier_for(DiagCode::kMissingSentinel)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

std::string emit_output(const ParsedOutput& out) {
  std::string text;
  text += kThinkOpen;
  text += "\n[\n";
  for (size_t i = 0; i < out.verdicts.size(); ++i) {
    const auto& v = out.verdicts[i];
    ojson j;
    j["doc_id"] = v.doc_id;
    j["verdict"] = v.verdict;
    j["verdict_reason"] = v.verdict_reason;
    j["key_fact"] = v.key_fact;
    j["source_quality"] = v.source_quality;
    text += "  " + j.dump();
    if (i + 1 < out.verdicts.size()) text += ",";
    text += "\n";
  }
  text += "]\n";
  if (!out.analysis.empty()) text += out.analysis + "\n";
  std::string label =
      out.conflict_label ? out.conflict_label->label() : out.conflict_label_raw;
  text += label + " " + std::string(kEmDash) + " " + out.conflict_reason + "\n";
  if (!out.bridge.empty()) text += out.bridge + "\n";
  text += kThinkClose;
  text += "\n\n";
  text += out.abstain ? std::string(kAbstainSentinel) : out.final_answer;
  text += "\n";
  return text;
}

std::string emit_completion(const ParsedOutput& out) {
  return emit_output(out) + std::string(kEndOfAnswerSentinel) + "\n";
}

bool semantically_equal(const ParsedOutput& a, const ParsedOutput& b) {
  if (a.unparseable != b.unparseable || a.abstain != b.abstain) return false;
  if (a.verdicts.size() != b.verdicts.size()) return false;
  for (size_t i = 0; i < a.verdicts.size(); ++i) {
    const auto& x = a.verdicts[i];
    const auto& y = b.verdicts[i];
    if (x.doc_id != y.doc_id || x.verdict != y.verdict ||
        x.verdict_reason != y.verdict_reason || x.key_fact != y.key_fact ||
        x.source_quality != y.source_quality) {
      return false;
    }
  }
  auto label = [](const ParsedOutput& p) {
    return p.conflict_label ? p.conflict_label->label() : p.conflict_label_raw;
  };
  return label(a) == label(b) && normalize_ws(a.conflict_reason) == normalize_ws(b.conflict_reason) &&
         normalize_ws(a.analysis) == normalize_ws(b.analysis) &&
         normalize_ws(a.bridge) == normalize_ws(b.bridge) &&
         normalize_ws(a.final_answer) == normalize_ws(b.final_answer) &&
         a.citations == b.citations;
}

// ---------------------------------------------------------------------------
// Corpus-level structural report
// ---------------------------------------------------------------------------

StructuralReport validate_corpus(const std::vector<std::string>& completions,
                                 const std::vector<int>& n_docs) {
  StructuralReport report;
  std::map<std::string, int> freq;
  for (size_t i = 0; i < completions.size(); ++i) {
    int n = i < n_docs.size() ? n_docs[i] : 0;
    ParsedOutput out = parse_completion(completions[i], n);
    ++report.total;
    if (out.unparseable) {
      ++report.unparseable;
    } else if (out.strictly_valid()) {
      ++report.valid;
    } else {
      ++report.recoverable;
    }
    for (const auto& d : out.diagnostics) {
      ++freq[std::string(to_string(d.code))];
    }
  }
  report.diagnostic_frequencies.assign(freq.begin(), freq.end());
  return report;
}

ojson StructuralReport::to_json() const {
  ojson j;
  j["total"] = total;
  j["valid"] = valid;
  j["recoverable"] = recoverable;
  j["unparseable"] = unparseable;
  ojson f = ojson::object();
  for (const auto& [code, count] : diagnostic_frequencies) f[code] = count;
  j["diagnostic_frequencies"] = f;
  return j;
}

ojson diagnostic_to_json(const std::string& record_id, const Diagnostic& d) {
  ojson j;
  j["record_id"] = record_id;
  j["tier"] = d.tier == DiagTier::kStrict ? "strict" : "lenient";
  j["code"] = std::string(to_string(d.code));
  j["message"] = d.message;
  j["span"] = ojson::array({d.begin, d.end});
  return j;
}

}  // namespace cats
