#pragma once

// Explicit instrument: question bank, valence coding, per-question spread
// statistics and weighting schemes.
//
// Valence convention: negative codes lean towards concept_a (pro-UK in the
// built-in bank), positive codes towards concept_b, 0 is neutral.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "shyvote/csv.hpp"
#include "shyvote/error.hpp"
#include "shyvote/iat_protocol.hpp"
#include "shyvote/ranking.hpp"

namespace shyvote {

struct AnswerOption {
  std::string text;
  std::optional<int> code;

  friend bool operator==(const AnswerOption&, const AnswerOption&) = default;
};

struct Question {
  std::string id;
  std::string text;
  std::vector<AnswerOption> options;
  bool in_analysis = false;

  bool coded() const {
    return std::any_of(options.begin(), options.end(),
                       [](const AnswerOption& o) { return o.code.has_value(); });
  }

  std::optional<int> code_of(std::string_view option_text) const {
    for (const auto& o : options) {
      if (o.text == option_text) return o.code;
    }
    return std::nullopt;
  }

  const AnswerOption* option_with_code(int code) const {
    for (const auto& o : options) {
      if (o.code == code) return &o;
    }
    return nullptr;
  }

  /// Legal codes, ascending.
  std::vector<int> codes() const {
    std::vector<int> out;
    for (const auto& o : options) {
      if (o.code) out.push_back(*o.code);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  friend bool operator==(const Question&, const Question&) = default;
};

class QuestionBank {
 public:
  QuestionBank() = default;
  explicit QuestionBank(std::vector<Question> questions) : questions_(std::move(questions)) {
    validate();
  }

  const std::vector<Question>& questions() const { return questions_; }

  const Question* find(std::string_view id) const {
    for (const auto& q : questions_) {
      if (q.id == id) return &q;
    }
    return nullptr;
  }

  const Question& at(std::string_view id) const {
    if (const auto* q = find(id)) return *q;
    throw Error(ErrorKind::not_found, "no question " + std::string(id));
  }

  /// Ids of the questions that contribute to scores, in bank order.
  std::vector<std::string> analysis_ids() const {
    std::vector<std::string> ids;
    for (const auto& q : questions_) {
      if (q.in_analysis) ids.push_back(q.id);
    }
    return ids;
  }

  friend bool operator==(const QuestionBank&, const QuestionBank&) = default;

 private:
  void validate() const {
    std::set<std::string> ids;
    for (const auto& q : questions_) {
      if (q.id.empty()) throw Error(ErrorKind::invalid_config, "question without id");
      if (!ids.insert(q.id).second) {
        throw Error(ErrorKind::invalid_config, "duplicate question id " + q.id);
      }
      std::set<int> codes;
      std::set<std::string> texts;
      for (const auto& o : q.options) {
        if (!texts.insert(o.text).second) {
          throw Error(ErrorKind::invalid_config, q.id + ": duplicate option '" + o.text + "'");
        }
        if (!o.code) continue;
        if (*o.code < -2 || *o.code > 2) {
          throw Error(ErrorKind::invalid_config, q.id + ": code outside -2..2");
        }
        if (!codes.insert(*o.code).second) {
          throw Error(ErrorKind::invalid_config, q.id + ": duplicate code " + std::to_string(*o.code));
        }
      }
      if (q.in_analysis && codes.size() < 2) {
        throw Error(ErrorKind::invalid_config, q.id + " is in the analysis but has < 2 coded options");
      }
    }
  }

  std::vector<Question> questions_;
};

/// The UK/Ireland questionnaire. Q6-Q8 and Q11 are free-text and excluded.
inline QuestionBank default_question_bank() {
  auto yes_no = [] {
    return std::vector<AnswerOption>{{"Yes", -2}, {"No", 2}};
  };
  return QuestionBank({
      {"Q1",
       "If a member of the Royal family visited your hometown, how likely would you be to go see "
       "them?",
       {{"Very likely", -2}, {"Likely", -1}, {"Neutral", 0}, {"Less likely", 1}, {"Not likely", 2}},
       true},
      {"Q2", "If the UK were to go to war, would you be happy for Irish troops to join them?",
       yes_no(), true},
      {"Q3", "What was your reaction to the news of Prince Charles contracting Covid-19?",
       {{"Sympathetic", -2}, {"Not care", 0}, {"Unsympathetic", 2}},
       true},
      {"Q4", "Did you watch any of the Royal Weddings live on TV?", yes_no(), true},
      {"Q5", "Are you able to name all of Will and Kate's children?",
       {{"Yes", -2}, {"Not all", 0}, {"No", 2}},
       true},
      {"Q6", "Do you know if Prince Philip is alive or dead?", {}, false},
      {"Q7", "Who is your favourite member of the Royal family?", {}, false},
      {"Q8", "Where is your favourite football team located?", {}, false},
      {"Q9",
       "Would you be happy for some of Ireland's emergency Personal Protective Equipment (PPE) to "
       "be shared with the UK during the Covid-19 outbreak",
       yes_no(), true},
      {"Q10", "How did you feel when the UK left the EU in January 2020?",
       {{"Very happy", -2}, {"Happy", -1}, {"Didn't care", 0}, {"Unhappy", 1}, {"Very unhappy", 2}},
       true},
      {"Q11",
       "During the financial crisis in Ireland in 2008, the UK provided substantial financial "
       "assistance to Ireland. If the UK experienced similar financial difficulty should Ireland "
       "do likewise?",
       {},
       false},
  });
}

/// Plain-text bank format:
///
///     [Q1]
///     analysis: yes
///     text: If a member of the Royal family visited ...
///     option -2: Very likely
///     option -1: Likely
///     option: some uncoded choice
inline QuestionBank parse_question_bank(std::string_view text) {
  std::vector<Question> questions;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  auto fail = [&line_no](const std::string& msg) {
    return Error(ErrorKind::malformed, "line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw fail("unterminated question header");
      questions.push_back(Question{std::string(detail::trim(line.substr(1, line.size() - 2))), {}, {}, false});
      continue;
    }
    if (questions.empty()) throw fail("content before the first [id] header");
    Question& q = questions.back();
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) throw fail("expected 'key: value'");
    const auto key = detail::trim(line.substr(0, colon));
    const auto value = std::string(detail::trim(line.substr(colon + 1)));
    if (key == "text") {
      q.text = value;
    } else if (key == "analysis") {
      if (value != "yes" && value != "no") throw fail("analysis must be yes or no");
      q.in_analysis = value == "yes";
    } else if (key == "option") {
      q.options.push_back({value, std::nullopt});
    } else if (key.starts_with("option ")) {
      const auto code_text = std::string(detail::trim(key.substr(7)));
      try {
        std::size_t used = 0;
        const int code = std::stoi(code_text, &used);
        if (used != code_text.size()) throw std::invalid_argument(code_text);
        q.options.push_back({value, code});
      } catch (const std::exception&) {
        throw fail("bad option code '" + code_text + "'");
      }
    } else {
      throw fail("unknown key '" + std::string(key) + "'");
    }
  }
  return QuestionBank(std::move(questions));
}

inline std::string format_question_bank(const QuestionBank& bank) {
  std::ostringstream out;
  bool first = true;
  for (const auto& q : bank.questions()) {
    if (!first) out << '\n';
    first = false;
    out << '[' << q.id << "]\n";
    out << "analysis: " << (q.in_analysis ? "yes" : "no") << '\n';
    out << "text: " << q.text << '\n';
    for (const auto& o : q.options) {
      if (o.code) {
        out << "option " << *o.code << ": " << o.text << '\n';
      } else {
        out << "option: " << o.text << '\n';
      }
    }
  }
  return out.str();
}

using RawAnswers = std::map<std::string, std::string>;

struct CodedResponse {
  RespondentCode respondent;
  std::map<std::string, int> answers;  // in-analysis question id -> code

  friend bool operator==(const CodedResponse&, const CodedResponse&) = default;
};

/// Maps option texts onto codes. Uncoded and out-of-analysis questions are
/// dropped; a missing or unrecognised in-analysis answer is rejected with the
/// question id in the message.
inline CodedResponse code_answers(const QuestionBank& bank, RespondentCode respondent,
                                  const RawAnswers& raw) {
  CodedResponse out{respondent, {}};
  for (const auto& [id, text] : raw) {
    const Question* q = bank.find(id);
    if (q == nullptr) throw Error(ErrorKind::unknown_option, "unknown question " + id);
    if (!q->in_analysis) continue;
    const auto code = q->code_of(detail::trim(text));
    if (!code) {
      throw Error(ErrorKind::unknown_option, id + ": '" + text + "' is not an answer option");
    }
    out.answers[id] = *code;
  }
  for (const auto& id : bank.analysis_ids()) {
    if (!out.answers.contains(id)) throw Error(ErrorKind::missing_answer, id + " is unanswered");
  }
  return out;
}

/// Inverse of code_answers for the in-analysis questions.
inline RawAnswers decode_answers(const QuestionBank& bank, const CodedResponse& response) {
  RawAnswers out;
  for (const auto& [id, code] : response.answers) {
    const auto* opt = bank.at(id).option_with_code(code);
    if (opt == nullptr) {
      throw Error(ErrorKind::unknown_option, id + ": no option with code " + std::to_string(code));
    }
    out[id] = opt->text;
  }
  return out;
}

/// Throws if `response` does not satisfy the CodedResponse invariants.
inline void validate(const QuestionBank& bank, const CodedResponse& response) {
  const auto ids = bank.analysis_ids();
  for (const auto& id : ids) {
    if (!response.answers.contains(id)) throw Error(ErrorKind::missing_answer, id + " is unanswered");
  }
  for (const auto& [id, code] : response.answers) {
    const Question* q = bank.find(id);
    if (q == nullptr || !q->in_analysis) {
      throw Error(ErrorKind::unknown_option, id + " is not an analysis question");
    }
    if (q->option_with_code(code) == nullptr) {
      throw Error(ErrorKind::unknown_option, id + ": illegal code " + std::to_string(code));
    }
  }
}

enum class WeightKind { uniform, variance_rank, reverse_deviation_rank, custom };

inline const char* to_string(WeightKind k) {
  switch (k) {
    case WeightKind::uniform: return "uniform";
    case WeightKind::variance_rank: return "variance_rank";
    case WeightKind::reverse_deviation_rank: return "reverse_deviation_rank";
    case WeightKind::custom: return "custom";
  }
  return "?";
}

struct WeightScheme {
  WeightKind kind = WeightKind::uniform;
  std::map<std::string, double> weights;
  std::string label;

  double weight(const std::string& id) const {
    const auto it = weights.find(id);
    if (it == weights.end()) throw Error(ErrorKind::invalid_argument, "scheme has no weight for " + id);
    return it->second;
  }
};

inline void validate(const WeightScheme& scheme, const std::vector<std::string>& question_ids) {
  bool any_positive = false;
  for (const auto& id : question_ids) {
    const double w = scheme.weight(id);
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorKind::invalid_argument, "weight for " + id + " must be finite and >= 0");
    }
    any_positive = any_positive || w > 0.0;
  }
  if (!any_positive) throw Error(ErrorKind::invalid_argument, "all weights are zero");
}

inline WeightScheme uniform_scheme(const std::vector<std::string>& question_ids) {
  WeightScheme s{WeightKind::uniform, {}, "uniform"};
  for (const auto& id : question_ids) s.weights[id] = 1.0;
  return s;
}

/// Assigns `weights` to `question_ids` position by position.
inline WeightScheme positional_scheme(const std::vector<std::string>& question_ids,
                                      const std::vector<double>& weights, std::string label) {
  if (weights.size() != question_ids.size()) {
    throw Error(ErrorKind::invalid_argument,
                "expected " + std::to_string(question_ids.size()) + " weights, got " +
                    std::to_string(weights.size()));
  }
  WeightScheme s{WeightKind::custom, {}, std::move(label)};
  for (std::size_t i = 0; i < weights.size(); ++i) s.weights[question_ids[i]] = weights[i];
  validate(s, question_ids);
  return s;
}

/// Hand-tuned weights for the seven retained questions of the built-in bank,
/// in bank order (Q1..Q5, Q9, Q10).
inline const std::vector<double>& manual_weights() {
  static const std::vector<double> w{1.0, 0.1, 0.1, 2.0, 11.0, 1.5, 0.2};
  return w;
}

/// Weighted questionnaire total. Lower totals lean towards concept_a.
inline double total_score(const CodedResponse& response, const WeightScheme& scheme) {
  double total = 0.0;
  for (const auto& [id, code] : response.answers) total += scheme.weight(id) * code;
  return total;
}

struct QuestionStats {
  std::string question_id;
  std::map<int, int> counts;  // code -> respondents
  double variance = 0.0;      // population variance of the codes
  double deviation = 0.0;
  double variance_rank = 0.0;           // 1 = largest variance
  double reverse_deviation_rank = 0.0;  // 1 = largest 1/SD
};

/// Spread statistics from per-code counts. Variance is computed from exact
/// integer moments so equal count patterns tie exactly.
inline std::vector<QuestionStats> question_stats_from_counts(
    const std::vector<std::pair<std::string, std::map<int, int>>>& counts) {
  if (counts.empty()) throw Error(ErrorKind::invalid_argument, "no questions");
  std::vector<QuestionStats> out;
  std::vector<double> variances;
  std::vector<double> inverse_sd;
  for (const auto& [id, per_code] : counts) {
    std::int64_t n = 0;
    std::int64_t sum = 0;
    std::int64_t sum_sq = 0;
    for (const auto& [code, c] : per_code) {
      n += c;
      sum += static_cast<std::int64_t>(code) * c;
      sum_sq += static_cast<std::int64_t>(code) * code * c;
    }
    if (n == 0) throw Error(ErrorKind::invalid_argument, id + " has no answers");
    QuestionStats s;
    s.question_id = id;
    s.counts = per_code;
    s.variance = static_cast<double>(n * sum_sq - sum * sum) / static_cast<double>(n * n);
    s.deviation = std::sqrt(s.variance);
    variances.push_back(s.variance);
    inverse_sd.push_back(s.deviation > 0.0 ? 1.0 / s.deviation
                                           : std::numeric_limits<double>::infinity());
    out.push_back(std::move(s));
  }
  const auto vr = fractional_rank(variances, RankDirection::descending);
  const auto rr = fractional_rank(inverse_sd, RankDirection::descending);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].variance_rank = vr[i];
    out[i].reverse_deviation_rank = rr[i];
  }
  return out;
}

inline std::vector<QuestionStats> question_stats(const QuestionBank& bank,
                                                 const std::vector<CodedResponse>& cohort) {
  if (cohort.empty()) throw Error(ErrorKind::invalid_argument, "empty cohort");
  std::vector<std::pair<std::string, std::map<int, int>>> counts;
  for (const auto& id : bank.analysis_ids()) {
    std::map<int, int> per_code;
    for (int code : bank.at(id).codes()) per_code[code] = 0;
    for (const auto& r : cohort) {
      const auto it = r.answers.find(id);
      if (it == r.answers.end()) {
        throw Error(ErrorKind::missing_answer,
                    "respondent " + r.respondent.str() + " did not answer " + id);
      }
      ++per_code[it->second];
    }
    counts.emplace_back(id, std::move(per_code));
  }
  return question_stats_from_counts(counts);
}

/// Weight = the question's rank number under the requested statistic.
inline WeightScheme derive_weight_scheme(const std::vector<QuestionStats>& stats, WeightKind kind) {
  WeightScheme s{kind, {}, to_string(kind)};
  for (const auto& q : stats) {
    switch (kind) {
      case WeightKind::uniform: s.weights[q.question_id] = 1.0; break;
      case WeightKind::variance_rank: s.weights[q.question_id] = q.variance_rank; break;
      case WeightKind::reverse_deviation_rank:
        s.weights[q.question_id] = q.reverse_deviation_rank;
        break;
      case WeightKind::custom:
        throw Error(ErrorKind::invalid_argument, "custom schemes are not derived from statistics");
    }
  }
  return s;
}

/// Rank columns supplied from elsewhere (e.g. a published table).
inline WeightScheme scheme_from_ranks(WeightKind kind, std::map<std::string, double> ranks) {
  return WeightScheme{kind, std::move(ranks), std::string(to_string(kind)) + " (supplied)"};
}

struct CohortRow {
  RespondentCode respondent;
  RawAnswers answers;
  std::size_t line = 0;
};

/// Reads a cohort table: header `respondent,<question ids...>`, one row per
/// respondent. Cells hold option texts or integer codes; empty cells are
/// skipped. Every in-analysis question must have a column.
inline std::vector<CohortRow> parse_cohort_csv(const QuestionBank& bank, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::vector<CohortRow> rows;
  auto fail = [&line_no](const std::string& msg) {
    return Error(ErrorKind::malformed, "line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    if (detail::trim(raw).empty()) continue;
    std::vector<std::string> fields;
    try {
      fields = csv::split_line(raw);
    } catch (const Error& e) {
      throw fail(e.what());
    }
    if (header.empty()) {
      header = std::move(fields);
      for (auto& h : header) h = std::string(detail::trim(h));
      if (header.front() != "respondent") throw fail("first column must be 'respondent'");
      for (std::size_t i = 1; i < header.size(); ++i) {
        if (bank.find(header[i]) == nullptr) throw fail("unknown question column " + header[i]);
      }
      for (const auto& id : bank.analysis_ids()) {
        if (std::find(header.begin(), header.end(), id) == header.end()) {
          throw fail("missing column " + id);
        }
      }
      continue;
    }
    if (fields.size() != header.size()) {
      throw fail("expected " + std::to_string(header.size()) + " fields, got " +
                 std::to_string(fields.size()));
    }
    CohortRow row;
    row.line = line_no;
    try {
      const auto code_text = std::string(detail::trim(fields[0]));
      std::size_t used = 0;
      const int code = std::stoi(code_text, &used);
      if (used != code_text.size()) throw std::invalid_argument(code_text);
      row.respondent = RespondentCode(code);
    } catch (const std::exception&) {
      throw fail("bad respondent code '" + fields[0] + "'");
    }
    for (std::size_t i = 1; i < header.size(); ++i) {
      const std::string value(detail::trim(fields[i]));
      if (value.empty()) continue;
      const Question& q = bank.at(header[i]);
      std::string answer = value;
      if (q.coded() && !q.code_of(value)) {
        // numeric cells are codes
        try {
          std::size_t used = 0;
          const int code = std::stoi(value, &used);
          if (used == value.size()) {
            if (const auto* opt = q.option_with_code(code)) answer = opt->text;
          }
        } catch (const std::exception&) {
        }
        if (!q.code_of(answer)) throw fail(q.id + ": '" + value + "' is not an answer option");
      }
      row.answers[q.id] = answer;
    }
    for (const auto& id : bank.analysis_ids()) {
      if (!row.answers.contains(id)) throw fail(id + " is empty");
    }
    rows.push_back(std::move(row));
  }
  if (header.empty()) throw Error(ErrorKind::malformed, "empty cohort table");
  return rows;
}

inline std::string format_cohort_csv(const QuestionBank& bank, const std::vector<CohortRow>& rows) {
  std::vector<std::string> header{"respondent"};
  for (const auto& q : bank.questions()) header.push_back(q.id);
  std::string out = csv::join(header) + '\n';
  for (const auto& row : rows) {
    std::vector<std::string> fields{row.respondent.str()};
    for (const auto& q : bank.questions()) {
      const auto it = row.answers.find(q.id);
      fields.push_back(it == row.answers.end() ? std::string{} : it->second);
    }
    out += csv::join(fields) + '\n';
  }
  return out;
}

}  // namespace shyvote
