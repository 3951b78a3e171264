#pragma once

// JSON encodings of the domain types, shared by the event log, the export
// bundle and the HTTP API.

#include <string>
#include <vector>

#include "json.hpp"
#include "shyvote/analysis.hpp"
#include "shyvote/error.hpp"
#include "shyvote/iat_protocol.hpp"
#include "shyvote/questionnaire.hpp"
#include "shyvote/scoring.hpp"

namespace shyvote {

using json = nlohmann::json;

namespace detail {

template <typename T>
T field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) {
    throw Error(ErrorKind::malformed, std::string("missing field '") + name + "'");
  }
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::malformed, std::string("field '") + name + "' has the wrong type");
  }
}

template <typename Enum, std::size_t N>
Enum enum_from(const json& j, const std::array<Enum, N>& values, const char* what) {
  const auto s = j.get<std::string>();
  for (Enum v : values) {
    if (s == to_string(v)) return v;
  }
  throw Error(ErrorKind::malformed, std::string("unknown ") + what + " '" + s + "'");
}

}  // namespace detail

inline void to_json(json& j, Side s) { j = to_string(s); }
inline void from_json(const json& j, Side& s) {
  s = detail::enum_from(j, std::array{Side::left, Side::right}, "side");
}

inline void to_json(json& j, PairingOrder p) { j = to_string(p); }
inline void from_json(const json& j, PairingOrder& p) {
  p = detail::enum_from(j, std::array{PairingOrder::a_good_first, PairingOrder::b_good_first},
                        "pairing order");
}

inline void to_json(json& j, CategoryRole r) { j = to_string(r); }
inline void from_json(const json& j, CategoryRole& r) {
  r = detail::enum_from(j, kAllRoles, "category role");
}

inline void to_json(json& j, RespondentCode c) { j = c.value(); }
inline void from_json(const json& j, RespondentCode& c) {
  if (!j.is_number_integer()) throw Error(ErrorKind::malformed, "respondent code must be an integer");
  c = RespondentCode(j.get<int>());
}

inline void to_json(json& j, const Category& c) { j = json{{"label", c.label}, {"items", c.items}}; }
inline void from_json(const json& j, Category& c) {
  c.label = detail::field<std::string>(j, "label");
  c.items = detail::field<std::vector<std::string>>(j, "items");
}

inline void to_json(json& j, const StimulusSet& s) {
  j = json{{"topic", s.topic},
           {"concept_a", s.concept_a},
           {"concept_b", s.concept_b},
           {"good", s.eval_good},
           {"bad", s.eval_bad}};
}
inline void from_json(const json& j, StimulusSet& s) {
  s.topic = detail::field<std::string>(j, "topic");
  s.concept_a = detail::field<Category>(j, "concept_a");
  s.concept_b = detail::field<Category>(j, "concept_b");
  s.eval_good = detail::field<Category>(j, "good");
  s.eval_bad = detail::field<Category>(j, "bad");
  validate(s);
}

inline void to_json(json& j, const TrialRecord& r) {
  j = json{{"block", r.block_index},     {"trial", r.trial_index},
           {"stimulus", r.stimulus},     {"presented_at_ms", r.presented_at_ms},
           {"response", r.response},     {"latency_ms", r.latency_ms},
           {"correct", r.correct}};
}
inline void from_json(const json& j, TrialRecord& r) {
  r.block_index = detail::field<int>(j, "block");
  r.trial_index = detail::field<int>(j, "trial");
  r.stimulus = detail::field<std::string>(j, "stimulus");
  r.presented_at_ms = detail::field<double>(j, "presented_at_ms");
  r.response = detail::field<Side>(j, "response");
  r.latency_ms = detail::field<double>(j, "latency_ms");
  r.correct = detail::field<bool>(j, "correct");
}

/// Full plan as served to the browser: labels resolved, stimulus texts inlined.
inline json plan_to_json(const SessionPlan& plan) {
  json blocks = json::array();
  for (int b = 1; b <= kBlockCount; ++b) {
    const auto& spec = plan.block(b);
    auto labels = [&](const std::vector<CategoryRole>& roles) {
      json out = json::array();
      for (auto r : roles) out.push_back(plan.stimuli.category(r).label);
      return out;
    };
    json trials = json::array();
    for (const auto& t : plan.block_trials(b)) {
      trials.push_back(json{{"stimulus", plan.stimulus_text(t)},
                            {"category", t.category},
                            {"correct_side", t.correct_side}});
    }
    blocks.push_back(json{{"block", b},
                          {"left", labels(spec.left)},
                          {"right", labels(spec.right)},
                          {"left_roles", spec.left},
                          {"right_roles", spec.right},
                          {"trial_count", spec.trial_count},
                          {"scored", spec.is_scored},
                          {"trials", std::move(trials)}});
  }
  return json{{"session_id", plan.session_id},
              {"respondent", plan.respondent},
              {"pairing", plan.pairing},
              {"seed", plan.seed},
              {"topic", plan.stimuli.topic},
              {"keys", json{{"left", "e"}, {"right", "i"}}},
              {"blocks", std::move(blocks)}};
}

inline void to_json(json& j, const AnswerOption& o) {
  j = json{{"text", o.text}};
  if (o.code) j["code"] = *o.code;
}
inline void from_json(const json& j, AnswerOption& o) {
  o.text = detail::field<std::string>(j, "text");
  if (j.contains("code")) {
    o.code = detail::field<int>(j, "code");
  } else {
    o.code.reset();
  }
}

inline void to_json(json& j, const Question& q) {
  j = json{{"id", q.id}, {"text", q.text}, {"options", q.options}, {"in_analysis", q.in_analysis}};
}
inline void from_json(const json& j, Question& q) {
  q.id = detail::field<std::string>(j, "id");
  q.text = detail::field<std::string>(j, "text");
  q.options = detail::field<std::vector<AnswerOption>>(j, "options");
  q.in_analysis = detail::field<bool>(j, "in_analysis");
}

inline void to_json(json& j, const QuestionBank& b) { j = b.questions(); }
inline void from_json(const json& j, QuestionBank& b) {
  b = QuestionBank(j.get<std::vector<Question>>());
}

inline void to_json(json& j, const CodedResponse& r) {
  j = json{{"respondent", r.respondent}, {"answers", r.answers}};
}

inline void to_json(json& j, const ValidationReport& r) {
  json issues = json::array();
  for (const auto& i : r.issues) issues.push_back(i.message);
  j = json{{"ok", r.ok}, {"issues", std::move(issues)}};
}

inline void to_json(json& j, const ReportRow& row) {
  j = json{{"scheme", row.scheme},
           {"outliers", to_string(row.policy)},
           {"spearman", row.spearman ? json(*row.spearman) : json(nullptr)},
           {"pearson", row.pearson ? json(*row.pearson) : json(nullptr)},
           {"n", row.n_respondents},
           {"removed", row.removed}};
  if (!row.error.empty()) j["error"] = row.error;
}
inline void from_json(const json& j, ReportRow& row) {
  row.scheme = detail::field<std::string>(j, "scheme");
  row.policy = detail::field<std::string>(j, "outliers") == "all" ? OutlierPolicy::all_respondents
                                                                  : OutlierPolicy::excluding_outliers;
  row.spearman = j.at("spearman").is_null() ? std::nullopt
                                            : std::optional<double>(j.at("spearman").get<double>());
  row.pearson = j.at("pearson").is_null() ? std::nullopt
                                          : std::optional<double>(j.at("pearson").get<double>());
  row.n_respondents = detail::field<int>(j, "n");
  row.removed = detail::field<std::vector<RespondentCode>>(j, "removed");
  row.error = j.value("error", std::string{});
}

inline void to_json(json& j, const AnalysisReport& r) {
  j = json{{"cohort_size", r.cohort_size},
           {"k_outliers", r.k_outliers},
           {"outliers", r.outliers},
           {"rows", r.rows}};
}
inline void from_json(const json& j, AnalysisReport& r) {
  r.cohort_size = detail::field<int>(j, "cohort_size");
  r.k_outliers = detail::field<int>(j, "k_outliers");
  r.outliers = detail::field<std::vector<RespondentCode>>(j, "outliers");
  r.rows = detail::field<std::vector<ReportRow>>(j, "rows");
}

inline void to_json(json& j, const WeightScheme& s) {
  j = json{{"kind", to_string(s.kind)}, {"label", s.label}, {"weights", s.weights}};
}

}  // namespace shyvote
