#pragma once

// Study state and the events that build it. A StudyRecord is only ever
// produced by folding events through apply(), so replaying a log is the same
// code path as live ingestion.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "shyvote/iat_protocol.hpp"
#include "shyvote/pipeline.hpp"
#include "shyvote/questionnaire.hpp"
#include "shyvote/service/serialization.hpp"
#include "shyvote/simulator.hpp"

namespace shyvote::service {

enum class StudyState { open, locked };

inline const char* to_string(StudyState s) { return s == StudyState::open ? "open" : "locked"; }

struct StudyConfig {
  std::array<int, kBlockCount> trial_counts{20, 20, 40, 40, 40};
  std::uint64_t seed = 1;
  bool enforce_gap = false;  // require a gap between IAT and questionnaire
  double min_gap_days = 14.0;

  friend bool operator==(const StudyConfig&, const StudyConfig&) = default;
};

struct RespondentRecord {
  RespondentCode code;
  bool has_session = false;
  std::string token;
  PairingOrder pairing = PairingOrder::a_good_first;
  std::uint64_t plan_seed = 0;
  std::int64_t created_at = 0;
  std::optional<std::int64_t> trials_updated_at;
  std::optional<std::int64_t> questionnaire_at;
  std::map<std::pair<int, int>, TrialRecord> trials;  // (block, trial)
  std::optional<RawAnswers> raw_answers;
  std::optional<CodedResponse> coded;

  friend bool operator==(const RespondentRecord&, const RespondentRecord&) = default;
};

struct StoredReport {
  json request;
  AnalysisReport report;
  std::vector<RespondentCode> unscored;  // eligible but D-score undefined
  std::int64_t created_at = 0;
};

struct StudyRecord {
  std::string study_id;
  StudyState state = StudyState::open;
  StimulusSet stimuli;
  QuestionBank bank;
  StudyConfig config;
  std::int64_t created_at = 0;
  std::map<RespondentCode, RespondentRecord> respondents;
  std::map<std::string, RespondentCode> tokens;
  std::size_t session_count = 0;
  std::optional<StoredReport> last_report;
  std::uint64_t last_seq = 0;

  SessionPlan plan_for(const RespondentRecord& r) const {
    SessionConfig cfg{config.trial_counts, r.pairing, r.plan_seed};
    return build_session_plan(stimuli, cfg, r.code, r.token);
  }

  /// Both instruments complete: every planned trial present and a coded
  /// questionnaire on file.
  bool eligible(const RespondentRecord& r) const {
    if (!r.has_session || !r.coded) return false;
    std::size_t expected = 0;
    for (int n : config.trial_counts) expected += static_cast<std::size_t>(n);
    return r.trials.size() == expected;
  }
};

// Events -------------------------------------------------------------------

struct StudyCreated {
  std::string study_id;
  StimulusSet stimuli;
  QuestionBank bank;
  StudyConfig config;
};

struct SessionCreated {
  RespondentCode code;
  std::string token;
  PairingOrder pairing = PairingOrder::a_good_first;
  std::uint64_t plan_seed = 0;
};

struct TrialsAppended {
  RespondentCode code;
  std::vector<TrialRecord> records;
};

struct QuestionnaireSubmitted {
  RespondentCode code;
  RawAnswers answers;
};

struct StudyLocked {};

struct AnalysisRun {
  json request;
  AnalysisReport report;
  std::vector<RespondentCode> unscored;
};

using EventPayload = std::variant<StudyCreated, SessionCreated, TrialsAppended,
                                  QuestionnaireSubmitted, StudyLocked, AnalysisRun>;

struct EventLogEntry {
  std::uint64_t seq = 0;
  std::int64_t timestamp_ms = 0;
  EventPayload payload;
};

inline void to_json(json& j, const StudyConfig& c) {
  j = json{{"trial_counts", c.trial_counts},
           {"seed", c.seed},
           {"enforce_gap", c.enforce_gap},
           {"min_gap_days", c.min_gap_days}};
}
inline void from_json(const json& j, StudyConfig& c) {
  c.trial_counts = shyvote::detail::field<std::array<int, kBlockCount>>(j, "trial_counts");
  c.seed = shyvote::detail::field<std::uint64_t>(j, "seed");
  c.enforce_gap = j.value("enforce_gap", false);
  c.min_gap_days = j.value("min_gap_days", 14.0);
  validate(SessionConfig{c.trial_counts, PairingOrder::a_good_first, c.seed});
}

inline json request_to_json(const AnalysisRequest& r) {
  return json{{"schemes", r.schemes},
              {"k_outliers", r.k_outliers},
              {"layout", r.layout == ReportLayout::grid ? "grid" : "six_row"},
              {"variant", to_string(r.variant)},
              {"grid", r.search.grid},
              {"max_sweeps", r.search.max_sweeps},
              {"restarts", r.search.restarts},
              {"seed", r.search.seed}};
}

inline AnalysisRequest request_from_json(const json& j) {
  AnalysisRequest r;
  if (!j.is_object()) throw Error(ErrorKind::malformed, "analysis request must be an object");
  if (j.contains("schemes")) r.schemes = shyvote::detail::field<std::vector<std::string>>(j, "schemes");
  r.k_outliers = j.contains("k_outliers") ? shyvote::detail::field<int>(j, "k_outliers") : r.k_outliers;
  if (j.contains("layout")) {
    const auto layout = shyvote::detail::field<std::string>(j, "layout");
    if (layout == "grid") {
      r.layout = ReportLayout::grid;
    } else if (layout == "six_row") {
      r.layout = ReportLayout::six_row;
    } else {
      throw Error(ErrorKind::malformed, "unknown layout '" + layout + "'");
    }
  }
  if (j.contains("variant")) {
    r.variant = shyvote::detail::field<std::string>(j, "variant") == "improved" ? ScoringVariant::improved
                                                                       : ScoringVariant::simple;
  }
  if (j.contains("grid")) r.search.grid = shyvote::detail::field<std::vector<double>>(j, "grid");
  if (j.contains("max_sweeps")) r.search.max_sweeps = shyvote::detail::field<int>(j, "max_sweeps");
  if (j.contains("restarts")) r.search.restarts = shyvote::detail::field<int>(j, "restarts");
  if (j.contains("seed")) r.search.seed = shyvote::detail::field<std::uint64_t>(j, "seed");
  return r;
}

inline json event_to_json(const EventLogEntry& e) {
  json j{{"seq", e.seq}, {"ts", e.timestamp_ms}};
  std::visit(
      [&j](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, StudyCreated>) {
          j["type"] = "study_created";
          j["study_id"] = p.study_id;
          j["stimuli"] = p.stimuli;
          j["bank"] = p.bank;
          j["config"] = p.config;
        } else if constexpr (std::is_same_v<T, SessionCreated>) {
          j["type"] = "session_created";
          j["respondent"] = p.code;
          j["token"] = p.token;
          j["pairing"] = p.pairing;
          j["plan_seed"] = p.plan_seed;
        } else if constexpr (std::is_same_v<T, TrialsAppended>) {
          j["type"] = "trials_appended";
          j["respondent"] = p.code;
          j["records"] = p.records;
        } else if constexpr (std::is_same_v<T, QuestionnaireSubmitted>) {
          j["type"] = "questionnaire_submitted";
          j["respondent"] = p.code;
          j["answers"] = p.answers;
        } else if constexpr (std::is_same_v<T, StudyLocked>) {
          j["type"] = "study_locked";
        } else if constexpr (std::is_same_v<T, AnalysisRun>) {
          j["type"] = "analysis_run";
          j["request"] = p.request;
          j["report"] = p.report;
          j["unscored"] = p.unscored;
        }
      },
      e.payload);
  return j;
}

inline EventLogEntry event_from_json(const json& j) {
  EventLogEntry e;
  e.seq = shyvote::detail::field<std::uint64_t>(j, "seq");
  e.timestamp_ms = shyvote::detail::field<std::int64_t>(j, "ts");
  const auto type = shyvote::detail::field<std::string>(j, "type");
  if (type == "study_created") {
    e.payload = StudyCreated{shyvote::detail::field<std::string>(j, "study_id"),
                             shyvote::detail::field<StimulusSet>(j, "stimuli"),
                             shyvote::detail::field<QuestionBank>(j, "bank"),
                             shyvote::detail::field<StudyConfig>(j, "config")};
  } else if (type == "session_created") {
    e.payload = SessionCreated{shyvote::detail::field<RespondentCode>(j, "respondent"),
                               shyvote::detail::field<std::string>(j, "token"),
                               shyvote::detail::field<PairingOrder>(j, "pairing"),
                               shyvote::detail::field<std::uint64_t>(j, "plan_seed")};
  } else if (type == "trials_appended") {
    e.payload = TrialsAppended{shyvote::detail::field<RespondentCode>(j, "respondent"),
                               shyvote::detail::field<std::vector<TrialRecord>>(j, "records")};
  } else if (type == "questionnaire_submitted") {
    e.payload = QuestionnaireSubmitted{shyvote::detail::field<RespondentCode>(j, "respondent"),
                                       shyvote::detail::field<RawAnswers>(j, "answers")};
  } else if (type == "study_locked") {
    e.payload = StudyLocked{};
  } else if (type == "analysis_run") {
    e.payload = AnalysisRun{j.at("request"), shyvote::detail::field<AnalysisReport>(j, "report"),
                            shyvote::detail::field<std::vector<RespondentCode>>(j, "unscored")};
  } else {
    throw Error(ErrorKind::malformed, "unknown event type '" + type + "'");
  }
  return e;
}

/// Folds one event into the record. Throws Error(corruption) when the event
/// cannot follow the current state.
inline void apply(StudyRecord& study, const EventLogEntry& entry) {
  if (entry.seq != study.last_seq + 1) {
    throw Error(ErrorKind::corruption, "event sequence gap at " + std::to_string(entry.seq));
  }
  const bool first = study.last_seq == 0;
  if (first != std::holds_alternative<StudyCreated>(entry.payload)) {
    throw Error(ErrorKind::corruption, "study_created must be the first event and only the first");
  }
  auto respondent = [&study](RespondentCode code) -> RespondentRecord& {
    const auto it = study.respondents.find(code);
    if (it == study.respondents.end()) {
      throw Error(ErrorKind::corruption, "event for unknown respondent " + code.str());
    }
    return it->second;
  };

  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, StudyCreated>) {
          study.study_id = p.study_id;
          study.stimuli = p.stimuli;
          study.bank = p.bank;
          study.config = p.config;
          study.created_at = entry.timestamp_ms;
        } else if constexpr (std::is_same_v<T, SessionCreated>) {
          auto& r = study.respondents[p.code];
          if (r.has_session) throw Error(ErrorKind::corruption, "second session for " + p.code.str());
          if (study.tokens.contains(p.token)) throw Error(ErrorKind::corruption, "token reused");
          r.code = p.code;
          r.has_session = true;
          r.token = p.token;
          r.pairing = p.pairing;
          r.plan_seed = p.plan_seed;
          r.created_at = entry.timestamp_ms;
          study.tokens[p.token] = p.code;
          ++study.session_count;
        } else if constexpr (std::is_same_v<T, TrialsAppended>) {
          auto& r = respondent(p.code);
          if (!r.has_session) throw Error(ErrorKind::corruption, "trials without a session");
          for (const auto& rec : p.records) {
            r.trials[{rec.block_index, rec.trial_index}] = rec;
          }
          r.trials_updated_at = entry.timestamp_ms;
        } else if constexpr (std::is_same_v<T, QuestionnaireSubmitted>) {
          auto& r = study.respondents[p.code];
          r.code = p.code;
          r.raw_answers = p.answers;
          r.coded = code_answers(study.bank, p.code, p.answers);
          r.questionnaire_at = entry.timestamp_ms;
        } else if constexpr (std::is_same_v<T, StudyLocked>) {
          study.state = StudyState::locked;
        } else if constexpr (std::is_same_v<T, AnalysisRun>) {
          study.last_report = StoredReport{p.request, p.report, p.unscored, entry.timestamp_ms};
        }
      },
      entry.payload);
  study.last_seq = entry.seq;
}

inline StudyRecord replay(const std::vector<EventLogEntry>& entries) {
  StudyRecord study;
  for (const auto& e : entries) apply(study, e);
  if (study.last_seq == 0) throw Error(ErrorKind::corruption, "empty event log");
  return study;
}

/// Invariant violations in a record; empty when consistent.
inline std::vector<std::string> consistency_issues(const StudyRecord& study) {
  std::vector<std::string> issues;
  for (const auto& [token, code] : study.tokens) {
    const auto it = study.respondents.find(code);
    if (it == study.respondents.end() || it->second.token != token) {
      issues.push_back("token " + token + " does not map back to its respondent");
    }
  }
  std::size_t sessions = 0;
  for (const auto& [code, r] : study.respondents) {
    const std::string who = "respondent " + code.str() + ": ";
    if (r.code != code) issues.push_back(who + "code mismatch");
    if (r.has_session) {
      ++sessions;
      const auto plan = study.plan_for(r);
      for (const auto& [key, rec] : r.trials) {
        if (key != std::pair{rec.block_index, rec.trial_index}) {
          issues.push_back(who + "trial keyed under the wrong index");
          continue;
        }
        if (rec.block_index < 1 || rec.block_index > kBlockCount || rec.trial_index < 0 ||
            rec.trial_index >= static_cast<int>(plan.block_trials(rec.block_index).size())) {
          issues.push_back(who + "trial outside the plan");
          continue;
        }
        const auto& planned = plan.block_trials(rec.block_index)[rec.trial_index];
        if (rec.stimulus != plan.stimulus_text(planned)) issues.push_back(who + "stimulus mismatch");
        if (rec.correct != (rec.response == planned.correct_side)) {
          issues.push_back(who + "correct flag mismatch");
        }
        if (!(rec.latency_ms >= 0.0)) issues.push_back(who + "negative latency");
      }
    } else if (!r.trials.empty()) {
      issues.push_back(who + "trials without a session");
    }
    if (r.coded) {
      try {
        validate(study.bank, *r.coded);
      } catch (const Error& e) {
        issues.push_back(who + e.what());
      }
    }
    if (r.raw_answers.has_value() != r.coded.has_value()) {
      issues.push_back(who + "raw and coded answers out of step");
    }
  }
  if (sessions != study.session_count) issues.push_back("session count mismatch");
  return issues;
}

}  // namespace shyvote::service
