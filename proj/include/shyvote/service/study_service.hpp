#pragma once

// Session and data backbone behind the HTTP API and the CLI. Every mutation
// is validated, appended to the study's event log, then folded into the
// in-memory record; per-study writes are serialized by the study mutex.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "shyvote/error.hpp"
#include "shyvote/pipeline.hpp"
#include "shyvote/scoring.hpp"
#include "shyvote/service/event_log.hpp"
#include "shyvote/service/study.hpp"
#include "shyvote/simulator.hpp"

namespace shyvote::service {

struct ServiceOptions {
  std::filesystem::path data_dir;  // empty: logs kept in memory
  bool sync_writes = false;
  std::function<std::int64_t()> clock;  // ms since epoch; defaults to the system clock
  std::optional<std::uint64_t> rng_seed;
  LatencyPolicy latency;
};

struct StudyDefinition {
  std::string study_id;  // generated when empty
  StimulusSet stimuli = demo_stimulus_set();
  QuestionBank bank = default_question_bank();
  StudyConfig config;
};

struct SessionInfo {
  std::string study_id;
  std::string token;
  RespondentCode code;
  SessionPlan plan;
};

struct TrialAck {
  std::size_t accepted = 0;
  std::size_t duplicates = 0;
  std::string status;  // "ok" or "duplicate, no-op"
  ValidationReport validation;
};

struct QuestionnaireAck {
  RespondentCode code;
  bool replaced = false;
  CodedResponse coded;
};

enum class ExportFormat { jsonl, csv };

inline ExportFormat parse_export_format(const std::string& s) {
  if (s == "jsonl") return ExportFormat::jsonl;
  if (s == "csv") return ExportFormat::csv;
  throw Error(ErrorKind::invalid_argument, "unknown format '" + s + "' (jsonl or csv)");
}

struct ImportSummary {
  std::string study_id;
  std::size_t respondents = 0;
  std::size_t events = 0;
};

inline bool valid_study_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  }
  return true;
}

class StudyService {
 public:
  explicit StudyService(ServiceOptions options = {}) : options_(std::move(options)) {
    if (!options_.clock) {
      options_.clock = [] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
      };
    }
    rng_.seed(options_.rng_seed ? *options_.rng_seed : std::random_device{}());
    if (!options_.data_dir.empty()) load_existing();
  }

  StudyService(const StudyService&) = delete;
  StudyService& operator=(const StudyService&) = delete;

  std::string create_study(const StudyDefinition& def) {
    validate(def.stimuli);
    validate(SessionConfig{def.config.trial_counts, PairingOrder::a_good_first, def.config.seed});
    if (def.bank.analysis_ids().empty()) {
      throw Error(ErrorKind::invalid_config, "question bank has no analysis questions");
    }
    std::unique_lock registry(registry_mu_);
    std::string id = def.study_id;
    if (id.empty()) {
      do {
        id = "study-" + random_hex(4);
      } while (studies_.contains(id));
    }
    if (!valid_study_id(id)) throw Error(ErrorKind::invalid_argument, "bad study id '" + id + "'");
    if (studies_.contains(id)) throw Error(ErrorKind::conflict, "study " + id + " already exists");
    auto study = std::make_unique<Study>();
    study->log = make_log(id);
    append(*study, StudyCreated{id, def.stimuli, def.bank, def.config});
    studies_.emplace(id, std::move(study));
    return id;
  }

  std::vector<std::string> study_ids() const {
    std::shared_lock registry(registry_mu_);
    std::vector<std::string> out;
    for (const auto& [id, s] : studies_) out.push_back(id);
    return out;
  }

  /// Copy of the current record.
  StudyRecord snapshot(const std::string& study_id) const {
    const Study& s = study(study_id);
    std::lock_guard lock(s.mu);
    return s.record;
  }

  std::string log_contents(const std::string& study_id) const {
    const Study& s = study(study_id);
    std::lock_guard lock(s.mu);
    return s.log.contents();
  }

  /// Registers a respondent and issues a session token. Without an explicit
  /// code a random unused 4-digit code is drawn.
  SessionInfo create_session(const std::string& study_id, std::optional<int> code = std::nullopt) {
    Study& s = study(study_id);
    std::unique_lock lock(s.mu);
    require_open(s.record);
    RespondentCode chosen;
    if (code) {
      chosen = RespondentCode(*code);
      const auto it = s.record.respondents.find(chosen);
      if (it != s.record.respondents.end() && it->second.has_session) {
        throw Error(ErrorKind::conflict, "respondent code " + chosen.str() + " already in use");
      }
    } else {
      chosen = draw_code(s.record);
    }
    std::string token;
    {
      std::shared_lock registry(registry_mu_);
      do {
        token = random_hex(16);
      } while (tokens_.contains(token));
    }
    SessionCreated event{chosen, token, counterbalanced_pairing(s.record.session_count),
                         session_seed(s.record.config.seed, chosen)};
    append(s, event);
    {
      std::unique_lock registry(registry_mu_);
      tokens_[token] = study_id;
    }
    const auto& r = s.record.respondents.at(chosen);
    return SessionInfo{study_id, token, chosen, s.record.plan_for(r)};
  }

  SessionPlan plan(const std::string& token) const {
    const Study& s = study_for_token(token);
    std::lock_guard lock(s.mu);
    return s.record.plan_for(s.record.respondents.at(s.record.tokens.at(token)));
  }

  /// Stores client-timed trial records. Identical resubmissions are no-ops;
  /// a record that disagrees with one already stored rejects the batch.
  TrialAck submit_trials(const std::string& token, const std::vector<TrialRecord>& batch) {
    Study& s = study_for_token(token);
    std::unique_lock lock(s.mu);
    require_open(s.record);
    const RespondentCode code = s.record.tokens.at(token);
    const auto& r = s.record.respondents.at(code);
    const auto plan = s.record.plan_for(r);

    TrialAck ack;
    std::map<std::pair<int, int>, TrialRecord> fresh;
    for (const auto& rec : batch) {
      check_trial(plan, rec);
      const std::pair key{rec.block_index, rec.trial_index};
      const auto stored = r.trials.find(key);
      const TrialRecord* existing = stored != r.trials.end() ? &stored->second : nullptr;
      if (existing == nullptr) {
        const auto pending = fresh.find(key);
        if (pending != fresh.end()) existing = &pending->second;
      }
      if (existing != nullptr) {
        if (!(*existing == rec)) {
          throw Error(ErrorKind::conflict, "block " + std::to_string(rec.block_index) + " trial " +
                                               std::to_string(rec.trial_index) +
                                               " differs from the stored record");
        }
        ++ack.duplicates;
        continue;
      }
      fresh.emplace(key, rec);
    }
    if (!fresh.empty()) {
      TrialsAppended event{code, {}};
      for (auto& [key, rec] : fresh) event.records.push_back(rec);
      append(s, event);
    }
    ack.accepted = fresh.size();
    ack.status = ack.accepted == 0 ? "duplicate, no-op" : "ok";
    std::vector<TrialRecord> all;
    for (const auto& [key, rec] : s.record.respondents.at(code).trials) all.push_back(rec);
    ack.validation = validate_response_log(plan, all, options_.latency);
    return ack;
  }

  QuestionnaireAck submit_questionnaire(const std::string& token, const RawAnswers& answers) {
    Study& s = study_for_token(token);
    std::unique_lock lock(s.mu);
    return submit_questionnaire_locked(s, s.record.tokens.at(token), answers);
  }

  void lock_study(const std::string& study_id) {
    Study& s = study(study_id);
    std::unique_lock lock(s.mu);
    if (s.record.state == StudyState::locked) return;
    append(s, StudyLocked{});
  }

  /// Scores eligible respondents on a snapshot, runs the report and persists it.
  StoredReport run_analysis(const std::string& study_id, const AnalysisRequest& request = {}) {
    Study& s = study(study_id);
    struct Input {
      SessionPlan plan;
      std::vector<TrialRecord> trials;
      CodedResponse coded;
    };
    std::vector<Input> inputs;
    QuestionBank bank;
    {
      std::lock_guard lock(s.mu);
      bank = s.record.bank;
      for (const auto& [code, r] : s.record.respondents) {
        if (!s.record.eligible(r)) continue;
        Input in{s.record.plan_for(r), {}, *r.coded};
        for (const auto& [key, rec] : r.trials) in.trials.push_back(rec);
        inputs.push_back(std::move(in));
      }
    }
    if (inputs.size() < 3) {
      throw Error(ErrorKind::insufficient_data,
                  "need at least 3 respondents with both instruments complete, have " +
                      std::to_string(inputs.size()));
    }
    ScoringOptions scoring;
    scoring.latency = options_.latency;
    scoring.variant = request.variant;
    std::vector<RespondentScores> cohort;
    std::vector<RespondentCode> unscored;
    for (const auto& in : inputs) {
      try {
        cohort.push_back({in.plan.respondent, score_respondent(in.plan, in.trials, scoring).value,
                          in.coded});
      } catch (const Error&) {
        unscored.push_back(in.plan.respondent);
      }
    }
    AnalysisRun run{request_to_json(request), analyze_cohort(bank, cohort, request), unscored};
    std::lock_guard lock(s.mu);
    append(s, run);
    return *s.record.last_report;
  }

  std::optional<StoredReport> report(const std::string& study_id) const {
    const Study& s = study(study_id);
    std::lock_guard lock(s.mu);
    return s.record.last_report;
  }

  std::string export_study(const std::string& study_id, ExportFormat format) const {
    return format == ExportFormat::jsonl ? export_bundle(snapshot(study_id))
                                         : export_cohort_csv(snapshot(study_id));
  }

  /// jsonl: creates a new study from a bundle (id from the bundle unless
  /// `study_id` is given). csv: submits questionnaires into an existing study.
  ImportSummary import_study(const std::string& study_id, ExportFormat format,
                             const std::string& text) {
    return format == ExportFormat::jsonl ? import_bundle(study_id, text)
                                         : import_cohort_csv(study_id, text);
  }

  static std::string export_bundle(const StudyRecord& rec) {
    std::string out;
    auto emit = [&out](const json& j) { out += j.dump() + '\n'; };
    emit(json{{"type", "study"},
              {"study_id", rec.study_id},
              {"state", to_string(rec.state)},
              {"created_at", rec.created_at},
              {"config", rec.config},
              {"stimuli", rec.stimuli},
              {"bank", rec.bank}});
    for (const auto& [code, r] : rec.respondents) {
      if (r.has_session) {
        json session{{"type", "session"},     {"respondent", code},
                     {"token", r.token},      {"pairing", r.pairing},
                     {"plan_seed", r.plan_seed}, {"created_at", r.created_at}};
        if (r.trials_updated_at) session["trials_updated_at"] = *r.trials_updated_at;
        emit(session);
        for (const auto& [key, t] : r.trials) {
          json line = t;
          line["type"] = "trial";
          line["respondent"] = code;
          emit(line);
        }
      }
      if (r.raw_answers) {
        emit(json{{"type", "questionnaire"},
                  {"respondent", code},
                  {"submitted_at", *r.questionnaire_at},
                  {"answers", *r.raw_answers}});
      }
    }
    if (rec.last_report) {
      emit(json{{"type", "report"},
                {"created_at", rec.last_report->created_at},
                {"request", rec.last_report->request},
                {"report", rec.last_report->report},
                {"unscored", rec.last_report->unscored}});
    }
    return out;
  }

  static std::string export_cohort_csv(const StudyRecord& rec) {
    std::vector<CohortRow> rows;
    for (const auto& [code, r] : rec.respondents) {
      if (r.raw_answers) rows.push_back({code, *r.raw_answers, 0});
    }
    return format_cohort_csv(rec.bank, rows);
  }

  /// Events that rebuild the study described by a bundle.
  static std::vector<EventLogEntry> bundle_events(const std::string& text,
                                                  const std::string& study_id_override = {}) {
    std::vector<EventPayload> payloads;
    std::vector<std::int64_t> stamps;
    std::map<RespondentCode, std::vector<TrialRecord>> trials;
    std::map<RespondentCode, std::int64_t> trial_stamps;
    std::vector<RespondentCode> session_order;
    std::optional<std::pair<AnalysisRun, std::int64_t>> report;
    bool locked = false;

    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (shyvote::detail::trim(line).empty()) continue;
      try {
        const auto j = json::parse(line);
        const auto type = shyvote::detail::field<std::string>(j, "type");
        if ((type == "study") != payloads.empty()) {
          throw Error(ErrorKind::malformed, "the study header must be the first line");
        }
        if (type == "study") {
          auto id = study_id_override.empty() ? shyvote::detail::field<std::string>(j, "study_id")
                                              : study_id_override;
          payloads.emplace_back(StudyCreated{std::move(id), shyvote::detail::field<StimulusSet>(j, "stimuli"),
                                             shyvote::detail::field<QuestionBank>(j, "bank"),
                                             shyvote::detail::field<StudyConfig>(j, "config")});
          stamps.push_back(shyvote::detail::field<std::int64_t>(j, "created_at"));
          locked = shyvote::detail::field<std::string>(j, "state") == "locked";
        } else if (type == "session") {
          const auto code = shyvote::detail::field<RespondentCode>(j, "respondent");
          payloads.emplace_back(SessionCreated{code, shyvote::detail::field<std::string>(j, "token"),
                                               shyvote::detail::field<PairingOrder>(j, "pairing"),
                                               shyvote::detail::field<std::uint64_t>(j, "plan_seed")});
          stamps.push_back(shyvote::detail::field<std::int64_t>(j, "created_at"));
          if (j.contains("trials_updated_at")) {
            trial_stamps[code] = shyvote::detail::field<std::int64_t>(j, "trials_updated_at");
          }
          session_order.push_back(code);
        } else if (type == "trial") {
          trials[shyvote::detail::field<RespondentCode>(j, "respondent")].push_back(j.get<TrialRecord>());
        } else if (type == "questionnaire") {
          payloads.emplace_back(
              QuestionnaireSubmitted{shyvote::detail::field<RespondentCode>(j, "respondent"),
                                     shyvote::detail::field<RawAnswers>(j, "answers")});
          stamps.push_back(shyvote::detail::field<std::int64_t>(j, "submitted_at"));
        } else if (type == "report") {
          report.emplace(AnalysisRun{j.at("request"), shyvote::detail::field<AnalysisReport>(j, "report"),
                                     shyvote::detail::field<std::vector<RespondentCode>>(j, "unscored")},
                         shyvote::detail::field<std::int64_t>(j, "created_at"));
        } else {
          throw Error(ErrorKind::malformed, "unknown record type '" + type + "'");
        }
      } catch (const std::exception& e) {
        throw Error(ErrorKind::malformed, "line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (payloads.empty()) throw Error(ErrorKind::malformed, "empty bundle");

    std::vector<EventLogEntry> events;
    auto push = [&events](EventPayload p, std::int64_t ts) {
      events.push_back({events.size() + 1, ts, std::move(p)});
    };
    for (std::size_t i = 0; i < payloads.size(); ++i) push(std::move(payloads[i]), stamps[i]);
    for (const auto& code : session_order) {
      auto it = trials.find(code);
      if (it == trials.end()) continue;
      if (!trial_stamps.contains(code)) {
        throw Error(ErrorKind::malformed, "respondent " + code.str() + " has trials but no trials_updated_at");
      }
      push(TrialsAppended{code, std::move(it->second)}, trial_stamps[code]);
      trials.erase(it);
    }
    if (!trials.empty()) {
      throw Error(ErrorKind::malformed, "trials for respondent " + trials.begin()->first.str() +
                                            " without a session line");
    }
    if (report) push(std::move(report->first), report->second);
    if (locked) push(StudyLocked{}, events.back().timestamp_ms);
    return events;
  }

 private:
  struct Study {
    mutable std::mutex mu;
    StudyRecord record;
    EventLog log;
  };

  Study& study(const std::string& id) const {
    std::shared_lock registry(registry_mu_);
    const auto it = studies_.find(id);
    if (it == studies_.end()) throw Error(ErrorKind::not_found, "no study " + id);
    return *it->second;
  }

  Study& study_for_token(const std::string& token) const {
    std::string id;
    {
      std::shared_lock registry(registry_mu_);
      const auto it = tokens_.find(token);
      if (it == tokens_.end()) throw Error(ErrorKind::not_found, "unknown session token");
      id = it->second;
    }
    return study(id);
  }

  static void require_open(const StudyRecord& rec) {
    if (rec.state != StudyState::open) {
      throw Error(ErrorKind::locked, "study " + rec.study_id + " is locked");
    }
  }

  static void check_trial(const SessionPlan& plan, const TrialRecord& rec) {
    const std::string where =
        "block " + std::to_string(rec.block_index) + " trial " + std::to_string(rec.trial_index);
    if (rec.block_index < 1 || rec.block_index > kBlockCount || rec.trial_index < 0 ||
        rec.trial_index >= static_cast<int>(plan.block_trials(rec.block_index).size())) {
      throw Error(ErrorKind::malformed, where + " is outside the session plan");
    }
    if (!std::isfinite(rec.latency_ms) || rec.latency_ms < 0.0) {
      throw Error(ErrorKind::malformed, "latency_ms must be a non-negative number (" + where + ")");
    }
    if (!std::isfinite(rec.presented_at_ms) || rec.presented_at_ms < 0.0) {
      throw Error(ErrorKind::malformed,
                  "presented_at_ms must be a non-negative number (" + where + ")");
    }
    const auto& planned = plan.block_trials(rec.block_index)[rec.trial_index];
    if (rec.stimulus != plan.stimulus_text(planned)) {
      throw Error(ErrorKind::malformed, "stimulus does not match the plan (" + where + ")");
    }
    if (rec.correct != (rec.response == planned.correct_side)) {
      throw Error(ErrorKind::malformed, "correct disagrees with response (" + where + ")");
    }
  }

  QuestionnaireAck submit_questionnaire_locked(Study& s, RespondentCode code,
                                               const RawAnswers& answers) {
    require_open(s.record);
    QuestionnaireAck ack;
    ack.code = code;
    ack.coded = code_answers(s.record.bank, code, answers);
    const auto it = s.record.respondents.find(code);
    if (s.record.config.enforce_gap) {
      const auto now = options_.clock();
      const double gap_ms = s.record.config.min_gap_days * 86'400'000.0;
      if (it == s.record.respondents.end() || !it->second.trials_updated_at ||
          static_cast<double>(now - *it->second.trials_updated_at) < gap_ms) {
        throw Error(ErrorKind::conflict, "questionnaire submitted before the required gap after the IAT");
      }
    }
    ack.replaced = it != s.record.respondents.end() && it->second.raw_answers.has_value();
    append(s, QuestionnaireSubmitted{code, answers});
    return ack;
  }

  ImportSummary import_bundle(const std::string& study_id, const std::string& text) {
    auto events = bundle_events(text, study_id);
    StudyRecord check;
    try {
      check = replay(events);
    } catch (const Error& e) {
      throw Error(ErrorKind::malformed, std::string("bundle is inconsistent: ") + e.what());
    }
    if (const auto issues = consistency_issues(check); !issues.empty()) {
      throw Error(ErrorKind::malformed, "bundle is inconsistent: " + issues.front());
    }
    const std::string id = check.study_id;
    if (!valid_study_id(id)) throw Error(ErrorKind::invalid_argument, "bad study id '" + id + "'");
    std::unique_lock registry(registry_mu_);
    if (studies_.contains(id)) throw Error(ErrorKind::conflict, "study " + id + " already exists");
    for (const auto& [token, code] : check.tokens) {
      if (tokens_.contains(token)) throw Error(ErrorKind::conflict, "session token already in use");
    }
    auto study = std::make_unique<Study>();
    study->log = make_log(id);
    for (const auto& e : events) {
      study->log.append(e);
      apply(study->record, e);
    }
    for (const auto& [token, code] : study->record.tokens) tokens_[token] = id;
    ImportSummary summary{id, study->record.respondents.size(), events.size()};
    studies_.emplace(id, std::move(study));
    return summary;
  }

  ImportSummary import_cohort_csv(const std::string& study_id, const std::string& text) {
    Study& s = study(study_id);
    std::unique_lock lock(s.mu);
    require_open(s.record);
    const auto rows = parse_cohort_csv(s.record.bank, text);
    for (const auto& row : rows) {
      try {
        code_answers(s.record.bank, row.respondent, row.answers);
      } catch (const Error& e) {
        throw Error(ErrorKind::malformed, "line " + std::to_string(row.line) + ": " + e.what());
      }
    }
    ImportSummary summary{study_id, rows.size(), 0};
    for (const auto& row : rows) {
      append(s, QuestionnaireSubmitted{row.respondent, row.answers});
      ++summary.events;
    }
    return summary;
  }

  RespondentCode draw_code(const StudyRecord& rec) {
    if (rec.respondents.size() >= static_cast<std::size_t>(RespondentCode::kSpace)) {
      throw Error(ErrorKind::exhausted, "all 4-digit respondent codes are in use");
    }
    std::uniform_int_distribution<int> dist(RespondentCode::kMin, RespondentCode::kMax);
    for (int attempt = 0; attempt < 64; ++attempt) {
      RespondentCode c(dist(rng_));
      if (!rec.respondents.contains(c)) return c;
    }
    std::vector<int> free;
    for (int c = RespondentCode::kMin; c <= RespondentCode::kMax; ++c) {
      if (!rec.respondents.contains(RespondentCode(c))) free.push_back(c);
    }
    std::uniform_int_distribution<std::size_t> pick(0, free.size() - 1);
    return RespondentCode(free[pick(rng_)]);
  }

  std::string random_hex(int bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::lock_guard lock(rng_mu_);
    std::string out;
    for (int i = 0; i < bytes; ++i) {
      const auto v = static_cast<unsigned>(rng_() & 0xffU);
      out.push_back(kDigits[v >> 4]);
      out.push_back(kDigits[v & 0xf]);
    }
    return out;
  }

  EventLog make_log(const std::string& id) const {
    if (options_.data_dir.empty()) return EventLog{};
    std::filesystem::create_directories(options_.data_dir);
    const auto path = options_.data_dir / (id + ".log");
    if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
      throw Error(ErrorKind::conflict, "event log for " + id + " already exists");
    }
    return EventLog::open_file(path, options_.sync_writes);
  }

  void append(Study& s, EventPayload payload) {
    EventLogEntry entry{s.record.last_seq + 1, options_.clock(), std::move(payload)};
    s.log.append(entry);
    apply(s.record, entry);
  }

  void load_existing() {
    if (!std::filesystem::exists(options_.data_dir)) return;
    std::vector<std::filesystem::path> paths;
    for (const auto& e : std::filesystem::directory_iterator(options_.data_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".log") paths.push_back(e.path());
    }
    std::sort(paths.begin(), paths.end());
    for (const auto& path : paths) {
      ParsedLog parsed;
      auto study = std::make_unique<Study>();
      study->log = EventLog::open_file(path, options_.sync_writes, &parsed);
      if (parsed.entries.empty()) continue;
      study->record = replay(parsed.entries);
      const auto id = study->record.study_id;
      for (const auto& [token, code] : study->record.tokens) tokens_[token] = id;
      studies_.emplace(id, std::move(study));
    }
  }

  ServiceOptions options_;
  mutable std::shared_mutex registry_mu_;
  std::map<std::string, std::unique_ptr<Study>> studies_;
  std::map<std::string, std::string> tokens_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

}  // namespace shyvote::service
