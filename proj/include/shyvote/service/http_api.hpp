#pragma once

// REST routes over StudyService. Bodies are JSON except export/import, which
// carry the bundle (jsonl) or cohort table (csv) verbatim.

#include <string>

#include "httplib.h"
#include "shyvote/error.hpp"
#include "shyvote/service/serialization.hpp"
#include "shyvote/service/study_service.hpp"

namespace shyvote::service {

inline int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::not_found:
      return 404;
    case ErrorKind::conflict:
    case ErrorKind::locked:
    case ErrorKind::exhausted:
      return 409;
    case ErrorKind::insufficient_data:
    case ErrorKind::no_signal:
    case ErrorKind::undefined_correlation:
      return 422;
    case ErrorKind::corruption:
      return 500;
    default:
      return 400;
  }
}

inline json report_json(const StoredReport& r) {
  return json{{"request", r.request},
              {"report", r.report},
              {"unscored", r.unscored},
              {"created_at", r.created_at}};
}

namespace detail {

inline json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::malformed, std::string("request body is not JSON: ") + e.what());
  }
}

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_json(res, http_status(e.kind()),
                json{{"error", to_string(e.kind())}, {"message", e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, json{{"error", "internal"}, {"message", e.what()}});
    }
  };
}

inline ExportFormat format_param(const httplib::Request& req) {
  return parse_export_format(req.has_param("format") ? req.get_param_value("format") : "jsonl");
}

}  // namespace detail

/// `defaults` fills in a study's config and `default_k` an analysis request's
/// k_outliers when the body leaves them out.
inline void mount_routes(httplib::Server& server, StudyService& svc, StudyConfig defaults = {},
                         int default_k = 4) {
  using detail::guarded;
  using detail::send_json;
  using Req = httplib::Request;
  using Res = httplib::Response;

  server.Post("/studies", guarded([&svc, defaults](const Req& req, Res& res) {
                const auto body = detail::parse_body(req);
                StudyDefinition def;
                def.config = defaults;
                if (body.contains("study_id")) def.study_id = shyvote::detail::field<std::string>(body, "study_id");
                if (body.contains("stimuli")) def.stimuli = shyvote::detail::field<StimulusSet>(body, "stimuli");
                if (body.contains("bank")) def.bank = shyvote::detail::field<QuestionBank>(body, "bank");
                if (body.contains("config")) def.config = shyvote::detail::field<StudyConfig>(body, "config");
                const auto id = svc.create_study(def);
                send_json(res, 201, json{{"study_id", id}});
              }));

  server.Post("/studies/:id/sessions", guarded([&svc](const Req& req, Res& res) {
                const auto body = detail::parse_body(req);
                std::optional<int> code;
                if (body.contains("respondent")) code = shyvote::detail::field<int>(body, "respondent");
                const auto info = svc.create_session(req.path_params.at("id"), code);
                send_json(res, 201,
                          json{{"study_id", info.study_id},
                               {"token", info.token},
                               {"respondent", info.code},
                               {"pairing", info.plan.pairing}});
              }));

  server.Get("/sessions/:token/plan", guarded([&svc](const Req& req, Res& res) {
               send_json(res, 200, plan_to_json(svc.plan(req.path_params.at("token"))));
             }));

  server.Post("/sessions/:token/trials", guarded([&svc](const Req& req, Res& res) {
                const auto body = detail::parse_body(req);
                const json& list = body.is_array() ? body : body.value("trials", json::array());
                if (!list.is_array()) throw Error(ErrorKind::malformed, "trials must be an array");
                std::vector<TrialRecord> batch;
                for (std::size_t i = 0; i < list.size(); ++i) {
                  try {
                    batch.push_back(list[i].get<TrialRecord>());
                  } catch (const Error& e) {
                    throw Error(ErrorKind::malformed,
                                "trials[" + std::to_string(i) + "]: " + e.what());
                  }
                }
                const auto ack = svc.submit_trials(req.path_params.at("token"), batch);
                send_json(res, 200,
                          json{{"status", ack.status},
                               {"accepted", ack.accepted},
                               {"duplicates", ack.duplicates},
                               {"validation", ack.validation}});
              }));

  server.Post("/sessions/:token/questionnaire", guarded([&svc](const Req& req, Res& res) {
                const auto body = detail::parse_body(req);
                const json& answers = body.contains("answers") ? body.at("answers") : body;
                RawAnswers raw;
                try {
                  raw = answers.get<RawAnswers>();
                } catch (const json::exception&) {
                  throw Error(ErrorKind::malformed, "answers must map question ids to option texts");
                }
                const auto ack = svc.submit_questionnaire(req.path_params.at("token"), raw);
                send_json(res, 200,
                          json{{"respondent", ack.code}, {"replaced", ack.replaced}, {"coded", ack.coded}});
              }));

  server.Post("/studies/:id/analysis", guarded([&svc, default_k](const Req& req, Res& res) {
                auto body = detail::parse_body(req);
                if (body.is_object() && !body.contains("k_outliers")) body["k_outliers"] = default_k;
                const auto stored = svc.run_analysis(req.path_params.at("id"), request_from_json(body));
                send_json(res, 200, report_json(stored));
              }));

  server.Get("/studies/:id/report", guarded([&svc](const Req& req, Res& res) {
               const auto stored = svc.report(req.path_params.at("id"));
               if (!stored) throw Error(ErrorKind::not_found, "no analysis has been run yet");
               if (req.has_param("format") && req.get_param_value("format") == "csv") {
                 res.set_content(format_report_csv(stored->report), "text/csv");
                 return;
               }
               send_json(res, 200, report_json(*stored));
             }));

  server.Get("/studies/:id/export", guarded([&svc](const Req& req, Res& res) {
               const auto format = detail::format_param(req);
               res.set_content(svc.export_study(req.path_params.at("id"), format),
                               format == ExportFormat::jsonl ? "application/x-ndjson" : "text/csv");
             }));

  server.Post("/studies/:id/import", guarded([&svc](const Req& req, Res& res) {
                const auto summary =
                    svc.import_study(req.path_params.at("id"), detail::format_param(req), req.body);
                send_json(res, 201,
                          json{{"study_id", summary.study_id},
                               {"respondents", summary.respondents},
                               {"events", summary.events}});
              }));

  server.Post("/studies/:id/lock", guarded([&svc](const Req& req, Res& res) {
                svc.lock_study(req.path_params.at("id"));
                send_json(res, 200, json{{"state", "locked"}});
              }));
}

}  // namespace shyvote::service
