#pragma once

// Loads a synthetic cohort into a study through the same calls a browser
// would make: one session per respondent, trials posted block by block,
// then the questionnaire as option texts.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "shyvote/service/study_service.hpp"
#include "shyvote/simulator.hpp"

namespace shyvote::service {

/// Clock that advances a fixed step per reading, for reproducible logs.
inline std::function<std::int64_t()> stepping_clock(std::int64_t start_ms = 1'700'000'000'000,
                                                    std::int64_t step_ms = 1000) {
  auto now = std::make_shared<std::int64_t>(start_ms - step_ms);
  return [now, step_ms] { return *now += step_ms; };
}

inline std::string populate_study(StudyService& svc, const SyntheticCohort& cohort,
                                  const CohortConfig& config, const std::string& study_id = {}) {
  StudyDefinition def;
  def.study_id = study_id;
  def.stimuli = cohort.stimuli;
  def.bank = cohort.bank;
  def.config.trial_counts = config.trial_counts;
  def.config.seed = config.seed;
  const auto id = svc.create_study(def);
  for (const auto& r : cohort.respondents) {
    const auto session = svc.create_session(id, r.latent.id.value());
    for (int b = 1; b <= kBlockCount; ++b) {
      svc.submit_trials(session.token, records_for_block(r.trials, b));
    }
    svc.submit_questionnaire(session.token, decode_answers(cohort.bank, r.response));
  }
  return id;
}

}  // namespace shyvote::service
