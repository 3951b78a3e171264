#pragma once

// Synthetic respondents with a latent attitude and an explicit-only
// social-desirability shift. Latencies never see the shift, so the IAT side
// of a simulated cohort is unbiased by construction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "shyvote/analysis.hpp"
#include "shyvote/error.hpp"
#include "shyvote/iat_protocol.hpp"
#include "shyvote/questionnaire.hpp"
#include "shyvote/scoring.hpp"

namespace shyvote {

struct LatentRespondent {
  RespondentCode id;
  double theta = 0.0;      // [-1, 1]; negative leans towards concept_a
  double sdr_delta = 0.0;  // explicit-answer shift in code units
  double base_rt_ms = 700.0;
  double rt_noise_sd_ms = 150.0;
};

struct IatSimulationParams {
  double effect_ms_per_theta = 150.0;
  double noise_mean_factor = 2.0;  // lognormal mean as a multiple of its SD
  double floor_ms = 200.0;
  double base_error_rate = 0.05;
  double error_slope = 1.5;  // logit change per unit of theta on merged blocks
  double inter_trial_ms = 250.0;
  double block_break_ms = 5000.0;
};

struct AnswerSimulationParams {
  double answer_noise_sd = 0.5;
  int desirable_pole = -1;  // -1: concept_a end of the scale, +1: concept_b end
};

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

namespace detail {

inline double round_tenth(double x) { return std::round(x * 10.0) / 10.0; }

}  // namespace detail

/// Latency = base + congruency term + zero-mean shifted-lognormal noise,
/// floored. The congruency term is +effect*theta on merged blocks where
/// concept_a shares a side with "good" and -effect*theta where concept_b
/// does. Error odds rise with the same signed term.
inline std::vector<TrialRecord> simulate_iat(const LatentRespondent& who, const SessionPlan& plan,
                                             std::uint64_t seed,
                                             const IatSimulationParams& params = {}) {
  if (!(who.rt_noise_sd_ms > 0.0) || !(who.base_rt_ms > 0.0)) {
    throw Error(ErrorKind::invalid_argument, "latency parameters must be positive");
  }
  std::mt19937_64 rng(seed);
  const double mean = params.noise_mean_factor * who.rt_noise_sd_ms;
  const double sigma2 = std::log1p((who.rt_noise_sd_ms * who.rt_noise_sd_ms) / (mean * mean));
  std::lognormal_distribution<double> noise(std::log(mean) - sigma2 / 2.0, std::sqrt(sigma2));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double base_logit = std::log(params.base_error_rate / (1.0 - params.base_error_rate));

  std::vector<TrialRecord> out;
  out.reserve(plan.total_trials());
  double clock = 0.0;
  for (int b = 1; b <= kBlockCount; ++b) {
    const BlockSpec& spec = plan.block(b);
    int sign = 0;
    if (spec.left.size() == 2) {
      sign = side_of(spec, CategoryRole::concept_a) == side_of(spec, CategoryRole::eval_good) ? 1 : -1;
    }
    if (b > 1) clock += params.block_break_ms;
    const auto& trials = plan.block_trials(b);
    for (std::size_t t = 0; t < trials.size(); ++t) {
      double latency = who.base_rt_ms + sign * params.effect_ms_per_theta * who.theta +
                       (noise(rng) - mean);
      latency = detail::round_tenth(std::max(params.floor_ms, latency));
      const double p_error =
          1.0 / (1.0 + std::exp(-(base_logit + params.error_slope * sign * who.theta)));
      const bool error = unit(rng) < p_error;

      TrialRecord r;
      r.block_index = b;
      r.trial_index = static_cast<int>(t);
      r.stimulus = plan.stimulus_text(trials[t]);
      r.presented_at_ms = detail::round_tenth(clock);
      r.response = error ? opposite(trials[t].correct_side) : trials[t].correct_side;
      r.latency_ms = latency;
      r.correct = !error;
      clock = r.presented_at_ms + latency + params.inter_trial_ms;
      out.push_back(std::move(r));
    }
  }
  return out;
}

namespace detail {

/// Legal code nearest to `x`; ties go towards `tie_direction` (sign).
inline int nearest_code(const std::vector<int>& codes, double x, int tie_direction) {
  int best = codes.front();
  double best_dist = std::abs(x - best);
  for (int c : codes) {
    const double d = std::abs(x - c);
    if (d < best_dist || (d == best_dist && (c - best) * tie_direction > 0)) {
      best = c;
      best_dist = d;
    }
  }
  return best;
}

}  // namespace detail

/// True answer: nearest legal code to 2*theta plus Gaussian noise. Reported
/// answer: true answer moved round(sdr_delta) steps towards the desirable
/// pole, clamped to the question's code range.
inline CodedResponse simulate_answers(const LatentRespondent& who, const QuestionBank& bank,
                                      std::uint64_t seed,
                                      const AnswerSimulationParams& params = {}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, params.answer_noise_sd);
  const int pole = params.desirable_pole < 0 ? -1 : 1;
  const int shift = static_cast<int>(std::lround(who.sdr_delta));
  CodedResponse out{who.id, {}};
  for (const auto& id : bank.analysis_ids()) {
    const auto codes = bank.at(id).codes();
    const double target = 2.0 * who.theta + (params.answer_noise_sd > 0.0 ? noise(rng) : 0.0);
    const int truth = detail::nearest_code(codes, target, 0);
    const double moved = std::clamp(static_cast<double>(truth + pole * shift),
                                    static_cast<double>(codes.front()),
                                    static_cast<double>(codes.back()));
    out.answers[id] = detail::nearest_code(codes, moved, pole);
  }
  return out;
}

struct CohortConfig {
  int n = 25;
  double theta_min = -1.0;
  double theta_max = 1.0;
  double sdr_prevalence = 0.0;  // share of respondents who shift their answers
  double sdr_delta_min = 2.0;
  double sdr_delta_max = 4.0;
  double base_rt_mean_ms = 700.0;
  double base_rt_sd_ms = 100.0;
  double rt_noise_sd_min_ms = 120.0;
  double rt_noise_sd_max_ms = 200.0;
  IatSimulationParams iat;
  AnswerSimulationParams answers;
  std::array<int, kBlockCount> trial_counts{20, 20, 40, 40, 40};
  std::uint64_t seed = 1;
};

struct SyntheticRespondent {
  LatentRespondent latent;
  bool shy = false;
  SessionPlan plan;
  std::vector<TrialRecord> trials;
  CodedResponse response;
};

struct SyntheticCohort {
  StimulusSet stimuli;
  QuestionBank bank;
  std::vector<SyntheticRespondent> respondents;

  int shy_count() const {
    return static_cast<int>(std::count_if(respondents.begin(), respondents.end(),
                                          [](const SyntheticRespondent& r) { return r.shy; }));
  }
};

/// Plan seed used for a respondent of a study: shared by the simulator and
/// the service so a plan can be rebuilt from (study seed, code).
inline std::uint64_t session_seed(std::uint64_t study_seed, RespondentCode code) {
  return derive_seed(study_seed, static_cast<std::uint64_t>(code.value()), 0x5e55);
}

inline SyntheticCohort generate_cohort(const CohortConfig& config,
                                       const StimulusSet& stimuli = demo_stimulus_set(),
                                       const QuestionBank& bank = default_question_bank()) {
  if (config.n < 2) throw Error(ErrorKind::invalid_config, "cohort needs at least 2 respondents");
  if (config.n > RespondentCode::kSpace) {
    throw Error(ErrorKind::invalid_config, "cohort larger than the 4-digit code space");
  }
  if (config.sdr_prevalence < 0.0 || config.sdr_prevalence > 1.0) {
    throw Error(ErrorKind::invalid_config, "sdr prevalence must be in [0, 1]");
  }
  if (config.theta_min < -1.0 || config.theta_max > 1.0 || config.theta_min > config.theta_max) {
    throw Error(ErrorKind::invalid_config, "theta range must lie within [-1, 1]");
  }
  validate(stimuli);

  std::mt19937_64 rng(derive_seed(config.seed, 0xc0407ULL));
  std::uniform_int_distribution<int> code_dist(RespondentCode::kMin, RespondentCode::kMax);
  std::set<int> used;
  std::vector<RespondentCode> codes;
  while (static_cast<int>(codes.size()) < config.n) {
    const int c = code_dist(rng);
    if (used.insert(c).second) codes.emplace_back(c);
  }
  std::vector<int> order(config.n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_shy = static_cast<int>(std::lround(config.sdr_prevalence * config.n));
  std::vector<bool> shy(config.n, false);
  for (int i = 0; i < n_shy; ++i) shy[order[i]] = true;

  std::uniform_real_distribution<double> theta_dist(config.theta_min, config.theta_max);
  std::uniform_real_distribution<double> delta_dist(config.sdr_delta_min, config.sdr_delta_max);
  std::normal_distribution<double> base_dist(config.base_rt_mean_ms, config.base_rt_sd_ms);
  std::uniform_real_distribution<double> noise_dist(config.rt_noise_sd_min_ms,
                                                    config.rt_noise_sd_max_ms);

  SyntheticCohort cohort{stimuli, bank, {}};
  for (int i = 0; i < config.n; ++i) {
    SyntheticRespondent r;
    r.shy = shy[i];
    r.latent.id = codes[i];
    r.latent.theta = theta_dist(rng);
    const double delta = delta_dist(rng);
    r.latent.sdr_delta = r.shy ? delta : 0.0;
    r.latent.base_rt_ms = std::max(300.0, base_dist(rng));
    r.latent.rt_noise_sd_ms = noise_dist(rng);

    SessionConfig session{config.trial_counts, counterbalanced_pairing(i),
                          session_seed(config.seed, codes[i])};
    r.plan = build_session_plan(stimuli, session, codes[i], "sim-" + codes[i].str());
    r.trials = simulate_iat(r.latent, r.plan, derive_seed(config.seed, codes[i].value(), 1),
                            config.iat);
    r.response = simulate_answers(r.latent, bank, derive_seed(config.seed, codes[i].value(), 2),
                                  config.answers);
    cohort.respondents.push_back(std::move(r));
  }
  return cohort;
}

/// D-scores plus coded answers for every synthetic respondent.
inline std::vector<RespondentScores> score_cohort(const SyntheticCohort& cohort,
                                                  const ScoringOptions& options = {}) {
  std::vector<RespondentScores> out;
  for (const auto& r : cohort.respondents) {
    out.push_back({r.latent.id, score_respondent(r.plan, r.trials, options).value, r.response});
  }
  return out;
}

}  // namespace shyvote
