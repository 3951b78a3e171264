#include <algorithm>
#include <numeric>

#include "catch_amalgamated.hpp"
#include "oracles.hpp"
#include "shyvote/pipeline.hpp"
#include "shyvote/simulator.hpp"

using namespace shyvote;
using Catch::Approx;

namespace {

SessionPlan plan_for(std::uint64_t seed, PairingOrder pairing = PairingOrder::a_good_first) {
  SessionConfig cfg;
  cfg.seed = seed;
  cfg.pairing = pairing;
  return build_session_plan(demo_stimulus_set(), cfg, RespondentCode(1000 + seed % 9000));
}

double block_mean(const std::vector<TrialRecord>& trials, int block) {
  double sum = 0;
  int n = 0;
  for (const auto& t : trials) {
    if (t.block_index == block) sum += t.latency_ms, ++n;
  }
  return sum / n;
}

double uniform_spearman(const SyntheticCohort& cohort) {
  const auto scores = score_cohort(cohort);
  const auto ids = default_question_bank().analysis_ids();
  return *run_report(scores, {uniform_scheme(ids)}, 4).rows[0].spearman;
}

}  // namespace

TEST_CASE("simulated logs are valid and deterministic") {
  LatentRespondent who;
  who.theta = 0.4;
  const auto plan = plan_for(9);
  const auto a = simulate_iat(who, plan, 42);
  const auto b = simulate_iat(who, plan, 42);
  CHECK(a == b);
  CHECK(a.size() == plan.total_trials());
  const auto report = validate_response_log(plan, a);
  CHECK_FALSE(report.has(IssueKind::missing_trials));
  CHECK_FALSE(report.has(IssueKind::non_monotone_time));
  CHECK_FALSE(report.has(IssueKind::stimulus_mismatch));
  CHECK_FALSE(report.has(IssueKind::correctness_mismatch));
  for (const auto& t : a) CHECK(t.latency_ms >= 200.0);
}

TEST_CASE("theta 1 opens a gap of twice the effect between scored blocks") {
  // positive theta slows the concept_a+good block (block 3 here):
  // (base + effect) - (base - effect) = 300 ms at effect 150
  LatentRespondent who;
  who.theta = 1.0;
  double total = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto plan = plan_for(seed);
    const auto trials = simulate_iat(who, plan, seed);
    total += block_mean(trials, 3) - block_mean(trials, 5);
  }
  CHECK(total / 100.0 == Approx(300.0).margin(50.0));
}

TEST_CASE("theta 0 gives D near zero on average") {
  LatentRespondent who;
  who.theta = 0.0;
  double sum = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto plan = plan_for(seed, counterbalanced_pairing(seed));
    sum += score_respondent(plan, simulate_iat(who, plan, seed * 7)).value;
  }
  CHECK(std::abs(sum / 100.0) < 0.1);
}

TEST_CASE("answers without social desirability shift") {
  const auto bank = default_question_bank();
  LatentRespondent who;
  who.theta = 0.7;
  who.sdr_delta = 0.0;
  const auto honest = simulate_answers(who, bank, 3);
  AnswerSimulationParams params;
  // same seed, same latent answer: a shift of 0 changes nothing
  CHECK(simulate_answers(who, bank, 3, params) == honest);
  validate(bank, honest);

  who.theta = 1.0;
  who.sdr_delta = 10.0;
  const auto shy = simulate_answers(who, bank, 3);
  for (const auto& [id, code] : shy.answers) {
    const auto codes = bank.at(id).codes();
    CHECK(code == *std::min_element(codes.begin(), codes.end()));
  }
}

TEST_CASE("cohort shape and shy count") {
  CohortConfig cfg;
  cfg.n = 25;
  cfg.sdr_prevalence = 0.3;
  cfg.seed = 17;
  const auto cohort = generate_cohort(cfg);
  CHECK(cohort.respondents.size() == 25);
  CHECK(cohort.shy_count() == 8);  // round(0.3 * 25) = 7.5 -> 8
  std::set<RespondentCode> codes;
  for (const auto& r : cohort.respondents) {
    codes.insert(r.latent.id);
    CHECK(r.trials.size() == r.plan.total_trials());
    CHECK(r.shy == (r.latent.sdr_delta > 0));
  }
  CHECK(codes.size() == 25);

  const auto again = generate_cohort(cfg);
  for (std::size_t i = 0; i < 25; ++i) {
    CHECK(again.respondents[i].trials == cohort.respondents[i].trials);
    CHECK(again.respondents[i].response == cohort.respondents[i].response);
  }

  cfg.n = 1;
  CHECK_THROWS_AS(generate_cohort(cfg), Error);
}

TEST_CASE("latencies do not depend on the answer shift") {
  CohortConfig cfg;
  cfg.n = 10;
  cfg.seed = 5;
  const auto honest = generate_cohort(cfg);
  cfg.sdr_prevalence = 1.0;
  const auto shy = generate_cohort(cfg);
  for (std::size_t i = 0; i < 10; ++i) CHECK(honest.respondents[i].trials == shy.respondents[i].trials);
}

TEST_CASE("honest cohort: questionnaire ranking follows theta") {
  CohortConfig cfg;
  cfg.n = 200;
  cfg.seed = 8;
  const auto cohort = generate_cohort(cfg);
  std::vector<double> theta, totals;
  for (const auto& r : cohort.respondents) {
    theta.push_back(r.latent.theta);
    totals.push_back(std::accumulate(r.response.answers.begin(), r.response.answers.end(), 0.0,
                                     [](double acc, const auto& kv) { return acc + kv.second; }));
  }
  CHECK(oracle::spearman(theta, totals) >= 0.9);
}

TEST_CASE("shy respondents weaken the pipeline correlation") {
  double honest = 0, shy = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CohortConfig cfg;
    cfg.n = 25;
    cfg.seed = seed;
    honest += uniform_spearman(generate_cohort(cfg));
    cfg.sdr_prevalence = 0.5;
    shy += uniform_spearman(generate_cohort(cfg));
  }
  CHECK(honest / 5 - shy / 5 >= 0.2);
}

TEST_CASE("median correlation falls as prevalence rises") {
  std::vector<double> medians;
  for (double p : {0.0, 0.2, 0.4, 0.6}) {
    std::vector<double> rhos;
    for (std::uint64_t seed = 1; seed <= 21; ++seed) {
      CohortConfig cfg;
      cfg.n = 25;
      cfg.seed = 1000 + seed;
      cfg.sdr_prevalence = p;
      rhos.push_back(uniform_spearman(generate_cohort(cfg)));
    }
    std::nth_element(rhos.begin(), rhos.begin() + 10, rhos.end());
    medians.push_back(rhos[10]);
  }
  INFO(medians[0] << " " << medians[1] << " " << medians[2] << " " << medians[3]);
  for (std::size_t i = 1; i < medians.size(); ++i) CHECK(medians[i] < medians[i - 1]);
}
