#include <cmath>
#include <random>

#include "catch_amalgamated.hpp"
#include "helpers.hpp"
#include "shyvote/scoring.hpp"

using namespace shyvote;
using Catch::Approx;
using testing_util::clean_log;
using testing_util::record;

namespace {

std::vector<TrialRecord> block_of(int block, std::initializer_list<double> latencies) {
  std::vector<TrialRecord> out;
  int i = 0;
  for (double l : latencies) out.push_back(record(block, l, true, i++));
  return out;
}

BlockLatencySummary summary(int block, double mean, double sd, int n) {
  BlockLatencySummary s;
  s.block_index = block;
  s.mean_ms = mean;
  s.sd_ms = sd;
  s.n_trials_used = n;
  return s;
}

}  // namespace

TEST_CASE("block summary of three latencies") {
  const auto s = summarize_block(block_of(3, {500, 700, 600}));
  CHECK(s.mean_ms == Approx(600.0));
  // population SD: sqrt(((-100)^2 + 100^2 + 0) / 3)
  CHECK(s.sd_ms == Approx(std::sqrt(20000.0 / 3.0)));
  CHECK(s.sd_ms == Approx(81.65).margin(0.01));
  CHECK(s.n_trials_used == 3);
  CHECK(s.n_discarded == 0);
}

TEST_CASE("latencies above the ceiling are discarded") {
  const auto s = summarize_block(block_of(5, {500, 12'000, 700}));
  CHECK(s.n_discarded == 1);
  CHECK(s.n_trials_used == 2);
  CHECK(s.mean_ms == Approx(600.0));
}

TEST_CASE("empty blocks are rejected") {
  CHECK_THROWS_AS(summarize_block({}), Error);
  try {
    summarize_block(block_of(3, {20'000, 30'000}));
    FAIL("expected empty_block");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::empty_block);
  }
  CHECK_THROWS_AS(summarize_block(block_of(2, {500})), Error);
}

TEST_CASE("errors are counted, and the improved variant penalizes them") {
  auto recs = block_of(3, {500, 700, 900});
  recs[2].correct = false;
  const auto simple = summarize_block(recs);
  CHECK(simple.n_errors == 1);
  CHECK(simple.mean_ms == Approx(700.0));

  ScoringOptions opt;
  opt.variant = ScoringVariant::improved;
  const auto improved = summarize_block(recs, opt);
  // error trial replaced by mean of correct trials (600) + 600
  CHECK(improved.mean_ms == Approx((500.0 + 700.0 + 1200.0) / 3.0));
}

TEST_CASE("pooled SD is the SD of the union") {
  const auto a = summarize_block(block_of(3, {500, 700, 600}));
  const auto b = summarize_block(block_of(5, {800, 900}));
  const std::vector<double> all{500, 700, 600, 800, 900};
  double mean = 0;
  for (double x : all) mean += x;
  mean /= all.size();
  double ss = 0;
  for (double x : all) ss += (x - mean) * (x - mean);
  CHECK(pooled_sd(a, b) == Approx(std::sqrt(ss / all.size())));
}

TEST_CASE("D from block means and pooled SD") {
  SECTION("600 congruent, 800 incongruent, pooled SD 200") {
    // Pooled SD of the union is 200 when each block has SD sqrt(200^2 - 100^2).
    const double within = std::sqrt(200.0 * 200.0 - 100.0 * 100.0);
    const auto b3 = summary(3, 600, within, 40);
    const auto b5 = summary(5, 800, within, 40);
    REQUIRE(pooled_sd(b3, b5) == Approx(200.0));
    const auto d = compute_d_score(b3, b5, PairingOrder::a_good_first);
    CHECK(d.value == Approx(1.0));
    CHECK(d.classification == Classification::pro_a);
    CHECK(d.congruent_block == 3);

    const auto flipped = compute_d_score(b3, b5, PairingOrder::b_good_first);
    CHECK(flipped.value == Approx(-1.0));
    CHECK(flipped.congruent_block == 5);
  }

  SECTION("equal means give zero") {
    const auto d = compute_d_score(summary(3, 700, 100, 20), summary(5, 700, 120, 20),
                                   PairingOrder::a_good_first);
    CHECK(d.value == 0.0);
    CHECK(d.classification == Classification::neutral);
  }

  SECTION("zero pooled SD") {
    try {
      compute_d_score(summary(3, 700, 0, 20), summary(5, 700, 0, 20), PairingOrder::a_good_first);
      FAIL("expected degenerate_latencies");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::degenerate_latencies);
    }
  }
}

TEST_CASE("respondent scoring reads the plan's pairing") {
  SessionConfig cfg;
  cfg.seed = 3;
  for (auto pairing : {PairingOrder::a_good_first, PairingOrder::b_good_first}) {
    cfg.pairing = pairing;
    const auto plan = build_session_plan(demo_stimulus_set(), cfg);
    // concept_a+good block is fast, the other scored block slow: pro concept_a either way
    const int fast_block = plan.a_good_block();
    const auto log = clean_log(plan, [&](int b, int i) {
      return (b == fast_block ? 600.0 : 800.0) + (i % 2 == 0 ? 50.0 : -50.0);
    });
    const auto d = score_respondent(plan, log);
    CHECK(d.value > 0.0);
    CHECK(d.classification == Classification::pro_a);
  }
}

TEST_CASE("D is unchanged by shifting or scaling latencies") {
  const auto plan = build_session_plan(demo_stimulus_set(), SessionConfig{});
  std::mt19937_64 rng(11);
  std::lognormal_distribution<double> noise(6.0, 0.4);
  const auto log = clean_log(plan, [&](int, int) { return 300.0 + noise(rng); });
  const double d0 = score_respondent(plan, log).value;
  auto transformed = log;
  for (auto& r : transformed) r.latency_ms = 2.5 * r.latency_ms + 40.0;
  CHECK(std::abs(score_respondent(plan, transformed).value - d0) < 1e-9);
}

TEST_CASE("classification bands and distribution") {
  std::vector<DScore> scores;
  for (double v : {-1.0, 0.0, 1.0}) {
    DScore d;
    d.value = v;
    d.classification = classify(v);
    scores.push_back(d);
  }
  const auto dist = score_distribution(scores);
  CHECK(dist.pro_a == 1);
  CHECK(dist.neutral == 1);
  CHECK(dist.pro_b == 1);
  CHECK(dist.ranked.front().value == 1.0);
  CHECK(dist.ranked.back().value == -1.0);
  int total = 0;
  for (const auto& bin : dist.histogram) total += bin.count;
  CHECK(total == 3);

  CHECK(classify(0.15) == Classification::neutral);
  CHECK(classify(-0.15) == Classification::neutral);
  CHECK(classify(0.1500001) == Classification::pro_a);

  std::vector<DScore> zeros(5);
  const auto z = score_distribution(zeros);
  CHECK(z.neutral == 5);
}
