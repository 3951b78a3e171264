#include <random>

#include "catch_amalgamated.hpp"
#include "oracles.hpp"
#include "shyvote/analysis.hpp"
#include "shyvote/ranking.hpp"

using namespace shyvote;
using Catch::Approx;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, bool ties) {
  std::vector<double> v(n);
  if (ties) {
    std::uniform_int_distribution<int> d(-2, 2);
    for (auto& x : v) x = d(rng);
  } else {
    std::normal_distribution<double> d(0.0, 10.0);
    for (auto& x : v) x = d(rng);
  }
  return v;
}

}  // namespace

TEST_CASE("fractional ranks") {
  const std::vector<double> a{10, 20, 30};
  CHECK(fractional_rank(a, RankDirection::descending) == std::vector<double>{3, 2, 1});
  CHECK(fractional_rank(a, RankDirection::ascending) == std::vector<double>{1, 2, 3});
  const std::vector<double> b{5, 5, 1};
  CHECK(fractional_rank(b, RankDirection::descending) == std::vector<double>{1.5, 1.5, 3});
  CHECK_THROWS_AS(fractional_rank(std::vector<double>{}, RankDirection::ascending), Error);
}

TEST_CASE("fractional ranks match the counting oracle") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> len(1, 12);
  for (int i = 0; i < 500; ++i) {
    const auto v = random_vector(rng, len(rng), i % 2 == 0);
    CHECK(fractional_rank(v, RankDirection::ascending) == oracle::rank_ascending(v));
    CHECK(fractional_rank(v, RankDirection::descending) == oracle::rank_descending(v));
  }
}

TEST_CASE("spearman closed forms") {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{1, 3, 2, 4};
  const std::vector<double> r{4, 3, 2, 1};
  CHECK(spearman(a, a) == Approx(1.0));
  CHECK(spearman(a, r) == Approx(-1.0));
  // 1 - 6 * 2 / (4 * 15)
  CHECK(spearman(a, b) == Approx(0.8));
}

TEST_CASE("pearson closed forms") {
  const std::vector<double> x{1, 2, 3, 5, 8};
  std::vector<double> y2, yneg;
  for (double v : x) {
    y2.push_back(2 * v);
    yneg.push_back(-v + 7);
  }
  CHECK(pearson(x, y2) == Approx(1.0));
  CHECK(pearson(x, yneg) == Approx(-1.0));
}

TEST_CASE("constant vectors have no correlation") {
  const std::vector<double> c{3, 3, 3};
  const std::vector<double> x{1, 2, 3};
  for (auto fn : {&pearson, &spearman}) {
    try {
      fn(c, x);
      FAIL("expected undefined_correlation");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::undefined_correlation);
    }
  }
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), Error);
}

TEST_CASE("correlations match the oracle on random 6-vectors") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 300; ++i) {
    const auto x = random_vector(rng, 6, i % 3 == 0);
    const auto y = random_vector(rng, 6, i % 4 == 0);
    if (oracle::rank_ascending(x) == std::vector<double>(6, 3.5) ||
        oracle::rank_ascending(y) == std::vector<double>(6, 3.5)) {
      continue;
    }
    CHECK(std::abs(pearson(x, y) - oracle::pearson(x, y)) < 1e-12);
    CHECK(std::abs(spearman(x, y) - oracle::spearman(x, y)) < 1e-12);
  }
}

TEST_CASE("two respondents correlate at +-1") {
  const std::vector<double> x{1, 2};
  CHECK(std::abs(spearman(x, std::vector<double>{5, 9})) == Approx(1.0));
  CHECK(spearman(x, std::vector<double>{9, 5}) == Approx(-1.0));
}

namespace {

RespondentScores respondent(int code, double d, int answer) {
  CodedResponse r{RespondentCode(code), {{"Q1", answer}}};
  return {RespondentCode(code), d, r};
}

}  // namespace

TEST_CASE("outliers by rank gap") {
  SECTION("identical rankings pick the smallest codes") {
    std::vector<RespondentScores> cohort;
    // IAT ascending = questionnaire descending: rank gaps all zero
    for (int i = 0; i < 6; ++i) cohort.push_back(respondent(2000 + (5 - i) * 7, i, -i));
    const auto paired = pair_scores(cohort, uniform_scheme({"Q1"}));
    for (const auto& p : paired) CHECK(p.iat_rank == p.q_rank);
    const auto out = find_outliers(paired, 3);
    CHECK(out == std::vector{RespondentCode(2000), RespondentCode(2007), RespondentCode(2014)});
    CHECK(find_outliers(paired, 0).empty());
    CHECK_THROWS_AS(find_outliers(paired, 6), Error);
  }

  SECTION("4th on the questionnaire, 2nd lowest on the IAT") {
    // 25 respondents; 1980 sits at questionnaire rank 4 and IAT rank 24
    std::vector<PairedEntry> paired;
    for (int i = 1; i <= 25; ++i) {
      PairedEntry e;
      e.respondent = RespondentCode(3000 + i);
      e.iat_rank = i;
      e.q_rank = i;
      paired.push_back(e);
    }
    paired[3].respondent = RespondentCode(1980);
    paired[3].q_rank = 4;
    paired[3].iat_rank = 24;
    paired[23].iat_rank = 4;
    const auto out = find_outliers(paired, 2);
    CHECK(std::abs(paired[3].iat_rank - paired[3].q_rank) == 20);
    CHECK(out.front() == RespondentCode(1980));
  }
}

TEST_CASE("pairing orders IAT ascending and questionnaire descending") {
  std::vector<RespondentScores> cohort{respondent(1001, -0.5, 2), respondent(1002, 0.1, 0),
                                       respondent(1003, 0.7, -2)};
  const auto paired = pair_scores(cohort, uniform_scheme({"Q1"}));
  CHECK(paired[0].iat_rank == 1);
  CHECK(paired[0].q_rank == 1);
  CHECK(paired[2].iat_rank == 3);
  CHECK(paired[2].q_rank == 3);
}
