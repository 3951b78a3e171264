#include "catch_amalgamated.hpp"
#include "oracles.hpp"
#include "shyvote/questionnaire.hpp"

using namespace shyvote;
using Catch::Approx;

namespace {

// Answer spread of the 25-respondent study, per question: {code, count}.
const std::vector<std::pair<std::string, std::vector<std::pair<int, int>>>>& table_counts() {
  static const std::vector<std::pair<std::string, std::vector<std::pair<int, int>>>> t{
      {"Q1", {{-2, 12}, {-1, 2}, {0, 1}, {1, 2}, {2, 8}}},
      {"Q2", {{-2, 11}, {2, 14}}},
      {"Q3", {{-2, 20}, {0, 4}, {2, 1}}},
      {"Q4", {{-2, 14}, {2, 11}}},
      {"Q5", {{-2, 8}, {0, 4}, {2, 13}}},
      {"Q9", {{-2, 16}, {2, 9}}},
      {"Q10", {{0, 6}, {1, 1}, {2, 18}}},
  };
  return t;
}

std::vector<std::pair<std::string, std::map<int, int>>> as_counts() {
  std::vector<std::pair<std::string, std::map<int, int>>> out;
  for (const auto& [id, cc] : table_counts()) out.emplace_back(id, std::map<int, int>(cc.begin(), cc.end()));
  return out;
}

RawAnswers neutral_answers() {
  return {{"Q1", "Neutral"}, {"Q2", "Yes"},      {"Q3", "Not care"},
          {"Q4", "No"},      {"Q5", "Not all"},  {"Q9", "Yes"},
          {"Q10", "Didn't care"}};
}

}  // namespace

TEST_CASE("default bank codes") {
  const auto bank = default_question_bank();
  CHECK(bank.analysis_ids() == std::vector<std::string>{"Q1", "Q2", "Q3", "Q4", "Q5", "Q9", "Q10"});
  CHECK(bank.at("Q1").code_of("Very likely") == -2);
  CHECK(bank.at("Q2").code_of("No") == 2);
  CHECK(bank.at("Q2").code_of("Yes") == -2);
  CHECK(bank.at("Q10").code_of("Very unhappy") == 2);
  CHECK_FALSE(bank.at("Q7").in_analysis);
}

TEST_CASE("coding answers") {
  const auto bank = default_question_bank();
  auto raw = neutral_answers();
  raw["Q1"] = "Very likely";
  raw["Q2"] = "No";
  raw["Q7"] = "Nobody";  // free text, dropped
  const auto coded = code_answers(bank, RespondentCode(1980), raw);
  CHECK(coded.answers.at("Q1") == -2);
  CHECK(coded.answers.at("Q2") == 2);
  CHECK_FALSE(coded.answers.contains("Q7"));
  CHECK(coded.answers.size() == 7);
  CHECK(decode_answers(bank, coded).at("Q2") == "No");

  raw["Q1"] = "Maybe";
  try {
    code_answers(bank, RespondentCode(1980), raw);
    FAIL("expected unknown_option");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unknown_option);
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("Q1"));
  }

  auto missing = neutral_answers();
  missing.erase("Q9");
  CHECK_THROWS_WITH(code_answers(bank, RespondentCode(1000), missing),
                    Catch::Matchers::ContainsSubstring("Q9"));
}

TEST_CASE("weighted totals") {
  const std::vector<std::string> ids{"Q1", "Q2", "Q3", "Q4", "Q5", "Q9", "Q10"};
  CodedResponse zero{RespondentCode(1000), {}};
  for (const auto& id : ids) zero.answers[id] = 0;
  CHECK(total_score(zero, uniform_scheme(ids)) == 0.0);
  CHECK(total_score(zero, positional_scheme(ids, manual_weights(), "manual")) == 0.0);

  // a fixed answer vector under rank weights 4,1.5,7,1.5,3,5,6
  const CodedResponse fixed{RespondentCode(1980),
                            {{"Q1", 1}, {"Q2", 2}, {"Q3", 0}, {"Q4", 2}, {"Q5", 2}, {"Q9", 2}, {"Q10", 0}}};
  const auto ranks = positional_scheme(ids, {4, 1.5, 7, 1.5, 3, 5, 6}, "ranks");
  CHECK(total_score(fixed, ranks) == 26.0);
  CHECK(total_score(fixed, uniform_scheme(ids)) == 9.0);

  auto doubled = ranks;
  for (auto& [id, w] : doubled.weights) w *= 2;
  CHECK(total_score(fixed, doubled) == 52.0);

  CHECK_THROWS_AS(positional_scheme(ids, {1, 2}, "short"), Error);
  CHECK_THROWS_AS(positional_scheme(ids, {0, 0, 0, 0, 0, 0, 0}, "zero"), Error);
  CHECK_THROWS_AS(positional_scheme(ids, {1, 1, 1, -1, 1, 1, 1}, "neg"), Error);
}

TEST_CASE("variance from the published counts") {
  const auto stats = question_stats_from_counts(as_counts());
  REQUIRE(stats.size() == 7);
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const auto expected = oracle::variance(oracle::expand_counts(table_counts()[i].second));
    CHECK(stats[i].variance == Approx(expected).epsilon(1e-12));
    CHECK(stats[i].deviation == Approx(std::sqrt(expected)));
  }
  // Q2: mean (-22 + 28)/25 = 0.24, E[x^2] = 4, variance 4 - 0.0576
  CHECK(stats[1].variance == Approx(3.9424).epsilon(1e-12));
  CHECK(stats[1].variance == stats[3].variance);
  CHECK(stats[1].variance_rank == 1.5);
  CHECK(stats[3].variance_rank == 1.5);
  CHECK(stats[1].reverse_deviation_rank == stats[3].reverse_deviation_rank);

  // the two smallest variances hold the two largest rank numbers
  std::vector<double> var_ranks;
  for (const auto& s : stats) var_ranks.push_back(s.variance_rank);
  CHECK(stats[2].variance_rank + stats[6].variance_rank == 13.0);

  // frozen ranks: 1 = largest variance
  CHECK(var_ranks == std::vector<double>{4, 1.5, 6, 1.5, 5, 3, 7});
}

TEST_CASE("reverse deviation ranks put the smallest SD first") {
  const auto stats = question_stats_from_counts(as_counts());
  std::vector<double> inv;
  for (const auto& s : stats) inv.push_back(1.0 / std::sqrt(s.variance));
  const auto expected = oracle::rank_descending(inv);
  for (std::size_t i = 0; i < stats.size(); ++i) CHECK(stats[i].reverse_deviation_rank == expected[i]);

  // zero spread: infinite 1/SD, rank 1
  const auto flat = question_stats_from_counts({{"A", {{-2, 5}}}, {"B", {{-2, 2}, {2, 3}}}});
  CHECK(flat[0].variance == 0.0);
  CHECK(flat[0].reverse_deviation_rank == 1.0);
  CHECK(flat[1].reverse_deviation_rank == 2.0);
}

TEST_CASE("single respondent cohort ties everything") {
  const auto bank = default_question_bank();
  const auto one = code_answers(bank, RespondentCode(1234), neutral_answers());
  const auto stats = question_stats(bank, {one});
  for (const auto& s : stats) {
    CHECK(s.variance == 0.0);
    CHECK(s.variance_rank == 4.0);
    CHECK(s.reverse_deviation_rank == 4.0);
  }
}

TEST_CASE("derived weight schemes use rank numbers as weights") {
  const auto stats = question_stats_from_counts(as_counts());
  const auto uni = derive_weight_scheme(stats, WeightKind::uniform);
  for (const auto& [id, w] : uni.weights) CHECK(w == 1.0);
  CHECK(uni.weights.size() == 7);
  const auto var = derive_weight_scheme(stats, WeightKind::variance_rank);
  const auto rev = derive_weight_scheme(stats, WeightKind::reverse_deviation_rank);
  for (const auto& s : stats) {
    CHECK(var.weight(s.question_id) == s.variance_rank);
    CHECK(rev.weight(s.question_id) == s.reverse_deviation_rank);
  }

  // supplied rank columns pass straight through
  const std::map<std::string, double> var_column{{"Q1", 4},   {"Q2", 1.5}, {"Q3", 7}, {"Q4", 1.5},
                                                 {"Q5", 3},   {"Q9", 5},   {"Q10", 6}};
  const std::map<std::string, double> rev_column{{"Q1", 5},   {"Q2", 1.5}, {"Q3", 6}, {"Q4", 1.5},
                                                 {"Q5", 4},   {"Q9", 3},   {"Q10", 7}};
  CHECK(scheme_from_ranks(WeightKind::variance_rank, var_column).weights == var_column);
  CHECK(scheme_from_ranks(WeightKind::reverse_deviation_rank, rev_column).weights == rev_column);
}

TEST_CASE("question bank file round trip") {
  const auto bank = default_question_bank();
  const auto text = format_question_bank(bank);
  const auto back = parse_question_bank(text);
  CHECK(back.questions() == bank.questions());
  CHECK_THROWS_AS(parse_question_bank("[Q1]\nanalysis: yes\ntext: x\noption -2: a\n"), Error);
  CHECK_THROWS_AS(parse_question_bank("[Q1]\nanalysis: yes\ntext: x\noption -3: a\noption 2: b\n"),
                  Error);
}

TEST_CASE("cohort csv") {
  const auto bank = default_question_bank();
  std::vector<CohortRow> rows{{RespondentCode(1001), neutral_answers(), 0}};
  auto second = neutral_answers();
  second["Q7"] = "Harry, \"obviously\"";
  rows.push_back({RespondentCode(1002), second, 0});
  const auto text = format_cohort_csv(bank, rows);
  const auto parsed = parse_cohort_csv(bank, text);
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[1].answers.at("Q7") == "Harry, \"obviously\"");
  CHECK(parsed[0].answers.at("Q10") == "Didn't care");
  CHECK(format_cohort_csv(bank, parsed) == text);

  // numeric cells are codes
  const auto numeric = parse_cohort_csv(bank, "respondent,Q1,Q2,Q3,Q4,Q5,Q9,Q10\n1500,-2,2,0,2,0,-2,1\n");
  CHECK(code_answers(bank, numeric[0].respondent, numeric[0].answers).answers.at("Q10") == 1);

  try {
    parse_cohort_csv(bank, "respondent,Q1,Q2,Q3,Q4,Q5,Q10\n1500,-2,2,0,2,0,1\n");
    FAIL("expected a missing column error");
  } catch (const Error& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("Q9"));
  }
  CHECK_THROWS_WITH(parse_cohort_csv(bank, "respondent,Q1,Q2,Q3,Q4,Q5,Q9,Q10\n15,-2,2,0,2,0,-2,1\n"),
                    Catch::Matchers::ContainsSubstring("line 2"));
}
