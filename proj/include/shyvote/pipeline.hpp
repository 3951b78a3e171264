#pragma once

// End-to-end analysis of a scored cohort: scheme resolution by name plus the
// report grid. Used by both the service and the command line.

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "shyvote/analysis.hpp"
#include "shyvote/error.hpp"
#include "shyvote/questionnaire.hpp"
#include "shyvote/scoring.hpp"

namespace shyvote {

enum class ReportLayout {
  grid,     // every scheme with and without outliers
  six_row,  // uniform, variance x2, reverse deviation x2, manual excluding outliers
};

struct AnalysisRequest {
  std::vector<std::string> schemes{"uniform", "variance", "revdev", "manual"};
  int k_outliers = 4;
  ReportLayout layout = ReportLayout::grid;
  ScoringVariant variant = ScoringVariant::simple;
  SearchConfig search;
};

/// Parses "0.1,0.2,5" style lists.
inline std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorKind::invalid_argument, "not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorKind::invalid_argument, "empty number list");
  return out;
}

/// Scheme names: uniform, variance, revdev, manual, custom:<w1,w2,...>,
/// optimized, optimized:pearson.
inline WeightScheme resolve_scheme(const std::string& name, const std::vector<QuestionStats>& stats,
                                   const std::vector<RespondentScores>& cohort,
                                   const AnalysisRequest& request) {
  std::vector<std::string> ids;
  for (const auto& s : stats) ids.push_back(s.question_id);
  if (name == "uniform") return uniform_scheme(ids);
  if (name == "variance") return derive_weight_scheme(stats, WeightKind::variance_rank);
  if (name == "revdev") return derive_weight_scheme(stats, WeightKind::reverse_deviation_rank);
  if (name == "manual") return positional_scheme(ids, manual_weights(), "manual");
  if (name.starts_with("custom:")) {
    return positional_scheme(ids, parse_number_list(name.substr(7)), name);
  }
  if (name == "optimized" || name == "optimized:spearman" || name == "optimized:pearson") {
    const auto objective = name == "optimized:pearson" ? Objective::pearson : Objective::spearman;
    auto result = optimize_weights(cohort, objective, request.k_outliers, request.search,
                                   {uniform_scheme(ids),
                                    derive_weight_scheme(stats, WeightKind::variance_rank),
                                    derive_weight_scheme(stats, WeightKind::reverse_deviation_rank)});
    return result.scheme;
  }
  throw Error(ErrorKind::invalid_argument, "unknown weighting scheme '" + name + "'");
}

/// Works on the cohort in respondent-code order.
inline AnalysisReport analyze_cohort(const QuestionBank& bank,
                                     std::vector<RespondentScores> cohort,
                                     const AnalysisRequest& request = {}) {
  std::sort(cohort.begin(), cohort.end(),
            [](const auto& a, const auto& b) { return a.respondent < b.respondent; });
  if (cohort.size() < 3) {
    throw Error(ErrorKind::insufficient_data,
                "need at least 3 respondents with both instruments, have " +
                    std::to_string(cohort.size()));
  }
  std::vector<CodedResponse> responses;
  for (const auto& r : cohort) responses.push_back(r.response);
  const auto stats = question_stats(bank, responses);

  if (request.layout == ReportLayout::six_row) {
    const std::string custom = request.schemes.empty() ? "manual" : request.schemes.back();
    return run_report(cohort, six_row_layout(stats, resolve_scheme(custom, stats, cohort, request)),
                      request.k_outliers);
  }
  std::vector<WeightScheme> schemes;
  for (const auto& name : request.schemes) {
    schemes.push_back(resolve_scheme(name, stats, cohort, request));
  }
  return run_report(cohort, schemes, request.k_outliers);
}

}  // namespace shyvote
