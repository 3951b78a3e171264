#pragma once

// Pairs implicit and explicit scores, ranks them, removes outliers, computes
// correlations and searches question weights.
//
// Orientation: both rankings put the most pro-concept_b respondent first.
// A high D-score leans towards concept_a, a high questionnaire total towards
// concept_b, so IAT ranks ascend with D and questionnaire ranks descend with
// the total. Pearson is taken between -D and the total for the same reason.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "shyvote/error.hpp"
#include "shyvote/iat_protocol.hpp"
#include "shyvote/questionnaire.hpp"
#include "shyvote/ranking.hpp"

namespace shyvote {

namespace detail {

inline bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace detail

/// Product-moment correlation. Throws Error(undefined_correlation) for
/// mismatched lengths, n < 2 or a constant input.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::invalid_argument, "correlation inputs differ in length");
  }
  if (x.size() < 2) throw Error(ErrorKind::undefined_correlation, "need at least 2 points");
  if (detail::is_constant(x) || detail::is_constant(y)) {
    throw Error(ErrorKind::undefined_correlation, "constant input");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Spearman's rho as the Pearson correlation of fractional ranks, which is
/// exact in the presence of ties. Rank vectors may be passed directly:
/// re-ranking a fractional ranking leaves it unchanged.
inline double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::invalid_argument, "correlation inputs differ in length");
  }
  if (a.size() < 2) throw Error(ErrorKind::undefined_correlation, "need at least 2 points");
  const auto ra = fractional_rank(a);
  const auto rb = fractional_rank(b);
  return pearson(ra, rb);
}

struct RespondentScores {
  RespondentCode respondent;
  double d_score = 0.0;
  CodedResponse response;
};

struct PairedEntry {
  RespondentCode respondent;
  double d_score = 0.0;
  double q_total = 0.0;
  double iat_rank = 0.0;
  double q_rank = 0.0;
};

using PairedScores = std::vector<PairedEntry>;

inline PairedScores pair_scores(const std::vector<RespondentScores>& cohort,
                                const WeightScheme& scheme) {
  if (cohort.empty()) throw Error(ErrorKind::invalid_argument, "empty cohort");
  PairedScores out;
  std::vector<double> d;
  std::vector<double> totals;
  for (const auto& r : cohort) {
    out.push_back({r.respondent, r.d_score, total_score(r.response, scheme), 0.0, 0.0});
    d.push_back(r.d_score);
    totals.push_back(out.back().q_total);
  }
  const auto iat = fractional_rank(d, RankDirection::ascending);
  const auto q = fractional_rank(totals, RankDirection::descending);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].iat_rank = iat[i];
    out[i].q_rank = q[i];
  }
  return out;
}

/// The `k` respondents with the largest |iat_rank - q_rank|; ties go to the
/// smaller respondent code.
inline std::vector<RespondentCode> find_outliers(const PairedScores& paired, int k) {
  if (k < 0 || static_cast<std::size_t>(k) >= paired.size()) {
    throw Error(ErrorKind::invalid_argument,
                "outlier count " + std::to_string(k) + " must be in [0, cohort size)");
  }
  std::vector<const PairedEntry*> order;
  for (const auto& p : paired) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(), [](const PairedEntry* a, const PairedEntry* b) {
    const double ga = std::abs(a->iat_rank - a->q_rank);
    const double gb = std::abs(b->iat_rank - b->q_rank);
    if (ga != gb) return ga > gb;
    return a->respondent < b->respondent;
  });
  std::vector<RespondentCode> out;
  for (int i = 0; i < k; ++i) out.push_back(order[i]->respondent);
  return out;
}

inline std::vector<std::string> question_ids(const std::vector<RespondentScores>& cohort) {
  if (cohort.empty()) throw Error(ErrorKind::invalid_argument, "empty cohort");
  std::vector<std::string> ids;
  for (const auto& [id, code] : cohort.front().response.answers) ids.push_back(id);
  for (const auto& r : cohort) {
    if (r.response.answers.size() != ids.size() ||
        !std::all_of(ids.begin(), ids.end(),
                     [&](const std::string& id) { return r.response.answers.contains(id); })) {
      throw Error(ErrorKind::invalid_argument,
                  "respondent " + r.respondent.str() + " answered a different question set");
    }
  }
  return ids;
}

enum class Objective { spearman, pearson };

inline const char* to_string(Objective o) { return o == Objective::spearman ? "spearman" : "pearson"; }

enum class OutlierPolicy { all_respondents, excluding_outliers };

inline const char* to_string(OutlierPolicy p) {
  return p == OutlierPolicy::all_respondents ? "all" : "excluding_outliers";
}

struct ReportRowSpec {
  WeightScheme scheme;
  OutlierPolicy policy = OutlierPolicy::all_respondents;
};

struct ReportRow {
  std::string scheme;
  OutlierPolicy policy = OutlierPolicy::all_respondents;
  std::optional<double> spearman;
  std::optional<double> pearson;
  int n_respondents = 0;
  std::vector<RespondentCode> removed;
  std::string error;  // set when a correlation is undefined

  bool valid() const { return error.empty(); }
};

struct AnalysisReport {
  int cohort_size = 0;
  int k_outliers = 0;
  std::vector<RespondentCode> outliers;
  std::vector<ReportRow> rows;
};

namespace detail {

struct Correlations {
  std::optional<double> spearman;
  std::optional<double> pearson;
  std::string error;
};

inline Correlations correlate(const std::vector<RespondentScores>& cohort,
                              const std::vector<RespondentCode>& excluded,
                              const WeightScheme& scheme) {
  std::vector<double> implicit;
  std::vector<double> explicit_totals;
  for (const auto& r : cohort) {
    if (std::find(excluded.begin(), excluded.end(), r.respondent) != excluded.end()) continue;
    implicit.push_back(-r.d_score);
    explicit_totals.push_back(total_score(r.response, scheme));
  }
  Correlations c;
  try {
    c.spearman = spearman(implicit, explicit_totals);
    c.pearson = pearson(implicit, explicit_totals);
  } catch (const Error& e) {
    c.spearman.reset();
    c.pearson.reset();
    c.error = e.what();
  }
  return c;
}

}  // namespace detail

/// Evaluates every row spec. Outliers come from the uniform-weight pairing of
/// the whole cohort and are shared by all excluding rows; a row whose
/// correlation is undefined is kept and marked invalid.
inline AnalysisReport run_report(const std::vector<RespondentScores>& cohort,
                                 const std::vector<ReportRowSpec>& rows, int k_outliers = 4) {
  const auto ids = question_ids(cohort);
  AnalysisReport report;
  report.cohort_size = static_cast<int>(cohort.size());
  report.k_outliers = k_outliers;
  report.outliers = find_outliers(pair_scores(cohort, uniform_scheme(ids)), k_outliers);

  for (const auto& spec : rows) {
    validate(spec.scheme, ids);
    ReportRow row;
    row.scheme = spec.scheme.label.empty() ? to_string(spec.scheme.kind) : spec.scheme.label;
    row.policy = spec.policy;
    if (spec.policy == OutlierPolicy::excluding_outliers) row.removed = report.outliers;
    row.n_respondents = report.cohort_size - static_cast<int>(row.removed.size());
    auto c = detail::correlate(cohort, row.removed, spec.scheme);
    row.spearman = c.spearman;
    row.pearson = c.pearson;
    row.error = std::move(c.error);
    report.rows.push_back(std::move(row));
  }
  return report;
}

/// One row per scheme and outlier policy.
inline AnalysisReport run_report(const std::vector<RespondentScores>& cohort,
                                 const std::vector<WeightScheme>& schemes, int k_outliers) {
  std::vector<ReportRowSpec> rows;
  for (const auto& s : schemes) {
    rows.push_back({s, OutlierPolicy::all_respondents});
    rows.push_back({s, OutlierPolicy::excluding_outliers});
  }
  return run_report(cohort, rows, k_outliers);
}

/// Six-row layout: no weighting, variance (all / excluding), reverse deviation
/// (all / excluding) and a custom scheme excluding outliers.
inline std::vector<ReportRowSpec> six_row_layout(const std::vector<QuestionStats>& stats,
                                                 const WeightScheme& custom) {
  std::vector<std::string> ids;
  for (const auto& s : stats) ids.push_back(s.question_id);
  const auto var = derive_weight_scheme(stats, WeightKind::variance_rank);
  const auto rev = derive_weight_scheme(stats, WeightKind::reverse_deviation_rank);
  return {
      {uniform_scheme(ids), OutlierPolicy::all_respondents},
      {var, OutlierPolicy::all_respondents},
      {var, OutlierPolicy::excluding_outliers},
      {rev, OutlierPolicy::all_respondents},
      {rev, OutlierPolicy::excluding_outliers},
      {custom, OutlierPolicy::excluding_outliers},
  };
}

namespace detail {

inline std::string format_number(std::optional<double> v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v == 0.0 ? 0.0 : *v);
  return buf;
}

inline std::string join_codes(const std::vector<RespondentCode>& codes) {
  std::string out;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (i > 0) out.push_back(';');
    out += codes[i].str();
  }
  return out;
}

}  // namespace detail

/// scheme,outliers,spearman,pearson,n,removed
inline std::string format_report_csv(const AnalysisReport& report) {
  std::string out = "scheme,outliers,spearman,pearson,n,removed\n";
  for (const auto& row : report.rows) {
    out += csv::join({row.scheme, to_string(row.policy), detail::format_number(row.spearman),
                      detail::format_number(row.pearson), std::to_string(row.n_respondents),
                      detail::join_codes(row.removed)});
    out.push_back('\n');
  }
  return out;
}

struct SearchConfig {
  std::vector<double> grid{0.1, 0.2, 0.5, 1.0, 1.5, 2.0, 5.0, 11.0};
  int max_sweeps = 100;
  int restarts = 4;  // extra random grid starting points
  std::uint64_t seed = 0;
};

struct OptimizationResult {
  WeightScheme scheme;
  double achieved = 0.0;
  double best_input = -std::numeric_limits<double>::infinity();
  std::string best_input_label;
  std::vector<RespondentCode> removed;
  int evaluations = 0;
};

/// Coordinate ascent over per-question weights on a finite grid, starting
/// from the best of `inputs` (uniform when empty) plus seeded random grid
/// points. Moves are accepted only on strict improvement, so the result is
/// never worse than any input scheme on the same respondents.
inline OptimizationResult optimize_weights(const std::vector<RespondentScores>& cohort,
                                           Objective objective, int k_outliers,
                                           const SearchConfig& config = {},
                                           std::vector<WeightScheme> inputs = {}) {
  const auto ids = question_ids(cohort);
  if (config.grid.empty()) throw Error(ErrorKind::invalid_config, "empty weight grid");
  for (double g : config.grid) {
    if (!(g > 0.0) || !std::isfinite(g)) {
      throw Error(ErrorKind::invalid_config, "grid weights must be positive");
    }
  }
  const auto removed = find_outliers(pair_scores(cohort, uniform_scheme(ids)), k_outliers);
  std::vector<const RespondentScores*> kept;
  for (const auto& r : cohort) {
    if (std::find(removed.begin(), removed.end(), r.respondent) == removed.end()) kept.push_back(&r);
  }
  if (kept.size() < 3) {
    throw Error(ErrorKind::insufficient_data, "need at least 3 respondents after outlier removal");
  }

  std::vector<double> implicit;
  std::vector<std::vector<double>> codes(kept.size(), std::vector<double>(ids.size()));
  for (std::size_t r = 0; r < kept.size(); ++r) {
    implicit.push_back(-kept[r]->d_score);
    for (std::size_t q = 0; q < ids.size(); ++q) codes[r][q] = kept[r]->response.answers.at(ids[q]);
  }

  OptimizationResult result;
  result.removed = removed;
  constexpr double kInvalid = -std::numeric_limits<double>::infinity();
  std::vector<double> totals(kept.size());
  auto evaluate = [&](const std::vector<double>& w) {
    ++result.evaluations;
    for (std::size_t r = 0; r < kept.size(); ++r) {
      double t = 0.0;
      for (std::size_t q = 0; q < w.size(); ++q) t += w[q] * codes[r][q];
      totals[r] = t;
    }
    try {
      return objective == Objective::spearman ? spearman(implicit, totals)
                                              : pearson(implicit, totals);
    } catch (const Error&) {
      return kInvalid;
    }
  };

  if (inputs.empty()) inputs.push_back(uniform_scheme(ids));
  std::vector<double> best_w;
  double best = kInvalid;
  for (const auto& scheme : inputs) {
    validate(scheme, ids);
    std::vector<double> w;
    for (const auto& id : ids) w.push_back(scheme.weight(id));
    const double v = evaluate(w);
    if (best_w.empty() || v > best) {
      best = v;
      best_w = w;
      result.best_input_label = scheme.label.empty() ? to_string(scheme.kind) : scheme.label;
    }
  }
  result.best_input = best;

  auto ascend = [&](std::vector<double> w, double value) {
    for (int sweep = 0; sweep < config.max_sweeps; ++sweep) {
      bool moved = false;
      for (std::size_t q = 0; q < w.size(); ++q) {
        const double original = w[q];
        double best_g = original;
        double best_v = value;
        for (double g : config.grid) {
          if (g == original) continue;
          w[q] = g;
          const double v = evaluate(w);
          if (v > best_v) {
            best_v = v;
            best_g = g;
          }
        }
        w[q] = best_g;
        if (best_g != original) {
          value = best_v;
          moved = true;
        }
      }
      if (!moved) break;
    }
    return std::pair{w, value};
  };

  auto [w, v] = ascend(best_w, best);
  best_w = w;
  best = v;

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, config.grid.size() - 1);
  for (int r = 0; r < config.restarts; ++r) {
    std::vector<double> start(ids.size());
    for (auto& x : start) x = config.grid[pick(rng)];
    auto [rw, rv] = ascend(start, evaluate(start));
    if (rv > best) {
      best = rv;
      best_w = rw;
    }
  }

  if (best == kInvalid) {
    throw Error(ErrorKind::no_signal, "correlation undefined under every weighting tried");
  }
  result.achieved = best;
  result.scheme = WeightScheme{WeightKind::custom, {}, std::string("optimized (") + to_string(objective) + ")"};
  for (std::size_t q = 0; q < ids.size(); ++q) result.scheme.weights[ids[q]] = best_w[q];
  return result;
}

}  // namespace shyvote
