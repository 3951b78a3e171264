#pragma once

// Implicit-preference D-score from the two scored blocks.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "shyvote/error.hpp"
#include "shyvote/iat_protocol.hpp"

namespace shyvote {

enum class ScoringVariant {
  simple,    // standardized block-mean difference
  improved,  // error latencies replaced by correct-trial mean + penalty
};

inline const char* to_string(ScoringVariant v) {
  return v == ScoringVariant::simple ? "simple" : "improved";
}

struct ScoringOptions {
  LatencyPolicy latency;
  ScoringVariant variant = ScoringVariant::simple;
  double error_penalty_ms = 600.0;
  double neutral_band = 0.15;  // |D| at or below this is neutral
};

struct BlockLatencySummary {
  int block_index = 3;
  int n_trials_used = 0;
  double mean_ms = 0.0;
  double sd_ms = 0.0;  // population SD
  int n_discarded = 0;
  int n_errors = 0;
  ScoringVariant variant = ScoringVariant::simple;
};

/// Summarizes one scored block. Throws Error(empty_block) when nothing
/// survives the latency ceiling.
inline BlockLatencySummary summarize_block(const std::vector<TrialRecord>& records,
                                           const ScoringOptions& options = {}) {
  if (records.empty()) throw Error(ErrorKind::empty_block, "no trials in block");
  const int block = records.front().block_index;
  if (block != 3 && block != 5) {
    throw Error(ErrorKind::invalid_argument,
                "block " + std::to_string(block) + " is not a scored block");
  }
  BlockLatencySummary s;
  s.block_index = block;
  s.variant = options.variant;

  std::vector<double> kept;
  std::vector<bool> kept_correct;
  for (const auto& r : records) {
    if (r.block_index != block) {
      throw Error(ErrorKind::invalid_argument, "records from more than one block");
    }
    if (!r.correct) ++s.n_errors;
    if (r.latency_ms > options.latency.ceiling_ms) {
      ++s.n_discarded;
      continue;
    }
    kept.push_back(r.latency_ms);
    kept_correct.push_back(r.correct);
  }
  if (kept.empty()) {
    throw Error(ErrorKind::empty_block,
                "all trials of block " + std::to_string(block) + " exceed the latency ceiling");
  }

  if (options.variant == ScoringVariant::improved && s.n_errors > 0) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (kept_correct[i]) {
        sum += kept[i];
        ++n;
      }
    }
    if (n > 0) {
      const double replacement = sum / n + options.error_penalty_ms;
      for (std::size_t i = 0; i < kept.size(); ++i) {
        if (!kept_correct[i]) kept[i] = replacement;
      }
    }
  }

  double sum = 0.0;
  for (double x : kept) sum += x;
  s.n_trials_used = static_cast<int>(kept.size());
  s.mean_ms = sum / s.n_trials_used;
  double ss = 0.0;
  for (double x : kept) ss += (x - s.mean_ms) * (x - s.mean_ms);
  s.sd_ms = std::sqrt(ss / s.n_trials_used);
  return s;
}

/// Population SD of the union of the trials behind two summaries.
inline double pooled_sd(const BlockLatencySummary& a, const BlockLatencySummary& b) {
  const double na = a.n_trials_used;
  const double nb = b.n_trials_used;
  const double mean = (na * a.mean_ms + nb * b.mean_ms) / (na + nb);
  const double da = a.mean_ms - mean;
  const double db = b.mean_ms - mean;
  const double var =
      (na * (a.sd_ms * a.sd_ms + da * da) + nb * (b.sd_ms * b.sd_ms + db * db)) / (na + nb);
  return std::sqrt(std::max(var, 0.0));
}

enum class Classification { pro_a, neutral, pro_b };

inline const char* to_string(Classification c) {
  switch (c) {
    case Classification::pro_a: return "pro_a";
    case Classification::neutral: return "neutral";
    case Classification::pro_b: return "pro_b";
  }
  return "?";
}

inline Classification classify(double d, double neutral_band = 0.15) {
  if (d > neutral_band) return Classification::pro_a;
  if (d < -neutral_band) return Classification::pro_b;
  return Classification::neutral;
}

struct DScore {
  RespondentCode respondent;
  double value = 0.0;
  ScoringVariant variant = ScoringVariant::simple;
  int congruent_block = 3;  // block where concept_a shares a side with "good"
  Classification classification = Classification::neutral;
};

/// D = (mean of the concept_b+good block - mean of the concept_a+good block)
///     / pooled SD, so positive values mean concept_a is preferred.
///
/// `block3` and `block5` are taken positionally: exchanging them negates D.
inline DScore compute_d_score(const BlockLatencySummary& block3, const BlockLatencySummary& block5,
                              PairingOrder pairing,
                              ScoringVariant variant = ScoringVariant::simple,
                              double neutral_band = 0.15, RespondentCode respondent = {}) {
  if (block3.variant != variant || block5.variant != variant) {
    throw Error(ErrorKind::invalid_argument, "block summaries were built with another variant");
  }
  if (block3.n_trials_used <= 0 || block5.n_trials_used <= 0) {
    throw Error(ErrorKind::empty_block, "block summary has no trials");
  }
  const double sd = pooled_sd(block3, block5);
  if (!(sd > 0.0) || !std::isfinite(sd)) {
    throw Error(ErrorKind::degenerate_latencies, "pooled SD of scored blocks is zero");
  }
  const bool a_first = pairing == PairingOrder::a_good_first;
  const auto& a_good = a_first ? block3 : block5;
  const auto& b_good = a_first ? block5 : block3;

  DScore d;
  d.respondent = respondent;
  d.variant = variant;
  d.congruent_block = a_first ? 3 : 5;
  d.value = (b_good.mean_ms - a_good.mean_ms) / sd;
  d.classification = classify(d.value, neutral_band);
  return d;
}

/// Scores a respondent's full log against their plan.
inline DScore score_respondent(const SessionPlan& plan, const std::vector<TrialRecord>& records,
                               const ScoringOptions& options = {}) {
  const auto s3 = summarize_block(records_for_block(records, 3), options);
  const auto s5 = summarize_block(records_for_block(records, 5), options);
  return compute_d_score(s3, s5, plan.pairing, options.variant, options.neutral_band,
                         plan.respondent);
}

struct HistogramBin {
  double lower = 0.0;  // inclusive
  double upper = 0.0;  // exclusive
  int count = 0;
};

struct ScoreDistribution {
  std::vector<HistogramBin> histogram;
  int pro_a = 0;
  int neutral = 0;
  int pro_b = 0;
  std::vector<DScore> ranked;  // highest D first
};

inline ScoreDistribution score_distribution(const std::vector<DScore>& scores,
                                            double neutral_band = 0.15, double bin_width = 0.25) {
  if (scores.empty()) throw Error(ErrorKind::invalid_argument, "no scores to summarize");
  if (!(bin_width > 0.0)) throw Error(ErrorKind::invalid_argument, "bin width must be positive");

  ScoreDistribution dist;
  dist.ranked = scores;
  std::stable_sort(dist.ranked.begin(), dist.ranked.end(), [](const DScore& a, const DScore& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.respondent < b.respondent;
  });
  for (auto& s : dist.ranked) {
    s.classification = classify(s.value, neutral_band);
    switch (s.classification) {
      case Classification::pro_a: ++dist.pro_a; break;
      case Classification::neutral: ++dist.neutral; break;
      case Classification::pro_b: ++dist.pro_b; break;
    }
  }

  const double lo = std::floor(dist.ranked.back().value / bin_width);
  const double hi = std::floor(dist.ranked.front().value / bin_width);
  const int n_bins = static_cast<int>(hi - lo) + 1;
  dist.histogram.resize(n_bins);
  for (int i = 0; i < n_bins; ++i) {
    dist.histogram[i].lower = (lo + i) * bin_width;
    dist.histogram[i].upper = (lo + i + 1) * bin_width;
  }
  for (const auto& s : dist.ranked) {
    const int bin = static_cast<int>(std::floor(s.value / bin_width) - lo);
    ++dist.histogram[std::clamp(bin, 0, n_bins - 1)].count;
  }
  return dist;
}

}  // namespace shyvote
