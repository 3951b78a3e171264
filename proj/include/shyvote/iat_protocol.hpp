#pragma once

// Five-block IAT protocol: stimulus sets, session plans and response-log
// validation.
//
// Block layout for PairingOrder::a_good_first (b_good_first swaps the two
// concepts everywhere):
//
//   block 1  concept_a            | concept_b             practice
//   block 2  good                 | bad                   practice
//   block 3  concept_a + good     | concept_b + bad       scored
//   block 4  concept_a + good     | concept_b + bad       longer repeat
//   block 5  concept_b + good     | concept_a + bad       scored, concepts mirrored

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shyvote/error.hpp"

namespace shyvote {

enum class Side : std::uint8_t { left, right };

inline Side opposite(Side s) { return s == Side::left ? Side::right : Side::left; }
inline const char* to_string(Side s) { return s == Side::left ? "left" : "right"; }

enum class PairingOrder : std::uint8_t { a_good_first, b_good_first };

inline const char* to_string(PairingOrder p) {
  return p == PairingOrder::a_good_first ? "a_good_first" : "b_good_first";
}

inline PairingOrder flipped(PairingOrder p) {
  return p == PairingOrder::a_good_first ? PairingOrder::b_good_first
                                         : PairingOrder::a_good_first;
}

/// Alternates pairing order across consecutive respondents of a study.
inline PairingOrder counterbalanced_pairing(std::size_t respondent_index) {
  return respondent_index % 2 == 0 ? PairingOrder::a_good_first : PairingOrder::b_good_first;
}

enum class CategoryRole : std::uint8_t { concept_a, concept_b, eval_good, eval_bad };

inline constexpr std::array<CategoryRole, 4> kAllRoles = {
    CategoryRole::concept_a, CategoryRole::concept_b, CategoryRole::eval_good,
    CategoryRole::eval_bad};

inline const char* to_string(CategoryRole r) {
  switch (r) {
    case CategoryRole::concept_a: return "concept_a";
    case CategoryRole::concept_b: return "concept_b";
    case CategoryRole::eval_good: return "good";
    case CategoryRole::eval_bad: return "bad";
  }
  return "?";
}

/// A 4-digit respondent identification number (1000..9999).
class RespondentCode {
 public:
  static constexpr int kMin = 1000;
  static constexpr int kMax = 9999;
  static constexpr int kSpace = kMax - kMin + 1;

  constexpr RespondentCode() = default;
  explicit RespondentCode(int value) : value_(value) {
    if (value < kMin || value > kMax) {
      throw Error(ErrorKind::invalid_argument,
                  "respondent code must be a 4-digit number, got " + std::to_string(value));
    }
  }

  constexpr int value() const { return value_; }
  std::string str() const { return std::to_string(value_); }

  friend constexpr auto operator<=>(RespondentCode, RespondentCode) = default;

 private:
  int value_ = kMin;
};

struct Category {
  std::string label;
  std::vector<std::string> items;

  friend bool operator==(const Category&, const Category&) = default;
};

struct StimulusSet {
  std::string topic;
  Category concept_a;
  Category concept_b;
  Category eval_good;
  Category eval_bad;

  const Category& category(CategoryRole role) const {
    switch (role) {
      case CategoryRole::concept_a: return concept_a;
      case CategoryRole::concept_b: return concept_b;
      case CategoryRole::eval_good: return eval_good;
      case CategoryRole::eval_bad: return eval_bad;
    }
    return concept_a;
  }
  Category& category(CategoryRole role) {
    return const_cast<Category&>(std::as_const(*this).category(role));
  }

  friend bool operator==(const StimulusSet&, const StimulusSet&) = default;
};

inline constexpr std::size_t kMinItemsPerCategory = 4;

/// Throws Error(invalid_stimulus_set) naming the first offending category.
inline void validate(const StimulusSet& set) {
  std::set<std::string> labels;
  for (CategoryRole role : kAllRoles) {
    const Category& cat = set.category(role);
    const std::string name = std::string(to_string(role)) + " '" + cat.label + "'";
    if (cat.label.empty()) {
      throw Error(ErrorKind::invalid_stimulus_set, std::string(to_string(role)) + " has no label");
    }
    if (!labels.insert(cat.label).second) {
      throw Error(ErrorKind::invalid_stimulus_set, "duplicate category label in " + name);
    }
    std::set<std::string> distinct(cat.items.begin(), cat.items.end());
    if (distinct.size() != cat.items.size()) {
      throw Error(ErrorKind::invalid_stimulus_set, "repeated stimulus item in " + name);
    }
    if (distinct.size() < kMinItemsPerCategory) {
      throw Error(ErrorKind::invalid_stimulus_set,
                  name + " has " + std::to_string(distinct.size()) + " items, need at least " +
                      std::to_string(kMinItemsPerCategory));
    }
  }
  std::map<std::string, CategoryRole> owner;
  for (CategoryRole role : kAllRoles) {
    for (const auto& item : set.category(role).items) {
      auto [it, inserted] = owner.emplace(item, role);
      if (!inserted) {
        throw Error(ErrorKind::invalid_stimulus_set,
                    "item '" + item + "' appears in both " + to_string(it->second) + " and " +
                        to_string(role));
      }
    }
  }
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Parses the plain-text stimulus format:
///
///     topic: How amiable are people towards X
///     concept_a: United Kingdom
///     London
///     ...
///     concept_b: Ireland
///     ...
///     good: Good
///     ...
///     bad: Bad
///     ...
///
/// Blank lines and lines starting with '#' are ignored. The result is
/// validated before it is returned.
inline StimulusSet parse_stimulus_set(std::string_view text) {
  StimulusSet set;
  Category* current = nullptr;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto colon = line.find(':');
    if (colon != std::string_view::npos) {
      const auto key = std::string(detail::trim(line.substr(0, colon)));
      const auto value = std::string(detail::trim(line.substr(colon + 1)));
      Category* target = nullptr;
      if (key == "topic") {
        set.topic = value;
        current = nullptr;
        continue;
      } else if (key == "concept_a") {
        target = &set.concept_a;
      } else if (key == "concept_b") {
        target = &set.concept_b;
      } else if (key == "good") {
        target = &set.eval_good;
      } else if (key == "bad") {
        target = &set.eval_bad;
      }
      if (target != nullptr) {
        if (!seen.insert(key).second) {
          throw Error(ErrorKind::malformed,
                      "line " + std::to_string(line_no) + ": category '" + key + "' given twice");
        }
        target->label = value;
        current = target;
        continue;
      }
    }
    if (current == nullptr) {
      throw Error(ErrorKind::malformed,
                  "line " + std::to_string(line_no) + ": item outside of a category block");
    }
    current->items.emplace_back(line);
  }
  for (const char* key : {"concept_a", "concept_b", "good", "bad"}) {
    if (!seen.contains(key)) {
      throw Error(ErrorKind::invalid_stimulus_set, std::string("missing category block '") + key + "'");
    }
  }
  validate(set);
  return set;
}

inline std::string format_stimulus_set(const StimulusSet& set) {
  std::ostringstream out;
  out << "topic: " << set.topic << '\n';
  for (CategoryRole role : kAllRoles) {
    const Category& cat = set.category(role);
    out << '\n' << to_string(role) << ": " << cat.label << '\n';
    for (const auto& item : cat.items) out << item << '\n';
  }
  return out.str();
}

/// Built-in UK / Ireland stimulus set.
inline StimulusSet demo_stimulus_set() {
  return StimulusSet{
      "How amiable Irish people are towards the United Kingdom",
      {"United Kingdom", {"London", "Union Jack", "Big Ben", "Buckingham Palace", "Pound Sterling"}},
      {"Ireland", {"Dublin", "Shamrock", "Tricolour", "Croke Park", "Leprechaun"}},
      {"Good", {"Joy", "Love", "Peace", "Wonderful", "Pleasure"}},
      {"Bad", {"Agony", "Terrible", "Awful", "Nasty", "Failure"}},
  };
}

struct BlockSpec {
  int block_index = 1;
  std::vector<CategoryRole> left;
  std::vector<CategoryRole> right;
  int trial_count = 0;
  bool is_scored = false;

  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

inline constexpr int kBlockCount = 5;

struct SessionConfig {
  std::array<int, kBlockCount> trial_counts{20, 20, 40, 40, 40};
  PairingOrder pairing = PairingOrder::a_good_first;
  std::uint64_t seed = 0;
};

inline void validate(const SessionConfig& config) {
  for (int b = 0; b < kBlockCount; ++b) {
    if (config.trial_counts[b] <= 0) {
      throw Error(ErrorKind::invalid_config,
                  "block " + std::to_string(b + 1) + " trial count must be positive");
    }
  }
  if (config.trial_counts[3] < config.trial_counts[2]) {
    throw Error(ErrorKind::invalid_config,
                "block 4 trial count (" + std::to_string(config.trial_counts[3]) +
                    ") must not be smaller than block 3 (" +
                    std::to_string(config.trial_counts[2]) + ")");
  }
}

/// Block layout for a pairing order; trial counts from `counts`.
inline std::array<BlockSpec, kBlockCount> block_layout(PairingOrder pairing,
                                                       const std::array<int, kBlockCount>& counts) {
  using R = CategoryRole;
  const R first = pairing == PairingOrder::a_good_first ? R::concept_a : R::concept_b;
  const R second = pairing == PairingOrder::a_good_first ? R::concept_b : R::concept_a;
  return {{
      {1, {first}, {second}, counts[0], false},
      {2, {R::eval_good}, {R::eval_bad}, counts[1], false},
      {3, {first, R::eval_good}, {second, R::eval_bad}, counts[2], true},
      {4, {first, R::eval_good}, {second, R::eval_bad}, counts[3], false},
      {5, {second, R::eval_good}, {first, R::eval_bad}, counts[4], true},
  }};
}

struct Trial {
  CategoryRole category = CategoryRole::concept_a;
  std::uint16_t item = 0;  // index into the category's item list
  Side correct_side = Side::left;

  friend bool operator==(const Trial&, const Trial&) = default;
};

struct SessionPlan {
  std::string session_id;
  RespondentCode respondent;
  StimulusSet stimuli;
  std::array<BlockSpec, kBlockCount> blocks;
  std::array<std::vector<Trial>, kBlockCount> trials;
  PairingOrder pairing = PairingOrder::a_good_first;
  std::uint64_t seed = 0;

  const BlockSpec& block(int block_index) const { return blocks.at(block_index - 1); }
  const std::vector<Trial>& block_trials(int block_index) const {
    return trials.at(block_index - 1);
  }
  const std::string& stimulus_text(const Trial& t) const {
    return stimuli.category(t.category).items.at(t.item);
  }
  std::size_t total_trials() const {
    std::size_t n = 0;
    for (const auto& b : trials) n += b.size();
    return n;
  }
  /// The scored block in which concept_a shares a side with "good".
  int a_good_block() const { return pairing == PairingOrder::a_good_first ? 3 : 5; }

  friend bool operator==(const SessionPlan&, const SessionPlan&) = default;
};

inline Side side_of(const BlockSpec& block, CategoryRole role) {
  if (std::find(block.left.begin(), block.left.end(), role) != block.left.end()) return Side::left;
  if (std::find(block.right.begin(), block.right.end(), role) != block.right.end()) {
    return Side::right;
  }
  throw Error(ErrorKind::invalid_argument, std::string("category ") + to_string(role) +
                                               " not used in block " +
                                               std::to_string(block.block_index));
}

/// Builds a deterministic five-block plan: each block draws a balanced
/// multiset of its categories (counts differ by at most one), cycles through
/// a shuffled item order within each category and shuffles the result.
inline SessionPlan build_session_plan(const StimulusSet& stimuli, const SessionConfig& config,
                                      RespondentCode respondent = RespondentCode{},
                                      std::string session_id = {}) {
  validate(stimuli);
  validate(config);

  SessionPlan plan;
  plan.session_id = std::move(session_id);
  plan.respondent = respondent;
  plan.stimuli = stimuli;
  plan.pairing = config.pairing;
  plan.seed = config.seed;
  plan.blocks = block_layout(config.pairing, config.trial_counts);

  std::mt19937_64 rng(config.seed);
  for (int b = 0; b < kBlockCount; ++b) {
    const BlockSpec& spec = plan.blocks[b];
    std::vector<CategoryRole> cats(spec.left);
    cats.insert(cats.end(), spec.right.begin(), spec.right.end());
    const int m = static_cast<int>(cats.size());

    std::vector<Trial> trials;
    trials.reserve(spec.trial_count);
    for (int c = 0; c < m; ++c) {
      const int share = spec.trial_count / m + (c < spec.trial_count % m ? 1 : 0);
      const auto n_items = stimuli.category(cats[c]).items.size();
      std::vector<std::uint16_t> order(n_items);
      std::iota(order.begin(), order.end(), std::uint16_t{0});
      const Side side = side_of(spec, cats[c]);
      for (int k = 0; k < share; ++k) {
        const auto pos = static_cast<std::size_t>(k) % n_items;
        if (pos == 0) std::shuffle(order.begin(), order.end(), rng);
        trials.push_back(Trial{cats[c], order[pos], side});
      }
    }
    std::shuffle(trials.begin(), trials.end(), rng);
    plan.trials[b] = std::move(trials);
  }
  return plan;
}

/// Structural problems with a plan; empty when all plan invariants hold.
inline std::vector<std::string> plan_issues(const SessionPlan& plan) {
  std::vector<std::string> issues;
  for (int b = 0; b < kBlockCount; ++b) {
    const BlockSpec& spec = plan.blocks[b];
    const std::string tag = "block " + std::to_string(b + 1) + ": ";
    if (spec.block_index != b + 1) issues.push_back(tag + "out of order");
    const std::size_t per_side = b < 2 ? 1 : 2;
    if (spec.left.size() != per_side || spec.right.size() != per_side) {
      issues.push_back(tag + "wrong number of categories per side");
    }
    if (spec.is_scored != (b == 2 || b == 4)) issues.push_back(tag + "wrong scored flag");
    const auto& trials = plan.trials[b];
    if (static_cast<int>(trials.size()) != spec.trial_count) {
      issues.push_back(tag + "trial count mismatch");
    }
    std::map<CategoryRole, int> per_category;
    for (const auto& t : trials) {
      Side expected;
      try {
        expected = side_of(spec, t.category);
      } catch (const Error&) {
        issues.push_back(tag + "trial category not in block");
        continue;
      }
      if (expected != t.correct_side) issues.push_back(tag + "correct side inconsistent");
      if (t.item >= plan.stimuli.category(t.category).items.size()) {
        issues.push_back(tag + "item index out of range");
      }
      ++per_category[t.category];
    }
    const int m = static_cast<int>(spec.left.size() + spec.right.size());
    if (m > 0) {
      const double exact = static_cast<double>(spec.trial_count) / m;
      for (auto role : spec.left) {
        if (std::abs(per_category[role] - exact) >= 1.0) issues.push_back(tag + "unbalanced");
      }
      for (auto role : spec.right) {
        if (std::abs(per_category[role] - exact) >= 1.0) issues.push_back(tag + "unbalanced");
      }
    }
  }
  if (plan.blocks[3].trial_count < plan.blocks[2].trial_count) {
    issues.push_back("block 4 has fewer trials than block 3");
  }
  // Concepts swap sides between the two scored blocks.
  for (auto role : {CategoryRole::concept_a, CategoryRole::concept_b}) {
    try {
      if (side_of(plan.blocks[2], role) == side_of(plan.blocks[4], role)) {
        issues.push_back("block 5 does not mirror block 3");
      }
    } catch (const Error&) {
      issues.push_back("concept missing from a scored block");
    }
  }
  return issues;
}

struct TrialRecord {
  int block_index = 1;
  int trial_index = 0;  // 0-based position within the block
  std::string stimulus;
  double presented_at_ms = 0.0;  // client clock, ms since session start
  Side response = Side::left;
  double latency_ms = 0.0;
  bool correct = true;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

/// Latency bounds shared by log validation and scoring.
struct LatencyPolicy {
  double ceiling_ms = 10'000.0;     // slower trials are discarded
  double fast_ms = 300.0;           // "too fast" threshold
  double fast_fraction_flag = 0.10; // flag respondent above this share of fast trials
};

enum class IssueKind {
  missing_trials,
  scored_block_absent,
  unknown_trial,
  duplicate_trial,
  stimulus_mismatch,
  correctness_mismatch,
  negative_latency,
  non_monotone_time,
  slow_trials,
  fast_responder,
};

struct ValidationIssue {
  IssueKind kind;
  std::string message;
};

struct ValidationReport {
  bool ok = true;
  std::vector<ValidationIssue> issues;

  bool has(IssueKind kind) const {
    return std::any_of(issues.begin(), issues.end(),
                       [kind](const ValidationIssue& i) { return i.kind == kind; });
  }
};

/// Reports every problem found in `records` against `plan`; never throws.
inline ValidationReport validate_response_log(const SessionPlan& plan,
                                              const std::vector<TrialRecord>& records,
                                              const LatencyPolicy& policy = {}) {
  ValidationReport report;
  auto add = [&report](IssueKind kind, std::string msg) {
    report.issues.push_back({kind, std::move(msg)});
  };

  std::array<std::map<int, const TrialRecord*>, kBlockCount> by_block;
  std::size_t fast = 0;
  std::size_t slow = 0;
  for (const auto& r : records) {
    const std::string where =
        "block " + std::to_string(r.block_index) + " trial " + std::to_string(r.trial_index);
    if (r.block_index < 1 || r.block_index > kBlockCount || r.trial_index < 0 ||
        r.trial_index >= static_cast<int>(plan.block_trials(std::clamp(r.block_index, 1, 5)).size())) {
      add(IssueKind::unknown_trial, where + " is not in the plan");
      continue;
    }
    auto [it, inserted] = by_block[r.block_index - 1].emplace(r.trial_index, &r);
    if (!inserted) {
      add(IssueKind::duplicate_trial, "duplicate record for " + where);
      continue;
    }
    const Trial& planned = plan.block_trials(r.block_index)[r.trial_index];
    if (r.stimulus != plan.stimulus_text(planned)) {
      add(IssueKind::stimulus_mismatch, where + " shows '" + r.stimulus + "', plan says '" +
                                            plan.stimulus_text(planned) + "'");
    }
    if (r.correct != (r.response == planned.correct_side)) {
      add(IssueKind::correctness_mismatch, where + " correct flag disagrees with response side");
    }
    if (r.latency_ms < 0.0) add(IssueKind::negative_latency, where + " has negative latency_ms");
    if (r.latency_ms > policy.ceiling_ms) ++slow;
    if (r.latency_ms < policy.fast_ms) ++fast;
  }

  for (int b = 1; b <= kBlockCount; ++b) {
    const auto& got = by_block[b - 1];
    const auto expected = plan.block_trials(b).size();
    if (got.empty() && plan.block(b).is_scored) {
      add(IssueKind::scored_block_absent, "scored block absent: block " + std::to_string(b));
    } else if (got.size() < expected) {
      add(IssueKind::missing_trials, "block " + std::to_string(b) + " has " +
                                         std::to_string(got.size()) + " of " +
                                         std::to_string(expected) + " trials");
    }
    double last = -1.0;
    for (const auto& [idx, rec] : got) {
      if (rec->presented_at_ms <= last) {
        add(IssueKind::non_monotone_time,
            "block " + std::to_string(b) + " presented_at not increasing at trial " +
                std::to_string(idx));
        break;
      }
      last = rec->presented_at_ms;
    }
  }

  if (slow > 0) {
    add(IssueKind::slow_trials, std::to_string(slow) + " latencies above the " +
                                    std::to_string(static_cast<int>(policy.ceiling_ms)) +
                                    " ms ceiling");
  }
  if (!records.empty() &&
      static_cast<double>(fast) / static_cast<double>(records.size()) > policy.fast_fraction_flag) {
    add(IssueKind::fast_responder,
        "fast-responder flag: " + std::to_string(fast) + " of " + std::to_string(records.size()) +
            " latencies below " + std::to_string(static_cast<int>(policy.fast_ms)) + " ms");
  }
  report.ok = report.issues.empty();
  return report;
}

/// Records for one block, ordered by trial index.
inline std::vector<TrialRecord> records_for_block(const std::vector<TrialRecord>& records,
                                                  int block_index) {
  std::vector<TrialRecord> out;
  for (const auto& r : records) {
    if (r.block_index == block_index) out.push_back(r);
  }
  std::sort(out.begin(), out.end(),
            [](const TrialRecord& a, const TrialRecord& b) { return a.trial_index < b.trial_index; });
  return out;
}

}  // namespace shyvote
