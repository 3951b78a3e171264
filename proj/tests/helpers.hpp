#pragma once

#include <functional>
#include <vector>

#include "shyvote/iat_protocol.hpp"

namespace testing_util {

using namespace shyvote;

// A tidy log for `plan`: every trial answered correctly, latency from `latency`.
inline std::vector<TrialRecord> clean_log(
    const SessionPlan& plan,
    const std::function<double(int block, int trial)>& latency = [](int, int) { return 650.0; }) {
  std::vector<TrialRecord> out;
  double clock = 0.0;
  for (int b = 1; b <= kBlockCount; ++b) {
    const auto& trials = plan.block_trials(b);
    for (int i = 0; i < static_cast<int>(trials.size()); ++i) {
      const double rt = latency(b, i);
      out.push_back({b, i, plan.stimulus_text(trials[i]), clock, trials[i].correct_side, rt, true});
      clock += rt + 250.0;
    }
  }
  return out;
}

inline TrialRecord record(int block, double latency, bool correct = true, int index = 0) {
  return TrialRecord{block, index, "x", index * 1000.0, Side::left, latency, correct};
}

}  // namespace testing_util
