#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "shyvote/error.hpp"

namespace shyvote {

enum class RankDirection {
  ascending,   // smallest value gets rank 1
  descending,  // largest value gets rank 1
};

/// Fractional ("1 2.5 2.5 4") ranking: tied values share the mean of the
/// positions they span. Ties are exact equality.
inline std::vector<double> fractional_rank(std::span<const double> values,
                                           RankDirection direction = RankDirection::ascending) {
  if (values.empty()) throw Error(ErrorKind::invalid_argument, "cannot rank an empty list");
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (direction == RankDirection::ascending) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  } else {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  }
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i+1 .. j (1-based)
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

}  // namespace shyvote
