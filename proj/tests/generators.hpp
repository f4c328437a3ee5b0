// Random inputs shared by the unit tests and the acceptance run.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace gen {

inline std::vector<std::int64_t> random_histogram(std::mt19937_64& rng, std::size_t bins) {
  std::uniform_int_distribution<int> shape(0, 3);
  std::vector<std::int64_t> h(bins, 0);
  switch (shape(rng)) {
    case 0: {  // flat noise with holes
      std::uniform_int_distribution<std::int64_t> c(0, 40);
      for (auto& x : h) x = c(rng) < 10 ? 0 : c(rng);
      break;
    }
    case 1: {  // mixture of peaks
      std::uniform_int_distribution<std::size_t> where(0, bins - 1);
      std::uniform_int_distribution<int> count(1, 4);
      const int peaks = count(rng);
      for (int p = 0; p < peaks; ++p) {
        const auto c = static_cast<double>(where(rng));
        const double w = 1 + static_cast<double>(where(rng)) / 8;
        for (std::size_t b = 0; b < bins; ++b)
          h[b] += static_cast<std::int64_t>(200 * std::exp(-0.5 * std::pow((b - c) / w, 2)));
      }
      break;
    }
    case 2: {  // few spikes, lots of ties
      std::uniform_int_distribution<std::size_t> where(0, bins - 1);
      for (int s = 0; s < 5; ++s) h[where(rng)] += 7;
      break;
    }
    default: {  // symmetric: equal objective for mirrored tuples
      std::uniform_int_distribution<std::int64_t> c(0, 9);
      for (std::size_t b = 0; b < bins / 2; ++b) h[b] = h[bins - 1 - b] = c(rng);
      break;
    }
  }
  std::size_t occupied = 0;
  for (auto x : h) occupied += x > 0;
  if (occupied < 3) {
    h.front() += 1;
    h[bins / 2] += 1;
    h.back() += 1;
  }
  return h;
}

}  // namespace gen
