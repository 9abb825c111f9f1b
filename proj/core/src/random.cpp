#include "circpred/random.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace circpred {

std::uint64_t symmetric_hash(std::span<const std::uint64_t> items) {
  std::vector<std::uint64_t> sorted(items.begin(), items.end());
  std::sort(sorted.begin(), sorted.end());
  std::uint64_t h = mix64(sorted.size());
  for (const std::uint64_t u : sorted) h = mix64(h ^ mix64(u));
  return h;
}

double standard_normal(Engine& rng) {
  for (;;) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double v = 2.0 * uniform01(rng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

}  // namespace circpred
