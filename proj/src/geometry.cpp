#include "uavnav/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace uavnav {

double closest_approach(const Vec2& p1, const Vec2& v1, const Vec2& p2, const Vec2& v2,
                        double duration) {
  const Vec2 dp = p2 - p1;
  const Vec2 dv = v2 - v1;
  const double dv_sq = abs_sq(dv);
  double t = 0.0;
  if (dv_sq > 0.0) {
    t = std::clamp(-dot(dp, dv) / dv_sq, 0.0, duration);
  }
  return norm(dp + dv * t);
}

double point_segment_distance(const Vec2& q, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len_sq = abs_sq(ab);
  if (len_sq == 0.0) return distance(q, a);
  const double t = std::clamp(dot(q - a, ab) / len_sq, 0.0, 1.0);
  return distance(q, a + ab * t);
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r = rng();
  while (r >= limit) r = rng();
  return r % n;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace uavnav
