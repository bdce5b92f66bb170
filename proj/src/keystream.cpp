#include "wmark/keystream.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "wmark/error.hpp"

namespace wmark {

WatermarkKey::WatermarkKey(std::int64_t value) {
  if (value < 1 || value > static_cast<std::int64_t>(kMaxSeed)) {
    throw Error(ErrorCode::InvalidParams, "watermark key must be in 1..2^31-1, got " +
                                              std::to_string(value));
  }
  value_ = static_cast<std::uint32_t>(value);
}

SeedVector derive_seed_vector(const WatermarkKey& key) {
  SeedVector out;
  out.seeds[0] = key.value();
  MixStream stream(key.value());
  for (int k = 1; k < kSlotCount;) {
    const auto candidate = static_cast<std::uint32_t>(1 + stream.next() % kMaxSeed);
    const auto end = out.seeds.begin() + k;
    if (std::find(out.seeds.begin(), end, candidate) != end) continue;
    out.seeds[k++] = candidate;
  }
  return out;
}

std::vector<double> gaussian_sequence(std::uint32_t seed, std::size_t n) {
  std::vector<double> out;
  out.reserve(n + 1);
  MixStream stream(seed);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  while (out.size() < n) {
    const double u1 = stream.next_open_unit();
    const double u2 = stream.next_open_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    out.push_back(r * std::cos(kTwoPi * u2));
    out.push_back(r * std::sin(kTwoPi * u2));
  }
  out.resize(n);
  return out;
}

}  // namespace wmark
