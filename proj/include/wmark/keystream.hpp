#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace wmark {

inline constexpr std::uint32_t kMaxSeed = 0x7FFFFFFFu;  // 2^31 - 1
inline constexpr int kSlotCount = 16;

/// Private watermark key, 1..2^31-1.
class WatermarkKey {
 public:
  /// Throws Error(InvalidParams) outside 1..2^31-1.
  explicit WatermarkKey(std::int64_t value);
  std::uint32_t value() const { return value_; }
  bool operator==(const WatermarkKey&) const = default;

 private:
  std::uint32_t value_;
};

/// SplitMix64 stream: the documented interop generator for seeds and samples.
class MixStream {
 public:
  explicit MixStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform real in (0, 1].
  double next_open_unit() { return 1.0 - static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// seeds[0] is the key itself; seeds[1..15] are drawn from the key's stream,
/// redrawing on collision so all 16 are distinct.
struct SeedVector {
  std::array<std::uint32_t, kSlotCount> seeds{};
};

SeedVector derive_seed_vector(const WatermarkKey& key);

/// n standard-normal samples via basic Box-Muller, both outputs used in order.
std::vector<double> gaussian_sequence(std::uint32_t seed, std::size_t n);

}  // namespace wmark
