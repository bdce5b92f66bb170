#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wmark/keystream.hpp"
#include "wmark/raster.hpp"
#include "wmark/spectral.hpp"

namespace wmark {

inline constexpr int kMessageBits = 14;
inline constexpr std::uint16_t kMaxMessage = (1u << kMessageBits) - 1;  // 16383
inline constexpr int kExistenceSlot = 0;
inline constexpr int kFlagSlot = 1;
inline constexpr int kMaxCasts = 8;

/// Slot layout: 0 existence, 1 flag, 2 + j stored message bit j (the
/// complement of the message when flag is set).
struct PayloadCode {
  std::uint16_t message = 0;
  bool flag = false;
  std::array<bool, kSlotCount> bits{};
  std::vector<int> cast_set;  // ascending slot indices with bits[slot] == true
};

PayloadCode encode_payload(int message);

/// nullopt when the existence bit is clear.
std::optional<std::uint16_t> decode_payload(const std::array<bool, kSlotCount>& bits);

inline constexpr double kDefaultAlpha = 0.142;

struct EmbedParams {
  double alpha = kDefaultAlpha;
  BandSpec band;
  std::size_t seq_len = 0;

  bool operator==(const EmbedParams&) const = default;
};

inline constexpr std::size_t kMaxSeqLen = 16000;
/// Room for the 15 one-place start-point shifts after slot 0.
inline constexpr std::size_t kShiftRoom = kSlotCount - 1;

/// Default band for the image size, alpha 0.142, N = min(16000, M - 15).
EmbedParams default_params(int width, int height);

/// Throws InvalidParams for alpha outside [0,1] or seq_len 0, CapacityExceeded
/// when the band cannot host N + 15 coefficients or does not fit the image.
/// alpha == 0 is admitted as a no-op embedding.
void check_params(const EmbedParams& params, int width, int height);

/// User-level overrides layered over default_params. A band length override
/// without an explicit seq_len shrinks N to fit.
struct ParamOverrides {
  std::optional<double> alpha;
  std::optional<std::size_t> seq_len;
  std::optional<std::size_t> skip;
  std::optional<std::size_t> length;

  EmbedParams resolve(int width, int height) const;
};

/// Additive rule t' = t + alpha*|t|*x on band[offset, offset + seq.size()).
void cast_sequence(std::span<double> band, std::span<const double> seq, std::size_t offset,
                   double alpha);

/// Pre-processing data the library keeps per original.
struct SupplementaryInfo {
  int orig_width = 0;
  int orig_height = 0;
  BandSpec band;
  std::size_t seq_len = 0;
  double alpha = 0.0;
  double luma_mean = 0.0;
  double luma_var = 0.0;

  EmbedParams params() const { return {alpha, band, seq_len}; }
  bool operator==(const SupplementaryInfo&) const = default;
};

SupplementaryInfo make_supplementary(const RasterImage& original, const EmbedParams& params);

struct EmbedReceipt {
  EmbedParams params;
  PayloadCode payload;
  std::uint32_t key = 0;
  int casts = 0;
  SupplementaryInfo supplementary;
};

struct Embedded {
  RasterImage image;
  EmbedReceipt receipt;
};

Embedded embed(const RasterImage& img, const WatermarkKey& key, int message,
               const EmbedParams& params);

}  // namespace wmark
