#include "wmark/mark.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "wmark/error.hpp"

namespace wmark {

PayloadCode encode_payload(int message) {
  if (message < 0 || message > kMaxMessage) {
    throw Error(ErrorCode::MessageOutOfRange, "message must be in 0..16383, got " +
                                                  std::to_string(message));
  }
  PayloadCode code;
  code.message = static_cast<std::uint16_t>(message);
  // Strictly more ones than zeros: a 7/7 tie is stored as is.
  code.flag = std::popcount(code.message) > kMessageBits / 2;
  const std::uint16_t stored = code.flag ? (~code.message & kMaxMessage) : code.message;
  code.bits[kExistenceSlot] = true;
  code.bits[kFlagSlot] = code.flag;
  for (int j = 0; j < kMessageBits; ++j) {
    code.bits[2 + j] = ((stored >> j) & 1u) != 0;
  }
  for (int slot = 0; slot < kSlotCount; ++slot) {
    if (code.bits[slot]) code.cast_set.push_back(slot);
  }
  return code;
}

std::optional<std::uint16_t> decode_payload(const std::array<bool, kSlotCount>& bits) {
  if (!bits[kExistenceSlot]) return std::nullopt;
  std::uint16_t stored = 0;
  for (int j = 0; j < kMessageBits; ++j) {
    if (bits[2 + j]) stored = static_cast<std::uint16_t>(stored | (1u << j));
  }
  return bits[kFlagSlot] ? static_cast<std::uint16_t>(~stored & kMaxMessage) : stored;
}

EmbedParams default_params(int width, int height) {
  EmbedParams p;
  p.alpha = kDefaultAlpha;
  p.band = default_band(width, height);
  p.seq_len = p.band.length > kShiftRoom ? std::min(kMaxSeqLen, p.band.length - kShiftRoom) : 0;
  return p;
}

EmbedParams ParamOverrides::resolve(int width, int height) const {
  EmbedParams p = default_params(width, height);
  if (alpha) p.alpha = *alpha;
  if (skip) p.band.skip = *skip;
  if (length) {
    p.band.length = *length;
    p.seq_len = p.band.length > kShiftRoom ? std::min(kMaxSeqLen, p.band.length - kShiftRoom) : 0;
  }
  if (seq_len) p.seq_len = *seq_len;
  return p;
}

void check_params(const EmbedParams& params, int width, int height) {
  if (!(params.alpha >= 0.0 && params.alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidParams, "alpha must be in [0, 1]");
  }
  if (params.seq_len == 0) {
    throw Error(ErrorCode::CapacityExceeded, "sequence length is zero");
  }
  if (params.band.length < params.seq_len + kShiftRoom) {
    throw Error(ErrorCode::CapacityExceeded,
                "band of " + std::to_string(params.band.length) + " cannot host N=" +
                    std::to_string(params.seq_len) + " plus 15 shifts");
  }
  try {
    check_band(params.band, width, height);
  } catch (const Error& e) {
    throw Error(ErrorCode::CapacityExceeded, e.what());
  }
}

void cast_sequence(std::span<double> band, std::span<const double> seq, std::size_t offset,
                   double alpha) {
  if (offset > band.size() || seq.size() > band.size() - offset) {
    throw Error(ErrorCode::RangeOverflow, "sequence does not fit band at offset " +
                                              std::to_string(offset));
  }
  for (std::size_t i = 0; i < seq.size(); ++i) {
    double& t = band[offset + i];
    t += alpha * std::abs(t) * seq[i];
  }
}

SupplementaryInfo make_supplementary(const RasterImage& original, const EmbedParams& params) {
  const LumaPlane luma = to_luma(original);
  double mean = 0.0;
  for (double v : luma.values) mean += v;
  mean /= static_cast<double>(luma.values.size());
  double var = 0.0;
  for (double v : luma.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(luma.values.size());
  return {original.width, original.height, params.band, params.seq_len, params.alpha, mean, var};
}

Embedded embed(const RasterImage& img, const WatermarkKey& key, int message,
               const EmbedParams& params) {
  img.validate();
  PayloadCode payload = encode_payload(message);
  if (img.width < kMinTransformSide || img.height < kMinTransformSide) {
    throw Error(ErrorCode::CapacityExceeded, "image smaller than 8x8");
  }
  check_params(params, img.width, img.height);

  const LumaPlane luma = to_luma(img);
  CoefficientPlane coeffs = dct2(luma);
  BandVector band = extract_band(coeffs, params.band);
  const SeedVector seeds = derive_seed_vector(key);
  for (int slot : payload.cast_set) {
    const auto seq = gaussian_sequence(seeds.seeds[slot], params.seq_len);
    cast_sequence(band.values, seq, static_cast<std::size_t>(slot), params.alpha);
  }
  coeffs = insert_band(coeffs, params.band, band);

  Embedded out;
  out.image = merge_luma(img, idct2(coeffs));
  out.receipt.params = params;
  out.receipt.key = key.value();
  out.receipt.casts = static_cast<int>(payload.cast_set.size());
  out.receipt.payload = std::move(payload);
  out.receipt.supplementary = make_supplementary(img, params);
  return out;
}

}  // namespace wmark
