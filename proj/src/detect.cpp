#include "wmark/detect.hpp"

#include <cmath>
#include <cstdio>

#include "wmark/error.hpp"

namespace wmark {

int DetectionResult::evaluated_slots() const {
  int n = 0;
  for (const auto& b : per_bit) n += b.evaluated ? 1 : 0;
  return n;
}

BitDetection correlate_bit(std::span<const double> band, std::span<const double> seq,
                           std::size_t offset, double alpha) {
  if (seq.empty() || offset > band.size() || seq.size() > band.size() - offset) {
    throw Error(ErrorCode::RangeOverflow, "sequence does not fit band at offset " +
                                              std::to_string(offset));
  }
  double dot = 0.0, magnitude = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const double t = band[offset + i];
    dot += t * seq[i];
    magnitude += std::abs(t);
  }
  const double n = static_cast<double>(seq.size());
  BitDetection out;
  out.correlation = dot / n;
  out.threshold = alpha * magnitude / (3.0 * n);
  out.present = out.correlation > out.threshold;
  out.evaluated = true;
  return out;
}

DetectionResult detect_plane(const LumaPlane& luma, const WatermarkKey& key,
                             const EmbedParams& params) {
  luma.validate();
  if (luma.width < kMinTransformSide || luma.height < kMinTransformSide) {
    throw Error(ErrorCode::CapacityExceeded, "image smaller than 8x8");
  }
  check_params(params, luma.width, luma.height);
  if (params.alpha <= 0.0) throw Error(ErrorCode::InvalidParams, "detection needs alpha > 0");

  const BandVector band = extract_band(dct2(luma), params.band);
  const SeedVector seeds = derive_seed_vector(key);

  DetectionResult result;
  for (int slot = 0; slot < kSlotCount; ++slot) result.per_bit[slot].slot = slot;
  auto evaluate = [&](int slot) {
    const auto seq = gaussian_sequence(seeds.seeds[slot], params.seq_len);
    BitDetection bit = correlate_bit(band.values, seq, static_cast<std::size_t>(slot), params.alpha);
    bit.slot = slot;
    result.per_bit[slot] = bit;
    return bit.present;
  };

  if (!evaluate(kExistenceSlot)) return result;
  std::array<bool, kSlotCount> pattern{};
  pattern[kExistenceSlot] = true;
  for (int slot = 1; slot < kSlotCount; ++slot) pattern[slot] = evaluate(slot);
  result.watermarked = true;
  result.flag = pattern[kFlagSlot];
  result.message = decode_payload(pattern);
  return result;
}

DetectionResult detect(const RasterImage& img, const WatermarkKey& key, const EmbedParams& params) {
  return detect_plane(to_luma(img), key, params);
}

DetectionResult detect_with_registration(const RasterImage& img, const WatermarkKey& key,
                                         const ImageLibrary& library, const EmbedParams& params,
                                         const RegistrationOptions& options,
                                         RegistrationTrigger trigger) {
  DetectionResult first;
  const LumaPlane luma = to_luma(img);
  try {
    first = detect_plane(luma, key, params);
  } catch (const Error& e) {
    // A suspect too small for the nominal band still deserves a registration attempt.
    if (e.code() != ErrorCode::CapacityExceeded) throw;
  }
  if (first.watermarked && trigger == RegistrationTrigger::OnMiss) return first;

  std::optional<QueryResult> match;
  SupplementaryInfo supp;
  RasterImage original;
  try {
    match = library.query(img);
    if (!match || !match->confident) {
      first.match = match;
      return first;
    }
    supp = library.supplementary(match->imageid);
    original = library.original(match->imageid);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::StoreUnavailable || e.code() == ErrorCode::IoFailure ||
        e.code() == ErrorCode::FileNotFound || e.code() == ErrorCode::CorruptData) {
      throw Error(ErrorCode::RegistryUnavailable, e.what());
    }
    throw;
  }

  Registration reg;
  try {
    reg = register_geometry(luma, to_luma(original), supp, options);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::RegistrationFailed) throw;
    first.match = match;
    return first;
  }
  DetectionResult second = detect_plane(reg.plane, key, supp.params());
  if (!second.watermarked && first.watermarked) {
    first.match = match;
    return first;
  }
  second.registered = true;
  second.registration = reg.estimate;
  second.match = match;
  return second;
}

std::string format_report(const DetectionResult& r) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "watermarked\t%s\n", r.watermarked ? "yes" : "no");
  out += line;
  if (r.message) {
    std::snprintf(line, sizeof line, "message\t%u\n", static_cast<unsigned>(*r.message));
    out += line;
  }
  if (r.flag) {
    std::snprintf(line, sizeof line, "flag\t%d\n", *r.flag ? 1 : 0);
    out += line;
  }
  std::snprintf(line, sizeof line, "registered\t%s\n", r.registered ? "yes" : "no");
  out += line;
  if (r.registration) {
    const auto& t = *r.registration;
    std::snprintf(line, sizeof line, "transform\tsx=%.4f sy=%.4f theta=%.3f dx=%.2f dy=%.2f\n",
                  t.scale_x, t.scale_y, t.theta_deg, t.dx, t.dy);
    out += line;
  }
  if (r.match) {
    std::snprintf(line, sizeof line, "match\timageid=%u similarity=%.6f\n",
                  static_cast<unsigned>(r.match->imageid), r.match->similarity);
    out += line;
  }
  out += "slot\tz\tT\tpresent\n";
  for (const auto& b : r.per_bit) {
    if (!b.evaluated) {
      std::snprintf(line, sizeof line, "%d\t-\t-\t-\n", b.slot);
    } else {
      std::snprintf(line, sizeof line, "%d\t%.6g\t%.6g\t%d\n", b.slot, b.correlation, b.threshold,
                    b.present ? 1 : 0);
    }
    out += line;
  }
  return out;
}

}  // namespace wmark
