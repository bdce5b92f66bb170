#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "wmark/keystream.hpp"
#include "wmark/mark.hpp"
#include "wmark/raster.hpp"
#include "wmark/registry.hpp"

namespace wmark {

struct BitDetection {
  int slot = 0;
  double correlation = 0.0;  // z
  double threshold = 0.0;    // T
  bool present = false;      // z > T, strictly
  bool evaluated = false;
};

struct DetectionResult {
  bool watermarked = false;
  std::optional<std::uint16_t> message;
  std::optional<bool> flag;
  std::array<BitDetection, kSlotCount> per_bit{};
  bool registered = false;
  std::optional<TransformEstimate> registration;
  std::optional<QueryResult> match;

  int evaluated_slots() const;
};

/// z = mean(band[offset+i] * seq[i]); T = alpha/(3N) * sum |band[offset+i]|.
BitDetection correlate_bit(std::span<const double> band, std::span<const double> seq,
                           std::size_t offset, double alpha);

/// Existence slot first; the remaining 15 slots only when it is present.
DetectionResult detect(const RasterImage& img, const WatermarkKey& key, const EmbedParams& params);
DetectionResult detect_plane(const LumaPlane& luma, const WatermarkKey& key,
                             const EmbedParams& params);

/// Plain detection, then on failure a library query and, for a confident
/// match, registration against the retrieved original followed by a second
/// detection with the stored parameters. Throws RegistryUnavailable when the
/// library cannot be read.
DetectionResult detect_with_registration(const RasterImage& img, const WatermarkKey& key,
                                         const ImageLibrary& library, const EmbedParams& params,
                                         const RegistrationOptions& options = {},
                                         RegistrationTrigger trigger = RegistrationTrigger::OnMiss);

/// One line per slot: slot, z, T, present (or "-" when not evaluated).
std::string format_report(const DetectionResult& result);

}  // namespace wmark
