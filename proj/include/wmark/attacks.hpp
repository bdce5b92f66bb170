#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

#include "wmark/raster.hpp"

namespace wmark {

namespace attack {

struct Identity {};
struct Jpeg { int quality = 75; };
struct Scale { double fx = 1.0, fy = 1.0; };
struct RotateCrop { double theta_deg = 0.0; };
struct RotateCropScale { double theta_deg = 0.0, factor = 1.0; };
/// Keeps the centred block holding `fraction` of the area.
struct Crop { double fraction = 1.0; };
struct Shear { double sx_percent = 0.0, sy_percent = 0.0; };
struct Linear { double a = 1, b = 0, c = 0, d = 1; };
struct Aspect { double fx = 1.0, fy = 1.0; };
struct RowColRemove { int rows = 0, cols = 0; };
struct Median { int window = 3; };
struct GaussianBlur { double sigma = 1.0; };
struct Sharpen { double strength = 0.5; };
struct GeomDistort { double amplitude = 1.0; std::uint64_t seed = 0; };

}  // namespace attack

using AttackSpec =
    std::variant<attack::Identity, attack::Jpeg, attack::Scale, attack::RotateCrop,
                 attack::RotateCropScale, attack::Crop, attack::Shear, attack::Linear,
                 attack::Aspect, attack::RowColRemove, attack::Median, attack::GaussianBlur,
                 attack::Sharpen, attack::GeomDistort>;

/// Canonical text form: name[:p1,p2,...], e.g. "jpeg:50", "rowcol:5,5",
/// "rotate_crop:-2.5", "linear:1.01,0.013,0.009,1.011". Throws InvalidSpec.
AttackSpec parse_attack(std::string_view text);
std::string format_attack(const AttackSpec& spec);
/// Family name used to group report rows ("jpeg", "rotate_crop", ...).
std::string attack_kind(const AttackSpec& spec);

/// Throws InvalidSpec for out-of-range parameters.
void validate_attack(const AttackSpec& spec);

/// Deterministic for a given (img, spec).
RasterImage apply_attack(const RasterImage& img, const AttackSpec& spec);

/// 8x8 block DCT quantization of luma with the Annex K luminance table at the
/// given quality; chroma is carried through unchanged.
RasterImage jpeg_simulate(const RasterImage& img, int quality);

/// Annex K luminance table scaled by the usual quality factor, row-major 8x8.
std::array<int, 64> jpeg_luma_table(int quality);

}  // namespace wmark
