#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace wmark {

/// 8-bit image, row-major, channel-interleaved. channels is 1 (gray) or 3 (RGB).
struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> samples;

  /// Throws Error(InvalidImage) when the dimension/sample-count invariants fail.
  void validate() const;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::uint8_t at(int x, int y, int c = 0) const {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t& at(int x, int y, int c = 0) {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool operator==(const RasterImage&) const = default;
};

/// One real value per pixel, row-major. Rounded to 8 bits only in merge_luma.
struct LumaPlane {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  LumaPlane() = default;
  LumaPlane(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  void validate() const;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
};

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// Reads binary PGM (P5), PPM (P6) or PNG. Decoding is lossless.
RasterImage load_image(const std::filesystem::path& path);

/// Container chosen by extension: .pgm, .ppm, .pnm (by channel count) or .png.
void save_image(const RasterImage& img, const std::filesystem::path& path);

RasterImage decode_pnm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pnm(const RasterImage& img);

LumaPlane to_luma(const RasterImage& img);

/// Writes plane back into img. Gray: round+clamp. RGB: channels scaled by
/// new/old luma (old floored at 1e-6), then clamped.
RasterImage merge_luma(const RasterImage& img, const LumaPlane& plane);

/// 10*log10(255^2/MSE) over all samples; +inf for identical images.
double psnr(const RasterImage& a, const RasterImage& b);

/// Bilinear, corner-aligned, clamp-to-edge.
LumaPlane resample(const LumaPlane& plane, int new_width, int new_height);

/// Bilinear sample at fractional position with edge clamping.
double sample_bilinear(const LumaPlane& plane, double x, double y);

/// Row-major 2x2 matrix mapping source offsets from the plane centre to
/// destination offsets.
using Affine2 = std::array<double, 4>;

/// Output keeps the input size; each output pixel is bilinearly sampled at
/// the inverse-mapped position (edge-clamped). `valid`, when given, marks
/// output pixels whose source lies inside the frame.
LumaPlane warp_affine(const LumaPlane& plane, const Affine2& forward,
                      std::vector<std::uint8_t>* valid = nullptr);

/// Rotation by theta degrees, counter-clockwise as displayed (y axis down).
/// Multiples of 90 degrees use exact lattice coefficients.
Affine2 rotation_matrix(double theta_deg);
LumaPlane rotate_plane(const LumaPlane& plane, double theta_deg,
                       std::vector<std::uint8_t>* valid = nullptr);

std::vector<LumaPlane> split_channels(const RasterImage& img);
RasterImage join_channels(const std::vector<LumaPlane>& planes);

}  // namespace wmark
