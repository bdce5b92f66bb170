#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "wmark/raster.hpp"

namespace wmark {

/// Orthonormal full-frame DCT-II coefficients; (x, y) = (column, row) frequency.
struct CoefficientPlane {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int col, int row) const { return values[static_cast<std::size_t>(row) * width + col]; }
  double& at(int col, int row) { return values[static_cast<std::size_t>(row) * width + col]; }

  bool operator==(const CoefficientPlane&) const = default;
};

/// A run of zig-zag positions [skip, skip + length). skip >= 1 keeps DC untouched.
struct BandSpec {
  std::size_t skip = 0;
  std::size_t length = 0;

  bool operator==(const BandSpec&) const = default;
};

struct BandVector {
  std::vector<double> values;
};

inline constexpr int kMinTransformSide = 8;

/// Smallest watermarkable plane side. Smaller sizes are still transformable
/// when the caller lowers min_side explicitly.
CoefficientPlane dct2(const LumaPlane& plane, int min_side = kMinTransformSide);
LumaPlane idct2(const CoefficientPlane& coeffs);

/// (row, col) positions in JPEG-style zig-zag order, generalized to rectangles.
std::vector<std::pair<int, int>> zigzag_order(int width, int height);

/// skip = max(1000, 5% of W*H), length = min(16000, 25% of W*H).
BandSpec default_band(int width, int height);

/// Throws BandOutOfRange unless 1 <= skip and skip + length <= width*height.
void check_band(const BandSpec& band, int width, int height);

BandVector extract_band(const CoefficientPlane& coeffs, const BandSpec& band);
CoefficientPlane insert_band(const CoefficientPlane& coeffs, const BandSpec& band,
                             const BandVector& values);

}  // namespace wmark
