#include "wmark/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "wmark/error.hpp"

namespace wmark {

namespace {

// FFTW planning is not thread-safe; execution of an existing plan is.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int width, int height, fftw_r2r_kind kind) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(width, height, static_cast<int>(kind));
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<double> scratch(static_cast<std::size_t>(width) * height);
    fftw_plan plan = fftw_plan_r2r_2d(height, width, scratch.data(), scratch.data(), kind, kind,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& plans() {
  static PlanCache cache;
  return cache;
}

// Orthonormal scale of DCT-II basis k over n samples.
double basis_scale(int k, int n) { return std::sqrt((k == 0 ? 1.0 : 2.0) / n); }

std::shared_ptr<const std::vector<std::size_t>> zigzag_linear(int width, int height) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const std::vector<std::size_t>>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{width, height}];
  if (!slot) {
    auto order = zigzag_order(width, height);
    auto linear = std::make_shared<std::vector<std::size_t>>();
    linear->reserve(order.size());
    for (auto [row, col] : order) linear->push_back(static_cast<std::size_t>(row) * width + col);
    slot = std::move(linear);
  }
  return slot;
}

}  // namespace

CoefficientPlane dct2(const LumaPlane& plane, int min_side) {
  plane.validate();
  if (plane.width < min_side || plane.height < min_side) {
    throw Error(ErrorCode::ImageTooSmall, "transform needs both sides >= " + std::to_string(min_side));
  }
  CoefficientPlane out{plane.width, plane.height, plane.values};
  fftw_execute_r2r(plans().get(plane.width, plane.height, FFTW_REDFT10), out.values.data(),
                   out.values.data());
  // FFTW's REDFT10 is 2x the unnormalized DCT-II per dimension.
  for (int v = 0; v < out.height; ++v) {
    const double sv = 0.5 * basis_scale(v, out.height);
    for (int u = 0; u < out.width; ++u) out.at(u, v) *= sv * 0.5 * basis_scale(u, out.width);
  }
  return out;
}

LumaPlane idct2(const CoefficientPlane& coeffs) {
  if (coeffs.width <= 0 || coeffs.height <= 0 ||
      coeffs.values.size() != static_cast<std::size_t>(coeffs.width) * coeffs.height) {
    throw Error(ErrorCode::InvalidImage, "malformed coefficient plane");
  }
  LumaPlane out(coeffs.width, coeffs.height);
  out.values = coeffs.values;
  // REDFT01 computes Y0 + 2*sum(Yk cos(...)); fold the orthonormal scales in first.
  for (int v = 0; v < coeffs.height; ++v) {
    const double sv = basis_scale(v, coeffs.height) * (v == 0 ? 1.0 : 0.5);
    for (int u = 0; u < coeffs.width; ++u) {
      const double su = basis_scale(u, coeffs.width) * (u == 0 ? 1.0 : 0.5);
      out.at(u, v) *= sv * su;
    }
  }
  fftw_execute_r2r(plans().get(coeffs.width, coeffs.height, FFTW_REDFT01), out.values.data(),
                   out.values.data());
  return out;
}

std::vector<std::pair<int, int>> zigzag_order(int width, int height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidParams, "zigzag needs positive sides");
  std::vector<std::pair<int, int>> order;
  order.reserve(static_cast<std::size_t>(width) * height);
  for (int d = 0; d <= width + height - 2; ++d) {
    const int row_lo = std::max(0, d - (width - 1));
    const int row_hi = std::min(d, height - 1);
    if (d % 2 == 0) {
      for (int r = row_hi; r >= row_lo; --r) order.emplace_back(r, d - r);
    } else {
      for (int r = row_lo; r <= row_hi; ++r) order.emplace_back(r, d - r);
    }
  }
  return order;
}

BandSpec default_band(int width, int height) {
  const std::size_t area = static_cast<std::size_t>(width) * height;
  return BandSpec{std::max<std::size_t>(1000, area / 20), std::min<std::size_t>(16000, area / 4)};
}

void check_band(const BandSpec& band, int width, int height) {
  const std::size_t area = static_cast<std::size_t>(width) * height;
  if (band.skip < 1 || band.skip > area || band.length > area - band.skip) {
    throw Error(ErrorCode::BandOutOfRange, "band [" + std::to_string(band.skip) + ", +" +
                                               std::to_string(band.length) + ") exceeds " +
                                               std::to_string(area) + " coefficients");
  }
}

BandVector extract_band(const CoefficientPlane& coeffs, const BandSpec& band) {
  check_band(band, coeffs.width, coeffs.height);
  const auto order = zigzag_linear(coeffs.width, coeffs.height);
  BandVector out;
  out.values.resize(band.length);
  for (std::size_t i = 0; i < band.length; ++i) out.values[i] = coeffs.values[(*order)[band.skip + i]];
  return out;
}

CoefficientPlane insert_band(const CoefficientPlane& coeffs, const BandSpec& band,
                             const BandVector& values) {
  check_band(band, coeffs.width, coeffs.height);
  if (values.values.size() != band.length) {
    throw Error(ErrorCode::LengthMismatch, "band vector length differs from band spec");
  }
  const auto order = zigzag_linear(coeffs.width, coeffs.height);
  CoefficientPlane out = coeffs;
  for (std::size_t i = 0; i < band.length; ++i) out.values[(*order)[band.skip + i]] = values.values[i];
  return out;
}

}  // namespace wmark
