#include "wmark/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <string>

#include "wmark/error.hpp"

namespace wmark {

void RasterImage::validate() const {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::InvalidImage, "non-positive dimensions");
  }
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::InvalidImage, "channels must be 1 or 3");
  }
  if (samples.size() != pixel_count() * channels) {
    throw Error(ErrorCode::InvalidImage, "sample count does not match dimensions");
  }
}

void LumaPlane::validate() const {
  if (width <= 0 || height <= 0 ||
      values.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::InvalidImage, "malformed luma plane");
  }
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Parses one header token, skipping whitespace and '#' comments.
bool next_token(const std::vector<std::uint8_t>& b, std::size_t& pos, long& value) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= b.size() || !std::isdigit(b[pos])) return false;
  value = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    value = value * 10 + (b[pos] - '0');
    if (value > std::numeric_limits<int>::max()) return false;
    ++pos;
  }
  return true;
}

RasterImage decode_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw Error(ErrorCode::CorruptData, path.string() + ": " + image.message);
  }
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  RasterImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = gray ? 1 : 3;
  out.samples.resize(PNG_IMAGE_SIZE(image));
  // Alpha, if any, is composited onto black.
  png_color background{0, 0, 0};
  if (!png_image_finish_read(&image, &background, out.samples.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::CorruptData, path.string() + ": " + image.message);
  }
  out.validate();
  return out;
}

void encode_png(const RasterImage& img, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.samples.data(), 0,
                               nullptr)) {
    throw Error(ErrorCode::IoFailure, path.string() + ": " + image.message);
  }
}

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

std::uint8_t clamp_round(double v) {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v));
}

}  // namespace

RasterImage decode_pnm(const std::vector<std::uint8_t>& b) {
  if (b.size() < 2 || b[0] != 'P' || (b[1] != '5' && b[1] != '6')) {
    throw Error(ErrorCode::UnsupportedFormat, "not a binary PGM/PPM stream");
  }
  std::size_t pos = 2;
  long w = 0, h = 0, maxval = 0;
  if (!next_token(b, pos, w) || !next_token(b, pos, h) || !next_token(b, pos, maxval)) {
    throw Error(ErrorCode::CorruptData, "truncated or malformed PNM header");
  }
  if (maxval != 255) throw Error(ErrorCode::UnsupportedFormat, "maxval must be 255");
  if (w <= 0 || h <= 0) throw Error(ErrorCode::CorruptData, "non-positive dimensions");
  if (pos >= b.size() || !std::isspace(b[pos])) {
    throw Error(ErrorCode::CorruptData, "missing whitespace after maxval");
  }
  ++pos;
  RasterImage img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.channels = b[1] == '5' ? 1 : 3;
  const std::size_t need = img.pixel_count() * img.channels;
  if (b.size() - pos < need) throw Error(ErrorCode::CorruptData, "truncated sample payload");
  img.samples.assign(b.begin() + static_cast<std::ptrdiff_t>(pos),
                     b.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

std::vector<std::uint8_t> encode_pnm(const RasterImage& img) {
  img.validate();
  const std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(img.width) + " " + std::to_string(img.height) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.samples.begin(), img.samples.end());
  return out;
}

RasterImage load_image(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  static constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(std::begin(kPngMagic), std::end(kPngMagic), bytes.begin())) {
    return decode_png(path);
  }
  return decode_pnm(bytes);
}

void save_image(const RasterImage& img, const std::filesystem::path& path) {
  img.validate();
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    encode_png(img, path);
    return;
  }
  if (ext != ".pgm" && ext != ".ppm" && ext != ".pnm") {
    throw Error(ErrorCode::UnsupportedFormat, "unknown extension " + ext);
  }
  if ((ext == ".pgm" && img.channels != 1) || (ext == ".ppm" && img.channels != 3)) {
    throw Error(ErrorCode::UnsupportedFormat, "extension does not match channel count");
  }
  const auto bytes = encode_pnm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

LumaPlane to_luma(const RasterImage& img) {
  img.validate();
  LumaPlane plane(img.width, img.height);
  const std::size_t n = img.pixel_count();
  if (img.channels == 1) {
    for (std::size_t i = 0; i < n; ++i) plane.values[i] = img.samples[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t* p = &img.samples[i * 3];
      plane.values[i] = kLumaR * p[0] + kLumaG * p[1] + kLumaB * p[2];
    }
  }
  return plane;
}

RasterImage merge_luma(const RasterImage& img, const LumaPlane& plane) {
  img.validate();
  if (plane.width != img.width || plane.height != img.height) {
    throw Error(ErrorCode::DimensionMismatch, "luma plane does not match image");
  }
  RasterImage out = img;
  const std::size_t n = img.pixel_count();
  if (img.channels == 1) {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = clamp_round(plane.values[i]);
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = &img.samples[i * 3];
    const double old_luma = std::max(1e-6, kLumaR * p[0] + kLumaG * p[1] + kLumaB * p[2]);
    const double ratio = plane.values[i] / old_luma;
    for (int c = 0; c < 3; ++c) out.samples[i * 3 + c] = clamp_round(p[c] * ratio);
  }
  return out;
}

double psnr(const RasterImage& a, const RasterImage& b) {
  a.validate();
  b.validate();
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw Error(ErrorCode::DimensionMismatch, "psnr operands differ in shape");
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const double d = static_cast<double>(a.samples[i]) - b.samples[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(a.samples.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double sample_bilinear(const LumaPlane& plane, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(plane.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(plane.height - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, plane.width - 1);
  const int y1 = std::min(y0 + 1, plane.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = plane.at(x0, y0) + fx * (plane.at(x1, y0) - plane.at(x0, y0));
  const double bottom = plane.at(x0, y1) + fx * (plane.at(x1, y1) - plane.at(x0, y1));
  return top + fy * (bottom - top);
}

LumaPlane resample(const LumaPlane& plane, int new_width, int new_height) {
  plane.validate();
  if (new_width <= 0 || new_height <= 0) {
    throw Error(ErrorCode::InvalidParams, "resample target must be positive");
  }
  // Corner-aligned mapping: first and last samples coincide with the source's.
  auto map = [](int i, int src, int dst) {
    if (dst == 1) return (src - 1) / 2.0;
    return static_cast<double>(i) * (src - 1) / (dst - 1);
  };
  LumaPlane out(new_width, new_height);
  for (int y = 0; y < new_height; ++y) {
    const double sy = map(y, plane.height, new_height);
    for (int x = 0; x < new_width; ++x) {
      out.at(x, y) = sample_bilinear(plane, map(x, plane.width, new_width), sy);
    }
  }
  return out;
}

Affine2 rotation_matrix(double theta_deg) {
  const double quarter = theta_deg / 90.0;
  if (quarter == std::floor(quarter)) {
    static constexpr double kCos[4] = {1, 0, -1, 0};
    static constexpr double kSin[4] = {0, 1, 0, -1};
    const int q = static_cast<int>(std::fmod(std::fmod(quarter, 4.0) + 4.0, 4.0));
    return {kCos[q], kSin[q], -kSin[q], kCos[q]};
  }
  const double rad = theta_deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  return {c, s, -s, c};
}

LumaPlane warp_affine(const LumaPlane& plane, const Affine2& forward,
                      std::vector<std::uint8_t>* valid) {
  plane.validate();
  const auto [a, b, c, d] = forward;
  const double det = a * d - b * c;
  if (std::abs(det) < 1e-12) throw Error(ErrorCode::InvalidParams, "singular affine matrix");
  // Inverse; exact when the matrix is a lattice rotation.
  const Affine2 inv = det == 1.0 ? Affine2{d, -b, -c, a} : Affine2{d / det, -b / det, -c / det, a / det};
  const double cx = (plane.width - 1) / 2.0;
  const double cy = (plane.height - 1) / 2.0;
  LumaPlane out(plane.width, plane.height);
  if (valid) valid->assign(out.values.size(), 0);
  for (int y = 0; y < plane.height; ++y) {
    const double v = y - cy;
    for (int x = 0; x < plane.width; ++x) {
      const double u = x - cx;
      const double sx = inv[0] * u + inv[1] * v + cx;
      const double sy = inv[2] * u + inv[3] * v + cy;
      out.at(x, y) = sample_bilinear(plane, sx, sy);
      if (valid) {
        const bool inside = sx >= -0.5 && sx <= plane.width - 0.5 && sy >= -0.5 &&
                            sy <= plane.height - 0.5;
        (*valid)[static_cast<std::size_t>(y) * plane.width + x] = inside ? 1 : 0;
      }
    }
  }
  return out;
}

LumaPlane rotate_plane(const LumaPlane& plane, double theta_deg, std::vector<std::uint8_t>* valid) {
  return warp_affine(plane, rotation_matrix(theta_deg), valid);
}

std::vector<LumaPlane> split_channels(const RasterImage& img) {
  img.validate();
  std::vector<LumaPlane> planes(img.channels, LumaPlane(img.width, img.height));
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < img.channels; ++c) planes[c].values[i] = img.samples[i * img.channels + c];
  }
  return planes;
}

RasterImage join_channels(const std::vector<LumaPlane>& planes) {
  if (planes.empty() || (planes.size() != 1 && planes.size() != 3)) {
    throw Error(ErrorCode::InvalidImage, "expected 1 or 3 planes");
  }
  RasterImage img;
  img.width = planes[0].width;
  img.height = planes[0].height;
  img.channels = static_cast<int>(planes.size());
  for (const auto& p : planes) {
    if (p.width != img.width || p.height != img.height) {
      throw Error(ErrorCode::DimensionMismatch, "channel planes differ in size");
    }
  }
  const std::size_t n = img.pixel_count();
  img.samples.resize(n * img.channels);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < img.channels; ++c) {
      img.samples[i * img.channels + c] = clamp_round(planes[c].values[i]);
    }
  }
  return img;
}

}  // namespace wmark
