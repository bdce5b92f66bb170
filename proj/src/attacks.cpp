#include "wmark/attacks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <vector>

#include "wmark/error.hpp"
#include "wmark/keystream.hpp"

namespace wmark {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); }

std::vector<double> parse_args(std::string_view args) {
  std::vector<double> out;
  if (args.empty()) return out;
  std::size_t start = 0;
  while (start <= args.size()) {
    const std::size_t comma = std::min(args.find(',', start), args.size());
    std::string_view token = args.substr(start, comma - start);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (token.empty() || ec != std::errc() || ptr != token.data() + token.size() ||
        !std::isfinite(value)) {
      invalid("bad number '" + std::string(token) + "'");
    }
    out.push_back(value);
    start = comma + 1;
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

int as_int(double v, const char* what) {
  if (v != std::floor(v) || std::abs(v) > 1e9) invalid(std::string(what) + " must be an integer");
  return static_cast<int>(v);
}

// Maps planes through fn and reassembles an 8-bit image.
template <class Fn>
RasterImage per_channel(const RasterImage& img, Fn&& fn) {
  auto planes = split_channels(img);
  for (auto& p : planes) p = fn(p);
  return join_channels(planes);
}

LumaPlane scale_plane(const LumaPlane& p, double fx, double fy) {
  const int w = std::max(1, static_cast<int>(std::lround(p.width * fx)));
  const int h = std::max(1, static_cast<int>(std::lround(p.height * fy)));
  return resample(p, w, h);
}

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

LumaPlane convolve_separable(const LumaPlane& p, const std::vector<double>& kernel) {
  const int r = static_cast<int>(kernel.size() / 2);
  LumaPlane tmp(p.width, p.height), out(p.width, p.height);
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      double s = 0.0;
      for (int k = -r; k <= r; ++k) s += kernel[k + r] * p.at(reflect101(x + k, p.width), y);
      tmp.at(x, y) = s;
    }
  }
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      double s = 0.0;
      for (int k = -r; k <= r; ++k) s += kernel[k + r] * tmp.at(x, reflect101(y + k, p.height));
      out.at(x, y) = s;
    }
  }
  return out;
}

LumaPlane median_plane(const LumaPlane& p, int window) {
  const int r = window / 2;
  LumaPlane out(p.width, p.height);
  std::vector<double> buf(static_cast<std::size_t>(window) * window);
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      std::size_t n = 0;
      for (int j = -r; j <= r; ++j) {
        for (int i = -r; i <= r; ++i) {
          buf[n++] = p.at(reflect101(x + i, p.width), reflect101(y + j, p.height));
        }
      }
      std::nth_element(buf.begin(), buf.begin() + n / 2, buf.begin() + n);
      out.at(x, y) = buf[n / 2];
    }
  }
  return out;
}

LumaPlane sharpen_plane(const LumaPlane& p, double s) {
  LumaPlane out(p.width, p.height);
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      const double neighbours = p.at(reflect101(x - 1, p.width), y) +
                                p.at(reflect101(x + 1, p.width), y) +
                                p.at(x, reflect101(y - 1, p.height)) +
                                p.at(x, reflect101(y + 1, p.height));
      out.at(x, y) = (1.0 + 4.0 * s) * p.at(x, y) - s * neighbours;
    }
  }
  return out;
}

// Smooth displacement field: a few random low-frequency sinusoids whose
// weights sum to one, so |displacement| <= amplitude on each axis.
struct Wave {
  double weight, fx, fy, phase;
};

std::vector<Wave> draw_waves(MixStream& rng, int count) {
  std::vector<Wave> waves(count);
  double total = 0.0;
  for (auto& w : waves) {
    w.weight = rng.next_open_unit();
    w.fx = 1.0 + 3.0 * rng.next_open_unit();
    w.fy = 1.0 + 3.0 * rng.next_open_unit();
    w.phase = 2.0 * std::numbers::pi * rng.next_open_unit();
    total += w.weight;
  }
  for (auto& w : waves) w.weight /= total;
  return waves;
}

RasterImage geom_distort(const RasterImage& img, double amplitude, std::uint64_t seed) {
  MixStream rng(seed);
  const auto wx = draw_waves(rng, 4);
  const auto wy = draw_waves(rng, 4);
  auto field = [&](const std::vector<Wave>& waves, double u, double v) {
    double d = 0.0;
    for (const auto& w : waves) d += w.weight * std::sin(2.0 * std::numbers::pi * (w.fx * u + w.fy * v) + w.phase);
    return amplitude * d;
  };
  return per_channel(img, [&](const LumaPlane& p) {
    LumaPlane out(p.width, p.height);
    for (int y = 0; y < p.height; ++y) {
      for (int x = 0; x < p.width; ++x) {
        const double u = static_cast<double>(x) / p.width;
        const double v = static_cast<double>(y) / p.height;
        out.at(x, y) = sample_bilinear(p, x + field(wx, u, v), y + field(wy, u, v));
      }
    }
    return out;
  });
}

std::vector<int> evenly_spaced(int count, int extent) {
  std::vector<int> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(static_cast<int>((static_cast<long long>(i) + 1) * extent / (count + 1)));
  }
  return out;
}

RasterImage remove_rows_cols(const RasterImage& img, int rows, int cols) {
  const auto drop_rows = evenly_spaced(rows, img.height);
  const auto drop_cols = evenly_spaced(cols, img.width);
  std::vector<bool> keep_row(img.height, true), keep_col(img.width, true);
  for (int r : drop_rows) keep_row[r] = false;
  for (int c : drop_cols) keep_col[c] = false;
  RasterImage out;
  out.width = img.width - cols;
  out.height = img.height - rows;
  out.channels = img.channels;
  out.samples.reserve(out.pixel_count() * out.channels);
  for (int y = 0; y < img.height; ++y) {
    if (!keep_row[y]) continue;
    for (int x = 0; x < img.width; ++x) {
      if (!keep_col[x]) continue;
      for (int c = 0; c < img.channels; ++c) out.samples.push_back(img.at(x, y, c));
    }
  }
  return out;
}

RasterImage crop_centered(const RasterImage& img, double fraction) {
  const double side = std::sqrt(fraction);
  const int w = std::clamp(static_cast<int>(std::lround(img.width * side)), 1, img.width);
  const int h = std::clamp(static_cast<int>(std::lround(img.height * side)), 1, img.height);
  const int x0 = (img.width - w) / 2;
  const int y0 = (img.height - h) / 2;
  RasterImage out;
  out.width = w;
  out.height = h;
  out.channels = img.channels;
  out.samples.reserve(out.pixel_count() * out.channels);
  for (int y = y0; y < y0 + h; ++y) {
    const auto* row = &img.samples[(static_cast<std::size_t>(y) * img.width + x0) * img.channels];
    out.samples.insert(out.samples.end(), row, row + static_cast<std::size_t>(w) * img.channels);
  }
  return out;
}

RasterImage warp(const RasterImage& img, const Affine2& forward) {
  return per_channel(img, [&](const LumaPlane& p) { return warp_affine(p, forward); });
}

}  // namespace

// ---------------------------------------------------------------------------
// Text form

AttackSpec parse_attack(std::string_view text) {
  const std::size_t colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const auto args = parse_args(colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1));
  auto need = [&](std::size_t n) {
    if (args.size() != n) {
      invalid(std::string(name) + " expects " + std::to_string(n) + " parameter(s)");
    }
  };
  AttackSpec spec;
  if (name == "identity") {
    need(0);
    spec = attack::Identity{};
  } else if (name == "jpeg") {
    need(1);
    spec = attack::Jpeg{as_int(args[0], "quality")};
  } else if (name == "scale") {
    if (args.size() == 1) {
      spec = attack::Scale{args[0], args[0]};
    } else {
      need(2);
      spec = attack::Scale{args[0], args[1]};
    }
  } else if (name == "rotate_crop") {
    need(1);
    spec = attack::RotateCrop{args[0]};
  } else if (name == "rotate_crop_scale") {
    need(2);
    spec = attack::RotateCropScale{args[0], args[1]};
  } else if (name == "crop") {
    need(1);
    spec = attack::Crop{args[0]};
  } else if (name == "shear") {
    need(2);
    spec = attack::Shear{args[0], args[1]};
  } else if (name == "linear") {
    need(4);
    spec = attack::Linear{args[0], args[1], args[2], args[3]};
  } else if (name == "aspect") {
    need(2);
    spec = attack::Aspect{args[0], args[1]};
  } else if (name == "rowcol") {
    need(2);
    spec = attack::RowColRemove{as_int(args[0], "rows"), as_int(args[1], "cols")};
  } else if (name == "median") {
    need(1);
    spec = attack::Median{as_int(args[0], "window")};
  } else if (name == "blur") {
    need(1);
    spec = attack::GaussianBlur{args[0]};
  } else if (name == "sharpen") {
    need(1);
    spec = attack::Sharpen{args[0]};
  } else if (name == "geom_distort") {
    need(2);
    if (args[1] < 0) invalid("seed must be non-negative");
    spec = attack::GeomDistort{args[0], static_cast<std::uint64_t>(as_int(args[1], "seed"))};
  } else {
    invalid("unknown attack '" + std::string(name) + "'");
  }
  validate_attack(spec);
  return spec;
}

std::string format_attack(const AttackSpec& spec) {
  return std::visit(
      Overloaded{
          [](const attack::Identity&) { return std::string("identity"); },
          [](const attack::Jpeg& a) { return "jpeg:" + std::to_string(a.quality); },
          [](const attack::Scale& a) { return "scale:" + fmt(a.fx) + "," + fmt(a.fy); },
          [](const attack::RotateCrop& a) { return "rotate_crop:" + fmt(a.theta_deg); },
          [](const attack::RotateCropScale& a) {
            return "rotate_crop_scale:" + fmt(a.theta_deg) + "," + fmt(a.factor);
          },
          [](const attack::Crop& a) { return "crop:" + fmt(a.fraction); },
          [](const attack::Shear& a) { return "shear:" + fmt(a.sx_percent) + "," + fmt(a.sy_percent); },
          [](const attack::Linear& a) {
            return "linear:" + fmt(a.a) + "," + fmt(a.b) + "," + fmt(a.c) + "," + fmt(a.d);
          },
          [](const attack::Aspect& a) { return "aspect:" + fmt(a.fx) + "," + fmt(a.fy); },
          [](const attack::RowColRemove& a) {
            return "rowcol:" + std::to_string(a.rows) + "," + std::to_string(a.cols);
          },
          [](const attack::Median& a) { return "median:" + std::to_string(a.window); },
          [](const attack::GaussianBlur& a) { return "blur:" + fmt(a.sigma); },
          [](const attack::Sharpen& a) { return "sharpen:" + fmt(a.strength); },
          [](const attack::GeomDistort& a) {
            return "geom_distort:" + fmt(a.amplitude) + "," + std::to_string(a.seed);
          },
      },
      spec);
}

std::string attack_kind(const AttackSpec& spec) {
  const std::string text = format_attack(spec);
  return text.substr(0, text.find(':'));
}

void validate_attack(const AttackSpec& spec) {
  auto positive_factor = [](double f, const char* what) {
    if (!(f > 0.0 && f <= 8.0)) invalid(std::string(what) + " must be in (0, 8]");
  };
  auto angle = [](double t) {
    if (!(t >= -360.0 && t <= 360.0)) invalid("rotation must be in [-360, 360] degrees");
  };
  std::visit(Overloaded{
                 [](const attack::Identity&) {},
                 [](const attack::Jpeg& a) {
                   if (a.quality < 1 || a.quality > 100) invalid("jpeg quality must be in 1..100");
                 },
                 [&](const attack::Scale& a) {
                   positive_factor(a.fx, "scale fx");
                   positive_factor(a.fy, "scale fy");
                 },
                 [&](const attack::RotateCrop& a) { angle(a.theta_deg); },
                 [&](const attack::RotateCropScale& a) {
                   angle(a.theta_deg);
                   positive_factor(a.factor, "scale factor");
                 },
                 [](const attack::Crop& a) {
                   if (!(a.fraction > 0.0 && a.fraction <= 1.0)) invalid("crop fraction must be in (0, 1]");
                 },
                 [](const attack::Shear& a) {
                   if (std::abs(a.sx_percent) > 50.0 || std::abs(a.sy_percent) > 50.0) {
                     invalid("shear must be within +-50%");
                   }
                   if (std::abs(1.0 - a.sx_percent * a.sy_percent / 1e4) < 1e-6) invalid("shear is singular");
                 },
                 [](const attack::Linear& a) {
                   if (std::abs(a.a * a.d - a.b * a.c) < 1e-6) invalid("linear matrix is singular");
                 },
                 [&](const attack::Aspect& a) {
                   positive_factor(a.fx, "aspect fx");
                   positive_factor(a.fy, "aspect fy");
                 },
                 [](const attack::RowColRemove& a) {
                   if (a.rows < 0 || a.cols < 0) invalid("row/column counts must be non-negative");
                 },
                 [](const attack::Median& a) {
                   if (a.window != 3 && a.window != 5) invalid("median window must be 3 or 5");
                 },
                 [](const attack::GaussianBlur& a) {
                   if (!(a.sigma > 0.0 && a.sigma <= 10.0)) invalid("blur sigma must be in (0, 10]");
                 },
                 [](const attack::Sharpen& a) {
                   if (!(a.strength >= 0.0 && a.strength <= 5.0)) invalid("sharpen strength must be in [0, 5]");
                 },
                 [](const attack::GeomDistort& a) {
                   if (!(a.amplitude >= 0.0 && a.amplitude <= 20.0)) {
                     invalid("distortion amplitude must be in [0, 20] px");
                   }
                 },
             },
             spec);
}

// ---------------------------------------------------------------------------
// Application

RasterImage apply_attack(const RasterImage& img, const AttackSpec& spec) {
  img.validate();
  validate_attack(spec);
  return std::visit(
      Overloaded{
          [&](const attack::Identity&) { return img; },
          [&](const attack::Jpeg& a) { return jpeg_simulate(img, a.quality); },
          [&](const attack::Scale& a) {
            return per_channel(img, [&](const LumaPlane& p) { return scale_plane(p, a.fx, a.fy); });
          },
          [&](const attack::Aspect& a) {
            return per_channel(img, [&](const LumaPlane& p) { return scale_plane(p, a.fx, a.fy); });
          },
          [&](const attack::RotateCrop& a) { return warp(img, rotation_matrix(a.theta_deg)); },
          [&](const attack::RotateCropScale& a) {
            const RasterImage rotated = warp(img, rotation_matrix(a.theta_deg));
            return per_channel(rotated, [&](const LumaPlane& p) { return scale_plane(p, a.factor, a.factor); });
          },
          [&](const attack::Crop& a) { return crop_centered(img, a.fraction); },
          [&](const attack::Shear& a) {
            return warp(img, Affine2{1.0, a.sx_percent / 100.0, a.sy_percent / 100.0, 1.0});
          },
          [&](const attack::Linear& a) { return warp(img, Affine2{a.a, a.b, a.c, a.d}); },
          [&](const attack::RowColRemove& a) {
            if (a.rows >= img.height || a.cols >= img.width) invalid("cannot remove every row or column");
            return remove_rows_cols(img, a.rows, a.cols);
          },
          [&](const attack::Median& a) {
            return per_channel(img, [&](const LumaPlane& p) { return median_plane(p, a.window); });
          },
          [&](const attack::GaussianBlur& a) {
            const int r = static_cast<int>(std::ceil(3.0 * a.sigma));
            std::vector<double> kernel(2 * r + 1);
            double total = 0.0;
            for (int k = -r; k <= r; ++k) {
              kernel[k + r] = std::exp(-0.5 * k * k / (a.sigma * a.sigma));
              total += kernel[k + r];
            }
            for (auto& k : kernel) k /= total;
            return per_channel(img, [&](const LumaPlane& p) { return convolve_separable(p, kernel); });
          },
          [&](const attack::Sharpen& a) {
            return per_channel(img, [&](const LumaPlane& p) { return sharpen_plane(p, a.strength); });
          },
          [&](const attack::GeomDistort& a) { return geom_distort(img, a.amplitude, a.seed); },
      },
      spec);
}

// ---------------------------------------------------------------------------
// JPEG simulation

std::array<int, 64> jpeg_luma_table(int quality) {
  static constexpr int kAnnexK[64] = {
      16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
      14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
      18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
      49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
  quality = std::clamp(quality, 1, 100);
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> table{};
  for (int i = 0; i < 64; ++i) table[i] = std::clamp((kAnnexK[i] * scale + 50) / 100, 1, 255);
  return table;
}

RasterImage jpeg_simulate(const RasterImage& img, int quality) {
  img.validate();
  if (quality < 1 || quality > 100) invalid("jpeg quality must be in 1..100");
  const auto table = jpeg_luma_table(quality);

  static const auto basis = [] {
    std::array<double, 64> b{};  // b[u*8 + x] = C(u)/2 * cos((2x+1)u*pi/16)
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::sqrt(0.5) : 1.0;
      for (int x = 0; x < 8; ++x) b[u * 8 + x] = 0.5 * cu * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
    }
    return b;
  }();

  const std::size_t n = img.pixel_count();
  std::vector<double> y(n), cb, cr;
  if (img.channels == 1) {
    for (std::size_t i = 0; i < n; ++i) y[i] = img.samples[i];
  } else {
    cb.resize(n);
    cr.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = img.samples[3 * i], g = img.samples[3 * i + 1], b = img.samples[3 * i + 2];
      y[i] = kLumaR * r + kLumaG * g + kLumaB * b;
      cb[i] = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
      cr[i] = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;
    }
  }

  // Edge-replicated padding to whole blocks; trimmed on the way back.
  const int pw = (img.width + 7) / 8 * 8;
  const int ph = (img.height + 7) / 8 * 8;
  std::vector<double> out_y(n);
  double block[64], coef[64], tmp[64];
  for (int by = 0; by < ph; by += 8) {
    for (int bx = 0; bx < pw; bx += 8) {
      for (int j = 0; j < 8; ++j) {
        const int sy = std::min(by + j, img.height - 1);
        for (int i = 0; i < 8; ++i) {
          const int sx = std::min(bx + i, img.width - 1);
          block[j * 8 + i] = y[static_cast<std::size_t>(sy) * img.width + sx] - 128.0;
        }
      }
      // Forward: rows then columns.
      for (int j = 0; j < 8; ++j) {
        for (int u = 0; u < 8; ++u) {
          double s = 0.0;
          for (int x = 0; x < 8; ++x) s += basis[u * 8 + x] * block[j * 8 + x];
          tmp[j * 8 + u] = s;
        }
      }
      for (int v = 0; v < 8; ++v) {
        for (int u = 0; u < 8; ++u) {
          double s = 0.0;
          for (int j = 0; j < 8; ++j) s += basis[v * 8 + j] * tmp[j * 8 + u];
          const int q = table[v * 8 + u];
          coef[v * 8 + u] = std::round(s / q) * q;
        }
      }
      // Inverse.
      for (int j = 0; j < 8; ++j) {
        for (int u = 0; u < 8; ++u) {
          double s = 0.0;
          for (int v = 0; v < 8; ++v) s += basis[v * 8 + j] * coef[v * 8 + u];
          tmp[j * 8 + u] = s;
        }
      }
      for (int j = 0; j < 8; ++j) {
        const int py = by + j;
        if (py >= img.height) break;
        for (int x = 0; x < 8; ++x) {
          const int px = bx + x;
          if (px >= img.width) break;
          double s = 0.0;
          for (int u = 0; u < 8; ++u) s += basis[u * 8 + x] * tmp[j * 8 + u];
          out_y[static_cast<std::size_t>(py) * img.width + px] = s + 128.0;
        }
      }
    }
  }

  RasterImage out = img;
  auto to_byte = [](double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  };
  if (img.channels == 1) {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = to_byte(out_y[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double yy = out_y[i], u = cb[i] - 128.0, v = cr[i] - 128.0;
      out.samples[3 * i] = to_byte(yy + 1.402 * v);
      out.samples[3 * i + 1] = to_byte(yy - 0.344136 * u - 0.714136 * v);
      out.samples[3 * i + 2] = to_byte(yy + 1.772 * u);
    }
  }
  return out;
}

}  // namespace wmark
