#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "wmark/error.hpp"
#include "wmark/registry.hpp"

namespace wmark {

namespace {

constexpr int kCoarseFactor = 4;
constexpr int kCropRefineRadius = kCoarseFactor;
constexpr int kShiftRadius = 2;
constexpr int kMaxIterations = 20;
constexpr int kMinLevelSide = 32;

// Pearson correlation of `moving` (placed at offset dx, dy) against `fixed`
// over the overlap, counting only pixels marked valid in `valid` (if any).
double overlap_ncc(const LumaPlane& fixed, const LumaPlane& moving,
                   const std::vector<std::uint8_t>* valid, int dx, int dy) {
  double sf = 0, sm = 0, sff = 0, smm = 0, sfm = 0;
  std::size_t n = 0;
  const int x0 = std::max(0, dx), x1 = std::min(fixed.width, dx + moving.width);
  const int y0 = std::max(0, dy), y1 = std::min(fixed.height, dy + moving.height);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const std::size_t mi = static_cast<std::size_t>(y - dy) * moving.width + (x - dx);
      if (valid && !(*valid)[mi]) continue;
      const double f = fixed.at(x, y);
      const double m = moving.values[mi];
      sf += f;
      sm += m;
      sff += f * f;
      smm += m * m;
      sfm += f * m;
      ++n;
    }
  }
  if (n < 16) return -1.0;
  const double inv = 1.0 / static_cast<double>(n);
  const double cov = sfm - sf * sm * inv;
  const double vf = sff - sf * sf * inv;
  const double vm = smm - sm * sm * inv;
  if (vf <= 0.0 || vm <= 0.0) return -1.0;
  return cov / std::sqrt(vf * vm);
}

LumaPlane box_downsample(const LumaPlane& plane, int factor) {
  if (factor == 1) return plane;
  const int w = std::max(1, plane.width / factor);
  const int h = std::max(1, plane.height / factor);
  LumaPlane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      int count = 0;
      for (int j = 0; j < factor && y * factor + j < plane.height; ++j) {
        for (int i = 0; i < factor && x * factor + i < plane.width; ++i) {
          sum += plane.at(x * factor + i, y * factor + j);
          ++count;
        }
      }
      out.at(x, y) = sum / count;
    }
  }
  return out;
}

std::array<double, 2> apply(const AffineWarp& w, double x, double y) {
  return {w.m[0] * x + w.m[1] * y + w.t[0], w.m[2] * x + w.m[3] * y + w.t[1]};
}

bool inside(const LumaPlane& p, double u, double v) {
  return u >= -0.5 && u <= p.width - 0.5 && v >= -0.5 && v <= p.height - 0.5;
}

// Suspect resampled onto the original lattice through w; `valid` marks
// pixels whose source lies inside the suspect.
LumaPlane warp_to_original(const LumaPlane& suspect, const LumaPlane& original,
                           const AffineWarp& w, std::vector<std::uint8_t>& valid) {
  LumaPlane out(original.width, original.height);
  valid.assign(out.values.size(), 0);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const auto [u, v] = apply(w, x, y);
      const std::size_t i = static_cast<std::size_t>(y) * out.width + x;
      if (!inside(suspect, u, v)) continue;
      out.values[i] = sample_bilinear(suspect, u, v);
      valid[i] = 1;
    }
  }
  return out;
}

double warp_score(const LumaPlane& suspect, const LumaPlane& original, const AffineWarp& w) {
  std::vector<std::uint8_t> valid;
  const LumaPlane moving = warp_to_original(suspect, original, w, valid);
  return overlap_ncc(original, moving, &valid, 0, 0);
}

struct Candidate {
  AffineWarp warp;
  double score = -1.0;
};

// Scale hypothesis: the suspect covers the whole original frame.
Candidate align_stretched(const LumaPlane& suspect, const LumaPlane& original,
                          const RegistrationOptions& opt) {
  const LumaPlane stretched = (suspect.width == original.width && suspect.height == original.height)
                                  ? suspect
                                  : resample(suspect, original.width, original.height);

  const LumaPlane fixed_q = box_downsample(original, kCoarseFactor);
  const LumaPlane moving_q = box_downsample(stretched, kCoarseFactor);
  const int coarse_steps = static_cast<int>(std::lround(opt.max_rotation_deg / opt.coarse_step_deg));
  double best_theta = 0.0, best_score = -2.0;
  for (int i = -coarse_steps; i <= coarse_steps; ++i) {
    const double theta = i * opt.coarse_step_deg;
    std::vector<std::uint8_t> valid;
    const LumaPlane undone = rotate_plane(moving_q, -theta, &valid);
    const double s = overlap_ncc(fixed_q, undone, &valid, 0, 0);
    if (s > best_score) {
      best_score = s;
      best_theta = theta;
    }
  }
  // Fine pass at full resolution around the coarse optimum.
  const double coarse_theta = best_theta;
  const int fine_steps = static_cast<int>(std::lround(opt.coarse_step_deg / opt.fine_step_deg));
  best_score = -2.0;
  LumaPlane moving;
  std::vector<std::uint8_t> moving_valid;
  for (int j = -fine_steps; j <= fine_steps; ++j) {
    const double theta = coarse_theta + j * opt.fine_step_deg;
    std::vector<std::uint8_t> valid;
    LumaPlane undone = rotate_plane(stretched, -theta, &valid);
    const double s = overlap_ncc(original, undone, &valid, 0, 0);
    if (s > best_score) {
      best_score = s;
      best_theta = theta;
      moving = std::move(undone);
      moving_valid = std::move(valid);
    }
  }

  // Residual integer translation.
  Candidate c;
  c.score = best_score;
  int best_dx = 0, best_dy = 0;
  for (int dy = -kShiftRadius; dy <= kShiftRadius; ++dy) {
    for (int dx = -kShiftRadius; dx <= kShiftRadius; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const double s = overlap_ncc(original, moving, &moving_valid, dx, dy);
      if (s > c.score) {
        c.score = s;
        best_dx = dx;
        best_dy = dy;
      }
    }
  }

  // Compose resample, rotation about the centre and shift into one map:
  // u = K (c + R (x - d - c)).
  const double kx = original.width > 1 ? (suspect.width - 1.0) / (original.width - 1.0) : 1.0;
  const double ky = original.height > 1 ? (suspect.height - 1.0) / (original.height - 1.0) : 1.0;
  const Affine2 r = rotation_matrix(best_theta);
  const double cx = (original.width - 1) / 2.0, cy = (original.height - 1) / 2.0;
  const double px = -best_dx - cx, py = -best_dy - cy;
  c.warp.m = {kx * r[0], kx * r[1], ky * r[2], ky * r[3]};
  c.warp.t = {kx * (cx + r[0] * px + r[1] * py), ky * (cy + r[2] * px + r[3] * py)};
  return c;
}

// Crop hypothesis: the suspect is an unscaled window of the original.
Candidate align_cropped(const LumaPlane& suspect, const LumaPlane& original) {
  const LumaPlane fixed_q = box_downsample(original, kCoarseFactor);
  const LumaPlane moving_q = box_downsample(suspect, kCoarseFactor);
  int best_qx = 0, best_qy = 0;
  double best = -2.0;
  for (int qy = 0; qy <= fixed_q.height - moving_q.height; ++qy) {
    for (int qx = 0; qx <= fixed_q.width - moving_q.width; ++qx) {
      const double s = overlap_ncc(fixed_q, moving_q, nullptr, qx, qy);
      if (s > best) {
        best = s;
        best_qx = qx;
        best_qy = qy;
      }
    }
  }
  Candidate c;
  int best_dx = 0, best_dy = 0;
  const int max_dx = original.width - suspect.width;
  const int max_dy = original.height - suspect.height;
  for (int dy = best_qy * kCoarseFactor - kCropRefineRadius;
       dy <= best_qy * kCoarseFactor + kCropRefineRadius; ++dy) {
    for (int dx = best_qx * kCoarseFactor - kCropRefineRadius;
         dx <= best_qx * kCoarseFactor + kCropRefineRadius; ++dx) {
      if (dx < 0 || dy < 0 || dx > max_dx || dy > max_dy) continue;
      const double s = overlap_ncc(original, suspect, nullptr, dx, dy);
      if (s > c.score) {
        c.score = s;
        best_dx = dx;
        best_dy = dy;
      }
    }
  }
  c.warp.t = {static_cast<double>(-best_dx), static_cast<double>(-best_dy)};
  return c;
}

LumaPlane gradient(const LumaPlane& p, bool along_x) {
  LumaPlane g(p.width, p.height);
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      if (along_x) {
        const int a = std::max(0, x - 1), b = std::min(p.width - 1, x + 1);
        g.at(x, y) = b > a ? (p.at(b, y) - p.at(a, y)) / (b - a) : 0.0;
      } else {
        const int a = std::max(0, y - 1), b = std::min(p.height - 1, y + 1);
        g.at(x, y) = b > a ? (p.at(x, b) - p.at(x, a)) / (b - a) : 0.0;
      }
    }
  }
  return g;
}

// Gauss-Newton on sum (g * S(W x) + h - O(x))^2 over the affine W and a
// gain/offset pair, in coordinates normalized about the original's centre.
AffineWarp refine_level(const LumaPlane& suspect, const LumaPlane& original, AffineWarp w) {
  const LumaPlane gx = gradient(suspect, true);
  const LumaPlane gy = gradient(suspect, false);
  const double cx = (original.width - 1) / 2.0, cy = (original.height - 1) / 2.0;
  const double span = std::max(original.width, original.height) / 2.0;

  // u = A x~ + b with x~ = (x - c) / span.
  Eigen::Matrix<double, 8, 1> p;
  p << w.m[0] * span, w.m[1] * span, w.m[2] * span, w.m[3] * span,
      w.m[0] * cx + w.m[1] * cy + w.t[0], w.m[2] * cx + w.m[3] * cy + w.t[1], 1.0, 0.0;

  for (int iter = 0; iter < kMaxIterations; ++iter) {
    Eigen::Matrix<double, 8, 8> H = Eigen::Matrix<double, 8, 8>::Zero();
    Eigen::Matrix<double, 8, 1> g = Eigen::Matrix<double, 8, 1>::Zero();
    std::size_t n = 0;
    Eigen::Matrix<double, 8, 1> jac;
    for (int y = 0; y < original.height; ++y) {
      const double yn = (y - cy) / span;
      for (int x = 0; x < original.width; ++x) {
        const double xn = (x - cx) / span;
        const double u = p[0] * xn + p[1] * yn + p[4];
        const double v = p[2] * xn + p[3] * yn + p[5];
        if (u < 0.0 || v < 0.0 || u > suspect.width - 1.0 || v > suspect.height - 1.0) continue;
        const double s = sample_bilinear(suspect, u, v);
        const double su = p[6] * sample_bilinear(gx, u, v);
        const double sv = p[6] * sample_bilinear(gy, u, v);
        const double r = p[6] * s + p[7] - original.at(x, y);
        jac << su * xn, su * yn, sv * xn, sv * yn, su, sv, s, 1.0;
        H.selfadjointView<Eigen::Lower>().rankUpdate(jac);
        g += jac * r;
        ++n;
      }
    }
    if (n < 64) break;
    const Eigen::Matrix<double, 8, 8> full = H.selfadjointView<Eigen::Lower>();
    const auto ldlt = full.ldlt();
    if (ldlt.info() != Eigen::Success) break;
    const Eigen::Matrix<double, 8, 1> step = -ldlt.solve(g);
    if (!step.allFinite()) break;
    p += step;
    if (step.head<6>().cwiseAbs().maxCoeff() < 1e-3) break;
  }

  AffineWarp out;
  out.m = {p[0] / span, p[1] / span, p[2] / span, p[3] / span};
  out.t = {p[4] - out.m[0] * cx - out.m[1] * cy, p[5] - out.m[2] * cx - out.m[3] * cy};
  return out;
}

// Box-downsampled level f sees pixel centres at f*i + (f-1)/2; the linear
// part is unchanged and the translation is rescaled accordingly.
AffineWarp to_level(const AffineWarp& w, int f) {
  const double o = (f - 1) / 2.0;
  AffineWarp l = w;
  l.t[0] = (w.t[0] + (w.m[0] - 1.0) * o + w.m[1] * o) / f;
  l.t[1] = (w.t[1] + w.m[2] * o + (w.m[3] - 1.0) * o) / f;
  return l;
}

AffineWarp from_level(const AffineWarp& l, int f) {
  const double o = (f - 1) / 2.0;
  AffineWarp w = l;
  w.t[0] = f * l.t[0] - (l.m[0] - 1.0) * o - l.m[1] * o;
  w.t[1] = f * l.t[1] - l.m[2] * o - (l.m[3] - 1.0) * o;
  return w;
}

AffineWarp refine_affine(const LumaPlane& suspect, const LumaPlane& original, AffineWarp w) {
  for (int f : {4, 2, 1}) {
    if (original.width / f < kMinLevelSide || original.height / f < kMinLevelSide ||
        suspect.width / f < kMinLevelSide / 2 || suspect.height / f < kMinLevelSide / 2) {
      continue;
    }
    const LumaPlane s = box_downsample(suspect, f);
    const LumaPlane o = box_downsample(original, f);
    w = from_level(refine_level(s, o, to_level(w, f)), f);
  }
  return w;
}

TransformEstimate describe(const AffineWarp& w, const LumaPlane& suspect, const LumaPlane& original) {
  TransformEstimate e;
  e.warp = w;
  e.scale_x = std::hypot(w.m[0], w.m[2]);
  e.scale_y = std::hypot(w.m[1], w.m[3]);
  e.theta_deg = std::atan2(w.m[1] - w.m[2], w.m[0] + w.m[3]) * 180.0 / std::numbers::pi;
  // Inverse-map the suspect's centre into original coordinates.
  const double det = w.m[0] * w.m[3] - w.m[1] * w.m[2];
  const double u = (suspect.width - 1) / 2.0 - w.t[0];
  const double v = (suspect.height - 1) / 2.0 - w.t[1];
  e.dx = (w.m[3] * u - w.m[1] * v) / det - (original.width - 1) / 2.0;
  e.dy = (-w.m[2] * u + w.m[0] * v) / det - (original.height - 1) / 2.0;
  return e;
}

}  // namespace

Registration register_geometry(const LumaPlane& suspect, const LumaPlane& original,
                               const SupplementaryInfo& supplementary,
                               const RegistrationOptions& options) {
  suspect.validate();
  original.validate();
  if (original.width != supplementary.orig_width || original.height != supplementary.orig_height) {
    throw Error(ErrorCode::DimensionMismatch, "original does not match supplementary info");
  }

  Candidate best = align_stretched(suspect, original, options);
  const bool fits_inside = suspect.width <= original.width && suspect.height <= original.height;
  const bool same_size = suspect.width == original.width && suspect.height == original.height;
  if (fits_inside && !same_size) {
    Candidate cropped = align_cropped(suspect, original);
    if (cropped.score > best.score) best = cropped;
  }
  best.score = warp_score(suspect, original, best.warp);
  if (options.refine_affine && best.score < 1.0) {
    const AffineWarp refined = refine_affine(suspect, original, best.warp);
    const double s = warp_score(suspect, original, refined);
    if (s > best.score) best = {refined, s};
  }
  if (best.score < options.min_peak) {
    throw Error(ErrorCode::RegistrationFailed,
                "peak correlation " + std::to_string(best.score) + " below " +
                    std::to_string(options.min_peak));
  }

  // Uncovered pixels are filled from the original.
  std::vector<std::uint8_t> valid;
  const LumaPlane moving = warp_to_original(suspect, original, best.warp, valid);
  Registration out{original, describe(best.warp, suspect, original), best.score};
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (valid[i]) out.plane.values[i] = moving.values[i];
  }
  return out;
}

}  // namespace wmark
