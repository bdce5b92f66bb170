#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wmark/mark.hpp"
#include "wmark/raster.hpp"

namespace wmark {

inline constexpr int kHistogramBins = 64;
/// Confidence gate for handing a retrieved original to registration.
inline constexpr double kConfidenceThreshold = 0.90;

/// 4x4x4 RGB histogram (gray images land on the diagonal) plus luma
/// mean, stddev and skewness.
struct FeatureVector {
  std::array<double, kHistogramBins> color_hist{};
  std::array<double, 3> luma_moments{};

  bool operator==(const FeatureVector&) const = default;
};

FeatureVector extract_features(const RasterImage& img);

/// 1 - L1(histA, histB) / 2, clamped to [0, 1].
double similarity(const FeatureVector& a, const FeatureVector& b);

struct LibraryRecord {
  std::uint32_t imageid = 0;
  std::string original_path;  // relative to the store root
  FeatureVector features;
  SupplementaryInfo supplementary;
  std::optional<std::uint32_t> key_fingerprint;

  bool operator==(const LibraryRecord&) const = default;
};

struct QueryResult {
  std::uint32_t imageid = 0;
  double similarity = 0.0;
  bool confident = false;
};

/// Read side of an image library, as seen by the detector.
class ImageLibrary {
 public:
  virtual ~ImageLibrary() = default;
  /// nullopt iff the library is empty. Throws StoreUnavailable.
  virtual std::optional<QueryResult> query(const RasterImage& probe) const = 0;
  virtual RasterImage original(std::uint32_t imageid) const = 0;
  virtual SupplementaryInfo supplementary(std::uint32_t imageid) const = 0;
};

/// One tab-separated index line, no trailing newline.
std::string format_record(const LibraryRecord& record);
/// Throws CorruptData on malformed lines.
LibraryRecord parse_record(const std::string& line);

/// Directory-backed library: originals/<imageid>.<pgm|ppm> plus an
/// append-only index.tsv. One writer at a time (flock on .lock), any number
/// of readers; every query re-reads the index so new records are visible.
class ImageStore final : public ImageLibrary {
 public:
  /// Opens an existing store. Throws StoreUnavailable if root has no index.
  static ImageStore open(const std::filesystem::path& root);
  /// Creates root and an empty index when missing.
  static ImageStore open_or_create(const std::filesystem::path& root);

  /// Persists the original and appends its record; returns the new imageid.
  /// Throws StoreLocked when another writer holds the lock.
  std::uint32_t ingest(const RasterImage& img, const SupplementaryInfo& supplementary,
                       std::optional<std::uint32_t> key_fingerprint = std::nullopt);

  std::vector<LibraryRecord> records() const;
  std::optional<LibraryRecord> record(std::uint32_t imageid) const;

  std::optional<QueryResult> query(const RasterImage& probe) const override;
  RasterImage original(std::uint32_t imageid) const override;
  SupplementaryInfo supplementary(std::uint32_t imageid) const override;

  const std::filesystem::path& root() const { return root_; }

 private:
  explicit ImageStore(std::filesystem::path root) : root_(std::move(root)) {}
  std::filesystem::path root_;
};

/// In-memory library with the same query semantics as ImageStore.
class MemoryLibrary final : public ImageLibrary {
 public:
  std::uint32_t add(RasterImage original, const SupplementaryInfo& supplementary);

  std::optional<QueryResult> query(const RasterImage& probe) const override;
  RasterImage original(std::uint32_t imageid) const override;
  SupplementaryInfo supplementary(std::uint32_t imageid) const override;
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    RasterImage original;
    FeatureVector features;
    SupplementaryInfo supplementary;
  };
  std::vector<Entry> entries_;  // imageid = index + 1
};

/// Affine map from original pixel (x, y) to suspect pixel (u, v):
/// u = m[0] x + m[1] y + t[0], v = m[2] x + m[3] y + t[1].
struct AffineWarp {
  std::array<double, 4> m{1, 0, 0, 1};
  std::array<double, 2> t{0, 0};
};

struct TransformEstimate {
  double scale_x = 1.0;
  double scale_y = 1.0;
  double theta_deg = 0.0;
  /// Displacement of the suspect's centre in original coordinates, relative
  /// to the original's centre.
  double dx = 0.0;
  double dy = 0.0;
  AffineWarp warp;
};

struct Registration {
  LumaPlane plane;  // at the original's dimensions
  TransformEstimate estimate;
  double peak_correlation = 0.0;
};

struct RegistrationOptions {
  double max_rotation_deg = 30.0;
  double coarse_step_deg = 0.5;
  double fine_step_deg = 0.1;
  double min_peak = 0.5;
  /// Sub-pixel affine refinement after the grid search.
  bool refine_affine = true;
};

/// When the detector consults the library. OnMiss registers only after a
/// negative plain detection; Always registers whenever the library holds a
/// confident match and keeps the plain result if the registered pass is
/// negative.
enum class RegistrationTrigger { OnMiss, Always };

/// Brings a desynchronized suspect back onto the original's lattice.
/// Throws RegistrationFailed when the best normalized correlation < min_peak.
Registration register_geometry(const LumaPlane& suspect, const LumaPlane& original,
                               const SupplementaryInfo& supplementary,
                               const RegistrationOptions& options = {});

}  // namespace wmark
