#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "wmark/keystream.hpp"
#include "wmark/raster.hpp"

namespace wmark::testing {

inline std::filesystem::path data_dir() { return WMARK_DATA_DIR; }
inline std::filesystem::path golden_dir() { return WMARK_GOLDEN_DIR; }

/// Fresh empty directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("wmark_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

/// Textured image with deterministic pseudo-random detail.
inline RasterImage textured(int w, int h, int channels, std::uint64_t seed) {
  RasterImage img{w, h, channels, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * channels)};
  MixStream s(seed);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        const double base = 128 + 60 * std::sin(x * 0.05 + c) * std::cos(y * 0.037);
        const double noise = static_cast<double>(s.next() % 41) - 20.0;
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(base + noise, 0.0, 255.0));
      }
    }
  }
  return img;
}

}  // namespace wmark::testing
