#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "wmark/attacks.hpp"
#include "wmark/detect.hpp"
#include "wmark/error.hpp"

using namespace wmark;
using namespace wmark::testing;

namespace {

// Forwards to a MemoryLibrary and counts every call.
class CountingLibrary final : public ImageLibrary {
 public:
  MemoryLibrary inner;
  mutable int queries = 0;
  mutable int fetches = 0;

  std::optional<QueryResult> query(const RasterImage& probe) const override {
    ++queries;
    return inner.query(probe);
  }
  RasterImage original(std::uint32_t id) const override {
    ++fetches;
    return inner.original(id);
  }
  SupplementaryInfo supplementary(std::uint32_t id) const override { return inner.supplementary(id); }
};

class DeadLibrary final : public ImageLibrary {
 public:
  std::optional<QueryResult> query(const RasterImage&) const override {
    throw Error(ErrorCode::StoreUnavailable, "offline");
  }
  RasterImage original(std::uint32_t) const override { throw Error(ErrorCode::StoreUnavailable, "offline"); }
  SupplementaryInfo supplementary(std::uint32_t) const override {
    throw Error(ErrorCode::StoreUnavailable, "offline");
  }
};

std::vector<double> laplace_band(std::size_t n, std::uint64_t seed) {
  MixStream s(seed);
  std::vector<double> out(n);
  for (double& v : out) {
    const double u = s.next_open_unit();
    const double sign = (s.next() & 1) ? 1.0 : -1.0;
    v = -20.0 * std::log(u) * sign;
  }
  return out;
}

}  // namespace

TEST_CASE("correlate_bit on fresh casts: z about 3T") {
  const double alpha = 0.2;
  const std::size_t n = 16000;
  int in_range = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> band = laplace_band(n + kShiftRoom, 1000 + trial);
    const auto seq = gaussian_sequence(static_cast<std::uint32_t>(trial + 1), n);
    const std::size_t offset = trial % kSlotCount;
    cast_sequence(band, seq, offset, alpha);
    const BitDetection d = correlate_bit(band, seq, offset, alpha);
    const double ratio = d.correlation / d.threshold;
    if (d.present && ratio >= 2.0 && ratio <= 4.0) ++in_range;
  }
  CHECK(in_range == 100);
}

TEST_CASE("correlate_bit on unmarked bands is almost always absent") {
  int positives = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::vector<double> band = laplace_band(4000, 50000 + trial);
    const auto seq = gaussian_sequence(static_cast<std::uint32_t>(7 + trial), 3985);
    if (correlate_bit(band, seq, trial % kSlotCount, 0.2).present) ++positives;
  }
  CHECK(positives <= 10);
}

TEST_CASE("correlate_bit on an all-zero band") {
  const std::vector<double> band(100, 0.0);
  const auto seq = gaussian_sequence(3, 80);
  const BitDetection d = correlate_bit(band, seq, 5, 0.2);
  CHECK(d.correlation == 0.0);
  CHECK(d.threshold == 0.0);
  CHECK_FALSE(d.present);
}

TEST_CASE("detect on an original stops after the existence slot") {
  const RasterImage img = load_image(data_dir() / "corpus" / "flower.png");
  const DetectionResult r = detect(img, WatermarkKey(50), default_params(img.width, img.height));
  CHECK_FALSE(r.watermarked);
  CHECK_FALSE(r.message.has_value());
  CHECK(r.per_bit[0].evaluated);
  for (int s = 1; s < kSlotCount; ++s) CHECK_FALSE(r.per_bit[s].evaluated);
  CHECK(r.evaluated_slots() == 1);
}

TEST_CASE("detect round-trip and derived-key rejection") {
  int wrong = 0, trials = 0, misses = 0;
  const std::vector<std::int64_t> keys{50, 100, 200, 350, 700};
  for (const char* name : {"chelsea.png", "flower.png", "hubble.png", "moon.png", "rocket.png"}) {
    const RasterImage img = load_image(data_dir() / "corpus" / name);
    const EmbedParams p = default_params(img.width, img.height);
    for (std::size_t ki = 0; ki < 4; ++ki) {
      const WatermarkKey key(keys[ki]);
      const int message = static_cast<int>((keys[ki] * 37 + std::string(name).size()) % 16384);
      const RasterImage marked = embed(img, key, message, p).image;
      const DetectionResult ok = detect(marked, key, p);
      if (!ok.watermarked || ok.message != std::optional<std::uint16_t>(message)) ++misses;
      const SeedVector sv = derive_seed_vector(key);
      for (int s = 1; s < kSlotCount; ++s) {
        ++trials;
        if (detect(marked, WatermarkKey(sv.seeds[s]), p).watermarked) ++wrong;
      }
    }
  }
  CHECK(trials == 300);
  CHECK(misses == 0);
  CHECK(wrong <= 3);
}

TEST_CASE("registration recovers a rotated and cropped copy") {
  const RasterImage img = load_image(data_dir() / "corpus" / "chelsea.png");
  const EmbedParams p = default_params(img.width, img.height);
  const Embedded e = embed(img, WatermarkKey(350), 9001, p);
  CountingLibrary lib;
  lib.inner.add(img, e.receipt.supplementary);
  const RasterImage suspect = apply_attack(e.image, attack::RotateCrop{5.0});
  const DetectionResult r = detect_with_registration(suspect, WatermarkKey(350), lib, p);
  CHECK(r.registered);
  CHECK(r.watermarked);
  CHECK(r.message == std::optional<std::uint16_t>(9001));
  REQUIRE(r.registration.has_value());
  CHECK(std::abs(r.registration->theta_deg - 5.0) < 0.5);
  CHECK(lib.queries == 1);
}

TEST_CASE("plain success never queries the library") {
  const RasterImage img = load_image(data_dir() / "corpus" / "rocket.png");
  const EmbedParams p = default_params(img.width, img.height);
  const Embedded e = embed(img, WatermarkKey(200), 77, p);
  CountingLibrary lib;
  lib.inner.add(img, e.receipt.supplementary);
  const DetectionResult r = detect_with_registration(e.image, WatermarkKey(200), lib, p);
  CHECK(r.watermarked);
  CHECK_FALSE(r.registered);
  CHECK(lib.queries == 0);
  CHECK(lib.fetches == 0);

  // The Always trigger consults the library but keeps the correct answer.
  const DetectionResult a = detect_with_registration(e.image, WatermarkKey(200), lib, p, {},
                                                     RegistrationTrigger::Always);
  CHECK(a.watermarked);
  CHECK(a.message == std::optional<std::uint16_t>(77));
  CHECK(lib.queries == 1);
}

TEST_CASE("suspect absent from the library returns the plain result") {
  const RasterImage img = load_image(data_dir() / "corpus" / "moon.png");
  const RasterImage other = load_image(data_dir() / "library" / "text.png");
  const EmbedParams p = default_params(img.width, img.height);
  CountingLibrary lib;
  lib.inner.add(other, make_supplementary(other, default_params(other.width, other.height)));
  const DetectionResult r = detect_with_registration(img, WatermarkKey(50), lib, p);
  CHECK(lib.queries == 1);
  CHECK(lib.fetches == 0);
  CHECK_FALSE(r.registered);
  CHECK_FALSE(r.watermarked);
  REQUIRE(r.match.has_value());
  CHECK_FALSE(r.match->confident);
}

TEST_CASE("unreachable library is RegistryUnavailable") {
  const RasterImage img = textured(128, 128, 1, 4);
  DeadLibrary dead;
  try {
    detect_with_registration(img, WatermarkKey(5), dead, default_params(128, 128));
    FAIL("expected RegistryUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RegistryUnavailable);
  }
}

TEST_CASE("format_report lists every slot") {
  const RasterImage img = load_image(data_dir() / "corpus" / "rocket.png");
  const EmbedParams p = default_params(img.width, img.height);
  const DetectionResult r = detect(embed(img, WatermarkKey(12), 5, p).image, WatermarkKey(12), p);
  const std::string text = format_report(r);
  CHECK(text.find("watermarked\tyes") != std::string::npos);
  CHECK(text.find("message\t5") != std::string::npos);
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines >= 16);
}
