#include <bit>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "support.hpp"
#include "wmark/detect.hpp"
#include "wmark/error.hpp"
#include "wmark/mark.hpp"

using namespace wmark;
using namespace wmark::testing;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::SelfTestFailed;
}

// Independent restatement of the slot layout: slot 2 + j holds stored bit j.
std::array<bool, kSlotCount> expected_bits(int message) {
  const bool flag = std::popcount(static_cast<unsigned>(message)) > 7;
  const int stored = flag ? (~message & kMaxMessage) : message;
  std::array<bool, kSlotCount> bits{};
  bits[0] = true;
  bits[1] = flag;
  for (int j = 0; j < kMessageBits; ++j) bits[2 + j] = (stored >> j) & 1;
  return bits;
}

}  // namespace

TEST_CASE("encode_payload examples") {
  const PayloadCode zero = encode_payload(0);
  CHECK_FALSE(zero.flag);
  CHECK(zero.cast_set == std::vector<int>{0});

  const PayloadCode aces = encode_payload(16383);
  CHECK(aces.flag);
  for (int s = 2; s < kSlotCount; ++s) CHECK_FALSE(aces.bits[s]);
  CHECK(aces.cast_set == std::vector<int>{0, 1});

  const PayloadCode tie = encode_payload(0x007F);  // popcount 7: no reversal
  CHECK_FALSE(tie.flag);
  CHECK(tie.cast_set.size() == 8);

  CHECK(code_of([] { encode_payload(16384); }) == ErrorCode::MessageOutOfRange);
  CHECK(code_of([] { encode_payload(-1); }) == ErrorCode::MessageOutOfRange);
}

TEST_CASE("payload layout and inverse, exhaustive") {
  int mismatches = 0;
  for (int m = 0; m <= kMaxMessage; ++m) {
    const PayloadCode p = encode_payload(m);
    if (p.bits != expected_bits(m)) ++mismatches;
    if (decode_payload(p.bits) != std::optional<std::uint16_t>(m)) ++mismatches;
    if (p.cast_set.size() > kMaxCasts) ++mismatches;
    if (std::popcount(static_cast<unsigned>(m)) == 7 && p.cast_set.size() != 8) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("decode_payload") {
  std::array<bool, kSlotCount> bits{};
  bits.fill(true);
  bits[0] = false;
  CHECK_FALSE(decode_payload(bits).has_value());
  std::array<bool, kSlotCount> aces{};
  aces[0] = aces[1] = true;
  CHECK(decode_payload(aces) == std::optional<std::uint16_t>(16383));
}

TEST_CASE("cast_sequence") {
  std::vector<double> t{10.0, -10.0};
  const std::vector<double> x{1.0, -1.0};
  cast_sequence(t, x, 0, 0.1);
  // t' = t + alpha*|t|*x: 10 + 0.1*10*1 and -10 + 0.1*10*(-1).
  CHECK(t[0] == doctest::Approx(11.0));
  CHECK(t[1] == doctest::Approx(-11.0));

  std::vector<double> z{0.0, 5.0, 5.0};
  cast_sequence(z, std::vector<double>{3.0}, 0, 0.5);
  CHECK(z[0] == 0.0);

  std::vector<double> s{4.0, 4.0, 4.0};
  cast_sequence(s, std::vector<double>{1.0, 1.0}, 1, 0.5);
  CHECK(s[0] == 4.0);
  CHECK(s[1] == 6.0);

  CHECK(code_of([&] { cast_sequence(s, std::vector<double>{1.0, 1.0}, 2, 0.5); }) ==
        ErrorCode::RangeOverflow);
}

TEST_CASE("default params and overrides") {
  const EmbedParams p = default_params(512, 512);
  CHECK(p.alpha == kDefaultAlpha);
  CHECK(p.band == BandSpec{13107, 16000});
  CHECK(p.seq_len == 15985);

  ParamOverrides o;
  o.length = 5000;
  CHECK(o.resolve(512, 512).seq_len == 4985);
  o.seq_len = 100;
  CHECK(o.resolve(512, 512).seq_len == 100);
  o.alpha = 0.3;
  o.skip = 2000;
  const EmbedParams q = o.resolve(512, 512);
  CHECK(q.alpha == 0.3);
  CHECK(q.band.skip == 2000);
}

TEST_CASE("check_params") {
  EmbedParams p = default_params(512, 512);
  CHECK_NOTHROW(check_params(p, 512, 512));
  p.alpha = 1.5;
  CHECK(code_of([&] { check_params(p, 512, 512); }) == ErrorCode::InvalidParams);
  p = default_params(512, 512);
  p.seq_len = p.band.length;  // no room for the 15 shifts
  CHECK(code_of([&] { check_params(p, 512, 512); }) == ErrorCode::CapacityExceeded);
}

TEST_CASE("64x64 image with seq_len 16000 is CapacityExceeded") {
  const RasterImage img = textured(64, 64, 1, 5);
  EmbedParams p = default_params(64, 64);
  p.seq_len = 16000;
  CHECK(code_of([&] { embed(img, WatermarkKey(50), 1, p); }) == ErrorCode::CapacityExceeded);
}

TEST_CASE("embed receipt, locality and casting passes") {
  const RasterImage img = textured(160, 120, 3, 21);
  const EmbedParams p = default_params(img.width, img.height);
  const int message = 0x1555;
  const Embedded e = embed(img, WatermarkKey(77), message, p);
  CHECK(e.receipt.params == p);
  CHECK(e.receipt.key == 77);
  CHECK(e.receipt.casts == static_cast<int>(encode_payload(message).cast_set.size()));
  CHECK(e.receipt.supplementary.orig_width == 160);
  CHECK(e.receipt.supplementary.orig_height == 120);
  CHECK(e.receipt.supplementary.params() == p);

  // Before rounding back to 8 bits, only zig-zag positions [skip, skip+N+15) may change.
  const CoefficientPlane before = dct2(to_luma(img));
  CoefficientPlane after = before;
  BandVector band = extract_band(before, p.band);
  const SeedVector sv = derive_seed_vector(WatermarkKey(77));
  for (int slot : encode_payload(message).cast_set) {
    cast_sequence(band.values, gaussian_sequence(sv.seeds[slot], p.seq_len), slot, p.alpha);
  }
  after = insert_band(before, p.band, band);
  const auto order = zigzag_order(img.width, img.height);
  int outside = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i >= p.band.skip && i < p.band.skip + p.seq_len + kShiftRoom) continue;
    const auto [r, c] = order[i];
    if (after.at(c, r) != before.at(c, r)) ++outside;
  }
  CHECK(outside == 0);

  // The library's output is the same pipeline followed by merge_luma.
  CHECK(e.image == merge_luma(img, idct2(after)));
}

TEST_CASE("alpha 0 is a no-op and PSNR falls as alpha grows") {
  const RasterImage img = textured(200, 150, 1, 8);
  EmbedParams p = default_params(img.width, img.height);
  p.alpha = 0.0;
  CHECK(embed(img, WatermarkKey(9), 0x2AAA, p).image == img);
  double last = std::numeric_limits<double>::infinity();
  for (double a : {0.05, 0.1, 0.2, 0.4}) {
    p.alpha = a;
    const double q = psnr(img, embed(img, WatermarkKey(9), 0x2AAA, p).image);
    CHECK(q <= last);
    last = q;
  }
}

TEST_CASE("two keys embedded in sequence are both detectable") {
  const RasterImage img = load_image(data_dir() / "corpus" / "moon.png");
  const EmbedParams p = default_params(img.width, img.height);
  const RasterImage one = embed(img, WatermarkKey(111), 1234, p).image;
  const RasterImage two = embed(one, WatermarkKey(222), 4321, p).image;
  const DetectionResult a = detect(two, WatermarkKey(111), p);
  const DetectionResult b = detect(two, WatermarkKey(222), p);
  CHECK(a.watermarked);
  CHECK(a.message == std::optional<std::uint16_t>(1234));
  CHECK(b.watermarked);
  CHECK(b.message == std::optional<std::uint16_t>(4321));
}
