// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
// Usage: acceptance [criterion numbers...]  (default: all)

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "keystream_stats.hpp"
#include "support.hpp"
#include "wmark/attacks.hpp"
#include "wmark/bench.hpp"
#include "wmark/detect.hpp"
#include "wmark/error.hpp"
#include "wmark/mark.hpp"
#include "wmark/registry.hpp"
#include "wmark/spectral.hpp"

using namespace wmark;
using namespace wmark::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const std::vector<CorpusImage>& corpus() {
  static const std::vector<CorpusImage> c = load_corpus(data_dir() / "corpus");
  return c;
}

const std::vector<CorpusImage>& library() {
  static const std::vector<CorpusImage> c = load_corpus(data_dir() / "library");
  return c;
}

Outcome imperceptibility() {
  const PsnrTable t = run_psnr_table(corpus(), BenchConfig{});
  return {t.passed && t.min_psnr_db >= kPsnrGateDb,
          fmt("min PSNR %.2f dB over %zu embeds, gate %.0f dB", t.min_psnr_db, t.rows.size(), kPsnrGateDb)};
}

Outcome round_trip() {
  std::vector<CorpusImage> images = corpus();
  MixStream rng(20240901);
  int ok = 0;
  constexpr int kTrials = 100;
  for (int i = 0; i < kTrials; ++i) {
    const RasterImage& img = images[rng.next() % images.size()].image;
    const WatermarkKey key(static_cast<std::int64_t>(1 + rng.next() % kMaxSeed));
    const int message = static_cast<int>(rng.next() % (kMaxMessage + 1));
    const EmbedParams p = default_params(img.width, img.height);
    const DetectionResult r = detect(embed(img, key, message, p).image, key, p);
    if (r.watermarked && r.message == std::optional<std::uint16_t>(message)) ++ok;
  }
  return {ok == kTrials, fmt("%d/%d random (image, key, message) triples recovered", ok, kTrials)};
}

Outcome payload() {
  int errors = 0, eights = 0;
  std::size_t largest = 0;
  for (int m = 0; m <= kMaxMessage; ++m) {
    const PayloadCode p = encode_payload(m);
    if (decode_payload(p.bits) != std::optional<std::uint16_t>(m)) ++errors;
    largest = std::max(largest, p.cast_set.size());
    if (std::popcount(static_cast<unsigned>(m)) == 7) {
      if (p.cast_set.size() == 8) ++eights;
      else ++errors;
    }
  }
  const bool aces = encode_payload(kMaxMessage).cast_set.size() == 2;
  return {errors == 0 && largest <= 8 && eights > 0 && aces,
          fmt("16384 messages, %d errors, max casts %zu, %d popcount-7 messages at 8 casts", errors, largest,
              eights)};
}

Outcome false_positives() {
  const FpReport fp = run_fp_experiment(corpus(), BenchConfig{});
  const std::size_t controls = fp.cells.size();
  return {fp.trials == 375 && fp.fp_rate <= kFpRateGate && fp.control_positives == controls,
          fmt("%zu/%zu false positives (rate %.4f, gate %.2f), control %zu/%zu", fp.false_positives, fp.trials,
              fp.fp_rate, kFpRateGate, fp.control_positives, controls)};
}

// One full default-grid run per jobs value, shared by criteria 5 and 9.
struct RobustnessRun {
  RobustnessReport report;
  std::string tsv;
};

const RobustnessRun& robustness_run(int jobs) {
  static std::map<int, RobustnessRun> cache;
  auto it = cache.find(jobs);
  if (it == cache.end()) {
    BenchConfig config;
    config.jobs = jobs;
    RobustnessRun run;
    run.report = run_robustness_matrix(corpus(), default_attack_grid(), config);
    run.tsv = to_report(run.report, config).to_tsv();
    it = cache.emplace(jobs, std::move(run)).first;
  }
  return it->second;
}

Outcome robustness() {
  const RobustnessReport& r = robustness_run(1).report;
  const double jpeg = r.kind_rate("jpeg"), scale = r.kind_rate("scale"), rowcol = r.kind_rate("rowcol"),
               rotate = r.kind_rate("rotate_crop");
  const bool pass = jpeg >= 0.90 && scale >= 0.95 && rowcol >= 0.95 && rotate >= 0.85 && r.overall >= kOverallGate &&
                    r.failed_gates.empty();
  return {pass, fmt("jpeg %.3f>=0.90 scale %.3f>=0.95 rowcol %.3f>=0.95 rotate_crop %.3f>=0.85 overall %.3f>=0.85",
                    jpeg, scale, rowcol, rotate, r.overall)};
}

Outcome ablation() {
  std::vector<AttackSpec> grid;
  for (double t : {1.0, -1.0, 5.0, -5.0, 10.0, -10.0}) grid.push_back(attack::RotateCrop{t});
  BenchConfig on;
  BenchConfig off;
  off.with_registration = false;
  const double with = run_robustness_matrix(corpus(), grid, on).kind_rate("rotate_crop");
  const double without = run_robustness_matrix(corpus(), grid, off).kind_rate("rotate_crop");
  return {with > without, fmt("rotate_crop {+-1,+-5,+-10}: with registration %.3f, without %.3f", with, without)};
}

Outcome retrieval() {
  TempDir dir("acceptance_cbir");
  ImageStore store = ImageStore::open_or_create(dir.path / "store");
  std::vector<std::uint32_t> ids;
  for (const auto& c : library()) {
    ids.push_back(store.ingest(c.image, make_supplementary(c.image, default_params(c.image.width, c.image.height))));
  }
  int self_exact = 0;
  std::map<std::string, int> hits;
  const std::vector<std::pair<std::string, AttackSpec>> probes{
      {"jpeg:50", attack::Jpeg{50}}, {"scale:0.75", attack::Scale{0.75, 0.75}}, {"rotate_crop:5", attack::RotateCrop{5}}};
  for (std::size_t i = 0; i < library().size(); ++i) {
    const RasterImage& o = library()[i].image;
    const auto self = store.query(o);
    if (self && self->imageid == ids[i] && self->similarity == 1.0) ++self_exact;
    const RasterImage marked = embed(o, WatermarkKey(50), trial_message(i, 50), default_params(o.width, o.height)).image;
    for (const auto& [name, spec] : probes) {
      const auto q = store.query(apply_attack(marked, spec));
      if (q && q->imageid == ids[i]) ++hits[name];
    }
  }
  const int n = static_cast<int>(library().size());
  bool pass = n >= 20 && self_exact == n;
  std::string detail = fmt("%d images, self-similarity 1.0 for %d", n, self_exact);
  for (const auto& [name, spec] : probes) {
    pass = pass && hits[name] == n;
    detail += fmt(", %s top-1 %d/%d", name.c_str(), hits[name], n);
  }
  return {pass, detail};
}

Outcome coexistence() {
  const std::vector<std::int64_t> zero_bit{1111, 2222, 3333};
  const std::int64_t fingerprint_key = 4444;
  int expected = 0, found = 0, spurious = 0, probes = 0;
  std::size_t index = 0;
  for (const auto& c : corpus()) {
    const EmbedParams p = default_params(c.image.width, c.image.height);
    // A zero-bit mark is message 0: only the existence sequence is cast.
    RasterImage img = c.image;
    for (auto k : zero_bit) img = embed(img, WatermarkKey(k), 0, p).image;
    const std::uint16_t message = trial_message(index++, static_cast<std::uint32_t>(fingerprint_key));
    img = embed(img, WatermarkKey(fingerprint_key), message, p).image;

    for (auto k : zero_bit) {
      ++expected;
      if (detect(img, WatermarkKey(k), p).per_bit[kExistenceSlot].present) ++found;
    }
    ++expected;
    const DetectionResult fr = detect(img, WatermarkKey(fingerprint_key), p);
    if (fr.watermarked && fr.message == std::optional<std::uint16_t>(message)) ++found;

    std::set<std::int64_t> used(zero_bit.begin(), zero_bit.end());
    used.insert(fingerprint_key);
    MixStream rng(0xC0FFEE + index);
    for (int trial = 0; trial < 100;) {
      const auto k = static_cast<std::int64_t>(1 + rng.next() % kMaxSeed);
      if (used.count(k)) continue;
      ++trial;
      ++probes;
      const auto d = detect(img, WatermarkKey(k), p).per_bit[kExistenceSlot];
      if (d.present) ++spurious;
    }
  }
  return {found == expected && spurious == 0,
          fmt("%d/%d expected detections, %d spurious among %d non-embedded keys", found, expected, spurious,
              probes)};
}

Outcome determinism() {
  BenchConfig a;
  BenchConfig b;
  b.jobs = 4;
  const bool psnr_same = to_report(run_psnr_table(corpus(), a), a).to_tsv() ==
                         to_report(run_psnr_table(corpus(), b), b).to_tsv();
  const bool fp_same = to_report(run_fp_experiment(corpus(), a), a).to_tsv() ==
                       to_report(run_fp_experiment(corpus(), b), b).to_tsv();
  const std::string& r1 = robustness_run(1).tsv;
  const std::string& r4 = robustness_run(4).tsv;
  const bool rob_same = r1 == r4;
  return {psnr_same && fp_same && rob_same,
          fmt("psnr %s, fp %s, robustness %s (jobs 1 vs 4, %zu bytes)", psnr_same ? "identical" : "differs",
              fp_same ? "identical" : "differs", rob_same ? "identical" : "differs", r1.size())};
}

Outcome numerics() {
  std::vector<std::string> failures;
  // DCT round-trip and energy on a corpus luma plane.
  const LumaPlane plane = to_luma(corpus().front().image);
  const CoefficientPlane c = dct2(plane);
  const LumaPlane back = idct2(c);
  double err = 0.0, es = 0.0, ef = 0.0;
  for (std::size_t i = 0; i < plane.values.size(); ++i) {
    err = std::max(err, std::abs(back.values[i] - plane.values[i]));
    es += plane.values[i] * plane.values[i];
    ef += c.values[i] * c.values[i];
  }
  const double parseval = std::abs(es - ef) / es;
  if (err > 1e-6) failures.push_back("dct round-trip");
  if (parseval > 1e-6) failures.push_back("parseval");

  // Gaussian stream statistics.
  const auto g = gaussian_sequence(50, 100000);
  const double mean = mean_of(g), var = variance_of(g), ks = ks_normal(g);
  if (std::abs(mean) >= 0.013 || std::abs(var - 1.0) >= 0.026) failures.push_back("moments");
  if (ks >= 0.01) failures.push_back("ks");
  double rho = 0.0;
  const SeedVector sv = derive_seed_vector(WatermarkKey(50));
  const auto x0 = gaussian_sequence(sv.seeds[0], 16000);
  for (int s = 1; s < kSlotCount; ++s) {
    rho = std::max(rho, std::abs(correlation(x0, gaussian_sequence(sv.seeds[s], 16000))));
  }
  if (rho >= 4.0 / std::sqrt(16000.0)) failures.push_back("correlation");

  // z/T on fresh casts over the corpus bands.
  double lo = 1e9, hi = 0.0;
  int casts = 0;
  for (const auto& img : corpus()) {
    const EmbedParams p = default_params(img.image.width, img.image.height);
    const BandVector band = extract_band(dct2(to_luma(img.image)), p.band);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> t = band.values;
      const auto x = gaussian_sequence(static_cast<std::uint32_t>(1000 + trial), p.seq_len);
      const std::size_t offset = trial % kSlotCount;
      cast_sequence(t, x, offset, 0.2);
      const BitDetection d = correlate_bit(t, x, offset, 0.2);
      lo = std::min(lo, d.correlation / d.threshold);
      hi = std::max(hi, d.correlation / d.threshold);
      ++casts;
    }
  }
  if (lo < 2.0 || hi > 4.0) failures.push_back("z/T");

  std::string detail = fmt("dct err %.2e, parseval %.2e, mean %.4f, var %.4f, KS %.4f, max|rho| %.4f, z/T [%.2f, %.2f] over %d casts",
                           err, parseval, mean, var, ks, rho, lo, hi, casts);
  for (const auto& f : failures) detail += " FAILED:" + f;
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"imperceptibility", imperceptibility},
      {"round-trip", round_trip},
      {"payload combinatorics", payload},
      {"false positives", false_positives},
      {"robustness gates", robustness},
      {"registration ablation", ablation},
      {"retrieval", retrieval},
      {"multi-watermark coexistence", coexistence},
      {"determinism", determinism},
      {"numerical suite", numerics},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", number, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
