#include "wmark/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "wmark/detect.hpp"
#include "wmark/error.hpp"
#include "wmark/keystream.hpp"

namespace wmark {

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
// (lowest index) is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t workers = std::clamp<std::size_t>(jobs < 1 ? 1 : jobs, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  std::size_t failed_index = n;
  std::exception_ptr failure;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void require_inputs(const std::vector<CorpusImage>& corpus, const BenchConfig& config) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus has no images");
  if (config.keys.empty()) throw Error(ErrorCode::InvalidParams, "at least one key is required");
}

std::string join_keys(const std::vector<std::uint32_t>& keys) {
  std::string out;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(keys[i]);
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> config_echo(const BenchConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("keys", join_keys(c.keys));
  out.emplace_back("alpha", c.overrides.alpha ? format_fixed(*c.overrides.alpha, 6) : "default");
  out.emplace_back("seq_len", c.overrides.seq_len ? std::to_string(*c.overrides.seq_len) : "default");
  out.emplace_back("band_skip", c.overrides.skip ? std::to_string(*c.overrides.skip) : "default");
  out.emplace_back("band_length", c.overrides.length ? std::to_string(*c.overrides.length) : "default");
  return out;
}

bool survived(const DetectionResult& r, std::uint16_t message) {
  return r.watermarked && r.message && *r.message == message;
}

}  // namespace

std::string format_fixed(double value, int decimals) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);
  return s;
}

std::vector<CorpusImage> load_corpus(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorCode::FileNotFound, "corpus directory " + dir.string() + " not found");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm") files.push_back(entry.path());
  }
  if (files.empty()) throw Error(ErrorCode::EmptyCorpus, "no images in " + dir.string());
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  std::vector<CorpusImage> corpus;
  for (const auto& f : files) corpus.push_back({f.filename().string(), load_image(f)});
  return corpus;
}

// ---------------------------------------------------------------------------
// Reports

std::string Report::to_tsv() const {
  std::string out = "# " + title + "\n";
  for (const auto& [k, v] : config) out += "# " + k + "\t" + v + "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "\t" : "") + columns[i];
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "\t" : "") + row[i];
    out += "\n";
  }
  out += "# summary\n";
  for (const auto& [k, v] : summary) out += k + "\t" + v + "\n";
  out += std::string("status\t") + (passed ? "pass" : "fail") + "\n";
  return out;
}

std::string Report::to_table() const {
  std::vector<std::size_t> width(columns.size(), 0);
  for (std::size_t i = 0; i < columns.size(); ++i) width[i] = columns[i].size();
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size() && i < width.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += "  ";
      s += cells[i];
      if (i + 1 < cells.size()) s.append(width[i] - cells[i].size(), ' ');
    }
    return s + "\n";
  };
  std::string out = title + "\n";
  for (const auto& [k, v] : config) out += "  " + k + ": " + v + "\n";
  out += "\n" + line(columns);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out.append(total + 2 * (width.empty() ? 0 : width.size() - 1), '-');
  out += "\n";
  for (const auto& row : rows) out += line(row);
  out += "\n";
  std::size_t key_width = 6;
  for (const auto& [k, v] : summary) key_width = std::max(key_width, k.size());
  for (const auto& [k, v] : summary) out += k + std::string(key_width - k.size() + 2, ' ') + v + "\n";
  out += "status" + std::string(key_width - 6 + 2, ' ') + (passed ? "pass" : "fail") + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// PSNR

PsnrTable run_psnr_table(const std::vector<CorpusImage>& corpus, const BenchConfig& config) {
  require_inputs(corpus, config);
  PsnrTable table;
  table.rows.resize(corpus.size() * config.keys.size());
  parallel_for(table.rows.size(), config.jobs, [&](std::size_t i) {
    const auto& item = corpus[i / config.keys.size()];
    const std::uint32_t key = config.keys[i % config.keys.size()];
    const EmbedParams params = config.overrides.resolve(item.image.width, item.image.height);
    const Embedded e = embed(item.image, WatermarkKey(key), config.message, params);
    PsnrRow& row = table.rows[i];
    row.image = item.name;
    row.key = key;
    row.casts = e.receipt.casts;
    row.psnr_db = psnr(item.image, e.image);
    row.pass = row.psnr_db >= kPsnrGateDb;
  });
  table.min_psnr_db = std::numeric_limits<double>::infinity();
  table.passed = true;
  for (const auto& r : table.rows) {
    table.min_psnr_db = std::min(table.min_psnr_db, r.psnr_db);
    table.passed = table.passed && r.pass;
  }
  return table;
}

Report to_report(const PsnrTable& t, const BenchConfig& config) {
  Report r;
  r.title = "wmark bench psnr";
  r.config = config_echo(config);
  r.config.emplace_back("message", std::to_string(config.message));
  r.columns = {"image", "key", "casts", "psnr_db", "pass"};
  for (const auto& row : t.rows) {
    r.rows.push_back({row.image, std::to_string(row.key), std::to_string(row.casts),
                      format_fixed(row.psnr_db, 4), row.pass ? "1" : "0"});
  }
  r.summary = {{"rows", std::to_string(t.rows.size())},
               {"min_psnr_db", format_fixed(t.min_psnr_db, 4)},
               {"gate_db", format_fixed(kPsnrGateDb, 1)}};
  r.passed = t.passed;
  return r;
}

// ---------------------------------------------------------------------------
// False positives

FpReport run_fp_experiment(const std::vector<CorpusImage>& corpus, const BenchConfig& config) {
  require_inputs(corpus, config);
  FpReport report;
  report.keys = config.keys;
  report.cells.resize(corpus.size() * config.keys.size());
  parallel_for(report.cells.size(), config.jobs, [&](std::size_t i) {
    const auto& item = corpus[i / config.keys.size()];
    const WatermarkKey key(config.keys[i % config.keys.size()]);
    const EmbedParams params = config.overrides.resolve(item.image.width, item.image.height);
    const Embedded e = embed(item.image, key, config.message, params);
    const LumaPlane luma = to_luma(e.image);
    FpCell& cell = report.cells[i];
    cell.image = item.name;
    cell.key = key.value();
    cell.control_positive = detect_plane(luma, key, params).per_bit[kExistenceSlot].present;
    const SeedVector seeds = derive_seed_vector(key);
    for (int k = 1; k < kSlotCount; ++k) {
      const DetectionResult trial = detect_plane(luma, WatermarkKey(seeds.seeds[k]), params);
      cell.trial_positive[k - 1] = trial.per_bit[kExistenceSlot].present;
    }
  });
  for (const auto& cell : report.cells) {
    report.control_positives += cell.control_positive ? 1 : 0;
    for (bool hit : cell.trial_positive) {
      ++report.trials;
      report.false_positives += hit ? 1 : 0;
    }
  }
  report.fp_rate = static_cast<double>(report.false_positives) / static_cast<double>(report.trials);
  report.passed = report.fp_rate <= kFpRateGate && report.control_positives == report.cells.size();
  return report;
}

Report to_report(const FpReport& fp, const BenchConfig& config) {
  Report r;
  r.title = "wmark bench fp";
  r.config = config_echo(config);
  r.config.emplace_back("message", std::to_string(config.message));
  r.columns = {"image", "key", "control"};
  for (int k = 1; k < kSlotCount; ++k) r.columns.push_back("seed" + std::to_string(k));
  r.columns.push_back("false_positives");
  for (const auto& cell : fp.cells) {
    std::vector<std::string> row{cell.image, std::to_string(cell.key), cell.control_positive ? "1" : "0"};
    int hits = 0;
    for (bool hit : cell.trial_positive) {
      row.push_back(hit ? "1" : "0");
      hits += hit ? 1 : 0;
    }
    row.push_back(std::to_string(hits));
    r.rows.push_back(std::move(row));
  }
  r.summary = {{"trials", std::to_string(fp.trials)},
               {"false_positives", std::to_string(fp.false_positives)},
               {"fp_rate", format_fixed(fp.fp_rate, 6)},
               {"fp_gate", format_fixed(kFpRateGate, 6)},
               {"control_positive", std::to_string(fp.control_positives) + "/" + std::to_string(fp.cells.size())}};
  r.passed = fp.passed;
  return r;
}

// ---------------------------------------------------------------------------
// Robustness

std::vector<AttackSpec> default_attack_grid() {
  using namespace attack;
  std::vector<AttackSpec> grid;
  for (int q : {90, 70, 50, 30}) grid.emplace_back(Jpeg{q});
  for (double f : {0.5, 0.75, 1.5, 2.0}) grid.emplace_back(Scale{f, f});
  for (double f : {0.9, 0.75, 0.5}) grid.emplace_back(Crop{f});
  for (double t : {0.5, -0.5, 2.0, -2.0, 5.0, -5.0, 10.0, -10.0}) grid.emplace_back(RotateCrop{t});
  grid.emplace_back(RotateCropScale{5.0, 0.75});
  for (double s : {1.0, 5.0}) grid.emplace_back(Shear{s, s});
  grid.emplace_back(Linear{1.01, 0.013, 0.009, 1.011});
  grid.emplace_back(Aspect{0.8, 1.0});
  grid.emplace_back(Aspect{1.0, 1.1});
  grid.emplace_back(RowColRemove{1, 1});
  grid.emplace_back(RowColRemove{5, 5});
  grid.emplace_back(RowColRemove{17, 5});
  grid.emplace_back(Median{3});
  grid.emplace_back(GaussianBlur{0.8});
  grid.emplace_back(GeomDistort{1.0, 1});
  return grid;
}

std::vector<KindGate> default_kind_gates() {
  return {{"jpeg", 0.90}, {"scale", 0.95}, {"rowcol", 0.95}, {"rotate_crop", 0.85}};
}

double RobustnessReport::kind_rate(const std::string& kind) const {
  for (const auto& [k, v] : kind_average) {
    if (k == kind) return v;
  }
  throw Error(ErrorCode::InvalidSpec, "kind " + kind + " not in report");
}

std::uint16_t trial_message(std::size_t image_index, std::uint32_t key) {
  MixStream stream((static_cast<std::uint64_t>(key) << 32) ^ (0x5bd1e995ull * (image_index + 1)));
  return static_cast<std::uint16_t>(stream.next() % (kMaxMessage + 1u));
}

RobustnessReport run_robustness_matrix(const std::vector<CorpusImage>& corpus,
                                       const std::vector<AttackSpec>& grid,
                                       const BenchConfig& config) {
  require_inputs(corpus, config);
  std::vector<AttackSpec> specs;
  const bool has_identity = std::any_of(grid.begin(), grid.end(), [](const AttackSpec& s) {
    return std::holds_alternative<attack::Identity>(s);
  });
  if (!has_identity) specs.emplace_back(attack::Identity{});
  specs.insert(specs.end(), grid.begin(), grid.end());
  for (const auto& s : specs) validate_attack(s);

  const std::size_t n_keys = config.keys.size();
  const std::size_t n_marked = corpus.size() * n_keys;

  MemoryLibrary library;
  for (const auto& item : corpus) {
    const EmbedParams params = config.overrides.resolve(item.image.width, item.image.height);
    library.add(item.image, make_supplementary(item.image, params));
  }

  std::vector<RasterImage> marked(n_marked);
  std::vector<std::uint16_t> messages(n_marked);
  parallel_for(n_marked, config.jobs, [&](std::size_t i) {
    const auto& item = corpus[i / n_keys];
    const std::uint32_t key = config.keys[i % n_keys];
    messages[i] = trial_message(i / n_keys, key);
    const EmbedParams params = config.overrides.resolve(item.image.width, item.image.height);
    marked[i] = embed(item.image, WatermarkKey(key), messages[i], params).image;
  });

  std::vector<std::uint8_t> outcome(specs.size() * n_marked, 0);
  parallel_for(outcome.size(), config.jobs, [&](std::size_t i) {
    const std::size_t spec_index = i / n_marked;
    const std::size_t m = i % n_marked;
    const RasterImage attacked = apply_attack(marked[m], specs[spec_index]);
    const WatermarkKey key(config.keys[m % n_keys]);
    DetectionResult r;
    try {
      const EmbedParams params = config.overrides.resolve(attacked.width, attacked.height);
      if (config.with_registration) {
        r = detect_with_registration(attacked, key, library, params, config.registration,
                                     config.trigger);
      } else {
        r = detect(attacked, key, params);
      }
    } catch (const Error& e) {
      // An attacked image too small for any band simply does not survive.
      if (e.code() != ErrorCode::CapacityExceeded) throw;
    }
    outcome[i] = survived(r, messages[m]) ? 1 : 0;
  });

  RobustnessReport report;
  report.with_registration = config.with_registration;
  std::map<std::string, std::pair<double, int>> kind_sum;
  std::vector<std::string> kind_order;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    RobustnessCell cell;
    cell.attack = format_attack(specs[s]);
    cell.kind = attack_kind(specs[s]);
    cell.trials = n_marked;
    for (std::size_t m = 0; m < n_marked; ++m) cell.survivals += outcome[s * n_marked + m];
    report.cells.push_back(cell);
    if (!kind_sum.count(cell.kind)) kind_order.push_back(cell.kind);
    auto& [sum, count] = kind_sum[cell.kind];
    sum += cell.rate();
    ++count;
  }
  for (const auto& kind : kind_order) {
    const auto& [sum, count] = kind_sum[kind];
    report.kind_average.emplace_back(kind, sum / count);
  }

  if (report.kind_rate("identity") < 1.0) {
    throw Error(ErrorCode::SelfTestFailed, "identity control row below 100%");
  }
  double total = 0.0;
  int kinds = 0;
  for (const auto& [kind, rate] : report.kind_average) {
    if (kind == "identity") continue;
    total += rate;
    ++kinds;
  }
  report.overall = kinds ? total / kinds : 1.0;

  for (const auto& gate : default_kind_gates()) {
    for (const auto& [kind, rate] : report.kind_average) {
      if (kind == gate.kind && rate < gate.minimum) report.failed_gates.push_back(kind);
    }
  }
  if (kinds && report.overall < kOverallGate) report.failed_gates.push_back("overall");
  report.passed = report.failed_gates.empty();
  return report;
}

Report to_report(const RobustnessReport& rb, const BenchConfig& config) {
  Report r;
  r.title = "wmark bench robustness";
  r.config = config_echo(config);
  r.config.emplace_back("messages", "per (image, key) trial stream");
  std::string mode = "off";
  if (rb.with_registration) mode = config.trigger == RegistrationTrigger::Always ? "always" : "on-miss";
  r.config.emplace_back("registration", mode);
  r.columns = {"kind", "attack", "trials", "survivals", "rate"};
  for (const auto& c : rb.cells) {
    r.rows.push_back({c.kind, c.attack, std::to_string(c.trials), std::to_string(c.survivals),
                      format_fixed(c.rate(), 4)});
  }
  for (const auto& [kind, rate] : rb.kind_average) {
    std::string name = "kind_average." + kind;
    for (const auto& gate : default_kind_gates()) {
      if (gate.kind == kind) name += " (gate " + format_fixed(gate.minimum, 2) + ")";
    }
    r.summary.emplace_back(name, format_fixed(rate, 4));
  }
  r.summary.emplace_back("overall (gate " + format_fixed(kOverallGate, 2) + ")", format_fixed(rb.overall, 4));
  std::string failed;
  for (const auto& f : rb.failed_gates) failed += (failed.empty() ? "" : ",") + f;
  r.summary.emplace_back("failed_gates", failed.empty() ? "none" : failed);
  r.passed = rb.passed;
  return r;
}

}  // namespace wmark
