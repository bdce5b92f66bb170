// wmark: embed, detect, ingest, query, attack and bench from the command line.
//
// Exit codes:
//   0  success (detect: watermarked; query: confident match; bench: all gates pass)
//   1  negative outcome (detect: not watermarked; query: no confident match;
//      bench: a gate failed)
//   2  invalid arguments or attack spec
//   3  capacity: image or band too small for the parameters
//   4  I/O: unreadable/unwritable files, corrupt data, locked store
//   5  registry unreachable (detect --registry, query)
//   6  internal self-test failure

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wmark/attacks.hpp"
#include "wmark/bench.hpp"
#include "wmark/detect.hpp"
#include "wmark/error.hpp"
#include "wmark/mark.hpp"
#include "wmark/raster.hpp"
#include "wmark/registry.hpp"

namespace {

using namespace wmark;

enum Exit : int {
  kOk = 0,
  kNegative = 1,
  kUsage = 2,
  kCapacity = 3,
  kIo = 4,
  kRegistry = 5,
  kInternal = 6,
};

int exit_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParams:
    case ErrorCode::MessageOutOfRange:
    case ErrorCode::InvalidSpec:
      return kUsage;
    case ErrorCode::CapacityExceeded:
    case ErrorCode::ImageTooSmall:
    case ErrorCode::BandOutOfRange:
    case ErrorCode::LengthMismatch:
    case ErrorCode::RangeOverflow:
      return kCapacity;
    case ErrorCode::RegistryUnavailable:
      return kRegistry;
    case ErrorCode::SelfTestFailed:
      return kInternal;
    default:
      return kIo;
  }
}

struct Options {
  std::optional<double> alpha;
  std::optional<std::size_t> seq_len;
  std::optional<std::size_t> band_skip;
  std::optional<std::size_t> band_length;
  std::string store;
  std::string format = "table";
  int jobs = 1;

  std::string input;
  std::string output;
  std::int64_t key = 0;
  int message = -1;
  std::optional<int> fingerprint;
  bool ingest = false;
  bool registry = false;
  bool register_always = false;
  std::string spec;

  std::string bench_kind;
  std::string corpus = "data/corpus";
  std::string report_dir = ".";
  std::vector<std::int64_t> keys;
  std::vector<std::string> grid;
  bool no_registration = false;
};

ParamOverrides overrides(const Options& o) {
  ParamOverrides p;
  p.alpha = o.alpha;
  p.seq_len = o.seq_len;
  p.skip = o.band_skip;
  p.length = o.band_length;
  return p;
}

EmbedParams resolve_checked(const Options& o, int width, int height) {
  const EmbedParams p = overrides(o).resolve(width, height);
  check_params(p, width, height);
  return p;
}

// Two-column key/value block; tsv keeps tabs, table pads the keys.
void print_pairs(const std::vector<std::pair<std::string, std::string>>& rows, const std::string& format) {
  std::size_t width = 0;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  for (const auto& [k, v] : rows) {
    if (format == "tsv") {
      std::cout << k << '\t' << v << '\n';
    } else {
      std::cout << k << std::string(width - k.size() + 2, ' ') << v << '\n';
    }
  }
}

std::string describe_params(const EmbedParams& p) {
  return "alpha=" + format_fixed(p.alpha, 6) + " skip=" + std::to_string(p.band.skip) +
         " length=" + std::to_string(p.band.length) + " N=" + std::to_string(p.seq_len);
}

int run_embed(const Options& o) {
  if (o.message < 0 || o.message > kMaxMessage) {
    std::cerr << "wmark embed: --message must be in 0..16383\n";
    return kUsage;
  }
  if (o.ingest && o.store.empty()) {
    std::cerr << "wmark embed: --ingest needs --store\n";
    return kUsage;
  }
  const WatermarkKey key(o.key);
  const RasterImage img = load_image(o.input);
  const EmbedParams params = resolve_checked(o, img.width, img.height);
  const Embedded e = embed(img, key, o.message, params);
  save_image(e.image, o.output);

  std::vector<std::pair<std::string, std::string>> out{
      {"output", o.output},
      {"key", std::to_string(e.receipt.key)},
      {"message", std::to_string(e.receipt.payload.message)},
      {"flag", e.receipt.payload.flag ? "1" : "0"},
      {"casts", std::to_string(e.receipt.casts)},
      {"params", describe_params(e.receipt.params)},
      {"psnr_db", format_fixed(psnr(img, e.image), 4)},
  };
  if (o.ingest) {
    ImageStore store = ImageStore::open_or_create(o.store);
    const auto id = store.ingest(img, e.receipt.supplementary, e.receipt.payload.message);
    out.emplace_back("imageid", std::to_string(id));
  }
  print_pairs(out, o.format);
  return kOk;
}

int run_detect(const Options& o) {
  const WatermarkKey key(o.key);
  const RasterImage img = load_image(o.input);
  const EmbedParams params = overrides(o).resolve(img.width, img.height);
  DetectionResult r;
  if (o.registry) {
    if (o.store.empty()) {
      std::cerr << "wmark detect: --registry needs --store\n";
      return kUsage;
    }
    std::optional<ImageStore> store;
    try {
      store.emplace(ImageStore::open(o.store));
    } catch (const Error& e) {
      throw Error(ErrorCode::RegistryUnavailable, e.what());
    }
    r = detect_with_registration(img, key, *store, params, {},
                                 o.register_always ? RegistrationTrigger::Always
                                                   : RegistrationTrigger::OnMiss);
  } else {
    check_params(params, img.width, img.height);
    r = detect(img, key, params);
  }
  const std::string report = format_report(r);
  if (o.format == "tsv") {
    std::cout << report;
  } else {
    // Pad tab-separated report columns for reading.
    std::vector<std::vector<std::string>> lines;
    std::vector<std::size_t> width;
    std::size_t start = 0;
    while (start < report.size()) {
      const std::size_t end = report.find('\n', start);
      const std::string line = report.substr(start, end - start);
      std::vector<std::string> cells;
      std::size_t p = 0;
      while (true) {
        const std::size_t tab = line.find('\t', p);
        cells.push_back(line.substr(p, tab - p));
        if (tab == std::string::npos) break;
        p = tab + 1;
      }
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (width.size() <= i) width.push_back(0);
        width[i] = std::max(width[i], cells[i].size());
      }
      lines.push_back(std::move(cells));
      start = end + 1;
    }
    for (const auto& cells : lines) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        std::cout << cells[i];
        if (i + 1 < cells.size()) std::cout << std::string(width[i] - cells[i].size() + 2, ' ');
      }
      std::cout << '\n';
    }
  }
  return r.watermarked ? kOk : kNegative;
}

int run_ingest(const Options& o) {
  if (o.store.empty()) {
    std::cerr << "wmark ingest: --store is required\n";
    return kUsage;
  }
  if (o.fingerprint && (*o.fingerprint < 0 || *o.fingerprint > kMaxMessage)) {
    std::cerr << "wmark ingest: --fingerprint must be in 0..16383\n";
    return kUsage;
  }
  const RasterImage img = load_image(o.input);
  const EmbedParams params = resolve_checked(o, img.width, img.height);
  ImageStore store = ImageStore::open_or_create(o.store);
  std::optional<std::uint32_t> fp;
  if (o.fingerprint) fp = static_cast<std::uint32_t>(*o.fingerprint);
  const auto id = store.ingest(img, make_supplementary(img, params), fp);
  print_pairs({{"imageid", std::to_string(id)}, {"params", describe_params(params)}}, o.format);
  return kOk;
}

int run_query(const Options& o) {
  if (o.store.empty()) {
    std::cerr << "wmark query: --store is required\n";
    return kUsage;
  }
  const RasterImage img = load_image(o.input);
  std::optional<QueryResult> q;
  try {
    q = ImageStore::open(o.store).query(img);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::StoreUnavailable) throw Error(ErrorCode::RegistryUnavailable, e.what());
    throw;
  }
  if (!q) {
    print_pairs({{"match", "none"}}, o.format);
    return kNegative;
  }
  print_pairs({{"imageid", std::to_string(q->imageid)},
               {"similarity", format_fixed(q->similarity, 6)},
               {"confident", q->confident ? "yes" : "no"}},
              o.format);
  return q->confident ? kOk : kNegative;
}

int run_attack(const Options& o) {
  const AttackSpec spec = parse_attack(o.spec);
  const RasterImage img = load_image(o.input);
  const RasterImage out = apply_attack(img, spec);
  save_image(out, o.output);
  print_pairs({{"attack", format_attack(spec)},
               {"size", std::to_string(out.width) + "x" + std::to_string(out.height)},
               {"output", o.output}},
              o.format);
  return kOk;
}

int run_bench(const Options& o) {
  BenchConfig config;
  if (!o.keys.empty()) {
    config.keys.clear();
    for (auto k : o.keys) config.keys.push_back(WatermarkKey(k).value());
  }
  config.overrides = overrides(o);
  config.jobs = o.jobs;
  config.with_registration = !o.no_registration;
  if (o.message >= 0) {
    if (o.message > kMaxMessage) {
      std::cerr << "wmark bench: --message must be in 0..16383\n";
      return kUsage;
    }
    config.message = static_cast<std::uint16_t>(o.message);
  }
  std::vector<AttackSpec> grid;
  for (const auto& s : o.grid) grid.push_back(parse_attack(s));

  const auto corpus = load_corpus(o.corpus);
  Report report;
  std::string file;
  if (o.bench_kind == "psnr") {
    report = to_report(run_psnr_table(corpus, config), config);
    file = "psnr.tsv";
  } else if (o.bench_kind == "fp") {
    report = to_report(run_fp_experiment(corpus, config), config);
    file = "fp.tsv";
  } else {
    if (grid.empty()) grid = default_attack_grid();
    report = to_report(run_robustness_matrix(corpus, grid, config), config);
    file = "robustness.tsv";
  }
  report.config.insert(report.config.begin(), {"corpus", std::to_string(corpus.size()) + " images"});

  std::filesystem::create_directories(o.report_dir);
  const auto path = std::filesystem::path(o.report_dir) / file;
  std::ofstream f(path, std::ios::binary);
  f << report.to_tsv();
  f.close();
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  std::cout << (o.format == "tsv" ? report.to_tsv() : report.to_table());
  return report.passed ? kOk : kNegative;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spread-spectrum DCT image watermarking with registry-assisted detection"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file with defaults for the global options");
  Options o;

  app.add_option("--alpha", o.alpha, "Casting strength in (0, 1]");
  app.add_option("--seq-len", o.seq_len, "Sequence length N");
  app.add_option("--band-skip", o.band_skip, "Zig-zag coefficients skipped before the band");
  app.add_option("--band-length", o.band_length, "Band length M");
  app.add_option("--store", o.store, "Image library directory");
  app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"table", "tsv"}));
  app.add_option("--jobs", o.jobs, "Bench worker threads")->check(CLI::Range(1, 256));

  auto* embed_cmd = app.add_subcommand("embed", "Embed a 14-bit message");
  embed_cmd->add_option("input", o.input, "Input image")->required();
  embed_cmd->add_option("output", o.output, "Output image (.png, .pgm, .ppm)")->required();
  embed_cmd->add_option("--key", o.key, "Watermark key 1..2147483647")->required();
  embed_cmd->add_option("--message", o.message, "Message 0..16383")->required();
  embed_cmd->add_flag("--ingest", o.ingest, "Store the original and its parameters in --store");

  auto* detect_cmd = app.add_subcommand("detect", "Detect and decode a watermark");
  detect_cmd->add_option("input", o.input, "Suspect image")->required();
  detect_cmd->add_option("--key", o.key, "Watermark key")->required();
  detect_cmd->add_flag("--registry", o.registry, "Register against the library in --store on a miss");
  detect_cmd->add_flag("--register-always", o.register_always,
                       "With --registry, register whenever a confident match exists");

  auto* ingest_cmd = app.add_subcommand("ingest", "Add an original to the library");
  ingest_cmd->add_option("input", o.input, "Original image")->required();
  ingest_cmd->add_option("--fingerprint", o.fingerprint, "Message embedded in copies of this original");

  auto* query_cmd = app.add_subcommand("query", "Find the closest library original");
  query_cmd->add_option("input", o.input, "Probe image")->required();

  auto* attack_cmd = app.add_subcommand("attack", "Apply an attack spec such as jpeg:50 or rowcol:5,5");
  attack_cmd->add_option("input", o.input, "Input image")->required();
  attack_cmd->add_option("output", o.output, "Output image")->required();
  attack_cmd->add_option("spec", o.spec, "Attack spec")->required();

  auto* bench_cmd = app.add_subcommand("bench", "Run psnr, fp or robustness experiments");
  bench_cmd->add_option("kind", o.bench_kind, "psnr | fp | robustness")
      ->required()
      ->check(CLI::IsMember({"psnr", "fp", "robustness"}));
  bench_cmd->add_option("--corpus", o.corpus, "Directory of corpus images");
  bench_cmd->add_option("--out", o.report_dir, "Directory for the .tsv report");
  bench_cmd->add_option("--keys", o.keys, "Comma-separated watermark keys")->delimiter(',');
  bench_cmd->add_option("--message", o.message, "Payload for psnr and fp");
  bench_cmd->add_option("--grid", o.grid, "Semicolon-separated attack specs")->delimiter(';');
  bench_cmd->add_flag("--no-registration", o.no_registration, "Plain detection only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*embed_cmd) return run_embed(o);
    if (*detect_cmd) return run_detect(o);
    if (*ingest_cmd) return run_ingest(o);
    if (*query_cmd) return run_query(o);
    if (*attack_cmd) return run_attack(o);
    if (*bench_cmd) return run_bench(o);
  } catch (const Error& e) {
    std::cerr << "wmark: " << e.what() << '\n';
    return exit_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "wmark: " << e.what() << '\n';
    return kIo;
  }
  return kUsage;
}
