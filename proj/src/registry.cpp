#include "wmark/registry.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>

#include "wmark/error.hpp"

namespace wmark {

namespace fs = std::filesystem;

FeatureVector extract_features(const RasterImage& img) {
  img.validate();
  FeatureVector f;
  std::array<std::size_t, kHistogramBins> counts{};
  const std::size_t n = img.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    int r, g, b;
    if (img.channels == 1) {
      r = g = b = img.samples[i] >> 6;
    } else {
      r = img.samples[i * 3] >> 6;
      g = img.samples[i * 3 + 1] >> 6;
      b = img.samples[i * 3 + 2] >> 6;
    }
    ++counts[static_cast<std::size_t>(r * 16 + g * 4 + b)];
  }
  for (int k = 0; k < kHistogramBins; ++k) {
    f.color_hist[k] = static_cast<double>(counts[k]) / static_cast<double>(n);
  }

  const LumaPlane luma = to_luma(img);
  double mean = 0.0;
  for (double v : luma.values) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m3 = 0.0;
  for (double v : luma.values) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  const double sd = std::sqrt(m2);
  f.luma_moments = {mean, sd, sd > 0.0 ? m3 / (sd * sd * sd) : 0.0};
  return f;
}

double similarity(const FeatureVector& a, const FeatureVector& b) {
  double l1 = 0.0;
  for (int k = 0; k < kHistogramBins; ++k) l1 += std::abs(a.color_hist[k] - b.color_hist[k]);
  return std::clamp(1.0 - l1 / 2.0, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Index records

namespace {

void append_real(std::string& out, double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

template <typename T>
T parse_number(const std::string& field) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw Error(ErrorCode::CorruptData, "bad numeric field '" + field + "'");
  }
  return value;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

constexpr std::size_t kBaseFieldCount = 2 + kHistogramBins + 3 + 8;

}  // namespace

std::string format_record(const LibraryRecord& r) {
  std::string out = std::to_string(r.imageid);
  out += '\t';
  out += r.original_path;
  for (double h : r.features.color_hist) {
    out += '\t';
    append_real(out, h);
  }
  for (double m : r.features.luma_moments) {
    out += '\t';
    append_real(out, m);
  }
  const auto& s = r.supplementary;
  out += '\t' + std::to_string(s.orig_width) + '\t' + std::to_string(s.orig_height);
  out += '\t' + std::to_string(s.band.skip) + '\t' + std::to_string(s.band.length);
  out += '\t' + std::to_string(s.seq_len);
  for (double v : {s.alpha, s.luma_mean, s.luma_var}) {
    out += '\t';
    append_real(out, v);
  }
  if (r.key_fingerprint) out += '\t' + std::to_string(*r.key_fingerprint);
  return out;
}

LibraryRecord parse_record(const std::string& line) {
  const auto f = split_tabs(line);
  if (f.size() != kBaseFieldCount && f.size() != kBaseFieldCount + 1) {
    throw Error(ErrorCode::CorruptData, "index record has " + std::to_string(f.size()) + " fields");
  }
  LibraryRecord r;
  std::size_t i = 0;
  r.imageid = parse_number<std::uint32_t>(f[i++]);
  r.original_path = f[i++];
  for (double& h : r.features.color_hist) h = parse_number<double>(f[i++]);
  for (double& m : r.features.luma_moments) m = parse_number<double>(f[i++]);
  auto& s = r.supplementary;
  s.orig_width = parse_number<int>(f[i++]);
  s.orig_height = parse_number<int>(f[i++]);
  s.band.skip = parse_number<std::size_t>(f[i++]);
  s.band.length = parse_number<std::size_t>(f[i++]);
  s.seq_len = parse_number<std::size_t>(f[i++]);
  s.alpha = parse_number<double>(f[i++]);
  s.luma_mean = parse_number<double>(f[i++]);
  s.luma_var = parse_number<double>(f[i++]);
  if (i < f.size()) r.key_fingerprint = parse_number<std::uint32_t>(f[i]);
  return r;
}

// ---------------------------------------------------------------------------
// ImageStore

namespace {

constexpr const char* kIndexName = "index.tsv";
constexpr const char* kLockName = ".lock";
constexpr const char* kOriginalsDir = "originals";

class FileDescriptor {
 public:
  explicit FileDescriptor(int fd) : fd_(fd) {}
  ~FileDescriptor() {
    if (fd_ >= 0) ::close(fd_);
  }
  FileDescriptor(const FileDescriptor&) = delete;
  FileDescriptor& operator=(const FileDescriptor&) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

std::optional<QueryResult> best_match(const FeatureVector& probe,
                                      const std::vector<std::pair<std::uint32_t, const FeatureVector*>>& items) {
  std::optional<QueryResult> best;
  for (const auto& [id, features] : items) {
    const double s = similarity(probe, *features);
    if (!best || s > best->similarity) best = QueryResult{id, s, s >= kConfidenceThreshold};
  }
  return best;
}

}  // namespace

ImageStore ImageStore::open(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_regular_file(root / kIndexName, ec)) {
    throw Error(ErrorCode::StoreUnavailable, "no image store at " + root.string());
  }
  return ImageStore(root);
}

ImageStore ImageStore::open_or_create(const fs::path& root) {
  std::error_code ec;
  fs::create_directories(root / kOriginalsDir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create store at " + root.string());
  const fs::path index = root / kIndexName;
  if (!fs::exists(index, ec)) {
    std::ofstream touch(index, std::ios::app);
    if (!touch) throw Error(ErrorCode::IoFailure, "cannot create " + index.string());
  }
  return ImageStore(root);
}

std::vector<LibraryRecord> ImageStore::records() const {
  std::ifstream in(root_ / kIndexName, std::ios::binary);
  if (!in) throw Error(ErrorCode::StoreUnavailable, "cannot read index under " + root_.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::vector<LibraryRecord> out;
  std::size_t start = 0;
  // An unterminated tail is a record still being written; skip it.
  for (std::size_t nl = text.find('\n'); nl != std::string::npos; nl = text.find('\n', start)) {
    if (nl > start) out.push_back(parse_record(text.substr(start, nl - start)));
    start = nl + 1;
  }
  return out;
}

std::optional<LibraryRecord> ImageStore::record(std::uint32_t imageid) const {
  for (auto& r : records()) {
    if (r.imageid == imageid) return r;
  }
  return std::nullopt;
}

std::uint32_t ImageStore::ingest(const RasterImage& img, const SupplementaryInfo& supplementary,
                                 std::optional<std::uint32_t> key_fingerprint) {
  img.validate();
  FileDescriptor lock(::open((root_ / kLockName).c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644));
  if (lock.get() < 0) throw Error(ErrorCode::IoFailure, "cannot open store lock");
  if (::flock(lock.get(), LOCK_EX | LOCK_NB) != 0) {
    throw Error(ErrorCode::StoreLocked, "another writer holds " + root_.string());
  }

  std::uint32_t next_id = 1;
  for (const auto& r : records()) next_id = std::max(next_id, r.imageid + 1);

  LibraryRecord entry;
  entry.imageid = next_id;
  entry.original_path = std::string(kOriginalsDir) + "/" + std::to_string(next_id) +
                         (img.channels == 1 ? ".pgm" : ".ppm");
  entry.features = extract_features(img);
  entry.supplementary = supplementary;
  entry.key_fingerprint = key_fingerprint;

  const fs::path target = root_ / entry.original_path;
  const fs::path staging = target.string() + ".tmp";
  {
    const auto bytes = encode_pnm(img);
    FileDescriptor out(::open(staging.c_str(), O_CREAT | O_WRONLY | O_TRUNC | O_CLOEXEC, 0644));
    if (out.get() < 0 ||
        ::write(out.get(), bytes.data(), bytes.size()) != static_cast<ssize_t>(bytes.size()) ||
        ::fsync(out.get()) != 0) {
      throw Error(ErrorCode::IoFailure, "cannot write " + staging.string());
    }
  }
  std::error_code ec;
  fs::rename(staging, target, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot place " + target.string());

  const std::string line = format_record(entry) + "\n";
  FileDescriptor index(::open((root_ / kIndexName).c_str(), O_WRONLY | O_APPEND | O_CLOEXEC));
  if (index.get() < 0 ||
      ::write(index.get(), line.data(), line.size()) != static_cast<ssize_t>(line.size()) ||
      ::fsync(index.get()) != 0) {
    throw Error(ErrorCode::IoFailure, "cannot append to index");
  }
  return next_id;
}

std::optional<QueryResult> ImageStore::query(const RasterImage& probe) const {
  const auto all = records();
  std::vector<std::pair<std::uint32_t, const FeatureVector*>> items;
  items.reserve(all.size());
  for (const auto& r : all) items.emplace_back(r.imageid, &r.features);
  return best_match(extract_features(probe), items);
}

RasterImage ImageStore::original(std::uint32_t imageid) const {
  const auto r = record(imageid);
  if (!r) throw Error(ErrorCode::StoreUnavailable, "no record " + std::to_string(imageid));
  return load_image(root_ / r->original_path);
}

SupplementaryInfo ImageStore::supplementary(std::uint32_t imageid) const {
  const auto r = record(imageid);
  if (!r) throw Error(ErrorCode::StoreUnavailable, "no record " + std::to_string(imageid));
  return r->supplementary;
}

// ---------------------------------------------------------------------------
// MemoryLibrary

std::uint32_t MemoryLibrary::add(RasterImage original, const SupplementaryInfo& supplementary) {
  FeatureVector features = extract_features(original);
  entries_.push_back({std::move(original), features, supplementary});
  return static_cast<std::uint32_t>(entries_.size());
}

std::optional<QueryResult> MemoryLibrary::query(const RasterImage& probe) const {
  std::vector<std::pair<std::uint32_t, const FeatureVector*>> items;
  items.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    items.emplace_back(static_cast<std::uint32_t>(i + 1), &entries_[i].features);
  }
  return best_match(extract_features(probe), items);
}

RasterImage MemoryLibrary::original(std::uint32_t imageid) const {
  if (imageid == 0 || imageid > entries_.size()) {
    throw Error(ErrorCode::StoreUnavailable, "no record " + std::to_string(imageid));
  }
  return entries_[imageid - 1].original;
}

SupplementaryInfo MemoryLibrary::supplementary(std::uint32_t imageid) const {
  if (imageid == 0 || imageid > entries_.size()) {
    throw Error(ErrorCode::StoreUnavailable, "no record " + std::to_string(imageid));
  }
  return entries_[imageid - 1].supplementary;
}

}  // namespace wmark
