#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wmark/attacks.hpp"
#include "wmark/mark.hpp"
#include "wmark/raster.hpp"
#include "wmark/registry.hpp"

namespace wmark {

struct CorpusImage {
  std::string name;  // file name without directory
  RasterImage image;
};

/// All .png/.pgm/.ppm files of dir, sorted by name. Throws EmptyCorpus.
std::vector<CorpusImage> load_corpus(const std::filesystem::path& dir);

inline constexpr double kPsnrGateDb = 40.0;
inline constexpr double kFpRateGate = 0.01;
/// Worst-case payload: popcount 7 with no flag, so 8 sequences are cast.
inline constexpr std::uint16_t kWorstCaseMessage = 0x2AAA;

struct BenchConfig {
  std::vector<std::uint32_t> keys{50, 100, 200, 350, 700};
  std::uint16_t message = kWorstCaseMessage;
  ParamOverrides overrides;
  bool with_registration = true;
  RegistrationOptions registration;
  /// Registers whenever the library has a confident match; a plain pass can
  /// keep the existence bit under small desynchronization while losing
  /// message bits.
  RegistrationTrigger trigger = RegistrationTrigger::Always;
  /// Worker threads for the robustness matrix; never affects report bytes.
  int jobs = 1;
};

/// Plain text table with an optional trailing summary block.
struct Report {
  std::string title;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::pair<std::string, std::string>> summary;
  bool passed = true;

  std::string to_tsv() const;
  std::string to_table() const;
};

struct PsnrRow {
  std::string image;
  std::uint32_t key = 0;
  int casts = 0;
  double psnr_db = 0.0;
  bool pass = false;
};

struct PsnrTable {
  std::vector<PsnrRow> rows;
  double min_psnr_db = 0.0;
  bool passed = false;
};

/// One row per (image, key). Throws EmptyCorpus / InvalidParams for empty inputs.
PsnrTable run_psnr_table(const std::vector<CorpusImage>& corpus, const BenchConfig& config);

struct FpCell {
  std::string image;
  std::uint32_t key = 0;
  bool control_positive = false;
  std::array<bool, kSlotCount - 1> trial_positive{};  // derived seeds 1..15
};

struct FpReport {
  std::vector<std::uint32_t> keys;
  std::vector<FpCell> cells;
  std::size_t trials = 0;
  std::size_t false_positives = 0;
  double fp_rate = 0.0;
  std::size_t control_positives = 0;
  bool passed = false;
};

/// Embeds each (image, key) and probes it with the key's 15 derived seeds.
FpReport run_fp_experiment(const std::vector<CorpusImage>& corpus, const BenchConfig& config);

/// The default grid, parameters per family as published with the bench.
std::vector<AttackSpec> default_attack_grid();

struct RobustnessCell {
  std::string attack;  // canonical text form
  std::string kind;
  std::size_t trials = 0;
  std::size_t survivals = 0;
  double rate() const { return trials ? static_cast<double>(survivals) / trials : 0.0; }
};

struct KindGate {
  std::string kind;
  double minimum = 0.0;
};

/// Per-kind thresholds checked when the kind appears in the grid.
std::vector<KindGate> default_kind_gates();
inline constexpr double kOverallGate = 0.85;

struct RobustnessReport {
  bool with_registration = true;
  std::vector<RobustnessCell> cells;  // grid order, identity first
  std::vector<std::pair<std::string, double>> kind_average;  // first-seen order
  double overall = 0.0;  // unweighted mean of kind averages, identity excluded
  std::vector<std::string> failed_gates;
  bool passed = false;

  double kind_rate(const std::string& kind) const;
};

/// Message for trial (image index, key): drawn from a stream seeded by both.
std::uint16_t trial_message(std::size_t image_index, std::uint32_t key);

/// Survival = watermarked and exact message. An identity row is prepended
/// when the grid lacks one; Throws SelfTestFailed if it is not 100%.
RobustnessReport run_robustness_matrix(const std::vector<CorpusImage>& corpus,
                                       const std::vector<AttackSpec>& grid,
                                       const BenchConfig& config);

Report to_report(const PsnrTable& table, const BenchConfig& config);
Report to_report(const FpReport& fp, const BenchConfig& config);
Report to_report(const RobustnessReport& robustness, const BenchConfig& config);

/// Fixed-notation real with the given number of decimals; "inf" for +inf.
std::string format_fixed(double value, int decimals);

}  // namespace wmark
