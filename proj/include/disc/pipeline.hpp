#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "disc/class_selection.hpp"
#include "disc/config.hpp"

namespace disc {

/// Settings that may differ between runs without changing any result.
struct RunOptions {
  std::filesystem::path out_dir;
  int threads = 1;
};

// Layout under the output directory:
//   config.resolved.json               resolved config, seeds and hash
//   seed_<s>/real_train.tsv            long-tail training split
//   seed_<s>/real_test.tsv             balanced test split
//   seed_<s>/reference.tsv             stage-1 reference samples
//   seed_<s>/negatives.json            negative-prompt map
//   seed_<s>/synth_<policy>.tsv        stage-2 synthetic samples
//   seed_<s>/runs/<run>.json           per-run metrics
//   seed_<s>/runs/<run>.model.json     trained classifier
//   report.json, report.txt            aggregate over seeds
//   manifest.json                      file hashes (e2e)
std::filesystem::path seed_dir(const std::filesystem::path& out, std::uint64_t seed);
std::string run_name(std::string_view policy, MixupMode mode);

/// Stable 64-bit key for a named purpose, mixed into per-seed streams.
std::uint64_t stage_seed(std::uint64_t seed, std::string_view purpose);

void cmd_gen_ref(const ExperimentConfig& cfg, const RunOptions& opts);

/// File-level negative selection: reads a reference set, writes the map.
NegativePromptMap select_negatives_file(const std::filesystem::path& reference,
                                        const FeatureExtractor& extractor,
                                        const std::filesystem::path& out,
                                        const std::string& config_hash,
                                        const std::filesystem::path* extra_real = nullptr);
void cmd_select_neg(const ExperimentConfig& cfg, const RunOptions& opts);

void cmd_synth(const ExperimentConfig& cfg, const RunOptions& opts);
void cmd_train_eval(const ExperimentConfig& cfg, const RunOptions& opts);

/// Aggregates the per-run reports into report.json and report.txt and
/// returns the text table.
std::string cmd_report(const ExperimentConfig& cfg, const RunOptions& opts);

/// All stages in order, then manifest.json. Errors carry the stage name.
std::string cmd_e2e(const ExperimentConfig& cfg, const RunOptions& opts);

/// Writes through a sibling temporary file so a crash never leaves a
/// truncated output behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace disc
