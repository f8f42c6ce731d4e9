#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "disc/augment_train.hpp"
#include "disc/class_selection.hpp"
#include "disc/gm_world.hpp"
#include "disc/guidance.hpp"
#include "disc/sampler.hpp"

namespace disc {

struct ScheduleParams {
  int num_train_steps = 1000;
  double beta_min = 1e-4;
  double beta_max = 0.02;
};

struct ExtractorParams {
  ExtractorKind kind = ExtractorKind::Identity;
  int out_dim = 16;
  std::uint64_t seed = 7;
  bool explicit_kind = false;  // false: identity for 2-D, projection otherwise
};

struct ReferenceParams {
  std::size_t per_class = 64;
  GuidancePolicy policy = GuidancePolicy::cads(2.0);
  ExtractorParams extractor;
  bool mix_real = false;  // include real rows when computing class mean features
};

struct LongTailParams {
  std::size_t n_max = 200;
  double imbalance_factor = 100.0;
  std::size_t test_per_class = 500;
  std::size_t head_threshold = 20;
};

/// Fully resolved experiment description. The world is always held inline,
/// whether it came from a preset file or the config itself.
struct ExperimentConfig {
  std::string world_source = "overlap5";  // preset name, or "inline"
  std::optional<GaussianMixtureWorld> world;
  ScheduleParams schedule;
  SamplerConfig sampler;
  ReferenceParams reference;
  std::vector<GuidancePolicy> policies;
  LongTailParams longtail;
  TrainConfig train;
  std::vector<MixupMode> mixup_modes{MixupMode::None, MixupMode::All};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string output_dir = "out";

  NoiseSchedule make_schedule() const;
  FeatureExtractor make_extractor() const;

  /// Canonical JSON of everything that determines results (excludes the
  /// output directory and thread count).
  nlohmann::ordered_json resolved_json() const;
  /// 16 hex digits of FNV-1a over resolved_json().dump().
  std::string hash() const;
};

std::filesystem::path default_preset_dir();
GaussianMixtureWorld load_preset(const std::string& name, const std::filesystem::path& dir);
GaussianMixtureWorld world_from_json(const nlohmann::json& j, const std::string& name);
nlohmann::ordered_json world_to_json(const GaussianMixtureWorld& world);

/// Parses a config document; throws ConfigError with the line (syntax) or
/// field path (content) of the first problem.
ExperimentConfig parse_config(const std::string& text,
                              const std::optional<std::filesystem::path>& preset_dir = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path);

/// The built-in default experiment (preset "overlap5", five seeds, the full
/// guidance grid).
ExperimentConfig default_config();
std::string default_config_text();

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

}  // namespace disc
